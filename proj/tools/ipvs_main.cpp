#include "ipvs/cli.hpp"

int main(int argc, char** argv) { return ipvs::run_cli(argc, argv); }
