#include "ipvs/errors.hpp"

namespace ipvs {

std::string_view name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateView: return "DegenerateView";
    case ErrorKind::InsufficientViews: return "InsufficientViews";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::InvalidTolerance: return "InvalidTolerance";
    case ErrorKind::InvalidRadius: return "InvalidRadius";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::OutOfPlaneMotion: return "OutOfPlaneMotion";
    case ErrorKind::SearchExhausted: return "SearchExhausted";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::LeakedInsertion: return "LeakedInsertion";
    case ErrorKind::NotDifferentiableKind: return "NotDifferentiableKind";
    case ErrorKind::SaturatedCorrection: return "SaturatedCorrection";
    case ErrorKind::AllInsertionsFailed: return "AllInsertionsFailed";
    case ErrorKind::TooFewInsertions: return "TooFewInsertions";
    case ErrorKind::ModelsNotDeployed: return "ModelsNotDeployed";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace ipvs
