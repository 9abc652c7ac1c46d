#include "lanegen/error.hpp"

namespace lanegen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegeneratePolyline: return "DegeneratePolyline";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::CyclicTileGraph: return "CyclicTileGraph";
    case ErrorCode::InvalidWidth: return "InvalidWidth";
    case ErrorCode::UninterpolatableDivider: return "UninterpolatableDivider";
    case ErrorCode::UnknownLayout: return "UnknownLayout";
    case ErrorCode::MalformedScene: return "MalformedScene";
    case ErrorCode::EmptyTile: return "EmptyTile";
    case ErrorCode::ZeroDirection: return "ZeroDirection";
    case ErrorCode::BadResolution: return "BadResolution";
    case ErrorCode::BadHeadDim: return "BadHeadDim";
    case ErrorCode::BadCost: return "BadCost";
    case ErrorCode::NoInstances: return "NoInstances";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace lanegen
