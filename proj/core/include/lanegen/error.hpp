#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lanegen {

enum class ErrorCode {
  InvalidArgument,
  DegeneratePolyline,
  EmptyInput,
  CyclicTileGraph,
  InvalidWidth,
  UninterpolatableDivider,
  UnknownLayout,
  MalformedScene,
  EmptyTile,
  ZeroDirection,
  BadResolution,
  BadHeadDim,
  BadCost,
  NoInstances,
  NonFiniteLoss,
  BadConfig,
  BadCheckpoint,
  IoError,
};

/// Stable machine-readable name, e.g. "DegeneratePolyline".
std::string_view to_string(ErrorCode code);

/// The single exception type thrown by the library. The CLI prints
/// `error: <code>: <message>` so scripts can match on the code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lanegen
