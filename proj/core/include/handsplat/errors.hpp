#pragma once

#include <stdexcept>
#include <string>

namespace handsplat {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A bone of zero length or other unusable joint layout.
struct DegenerateSkeletonError : Error {
  using Error::Error;
};

// Adjacent palm bones are collinear; the palm plane normal is undefined.
struct DegeneratePalmError : Error {
  using Error::Error;
};

// Bone parallel to the local y-axis: the xz projection vanishes and the
// flexion angle is undefined.
struct GimbalDegenerateError : Error {
  GimbalDegenerateError(int joint, const std::string& msg)
      : Error(msg), joint_index(joint) {}
  int joint_index = -1;
};

// Interior sampling could not fill a bone's quota within the retry budget.
struct SamplingExhaustedError : Error {
  using Error::Error;
};

// Query point violates a geometric domain precondition (e.g. outside mesh).
struct DomainError : Error {
  using Error::Error;
};

// Backward pass requested on an eval-mode render with no tape.
struct MissingTapeError : Error {
  using Error::Error;
};

// Checkpoint/file version or shape does not match the consumer.
struct VersionError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace handsplat
