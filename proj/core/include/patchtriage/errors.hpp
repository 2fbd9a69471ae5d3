#pragma once

#include <stdexcept>
#include <string>

namespace patchtriage {

/// Caller passed a value outside an operation's contract (bad dimensions,
/// out-of-range index, malformed config value).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The inputs are well-formed but the requested quantity does not exist for
/// them (zero variance, missing anatomy, all-zero differences).
class NotComputable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A mask carries no lung pixels, so nothing can be sampled from it.
class NoLungError : public NotComputable {
 public:
  using NotComputable::NotComputable;
};

/// An operation was invoked out of order (e.g. backward without forward).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace patchtriage
