#pragma once

#include <stdexcept>
#include <string>

namespace misspec {

/// A steplength, schedule or problem constant violates the hypotheses the
/// schemes are analyzed under.
class InadmissibleParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace misspec
