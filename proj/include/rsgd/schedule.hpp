#pragma once

#include <optional>
#include <string>

#include "rsgd/errors.hpp"

namespace rsgd {

// Step-size rules: Constant s_k = s; Regime1 s_0 given, s_{k+1} = (1 - c s_k) s_k;
// Regime2 s_k = a / (1 + k)^b.
struct StepSchedule {
  enum class Kind { Constant, Regime1, Regime2 };

  Kind kind = Kind::Constant;
  double s = 0.0;        // Constant
  double s0 = 0.0, c = 0.0;  // Regime1
  double a = 0.0, b = 0.0;   // Regime2

  static StepSchedule constant(double s);
  static StepSchedule regime1(double s0, double c);
  static StepSchedule regime2(double a, double b);

  // Throws ConfigError on out-of-range parameters (s > 0; s0 > 0, 0 < c < 1,
  // c*s0 < 1; a > 0, 1/2 < b <= 1).
  void validate() const;

  // Short identifier used for sweep directory names, e.g. "constant_0.01".
  std::string label() const;

  bool operator==(const StepSchedule&) const = default;
};

// alpha_k. Regime1 is a stateful recursion: callers must pass alpha_{k-1}
// as prev for k > 0.
double step_size(const StepSchedule& sched, long k,
                 std::optional<double> prev = std::nullopt);

// Iterator the run loop uses; carries the Regime1 state.
class StepSequence {
 public:
  explicit StepSequence(StepSchedule sched) : sched_(sched) { sched_.validate(); }

  // alpha_k for k = 0, 1, 2, ... in successive calls.
  double next() {
    const double alpha =
        step_size(sched_, k_, k_ > 0 ? std::optional<double>(prev_) : std::nullopt);
    prev_ = alpha;
    ++k_;
    return alpha;
  }

 private:
  StepSchedule sched_;
  long k_ = 0;
  double prev_ = 0.0;
};

}  // namespace rsgd
