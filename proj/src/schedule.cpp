#include "rsgd/schedule.hpp"

#include <cmath>
#include <cstdio>

namespace rsgd {

namespace {
std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}
}  // namespace

StepSchedule StepSchedule::constant(double s) {
  StepSchedule sch;
  sch.kind = Kind::Constant;
  sch.s = s;
  sch.validate();
  return sch;
}

StepSchedule StepSchedule::regime1(double s0, double c) {
  StepSchedule sch;
  sch.kind = Kind::Regime1;
  sch.s0 = s0;
  sch.c = c;
  sch.validate();
  return sch;
}

StepSchedule StepSchedule::regime2(double a, double b) {
  StepSchedule sch;
  sch.kind = Kind::Regime2;
  sch.a = a;
  sch.b = b;
  sch.validate();
  return sch;
}

void StepSchedule::validate() const {
  switch (kind) {
    case Kind::Constant:
      if (!(s > 0.0)) throw ConfigError("constant schedule requires s > 0");
      break;
    case Kind::Regime1:
      if (!(s0 > 0.0)) throw ConfigError("regime1 requires s0 > 0");
      if (!(c > 0.0 && c < 1.0)) throw ConfigError("regime1 requires 0 < c < 1");
      if (!(c * s0 < 1.0))
        throw ConfigError("regime1 requires c*s0 < 1, otherwise the sequence can "
                          "leave (0, s0]");
      break;
    case Kind::Regime2:
      if (!(a > 0.0)) throw ConfigError("regime2 requires a > 0");
      if (!(b > 0.5 && b <= 1.0)) throw ConfigError("regime2 requires 1/2 < b <= 1");
      break;
  }
}

std::string StepSchedule::label() const {
  switch (kind) {
    case Kind::Constant:
      return "constant_" + short_num(s);
    case Kind::Regime1:
      return "regime1_s0_" + short_num(s0) + "_c_" + short_num(c);
    case Kind::Regime2:
      return "regime2_a_" + short_num(a) + "_b_" + short_num(b);
  }
  return "schedule";
}

double step_size(const StepSchedule& sched, long k, std::optional<double> prev) {
  sched.validate();
  if (k < 0) throw ConfigError("step_size: k must be >= 0");
  switch (sched.kind) {
    case StepSchedule::Kind::Constant:
      return sched.s;
    case StepSchedule::Kind::Regime1: {
      if (k == 0) return sched.s0;
      if (!prev)
        throw ConfigError("regime1 step at k > 0 needs the previous step value");
      return (1.0 - sched.c * *prev) * *prev;
    }
    case StepSchedule::Kind::Regime2:
      return sched.a / std::pow(1.0 + static_cast<double>(k), sched.b);
  }
  throw ConfigError("unknown schedule kind");
}

}  // namespace rsgd
