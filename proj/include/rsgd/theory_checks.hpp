#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsgd/objectives.hpp"

namespace rsgd {

// Piecewise-geodesic test curve. Geodesic curves on manifolds without a
// closed-form exponential fall back to the retraction curve t -> R_x(t v);
// piecewise segments between vertices use slerp on spheres, straight lines on
// Euclidean blocks and the qf-interpolation qf((1-t) A + t B) on Stiefel.
struct CurveSpec {
  enum class Type { Geodesic, Piecewise, Loop };

  Type type;
  int t_steps = 64;
  std::optional<ManifoldPoint> start;     // Geodesic
  std::optional<TangentVector> velocity;  // Geodesic
  std::vector<ManifoldPoint> vertices;    // Piecewise / Loop (closed)

  static CurveSpec geodesic(ManifoldPoint x, TangentVector v, int t_steps);
  // Loop vertices are closed automatically (first vertex re-appended).
  static CurveSpec piecewise(std::vector<ManifoldPoint> vertices, int t_steps);
  static CurveSpec loop(std::vector<ManifoldPoint> vertices, int t_steps);

  const ManifoldDescriptor& descriptor() const;
  int segment_count() const;
};

ManifoldPoint curve_point(const CurveSpec& curve, double t);
// d gamma / dt with respect to the global parameter t in [0, 1]. Only valid
// away from segment corners; the checks sample strictly interior nodes.
TangentVector curve_velocity(const CurveSpec& curve, double t);
double curve_length(const CurveSpec& curve, int n_quad = 128);

// Midpoint nodes aligned with the curve's segments (at least min_per_segment
// nodes each), so quadrature never straddles a velocity kink at a corner.
std::vector<double> segment_aligned_nodes(const CurveSpec& curve, int total,
                                          int min_per_segment = 4);

// Closed loop of retracted random tangents around a random base point.
CurveSpec random_loop(const ManifoldDescriptor& d, int n_vertices, double radius,
                      int t_steps, CounterRng& rng);

// Machine-readable verifier outcome: pass iff max_defect <= tolerance.
struct CheckReport {
  std::string name;
  bool pass = false;
  double max_defect = 0.0;
  double tolerance = 0.0;
  int sample_count = 0;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;
};

using RetractionFn =
    std::function<ManifoldPoint(const ManifoldPoint&, const TangentVector&)>;

// Deliberately broken retraction (wrong differential at zero) used as the
// negative-control fixture.
RetractionFn scaled_retraction(double factor);

// Negates every subgradient selection while keeping values; breaks the chain
// rule and the gradient-a.e. identity.
ObjectivePtr flip_subgrad_sign(ObjectivePtr obj);

// Zero law R_x(0) = x exactly, plus the first-order law via the log-log slope
// of h -> ||R_x(h v) - ref(h)|| over h in {1e-1, ..., 1e-4}, where ref is the
// exponential map when available and x + h v otherwise. Requires slope >= 1.9
// (defect identically at noise level counts as exact).
CheckReport check_retraction_axioms(const ManifoldDescriptor& d, int n_points,
                                    int n_dirs, CounterRng& rng,
                                    const RetractionFn& retraction = {});

// Central-difference d/dt f(gamma(t)) against <selection, velocity> at
// t_steps interior nodes; passes when at most node_fail_budget of the nodes
// exceed node_tol (nondifferentiable points are measure zero along the curve).
CheckReport check_chain_rule(const StochasticObjective& obj, const CurveSpec& curve,
                             double node_tol = 1e-5, double node_fail_budget = 0.05);

// Midpoint quadrature of <selection, velocity> around a closed loop with
// Richardson extrapolation (t_steps and 2 t_steps); the extrapolated value
// must vanish within rel_tol * loop length * max sampled selection norm.
CheckReport check_loop_integral(const StochasticObjective& obj, const CurveSpec& loop,
                                double rel_tol = 1e-6);

// Worst relative disagreement between the projected selection and one-sided /
// central finite differences of the full objective over n_dirs random tangent
// directions at x. Large values flag nondifferentiable points.
double grad_consistency_defect(const StochasticObjective& obj,
                               const ManifoldPoint& x, int n_dirs,
                               CounterRng& rng, double h = 1e-7);

// Compares the projected selection against finite differences of the full
// objective in dim(T_x M) random tangent directions at n_points random points;
// a point passes when its worst relative defect is at most rel_tol, the check
// passes when at least min_pass_fraction of the points pass.
CheckReport check_grad_ae(const StochasticObjective& obj, int n_points,
                          CounterRng& rng, double rel_tol = 1e-4,
                          double min_pass_fraction = 0.95);

// Transported-gradient difference ratios over random close point pairs;
// report-only (pass requires finiteness, no hard threshold).
CheckReport check_lipschitz_gradient(const StochasticObjective& obj, double radius,
                                     int n_pairs, CounterRng& rng);

}  // namespace rsgd
