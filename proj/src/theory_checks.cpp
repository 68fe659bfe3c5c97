#include "rsgd/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rsgd {

namespace {

constexpr double kVelocityDiffStep = 1e-6;

double clamp1(double v) { return std::max(-1.0, std::min(1.0, v)); }

// slerp between unit vectors, stable for nearly equal endpoints
Matrix sphere_segment(const Matrix& a, const Matrix& b, double tau) {
  const double theta = std::acos(clamp1(a.col(0).dot(b.col(0))));
  if (theta < 1e-9) {
    Matrix m = (1.0 - tau) * a + tau * b;
    return m / m.norm();
  }
  const double s = std::sin(theta);
  return (std::sin((1.0 - tau) * theta) * a + std::sin(tau * theta) * b) / s;
}

Matrix sphere_segment_velocity(const Matrix& a, const Matrix& b, double tau) {
  const double theta = std::acos(clamp1(a.col(0).dot(b.col(0))));
  if (theta < 1e-9) return b - a;
  const double s = std::sin(theta);
  return (-theta * std::cos((1.0 - tau) * theta) * a +
          theta * std::cos(tau * theta) * b) /
         s;
}

}  // namespace

// ---- curves ---------------------------------------------------------------

CurveSpec CurveSpec::geodesic(ManifoldPoint x, TangentVector v, int t_steps) {
  if (t_steps < 8) throw DomainError("curve needs t_steps >= 8");
  if (!same_point(v.base, x)) throw DomainError("geodesic: velocity base differs");
  CurveSpec c{Type::Geodesic, t_steps, std::move(x), std::move(v), {}};
  return c;
}

CurveSpec CurveSpec::piecewise(std::vector<ManifoldPoint> vertices, int t_steps) {
  if (t_steps < 8) throw DomainError("curve needs t_steps >= 8");
  if (vertices.size() < 2) throw DomainError("piecewise curve needs >= 2 vertices");
  for (size_t i = 1; i < vertices.size(); ++i)
    if (vertices[i].descriptor != vertices[0].descriptor)
      throw DomainError("piecewise curve: vertices on different manifolds");
  CurveSpec c{Type::Piecewise, t_steps, std::nullopt, std::nullopt,
              std::move(vertices)};
  return c;
}

CurveSpec CurveSpec::loop(std::vector<ManifoldPoint> vertices, int t_steps) {
  if (vertices.empty()) throw DomainError("loop needs at least one vertex");
  if (!same_point(vertices.front(), vertices.back()))
    vertices.push_back(vertices.front());
  CurveSpec c = piecewise(std::move(vertices), t_steps);
  c.type = Type::Loop;
  return c;
}

const ManifoldDescriptor& CurveSpec::descriptor() const {
  return type == Type::Geodesic ? start->descriptor : vertices.front().descriptor;
}

int CurveSpec::segment_count() const {
  return type == Type::Geodesic ? 1 : static_cast<int>(vertices.size()) - 1;
}

namespace {

ManifoldPoint segment_point(const ManifoldPoint& a, const ManifoldPoint& b,
                            double tau) {
  if (tau <= 0.0) return a;
  if (tau >= 1.0) return b;
  Blocks out(a.data.size());
  int po = 0;
  std::function<void(const ManifoldDescriptor&)> visit =
      [&](const ManifoldDescriptor& d) {
        switch (d.kind()) {
          case ManifoldDescriptor::Kind::Product:
            for (const auto& cdesc : d.components()) visit(cdesc);
            break;
          case ManifoldDescriptor::Kind::Sphere:
            out[po] = sphere_segment(a.data[po], b.data[po], tau);
            ++po;
            break;
          case ManifoldDescriptor::Kind::Euclidean:
            out[po] = (1.0 - tau) * a.data[po] + tau * b.data[po];
            ++po;
            break;
          case ManifoldDescriptor::Kind::Stiefel: {
            ManifoldPoint tmp{ManifoldDescriptor::stiefel(a.data[po].rows(),
                                                          a.data[po].cols()),
                              {(1.0 - tau) * a.data[po] + tau * b.data[po]}};
            out[po] = renormalize(tmp).data[0];
            ++po;
            break;
          }
          case ManifoldDescriptor::Kind::FixedRank:
            throw CapabilityError(
                "piecewise curves are not implemented on fixed-rank manifolds");
        }
      };
  visit(a.descriptor);
  return ManifoldPoint{a.descriptor, std::move(out)};
}

}  // namespace

ManifoldPoint curve_point(const CurveSpec& curve, double t) {
  t = std::max(0.0, std::min(1.0, t));
  if (curve.type == CurveSpec::Type::Geodesic) {
    const TangentVector v = scaled(*curve.velocity, t);
    return has_exp_map(curve.descriptor()) ? exp_map(*curve.start, v)
                                           : retract(*curve.start, v);
  }
  const int segs = curve.segment_count();
  const double scaled_t = t * segs;
  const int s = std::min(segs - 1, static_cast<int>(std::floor(scaled_t)));
  const double tau = scaled_t - s;
  return segment_point(curve.vertices[s], curve.vertices[s + 1], tau);
}

TangentVector curve_velocity(const CurveSpec& curve, double t) {
  const ManifoldDescriptor& d = curve.descriptor();
  const ManifoldPoint at = curve_point(curve, t);

  if (curve.type == CurveSpec::Type::Geodesic && has_exp_map(d)) {
    // componentwise closed form: gamma_c(t) = cos(t theta_c) x_c + sin(t theta_c) u_c
    const ManifoldPoint& x = *curve.start;
    const TangentVector& v = *curve.velocity;
    Blocks out(v.data.size());
    int idx = 0;
    std::function<void(const ManifoldDescriptor&)> visit =
        [&](const ManifoldDescriptor& dd) {
          switch (dd.kind()) {
            case ManifoldDescriptor::Kind::Product:
              for (const auto& cdesc : dd.components()) visit(cdesc);
              break;
            case ManifoldDescriptor::Kind::Sphere: {
              const double theta = v.data[idx].norm();
              if (theta == 0.0)
                out[idx] = Matrix::Zero(v.data[idx].rows(), 1);
              else
                out[idx] = -theta * std::sin(t * theta) * x.data[idx] +
                           std::cos(t * theta) * v.data[idx];
              ++idx;
              break;
            }
            case ManifoldDescriptor::Kind::Euclidean:
              out[idx] = v.data[idx];
              ++idx;
              break;
            default:
              throw CapabilityError("unexpected component in exp geodesic");
          }
        };
    visit(d);
    return TangentVector{at, std::move(out)};
  }

  // differencing of transported (projected) nearby curve points
  const double h = kVelocityDiffStep;
  if (t - h < 0.0 || t + h > 1.0)
    throw DomainError("curve_velocity: node too close to the curve ends");
  const ManifoldPoint fwd = curve_point(curve, t + h);
  const ManifoldPoint bwd = curve_point(curve, t - h);
  Blocks diff = scale(subtract(ambient_coords(fwd), ambient_coords(bwd)),
                      1.0 / (2.0 * h));
  return tangent_project(at, diff);
}

std::vector<double> segment_aligned_nodes(const CurveSpec& curve, int total,
                                          int min_per_segment) {
  const int segs = curve.segment_count();
  const int per_seg = std::max(min_per_segment, (total + segs - 1) / segs);
  std::vector<double> nodes;
  nodes.reserve(static_cast<size_t>(segs) * per_seg);
  for (int s = 0; s < segs; ++s)
    for (int j = 0; j < per_seg; ++j)
      nodes.push_back((s + (j + 0.5) / per_seg) / segs);
  return nodes;
}

double curve_length(const CurveSpec& curve, int n_quad) {
  const auto nodes = segment_aligned_nodes(curve, n_quad);
  double len = 0.0;
  for (double t : nodes) len += norm(curve_velocity(curve, t));
  return len / static_cast<double>(nodes.size());
}

CurveSpec random_loop(const ManifoldDescriptor& d, int n_vertices, double radius,
                      int t_steps, CounterRng& rng) {
  if (n_vertices < 2) throw DomainError("random_loop needs >= 2 vertices");
  const ManifoldPoint base = random_point(d, rng);
  std::vector<ManifoldPoint> vertices;
  vertices.reserve(n_vertices + 1);
  for (int i = 0; i < n_vertices; ++i)
    vertices.push_back(
        retract(base, random_tangent(base, rng, radius * (0.5 + 0.5 * rng.u01()))));
  return CurveSpec::loop(std::move(vertices), t_steps);
}

// ---- fixtures ---------------------------------------------------------------

RetractionFn scaled_retraction(double factor) {
  return [factor](const ManifoldPoint& x, const TangentVector& v) {
    return retract(x, scaled(v, factor));
  };
}

namespace {

class SignFlippedObjective final : public StochasticObjective {
 public:
  explicit SignFlippedObjective(ObjectivePtr inner) : inner_(std::move(inner)) {}
  const ManifoldDescriptor& descriptor() const override {
    return inner_->descriptor();
  }
  std::string name() const override { return inner_->name() + "_sign_flipped"; }
  bool has_full_value() const override { return inner_->has_full_value(); }
  bool has_full_subgrad() const override { return inner_->has_full_subgrad(); }
  double full_value(const ManifoldPoint& x) const override {
    return inner_->full_value(x);
  }
  Blocks full_subgrad(const ManifoldPoint& x) const override {
    return scale(inner_->full_subgrad(x), -1.0);
  }
  Sample draw_sample(CounterRng& rng) const override {
    return inner_->draw_sample(rng);
  }
  double stoch_value(const ManifoldPoint& x, const Sample& s) const override {
    return inner_->stoch_value(x, s);
  }
  Blocks stoch_subgrad(const ManifoldPoint& x, const Sample& s) const override {
    return scale(inner_->stoch_subgrad(x, s), -1.0);
  }

 private:
  ObjectivePtr inner_;
};

}  // namespace

ObjectivePtr flip_subgrad_sign(ObjectivePtr obj) {
  return std::make_shared<SignFlippedObjective>(std::move(obj));
}

// ---- verifiers ---------------------------------------------------------------

CheckReport check_retraction_axioms(const ManifoldDescriptor& d, int n_points,
                                    int n_dirs, CounterRng& rng,
                                    const RetractionFn& retraction) {
  const RetractionFn R = retraction
                             ? retraction
                             : [](const ManifoldPoint& x, const TangentVector& v) {
                                 return retract(x, v);
                               };
  const std::vector<double> hs{1e-1, 1e-2, 1e-3, 1e-4};
  const bool exp_reference = has_exp_map(d);

  CheckReport report;
  report.name = "retraction_axioms";
  report.tolerance = 0.0;  // defect = max(0, 1.9 - slope), plus exact zero law
  double min_slope = std::numeric_limits<double>::infinity();
  double zero_law_defect = 0.0;

  for (int i = 0; i < n_points; ++i) {
    const ManifoldPoint x = random_point(d, rng);
    // zero law must hold bitwise
    const ManifoldPoint back = R(x, zero_tangent(x));
    if (!same_point(back, x))
      zero_law_defect =
          std::max(zero_law_defect,
                   block_norm(subtract(ambient_coords(back), ambient_coords(x))));
    for (int j = 0; j < n_dirs; ++j) {
      const TangentVector v = random_tangent(x, rng, 1.0);
      std::vector<std::pair<double, double>> defects;
      for (double h : hs) {
        const TangentVector hv = scaled(v, h);
        const Blocks moved = ambient_coords(R(x, hv));
        const Blocks ref = exp_reference
                               ? ambient_coords(exp_map(x, hv))
                               : add(ambient_coords(x), hv.data);
        defects.push_back({h, block_norm(subtract(moved, ref))});
      }
      min_slope = std::min(min_slope, fit_loglog_slope(defects));
      ++report.sample_count;
    }
  }

  report.metrics["min_slope"] = min_slope;
  report.metrics["zero_law_max_defect"] = zero_law_defect;
  const double slope_deficit = std::max(0.0, 1.9 - min_slope);
  report.max_defect = zero_law_defect > 0.0
                          ? std::numeric_limits<double>::infinity()
                          : slope_deficit;
  report.pass = report.max_defect <= report.tolerance;
  if (!std::isinf(min_slope))
    report.notes.push_back("fitted slope " + std::to_string(min_slope));
  else
    report.notes.push_back("defect at noise level; retraction matches the reference");
  return report;
}

CheckReport check_chain_rule(const StochasticObjective& obj, const CurveSpec& curve,
                             double node_tol, double node_fail_budget) {
  if (curve.descriptor() != obj.descriptor())
    throw DomainError("chain rule: curve and objective manifolds differ");
  if (!obj.has_full_value() || !obj.has_full_subgrad())
    throw DomainError("chain rule needs a deterministic objective");
  if (curve_length(curve, 64) < 1e-12)
    throw DomainError("chain rule: degenerate zero-speed curve");

  const auto nodes = segment_aligned_nodes(curve, curve.t_steps);
  const int T = static_cast<int>(nodes.size());
  const double h = 1e-6;
  std::vector<double> defects;
  defects.reserve(T);
  double worst = 0.0;
  int failing = 0;

  CheckReport report;
  report.name = "chain_rule";
  report.tolerance = node_tol;
  for (const double t : nodes) {
    const ManifoldPoint at = curve_point(curve, t);
    const TangentVector vel = curve_velocity(curve, t);
    const double lhs = (obj.full_value(curve_point(curve, t + h)) -
                        obj.full_value(curve_point(curve, t - h))) /
                       (2.0 * h);
    const double rhs = inner(at, tangent_project(at, obj.full_subgrad(at)), vel);
    const double defect = std::abs(lhs - rhs);
    defects.push_back(defect);
    worst = std::max(worst, defect);
    if (defect > node_tol) {
      ++failing;
      report.notes.push_back("node t=" + std::to_string(t) + " defect " +
                             std::to_string(defect));
    }
  }
  report.sample_count = T;

  // pass when the (1 - budget) quantile of node defects meets the tolerance
  std::sort(defects.begin(), defects.end());
  const int allowed =
      std::min(T - 1, static_cast<int>(std::floor(node_fail_budget * T)));
  const double quantile_defect = defects[defects.size() - 1 - allowed];
  report.max_defect = quantile_defect;
  report.metrics["worst_node_defect"] = worst;
  report.metrics["failing_nodes"] = failing;
  report.metrics["failing_fraction"] = static_cast<double>(failing) / T;
  report.pass = report.max_defect <= report.tolerance;
  return report;
}

namespace {

double loop_quadrature(const StochasticObjective& obj, const CurveSpec& loop,
                       int n_nodes, double* max_selection_norm) {
  // composite midpoint per segment keeps the O(h^2) rate across corners
  const auto nodes = segment_aligned_nodes(loop, n_nodes);
  double integral = 0.0;
  for (const double t : nodes) {
    const ManifoldPoint at = curve_point(loop, t);
    const TangentVector g = tangent_project(at, obj.full_subgrad(at));
    if (max_selection_norm)
      *max_selection_norm = std::max(*max_selection_norm, norm(g));
    integral += inner(at, g, curve_velocity(loop, t));
  }
  return integral / static_cast<double>(nodes.size());
}

}  // namespace

CheckReport check_loop_integral(const StochasticObjective& obj, const CurveSpec& loop,
                                double rel_tol) {
  if (loop.type != CurveSpec::Type::Loop)
    throw DomainError("loop integral needs a closed curve");
  if (loop.descriptor() != obj.descriptor())
    throw DomainError("loop integral: curve and objective manifolds differ");

  CheckReport report;
  report.name = "loop_integral";

  const double length = curve_length(loop, 2 * loop.t_steps);
  if (length < 1e-14) {
    // degenerate single-point loop integrates to zero exactly
    report.sample_count = loop.t_steps;
    report.tolerance = 0.0;
    report.max_defect = 0.0;
    report.pass = true;
    report.metrics["loop_length"] = length;
    return report;
  }

  double max_g = 0.0;
  const double coarse = loop_quadrature(obj, loop, loop.t_steps, &max_g);
  const double fine = loop_quadrature(obj, loop, 2 * loop.t_steps, &max_g);
  const double extrapolated = (4.0 * fine - coarse) / 3.0;

  report.sample_count = 3 * loop.t_steps;
  report.tolerance = rel_tol * length * std::max(max_g, 1e-300);
  report.max_defect = std::abs(extrapolated);
  report.metrics["integral_coarse"] = coarse;
  report.metrics["integral_fine"] = fine;
  report.metrics["integral_extrapolated"] = extrapolated;
  report.metrics["loop_length"] = length;
  report.metrics["max_selection_norm"] = max_g;
  report.pass = report.max_defect <= report.tolerance;
  return report;
}

double grad_consistency_defect(const StochasticObjective& obj,
                               const ManifoldPoint& x, int n_dirs,
                               CounterRng& rng, double h) {
  const double f0 = obj.full_value(x);
  const TangentVector g = tangent_project(x, obj.full_subgrad(x));
  double defect = 0.0;
  for (int j = 0; j < n_dirs; ++j) {
    const TangentVector u = random_tangent(x, rng, 1.0);
    const double ff = obj.full_value(retract(x, scaled(u, h)));
    const double fb = obj.full_value(retract(x, scaled(u, -h)));
    const double central = (ff - fb) / (2.0 * h);
    // one-sided derivatives disagree across a kink even when the centered
    // stencil cancels
    const double gap = std::abs((ff - f0) / h - (f0 - fb) / h);
    const double predicted = inner(x, g, u);
    const double raw = std::max(std::abs(predicted - central), 0.5 * gap);
    defect = std::max(defect, raw / std::max(1.0, std::abs(central)));
  }
  return defect;
}

CheckReport check_grad_ae(const StochasticObjective& obj, int n_points,
                          CounterRng& rng, double rel_tol,
                          double min_pass_fraction) {
  if (!obj.has_full_value() || !obj.has_full_subgrad())
    throw DomainError("grad_ae needs a deterministic objective");
  const ManifoldDescriptor& d = obj.descriptor();
  const int n_dirs = static_cast<int>(manifold_dim(d));

  CheckReport report;
  report.name = "grad_ae";
  report.tolerance = rel_tol;
  std::vector<double> point_defects;
  point_defects.reserve(n_points);

  for (int i = 0; i < n_points; ++i) {
    const ManifoldPoint x = random_point(d, rng);
    const double defect = grad_consistency_defect(obj, x, n_dirs, rng);
    point_defects.push_back(defect);
    if (defect > rel_tol)
      report.notes.push_back("point " + std::to_string(i) + " defect " +
                             std::to_string(defect) +
                             " (likely nondifferentiable)");
  }
  report.sample_count = n_points;

  int passing = 0;
  for (double v : point_defects)
    if (v <= rel_tol) ++passing;
  const double frac = static_cast<double>(passing) / n_points;

  // quantile defect consistent with the pass fraction
  std::vector<double> sorted = point_defects;
  std::sort(sorted.begin(), sorted.end());
  const int allowed = std::min(
      n_points - 1,
      static_cast<int>(std::floor((1.0 - min_pass_fraction) * n_points)));
  report.max_defect = sorted[sorted.size() - 1 - allowed];
  report.metrics["pass_fraction"] = frac;
  report.metrics["worst_point_defect"] = sorted.back();
  report.metrics["directions_per_point"] = n_dirs;
  report.pass = frac >= min_pass_fraction;
  return report;
}

CheckReport check_lipschitz_gradient(const StochasticObjective& obj, double radius,
                                     int n_pairs, CounterRng& rng) {
  if (!obj.has_full_subgrad())
    throw DomainError("lipschitz check needs a deterministic selection");
  const ManifoldDescriptor& d = obj.descriptor();

  CheckReport report;
  report.name = "lipschitz_gradient";
  std::vector<double> ratios;
  ratios.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const ManifoldPoint x = random_point(d, rng);
    ManifoldPoint y = x;
    double dxy = 0.0;
    do {
      y = retract(x, random_tangent(x, rng, radius * (0.1 + 0.9 * rng.u01())));
      dxy = dist(x, y);
    } while (dxy <= 0.0);  // x' = x pairs are excluded
    const TangentVector gx = tangent_project(x, obj.full_subgrad(x));
    const TangentVector gy = tangent_project(y, obj.full_subgrad(y));
    const TangentVector moved = transport(x, y, gx);
    ratios.push_back(block_norm(subtract(moved.data, gy.data)) / dxy);
  }
  report.sample_count = n_pairs;
  double max_ratio = 0.0;
  for (double r : ratios) max_ratio = std::max(max_ratio, r);
  report.max_defect = max_ratio;
  report.tolerance = std::numeric_limits<double>::max();  // report-only
  report.metrics["max_ratio"] = max_ratio;
  report.metrics["median_ratio"] = ratios.empty() ? 0.0 : [&] {
    std::vector<double> s = ratios;
    std::sort(s.begin(), s.end());
    return s[s.size() / 2];
  }();
  report.pass = std::isfinite(max_ratio);
  return report;
}

}  // namespace rsgd
