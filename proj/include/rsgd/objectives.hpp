#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rsgd/geometry.hpp"
#include "rsgd/libsvm.hpp"

namespace rsgd {

// One stochastic draw. Sparse PCA stores the sampled row index, the ReLU net
// its minibatch indices, matrix completion the seed of its per-entry noise.
// Oracle calls are pure functions of (point, sample).
struct Sample {
  std::vector<std::int64_t> indices;
  std::uint64_t noise_seed = 0;
};

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
Matrix sign0(const Matrix& m);

// Oracle bundle: deterministic full value/subgradient where available, plus a
// sampled value and a sampled Clarke-subgradient selection in ambient
// coordinates. Callers project selections to the tangent space themselves.
class StochasticObjective {
 public:
  virtual ~StochasticObjective() = default;

  virtual const ManifoldDescriptor& descriptor() const = 0;
  virtual std::string name() const = 0;

  virtual bool has_full_value() const { return true; }
  virtual bool has_full_subgrad() const { return true; }
  virtual double full_value(const ManifoldPoint& x) const = 0;
  virtual Blocks full_subgrad(const ManifoldPoint& x) const = 0;

  virtual Sample draw_sample(CounterRng& rng) const = 0;
  virtual double stoch_value(const ManifoldPoint& x, const Sample& s) const = 0;
  virtual Blocks stoch_subgrad(const ManifoldPoint& x, const Sample& s) const = 0;
};

using ObjectivePtr = std::shared_ptr<const StochasticObjective>;

// -tr(X^T A^T A X) + rho * ||X||_1 over Stiefel(n, p). The stochastic oracle
// samples one row a_i of A uniformly and replaces A^T A with the unbiased
// estimator n * a_i^T a_i; the l1 term stays deterministic.
class SparsePca final : public StochasticObjective {
 public:
  SparsePca(Matrix a, double rho, Index p_cols);

  const ManifoldDescriptor& descriptor() const override { return desc_; }
  std::string name() const override { return "sparse_pca"; }
  double full_value(const ManifoldPoint& x) const override;
  Blocks full_subgrad(const ManifoldPoint& x) const override;
  Sample draw_sample(CounterRng& rng) const override;
  double stoch_value(const ManifoldPoint& x, const Sample& s) const override;
  Blocks stoch_subgrad(const ManifoldPoint& x, const Sample& s) const override;

  Index n_samples() const { return a_.rows(); }
  const Matrix& matrix() const { return a_; }
  double rho() const { return rho_; }

 private:
  Matrix a_, ata_;
  double rho_;
  ManifoldDescriptor desc_;
};

// sum_ij |A_ij - X_ij| over the fixed-rank manifold. Stochastic access sees
// A + E with E ~ N(0, sigma^2) i.i.d. per entry, regenerated from the
// sample's noise seed so repeated calls agree. sign(0) = 0 throughout.
class MatrixCompletion final : public StochasticObjective {
 public:
  MatrixCompletion(Matrix a, Index rank, double sigma);

  const ManifoldDescriptor& descriptor() const override { return desc_; }
  std::string name() const override { return "matrix_completion"; }
  double full_value(const ManifoldPoint& x) const override;
  Blocks full_subgrad(const ManifoldPoint& x) const override;
  Sample draw_sample(CounterRng& rng) const override;
  double stoch_value(const ManifoldPoint& x, const Sample& s) const override;
  Blocks stoch_subgrad(const ManifoldPoint& x, const Sample& s) const override;

  const Matrix& target() const { return a_; }
  double sigma() const { return sigma_; }

 private:
  Matrix a_;
  double sigma_;
  ManifoldDescriptor desc_;
};

// l1 regression loss of a ReLU network whose hidden weight vectors are
// unit-norm (one sphere per neuron) with an unconstrained Euclidean output
// block. The subgradient selection is reverse-mode accumulation with
// ReLU'(0) = 0 and sign(0) = 0.
class ReluNet final : public StochasticObjective {
 public:
  ReluNet(Dataset dataset, std::vector<Index> hidden_widths, Index n_out,
          Index batch);

  const ManifoldDescriptor& descriptor() const override { return desc_; }
  std::string name() const override { return "relu_net"; }
  double full_value(const ManifoldPoint& x) const override;
  Blocks full_subgrad(const ManifoldPoint& x) const override;
  Sample draw_sample(CounterRng& rng) const override;
  double stoch_value(const ManifoldPoint& x, const Sample& s) const override;
  Blocks stoch_subgrad(const ManifoldPoint& x, const Sample& s) const override;

  const Dataset& dataset() const { return data_; }
  Index batch() const { return batch_; }
  // Prediction for one input row; exposed for tests.
  Vector predict(const ManifoldPoint& w, const Vector& input) const;

 private:
  double batch_value(const ManifoldPoint& w,
                     const std::vector<std::int64_t>& idx) const;
  Blocks batch_subgrad(const ManifoldPoint& w,
                       const std::vector<std::int64_t>& idx) const;
  Matrix layer_weights(const ManifoldPoint& w, size_t layer) const;
  Matrix output_weights(const ManifoldPoint& w) const;

  Dataset data_;
  std::vector<Index> widths_;
  Index n_out_, batch_;
  std::vector<std::int64_t> all_indices_;
  ManifoldDescriptor desc_;
};

// Deterministic objective wrapped from closures; the stochastic oracle just
// repeats the deterministic one. Used by the theory checks and tests.
class FunctionObjective final : public StochasticObjective {
 public:
  using ValueFn = std::function<double(const ManifoldPoint&)>;
  using GradFn = std::function<Blocks(const ManifoldPoint&)>;

  FunctionObjective(ManifoldDescriptor desc, ValueFn value, GradFn subgrad,
                    std::string name)
      : desc_(std::move(desc)),
        value_(std::move(value)),
        subgrad_(std::move(subgrad)),
        name_(std::move(name)) {}

  const ManifoldDescriptor& descriptor() const override { return desc_; }
  std::string name() const override { return name_; }
  double full_value(const ManifoldPoint& x) const override { return value_(x); }
  Blocks full_subgrad(const ManifoldPoint& x) const override { return subgrad_(x); }
  Sample draw_sample(CounterRng&) const override { return Sample{}; }
  double stoch_value(const ManifoldPoint& x, const Sample&) const override {
    return value_(x);
  }
  Blocks stoch_subgrad(const ManifoldPoint& x, const Sample&) const override {
    return subgrad_(x);
  }

 private:
  ManifoldDescriptor desc_;
  ValueFn value_;
  GradFn subgrad_;
  std::string name_;
};

// f(x) = sum of |entries| over all tangent-layout blocks, selection sign(x)
// with sign(0) = 0. Defined for manifolds whose points are their own ambient
// coordinates (spheres, Stiefel, Euclidean, products thereof).
ObjectivePtr make_l1_objective(const ManifoldDescriptor& desc);

}  // namespace rsgd
