#include "rsgd/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rsgd {

Matrix sign0(const Matrix& m) {
  return m.unaryExpr([](double v) { return sign0(v); });
}

// ---- sparse PCA ------------------------------------------------------------

SparsePca::SparsePca(Matrix a, double rho, Index p_cols)
    : a_(std::move(a)),
      rho_(rho),
      desc_(ManifoldDescriptor::stiefel(a_.cols(), p_cols)) {
  if (a_.rows() != a_.cols())
    throw DimensionError("sparse_pca: A must be square, got " +
                         std::to_string(a_.rows()) + "x" + std::to_string(a_.cols()));
  if (rho_ < 0.0) throw ConfigError("sparse_pca: rho must be >= 0");
  ata_ = a_.transpose() * a_;
}

double SparsePca::full_value(const ManifoldPoint& x) const {
  const Matrix& m = x.data[0];
  return -(a_ * m).squaredNorm() + rho_ * m.cwiseAbs().sum();
}

Blocks SparsePca::full_subgrad(const ManifoldPoint& x) const {
  const Matrix& m = x.data[0];
  return {-2.0 * (ata_ * m) + rho_ * sign0(m)};
}

Sample SparsePca::draw_sample(CounterRng& rng) const {
  return Sample{{rng.uniform_index(a_.rows())}, 0};
}

double SparsePca::stoch_value(const ManifoldPoint& x, const Sample& s) const {
  const auto row = s.indices.at(0);
  const Matrix& m = x.data[0];
  const double n = static_cast<double>(a_.rows());
  return -n * (a_.row(row) * m).squaredNorm() + rho_ * m.cwiseAbs().sum();
}

Blocks SparsePca::stoch_subgrad(const ManifoldPoint& x, const Sample& s) const {
  const auto row = s.indices.at(0);
  const Matrix& m = x.data[0];
  const double n = static_cast<double>(a_.rows());
  // n * a_i^T a_i estimates A^T A, so the smooth part is -2n a_i^T (a_i X)
  return {-2.0 * n * (a_.row(row).transpose() * (a_.row(row) * m)) +
          rho_ * sign0(m)};
}

// ---- matrix completion -----------------------------------------------------

MatrixCompletion::MatrixCompletion(Matrix a, Index rank, double sigma)
    : a_(std::move(a)),
      sigma_(sigma),
      desc_(ManifoldDescriptor::fixed_rank(a_.rows(), a_.cols(), rank)) {
  if (sigma_ < 0.0) throw ConfigError("matrix_completion: sigma must be >= 0");
}

double MatrixCompletion::full_value(const ManifoldPoint& x) const {
  return (a_ - dense(x)).cwiseAbs().sum();
}

Blocks MatrixCompletion::full_subgrad(const ManifoldPoint& x) const {
  return {sign0(dense(x) - a_)};
}

Sample MatrixCompletion::draw_sample(CounterRng& rng) const {
  Sample s;
  s.noise_seed = rng.next_u64();
  return s;
}

double MatrixCompletion::stoch_value(const ManifoldPoint& x, const Sample& s) const {
  if (sigma_ == 0.0) return full_value(x);
  CounterRng noise(s.noise_seed);
  const Matrix noisy = a_ + sigma_ * noise.normal_matrix(a_.rows(), a_.cols());
  return (noisy - dense(x)).cwiseAbs().sum();
}

Blocks MatrixCompletion::stoch_subgrad(const ManifoldPoint& x, const Sample& s) const {
  if (sigma_ == 0.0) return full_subgrad(x);
  CounterRng noise(s.noise_seed);
  const Matrix noisy = a_ + sigma_ * noise.normal_matrix(a_.rows(), a_.cols());
  return {sign0(dense(x) - noisy)};
}

// ---- ReLU network ----------------------------------------------------------

namespace {

// One unit sphere per neuron's incoming weight vector, then the unconstrained
// output block.
ManifoldDescriptor relu_descriptor(const Dataset& data,
                                   const std::vector<Index>& widths,
                                   Index n_out) {
  const Index n = data.features.rows();
  const Index d = data.features.cols();
  if (n < 1 || d < 1) throw DimensionError("relu_net: dataset is empty");
  if (widths.empty()) throw ConfigError("relu_net: need at least one hidden layer");
  for (Index w : widths)
    if (w < 1) throw ConfigError("relu_net: layer widths must be positive");
  if (n_out < 1) throw ConfigError("relu_net: n_out must be positive");
  if (d < 2)
    throw DimensionError(
        "relu_net: first layer needs >= 2 input features for its sphere blocks");
  std::vector<ManifoldDescriptor> comps;
  Index in_dim = d;
  for (Index w : widths) {
    if (in_dim < 2)
      throw DimensionError("relu_net: hidden width " + std::to_string(in_dim) +
                           " is too small to feed a sphere-constrained layer");
    for (Index i = 0; i < w; ++i)
      comps.push_back(ManifoldDescriptor::sphere(in_dim));
    in_dim = w;
  }
  comps.push_back(ManifoldDescriptor::euclidean(n_out * widths.back()));
  return ManifoldDescriptor::product(std::move(comps));
}

}  // namespace

ReluNet::ReluNet(Dataset dataset, std::vector<Index> hidden_widths, Index n_out,
                 Index batch)
    : data_(std::move(dataset)),
      widths_(std::move(hidden_widths)),
      n_out_(n_out),
      batch_(batch),
      desc_(relu_descriptor(data_, widths_, n_out_)) {
  const Index n = data_.features.rows();
  if (batch_ < 1 || batch_ > n)
    throw ConfigError("relu_net: batch must be in [1, N]");
  all_indices_.resize(n);
  std::iota(all_indices_.begin(), all_indices_.end(), 0);
}

Matrix ReluNet::layer_weights(const ManifoldPoint& w, size_t layer) const {
  size_t off = 0;
  for (size_t l = 0; l < layer; ++l) off += static_cast<size_t>(widths_[l]);
  const Index rows = widths_[layer];
  const Index cols = w.data[off].rows();
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    out.row(i) = w.data[off + static_cast<size_t>(i)].col(0).transpose();
  return out;
}

Matrix ReluNet::output_weights(const ManifoldPoint& w) const {
  const Matrix& block = w.data.back();
  // column-major reshape of the Euclidean block into n_out x last_width
  return Eigen::Map<const Matrix>(block.data(), n_out_, widths_.back());
}

Vector ReluNet::predict(const ManifoldPoint& w, const Vector& input) const {
  if (input.size() != data_.features.cols())
    throw DimensionError("relu_net: input dimension mismatch with first layer");
  Vector h = input;
  for (size_t l = 0; l < widths_.size(); ++l)
    h = (layer_weights(w, l) * h).cwiseMax(0.0);
  return output_weights(w) * h;
}

double ReluNet::batch_value(const ManifoldPoint& w,
                            const std::vector<std::int64_t>& idx) const {
  double total = 0.0;
  for (const auto i : idx) {
    const Vector yhat = predict(w, data_.features.row(i).transpose());
    total += std::abs(yhat(0) - data_.targets(i));
    for (Index o = 1; o < n_out_; ++o) total += std::abs(yhat(o));
  }
  return total / static_cast<double>(idx.size());
}

Blocks ReluNet::batch_subgrad(const ManifoldPoint& w,
                              const std::vector<std::int64_t>& idx) const {
  const size_t n_layers = widths_.size();
  std::vector<Matrix> weights(n_layers);
  for (size_t l = 0; l < n_layers; ++l) weights[l] = layer_weights(w, l);
  const Matrix wout = output_weights(w);

  std::vector<Matrix> grad_w(n_layers);
  for (size_t l = 0; l < n_layers; ++l)
    grad_w[l] = Matrix::Zero(weights[l].rows(), weights[l].cols());
  Matrix grad_out = Matrix::Zero(wout.rows(), wout.cols());

  const double inv_b = 1.0 / static_cast<double>(idx.size());
  std::vector<Vector> act(n_layers + 1);
  std::vector<Vector> pre(n_layers);
  for (const auto i : idx) {
    act[0] = data_.features.row(i).transpose();
    for (size_t l = 0; l < n_layers; ++l) {
      pre[l] = weights[l] * act[l];
      act[l + 1] = pre[l].cwiseMax(0.0);
    }
    const Vector yhat = wout * act[n_layers];
    Vector dy(n_out_);
    dy(0) = inv_b * sign0(yhat(0) - data_.targets(i));
    for (Index o = 1; o < n_out_; ++o) dy(o) = inv_b * sign0(yhat(o));

    grad_out += dy * act[n_layers].transpose();
    Vector dh = wout.transpose() * dy;
    for (size_t l = n_layers; l-- > 0;) {
      // ReLU'(0) = 0: only strictly positive preactivations pass
      Vector dpre = dh;
      for (Index j = 0; j < dpre.size(); ++j)
        if (!(pre[l](j) > 0.0)) dpre(j) = 0.0;
      grad_w[l] += dpre * act[l].transpose();
      if (l > 0) dh = weights[l].transpose() * dpre;
    }
  }

  Blocks out;
  out.reserve(w.data.size());
  for (size_t l = 0; l < n_layers; ++l)
    for (Index r = 0; r < grad_w[l].rows(); ++r)
      out.push_back(grad_w[l].row(r).transpose());
  out.push_back(Eigen::Map<const Matrix>(grad_out.data(), grad_out.size(), 1));
  return out;
}

double ReluNet::full_value(const ManifoldPoint& x) const {
  return batch_value(x, all_indices_);
}

Blocks ReluNet::full_subgrad(const ManifoldPoint& x) const {
  return batch_subgrad(x, all_indices_);
}

Sample ReluNet::draw_sample(CounterRng& rng) const {
  // partial Fisher-Yates: first batch_ entries form the minibatch; sorted so
  // a full batch reproduces the full-dataset sum bit for bit
  std::vector<std::int64_t> pool = all_indices_;
  const auto n = static_cast<std::int64_t>(pool.size());
  Sample s;
  s.indices.reserve(batch_);
  for (std::int64_t i = 0; i < batch_; ++i) {
    const std::int64_t j = i + rng.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
    s.indices.push_back(pool[i]);
  }
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

double ReluNet::stoch_value(const ManifoldPoint& x, const Sample& s) const {
  return batch_value(x, s.indices);
}

Blocks ReluNet::stoch_subgrad(const ManifoldPoint& x, const Sample& s) const {
  return batch_subgrad(x, s.indices);
}

// ---- helpers ---------------------------------------------------------------

ObjectivePtr make_l1_objective(const ManifoldDescriptor& desc) {
  if (point_block_count(desc) != tangent_block_count(desc))
    throw CapabilityError(
        "l1 objective needs manifolds whose points are ambient coordinates");
  auto value = [](const ManifoldPoint& x) {
    double total = 0.0;
    for (const auto& b : x.data) total += b.cwiseAbs().sum();
    return total;
  };
  auto grad = [](const ManifoldPoint& x) {
    Blocks g;
    g.reserve(x.data.size());
    for (const auto& b : x.data) g.push_back(sign0(b));
    return g;
  };
  return std::make_shared<FunctionObjective>(desc, value, grad, "l1_norm");
}

}  // namespace rsgd
