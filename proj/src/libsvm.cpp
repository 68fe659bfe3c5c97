#include "rsgd/libsvm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace rsgd {

namespace {

struct Row {
  double target;
  std::vector<std::pair<Index, double>> entries;  // 0-based
};

Row parse_line(const std::string& line, long line_no) {
  std::istringstream is(line);
  Row row{};
  if (!(is >> row.target))
    throw ParseError("libsvm line " + std::to_string(line_no) + ": missing target");
  std::string tok;
  while (is >> tok) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
      throw ParseError("libsvm line " + std::to_string(line_no) +
                       ": malformed entry '" + tok + "'");
    try {
      const long idx = std::stol(tok.substr(0, colon));
      const double val = std::stod(tok.substr(colon + 1));
      if (idx < 1)
        throw ParseError("libsvm line " + std::to_string(line_no) +
                         ": index must be >= 1");
      row.entries.push_back({static_cast<Index>(idx - 1), val});
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("libsvm line " + std::to_string(line_no) +
                       ": malformed entry '" + tok + "'");
    }
  }
  return row;
}

bool blank(const std::string& line) {
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace

Dataset parse_libsvm(const std::string& path, Index dim, bool standardize) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open LIBSVM file: " + path);

  std::vector<Row> rows;
  Index max_idx = -1;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    Row row = parse_line(line, line_no);
    for (const auto& [idx, val] : row.entries) {
      (void)val;
      if (dim >= 0 && idx >= dim)
        throw ParseError("libsvm line " + std::to_string(line_no) + ": index " +
                         std::to_string(idx + 1) + " exceeds dimension " +
                         std::to_string(dim));
      max_idx = std::max(max_idx, idx);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("LIBSVM file is empty: " + path);

  const Index d = dim >= 0 ? dim : max_idx + 1;
  if (d <= 0) throw ParseError("LIBSVM file has no features: " + path);

  const Index n = static_cast<Index>(rows.size());
  Dataset ds;
  ds.features = Matrix::Zero(n, d);
  ds.targets = Vector(n);
  const auto slash = path.find_last_of('/');
  ds.name = slash == std::string::npos ? path : path.substr(slash + 1);
  for (Index i = 0; i < n; ++i) {
    ds.targets(i) = rows[i].target;
    for (const auto& [idx, val] : rows[i].entries) ds.features(i, idx) = val;
  }
  if (!ds.features.allFinite() || !ds.targets.allFinite())
    throw ParseError("LIBSVM file contains non-finite values: " + path);

  if (standardize) {
    for (Index j = 0; j < d; ++j) {
      const double mean = ds.features.col(j).mean();
      ds.features.col(j).array() -= mean;
      const double sd = std::sqrt(ds.features.col(j).squaredNorm() /
                                  static_cast<double>(n));
      if (sd > 0)
        ds.features.col(j) /= sd;
      else
        ds.features.col(j).setZero();
    }
  }
  return ds;
}

void write_libsvm(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  char buf[64];
  for (Index i = 0; i < ds.features.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.targets(i));
    out << buf;
    for (Index j = 0; j < ds.features.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
      out << ' ' << (j + 1) << ':' << buf;
    }
    out << '\n';
  }
}

Dataset make_synthetic_regression(Index n_rows, Index dim, std::uint64_t seed) {
  if (n_rows < 1 || dim < 1)
    throw ConfigError("synthetic regression set needs n_rows >= 1 and dim >= 1");
  CounterRng rng(seed);
  Dataset ds;
  ds.features = rng.normal_matrix(n_rows, dim);
  // piecewise-linear target with mild noise, scaled to O(1)
  Vector w1 = rng.normal_matrix(dim, 1);
  Vector w2 = rng.normal_matrix(dim, 1);
  w1 /= w1.norm();
  w2 /= w2.norm();
  ds.targets = Vector(n_rows);
  for (Index i = 0; i < n_rows; ++i) {
    const double a = ds.features.row(i).dot(w1);
    const double b = ds.features.row(i).dot(w2);
    ds.targets(i) = std::max(a, 0.0) + 0.5 * std::abs(b) + 0.05 * rng.normal();
  }
  ds.name = "synthetic_regression";
  return ds;
}

}  // namespace rsgd
