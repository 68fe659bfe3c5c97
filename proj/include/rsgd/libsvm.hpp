#pragma once

#include <string>

#include "rsgd/geometry.hpp"

namespace rsgd {

struct Dataset {
  Matrix features;  // N x d, dense
  Vector targets;   // N
  std::string name;
};

// Reads "<target> <idx>:<val> ..." lines with 1-based indices into a dense
// matrix; missing entries are zero. dim < 0 infers the width from the largest
// index seen. standardize maps each column to zero mean / unit variance
// (constant columns are zeroed). Non-monotone indices are accepted; malformed
// lines raise ParseError with the line number.
Dataset parse_libsvm(const std::string& path, Index dim = -1,
                     bool standardize = false);

void write_libsvm(const std::string& path, const Dataset& ds);

// Deterministic dense regression set used as the test stand-in for external
// LIBSVM data.
Dataset make_synthetic_regression(Index n_rows, Index dim, std::uint64_t seed);

}  // namespace rsgd
