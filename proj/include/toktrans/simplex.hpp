#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "toktrans/common.hpp"

namespace toktrans {

// Target sum of a simplex projection. Distinct from the entropy-regularizer
// coefficient used by the training harness.
struct SimplexScale {
    double alpha;
};

struct SparsemaxResult {
    std::vector<double> p;             // projected vector, p >= 0, sum = alpha
    std::vector<std::size_t> support;  // indices with p_i > 0
    double tau = 0.0;                  // threshold
};

// Euclidean projection of z onto {p >= 0 : sum(p) = alpha}. Sort-based;
// ties broken by original index (the projection itself is unique).
SparsemaxResult sparsemax(std::span<const double> z, SimplexScale scale);

// Fixed-support Jacobian-vector product of sparsemax:
// g_i = upstream_i - mean_{j in S}(upstream_j) on the support, 0 elsewhere.
std::vector<double> sparsemax_vjp(const SparsemaxResult& result,
                                  std::span<const double> upstream);

// alpha * softmax(z); strictly positive, sums to alpha.
std::vector<double> softmax_scaled(std::span<const double> z, SimplexScale scale);

}  // namespace toktrans
