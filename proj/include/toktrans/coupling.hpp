#pragma once

#include <utility>
#include <vector>

#include "toktrans/simplex.hpp"
#include "toktrans/tape.hpp"
#include "toktrans/tensor.hpp"

namespace toktrans {

// Prescribed row/column sums of a coupling. mu over source tokens (length v),
// nu over target tokens (length u).
struct Marginals {
    std::vector<double> mu;
    std::vector<double> nu;

    void validate() const;  // entries >= 0, each sums to 1 within 1e-9
    static Marginals uniform(std::size_t v, std::size_t u);
};

// Joint probability matrix with feasibility diagnostics. The iterate is
// returned as produced by the final column projection: column sums are exact,
// row sums carry the residual. Never renormalized.
struct Coupling {
    Tensor P;  // v x u
    double row_err = 0.0;
    double col_err = 0.0;
};

// Supports/thresholds of every projection in a forward pass, in execution
// order; consumed by dykstra_vjp.
struct DykstraTrace {
    std::size_t v = 0, u = 0;
    std::vector<std::vector<SparsemaxResult>> row_steps;  // per iter: v results
    std::vector<std::vector<SparsemaxResult>> col_steps;  // per iter: u results
};

// Projection outputs of the dense (softmax) variant, for its VJP.
struct SinkhornTrace {
    std::size_t v = 0, u = 0;
    bool corrections = true;
    std::vector<std::vector<std::vector<double>>> row_steps;
    std::vector<std::vector<std::vector<double>>> col_steps;
};

// Alternating row/column sparsemax projections with Dykstra corrections.
// X_0 = C; per iteration Y = rowproj(X+P), P += X-Y (implicitly),
// X = colproj(Y+Q), Q += Y-X; returns X after n_iters iterations.
Coupling dykstra_project(const Tensor& C, const Marginals& m, int n_iters,
                         DykstraTrace* trace = nullptr);

// Exact reverse sweep of the unrolled iteration; returns dLoss/dC.
Tensor dykstra_vjp(const DykstraTrace& trace, const Tensor& upstream);

// Same loop with scaled softmax in place of sparsemax. Corrections retained
// by default; corrections=false gives classical alternating scaling.
Coupling dense_sinkhorn_project(const Tensor& C, const Marginals& m, int n_iters,
                                bool corrections = true, SinkhornTrace* trace = nullptr);

Tensor dense_sinkhorn_vjp(const SinkhornTrace& trace, const Tensor& upstream);

// H(P) = -sum P_ij ln P_ij with 0 ln 0 := 0. Throws on negative entries.
double entropy(const Tensor& P);
// -(ln P_ij + 1) on entries above the floor, 0 below.
Tensor entropy_grad(const Tensor& P, double floor = 1e-12);

std::pair<double, double> marginal_residual(const Tensor& P, const Marginals& m);

// Fraction of exactly-zero entries.
double sparsity(const Tensor& P);

// ---- tape wrappers ------------------------------------------------------

int dykstra_project_op(Tape& t, int C, const Marginals& m, int n_iters);
int dense_sinkhorn_op(Tape& t, int C, const Marginals& m, int n_iters,
                      bool corrections = true);
int entropy_op(Tape& t, int P, double floor = 1e-12);

}  // namespace toktrans
