#pragma once

#include <string>

#include "toktrans/coupling.hpp"
#include "toktrans/tape.hpp"
#include "toktrans/tensor.hpp"

namespace toktrans {

// Which marginal divides the coupling when building E'. `Mu` is the formula
// as printed; `Nu` makes E' rows convex combinations of E rows at feasibility.
enum class EmbeddingScaling { Mu, Nu };

struct TranslatedHeads {
    Tensor E_prime;  // u x d
    Tensor L_prime;  // u x d
    std::string provenance;
};

// E'[t] = sum_s (P[s,t] / mu[s]) * E[s]   (scaling == Mu)
// E'[t] = sum_s (P[s,t] / nu[t]) * E[s]   (scaling == Nu)
Tensor translate_embeddings(const Tensor& E, const Tensor& P, const std::vector<double>& mu_or_nu,
                            EmbeddingScaling scaling = EmbeddingScaling::Mu);

// L'[t] = sum_s (P[s,t] / nu[t]) * L[s]
Tensor translate_head(const Tensor& L, const Tensor& P, const std::vector<double>& nu);

// Tape versions; gradients flow into P (and E/L if trainable).
int translate_embeddings_op(Tape& t, int E, int P, const std::vector<double>& mu_or_nu,
                            EmbeddingScaling scaling = EmbeddingScaling::Mu);
int translate_head_op(Tape& t, int L, int P, const std::vector<double>& nu);

// First min(u,v) rows copied; if u > v the remainder is seeded N(0, sigma^2)
// with sigma = mean row norm of E divided by sqrt(d).
TranslatedHeads truncation_resize(const Tensor& E, const Tensor& L, std::size_t u,
                                  std::uint64_t seed);

// E' = W^T E, L' = W^T L; W free and unscaled.
TranslatedHeads unconstrained_translate(const Tensor& E, const Tensor& L, const Tensor& W);
int unconstrained_translate_op(Tape& t, int EorL, int W);

}  // namespace toktrans
