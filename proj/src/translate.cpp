#include "toktrans/translate.hpp"

#include <cmath>

namespace toktrans {

namespace {

std::vector<double> reciprocal(const std::vector<double>& w, const char* name) {
    std::vector<double> inv(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0))
            throw ConfigError(std::string("translate: ") + name + " must be strictly positive");
        inv[i] = 1.0 / w[i];
    }
    return inv;
}

}  // namespace

Tensor translate_embeddings(const Tensor& E, const Tensor& P, const std::vector<double>& weights,
                            EmbeddingScaling scaling) {
    Tape t;
    int e = t.leaf(E), p = t.leaf(P);
    return t.value(translate_embeddings_op(t, e, p, weights, scaling));
}

Tensor translate_head(const Tensor& L, const Tensor& P, const std::vector<double>& nu) {
    Tape t;
    int l = t.leaf(L), p = t.leaf(P);
    return t.value(translate_head_op(t, l, p, nu));
}

int translate_embeddings_op(Tape& t, int E, int P, const std::vector<double>& weights,
                            EmbeddingScaling scaling) {
    const Tensor& Pv = t.value(P);
    const Tensor& Ev = t.value(E);
    if (Pv.rank() != 2 || Ev.rank() != 2 || Pv.rows() != Ev.rows())
        throw ConfigError("translate_embeddings: P is " + shape_str(Pv.shape) + ", E is " +
                          shape_str(Ev.shape));
    if (scaling == EmbeddingScaling::Mu) {
        if (weights.size() != Pv.rows())
            throw ConfigError("translate_embeddings: mu length mismatch");
        auto inv = reciprocal(weights, "mu");
        // (P^T ⊙ (1/mu)) E : broadcast along P^T's last dimension (v)
        int pt = transpose(t, P);
        int scaled = hadamard_broadcast_last(t, pt, t.leaf(Tensor::vector1d(inv)));
        return matmul(t, scaled, E);
    }
    if (weights.size() != Pv.cols())
        throw ConfigError("translate_embeddings: nu length mismatch");
    auto inv = reciprocal(weights, "nu");
    int scaled = hadamard_broadcast_last(t, P, t.leaf(Tensor::vector1d(inv)));
    return matmul(t, transpose(t, scaled), E);
}

int translate_head_op(Tape& t, int L, int P, const std::vector<double>& nu) {
    const Tensor& Pv = t.value(P);
    const Tensor& Lv = t.value(L);
    if (Pv.rank() != 2 || Lv.rank() != 2 || Pv.rows() != Lv.rows())
        throw ConfigError("translate_head: P is " + shape_str(Pv.shape) + ", L is " +
                          shape_str(Lv.shape));
    if (nu.size() != Pv.cols()) throw ConfigError("translate_head: nu length mismatch");
    auto inv = reciprocal(nu, "nu");
    // (P ⊙ (1/nu))^T L
    int scaled = hadamard_broadcast_last(t, P, t.leaf(Tensor::vector1d(inv)));
    return matmul(t, transpose(t, scaled), L);
}

TranslatedHeads truncation_resize(const Tensor& E, const Tensor& L, std::size_t u,
                                  std::uint64_t seed) {
    if (E.shape != L.shape) throw ConfigError("truncation_resize: E and L shapes differ");
    const std::size_t v = E.rows(), d = E.cols();
    TranslatedHeads out;
    out.provenance = "truncation";
    out.E_prime = Tensor::zeros({u, d});
    out.L_prime = Tensor::zeros({u, d});
    const std::size_t keep = std::min(u, v);
    for (std::size_t i = 0; i < keep; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            out.E_prime.at(i, j) = E.at(i, j);
            out.L_prime.at(i, j) = L.at(i, j);
        }
    if (u > v) {
        double mean_norm = 0.0;
        for (std::size_t i = 0; i < v; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += E.at(i, j) * E.at(i, j);
            mean_norm += std::sqrt(s);
        }
        mean_norm /= static_cast<double>(v);
        double sigma = mean_norm / std::sqrt(static_cast<double>(d));
        Rng rng(seed);
        std::normal_distribution<double> dist(0.0, sigma);
        for (std::size_t i = v; i < u; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                out.E_prime.at(i, j) = dist(rng);
                out.L_prime.at(i, j) = dist(rng);
            }
    }
    return out;
}

TranslatedHeads unconstrained_translate(const Tensor& E, const Tensor& L, const Tensor& W) {
    Tape t;
    int w = t.leaf(W);
    TranslatedHeads out;
    out.provenance = "unconstrained";
    out.E_prime = t.value(unconstrained_translate_op(t, t.leaf(E), w));
    out.L_prime = t.value(unconstrained_translate_op(t, t.leaf(L), w));
    return out;
}

int unconstrained_translate_op(Tape& t, int EorL, int W) {
    return matmul(t, transpose(t, W), EorL);
}

}  // namespace toktrans
