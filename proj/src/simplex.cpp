#include "toktrans/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace toktrans {

SparsemaxResult sparsemax(std::span<const double> z, SimplexScale scale) {
    const std::size_t K = z.size();
    if (K == 0) throw ConfigError("sparsemax: empty input");
    if (!(scale.alpha > 0.0)) throw ConfigError("sparsemax: scale must be positive");
    for (double x : z)
        if (!std::isfinite(x)) throw NumericalError("sparsemax: non-finite input entry");

    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });

    // k(z) = max{k : alpha + k*z_(k) > sum_{j<=k} z_(j)}
    double cumsum = 0.0;
    std::size_t k_z = 1;
    double cumsum_k = z[order[0]];
    for (std::size_t k = 1; k <= K; ++k) {
        cumsum += z[order[k - 1]];
        if (scale.alpha + static_cast<double>(k) * z[order[k - 1]] > cumsum) {
            k_z = k;
            cumsum_k = cumsum;
        }
    }
    double tau = (cumsum_k - scale.alpha) / static_cast<double>(k_z);

    SparsemaxResult res;
    res.tau = tau;
    res.p.assign(K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        double v = z[i] - tau;
        if (v > 0.0) {
            res.p[i] = v;
            res.support.push_back(i);
        }
    }
    return res;
}

std::vector<double> sparsemax_vjp(const SparsemaxResult& result,
                                  std::span<const double> upstream) {
    if (upstream.size() != result.p.size())
        throw ConfigError("sparsemax_vjp: upstream length mismatch");
    std::vector<double> g(result.p.size(), 0.0);
    if (result.support.empty()) return g;
    double mean = 0.0;
    for (std::size_t i : result.support) mean += upstream[i];
    mean /= static_cast<double>(result.support.size());
    for (std::size_t i : result.support) g[i] = upstream[i] - mean;
    return g;
}

std::vector<double> softmax_scaled(std::span<const double> z, SimplexScale scale) {
    if (z.empty()) throw ConfigError("softmax_scaled: empty input");
    if (!(scale.alpha > 0.0)) throw ConfigError("softmax_scaled: scale must be positive");
    double mx = z[0];
    for (double x : z) {
        if (!std::isfinite(x)) throw NumericalError("softmax_scaled: non-finite input entry");
        mx = std::max(mx, x);
    }
    std::vector<double> out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        sum += out[i];
    }
    for (auto& x : out) x *= scale.alpha / sum;
    return out;
}

}  // namespace toktrans
