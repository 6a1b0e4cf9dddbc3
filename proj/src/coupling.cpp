#include "toktrans/coupling.hpp"

#include <memory>

#include <cmath>

namespace toktrans {

void Marginals::validate() const {
    double smu = 0.0, snu = 0.0;
    for (double x : mu) {
        if (x < 0.0) throw ConfigError("marginals: negative entry in mu");
        smu += x;
    }
    for (double x : nu) {
        if (x < 0.0) throw ConfigError("marginals: negative entry in nu");
        snu += x;
    }
    if (mu.empty() || nu.empty()) throw ConfigError("marginals: empty");
    if (std::abs(smu - 1.0) > 1e-9) throw ConfigError("marginals: mu does not sum to 1");
    if (std::abs(snu - 1.0) > 1e-9) throw ConfigError("marginals: nu does not sum to 1");
}

Marginals Marginals::uniform(std::size_t v, std::size_t u) {
    Marginals m;
    m.mu.assign(v, 1.0 / static_cast<double>(v));
    m.nu.assign(u, 1.0 / static_cast<double>(u));
    return m;
}

namespace {

void check_dims(const Tensor& C, const Marginals& m) {
    if (C.rank() != 2) throw ConfigError("coupling: C must be a matrix");
    if (C.rows() != m.mu.size() || C.cols() != m.nu.size())
        throw ConfigError("coupling: C is " + shape_str(C.shape) + " but marginals are " +
                          std::to_string(m.mu.size()) + "/" + std::to_string(m.nu.size()));
}

}  // namespace

std::pair<double, double> marginal_residual(const Tensor& P, const Marginals& m) {
    check_dims(P, m);
    double row_err = 0.0, col_err = 0.0;
    for (std::size_t i = 0; i < P.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < P.cols(); ++j) s += P.at(i, j);
        row_err = std::max(row_err, std::abs(s - m.mu[i]));
    }
    for (std::size_t j = 0; j < P.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < P.rows(); ++i) s += P.at(i, j);
        col_err = std::max(col_err, std::abs(s - m.nu[j]));
    }
    return {row_err, col_err};
}

double sparsity(const Tensor& P) {
    std::size_t zeros = 0;
    for (double x : P.data)
        if (x == 0.0) ++zeros;
    return static_cast<double>(zeros) / static_cast<double>(P.size());
}

Coupling dykstra_project(const Tensor& C, const Marginals& m, int n_iters,
                         DykstraTrace* trace) {
    if (n_iters < 0) throw ConfigError("dykstra_project: negative iteration count");
    m.validate();
    check_dims(C, m);
    const std::size_t v = C.rows(), u = C.cols();
    if (trace) {
        *trace = DykstraTrace{};
        trace->v = v;
        trace->u = u;
    }
    Tensor X = C;
    Tensor P = Tensor::zeros({v, u});
    Tensor Q = Tensor::zeros({v, u});
    Tensor Y = Tensor::zeros({v, u});
    std::vector<double> buf;
    for (int k = 0; k < n_iters; ++k) {
        // rows: Y = proj(X + P), then P = (X + P) - Y
        std::vector<SparsemaxResult> rows;
        if (trace) rows.reserve(v);
        for (std::size_t i = 0; i < v; ++i) {
            buf.assign(u, 0.0);
            for (std::size_t j = 0; j < u; ++j) buf[j] = X.at(i, j) + P.at(i, j);
            SparsemaxResult r = sparsemax(buf, SimplexScale{m.mu[i]});
            for (std::size_t j = 0; j < u; ++j) {
                Y.at(i, j) = r.p[j];
                P.at(i, j) = buf[j] - r.p[j];
            }
            if (trace) rows.push_back(std::move(r));
        }
        // cols: X = proj(Y + Q), then Q = (Y + Q) - X
        std::vector<SparsemaxResult> cols;
        if (trace) cols.reserve(u);
        buf.assign(v, 0.0);
        for (std::size_t j = 0; j < u; ++j) {
            for (std::size_t i = 0; i < v; ++i) buf[i] = Y.at(i, j) + Q.at(i, j);
            SparsemaxResult r = sparsemax(buf, SimplexScale{m.nu[j]});
            for (std::size_t i = 0; i < v; ++i) {
                X.at(i, j) = r.p[i];
                Q.at(i, j) = buf[i] - r.p[i];
            }
            if (trace) cols.push_back(std::move(r));
        }
        check_finite(X, "dykstra_project");
        if (trace) {
            trace->row_steps.push_back(std::move(rows));
            trace->col_steps.push_back(std::move(cols));
        }
    }
    Coupling out;
    out.P = std::move(X);
    auto [re, ce] = marginal_residual(out.P, m);
    out.row_err = re;
    out.col_err = ce;
    return out;
}

Tensor dykstra_vjp(const DykstraTrace& trace, const Tensor& upstream) {
    const std::size_t v = trace.v, u = trace.u;
    if (upstream.rank() != 2 || upstream.rows() != v || upstream.cols() != u)
        throw ConfigError("dykstra_vjp: upstream shape mismatch");
    if (trace.row_steps.size() != trace.col_steps.size())
        throw ConfigError("dykstra_vjp: malformed trace");
    const std::size_t n = trace.row_steps.size();
    // Adjoints of X_k, P_k, Q_k carried across the reverse sweep.
    Tensor gX = upstream;
    Tensor gP = Tensor::zeros({v, u});
    Tensor gQ = Tensor::zeros({v, u});
    std::vector<double> buf, vjp;
    for (std::size_t k = n; k-- > 0;) {
        // adj(X_{k+1}) total = gX - gQ (Q update subtracts X_{k+1}).
        // adjB = gQ + ColVJP(adjX1); adjY = adjB - gP; adjA = gP + RowVJP(adjY);
        // next (gX, gP, gQ) = (adjA, adjA, adjB).
        Tensor adjB = gQ;
        buf.assign(v, 0.0);
        for (std::size_t j = 0; j < u; ++j) {
            for (std::size_t i = 0; i < v; ++i) buf[i] = gX.at(i, j) - gQ.at(i, j);
            vjp = sparsemax_vjp(trace.col_steps[k][j], buf);
            for (std::size_t i = 0; i < v; ++i) adjB.at(i, j) += vjp[i];
        }
        Tensor adjA = gP;
        buf.assign(u, 0.0);
        for (std::size_t i = 0; i < v; ++i) {
            for (std::size_t j = 0; j < u; ++j) buf[j] = adjB.at(i, j) - gP.at(i, j);
            vjp = sparsemax_vjp(trace.row_steps[k][i], buf);
            for (std::size_t j = 0; j < u; ++j) adjA.at(i, j) += vjp[j];
        }
        gX = adjA;
        gP = std::move(adjA);
        gQ = std::move(adjB);
    }
    return gX;  // X_0 = C; P_0, Q_0 are constants
}

namespace {

// VJP of y = alpha * softmax(z): dz_i = y_i * (g_i - <g, y>/alpha).
std::vector<double> softmax_scaled_vjp(const std::vector<double>& y, double alpha,
                                       const std::vector<double>& g) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    dot /= alpha;
    std::vector<double> dz(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dz[i] = y[i] * (g[i] - dot);
    return dz;
}

}  // namespace

Coupling dense_sinkhorn_project(const Tensor& C, const Marginals& m, int n_iters,
                                bool corrections, SinkhornTrace* trace) {
    if (n_iters < 0) throw ConfigError("dense_sinkhorn_project: negative iteration count");
    m.validate();
    check_dims(C, m);
    const std::size_t v = C.rows(), u = C.cols();
    if (trace) {
        *trace = SinkhornTrace{};
        trace->v = v;
        trace->u = u;
        trace->corrections = corrections;
    }
    Tensor X = C;
    Tensor P = Tensor::zeros({v, u});
    Tensor Q = Tensor::zeros({v, u});
    Tensor Y = Tensor::zeros({v, u});
    std::vector<double> buf;
    for (int k = 0; k < n_iters; ++k) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < v; ++i) {
            buf.assign(u, 0.0);
            for (std::size_t j = 0; j < u; ++j)
                buf[j] = X.at(i, j) + (corrections ? P.at(i, j) : 0.0);
            std::vector<double> y = softmax_scaled(buf, SimplexScale{m.mu[i]});
            for (std::size_t j = 0; j < u; ++j) {
                Y.at(i, j) = y[j];
                if (corrections) P.at(i, j) = buf[j] - y[j];
            }
            if (trace) rows.push_back(std::move(y));
        }
        std::vector<std::vector<double>> cols;
        buf.assign(v, 0.0);
        for (std::size_t j = 0; j < u; ++j) {
            for (std::size_t i = 0; i < v; ++i)
                buf[i] = Y.at(i, j) + (corrections ? Q.at(i, j) : 0.0);
            std::vector<double> y = softmax_scaled(buf, SimplexScale{m.nu[j]});
            for (std::size_t i = 0; i < v; ++i) {
                X.at(i, j) = y[i];
                if (corrections) Q.at(i, j) = buf[i] - y[i];
            }
            if (trace) cols.push_back(std::move(y));
        }
        check_finite(X, "dense_sinkhorn_project");
        if (trace) {
            trace->row_steps.push_back(std::move(rows));
            trace->col_steps.push_back(std::move(cols));
        }
    }
    Coupling out;
    out.P = std::move(X);
    auto [re, ce] = marginal_residual(out.P, m);
    out.row_err = re;
    out.col_err = ce;
    return out;
}

Tensor dense_sinkhorn_vjp(const SinkhornTrace& trace, const Tensor& upstream) {
    const std::size_t v = trace.v, u = trace.u;
    if (upstream.rank() != 2 || upstream.rows() != v || upstream.cols() != u)
        throw ConfigError("dense_sinkhorn_vjp: upstream shape mismatch");
    const std::size_t n = trace.row_steps.size();
    Tensor gX = upstream;
    Tensor gP = Tensor::zeros({v, u});
    Tensor gQ = Tensor::zeros({v, u});
    std::vector<double> buf, vjp, ycol(v), yrow;
    const bool corr = trace.corrections;
    // Mirrors dykstra_vjp; without corrections the P/Q adjoint paths vanish.
    for (std::size_t k = n; k-- > 0;) {
        Tensor adjB = corr ? gQ : Tensor::zeros({v, u});
        const auto& mu_like = trace.row_steps[k];
        const auto& nu_like = trace.col_steps[k];
        buf.assign(v, 0.0);
        for (std::size_t j = 0; j < u; ++j) {
            const std::vector<double>& y = nu_like[j];
            double alpha = 0.0;
            for (double x : y) alpha += x;
            for (std::size_t i = 0; i < v; ++i)
                buf[i] = gX.at(i, j) - (corr ? gQ.at(i, j) : 0.0);
            vjp = softmax_scaled_vjp(y, alpha, buf);
            for (std::size_t i = 0; i < v; ++i) adjB.at(i, j) += vjp[i];
        }
        Tensor adjA = corr ? gP : Tensor::zeros({v, u});
        buf.assign(u, 0.0);
        for (std::size_t i = 0; i < v; ++i) {
            const std::vector<double>& y = mu_like[i];
            double alpha = 0.0;
            for (double x : y) alpha += x;
            for (std::size_t j = 0; j < u; ++j)
                buf[j] = adjB.at(i, j) - (corr ? gP.at(i, j) : 0.0);
            vjp = softmax_scaled_vjp(y, alpha, buf);
            for (std::size_t j = 0; j < u; ++j) adjA.at(i, j) += vjp[j];
        }
        gX = adjA;
        gP = std::move(adjA);
        gQ = std::move(adjB);
    }
    return gX;
}

double entropy(const Tensor& P) {
    double h = 0.0;
    for (double x : P.data) {
        if (x < 0.0) throw ConfigError("entropy: negative entry");
        if (x > 0.0) h -= x * std::log(x);
    }
    return h;
}

Tensor entropy_grad(const Tensor& P, double floor) {
    Tensor g = Tensor::zeros(P.shape);
    for (std::size_t i = 0; i < P.data.size(); ++i) {
        double x = P.data[i];
        if (x < 0.0) throw ConfigError("entropy_grad: negative entry");
        g.data[i] = (x > floor) ? -(std::log(x) + 1.0) : 0.0;
    }
    return g;
}

int dykstra_project_op(Tape& t, int C, const Marginals& m, int n_iters) {
    auto trace = std::make_shared<DykstraTrace>();
    Coupling c = dykstra_project(t.value(C), m, n_iters, trace.get());
    return t.custom_op({C}, std::move(c.P), [trace](const Tensor& g) {
        return std::vector<Tensor>{dykstra_vjp(*trace, g)};
    });
}

int dense_sinkhorn_op(Tape& t, int C, const Marginals& m, int n_iters, bool corrections) {
    auto trace = std::make_shared<SinkhornTrace>();
    Coupling c = dense_sinkhorn_project(t.value(C), m, n_iters, corrections, trace.get());
    return t.custom_op({C}, std::move(c.P), [trace](const Tensor& g) {
        return std::vector<Tensor>{dense_sinkhorn_vjp(*trace, g)};
    });
}

int entropy_op(Tape& t, int P, double floor) {
    const Tensor& pv = t.value(P);
    Tensor eg = entropy_grad(pv, floor);
    return t.custom_op({P}, Tensor::scalar(entropy(pv)), [eg](const Tensor& g) {
        Tensor d = eg;
        for (auto& x : d.data) x *= g.data[0];
        return std::vector<Tensor>{std::move(d)};
    });
}

}  // namespace toktrans
