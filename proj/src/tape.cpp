#include "toktrans/tape.hpp"

#include <algorithm>
#include <cmath>

namespace toktrans {

int Tape::leaf(Tensor value) { return leaf(std::move(value), false); }

int Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad || n.value.requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::custom_op(std::vector<int> parents, Tensor value, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.value.apply_precision();
    check_finite(n.value, "op");
    n.parents = std::move(parents);
    for (int p : n.parents) n.requires_grad = n.requires_grad || nodes_.at(p).requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

std::vector<Tensor> Tape::backward(int root) {
    const Tensor& rv = nodes_.at(root).value;
    if (!rv.is_scalar())
        throw ConfigError("backward without explicit seed requires a scalar root");
    return backward(root, Tensor::full(rv.shape, 1.0));
}

std::vector<Tensor> Tape::backward(int root, Tensor seed) {
    if (seed.shape != nodes_.at(root).value.shape)
        throw ConfigError("backward seed shape mismatch");
    std::vector<Tensor> grads(nodes_.size());
    grads[root] = std::move(seed);
    for (int i = root; i >= 0; --i) {
        Node& n = nodes_[i];
        if (grads[i].data.empty() || !n.requires_grad || !n.backward) continue;
        std::vector<Tensor> pg = n.backward(grads[i]);
        if (pg.size() != n.parents.size())
            throw ConfigError("backward rule returned wrong number of gradients");
        for (std::size_t k = 0; k < pg.size(); ++k) {
            int p = n.parents[k];
            if (!nodes_[p].requires_grad) continue;
            if (pg[k].shape != nodes_[p].value.shape)
                throw ConfigError("backward rule returned gradient of shape " +
                                  shape_str(pg[k].shape) + ", parent has " +
                                  shape_str(nodes_[p].value.shape));
            check_finite(pg[k], "backward");
            if (grads[p].data.empty()) {
                grads[p] = std::move(pg[k]);
            } else {
                for (std::size_t j = 0; j < grads[p].data.size(); ++j)
                    grads[p].data[j] += pg[k].data[j];
            }
        }
    }
    return grads;
}

namespace {

// C += A * B, cache-friendly i-k-j order.
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* ap = a.data.data();
    const double* bp = b.data.data();
    double* cp = c.data.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            double av = ap[i * k + l];
            if (av == 0.0) continue;
            const double* br = bp + l * n;
            double* cr = cp + i * n;
            for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
        }
}

Tensor transpose_value(const Tensor& a) {
    Tensor out = Tensor::zeros({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

void require_2d(const Tensor& a, const char* op) {
    if (a.rank() != 2) throw ConfigError(std::string(op) + " requires a rank-2 tensor");
}

}  // namespace

int matmul(Tape& t, int a, int b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_2d(av, "matmul");
    require_2d(bv, "matmul");
    if (av.cols() != bv.rows())
        throw ConfigError("matmul inner dimensions disagree: " + shape_str(av.shape) + " * " +
                          shape_str(bv.shape));
    Tensor out = Tensor::zeros({av.rows(), bv.cols()});
    gemm_acc(av, bv, out);
    Tensor ac = av, bc = bv;
    return t.custom_op({a, b}, std::move(out), [ac, bc](const Tensor& g) {
        Tensor da = Tensor::zeros(ac.shape);
        Tensor db = Tensor::zeros(bc.shape);
        gemm_acc(g, transpose_value(bc), da);          // g * b^T
        gemm_acc(transpose_value(ac), g, db);          // a^T * g
        return std::vector<Tensor>{std::move(da), std::move(db)};
    });
}

int transpose(Tape& t, int a) {
    const Tensor& av = t.value(a);
    require_2d(av, "transpose");
    return t.custom_op({a}, transpose_value(av), [](const Tensor& g) {
        return std::vector<Tensor>{transpose_value(g)};
    });
}

int add(Tape& t, int a, int b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) throw ConfigError("add shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    return t.custom_op({a, b}, std::move(out),
                       [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

int sub(Tape& t, int a, int b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) throw ConfigError("sub shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    return t.custom_op({a, b}, std::move(out), [](const Tensor& g) {
        Tensor ng = g;
        for (auto& x : ng.data) x = -x;
        return std::vector<Tensor>{g, std::move(ng)};
    });
}

int mul(Tape& t, int a, int b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) throw ConfigError("mul shape mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    Tensor ac = av, bc = bv;
    return t.custom_op({a, b}, std::move(out), [ac, bc](const Tensor& g) {
        Tensor da = g, db = g;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            da.data[i] *= bc.data[i];
            db.data[i] *= ac.data[i];
        }
        return std::vector<Tensor>{std::move(da), std::move(db)};
    });
}

int scale(Tape& t, int a, double c) {
    Tensor out = t.value(a);
    for (auto& x : out.data) x *= c;
    return t.custom_op({a}, std::move(out), [c](const Tensor& g) {
        Tensor dg = g;
        for (auto& x : dg.data) x *= c;
        return std::vector<Tensor>{std::move(dg)};
    });
}

int exp_op(Tape& t, int a) {
    Tensor out = t.value(a);
    for (auto& x : out.data) x = std::exp(x);
    Tensor oc = out;
    return t.custom_op({a}, std::move(out), [oc](const Tensor& g) {
        Tensor dg = g;
        for (std::size_t i = 0; i < dg.data.size(); ++i) dg.data[i] *= oc.data[i];
        return std::vector<Tensor>{std::move(dg)};
    });
}

int log_op(Tape& t, int a) {
    const Tensor& av = t.value(a);
    Tensor out = av;
    for (auto& x : out.data) x = std::log(x);
    Tensor ac = av;
    return t.custom_op({a}, std::move(out), [ac](const Tensor& g) {
        Tensor dg = g;
        for (std::size_t i = 0; i < dg.data.size(); ++i) dg.data[i] /= ac.data[i];
        return std::vector<Tensor>{std::move(dg)};
    });
}

int gelu(Tape& t, int a) {
    // tanh form; smooth, so finite-difference checks behave.
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kB = 0.044715;
    const Tensor& av = t.value(a);
    Tensor out = av;
    for (auto& x : out.data) {
        double u = kC * (x + kB * x * x * x);
        x = 0.5 * x * (1.0 + std::tanh(u));
    }
    Tensor ac = av;
    return t.custom_op({a}, std::move(out), [ac](const Tensor& g) {
        Tensor dg = g;
        for (std::size_t i = 0; i < dg.data.size(); ++i) {
            double x = ac.data[i];
            double u = kC * (x + kB * x * x * x);
            double th = std::tanh(u);
            double sech2 = 1.0 - th * th;
            double du = kC * (1.0 + 3.0 * kB * x * x);
            dg.data[i] *= 0.5 * (1.0 + th) + 0.5 * x * sech2 * du;
        }
        return std::vector<Tensor>{std::move(dg)};
    });
}

int sum(Tape& t, int a) {
    const Tensor& av = t.value(a);
    double s = 0.0;
    for (double x : av.data) s += x;
    std::vector<std::size_t> shape = av.shape;
    return t.custom_op({a}, Tensor::scalar(s), [shape](const Tensor& g) {
        return std::vector<Tensor>{Tensor::full(shape, g.data[0])};
    });
}

int add_row_broadcast(Tape& t, int a, int row) {
    const Tensor& av = t.value(a);
    const Tensor& rv = t.value(row);
    require_2d(av, "add_row_broadcast");
    if (rv.size() != av.cols()) throw ConfigError("add_row_broadcast length mismatch");
    Tensor out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out.at(i, j) += rv.data[j];
    std::size_t r = av.rows(), c = av.cols();
    std::vector<std::size_t> rshape = rv.shape;
    return t.custom_op({a, row}, std::move(out), [r, c, rshape](const Tensor& g) {
        Tensor drow = Tensor::zeros(rshape);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) drow.data[j] += g.data[i * c + j];
        return std::vector<Tensor>{g, std::move(drow)};
    });
}

int hadamard_broadcast_last(Tape& t, int a, int v) {
    const Tensor& av = t.value(a);
    const Tensor& vv = t.value(v);
    if (av.rank() < 1) throw ConfigError("hadamard_broadcast_last requires rank >= 1");
    std::size_t last = av.shape.back();
    if (vv.size() != last)
        throw ConfigError("hadamard_broadcast_last: vector length " + std::to_string(vv.size()) +
                          " != last dimension " + std::to_string(last));
    Tensor out = av;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vv.data[i % last];
    Tensor ac = av, vc = vv;
    return t.custom_op({a, v}, std::move(out), [ac, vc, last](const Tensor& g) {
        Tensor da = g;
        Tensor dv = Tensor::zeros(vc.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            da.data[i] *= vc.data[i % last];
            dv.data[i % last] += g.data[i] * ac.data[i];
        }
        return std::vector<Tensor>{std::move(da), std::move(dv)};
    });
}

int row_softmax(Tape& t, int a) {
    const Tensor& av = t.value(a);
    require_2d(av, "row_softmax");
    Tensor out = av;
    std::size_t r = av.rows(), c = av.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = out.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            z += out.at(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= z;
    }
    Tensor sc = out;
    return t.custom_op({a}, std::move(out), [sc, r, c](const Tensor& g) {
        Tensor dz = Tensor::zeros({r, c});
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g.at(i, j) * sc.at(i, j);
            for (std::size_t j = 0; j < c; ++j)
                dz.at(i, j) = sc.at(i, j) * (g.at(i, j) - dot);
        }
        return std::vector<Tensor>{std::move(dz)};
    });
}

int layer_norm_rows(Tape& t, int x, int gain, int bias, double eps) {
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gain);
    const Tensor& bv = t.value(bias);
    require_2d(xv, "layer_norm_rows");
    std::size_t r = xv.rows(), c = xv.cols();
    if (gv.size() != c || bv.size() != c) throw ConfigError("layer_norm gain/bias length mismatch");
    Tensor xhat = Tensor::zeros({r, c});
    std::vector<double> inv_sigma(r);
    Tensor out = Tensor::zeros({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += xv.at(i, j);
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            double d = xv.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        inv_sigma[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            xhat.at(i, j) = (xv.at(i, j) - mean) * inv_sigma[i];
            out.at(i, j) = xhat.at(i, j) * gv.data[j] + bv.data[j];
        }
    }
    Tensor gc = gv;
    std::vector<std::size_t> gshape = gv.shape, bshape = bv.shape;
    return t.custom_op({x, gain, bias}, std::move(out),
                       [xhat, inv_sigma, gc, gshape, bshape, r, c](const Tensor& g) {
        Tensor dx = Tensor::zeros({r, c});
        Tensor dgain = Tensor::zeros(gshape);
        Tensor dbias = Tensor::zeros(bshape);
        for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                double gy = g.at(i, j) * gc.data[j];
                m1 += gy;
                m2 += gy * xhat.at(i, j);
                dgain.data[j] += g.at(i, j) * xhat.at(i, j);
                dbias.data[j] += g.at(i, j);
            }
            m1 /= static_cast<double>(c);
            m2 /= static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
                double gy = g.at(i, j) * gc.data[j];
                dx.at(i, j) = inv_sigma[i] * (gy - m1 - xhat.at(i, j) * m2);
            }
        }
        return std::vector<Tensor>{std::move(dx), std::move(dgain), std::move(dbias)};
    });
}

int gather_rows(Tape& t, int table, std::vector<std::size_t> ids) {
    const Tensor& tv = t.value(table);
    require_2d(tv, "gather_rows");
    std::size_t c = tv.cols();
    for (auto id : ids)
        if (id >= tv.rows())
            throw ConfigError("gather_rows: id " + std::to_string(id) + " out of range");
    Tensor out = Tensor::zeros({ids.size(), c});
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = tv.at(ids[i], j);
    std::vector<std::size_t> tshape = tv.shape;
    return t.custom_op({table}, std::move(out), [ids, tshape, c](const Tensor& g) {
        Tensor dt = Tensor::zeros(tshape);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) dt.at(ids[i], j) += g.at(i, j);
        return std::vector<Tensor>{std::move(dt)};
    });
}

int softmax_cross_entropy(Tape& t, int logits, std::vector<int> targets) {
    const Tensor& lv = t.value(logits);
    require_2d(lv, "softmax_cross_entropy");
    std::size_t r = lv.rows(), c = lv.cols();
    if (targets.empty() || targets.size() > r)
        throw ConfigError("softmax_cross_entropy: bad target count");
    for (int id : targets)
        if (id < 0 || static_cast<std::size_t>(id) >= c)
            throw ConfigError("softmax_cross_entropy: target id " + std::to_string(id) +
                              " out of range for vocab " + std::to_string(c));
    std::size_t npos = targets.size();
    Tensor probs = Tensor::zeros({npos, c});
    double loss = 0.0;
    for (std::size_t i = 0; i < npos; ++i) {
        double mx = lv.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs.at(i, j) = std::exp(lv.at(i, j) - mx);
            z += probs.at(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) probs.at(i, j) /= z;
        loss -= std::log(probs.at(i, static_cast<std::size_t>(targets[i])));
    }
    loss /= static_cast<double>(npos);
    return t.custom_op({logits}, Tensor::scalar(loss),
                       [probs, targets, r, c, npos](const Tensor& g) {
        Tensor dl = Tensor::zeros({r, c});
        double s = g.data[0] / static_cast<double>(npos);
        for (std::size_t i = 0; i < npos; ++i) {
            for (std::size_t j = 0; j < c; ++j) dl.at(i, j) = s * probs.at(i, j);
            dl.at(i, static_cast<std::size_t>(targets[i])) -= s;
        }
        return std::vector<Tensor>{std::move(dl)};
    });
}

}  // namespace toktrans
