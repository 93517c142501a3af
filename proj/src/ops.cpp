#include "astnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "astnet/errors.hpp"

namespace astnet {

namespace {

Tape& tape_of(Var a) {
    if (!a.tape) throw ContractError("operation on an unbound Var");
    return *a.tape;
}

Tape& tape_of(Var a, Var b) {
    if (!a.tape || a.tape != b.tape) throw ContractError("operands recorded on different tapes");
    return *a.tape;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                         shape_string(b));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2) || A.dim(1) != B.dim(0))
        shape_mismatch("matmul", A.shape(), B.shape());
    const std::size_t r = A.dim(0), k = A.dim(1);
    const std::size_t c = B.rank() == 2 ? B.dim(1) : 1;
    Shape out_shape = B.rank() == 2 ? Shape{r, c} : Shape{r};
    Tensor out(out_shape);
    const double* pa = A.data();
    const double* pb = B.data();
    double* po = out.data();
    if (c == 1) {
        for (std::size_t i = 0; i < r; ++i) {
            const double* arow = pa + i * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * pb[kk];
            po[i] = acc;
        }
    } else {
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * c;
            double* orow = po + i * c;
            for (std::size_t j = 0; j < c; ++j) orow[j] += av * brow[j];
        }
    }
    }
    return tape.record("matmul", std::move(out), {a, b}, [ia = a.id, ib = b.id, r, k, c](Tape& t, std::uint32_t self) {
        const double* g = t.grad(self).data();
        if (c == 1) {
            const double* pa = t.value(ia).data();
            const double* pb = t.value(ib).data();
            if (t.requires_grad(ia)) {
                double* ga = t.grad(ia).data();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += g[i] * pb[kk];
            }
            if (t.requires_grad(ib)) {
                double* gb = t.grad(ib).data();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) gb[kk] += pa[i * k + kk] * g[i];
            }
            return;
        }
        if (t.requires_grad(ia)) {
            // dA = G . B^T
            const double* pb = t.value(ib).data();
            double* ga = t.grad(ia).data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * pb[kk * c + j];
                    ga[i * k + kk] += acc;
                }
        }
        if (t.requires_grad(ib)) {
            // dB = A^T . G
            const double* pa = t.value(ia).data();
            double* gb = t.grad(ib).data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double av = pa[i * k + kk];
                    for (std::size_t j = 0; j < c; ++j) gb[kk * c + j] += av * g[i * c + j];
                }
        }
    });
}

Var add(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const bool same = A.shape() == B.shape();
    const bool broadcast = !same && B.rank() == 1 && A.rank() >= 2 && A.shape().back() == B.dim(0);
    if (!same && !broadcast) shape_mismatch("add", A.shape(), B.shape());
    Tensor out = A;
    const std::size_t nb = B.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i % nb];
    return tape.record("add", std::move(out), {a, b}, [ia = a.id, ib = b.id, nb](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) {
            double* ga = t.grad(ia).data();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            double* gb = t.grad(ib).data();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i];
        }
    });
}

Var hadamard(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.shape() != B.shape()) shape_mismatch("hadamard", A.shape(), B.shape());
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return tape.record("hadamard", std::move(out), {a, b}, [ia = a.id, ib = b.id](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) {
            const Tensor& bv = t.value(ib);
            double* ga = t.grad(ia).data();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.requires_grad(ib)) {
            const Tensor& av = t.value(ia);
            double* gb = t.grad(ib).data();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var sigmoid(Var x) {
    Tape& tape = tape_of(x);
    Tensor out = x.value();
    for (auto& v : out.values()) v = stable_sigmoid(v);
    return tape.record("sigmoid", std::move(out), {x}, [ix = x.id](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& s = t.value(self);
        double* gx = t.grad(ix).data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
}

Var tanh_op(Var x) {
    Tape& tape = tape_of(x);
    Tensor out = x.value();
    for (auto& v : out.values()) v = std::tanh(v);
    return tape.record("tanh", std::move(out), {x}, [ix = x.id](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        double* gx = t.grad(ix).data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var relu(Var x) {
    Tape& tape = tape_of(x);
    Tensor out = x.value();
    for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
    return tape.record("relu", std::move(out), {x}, [ix = x.id](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        double* gx = t.grad(ix).data();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (y[i] > 0.0) gx[i] += g[i];
    });
}

Var sum(Var x) {
    Tape& tape = tape_of(x);
    double total = 0.0;
    for (double v : x.value().values()) total += v;
    return tape.record("sum", Tensor({1}, {total}), {x}, [ix = x.id](Tape& t, std::uint32_t self) {
        const double g = t.grad(self)[0];
        for (auto& v : t.grad(ix).values()) v += g;
    });
}

Var weighted_sum(Var weights, std::span<const Var> items) {
    Tape& tape = tape_of(weights);
    const Tensor& w = weights.value();
    if (w.rank() != 1 || w.size() != items.size())
        throw DimensionError("weighted_sum: " + std::to_string(items.size()) + " items but weights " +
                             shape_string(w.shape()));
    if (items.empty()) throw ContractError("weighted_sum: no items");
    const Shape& shape = items[0].shape();
    Tensor out(shape);
    std::vector<std::uint32_t> ids;
    ids.reserve(items.size());
    for (std::size_t n = 0; n < items.size(); ++n) {
        if (items[n].tape != &tape) throw ContractError("weighted_sum: items on another tape");
        const Tensor& v = items[n].value();
        if (v.shape() != shape) shape_mismatch("weighted_sum", shape, v.shape());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] += w[n] * v[i];
        ids.push_back(items[n].id);
    }
    std::vector<Var> inputs{weights};
    inputs.insert(inputs.end(), items.begin(), items.end());
    return tape.record("weighted_sum", std::move(out), inputs, [iw = weights.id, ids = std::move(ids)](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& w = t.value(iw);
        const bool want_w = t.requires_grad(iw);
        for (std::size_t n = 0; n < ids.size(); ++n) {
            const Tensor& v = t.value(ids[n]);
            if (want_w) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * v[i];
                t.grad(iw)[n] += acc;
            }
            if (t.requires_grad(ids[n])) {
                double* gv = t.grad(ids[n]).data();
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += w[n] * g[i];
            }
        }
    });
}

Tensor softmax(const Tensor& logits) {
    Tensor p = logits;
    const double mx = *std::max_element(p.values().begin(), p.values().end());
    double z = 0.0;
    for (auto& v : p.values()) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : p.values()) v /= z;
    return p;
}

Var softmax_cross_entropy(Var logits, std::size_t label) {
    Tape& tape = tape_of(logits);
    const Tensor& x = logits.value();
    if (x.rank() != 1) throw DimensionError("softmax_cross_entropy: logits must be a vector, got " +
                                            shape_string(x.shape()));
    if (label >= x.size())
        throw LabelError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(x.size()) + " classes");
    const auto top = static_cast<std::size_t>(
        std::max_element(x.values().begin(), x.values().end()) - x.values().begin());
    const double mx = x[top];
    double rest = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (k != top) rest += std::exp(x[k] - mx);
    const double loss = (mx - x[label]) + std::log1p(rest);
    return tape.record("softmax_cross_entropy", Tensor({1}, {loss}), {logits},
                       [ix = logits.id, label](Tape& t, std::uint32_t self) {
                           const double g = t.grad(self)[0];
                           const Tensor p = softmax(t.value(ix));
                           double* gx = t.grad(ix).data();
                           for (std::size_t k = 0; k < p.size(); ++k)
                               gx[k] += g * (p[k] - (k == label ? 1.0 : 0.0));
                       });
}

Var sigmoid_binary_cross_entropy(Var logits, std::size_t label) {
    Tape& tape = tape_of(logits);
    const Tensor& x = logits.value();
    if (x.rank() != 1) throw DimensionError("sigmoid_binary_cross_entropy: logits must be a vector");
    if (label >= x.size())
        throw LabelError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(x.size()) + " classes");
    double loss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) loss += softplus(k == label ? -x[k] : x[k]);
    return tape.record("sigmoid_binary_cross_entropy", Tensor({1}, {loss}), {logits},
                       [ix = logits.id, label](Tape& t, std::uint32_t self) {
                           const double g = t.grad(self)[0];
                           const Tensor& z = t.value(ix);
                           double* gx = t.grad(ix).data();
                           for (std::size_t k = 0; k < z.size(); ++k)
                               gx[k] += g * (stable_sigmoid(z[k]) - (k == label ? 1.0 : 0.0));
                       });
}

Var dropout(Var x, double rate, bool training, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
    if (!training || rate == 0.0) return x;
    Tape& tape = tape_of(x);
    const double scale = 1.0 / (1.0 - rate);
    Tensor mask(x.shape());
    for (auto& m : mask.values()) m = rng.bernoulli(rate) ? 0.0 : scale;
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return tape.record("dropout", std::move(out), {x}, [ix = x.id, mask = std::move(mask)](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        double* gx = t.grad(ix).data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
}

Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad) {
    Tape& tape = tape_of(x, weight);
    if (bias.tape != &tape) throw ContractError("conv2d: bias on another tape");
    const Tensor& X = x.value();
    const Tensor& W = weight.value();
    const Tensor& B = bias.value();
    if (X.rank() != 3 || W.rank() != 4 || W.dim(1) != X.dim(0) || W.dim(2) != W.dim(3))
        shape_mismatch("conv2d", X.shape(), W.shape());
    if (B.rank() != 1 || B.dim(0) != W.dim(0)) shape_mismatch("conv2d", W.shape(), B.shape());
    if (stride == 0) throw ContractError("conv2d: stride must be positive");
    const std::size_t C = X.dim(0), H = X.dim(1), Wd = X.dim(2);
    const std::size_t O = W.dim(0), K = W.dim(2);
    if (H + 2 * pad < K || Wd + 2 * pad < K) shape_mismatch("conv2d", X.shape(), W.shape());
    const std::size_t Ho = (H + 2 * pad - K) / stride + 1;
    const std::size_t Wo = (Wd + 2 * pad - K) / stride + 1;

    struct Geometry { std::size_t C, H, W, O, K, Ho, Wo, stride, pad; };
    const Geometry geo{C, H, Wd, O, K, Ho, Wo, stride, pad};

    // Visits every (output, input, weight) index triple with an in-bounds input.
    auto for_each_tap = [](const Geometry& g, auto&& fn) {
        for (std::size_t o = 0; o < g.O; ++o)
            for (std::size_t c = 0; c < g.C; ++c)
                for (std::size_t ky = 0; ky < g.K; ++ky)
                    for (std::size_t kx = 0; kx < g.K; ++kx) {
                        const std::size_t widx = ((o * g.C + c) * g.K + ky) * g.K + kx;
                        for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                            if (iy < 0 || iy >= static_cast<long>(g.H)) continue;
                            const std::size_t in_row = (c * g.H + static_cast<std::size_t>(iy)) * g.W;
                            const std::size_t out_row = (o * g.Ho + oy) * g.Wo;
                            for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                                if (ix < 0 || ix >= static_cast<long>(g.W)) continue;
                                fn(out_row + ox, in_row + static_cast<std::size_t>(ix), widx);
                            }
                        }
                    }
    };

    Tensor out({O, Ho, Wo});
    double* po = out.data();
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < Ho * Wo; ++i) po[o * Ho * Wo + i] = B[o];
    const double* px = X.data();
    const double* pw = W.data();
    for_each_tap(geo, [&](std::size_t oi, std::size_t ii, std::size_t wi) { po[oi] += pw[wi] * px[ii]; });

    return tape.record("conv2d", std::move(out), {x, weight, bias},
                       [ix = x.id, iw = weight.id, ib = bias.id, geo, for_each_tap](Tape& t, std::uint32_t self) {
                           const double* g = t.grad(self).data();
                           if (t.requires_grad(ib)) {
                               double* gb = t.grad(ib).data();
                               for (std::size_t o = 0; o < geo.O; ++o)
                                   for (std::size_t i = 0; i < geo.Ho * geo.Wo; ++i)
                                       gb[o] += g[o * geo.Ho * geo.Wo + i];
                           }
                           if (t.requires_grad(iw)) {
                               const double* px = t.value(ix).data();
                               double* gw = t.grad(iw).data();
                               for_each_tap(geo, [&](std::size_t oi, std::size_t ii, std::size_t wi) {
                                   gw[wi] += g[oi] * px[ii];
                               });
                           }
                           if (t.requires_grad(ix)) {
                               const double* pw = t.value(iw).data();
                               double* gx = t.grad(ix).data();
                               for_each_tap(geo, [&](std::size_t oi, std::size_t ii, std::size_t wi) {
                                   gx[ii] += g[oi] * pw[wi];
                               });
                           }
                       });
}

Var global_avg_pool(Var x) {
    Tape& tape = tape_of(x);
    const Tensor& X = x.value();
    if (X.rank() != 3) throw DimensionError("global_avg_pool expects [C x H x W], got " +
                                            shape_string(X.shape()));
    const std::size_t C = X.dim(0), area = X.dim(1) * X.dim(2);
    Tensor out({C});
    for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < area; ++i) acc += X[c * area + i];
        out[c] = acc / static_cast<double>(area);
    }
    return tape.record("global_avg_pool", std::move(out), {x}, [ix = x.id, C, area](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad(self);
        double* gx = t.grad(ix).data();
        const double inv = 1.0 / static_cast<double>(area);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < area; ++i) gx[c * area + i] += g[c] * inv;
    });
}

}  // namespace astnet
