#include "liftgan/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace liftgan::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat = Eigen::Map<RowMat>;
using CMat = Eigen::Map<const RowMat>;
using Vec = Eigen::Map<Eigen::VectorXd>;
using CVec = Eigen::Map<const Eigen::VectorXd>;

CMat cmat(const Tensor& t, std::size_t rows, std::size_t cols) {
    return CMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
Mat mat(Tensor& t, std::size_t rows, std::size_t cols) {
    return Mat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
CVec cvec(const Tensor& t) { return CVec(t.data(), static_cast<Eigen::Index>(t.size())); }
Vec vec(Tensor& t) { return Vec(t.data(), static_cast<Eigen::Index>(t.size())); }

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b, const char* what) {
    throw ShapeError(std::string(op) + ": " + what + " (got " + shape_str(a) + " and " + shape_str(b) + ")");
}

void require_rank(const char* op, const Var& x, std::size_t rank) {
    if (x.value().rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                         shape_str(x.shape()));
    }
}

void require_same_tape(const char* op, const Var& a, const Var& b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": inputs live on different tapes");
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Elementwise unary op with derivative expressed through input and output.
template <typename F, typename D>
Var unary(Var x, F f, D dfdx) {
    Tape& tape = x.tape();
    const Tensor& in = x.value();
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    const std::size_t xi = x.id();
    return tape.record(std::move(out), {x}, [xi, dfdx](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& in = t.value(xi);
        const Tensor& out = t.value(self);
        Tensor& gx = t.grad(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(in[i], out[i]);
    });
}

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0]) {
        shape_fail("matmul", a.shape(), b.shape(), "inner dimensions must agree");
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    mat(out, m, n).noalias() = cmat(a.value(), m, k) * cmat(b.value(), k, n);
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), {a, b}, [ai, bi, m, k, n](Tape& t, std::size_t self) {
        const auto g = cmat(t.grad(self), m, n);
        if (t.needs_grad(ai)) mat(t.grad(ai), m, k).noalias() += g * cmat(t.value(bi), k, n).transpose();
        if (t.needs_grad(bi)) mat(t.grad(bi), k, n).noalias() += cmat(t.value(ai), m, k).transpose() * g;
    });
}

Var add(Var a, Var b) {
    require_same_tape("add", a, b);
    if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape(), "shapes must match");
    Tensor out(a.shape());
    vec(out) = cvec(a.value()) + cvec(b.value());
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
        const auto g = cvec(t.grad(self));
        if (t.needs_grad(ai)) vec(t.grad(ai)) += g;
        if (t.needs_grad(bi)) vec(t.grad(bi)) += g;
    });
}

Var mul(Var a, Var b) {
    require_same_tape("mul", a, b);
    if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape(), "shapes must match");
    Tensor out(a.shape());
    vec(out) = cvec(a.value()).cwiseProduct(cvec(b.value()));
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
        const auto g = cvec(t.grad(self));
        if (t.needs_grad(ai)) vec(t.grad(ai)) += g.cwiseProduct(cvec(t.value(bi)));
        if (t.needs_grad(bi)) vec(t.grad(bi)) += g.cwiseProduct(cvec(t.value(ai)));
    });
}

Var scale(Var a, double factor) {
    Tensor out(a.shape());
    vec(out) = cvec(a.value()) * factor;
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), {a}, [ai, factor](Tape& t, std::size_t self) {
        vec(t.grad(ai)) += cvec(t.grad(self)) * factor;
    });
}

Var sum(Var a) {
    const std::size_t ai = a.id();
    return a.tape().record(Tensor::scalar(cvec(a.value()).sum()), {a}, [ai](Tape& t, std::size_t self) {
        vec(t.grad(ai)).array() += t.grad(self)[0];
    });
}

Var mean(Var a) {
    if (a.value().size() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var dot(Var a, Var b) { return sum(mul(a, b)); }

Var add_bias(Var x, Var b) {
    require_same_tape("add_bias", x, b);
    if (x.value().rank() < 1 || b.value().rank() != 1 || x.shape().back() != b.shape()[0]) {
        shape_fail("add_bias", x.shape(), b.shape(), "bias length must equal the last dimension");
    }
    const std::size_t n = b.shape()[0];
    const std::size_t rows = x.value().size() / n;
    Tensor out(x.shape());
    mat(out, rows, n) = cmat(x.value(), rows, n).rowwise() + cvec(b.value()).transpose();
    const std::size_t xi = x.id(), bi = b.id();
    return x.tape().record(std::move(out), {x, b}, [xi, bi, rows, n](Tape& t, std::size_t self) {
        const auto g = cmat(t.grad(self), rows, n);
        if (t.needs_grad(xi)) mat(t.grad(xi), rows, n) += g;
        if (t.needs_grad(bi)) vec(t.grad(bi)) += g.colwise().sum().transpose();
    });
}

Var dense(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

Var embedding_lookup(Var table, std::span<const std::int32_t> ids) {
    require_rank("embedding_lookup", table, 2);
    const std::size_t vocab = table.shape()[0], d = table.shape()[1];
    Tensor out({ids.size(), d});
    const double* src = table.value().data();
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
            throw ShapeError("embedding_lookup: id " + std::to_string(ids[r]) + " outside table of shape " +
                             shape_str(table.shape()));
        }
        std::copy_n(src + static_cast<std::size_t>(ids[r]) * d, d, out.data() + r * d);
    }
    const std::size_t ti = table.id();
    std::vector<std::int32_t> rows(ids.begin(), ids.end());
    return table.tape().record(std::move(out), {table}, [ti, d, rows = std::move(rows)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gt = t.grad(ti);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double* dst = gt.data() + static_cast<std::size_t>(rows[r]) * d;
            const double* src = g.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

LstmState lstm_cell(Var x, Var h, Var c, Var w, Var u, Var b) {
    require_rank("lstm_cell", x, 2);
    require_rank("lstm_cell", h, 2);
    const std::size_t batch = x.shape()[0], in = x.shape()[1], hid = h.shape()[1];
    if (h.shape()[0] != batch || c.shape() != h.shape()) shape_fail("lstm_cell", x.shape(), c.shape(), "state shape");
    if (w.shape() != Shape{in, 4 * hid}) shape_fail("lstm_cell", x.shape(), w.shape(), "input weight shape");
    if (u.shape() != Shape{hid, 4 * hid}) shape_fail("lstm_cell", h.shape(), u.shape(), "recurrent weight shape");
    if (b.shape() != Shape{4 * hid}) shape_fail("lstm_cell", h.shape(), b.shape(), "bias shape");

    // Node layout per row: [i f g o | c' | h'] (6H columns).
    const std::size_t H = hid;
    RowMat z = cmat(x.value(), batch, in) * cmat(w.value(), in, 4 * H);
    z.noalias() += cmat(h.value(), batch, H) * cmat(u.value(), H, 4 * H);
    z.rowwise() += cvec(b.value()).transpose();

    Tensor out({batch, 6 * H});
    const double* cp = c.value().data();
    for (std::size_t r = 0; r < batch; ++r) {
        const double* zr = z.data() + r * 4 * H;
        double* o = out.data() + r * 6 * H;
        for (std::size_t j = 0; j < H; ++j) {
            const double ig = sigmoid_scalar(zr[j]);
            const double fg = sigmoid_scalar(zr[H + j]);
            const double gg = std::tanh(zr[2 * H + j]);
            const double og = sigmoid_scalar(zr[3 * H + j]);
            const double cn = fg * cp[r * H + j] + ig * gg;
            o[j] = ig;
            o[H + j] = fg;
            o[2 * H + j] = gg;
            o[3 * H + j] = og;
            o[4 * H + j] = cn;
            o[5 * H + j] = og * std::tanh(cn);
        }
    }

    const std::size_t xi = x.id(), hi = h.id(), ci = c.id(), wi = w.id(), ui = u.id(), bi = b.id();
    Var cell = x.tape().record(
        std::move(out), {x, h, c, w, u, b}, [=](Tape& t, std::size_t self) {
            const Tensor& g = t.grad(self);
            const Tensor& v = t.value(self);
            const Tensor& cprev = t.value(ci);
            RowMat dz(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(4 * H));
            const bool want_c = t.needs_grad(ci);
            double* dcp = want_c ? t.grad(ci).data() : nullptr;
            for (std::size_t r = 0; r < batch; ++r) {
                const double* gr = g.data() + r * 6 * H;
                const double* vr = v.data() + r * 6 * H;
                double* dzr = dz.data() + r * 4 * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const double ig = vr[j], fg = vr[H + j], gg = vr[2 * H + j], og = vr[3 * H + j];
                    const double tc = std::tanh(vr[4 * H + j]);
                    const double dh = gr[5 * H + j];
                    const double dc = gr[4 * H + j] + dh * og * (1.0 - tc * tc);
                    const double di = gr[j] + dc * gg;
                    const double df = gr[H + j] + dc * cprev[r * H + j];
                    const double dg = gr[2 * H + j] + dc * ig;
                    const double dout = gr[3 * H + j] + dh * tc;
                    dzr[j] = di * ig * (1.0 - ig);
                    dzr[H + j] = df * fg * (1.0 - fg);
                    dzr[2 * H + j] = dg * (1.0 - gg * gg);
                    dzr[3 * H + j] = dout * og * (1.0 - og);
                    if (want_c) dcp[r * H + j] += dc * fg;
                }
            }
            if (t.needs_grad(wi)) mat(t.grad(wi), in, 4 * H).noalias() += cmat(t.value(xi), batch, in).transpose() * dz;
            if (t.needs_grad(ui)) mat(t.grad(ui), H, 4 * H).noalias() += cmat(t.value(hi), batch, H).transpose() * dz;
            if (t.needs_grad(bi)) vec(t.grad(bi)) += dz.colwise().sum().transpose();
            if (t.needs_grad(xi)) mat(t.grad(xi), batch, in).noalias() += dz * cmat(t.value(wi), in, 4 * H).transpose();
            if (t.needs_grad(hi)) mat(t.grad(hi), batch, H).noalias() += dz * cmat(t.value(ui), H, 4 * H).transpose();
        });
    return LstmState{slice_cols(cell, 5 * H, 6 * H), slice_cols(cell, 4 * H, 5 * H)};
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
    require_rank("slice_cols", x, 2);
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    if (begin >= end || end > cols) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + shape_str(x.shape()));
    }
    const std::size_t w = end - begin;
    Tensor out({rows, w});
    mat(out, rows, w) = cmat(x.value(), rows, cols).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(w));
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi, rows, cols, begin, w](Tape& t, std::size_t self) {
        mat(t.grad(xi), rows, cols).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(w)) +=
            cmat(t.grad(self), rows, w);
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t cols = parts[0].value().rank() == 2 ? parts[0].shape()[1] : 0;
    std::size_t rows = 0;
    for (const Var& p : parts) {
        if (p.value().rank() != 2 || p.shape()[1] != cols) {
            shape_fail("concat_rows", parts[0].shape(), p.shape(), "all parts must be matrices with equal columns");
        }
        require_same_tape("concat_rows", parts[0], p);
        rows += p.shape()[0];
    }
    Tensor out({rows, cols});
    std::vector<std::size_t> ids;
    std::size_t offset = 0;
    for (const Var& p : parts) {
        std::copy_n(p.value().data(), p.value().size(), out.data() + offset);
        offset += p.value().size();
        ids.push_back(p.id());
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].tape().record(std::move(out), inputs, [ids = std::move(ids)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (const std::size_t id : ids) {
            const std::size_t n = t.value(id).size();
            if (t.needs_grad(id)) {
                Tensor& gi = t.grad(id);
                for (std::size_t k = 0; k < n; ++k) gi[k] += g[offset + k];
            }
            offset += n;
        }
    });
}

Var reshape(Var x, Shape shape) {
    if (element_count(shape) != x.value().size()) shape_fail("reshape", x.shape(), shape, "element counts differ");
    Tensor out(std::move(shape), std::vector<double>(x.value().values().begin(), x.value().values().end()));
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi](Tape& t, std::size_t self) {
        vec(t.grad(xi)) += cvec(t.grad(self));
    });
}

Var conv1d(Var x, Var kernel) {
    require_same_tape("conv1d", x, kernel);
    const bool batched = x.value().rank() == 3;
    if (!(batched || x.value().rank() == 2) || kernel.value().rank() != 3) {
        shape_fail("conv1d", x.shape(), kernel.shape(), "expected x [T,C] or [B,T,C] and kernel [w,C,F]");
    }
    const std::size_t B = batched ? x.shape()[0] : 1;
    const std::size_t T = x.shape()[batched ? 1 : 0];
    const std::size_t C = x.shape()[batched ? 2 : 1];
    const std::size_t w = kernel.shape()[0], F = kernel.shape()[2];
    if (kernel.shape()[1] != C) shape_fail("conv1d", x.shape(), kernel.shape(), "channel counts differ");
    if (T < w) shape_fail("conv1d", x.shape(), kernel.shape(), "sequence shorter than kernel width");
    const std::size_t To = T - w + 1;

    // Window t of sample b is the contiguous run x[b, t..t+w) of w*C values,
    // so the im2col matrix is a strided view over x itself.
    using Strided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
    const auto windows = [C, To, w](const double* base) {
        return Strided(base, static_cast<Eigen::Index>(To), static_cast<Eigen::Index>(w * C),
                       Eigen::OuterStride<>(static_cast<Eigen::Index>(C)));
    };

    Tensor out(batched ? Shape{B, To, F} : Shape{To, F});
    const auto K = cmat(kernel.value(), w * C, F);
    for (std::size_t b = 0; b < B; ++b) {
        mat(out, B * To, F).middleRows(static_cast<Eigen::Index>(b * To), static_cast<Eigen::Index>(To)).noalias() =
            windows(x.value().data() + b * T * C) * K;
    }
    const std::size_t xi = x.id(), ki = kernel.id();
    return x.tape().record(std::move(out), {x, kernel}, [=](Tape& t, std::size_t self) {
        const auto g = cmat(t.grad(self), B * To, F);
        if (t.needs_grad(ki)) {
            auto gk = mat(t.grad(ki), w * C, F);
            for (std::size_t b = 0; b < B; ++b) {
                gk.noalias() += windows(t.value(xi).data() + b * T * C).transpose() *
                                g.middleRows(static_cast<Eigen::Index>(b * To), static_cast<Eigen::Index>(To));
            }
        }
        if (t.needs_grad(xi)) {
            const RowMat dwin = g * cmat(t.value(ki), w * C, F).transpose();  // [B*To, w*C]
            double* gx = t.grad(xi).data();
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t s = 0; s < To; ++s) {
                    const double* src = dwin.data() + (b * To + s) * w * C;
                    double* dst = gx + (b * T + s) * C;
                    for (std::size_t k = 0; k < w * C; ++k) dst[k] += src[k];
                }
            }
        }
    });
}

Var global_max_pool1d(Var x) {
    const bool batched = x.value().rank() == 3;
    if (!batched && x.value().rank() != 2) {
        throw ShapeError("global_max_pool1d: expected [T,F] or [B,T,F], got " + shape_str(x.shape()));
    }
    const std::size_t B = batched ? x.shape()[0] : 1;
    const std::size_t T = x.shape()[batched ? 1 : 0];
    const std::size_t F = x.shape()[batched ? 2 : 1];
    if (T == 0) throw ShapeError("global_max_pool1d: empty time axis");
    Tape& tape = x.tape();
    const Tensor& in = x.value();
    Tensor out(batched ? Shape{B, F} : Shape{F});
    std::vector<std::size_t> argmax(B * F);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t f = 0; f < F; ++f) {
            std::size_t best = 0;
            double best_v = in[b * T * F + f];
            bool tie = false;
            for (std::size_t t = 1; t < T; ++t) {
                const double v = in[(b * T + t) * F + f];
                if (v > best_v) {
                    best_v = v;
                    best = t;
                    tie = false;
                } else if (v == best_v) {
                    tie = true;
                }
            }
            out[b * F + f] = best_v;
            argmax[b * F + f] = best;
            tape.note_branch(best);
            if (tie) tape.note_kink();
        }
    }
    const std::size_t xi = x.id();
    return tape.record(std::move(out), {x}, [xi, T, F, argmax = std::move(argmax)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(xi);
        for (std::size_t i = 0; i < argmax.size(); ++i) {
            const std::size_t b = i / F, f = i % F;
            gx[(b * T + argmax[i]) * F + f] += g[i];
        }
    });
}

Var relu(Var x) {
    Tape& tape = x.tape();
    std::uint64_t pattern = 0;
    for (std::size_t i = 0; i < x.value().size(); ++i) {
        const double v = x.value()[i];
        if (v == 0.0) tape.note_kink();
        pattern = pattern * 31 + (v > 0.0 ? 1 : 0);
        if ((i & 63) == 63) {
            tape.note_branch(pattern);
            pattern = 0;
        }
    }
    tape.note_branch(pattern);
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
    return unary(x, sigmoid_scalar, [](double, double out) { return out * (1.0 - out); });
}

Var tanh(Var x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Var softmax(Var x) {
    if (x.value().rank() < 1) throw ShapeError("softmax: scalar input");
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.value().size() / n;
    const Tensor& in = x.value();
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = in.data() + r * n;
        double* dst = out.data() + r * n;
        const double mx = *std::max_element(src, src + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (dst[j] = std::exp(src[j] - mx));
        for (std::size_t j = 0; j < n; ++j) dst[j] /= z;
    }
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi, rows, n](Tape& t, std::size_t self) {
        const auto y = cmat(t.value(self), rows, n);
        const auto g = cmat(t.grad(self), rows, n);
        const Eigen::VectorXd inner = (g.array() * y.array()).rowwise().sum();
        mat(t.grad(xi), rows, n).array() += y.array() * (g.colwise() - inner).array();
    });
}

Var dropout(Var x, double p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (!training || p == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor mask(x.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
    Tensor out(x.shape());
    vec(out) = cvec(x.value()).cwiseProduct(cvec(mask));
    const std::size_t xi = x.id();
    return x.tape().record(std::move(out), {x}, [xi, mask = std::move(mask)](Tape& t, std::size_t self) {
        vec(t.grad(xi)) += cvec(t.grad(self)).cwiseProduct(cvec(mask));
    });
}

Var categorical_cross_entropy(Var probs, std::span<const std::int32_t> targets, std::span<const double> weights) {
    require_rank("categorical_cross_entropy", probs, 2);
    const std::size_t rows = probs.shape()[0], n = probs.shape()[1];
    if (targets.size() != rows || (!weights.empty() && weights.size() != rows)) {
        throw ShapeError("categorical_cross_entropy: " + std::to_string(targets.size()) + " targets / " +
                         std::to_string(weights.size()) + " weights for probabilities of shape " +
                         shape_str(probs.shape()));
    }
    constexpr double kFloor = 1e-300;
    const Tensor& p = probs.value();
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= n) {
            throw ShapeError("categorical_cross_entropy: target " + std::to_string(targets[r]) + " outside " +
                             std::to_string(n) + " classes");
        }
        const double w = weights.empty() ? 1.0 : weights[r];
        total -= w * std::log(std::max(p[r * n + static_cast<std::size_t>(targets[r])], kFloor));
    }
    const double inv_rows = 1.0 / static_cast<double>(rows);
    const std::size_t pi = probs.id();
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    std::vector<double> wts(weights.begin(), weights.end());
    return probs.tape().record(
        Tensor::scalar(total * inv_rows), {probs},
        [pi, n, inv_rows, tgt = std::move(tgt), wts = std::move(wts)](Tape& t, std::size_t self) {
            const double g = t.grad(self)[0];
            const Tensor& p = t.value(pi);
            Tensor& gp = t.grad(pi);
            for (std::size_t r = 0; r < tgt.size(); ++r) {
                const std::size_t k = r * n + static_cast<std::size_t>(tgt[r]);
                const double w = wts.empty() ? 1.0 : wts[r];
                if (p[k] > kFloor) gp[k] -= g * w * inv_rows / p[k];
            }
        });
}

Var binary_cross_entropy(Var probs, std::span<const double> labels) {
    const Tensor& p = probs.value();
    const bool column = p.rank() == 2 && p.shape()[1] == 1;
    if (!(p.rank() == 1 || column) || p.size() != labels.size() || labels.empty()) {
        throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for probabilities of shape " +
                         shape_str(p.shape()));
    }
    constexpr double kEps = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], kEps, 1.0 - kEps);
        total -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
    }
    const double inv_n = 1.0 / static_cast<double>(p.size());
    const std::size_t pi = probs.id();
    std::vector<double> y(labels.begin(), labels.end());
    return probs.tape().record(Tensor::scalar(total * inv_n), {probs}, [pi, inv_n, y = std::move(y)](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& p = t.value(pi);
        Tensor& gp = t.grad(pi);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (p[i] <= kEps || p[i] >= 1.0 - kEps) continue;
            gp[i] += g * inv_n * (-y[i] / p[i] + (1.0 - y[i]) / (1.0 - p[i]));
        }
    });
}

}  // namespace liftgan::nn
