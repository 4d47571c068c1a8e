#include "patchcast/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace {
constexpr double inv_sqrt2 = 0.70710678118654752;
}

namespace patchcast {

namespace {

using CMat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MMat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_finite(const char* op, const Tensor& t) {
    if (finite_checks_enabled() && !t.all_finite())
        throw TrainError(std::string(op) + ": non-finite value produced");
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active()) return false;
    for (const Tensor* t : inputs)
        if (needs_grad(*t)) return true;
    return false;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    const std::size_t nd = std::max(a.size(), b.size());
    Shape out(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        const std::size_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        const std::size_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                             " are not broadcastable");
        out[i] = std::max(da, db);
    }
    return out;
}

std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size());
    std::size_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

// Strides of `shape` aligned to the (broader) `out` shape; 0 where broadcast.
std::vector<std::size_t> bcast_strides(const Shape& shape, const Shape& out) {
    auto own = row_major_strides(shape);
    std::vector<std::size_t> st(out.size(), 0);
    const std::size_t off = out.size() - shape.size();
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (shape[i] != 1) st[off + i] = own[i];
    return st;
}

// Walk every flat index of `out`, handing the matching offsets in a and b.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
    const std::size_t n = shape_numel(out);
    const std::size_t nd = out.size();
    if (nd == 0) {
        if (n) f(0, 0, 0);
        return;
    }
    std::vector<std::size_t> idx(nd, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        f(flat, oa, ob);
        // odometer increment
        for (std::size_t ax = nd; ax-- > 0;) {
            ++idx[ax];
            oa += sa[ax];
            ob += sb[ax];
            if (idx[ax] < out[ax]) break;
            oa -= sa[ax] * out[ax];
            ob -= sb[ax] * out[ax];
            idx[ax] = 0;
        }
    }
}

// g (shape gshape) accumulated into acc (shape tshape broadcastable to gshape).
void reduce_accumulate(std::span<const double> g, const Shape& gshape, std::span<double> acc,
                       const Shape& tshape) {
    if (gshape == tshape) {
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        return;
    }
    auto st = bcast_strides(tshape, gshape);
    std::vector<std::size_t> zeros(gshape.size(), 0);
    for_each_broadcast(gshape, st, zeros,
                       [&](std::size_t flat, std::size_t ot, std::size_t) { acc[ot] += g[flat]; });
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
    Tensor out = Tensor::zeros(out_shape);
    auto av = a.data();
    auto bv = b.data();
    auto ov = out.data();

    if (a.shape() == b.shape()) {
        switch (kind) {
            case BinKind::Add:
                for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
                break;
            case BinKind::Sub:
                for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
                break;
            case BinKind::Mul:
                for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
                break;
        }
    } else {
        auto sa = bcast_strides(a.shape(), out_shape);
        auto sb = bcast_strides(b.shape(), out_shape);
        switch (kind) {
            case BinKind::Add:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t f, std::size_t oa, std::size_t ob) {
                    ov[f] = av[oa] + bv[ob];
                });
                break;
            case BinKind::Sub:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t f, std::size_t oa, std::size_t ob) {
                    ov[f] = av[oa] - bv[ob];
                });
                break;
            case BinKind::Mul:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t f, std::size_t oa, std::size_t ob) {
                    ov[f] = av[oa] * bv[ob];
                });
                break;
        }
    }
    check_finite(name, out);

    if (should_record({&a, &b})) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        const bool na = needs_grad(a), nb = needs_grad(b);
        Tape::active()->record(
            {name, {an, bn}, on, [an, bn, on, kind, na, nb]() {
                 const Shape& oshape = on->shape;
                 std::span<const double> g = on->grad;
                 if (kind == BinKind::Mul) {
                     // d(a*b) = g*b into a, g*a into b; materialize the products
                     if (na) {
                         std::vector<double> gb(g.size());
                         auto sb = bcast_strides(bn->shape, oshape);
                         std::vector<std::size_t> z(oshape.size(), 0);
                         for_each_broadcast(oshape, sb, z, [&](std::size_t f, std::size_t ob, std::size_t) {
                             gb[f] = g[f] * bn->values[ob];
                         });
                         an->ensure_grad();
                         reduce_accumulate(gb, oshape, an->grad, an->shape);
                     }
                     if (nb) {
                         std::vector<double> ga(g.size());
                         auto sa = bcast_strides(an->shape, oshape);
                         std::vector<std::size_t> z(oshape.size(), 0);
                         for_each_broadcast(oshape, sa, z, [&](std::size_t f, std::size_t oa, std::size_t) {
                             ga[f] = g[f] * an->values[oa];
                         });
                         bn->ensure_grad();
                         reduce_accumulate(ga, oshape, bn->grad, bn->shape);
                     }
                     return;
                 }
                 if (na) {
                     an->ensure_grad();
                     reduce_accumulate(g, oshape, an->grad, an->shape);
                 }
                 if (nb) {
                     bn->ensure_grad();
                     if (kind == BinKind::Add) {
                         reduce_accumulate(g, oshape, bn->grad, bn->shape);
                     } else {
                         std::vector<double> neg(g.size());
                         for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
                         reduce_accumulate(neg, oshape, bn->grad, bn->shape);
                     }
                 }
             }});
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, BinKind::Add, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, BinKind::Sub, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, BinKind::Mul, "mul");
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape());
    auto av = a.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
    check_finite("scale", out);
    if (should_record({&a})) {
        auto an = a.node();
        auto on = out.node();
        Tape::active()->record({"scale", {an}, on, [an, on, c]() {
                                    an->ensure_grad();
                                    for (std::size_t i = 0; i < on->grad.size(); ++i)
                                        an->grad[i] += on->grad[i] * c;
                                }});
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() < 2 || b.ndim() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const std::size_t m = a.dim(a.ndim() - 2), k = a.dim(a.ndim() - 1);
    const std::size_t k2 = b.dim(b.ndim() - 2), n = b.dim(b.ndim() - 1);
    if (k != k2)
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));

    Shape batch_a(a.shape().begin(), a.shape().end() - 2);
    Shape batch_b(b.shape().begin(), b.shape().end() - 2);
    Shape batch = broadcast_shape(batch_a, batch_b, "matmul");
    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor out = Tensor::zeros(out_shape);

    // batch strides counted in whole matrices
    auto sa = bcast_strides(batch_a, batch);
    auto sb = bcast_strides(batch_b, batch);
    const std::size_t batch_count = shape_numel(batch);
    {
        const double* ap = a.data().data();
        const double* bp = b.data().data();
        double* op = out.data().data();
        for_each_broadcast(batch, sa, sb, [&](std::size_t fo, std::size_t oa, std::size_t ob) {
            MMat(op + fo * m * n, m, n).noalias() =
                CMat(ap + oa * m * k, m, k) * CMat(bp + ob * k * n, k, n);
        });
        (void)batch_count;
    }
    check_finite("matmul", out);

    if (should_record({&a, &b})) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        const bool na = needs_grad(a), nb = needs_grad(b);
        Tape::active()->record({"matmul", {an, bn}, on, [an, bn, on, batch, sa, sb, m, k, n, na, nb]() {
                                    const double* ap = an->values.data();
                                    const double* bp = bn->values.data();
                                    const double* gp = on->grad.data();
                                    if (na) an->ensure_grad();
                                    if (nb) bn->ensure_grad();
                                    double* gap = na ? an->grad.data() : nullptr;
                                    double* gbp = nb ? bn->grad.data() : nullptr;
                                    for_each_broadcast(
                                        batch, sa, sb, [&](std::size_t fo, std::size_t oa, std::size_t ob) {
                                            CMat g(gp + fo * m * n, m, n);
                                            if (na)
                                                MMat(gap + oa * m * k, m, k) +=
                                                    g * CMat(bp + ob * k * n, k, n).transpose();
                                            if (nb)
                                                MMat(gbp + ob * k * n, k, n) +=
                                                    CMat(ap + oa * m * k, m, k).transpose() * g;
                                        });
                                }});
    }
    return out;
}

Tensor transpose_last2(const Tensor& a) {
    if (a.ndim() < 2) throw ShapeError("transpose_last2: rank must be >= 2, got " + shape_str(a.shape()));
    Shape out_shape = a.shape();
    const std::size_t r = out_shape[out_shape.size() - 2], c = out_shape[out_shape.size() - 1];
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    Tensor out = Tensor::zeros(out_shape);
    const std::size_t mats = a.size() / (r * c);
    {
        const double* ap = a.data().data();
        double* op = out.data().data();
        for (std::size_t i = 0; i < mats; ++i)
            MMat(op + i * r * c, c, r) = CMat(ap + i * r * c, r, c).transpose();
    }
    if (should_record({&a})) {
        auto an = a.node();
        auto on = out.node();
        Tape::active()->record({"transpose_last2", {an}, on, [an, on, mats, r, c]() {
                                    an->ensure_grad();
                                    for (std::size_t i = 0; i < mats; ++i)
                                        MMat(an->grad.data() + i * r * c, r, c) +=
                                            CMat(on->grad.data() + i * r * c, c, r).transpose();
                                }});
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.size())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    Tensor out = Tensor::from_vector(std::move(shape), {a.data().begin(), a.data().end()});
    if (should_record({&a})) {
        auto an = a.node();
        auto on = out.node();
        Tape::active()->record({"reshape", {an}, on, [an, on]() {
                                    an->ensure_grad();
                                    for (std::size_t i = 0; i < on->grad.size(); ++i)
                                        an->grad[i] += on->grad[i];
                                }});
    }
    return out;
}

Tensor concat_lastdim(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_lastdim: no inputs");
    Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
    std::size_t total_last = 0;
    for (const Tensor& p : parts) {
        Shape pl(p.shape().begin(), p.shape().end() - 1);
        if (pl != lead)
            throw ShapeError("concat_lastdim: leading dims disagree: " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        total_last += p.dim(p.ndim() - 1);
    }
    Shape out_shape = lead;
    out_shape.push_back(total_last);
    Tensor out = Tensor::zeros(out_shape);
    const std::size_t rows = shape_numel(lead);
    std::vector<std::size_t> widths;
    widths.reserve(parts.size());
    for (const Tensor& p : parts) widths.push_back(p.dim(p.ndim() - 1));
    {
        double* op = out.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t col = 0;
            for (std::size_t pi = 0; pi < parts.size(); ++pi) {
                const double* pp = parts[pi].data().data() + r * widths[pi];
                std::copy(pp, pp + widths[pi], op + r * total_last + col);
                col += widths[pi];
            }
        }
    }
    bool any = false;
    for (const Tensor& p : parts) any = any || needs_grad(p);
    if (Tape::active() && any) {
        std::vector<std::shared_ptr<TensorNode>> ins;
        std::vector<bool> need;
        for (const Tensor& p : parts) {
            ins.push_back(p.node());
            need.push_back(needs_grad(p));
        }
        auto on = out.node();
        Tape::active()->record({"concat_lastdim", ins, on, [ins, need, on, rows, widths, total_last]() {
                                    for (std::size_t r = 0; r < rows; ++r) {
                                        std::size_t col = 0;
                                        for (std::size_t pi = 0; pi < ins.size(); ++pi) {
                                            if (need[pi]) {
                                                ins[pi]->ensure_grad();
                                                double* gp = ins[pi]->grad.data() + r * widths[pi];
                                                const double* og =
                                                    on->grad.data() + r * total_last + col;
                                                for (std::size_t i = 0; i < widths[pi]; ++i) gp[i] += og[i];
                                            }
                                            col += widths[pi];
                                        }
                                    }
                                }});
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.ndim() < 1 || x.dim(x.ndim() - 1) == 0)
        throw ShapeError("softmax_lastdim: last dimension must be >= 1");
    const std::size_t last = x.dim(x.ndim() - 1);
    const std::size_t rows = x.size() / last;
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = xp + r * last;
            double* yr = op + r * last;
            double mx = xr[0];
            for (std::size_t i = 1; i < last; ++i) mx = std::max(mx, xr[i]);
            double s = 0.0;
            for (std::size_t i = 0; i < last; ++i) {
                yr[i] = std::exp(xr[i] - mx);
                s += yr[i];
            }
            for (std::size_t i = 0; i < last; ++i) yr[i] /= s;
        }
    }
    check_finite("softmax_lastdim", out);
    if (should_record({&x})) {
        auto xn = x.node();
        auto on = out.node();
        Tape::active()->record({"softmax_lastdim", {xn}, on, [xn, on, rows, last]() {
                                    xn->ensure_grad();
                                    for (std::size_t r = 0; r < rows; ++r) {
                                        const double* y = on->values.data() + r * last;
                                        const double* g = on->grad.data() + r * last;
                                        double* gx = xn->grad.data() + r * last;
                                        double dot = 0.0;
                                        for (std::size_t i = 0; i < last; ++i) dot += g[i] * y[i];
                                        for (std::size_t i = 0; i < last; ++i)
                                            gx[i] += y[i] * (g[i] - dot);
                                    }
                                }});
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.data().data();
        for (std::size_t i = 0; i < out.size(); ++i)
            op[i] = 0.5 * xp[i] * (1.0 + std::erf(xp[i] * inv_sqrt2));
    }
    if (should_record({&x})) {
        auto xn = x.node();
        auto on = out.node();
        Tape::active()->record({"gelu", {xn}, on, [xn, on]() {
                                    xn->ensure_grad();
                                    constexpr double inv_sqrt_2pi = 0.3989422804014327;
                                    for (std::size_t i = 0; i < on->grad.size(); ++i) {
                                        const double v = xn->values[i];
                                        const double cdf =
                                            0.5 * (1.0 + std::erf(v * inv_sqrt2));
                                        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
                                        xn->grad[i] += on->grad[i] * (cdf + v * pdf);
                                    }
                                }});
    }
    return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("dropout: probability must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;

    auto mask = std::make_shared<std::vector<double>>(x.size());
    const double keep_scale = 1.0 / (1.0 - p);
    for (double& m : *mask) m = rng.uniform(0.0, 1.0) < p ? 0.0 : keep_scale;

    Tensor out = Tensor::zeros(x.shape());
    {
        const double* xp = x.data().data();
        double* op = out.data().data();
        for (std::size_t i = 0; i < out.size(); ++i) op[i] = xp[i] * (*mask)[i];
    }
    if (should_record({&x})) {
        auto xn = x.node();
        auto on = out.node();
        Tape::active()->record({"dropout", {xn}, on, [xn, on, mask]() {
                                    xn->ensure_grad();
                                    for (std::size_t i = 0; i < on->grad.size(); ++i)
                                        xn->grad[i] += on->grad[i] * (*mask)[i];
                                }});
    }
    return out;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean, std::vector<double>& running_var,
                 double momentum, double eps, bool training) {
    if (x.ndim() != 3)
        throw ShapeError("batchnorm: expected [batch, features, tokens], got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (gamma.size() != C || beta.size() != C || running_mean.size() != C || running_var.size() != C)
        throw ShapeError("batchnorm: feature dimension " + std::to_string(C) +
                         " does not match parameter/state size");

    Tensor out = Tensor::zeros(x.shape());
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(C);
    const double* xp = x.data().data();
    double* op = out.data().data();
    const double* gp = gamma.data().data();
    const double* bp = beta.data().data();
    const double m = static_cast<double>(B * T);

    for (std::size_t c = 0; c < C; ++c) {
        double mu, var;
        if (training) {
            double s = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t t = 0; t < T; ++t) s += xp[(b * C + c) * T + t];
            mu = s / m;
            double sq = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t t = 0; t < T; ++t) {
                    const double d = xp[(b * C + c) * T + t] - mu;
                    sq += d * d;
                }
            var = sq / m;
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
        } else {
            mu = running_mean[c];
            var = running_var[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[c] = inv;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t i = (b * C + c) * T + t;
                (*xhat)[i] = (xp[i] - mu) * inv;
                op[i] = gp[c] * (*xhat)[i] + bp[c];
            }
    }
    check_finite("batchnorm", out);

    if (should_record({&x, &gamma, &beta})) {
        auto xn = x.node();
        auto gn = gamma.node();
        auto bn = beta.node();
        auto on = out.node();
        const bool nx = needs_grad(x), ng = needs_grad(gamma), nb = needs_grad(beta);
        Tape::active()->record(
            {"batchnorm", {xn, gn, bn}, on,
             [xn, gn, bn, on, xhat, inv_std, B, C, T, m, training, nx, ng, nb]() {
                 const double* g = on->grad.data();
                 if (nx) xn->ensure_grad();
                 if (ng) gn->ensure_grad();
                 if (nb) bn->ensure_grad();
                 for (std::size_t c = 0; c < C; ++c) {
                     double sum_g = 0.0, sum_gx = 0.0;
                     for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t t = 0; t < T; ++t) {
                             const std::size_t i = (b * C + c) * T + t;
                             sum_g += g[i];
                             sum_gx += g[i] * (*xhat)[i];
                         }
                     if (ng) gn->grad[c] += sum_gx;
                     if (nb) bn->grad[c] += sum_g;
                     if (nx) {
                         const double coeff = gn->values[c] * (*inv_std)[c];
                         if (training) {
                             for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t t = 0; t < T; ++t) {
                                     const std::size_t i = (b * C + c) * T + t;
                                     xn->grad[i] += coeff * (g[i] - sum_g / m - (*xhat)[i] * sum_gx / m);
                                 }
                         } else {
                             for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t t = 0; t < T; ++t) {
                                     const std::size_t i = (b * C + c) * T + t;
                                     xn->grad[i] += coeff * g[i];
                                 }
                         }
                     }
                 }
             }});
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);
    if (should_record({&x})) {
        auto xn = x.node();
        auto on = out.node();
        Tape::active()->record({"sum", {xn}, on, [xn, on]() {
                                    xn->ensure_grad();
                                    const double g = on->grad[0];
                                    for (double& v : xn->grad) v += g;
                                }});
    }
    return out;
}

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s / n);
    if (should_record({&x})) {
        auto xn = x.node();
        auto on = out.node();
        Tape::active()->record({"mean", {xn}, on, [xn, on, n]() {
                                    xn->ensure_grad();
                                    const double g = on->grad[0] / n;
                                    for (double& v : xn->grad) v += g;
                                }});
    }
    return out;
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("mse: shapes disagree: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    const std::size_t n = pred.size();
    double s = 0.0;
    const double* pp = pred.data().data();
    const double* tp = target.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pp[i] - tp[i];
        s += d * d;
    }
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    check_finite("mse", out);
    if (should_record({&pred, &target})) {
        auto pn = pred.node();
        auto tn = target.node();
        auto on = out.node();
        const bool np = needs_grad(pred), nt = needs_grad(target);
        Tape::active()->record({"mse", {pn, tn}, on, [pn, tn, on, n, np, nt]() {
                                    const double g = on->grad[0] * 2.0 / static_cast<double>(n);
                                    if (np) pn->ensure_grad();
                                    if (nt) tn->ensure_grad();
                                    for (std::size_t i = 0; i < n; ++i) {
                                        const double d = pn->values[i] - tn->values[i];
                                        if (np) pn->grad[i] += g * d;
                                        if (nt) tn->grad[i] -= g * d;
                                    }
                                }});
    }
    return out;
}

}  // namespace patchcast
