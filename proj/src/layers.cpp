#include "phrec/layers.hpp"

#include <algorithm>
#include <cmath>

namespace phrec::nn {

namespace {
constexpr Real kRbfEps = 1e-10;

inline Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }
} // namespace

Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t = Tensor::matrix(rows, cols);
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& x : t.values) x = static_cast<Real>(rng.uniform(-s, s));
    return t;
}

// ---- elementwise ----

Tensor tanh_forward(const Tensor& x, Tensor& saved_y) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.count(); ++i) y.values[i] = std::tanh(x.values[i]);
    saved_y = y;
    return y;
}

Tensor tanh_backward(const Tensor& saved_y, const Tensor& dy) {
    check_dims(saved_y.same_shape(dy), "tanh", saved_y.shape_str() + " vs " + dy.shape_str());
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.count(); ++i)
        dx.values[i] = dy.values[i] * (Real(1) - saved_y.values[i] * saved_y.values[i]);
    return dx;
}

Tensor relu_forward(const Tensor& x, Tensor& saved_x) {
    saved_x = x;
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.count(); ++i) y.values[i] = std::max(Real(0), x.values[i]);
    return y;
}

Tensor relu_backward(const Tensor& saved_x, const Tensor& dy) {
    check_dims(saved_x.same_shape(dy), "relu", saved_x.shape_str() + " vs " + dy.shape_str());
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.count(); ++i)
        dx.values[i] = saved_x.values[i] > Real(0) ? dy.values[i] : Real(0);
    return dx;
}

Tensor softmax_rows(const Tensor& x) {
    Tensor y(x.shape);
    const std::size_t rows = x.rows(), cols = x.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        Real mx = x.at(i, 0);
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x.at(i, j));
        Real sum = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            const Real e = std::exp(x.at(i, j) - mx);
            y.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < cols; ++j) y.at(i, j) /= sum;
    }
    return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy) {
    check_dims(y.same_shape(dy), "softmax", y.shape_str() + " vs " + dy.shape_str());
    Tensor dx(y.shape);
    const std::size_t rows = y.rows(), cols = y.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        Real inner = 0;
        for (std::size_t j = 0; j < cols; ++j) inner += dy.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < cols; ++j)
            dx.at(i, j) = (dy.at(i, j) - inner) * y.at(i, j);
    }
    return dx;
}

// ---- linear ----

void Linear::init(std::size_t in, std::size_t out, Rng& rng, const std::string& name) {
    W = Parameter(name + ".W", glorot_matrix(out, in, rng));
    b = Parameter(name + ".b", Tensor::vec(out));
}

Tensor Linear::forward(const Tensor& x, Ctx& ctx) const {
    const std::size_t in = W.value.cols(), out = W.value.rows();
    check_dims(x.count() == in, "linear",
               "input " + x.shape_str() + " vs weight " + W.value.shape_str());
    ctx.x = x;
    Tensor y = Tensor::vec(out);
    for (std::size_t o = 0; o < out; ++o) {
        Real s = b.value.at(o);
        const Real* wrow = W.value.row(o);
        for (std::size_t i = 0; i < in; ++i) s += wrow[i] * x.values[i];
        y.at(o) = s;
    }
    return y;
}

Tensor Linear::backward(const Ctx& ctx, const Tensor& dy) {
    const std::size_t in = W.value.cols(), out = W.value.rows();
    check_dims(dy.count() == out, "linear", "dy " + dy.shape_str());
    Tensor dx = Tensor::vec(in);
    for (std::size_t o = 0; o < out; ++o) {
        const Real g = dy.at(o);
        b.grad.at(o) += g;
        Real* wg = W.grad.row(o);
        const Real* wrow = W.value.row(o);
        for (std::size_t i = 0; i < in; ++i) {
            wg[i] += g * ctx.x.values[i];
            dx.values[i] += g * wrow[i];
        }
    }
    return dx;
}

// ---- conv1d ----

void Conv1d::init(std::size_t width_, std::size_t dim, std::size_t filters, Rng& rng,
                  const std::string& name) {
    width = width_;
    K = Parameter(name + ".K", glorot_matrix(filters, width * dim, rng));
    b = Parameter(name + ".b", Tensor::vec(filters));
}

Tensor Conv1d::forward(const Tensor& x, Ctx& ctx) const {
    const std::size_t filters = K.value.rows();
    const std::size_t dim = K.value.cols() / width;
    check_dims(x.cols() == dim || x.rows() == 0, "conv1d",
               "input " + x.shape_str() + " vs kernel dim " + std::to_string(dim));
    ctx.x = x;
    const std::size_t n = x.rows();
    if (n < width) return Tensor::matrix(0, filters);
    const std::size_t out_n = n - width + 1;
    Tensor y = Tensor::matrix(out_n, filters);
    for (std::size_t p = 0; p < out_n; ++p) {
        const Real* win = x.row(p); // width*dim contiguous values
        for (std::size_t f = 0; f < filters; ++f) {
            Real s = b.value.at(f);
            const Real* k = K.value.row(f);
            for (std::size_t t = 0; t < width * dim; ++t) s += k[t] * win[t];
            y.at(p, f) = s;
        }
    }
    return y;
}

Tensor Conv1d::backward(const Ctx& ctx, const Tensor& dy) {
    const std::size_t filters = K.value.rows();
    const std::size_t dim = K.value.cols() / width;
    Tensor dx(ctx.x.shape);
    const std::size_t n = ctx.x.rows();
    if (n < width) return dx;
    const std::size_t out_n = n - width + 1;
    check_dims(dy.rows() == out_n && dy.cols() == filters, "conv1d", "dy " + dy.shape_str());
    for (std::size_t p = 0; p < out_n; ++p) {
        const Real* win = ctx.x.row(p);
        Real* dwin = dx.row(p);
        for (std::size_t f = 0; f < filters; ++f) {
            const Real g = dy.at(p, f);
            if (g == Real(0)) continue;
            b.grad.at(f) += g;
            Real* kg = K.grad.row(f);
            const Real* k = K.value.row(f);
            for (std::size_t t = 0; t < width * dim; ++t) {
                kg[t] += g * win[t];
                dwin[t] += g * k[t];
            }
        }
    }
    return dx;
}

// ---- pooling ----

Tensor max_pool_over_time(const Tensor& x, MaxPoolCtx& ctx) {
    const std::size_t n = x.rows(), f = x.cols();
    ctx.rows = n;
    ctx.cols = f;
    ctx.argmax.assign(f, 0);
    Tensor y = Tensor::vec(f);
    if (n == 0) return y;
    for (std::size_t c = 0; c < f; ++c) {
        Real best = x.at(0, c);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (x.at(i, c) > best) {
                best = x.at(i, c);
                arg = i;
            }
        }
        y.at(c) = best;
        ctx.argmax[c] = arg;
    }
    return y;
}

Tensor max_pool_over_time_backward(const MaxPoolCtx& ctx, const Tensor& dy) {
    check_dims(dy.count() == ctx.cols, "max_pool_over_time", "dy " + dy.shape_str());
    Tensor dx = Tensor::matrix(ctx.rows, ctx.cols);
    if (ctx.rows == 0) return dx;
    for (std::size_t c = 0; c < ctx.cols; ++c) dx.at(ctx.argmax[c], c) += dy.at(c);
    return dx;
}

Tensor k_max_pool(const Tensor& x, std::size_t k, KMaxPoolCtx& ctx) {
    const std::size_t n = x.count();
    ctx.input_size = n;
    ctx.k = k;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const std::size_t take = std::min(k, n);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (x.values[a] != x.values[b]) return x.values[a] > x.values[b];
                          return a < b;
                      });
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    ctx.picked = idx;
    Tensor y = Tensor::vec(k);
    for (std::size_t i = 0; i < take; ++i) y.at(i) = x.values[idx[i]];
    return y;
}

Tensor k_max_pool_backward(const KMaxPoolCtx& ctx, const Tensor& dy) {
    check_dims(dy.count() == ctx.k, "k_max_pool", "dy " + dy.shape_str());
    Tensor dx = Tensor::vec(ctx.input_size);
    for (std::size_t i = 0; i < ctx.picked.size(); ++i) dx.at(ctx.picked[i]) += dy.at(i);
    return dx;
}

// ---- similarity ----

Real asym_cosine(const std::vector<Real>& x, const std::vector<Real>& y, Real alpha) {
    AsymCosineCtx ctx;
    return asym_cosine_forward(x, y, alpha, ctx);
}

Real asym_cosine_forward(const std::vector<Real>& x, const std::vector<Real>& y, Real alpha,
                         AsymCosineCtx& ctx) {
    check_dims(x.size() == y.size(), "asym_cosine",
               std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    ctx.x = x;
    ctx.y = y;
    ctx.alpha = alpha;
    ctx.nx2 = ctx.ny2 = ctx.dot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ctx.nx2 += x[i] * x[i];
        ctx.ny2 += y[i] * y[i];
        ctx.dot += x[i] * y[i];
    }
    if (ctx.nx2 == Real(0) || ctx.ny2 == Real(0)) {
        ctx.degenerate = true;
        ctx.score = 0;
        return 0;
    }
    ctx.degenerate = false;
    ctx.score = ctx.dot * std::pow(ctx.nx2, -alpha) * std::pow(ctx.ny2, -(Real(1) - alpha));
    return ctx.score;
}

void asym_cosine_backward(const AsymCosineCtx& ctx, Real ds, std::vector<Real>& dx,
                          std::vector<Real>& dy) {
    dx.assign(ctx.x.size(), Real(0));
    dy.assign(ctx.y.size(), Real(0));
    if (ctx.degenerate) return;
    const Real alpha = ctx.alpha, beta = Real(1) - alpha;
    const Real norm = std::pow(ctx.nx2, -alpha) * std::pow(ctx.ny2, -beta);
    for (std::size_t i = 0; i < ctx.x.size(); ++i) {
        dx[i] = ds * norm * (ctx.y[i] - Real(2) * alpha * ctx.dot * ctx.x[i] / ctx.nx2);
        dy[i] = ds * norm * (ctx.x[i] - Real(2) * beta * ctx.dot * ctx.y[i] / ctx.ny2);
    }
}

Tensor dot_interaction(const Tensor& P, const Tensor& Q, DotInteractionCtx& ctx) {
    check_dims(P.cols() == Q.cols() || P.rows() == 0 || Q.rows() == 0, "dot_interaction",
               P.shape_str() + " vs " + Q.shape_str());
    ctx.P = P;
    ctx.Q = Q;
    const std::size_t np = P.rows(), nq = Q.rows(), d = P.cols();
    ctx.pn.assign(np, 0);
    ctx.qn.assign(nq, 0);
    for (std::size_t i = 0; i < np; ++i) {
        Real s = 0;
        for (std::size_t t = 0; t < d; ++t) s += P.at(i, t) * P.at(i, t);
        ctx.pn[i] = std::sqrt(s);
    }
    for (std::size_t j = 0; j < nq; ++j) {
        Real s = 0;
        for (std::size_t t = 0; t < d; ++t) s += Q.at(j, t) * Q.at(j, t);
        ctx.qn[j] = std::sqrt(s);
    }
    Tensor M = Tensor::matrix(np, nq);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t j = 0; j < nq; ++j) {
            if (ctx.pn[i] == Real(0) || ctx.qn[j] == Real(0)) continue;
            Real s = 0;
            for (std::size_t t = 0; t < d; ++t) s += P.at(i, t) * Q.at(j, t);
            M.at(i, j) = s / (ctx.pn[i] * ctx.qn[j]);
        }
    }
    ctx.M = M;
    return M;
}

void dot_interaction_backward(const DotInteractionCtx& ctx, const Tensor& dM, Tensor& dP,
                              Tensor& dQ) {
    const std::size_t np = ctx.P.rows(), nq = ctx.Q.rows(), d = ctx.P.cols();
    check_dims(dM.rows() == np && dM.cols() == nq, "dot_interaction", "dM " + dM.shape_str());
    if (!dP.same_shape(ctx.P)) dP = Tensor(ctx.P.shape);
    if (!dQ.same_shape(ctx.Q)) dQ = Tensor(ctx.Q.shape);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t j = 0; j < nq; ++j) {
            const Real g = dM.at(i, j);
            if (g == Real(0)) continue;
            if (ctx.pn[i] == Real(0) || ctx.qn[j] == Real(0)) continue;
            const Real inv = Real(1) / (ctx.pn[i] * ctx.qn[j]);
            const Real cij = ctx.M.at(i, j);
            for (std::size_t t = 0; t < d; ++t) {
                dP.at(i, t) += g * (ctx.Q.at(j, t) * inv -
                                    cij * ctx.P.at(i, t) / (ctx.pn[i] * ctx.pn[i]));
                dQ.at(j, t) += g * (ctx.P.at(i, t) * inv -
                                    cij * ctx.Q.at(j, t) / (ctx.qn[j] * ctx.qn[j]));
            }
        }
    }
}

// ---- kernel pooling ----

Tensor rbf_kernel_pool(const Tensor& M, const std::vector<Real>& mus, Real sigma, RbfPoolCtx& ctx) {
    if (sigma <= Real(0)) throw UsageError("rbf_kernel_pool: sigma must be > 0");
    ctx.M = M;
    ctx.mus = mus;
    ctx.sigma = sigma;
    const std::size_t rows = M.rows(), cols = M.cols(), K = mus.size();
    ctx.row_sums = Tensor::matrix(rows, K);
    Tensor phi = Tensor::vec(K);
    const Real inv2s2 = Real(1) / (Real(2) * sigma * sigma);
    for (std::size_t k = 0; k < K; ++k) {
        Real acc = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            Real s = 0;
            for (std::size_t j = 0; j < cols; ++j) {
                const Real d = M.at(i, j) - mus[k];
                s += std::exp(-d * d * inv2s2);
            }
            ctx.row_sums.at(i, k) = s;
            acc += std::log(s + kRbfEps);
        }
        phi.at(k) = acc;
    }
    return phi;
}

void rbf_kernel_pool_backward(const RbfPoolCtx& ctx, const Tensor& dphi, Tensor& dM) {
    const std::size_t rows = ctx.M.rows(), cols = ctx.M.cols(), K = ctx.mus.size();
    check_dims(dphi.count() == K, "rbf_kernel_pool", "dphi " + dphi.shape_str());
    if (!dM.same_shape(ctx.M)) dM = Tensor(ctx.M.shape);
    const Real inv2s2 = Real(1) / (Real(2) * ctx.sigma * ctx.sigma);
    const Real invs2 = Real(1) / (ctx.sigma * ctx.sigma);
    for (std::size_t k = 0; k < K; ++k) {
        const Real g = dphi.at(k);
        if (g == Real(0)) continue;
        for (std::size_t i = 0; i < rows; ++i) {
            const Real denom = ctx.row_sums.at(i, k) + kRbfEps;
            for (std::size_t j = 0; j < cols; ++j) {
                const Real d = ctx.M.at(i, j) - ctx.mus[k];
                const Real kernel = std::exp(-d * d * inv2s2);
                dM.at(i, j) += g * kernel * (-d * invs2) / denom;
            }
        }
    }
}

// ---- LSTM ----

void Lstm::init(std::size_t input_dim_, std::size_t hidden_, Rng& rng, const std::string& name) {
    input_dim = input_dim_;
    hidden = hidden_;
    Wx = Parameter(name + ".Wx", glorot_matrix(4 * hidden, input_dim, rng));
    Wh = Parameter(name + ".Wh", glorot_matrix(4 * hidden, hidden, rng));
    b = Parameter(name + ".b", Tensor::vec(4 * hidden));
    // forget gate bias starts open
    for (std::size_t i = hidden; i < 2 * hidden; ++i) b.value.at(i) = Real(1);
}

Tensor Lstm::forward(const Tensor& x, Ctx& ctx) const {
    check_dims(x.cols() == input_dim || x.rows() == 0, "lstm",
               "input " + x.shape_str() + " vs dim " + std::to_string(input_dim));
    const std::size_t n = x.rows(), H = hidden;
    ctx.x = x;
    ctx.gates = Tensor::matrix(n, 4 * H);
    ctx.c = Tensor::matrix(n, H);
    ctx.h = Tensor::matrix(n, H);
    std::vector<Real> z(4 * H);
    for (std::size_t t = 0; t < n; ++t) {
        const Real* xt = x.row(t);
        const Real* hprev = t > 0 ? ctx.h.row(t - 1) : nullptr;
        for (std::size_t r = 0; r < 4 * H; ++r) {
            Real s = b.value.at(r);
            const Real* wx = Wx.value.row(r);
            for (std::size_t c = 0; c < input_dim; ++c) s += wx[c] * xt[c];
            if (hprev) {
                const Real* wh = Wh.value.row(r);
                for (std::size_t c = 0; c < H; ++c) s += wh[c] * hprev[c];
            }
            z[r] = s;
        }
        for (std::size_t u = 0; u < H; ++u) {
            const Real gi = sigmoid(z[u]);
            const Real gf = sigmoid(z[H + u]);
            const Real gg = std::tanh(z[2 * H + u]);
            const Real go = sigmoid(z[3 * H + u]);
            ctx.gates.at(t, u) = gi;
            ctx.gates.at(t, H + u) = gf;
            ctx.gates.at(t, 2 * H + u) = gg;
            ctx.gates.at(t, 3 * H + u) = go;
            const Real cprev = t > 0 ? ctx.c.at(t - 1, u) : Real(0);
            const Real c = gf * cprev + gi * gg;
            ctx.c.at(t, u) = c;
            ctx.h.at(t, u) = go * std::tanh(c);
        }
    }
    return ctx.h;
}

Tensor Lstm::backward(const Ctx& ctx, const Tensor& dh_out) {
    const std::size_t n = ctx.x.rows(), H = hidden;
    check_dims(dh_out.rows() == n && dh_out.cols() == H, "lstm", "dh " + dh_out.shape_str());
    Tensor dx(ctx.x.shape);
    std::vector<Real> dh(H, 0), dc(H, 0), dz(4 * H);
    for (std::size_t t = n; t-- > 0;) {
        for (std::size_t u = 0; u < H; ++u) dh[u] += dh_out.at(t, u);
        for (std::size_t u = 0; u < H; ++u) {
            const Real gi = ctx.gates.at(t, u);
            const Real gf = ctx.gates.at(t, H + u);
            const Real gg = ctx.gates.at(t, 2 * H + u);
            const Real go = ctx.gates.at(t, 3 * H + u);
            const Real c = ctx.c.at(t, u);
            const Real tc = std::tanh(c);
            const Real cprev = t > 0 ? ctx.c.at(t - 1, u) : Real(0);

            dz[3 * H + u] = dh[u] * tc * go * (Real(1) - go);
            const Real dct = dc[u] + dh[u] * go * (Real(1) - tc * tc);
            dz[u] = dct * gg * gi * (Real(1) - gi);
            dz[H + u] = dct * cprev * gf * (Real(1) - gf);
            dz[2 * H + u] = dct * gi * (Real(1) - gg * gg);
            dc[u] = dct * gf; // carried to t-1
        }
        std::fill(dh.begin(), dh.end(), Real(0));
        const Real* xt = ctx.x.row(t);
        const Real* hprev = t > 0 ? ctx.h.row(t - 1) : nullptr;
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const Real g = dz[r];
            if (g == Real(0)) continue;
            b.grad.at(r) += g;
            Real* wxg = Wx.grad.row(r);
            const Real* wx = Wx.value.row(r);
            Real* dxt = dx.row(t);
            for (std::size_t c = 0; c < input_dim; ++c) {
                wxg[c] += g * xt[c];
                dxt[c] += g * wx[c];
            }
            if (hprev) {
                Real* whg = Wh.grad.row(r);
                const Real* wh = Wh.value.row(r);
                for (std::size_t c = 0; c < H; ++c) {
                    whg[c] += g * hprev[c];
                    dh[c] += g * wh[c];
                }
            }
        }
    }
    return dx;
}

// ---- BiLSTM ----

void BiLstm::init(std::size_t input_dim, std::size_t hidden_per_dir, Rng& rng,
                  const std::string& name) {
    fwd.init(input_dim, hidden_per_dir, rng, name + ".fwd");
    bwd.init(input_dim, hidden_per_dir, rng, name + ".bwd");
}

std::vector<Parameter*> BiLstm::params() {
    return {&fwd.Wx, &fwd.Wh, &fwd.b, &bwd.Wx, &bwd.Wh, &bwd.b};
}

Tensor BiLstm::forward(const Tensor& x, Ctx& ctx) const {
    const std::size_t n = x.rows(), H = fwd.hidden;
    ctx.n = n;
    Tensor rev(x.shape);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < x.cols(); ++c) rev.at(t, c) = x.at(n - 1 - t, c);
    const Tensor hf = fwd.forward(x, ctx.f);
    const Tensor hb = bwd.forward(rev, ctx.b);
    Tensor out = Tensor::matrix(n, 2 * H);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t u = 0; u < H; ++u) {
            out.at(t, u) = hf.at(t, u);
            out.at(t, H + u) = hb.at(n - 1 - t, u);
        }
    }
    return out;
}

Tensor BiLstm::backward(const Ctx& ctx, const Tensor& dh) {
    const std::size_t n = ctx.n, H = fwd.hidden;
    check_dims(dh.rows() == n && dh.cols() == 2 * H, "bilstm", "dh " + dh.shape_str());
    Tensor dhf = Tensor::matrix(n, H), dhb = Tensor::matrix(n, H);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t u = 0; u < H; ++u) {
            dhf.at(t, u) = dh.at(t, u);
            dhb.at(n - 1 - t, u) = dh.at(t, H + u);
        }
    }
    const Tensor dxf = fwd.backward(ctx.f, dhf);
    const Tensor dxb_rev = bwd.backward(ctx.b, dhb);
    Tensor dx(dxf.shape);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < dx.cols(); ++c)
            dx.at(t, c) = dxf.at(t, c) + dxb_rev.at(n - 1 - t, c);
    return dx;
}

// ---- structured self-attention ----

void SelfAttention::init(std::size_t in, std::size_t d_a, std::size_t r, Rng& rng,
                         const std::string& name) {
    W1 = Parameter(name + ".W1", glorot_matrix(d_a, in, rng));
    W2 = Parameter(name + ".W2", glorot_matrix(r, d_a, rng));
}

Tensor SelfAttention::forward(const Tensor& H, Ctx& ctx) const {
    const std::size_t n = H.rows(), in = H.cols();
    const std::size_t d_a = W1.value.rows(), r = W2.value.rows();
    check_dims(in == W1.value.cols(), "self_attention",
               "H " + H.shape_str() + " vs W1 " + W1.value.shape_str());
    ctx.H = H;
    // S = tanh(W1 H^T): d_a x n
    Tensor S = Tensor::matrix(d_a, n);
    for (std::size_t a = 0; a < d_a; ++a) {
        const Real* w = W1.value.row(a);
        for (std::size_t t = 0; t < n; ++t) {
            Real s = 0;
            const Real* h = H.row(t);
            for (std::size_t c = 0; c < in; ++c) s += w[c] * h[c];
            S.at(a, t) = std::tanh(s);
        }
    }
    ctx.S = S;
    // logits = W2 S: r x n
    Tensor logits = Tensor::matrix(r, n);
    for (std::size_t k = 0; k < r; ++k) {
        const Real* w = W2.value.row(k);
        for (std::size_t t = 0; t < n; ++t) {
            Real s = 0;
            for (std::size_t a = 0; a < d_a; ++a) s += w[a] * S.at(a, t);
            logits.at(k, t) = s;
        }
    }
    ctx.A = softmax_rows(logits);
    // M = A H: r x in
    Tensor M = Tensor::matrix(r, in);
    for (std::size_t k = 0; k < r; ++k) {
        for (std::size_t t = 0; t < n; ++t) {
            const Real a = ctx.A.at(k, t);
            if (a == Real(0)) continue;
            const Real* h = H.row(t);
            for (std::size_t c = 0; c < in; ++c) M.at(k, c) += a * h[c];
        }
    }
    return M;
}

Tensor SelfAttention::backward(const Ctx& ctx, const Tensor& dM, const Tensor* dA_extra) {
    const std::size_t n = ctx.H.rows(), in = ctx.H.cols();
    const std::size_t d_a = W1.value.rows(), r = W2.value.rows();
    check_dims(dM.rows() == r && dM.cols() == in, "self_attention", "dM " + dM.shape_str());

    // dA = dM H^T (+ extra); dH += A^T dM
    Tensor dA = Tensor::matrix(r, n);
    Tensor dH(ctx.H.shape);
    for (std::size_t k = 0; k < r; ++k) {
        for (std::size_t t = 0; t < n; ++t) {
            Real s = 0;
            const Real* h = ctx.H.row(t);
            for (std::size_t c = 0; c < in; ++c) s += dM.at(k, c) * h[c];
            dA.at(k, t) = s;
            const Real a = ctx.A.at(k, t);
            if (a != Real(0)) {
                Real* dh = dH.row(t);
                for (std::size_t c = 0; c < in; ++c) dh[c] += a * dM.at(k, c);
            }
        }
    }
    if (dA_extra) {
        check_dims(dA_extra->same_shape(dA), "self_attention", "dA " + dA_extra->shape_str());
        for (std::size_t i = 0; i < dA.count(); ++i) dA.values[i] += dA_extra->values[i];
    }

    const Tensor dlogits = softmax_rows_backward(ctx.A, dA);

    // dW2 += dlogits S^T; dS = W2^T dlogits
    Tensor dS = Tensor::matrix(d_a, n);
    for (std::size_t k = 0; k < r; ++k) {
        Real* w2g = W2.grad.row(k);
        const Real* w2 = W2.value.row(k);
        for (std::size_t t = 0; t < n; ++t) {
            const Real g = dlogits.at(k, t);
            if (g == Real(0)) continue;
            for (std::size_t a = 0; a < d_a; ++a) {
                w2g[a] += g * ctx.S.at(a, t);
                dS.at(a, t) += g * w2[a];
            }
        }
    }

    // through tanh: dZ1 = dS * (1 - S^2); dW1 += dZ1 H; dH += dZ1^T W1
    for (std::size_t a = 0; a < d_a; ++a) {
        Real* w1g = W1.grad.row(a);
        const Real* w1 = W1.value.row(a);
        for (std::size_t t = 0; t < n; ++t) {
            const Real s = ctx.S.at(a, t);
            const Real dz = dS.at(a, t) * (Real(1) - s * s);
            if (dz == Real(0)) continue;
            const Real* h = ctx.H.row(t);
            Real* dh = dH.row(t);
            for (std::size_t c = 0; c < in; ++c) {
                w1g[c] += dz * h[c];
                dh[c] += dz * w1[c];
            }
        }
    }
    return dH;
}

Real attention_penalty(const Tensor& A) {
    const std::size_t r = A.rows(), n = A.cols();
    Real p = 0;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            Real s = 0;
            for (std::size_t t = 0; t < n; ++t) s += A.at(i, t) * A.at(j, t);
            if (i == j) s -= Real(1);
            p += s * s;
        }
    }
    return p;
}

Tensor attention_penalty_grad(const Tensor& A) {
    const std::size_t r = A.rows(), n = A.cols();
    Tensor G = Tensor::matrix(r, r); // A A^T - I
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            Real s = 0;
            for (std::size_t t = 0; t < n; ++t) s += A.at(i, t) * A.at(j, t);
            if (i == j) s -= Real(1);
            G.at(i, j) = s;
        }
    }
    Tensor dA = Tensor::matrix(r, n);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            const Real g = Real(4) * G.at(i, j);
            if (g == Real(0)) continue;
            for (std::size_t t = 0; t < n; ++t) dA.at(i, t) += g * A.at(j, t);
        }
    return dA;
}

} // namespace phrec::nn
