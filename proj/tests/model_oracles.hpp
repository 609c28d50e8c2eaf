#ifndef PHREC_TESTS_MODEL_ORACLES_HPP
#define PHREC_TESTS_MODEL_ORACLES_HPP

// Independent forward-pass references for the five rankers plus shared
// helpers for full-model gradient checks. Everything here recomputes scores
// with plain loops so the production layer code is never on the oracle path.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "phrec/rankers.hpp"

namespace phrec::testing {

using ParamMap = std::map<std::string, const Tensor*>;

inline ParamMap param_map(Ranker& model) {
    ParamMap out;
    for (Parameter* p : model.params()) out.emplace(p->name, &p->value);
    return out;
}

// deterministic non-degenerate parameter/input pattern
inline void fill_patterned(Ranker& model) {
    int which = 1;
    for (Parameter* p : model.params()) {
        for (std::size_t i = 0; i < p->value.count(); ++i)
            p->value.values[i] =
                static_cast<Real>(0.35 * std::sin(0.7 * static_cast<double>(i) + which));
        ++which;
    }
}

inline Tensor patterned_input(std::size_t n, std::size_t d, double phase) {
    Tensor t = Tensor::matrix(n, d);
    for (std::size_t i = 0; i < t.count(); ++i)
        t.values[i] = static_cast<Real>(0.8 * std::sin(0.31 * static_cast<double>(i) + phase));
    return t;
}

// ---- naive building blocks ----

inline std::vector<double> naive_linear(const Tensor& W, const Tensor& b,
                                        const std::vector<double>& x) {
    std::vector<double> y(W.rows(), 0.0);
    for (std::size_t o = 0; o < W.rows(); ++o) {
        double s = b.at(o);
        for (std::size_t i = 0; i < W.cols(); ++i) s += W.at(o, i) * x[i];
        y[o] = s;
    }
    return y;
}

// valid convolution over positions followed by per-filter max over time
inline std::vector<double> naive_conv_maxpool(const Tensor& E, const Tensor& K, const Tensor& b,
                                              std::size_t width) {
    const std::size_t F = K.rows(), d = K.cols() / width, n = E.rows();
    std::vector<double> pooled(F, 0.0);
    if (n < width) return pooled;
    for (std::size_t f = 0; f < F; ++f) {
        double best = -1e300;
        for (std::size_t p = 0; p + width <= n; ++p) {
            double s = b.at(f);
            for (std::size_t t = 0; t < width; ++t)
                for (std::size_t c = 0; c < d; ++c) s += K.at(f, t * d + c) * E.at(p + t, c);
            best = std::max(best, s);
        }
        pooled[f] = best;
    }
    return pooled;
}

inline double naive_asym_cosine(const std::vector<double>& x, const std::vector<double>& y,
                                double alpha) {
    double dot = 0, nx = 0, ny = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0 || ny == 0) return 0;
    return dot / (std::pow(nx, alpha) * std::pow(ny, 1.0 - alpha));
}

inline double naive_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// one LSTM direction; gate rows ordered [i f g o]
inline std::vector<std::vector<double>> naive_lstm(const Tensor& E, const Tensor& Wx,
                                                   const Tensor& Wh, const Tensor& b,
                                                   bool reversed) {
    const std::size_t n = E.rows(), d = E.cols(), H = Wh.cols();
    std::vector<std::vector<double>> hs(n, std::vector<double>(H, 0.0));
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = reversed ? n - 1 - step : step;
        std::vector<double> z(4 * H, 0.0);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            double s = b.at(r);
            for (std::size_t k = 0; k < d; ++k) s += Wx.at(r, k) * E.at(t, k);
            for (std::size_t k = 0; k < H; ++k) s += Wh.at(r, k) * h[k];
            z[r] = s;
        }
        for (std::size_t u = 0; u < H; ++u) {
            const double gi = naive_sigmoid(z[u]);
            const double gf = naive_sigmoid(z[H + u]);
            const double gg = std::tanh(z[2 * H + u]);
            const double go = naive_sigmoid(z[3 * H + u]);
            c[u] = gf * c[u] + gi * gg;
            h[u] = go * std::tanh(c[u]);
        }
        hs[t] = h;
    }
    return hs;
}

inline std::vector<std::vector<double>> naive_bilstm(const Tensor& E, const ParamMap& params,
                                                     const std::string& prefix) {
    const auto fwd = naive_lstm(E, *params.at(prefix + ".fwd.Wx"), *params.at(prefix + ".fwd.Wh"),
                                *params.at(prefix + ".fwd.b"), false);
    const auto bwd = naive_lstm(E, *params.at(prefix + ".bwd.Wx"), *params.at(prefix + ".bwd.Wh"),
                                *params.at(prefix + ".bwd.b"), true);
    std::vector<std::vector<double>> out(E.rows());
    for (std::size_t t = 0; t < E.rows(); ++t) {
        out[t] = fwd[t];
        out[t].insert(out[t].end(), bwd[t].begin(), bwd[t].end());
    }
    return out;
}

inline double naive_cos_rows(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<Real> knrm_mus(int kernels) {
    std::vector<Real> mus;
    const int soft = kernels - 1;
    for (int k = 0; k < soft; ++k)
        mus.push_back(Real(-1) + (Real(k) + Real(0.5)) * Real(2) / Real(soft));
    mus.push_back(Real(1));
    return mus;
}

// ---- per-model oracle scores ----

inline double oracle_textcnn(const RankerConfig& cfg, const ParamMap& p, const Tensor& Ec,
                             const Tensor& Er) {
    auto encode = [&](const Tensor& E) {
        std::vector<double> repr;
        const char* names[3] = {"conv1", "conv2", "conv3"};
        for (int w = 0; w < 3; ++w) {
            const auto part =
                naive_conv_maxpool(E, *p.at(std::string(names[w]) + ".K"),
                                   *p.at(std::string(names[w]) + ".b"), static_cast<std::size_t>(w + 1));
            repr.insert(repr.end(), part.begin(), part.end());
        }
        return repr;
    };
    return naive_asym_cosine(encode(Ec), encode(Er), cfg.alpha);
}

inline double oracle_cdssm(const RankerConfig&, const ParamMap& p, const Tensor& Ec,
                           const Tensor& Er) {
    auto encode = [&](const Tensor& E) {
        auto pooled = naive_conv_maxpool(E, *p.at("conv.K"), *p.at("conv.b"), 3);
        auto z = naive_linear(*p.at("mlp.W"), *p.at("mlp.b"), pooled);
        for (auto& v : z) v = std::tanh(v);
        return z;
    };
    return naive_asym_cosine(encode(Ec), encode(Er), 0.5);
}

inline double oracle_mvlstm(const RankerConfig& cfg, const ParamMap& p, const Tensor& Ec,
                            const Tensor& Er) {
    const auto P = naive_bilstm(Ec, p, "lstm");
    const auto Q = naive_bilstm(Er, p, "lstm");
    std::vector<double> cells;
    for (const auto& pi : P)
        for (const auto& qj : Q) cells.push_back(naive_cos_rows(pi, qj));
    // k largest in original order, zero-padded
    std::vector<std::size_t> idx(cells.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (cells[a] != cells[b]) return cells[a] > cells[b];
        return a < b;
    });
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.topk), cells.size());
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    std::vector<double> v(static_cast<std::size_t>(cfg.topk), 0.0);
    for (std::size_t i = 0; i < take; ++i) v[i] = cells[idx[i]];

    for (std::size_t layer = 0; layer < cfg.mlp_dims.size(); ++layer) {
        v = naive_linear(*p.at("mlp" + std::to_string(layer) + ".W"),
                         *p.at("mlp" + std::to_string(layer) + ".b"), v);
        if (layer + 1 < cfg.mlp_dims.size())
            for (auto& x : v) x = std::tanh(x);
    }
    return v[0];
}

inline double oracle_knrm(const RankerConfig& cfg, const ParamMap& p, const Tensor& Ec,
                          const Tensor& Er) {
    const auto mus = knrm_mus(cfg.kernels);
    std::vector<double> phi(mus.size(), 0.0);
    for (std::size_t k = 0; k < mus.size(); ++k) {
        for (std::size_t i = 0; i < Ec.rows(); ++i) {
            double inner = 0;
            for (std::size_t j = 0; j < Er.rows(); ++j) {
                std::vector<double> a(Ec.row(i), Ec.row(i) + Ec.cols());
                std::vector<double> b(Er.row(j), Er.row(j) + Er.cols());
                const double m = naive_cos_rows(a, b);
                const double diff = m - static_cast<double>(mus[k]);
                inner += std::exp(-diff * diff / (2.0 * cfg.sigma * cfg.sigma));
            }
            phi[k] += std::log(inner + 1e-10);
        }
    }
    for (auto& v : phi) v *= 0.1; // ranking-layer feature scale
    const auto y = naive_linear(*p.at("ranking.W"), *p.at("ranking.b"), phi);
    return std::tanh(y[0]);
}

inline double oracle_bilstm_sa(const RankerConfig& cfg, const ParamMap& p, const Tensor& Ec,
                               const Tensor& Er) {
    auto encode = [&](const Tensor& E) {
        const auto H = naive_bilstm(E, p, "lstm");
        const std::size_t n = H.size(), in = H[0].size();
        const Tensor& W1 = *p.at("sa.W1");
        const Tensor& W2 = *p.at("sa.W2");
        const std::size_t d_a = W1.rows(), r = W2.rows();
        std::vector<std::vector<double>> S(d_a, std::vector<double>(n, 0.0));
        for (std::size_t a = 0; a < d_a; ++a)
            for (std::size_t t = 0; t < n; ++t) {
                double s = 0;
                for (std::size_t c = 0; c < in; ++c) s += W1.at(a, c) * H[t][c];
                S[a][t] = std::tanh(s);
            }
        std::vector<double> flat;
        for (std::size_t k = 0; k < r; ++k) {
            std::vector<double> logits(n, 0.0);
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t a = 0; a < d_a; ++a) logits[t] += W2.at(k, a) * S[a][t];
            const double mx = *std::max_element(logits.begin(), logits.end());
            double sum = 0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                sum += l;
            }
            for (auto& l : logits) l /= sum;
            for (std::size_t c = 0; c < in; ++c) {
                double s = 0;
                for (std::size_t t = 0; t < n; ++t) s += logits[t] * H[t][c];
                flat.push_back(s);
            }
        }
        return flat;
    };
    (void)cfg;
    return naive_asym_cosine(encode(Ec), encode(Er), 0.5);
}

inline double oracle_score(const RankerConfig& cfg, Ranker& model, const Tensor& Ec,
                           const Tensor& Er) {
    const auto p = param_map(model);
    switch (cfg.model) {
        case ModelKind::textcnn: return oracle_textcnn(cfg, p, Ec, Er);
        case ModelKind::cdssm: return oracle_cdssm(cfg, p, Ec, Er);
        case ModelKind::mvlstm: return oracle_mvlstm(cfg, p, Ec, Er);
        case ModelKind::knrm: return oracle_knrm(cfg, p, Ec, Er);
        case ModelKind::bilstm_sa: return oracle_bilstm_sa(cfg, p, Ec, Er);
    }
    return 0;
}

// small shapes so finite differences stay fast
inline RankerConfig tiny_config(ModelKind kind) {
    RankerConfig cfg;
    cfg.model = kind;
    cfg.filters = 3;
    cfg.hidden = 2;
    cfg.mlp_out = 5;
    cfg.topk = 6;
    cfg.mlp_dims = {3, 1};
    cfg.kernels = 4;
    cfg.sigma = 0.3;
    cfg.d_a = 3;
    cfg.r = 2;
    cfg.max_len = 16;
    cfg.seed = 23;
    return cfg;
}

// Full assembled backward vs central differences on a toy pair. Exercises the
// shared-encoder wiring exactly as the trainer drives it.
inline GradCheckResult full_model_gradcheck(const RankerConfig& cfg, int embed_dim,
                                            std::size_t n_c, std::size_t n_r,
                                            bool check_input_grad) {
    RankerConfig wired = cfg;
    if (check_input_grad) wired.fine_tune = true; // K-NRM skips input grads otherwise
    auto model = make_ranker(wired, embed_dim);
    fill_patterned(*model);
    Tensor Ec = patterned_input(n_c, static_cast<std::size_t>(embed_dim), 0.2);
    Tensor Er = patterned_input(n_r, static_cast<std::size_t>(embed_dim), 1.7);

    for (Parameter* p : model->params()) p->zero_grad();
    auto enc_c = model->encode(Ec);
    auto enc_r = model->encode(Er);
    std::unique_ptr<Ranker::PairCtx> ctx;
    model->score_encoded(*enc_c, *enc_r, &ctx);
    model->backward_pair(*ctx, Real(1), *enc_c, *enc_r);
    Tensor dEc, dEr;
    model->encoder_backward(*enc_c, check_input_grad ? &dEc : nullptr, 0);
    model->encoder_backward(*enc_r, check_input_grad ? &dEr : nullptr, 0);

    auto eval = [&] { return static_cast<double>(model->score(Ec, Er)); };
    std::vector<CheckedBuffer> buffers;
    for (Parameter* p : model->params())
        buffers.push_back({p->name, &p->value.values, &p->grad.values});
    if (check_input_grad) {
        buffers.push_back({"Ec", &Ec.values, &dEc.values});
        buffers.push_back({"Er", &Er.values, &dEr.values});
    }
    return gradcheck(eval, buffers);
}

} // namespace phrec::testing

#endif
