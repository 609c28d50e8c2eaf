#ifndef PHREC_LAYERS_HPP
#define PHREC_LAYERS_HPP

#include <vector>

#include "phrec/rng.hpp"
#include "phrec/tensor.hpp"

namespace phrec::nn {

// All forwards take an explicit context so one layer instance can encode
// several inputs per step (the encoders are shared across article pairs).
// backward() accumulates parameter gradients and returns/writes input grads.

Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng);

// ---- elementwise ----

Tensor tanh_forward(const Tensor& x, Tensor& saved_y);
Tensor tanh_backward(const Tensor& saved_y, const Tensor& dy);

Tensor relu_forward(const Tensor& x, Tensor& saved_x);
Tensor relu_backward(const Tensor& saved_x, const Tensor& dy);

// Row-wise softmax.
Tensor softmax_rows(const Tensor& x);
// dx given the forward output y and upstream dy.
Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy);

// ---- linear ----

struct Linear {
    Parameter W; // out x in
    Parameter b; // out

    void init(std::size_t in, std::size_t out, Rng& rng, const std::string& name);

    struct Ctx {
        Tensor x;
    };
    Tensor forward(const Tensor& x, Ctx& ctx) const; // x: vec(in) -> vec(out)
    Tensor backward(const Ctx& ctx, const Tensor& dy);
};

// ---- conv1d over the unit dimension ----

struct Conv1d {
    std::size_t width = 1;
    Parameter K; // filters x (width*dim)
    Parameter b; // filters

    void init(std::size_t width_, std::size_t dim, std::size_t filters, Rng& rng,
              const std::string& name);

    struct Ctx {
        Tensor x;
    };
    // x: n x dim -> (n-width+1) x filters; empty output when n < width.
    Tensor forward(const Tensor& x, Ctx& ctx) const;
    Tensor backward(const Ctx& ctx, const Tensor& dy);
};

// ---- pooling ----

struct MaxPoolCtx {
    std::vector<std::size_t> argmax; // per filter
    std::size_t rows = 0;
    std::size_t cols = 0;
};
// y: n x F -> vec(F); zero vector when n == 0. Ties keep the earliest row.
Tensor max_pool_over_time(const Tensor& x, MaxPoolCtx& ctx);
Tensor max_pool_over_time_backward(const MaxPoolCtx& ctx, const Tensor& dy);

struct KMaxPoolCtx {
    std::vector<std::size_t> picked; // input indices, ascending
    std::size_t input_size = 0;
    std::size_t k = 0;
};
// Keeps the k largest values in original order (ties: earlier position);
// zero-padded to exactly k when the input is shorter.
Tensor k_max_pool(const Tensor& x, std::size_t k, KMaxPoolCtx& ctx);
Tensor k_max_pool_backward(const KMaxPoolCtx& ctx, const Tensor& dy);

// ---- similarity ----

// x.y / (|x|^(2a) |y|^(2(1-a))); 0 when either vector is zero (padded input
// convention).
Real asym_cosine(const std::vector<Real>& x, const std::vector<Real>& y, Real alpha);

struct AsymCosineCtx {
    std::vector<Real> x, y;
    Real alpha = 0.5;
    Real nx2 = 0, ny2 = 0, dot = 0, score = 0;
    bool degenerate = false;
};
Real asym_cosine_forward(const std::vector<Real>& x, const std::vector<Real>& y, Real alpha,
                         AsymCosineCtx& ctx);
void asym_cosine_backward(const AsymCosineCtx& ctx, Real ds, std::vector<Real>& dx,
                          std::vector<Real>& dy);

// M_ij = cosine(p_i, q_j) for two unit-vector sequences; zero rows give 0.
struct DotInteractionCtx {
    Tensor P, Q;
    std::vector<Real> pn, qn; // row norms
    Tensor M;
};
Tensor dot_interaction(const Tensor& P, const Tensor& Q, DotInteractionCtx& ctx);
void dot_interaction_backward(const DotInteractionCtx& ctx, const Tensor& dM, Tensor& dP,
                              Tensor& dQ);

// ---- kernel pooling ----

struct RbfPoolCtx {
    Tensor M;
    std::vector<Real> mus;
    Real sigma = 0.05;
    Tensor row_sums; // rows x kernels, inner sums before the log
};
// phi_k = sum_i ln(sum_j exp(-(M_ij - mu_k)^2 / (2 sigma^2)) + eps)
Tensor rbf_kernel_pool(const Tensor& M, const std::vector<Real>& mus, Real sigma, RbfPoolCtx& ctx);
void rbf_kernel_pool_backward(const RbfPoolCtx& ctx, const Tensor& dphi, Tensor& dM);

// ---- recurrent ----

struct Lstm {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    Parameter Wx; // 4H x D, gate order i, f, g, o
    Parameter Wh; // 4H x H
    Parameter b;  // 4H

    void init(std::size_t input_dim_, std::size_t hidden_, Rng& rng, const std::string& name);

    struct Ctx {
        Tensor x;     // n x D
        Tensor gates; // n x 4H post-activation
        Tensor c;     // n x H
        Tensor h;     // n x H
    };
    Tensor forward(const Tensor& x, Ctx& ctx) const; // returns h: n x H
    // dh: n x H upstream; returns dx (n x D).
    Tensor backward(const Ctx& ctx, const Tensor& dh);
};

struct BiLstm {
    Lstm fwd;
    Lstm bwd;

    void init(std::size_t input_dim, std::size_t hidden_per_dir, Rng& rng, const std::string& name);
    std::size_t out_dim() const { return fwd.hidden + bwd.hidden; }

    struct Ctx {
        Lstm::Ctx f, b;
        std::size_t n = 0;
    };
    Tensor forward(const Tensor& x, Ctx& ctx) const; // n x 2H, [fwd | bwd] per row
    Tensor backward(const Ctx& ctx, const Tensor& dh);

    std::vector<Parameter*> params();
};

// ---- structured self-attention ----

struct SelfAttention {
    Parameter W1; // d_a x in
    Parameter W2; // r x d_a

    void init(std::size_t in, std::size_t d_a, std::size_t r, Rng& rng, const std::string& name);

    struct Ctx {
        Tensor H; // n x in
        Tensor S; // d_a x n, tanh(W1 H^T)
        Tensor A; // r x n, row-softmax(W2 S)
    };
    // Returns M = A H (r x in); attention rows available via ctx.A.
    Tensor forward(const Tensor& H, Ctx& ctx) const;
    // dM upstream; dA_extra adds a direct gradient on A (attention penalty).
    Tensor backward(const Ctx& ctx, const Tensor& dM, const Tensor* dA_extra = nullptr);
};

// Frobenius penalty |A A^T - I|^2 and its gradient 4 (A A^T - I) A.
Real attention_penalty(const Tensor& A);
Tensor attention_penalty_grad(const Tensor& A);

} // namespace phrec::nn

#endif
