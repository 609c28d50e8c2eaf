#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "phrec/layers.hpp"
#include "phrec/optim.hpp"
#include "phrec/rng.hpp"

using namespace phrec;
using namespace phrec::nn;
using phrec::testing::CheckedBuffer;
using phrec::testing::gradcheck;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::matrix(r, c);
    for (auto& v : t.values) v = static_cast<Real>(rng.uniform(lo, hi));
    return t;
}

std::vector<Real> random_weights(std::size_t n, Rng& rng) {
    std::vector<Real> w(n);
    for (auto& v : w) v = static_cast<Real>(rng.uniform(-1.0, 1.0));
    return w;
}

Real project(const Tensor& y, const std::vector<Real>& w) {
    Real s = 0;
    for (std::size_t i = 0; i < y.count(); ++i) s += y.values[i] * w[i];
    return s;
}

Tensor weights_as(const std::vector<Real>& w, const std::vector<std::size_t>& shape) {
    Tensor t(shape);
    t.values = w;
    return t;
}

} // namespace

TEST_CASE("k_max_pool keeps top values in order") {
    Tensor x = Tensor::vec(3);
    x.values = {0.1, 0.9, 0.5};
    KMaxPoolCtx ctx;
    const Tensor y = k_max_pool(x, 2, ctx);
    CHECK(y.values == std::vector<Real>{0.9, 0.5});

    // shorter input zero-pads
    const Tensor y2 = k_max_pool(x, 5, ctx);
    CHECK(y2.values == std::vector<Real>{0.1, 0.9, 0.5, 0.0, 0.0});

    // ties keep the earlier position
    Tensor t = Tensor::vec(4);
    t.values = {0.5, 0.7, 0.5, 0.2};
    const Tensor y3 = k_max_pool(t, 2, ctx);
    CHECK(y3.values == std::vector<Real>{0.5, 0.7});
    CHECK(ctx.picked == std::vector<std::size_t>{0, 1});
}

TEST_CASE("conv1d width 1 with identity kernel is the identity") {
    Rng rng(1);
    Conv1d conv;
    conv.init(1, 3, 3, rng, "conv");
    conv.K.value.zero();
    for (std::size_t f = 0; f < 3; ++f) conv.K.value.at(f, f) = 1;
    conv.b.value.zero();
    const Tensor x = random_matrix(4, 3, rng);
    Conv1d::Ctx ctx;
    const Tensor y = conv.forward(x, ctx);
    REQUIRE(y.shape == x.shape);
    for (std::size_t i = 0; i < x.count(); ++i) CHECK(y.values[i] == doctest::Approx(x.values[i]));
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(2);
    const Tensor x = random_matrix(6, 9, rng, -5, 5);
    const Tensor y = softmax_rows(x);
    for (std::size_t i = 0; i < y.rows(); ++i) {
        Real sum = 0;
        for (std::size_t j = 0; j < y.cols(); ++j) sum += y.at(i, j);
        CHECK(std::abs(sum - Real(1)) < 1e-12);
    }
}

TEST_CASE("asym_cosine values") {
    // alpha = 0.5 reduces to plain cosine
    std::vector<Real> x = {1, 2, 3}, y = {-2, 1, 0.5};
    Real dot = 0, nx = 0, ny = 0;
    for (int i = 0; i < 3; ++i) {
        dot += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        nx += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        ny += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    CHECK(asym_cosine(x, y, 0.5) ==
          doctest::Approx(dot / std::sqrt(nx * ny)).epsilon(1e-12));

    // identical inputs score 1 for any alpha
    CHECK(asym_cosine(x, x, 0.85) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(asym_cosine(x, x, 0.3) == doctest::Approx(1.0).epsilon(1e-12));

    // worked example: x=(2,0), y=(1,0), alpha=0.85 -> 2^-0.7
    CHECK(asym_cosine({2, 0}, {1, 0}, 0.85) ==
          doctest::Approx(std::pow(2.0, -0.7)).epsilon(1e-12));

    // zero vector convention
    CHECK(asym_cosine({0, 0}, {1, 0}, 0.85) == 0.0);

    // alpha=0.5 scale invariance
    std::vector<Real> x4 = {4, 8, 12};
    CHECK(asym_cosine(x4, y, 0.5) == doctest::Approx(asym_cosine(x, y, 0.5)).epsilon(1e-12));
}

TEST_CASE("rbf kernel pool values") {
    const Real sigma = 0.05;
    Tensor m1 = Tensor::matrix(1, 1);
    m1.at(0, 0) = 0.3;
    RbfPoolCtx ctx;
    const Tensor phi = rbf_kernel_pool(m1, {0.3}, sigma, ctx);
    CHECK(std::abs(phi.at(0)) < 1e-9); // ln(1 + eps)

    const Tensor phi2 = rbf_kernel_pool(m1, {Real(0.3) - sigma}, sigma, ctx);
    CHECK(phi2.at(0) == doctest::Approx(std::log(std::exp(-0.5) + 1e-10)).epsilon(1e-12));

    // far from the center the row contributes ln(eps)
    const Tensor phi3 = rbf_kernel_pool(m1, {Real(0.3) + 40 * sigma}, sigma, ctx);
    CHECK(phi3.at(0) == doctest::Approx(std::log(1e-10)).epsilon(1e-6));
}

TEST_CASE("self attention on a single position is uniform") {
    Rng rng(3);
    SelfAttention sa;
    sa.init(6, 4, 3, rng, "sa");
    const Tensor H = random_matrix(1, 6, rng);
    SelfAttention::Ctx ctx;
    const Tensor M = sa.forward(H, ctx);
    REQUIRE(ctx.A.rows() == 3);
    REQUIRE(ctx.A.cols() == 1);
    for (std::size_t k = 0; k < 3; ++k) CHECK(ctx.A.at(k, 0) == doctest::Approx(1.0));
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t c = 0; c < 6; ++c) CHECK(M.at(k, c) == doctest::Approx(H.at(0, c)));
}

TEST_CASE("adam step values") {
    Parameter p("p", Tensor::vec(1));
    p.value.at(0) = 0.5;
    p.grad.at(0) = 1.0;
    Adam adam;
    adam.lr = 0.01;
    adam.step({&p});
    CHECK(p.value.at(0) == doctest::Approx(0.5 - 0.01).epsilon(1e-7));

    // zero gradient leaves parameters unchanged
    Parameter q("q", Tensor::vec(3));
    q.value.values = {1, 2, 3};
    Adam adam2;
    adam2.step({&q});
    CHECK(q.value.values == std::vector<Real>{1, 2, 3});

    Adagrad ag;
    ag.lr = 0.1;
    Parameter r("r", Tensor::vec(1));
    r.grad.at(0) = 2.0;
    ag.step({&r});
    CHECK(r.value.at(0) == doctest::Approx(-0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("linear gradcheck") {
    Rng rng(10);
    Linear lin;
    lin.init(7, 5, rng, "lin");
    Tensor x = Tensor::vec(7);
    for (auto& v : x.values) v = static_cast<Real>(rng.uniform(-1, 1));
    const auto w = random_weights(5, rng);

    Linear::Ctx ctx;
    lin.W.zero_grad();
    lin.b.zero_grad();
    lin.forward(x, ctx);
    const Tensor dx = lin.backward(ctx, weights_as(w, {5}));

    auto eval = [&] {
        Linear::Ctx c;
        return static_cast<double>(project(lin.forward(x, c), w));
    };
    const auto res = gradcheck(eval, {{"W", &lin.W.value.values, &lin.W.grad.values},
                                      {"b", &lin.b.value.values, &lin.b.grad.values},
                                      {"x", &x.values, &dx.values}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("conv1d gradcheck (widths 1, 2, 3)") {
    Rng rng(11);
    for (std::size_t width : {1u, 2u, 3u}) {
        Conv1d conv;
        conv.init(width, 5, 4, rng, "conv");
        Tensor x = random_matrix(7, 5, rng);
        const std::size_t out_count = (7 - width + 1) * 4;
        const auto w = random_weights(out_count, rng);

        conv.K.zero_grad();
        conv.b.zero_grad();
        Conv1d::Ctx ctx;
        const Tensor y = conv.forward(x, ctx);
        const Tensor dx = conv.backward(ctx, weights_as(w, y.shape));

        auto eval = [&] {
            Conv1d::Ctx c;
            return static_cast<double>(project(conv.forward(x, c), w));
        };
        const auto res = gradcheck(eval, {{"K", &conv.K.value.values, &conv.K.grad.values},
                                          {"b", &conv.b.value.values, &conv.b.grad.values},
                                          {"x", &x.values, &dx.values}});
        CHECK(res.max_rel_err < 1e-5);
    }
}

TEST_CASE("pooling gradchecks") {
    Rng rng(12);
    // max pool
    {
        Tensor x = random_matrix(6, 4, rng);
        const auto w = random_weights(4, rng);
        MaxPoolCtx ctx;
        max_pool_over_time(x, ctx);
        const Tensor dx = max_pool_over_time_backward(ctx, weights_as(w, {4}));
        auto eval = [&] {
            MaxPoolCtx c;
            return static_cast<double>(project(max_pool_over_time(x, c), w));
        };
        CHECK(gradcheck(eval, {{"x", &x.values, &dx.values}}).max_rel_err < 1e-5);
    }
    // k-max pool (k smaller and larger than input)
    for (std::size_t k : {3u, 9u}) {
        Tensor x = Tensor::vec(6);
        for (auto& v : x.values) v = static_cast<Real>(rng.uniform(-1, 1));
        const auto w = random_weights(k, rng);
        KMaxPoolCtx ctx;
        k_max_pool(x, k, ctx);
        const Tensor dx = k_max_pool_backward(ctx, weights_as(w, {k}));
        auto eval = [&] {
            KMaxPoolCtx c;
            return static_cast<double>(project(k_max_pool(x, k, c), w));
        };
        CHECK(gradcheck(eval, {{"x", &x.values, &dx.values}}).max_rel_err < 1e-5);
    }
}

TEST_CASE("elementwise and softmax gradchecks") {
    Rng rng(13);
    {
        Tensor x = random_matrix(3, 4, rng);
        const auto w = random_weights(12, rng);
        Tensor saved;
        tanh_forward(x, saved);
        const Tensor dx = tanh_backward(saved, weights_as(w, x.shape));
        auto eval = [&] {
            Tensor s;
            return static_cast<double>(project(tanh_forward(x, s), w));
        };
        CHECK(gradcheck(eval, {{"x", &x.values, &dx.values}}).max_rel_err < 1e-5);
    }
    {
        // keep relu inputs away from the kink
        Tensor x = random_matrix(3, 4, rng);
        for (auto& v : x.values) v += (v >= 0 ? Real(0.05) : Real(-0.05));
        const auto w = random_weights(12, rng);
        Tensor saved;
        relu_forward(x, saved);
        const Tensor dx = relu_backward(saved, weights_as(w, x.shape));
        auto eval = [&] {
            Tensor s;
            return static_cast<double>(project(relu_forward(x, s), w));
        };
        CHECK(gradcheck(eval, {{"x", &x.values, &dx.values}}).max_rel_err < 1e-5);
    }
    {
        Tensor x = random_matrix(3, 5, rng, -2, 2);
        const auto w = random_weights(15, rng);
        const Tensor y = softmax_rows(x);
        const Tensor dx = softmax_rows_backward(y, weights_as(w, x.shape));
        auto eval = [&] { return static_cast<double>(project(softmax_rows(x), w)); };
        CHECK(gradcheck(eval, {{"x", &x.values, &dx.values}}).max_rel_err < 1e-5);
    }
}

TEST_CASE("asym_cosine gradcheck") {
    Rng rng(14);
    std::vector<Real> x = random_weights(6, rng);
    std::vector<Real> y = random_weights(6, rng);
    AsymCosineCtx ctx;
    asym_cosine_forward(x, y, 0.85, ctx);
    std::vector<Real> dx, dy;
    asym_cosine_backward(ctx, 1.0, dx, dy);
    auto eval = [&] { return static_cast<double>(asym_cosine(x, y, 0.85)); };
    CHECK(gradcheck(eval, {{"x", &x, &dx}, {"y", &y, &dy}}).max_rel_err < 1e-5);
}

TEST_CASE("dot_interaction gradcheck") {
    Rng rng(15);
    Tensor P = random_matrix(4, 5, rng);
    Tensor Q = random_matrix(3, 5, rng);
    const auto w = random_weights(12, rng);
    DotInteractionCtx ctx;
    dot_interaction(P, Q, ctx);
    Tensor dP, dQ;
    dot_interaction_backward(ctx, weights_as(w, {4, 3}), dP, dQ);
    auto eval = [&] {
        DotInteractionCtx c;
        return static_cast<double>(project(dot_interaction(P, Q, c), w));
    };
    CHECK(gradcheck(eval, {{"P", &P.values, &dP.values}, {"Q", &Q.values, &dQ.values}})
              .max_rel_err < 1e-5);
}

TEST_CASE("rbf kernel pool gradcheck") {
    Rng rng(16);
    Tensor M = random_matrix(4, 6, rng);
    const std::vector<Real> mus = {-0.5, 0.0, 0.4, 1.0};
    const Real sigma = 0.2;
    const auto w = random_weights(mus.size(), rng);
    RbfPoolCtx ctx;
    rbf_kernel_pool(M, mus, sigma, ctx);
    Tensor dM;
    rbf_kernel_pool_backward(ctx, weights_as(w, {mus.size()}), dM);
    auto eval = [&] {
        RbfPoolCtx c;
        return static_cast<double>(project(rbf_kernel_pool(M, mus, sigma, c), w));
    };
    CHECK(gradcheck(eval, {{"M", &M.values, &dM.values}}).max_rel_err < 1e-5);
}

TEST_CASE("lstm gradcheck") {
    Rng rng(17);
    Lstm lstm;
    lstm.init(4, 3, rng, "lstm");
    Tensor x = random_matrix(5, 4, rng);
    const auto w = random_weights(5 * 3, rng);

    for (auto* p : {&lstm.Wx, &lstm.Wh, &lstm.b}) p->zero_grad();
    Lstm::Ctx ctx;
    const Tensor h = lstm.forward(x, ctx);
    const Tensor dx = lstm.backward(ctx, weights_as(w, h.shape));

    auto eval = [&] {
        Lstm::Ctx c;
        return static_cast<double>(project(lstm.forward(x, c), w));
    };
    const auto res = gradcheck(eval, {{"Wx", &lstm.Wx.value.values, &lstm.Wx.grad.values},
                                      {"Wh", &lstm.Wh.value.values, &lstm.Wh.grad.values},
                                      {"b", &lstm.b.value.values, &lstm.b.grad.values},
                                      {"x", &x.values, &dx.values}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("bilstm gradcheck") {
    Rng rng(18);
    BiLstm lstm;
    lstm.init(3, 2, rng, "bilstm");
    Tensor x = random_matrix(4, 3, rng);
    const auto w = random_weights(4 * 4, rng);

    for (auto* p : lstm.params()) p->zero_grad();
    BiLstm::Ctx ctx;
    const Tensor h = lstm.forward(x, ctx);
    const Tensor dx = lstm.backward(ctx, weights_as(w, h.shape));

    auto eval = [&] {
        BiLstm::Ctx c;
        return static_cast<double>(project(lstm.forward(x, c), w));
    };
    std::vector<CheckedBuffer> buffers;
    for (auto* p : lstm.params()) buffers.push_back({p->name, &p->value.values, &p->grad.values});
    buffers.push_back({"x", &x.values, &dx.values});
    CHECK(gradcheck(eval, buffers).max_rel_err < 1e-5);
}

TEST_CASE("self attention gradcheck") {
    Rng rng(19);
    SelfAttention sa;
    sa.init(4, 5, 3, rng, "sa");
    Tensor H = random_matrix(6, 4, rng);
    const auto w = random_weights(3 * 4, rng);

    sa.W1.zero_grad();
    sa.W2.zero_grad();
    SelfAttention::Ctx ctx;
    const Tensor M = sa.forward(H, ctx);
    const Tensor dH = sa.backward(ctx, weights_as(w, M.shape));

    auto eval = [&] {
        SelfAttention::Ctx c;
        return static_cast<double>(project(sa.forward(H, c), w));
    };
    const auto res = gradcheck(eval, {{"W1", &sa.W1.value.values, &sa.W1.grad.values},
                                      {"W2", &sa.W2.value.values, &sa.W2.grad.values},
                                      {"H", &H.values, &dH.values}});
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("attention penalty gradcheck") {
    Rng rng(20);
    Tensor logits = random_matrix(3, 5, rng);
    Tensor A = softmax_rows(logits);
    const Tensor dA = attention_penalty_grad(A);
    auto eval = [&] { return static_cast<double>(attention_penalty(A)); };
    CHECK(gradcheck(eval, {{"A", &A.values, &dA.values}}).max_rel_err < 1e-5);
}
