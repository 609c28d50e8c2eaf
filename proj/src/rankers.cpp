#include "phrec/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "phrec/evaluation.hpp"

namespace phrec {

using nlohmann::json;

// ---------- config ----------

ModelKind model_from_string(const std::string& s) {
    if (s == "textcnn") return ModelKind::textcnn;
    if (s == "cdssm") return ModelKind::cdssm;
    if (s == "mvlstm") return ModelKind::mvlstm;
    if (s == "knrm") return ModelKind::knrm;
    if (s == "bilstm_sa") return ModelKind::bilstm_sa;
    throw UsageError("unknown model '" + s +
                     "' (expected textcnn|cdssm|mvlstm|knrm|bilstm_sa)");
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::textcnn: return "textcnn";
        case ModelKind::cdssm: return "cdssm";
        case ModelKind::mvlstm: return "mvlstm";
        case ModelKind::knrm: return "knrm";
        case ModelKind::bilstm_sa: return "bilstm_sa";
    }
    return "?";
}

double RankerConfig::lr_or_default() const {
    if (lr > 0) return lr;
    switch (model) {
        case ModelKind::textcnn: return 0.1;
        case ModelKind::cdssm: return 0.01;
        case ModelKind::mvlstm: return 0.01;
        case ModelKind::knrm: return 0.001;
        case ModelKind::bilstm_sa: return 0.01;
    }
    return 0.01;
}

void RankerConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw UsageError(std::string("ranker config: ") + name + " must be >= 1");
    };
    positive(filters, "filters");
    positive(hidden, "hidden");
    positive(max_len, "max_len");
    positive(mlp_out, "mlp_out");
    positive(topk, "topk");
    positive(kernels, "kernels");
    positive(d_a, "d_a");
    positive(r, "r");
    positive(batch_size, "batch_size");
    if (epochs < 0) throw UsageError("ranker config: epochs must be >= 0");
    if (sigma <= 0) throw UsageError("ranker config: sigma must be > 0");
    if (alpha <= 0 || alpha >= 1) throw UsageError("ranker config: alpha must lie in (0, 1)");
    if (margin <= 0) throw UsageError("ranker config: margin must be > 0");
    if (lr < 0) throw UsageError("ranker config: lr must be positive (or 0 for the model default)");
    if (mlp_dims.empty() || mlp_dims.back() != 1)
        throw UsageError("ranker config: mlp_dims must end with 1");
    for (int d : mlp_dims) positive(d, "mlp_dims entry");
    if (attn_penalty < 0) throw UsageError("ranker config: attn_penalty must be >= 0");
}

namespace {

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int x = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad integer for '" + key + "': '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad number for '" + key + "': '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("config: bad boolean for '" + key + "': '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const auto x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad integer for '" + key + "': '" + v + "'");
    }
}

} // namespace

void RankerConfig::apply_kv(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "model")
            model = model_from_string(value);
        else if (key == "level")
            level = unit_level_from_string(value);
        else if (key == "filters")
            filters = parse_int(key, value);
        else if (key == "hidden")
            hidden = parse_int(key, value);
        else if (key == "max_len")
            max_len = parse_int(key, value);
        else if (key == "alpha")
            alpha = parse_double(key, value);
        else if (key == "mlp_out")
            mlp_out = parse_int(key, value);
        else if (key == "topk")
            topk = parse_int(key, value);
        else if (key == "mlp_dims") {
            mlp_dims.clear();
            std::string cur;
            for (std::size_t i = 0; i <= value.size(); ++i) {
                if (i == value.size() || value[i] == ',') {
                    if (!cur.empty()) mlp_dims.push_back(parse_int(key, cur));
                    cur.clear();
                } else if (value[i] != ' ') {
                    cur.push_back(value[i]);
                }
            }
        } else if (key == "kernels")
            kernels = parse_int(key, value);
        else if (key == "sigma")
            sigma = parse_double(key, value);
        else if (key == "d_a")
            d_a = parse_int(key, value);
        else if (key == "r")
            r = parse_int(key, value);
        else if (key == "lr")
            lr = parse_double(key, value);
        else if (key == "margin")
            margin = parse_double(key, value);
        else if (key == "epochs")
            epochs = parse_int(key, value);
        else if (key == "batch_size")
            batch_size = parse_int(key, value);
        else if (key == "seed")
            seed = parse_u64(key, value);
        else if (key == "fine_tune")
            fine_tune = parse_bool(key, value);
        else if (key == "attn_penalty")
            attn_penalty = parse_double(key, value);
        else
            throw UsageError("config: unknown ranker key '" + key + "'");
    }
}

// ---------- hinge ----------

Real hinge_loss(Real s_pos, const std::vector<Real>& s_negs, Real margin) {
    if (margin <= 0) throw UsageError("hinge_loss: margin must be > 0");
    if (s_negs.empty()) throw DataError("hinge_loss: empty negative list");
    Real sum = 0;
    for (Real s : s_negs) sum += std::max(Real(0), margin - s_pos + s);
    return sum / static_cast<Real>(s_negs.size());
}

// ---------- base ----------

void Ranker::warn_empty(const std::string& what) {
    ++empty_input_warnings;
    if (warnings.size() < 20)
        warnings.push_back("empty unit sequence scored as 0 (" + what + ")");
}

Real Ranker::score(const Tensor& Ec, const Tensor& Er) {
    if (Ec.rows() == 0 || Er.rows() == 0) {
        warn_empty("score");
        return 0;
    }
    auto c = encode(Ec);
    auto r = encode(Er);
    return score_encoded(*c, *r, nullptr);
}

namespace {

Tensor vec_to_tensor(const std::vector<Real>& v) {
    Tensor t = Tensor::vec(v.size());
    t.values = v;
    return t;
}

void add_into(std::vector<Real>& acc, const std::vector<Real>& inc) {
    if (acc.size() != inc.size()) acc.assign(inc.size(), Real(0));
    for (std::size_t i = 0; i < inc.size(); ++i) acc[i] += inc[i];
}

// ---------- TextCNN ----------
// conv widths 1/2/3 -> max pool over time -> concat -> asymmetric cosine

class TextCnnRanker final : public Ranker {
public:
    TextCnnRanker(const RankerConfig& cfg, int dim) : alpha_(static_cast<Real>(cfg.alpha)) {
        Rng rng(derive_seed(cfg.seed, "init:textcnn"));
        convs_[0].init(1, static_cast<std::size_t>(dim), static_cast<std::size_t>(cfg.filters),
                       rng, "conv1");
        convs_[1].init(2, static_cast<std::size_t>(dim), static_cast<std::size_t>(cfg.filters),
                       rng, "conv2");
        convs_[2].init(3, static_cast<std::size_t>(dim), static_cast<std::size_t>(cfg.filters),
                       rng, "conv3");
    }

    ModelKind kind() const override { return ModelKind::textcnn; }

    std::vector<Parameter*> params() override {
        return {&convs_[0].K, &convs_[0].b, &convs_[1].K, &convs_[1].b, &convs_[2].K,
                &convs_[2].b};
    }

    struct EncT : Enc {
        nn::Conv1d::Ctx cctx[3];
        nn::MaxPoolCtx pctx[3];
        std::vector<Real> repr;
        std::vector<Real> d_repr;
    };
    struct PairT : PairCtx {
        nn::AsymCosineCtx cos;
    };

    std::unique_ptr<Enc> encode(const Tensor& E) override {
        auto enc = std::make_unique<EncT>();
        enc->E = E;
        const std::size_t F = convs_[0].K.value.rows();
        enc->repr.assign(3 * F, Real(0));
        enc->d_repr.assign(3 * F, Real(0));
        for (int w = 0; w < 3; ++w) {
            const Tensor y = convs_[w].forward(E, enc->cctx[w]);
            const Tensor v = nn::max_pool_over_time(y, enc->pctx[w]);
            for (std::size_t f = 0; f < F; ++f)
                enc->repr[static_cast<std::size_t>(w) * F + f] = v.at(f);
        }
        return enc;
    }

    Real score_encoded(Enc& c, Enc& r, std::unique_ptr<PairCtx>* ctx) override {
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        if (!ctx) return nn::asym_cosine(ec.repr, er.repr, alpha_);
        auto p = std::make_unique<PairT>();
        const Real s = nn::asym_cosine_forward(ec.repr, er.repr, alpha_, p->cos);
        *ctx = std::move(p);
        return s;
    }

    void backward_pair(PairCtx& ctx, Real dscore, Enc& c, Enc& r) override {
        auto& p = static_cast<PairT&>(ctx);
        std::vector<Real> dx, dy;
        nn::asym_cosine_backward(p.cos, dscore, dx, dy);
        add_into(static_cast<EncT&>(c).d_repr, dx);
        add_into(static_cast<EncT&>(r).d_repr, dy);
    }

    void encoder_backward(Enc& e, Tensor* dE, Real) override {
        auto& enc = static_cast<EncT&>(e);
        const std::size_t F = convs_[0].K.value.rows();
        if (dE && !dE->same_shape(enc.E)) *dE = Tensor(enc.E.shape);
        for (int w = 0; w < 3; ++w) {
            Tensor dv = Tensor::vec(F);
            for (std::size_t f = 0; f < F; ++f)
                dv.at(f) = enc.d_repr[static_cast<std::size_t>(w) * F + f];
            const Tensor dy = nn::max_pool_over_time_backward(enc.pctx[w], dv);
            const Tensor dx = convs_[w].backward(enc.cctx[w], dy);
            if (dE)
                for (std::size_t i = 0; i < dx.count(); ++i) dE->values[i] += dx.values[i];
        }
    }

private:
    nn::Conv1d convs_[3];
    Real alpha_;
};

// ---------- CDSSM ----------
// single conv (width 3) -> max pool -> linear to mlp_out with tanh -> cosine

class CdssmRanker final : public Ranker {
public:
    CdssmRanker(const RankerConfig& cfg, int dim) {
        Rng rng(derive_seed(cfg.seed, "init:cdssm"));
        conv_.init(3, static_cast<std::size_t>(dim), static_cast<std::size_t>(cfg.filters), rng,
                   "conv");
        mlp_.init(static_cast<std::size_t>(cfg.filters), static_cast<std::size_t>(cfg.mlp_out),
                  rng, "mlp");
    }

    ModelKind kind() const override { return ModelKind::cdssm; }

    std::vector<Parameter*> params() override { return {&conv_.K, &conv_.b, &mlp_.W, &mlp_.b}; }

    struct EncT : Enc {
        nn::Conv1d::Ctx cctx;
        nn::MaxPoolCtx pctx;
        nn::Linear::Ctx lctx;
        Tensor tanh_y;
        std::vector<Real> repr;
        std::vector<Real> d_repr;
    };
    struct PairT : PairCtx {
        nn::AsymCosineCtx cos;
    };

    std::unique_ptr<Enc> encode(const Tensor& E) override {
        auto enc = std::make_unique<EncT>();
        enc->E = E;
        const Tensor y = conv_.forward(E, enc->cctx);
        const Tensor pooled = nn::max_pool_over_time(y, enc->pctx);
        const Tensor z = mlp_.forward(pooled, enc->lctx);
        const Tensor out = nn::tanh_forward(z, enc->tanh_y);
        enc->repr = out.values;
        enc->d_repr.assign(enc->repr.size(), Real(0));
        return enc;
    }

    Real score_encoded(Enc& c, Enc& r, std::unique_ptr<PairCtx>* ctx) override {
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        if (!ctx) return nn::asym_cosine(ec.repr, er.repr, Real(0.5));
        auto p = std::make_unique<PairT>();
        const Real s = nn::asym_cosine_forward(ec.repr, er.repr, Real(0.5), p->cos);
        *ctx = std::move(p);
        return s;
    }

    void backward_pair(PairCtx& ctx, Real dscore, Enc& c, Enc& r) override {
        auto& p = static_cast<PairT&>(ctx);
        std::vector<Real> dx, dy;
        nn::asym_cosine_backward(p.cos, dscore, dx, dy);
        add_into(static_cast<EncT&>(c).d_repr, dx);
        add_into(static_cast<EncT&>(r).d_repr, dy);
    }

    void encoder_backward(Enc& e, Tensor* dE, Real) override {
        auto& enc = static_cast<EncT&>(e);
        const Tensor dz = nn::tanh_backward(enc.tanh_y, vec_to_tensor(enc.d_repr));
        const Tensor dpool = mlp_.backward(enc.lctx, dz);
        const Tensor dy = nn::max_pool_over_time_backward(enc.pctx, dpool);
        const Tensor dx = conv_.backward(enc.cctx, dy);
        if (dE) *dE = dx;
    }

private:
    nn::Conv1d conv_;
    nn::Linear mlp_;
};

// ---------- MV-LSTM ----------
// shared BiLSTM -> cosine interaction matrix -> k-max pool -> MLP

class MvLstmRanker final : public Ranker {
public:
    MvLstmRanker(const RankerConfig& cfg, int dim) : topk_(static_cast<std::size_t>(cfg.topk)) {
        Rng rng(derive_seed(cfg.seed, "init:mvlstm"));
        lstm_.init(static_cast<std::size_t>(dim), static_cast<std::size_t>(cfg.hidden), rng,
                   "lstm");
        std::size_t in = topk_;
        for (std::size_t i = 0; i < cfg.mlp_dims.size(); ++i) {
            mlp_.emplace_back();
            mlp_.back().init(in, static_cast<std::size_t>(cfg.mlp_dims[i]), rng,
                             "mlp" + std::to_string(i));
            in = static_cast<std::size_t>(cfg.mlp_dims[i]);
        }
    }

    ModelKind kind() const override { return ModelKind::mvlstm; }

    std::vector<Parameter*> params() override {
        auto out = lstm_.params();
        for (auto& l : mlp_) {
            out.push_back(&l.W);
            out.push_back(&l.b);
        }
        return out;
    }

    struct EncT : Enc {
        nn::BiLstm::Ctx lctx;
        Tensor H;  // n x 2H
        Tensor dH; // accumulated
    };
    struct PairT : PairCtx {
        nn::DotInteractionCtx inter;
        nn::KMaxPoolCtx kmax;
        std::vector<nn::Linear::Ctx> lctx;
        std::vector<Tensor> tanh_y;
    };

    std::unique_ptr<Enc> encode(const Tensor& E) override {
        auto enc = std::make_unique<EncT>();
        enc->E = E;
        enc->H = lstm_.forward(E, enc->lctx);
        enc->dH = Tensor(enc->H.shape);
        return enc;
    }

    Real score_encoded(Enc& c, Enc& r, std::unique_ptr<PairCtx>* ctx) override {
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        auto p = std::make_unique<PairT>();
        const Tensor M = nn::dot_interaction(ec.H, er.H, p->inter);
        Tensor h = nn::k_max_pool(M, topk_, p->kmax);
        p->lctx.resize(mlp_.size());
        p->tanh_y.resize(mlp_.size());
        for (std::size_t i = 0; i < mlp_.size(); ++i) {
            h = mlp_[i].forward(h, p->lctx[i]);
            if (i + 1 < mlp_.size()) h = nn::tanh_forward(h, p->tanh_y[i]);
        }
        const Real s = h.at(0);
        if (ctx) *ctx = std::move(p);
        return s;
    }

    void backward_pair(PairCtx& ctx, Real dscore, Enc& c, Enc& r) override {
        auto& p = static_cast<PairT&>(ctx);
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        Tensor dh = Tensor::vec(1);
        dh.at(0) = dscore;
        for (std::size_t i = mlp_.size(); i-- > 0;) {
            if (i + 1 < mlp_.size()) dh = nn::tanh_backward(p.tanh_y[i], dh);
            dh = mlp_[i].backward(p.lctx[i], dh);
        }
        const Tensor dflat = nn::k_max_pool_backward(p.kmax, dh);
        Tensor dM = Tensor::matrix(p.inter.M.rows(), p.inter.M.cols());
        dM.values = dflat.values;
        nn::dot_interaction_backward(p.inter, dM, ec.dH, er.dH);
    }

    void encoder_backward(Enc& e, Tensor* dE, Real) override {
        auto& enc = static_cast<EncT&>(e);
        const Tensor dx = lstm_.backward(enc.lctx, enc.dH);
        if (dE) *dE = dx;
    }

private:
    nn::BiLstm lstm_;
    std::vector<nn::Linear> mlp_;
    std::size_t topk_;
};

// ---------- K-NRM ----------
// cosine translation matrix on raw embeddings -> Gaussian kernel pooling ->
// linear + tanh ranking layer

class KnrmRanker final : public Ranker {
public:
    // Kernel log-sums reach magnitudes of ~1e3 on long articles (empty
    // kernels contribute ln(eps) per row); the ranking layer consumes them
    // scaled by 0.01 and starts at zero so tanh never begins saturated.
    static constexpr Real kFeatureScale = 0.1;

    KnrmRanker(const RankerConfig& cfg, int dim) : sigma_(static_cast<Real>(cfg.sigma)) {
        (void)dim;
        Rng rng(derive_seed(cfg.seed, "init:knrm"));
        // kernels-1 soft bins centered in [-1, 1) plus one exact-match kernel
        const int soft = cfg.kernels - 1;
        for (int k = 0; k < soft; ++k)
            mus_.push_back(Real(-1) + (Real(k) + Real(0.5)) * Real(2) / Real(soft));
        mus_.push_back(Real(1));
        out_.init(mus_.size(), 1, rng, "ranking");
        out_.W.value.zero();
        out_.b.value.zero();
    }

    ModelKind kind() const override { return ModelKind::knrm; }

    std::vector<Parameter*> params() override { return {&out_.W, &out_.b}; }

    const std::vector<Real>& mus() const { return mus_; }

    struct EncT : Enc {
        Tensor dE_acc;
        bool touched = false;
    };
    struct PairT : PairCtx {
        nn::DotInteractionCtx inter;
        nn::RbfPoolCtx rbf;
        nn::Linear::Ctx lctx;
        Real y = 0; // tanh output
    };

    std::unique_ptr<Enc> encode(const Tensor& E) override {
        auto enc = std::make_unique<EncT>();
        enc->E = E;
        return enc;
    }

    Real score_encoded(Enc& c, Enc& r, std::unique_ptr<PairCtx>* ctx) override {
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        auto p = std::make_unique<PairT>();
        const Tensor M = nn::dot_interaction(ec.E, er.E, p->inter);
        Tensor phi = nn::rbf_kernel_pool(M, mus_, sigma_, p->rbf);
        for (auto& v : phi.values) v *= kFeatureScale;
        const Tensor z = out_.forward(phi, p->lctx);
        p->y = std::tanh(z.at(0));
        const Real s = p->y;
        if (ctx) *ctx = std::move(p);
        return s;
    }

    void backward_pair(PairCtx& ctx, Real dscore, Enc& c, Enc& r) override {
        auto& p = static_cast<PairT&>(ctx);
        Tensor dz = Tensor::vec(1);
        dz.at(0) = dscore * (Real(1) - p.y * p.y);
        Tensor dphi = out_.backward(p.lctx, dz);
        for (auto& v : dphi.values) v *= kFeatureScale;
        if (!needs_input_grad) return;
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        Tensor dM;
        nn::rbf_kernel_pool_backward(p.rbf, dphi, dM);
        if (!ec.touched) {
            ec.dE_acc = Tensor(ec.E.shape);
            ec.touched = true;
        }
        if (!er.touched) {
            er.dE_acc = Tensor(er.E.shape);
            er.touched = true;
        }
        nn::dot_interaction_backward(p.inter, dM, ec.dE_acc, er.dE_acc);
    }

    void encoder_backward(Enc& e, Tensor* dE, Real) override {
        if (!dE) return;
        auto& enc = static_cast<EncT&>(e);
        *dE = enc.touched ? enc.dE_acc : Tensor(enc.E.shape);
    }

    bool needs_input_grad = false;

private:
    std::vector<Real> mus_;
    Real sigma_;
    nn::Linear out_;
};

// ---------- BiLSTM-SA ----------
// shared BiLSTM -> structured self-attention -> flattened sentence matrix ->
// cosine

class BilstmSaRanker final : public Ranker {
public:
    BilstmSaRanker(const RankerConfig& cfg, int dim) {
        Rng rng(derive_seed(cfg.seed, "init:bilstm_sa"));
        lstm_.init(static_cast<std::size_t>(dim), static_cast<std::size_t>(cfg.hidden), rng,
                   "lstm");
        sa_.init(lstm_.out_dim(), static_cast<std::size_t>(cfg.d_a),
                 static_cast<std::size_t>(cfg.r), rng, "sa");
    }

    ModelKind kind() const override { return ModelKind::bilstm_sa; }

    std::vector<Parameter*> params() override {
        auto out = lstm_.params();
        out.push_back(&sa_.W1);
        out.push_back(&sa_.W2);
        return out;
    }

    struct EncT : Enc {
        nn::BiLstm::Ctx lctx;
        nn::SelfAttention::Ctx sctx;
        Tensor M; // r x 2H
        std::vector<Real> flat;
        std::vector<Real> d_flat;
    };
    struct PairT : PairCtx {
        nn::AsymCosineCtx cos;
    };

    std::unique_ptr<Enc> encode(const Tensor& E) override {
        auto enc = std::make_unique<EncT>();
        enc->E = E;
        const Tensor H = lstm_.forward(E, enc->lctx);
        enc->M = sa_.forward(H, enc->sctx);
        enc->flat = enc->M.values;
        enc->d_flat.assign(enc->flat.size(), Real(0));
        return enc;
    }

    Real score_encoded(Enc& c, Enc& r, std::unique_ptr<PairCtx>* ctx) override {
        auto& ec = static_cast<EncT&>(c);
        auto& er = static_cast<EncT&>(r);
        if (!ctx) return nn::asym_cosine(ec.flat, er.flat, Real(0.5));
        auto p = std::make_unique<PairT>();
        const Real s = nn::asym_cosine_forward(ec.flat, er.flat, Real(0.5), p->cos);
        *ctx = std::move(p);
        return s;
    }

    void backward_pair(PairCtx& ctx, Real dscore, Enc& c, Enc& r) override {
        auto& p = static_cast<PairT&>(ctx);
        std::vector<Real> dx, dy;
        nn::asym_cosine_backward(p.cos, dscore, dx, dy);
        add_into(static_cast<EncT&>(c).d_flat, dx);
        add_into(static_cast<EncT&>(r).d_flat, dy);
    }

    void encoder_backward(Enc& e, Tensor* dE, Real penalty_scale) override {
        auto& enc = static_cast<EncT&>(e);
        Tensor dM(enc.M.shape);
        dM.values = enc.d_flat;
        Tensor dA;
        const Tensor* dA_ptr = nullptr;
        if (penalty_scale > 0) {
            dA = nn::attention_penalty_grad(enc.sctx.A);
            for (auto& v : dA.values) v *= penalty_scale;
            dA_ptr = &dA;
        }
        const Tensor dH = sa_.backward(enc.sctx, dM, dA_ptr);
        const Tensor dx = lstm_.backward(enc.lctx, dH);
        if (dE) *dE = dx;
    }

    Real encoding_penalty(const Enc& e) const override {
        return nn::attention_penalty(static_cast<const EncT&>(e).sctx.A);
    }

    Tensor attention_of(const Enc& e) const override {
        return static_cast<const EncT&>(e).sctx.A;
    }

private:
    nn::BiLstm lstm_;
    nn::SelfAttention sa_;
};

} // namespace

std::unique_ptr<Ranker> make_ranker(const RankerConfig& config, int embed_dim) {
    config.validate();
    if (embed_dim < 1) throw UsageError("make_ranker: embedding dim must be >= 1");
    switch (config.model) {
        case ModelKind::textcnn: return std::make_unique<TextCnnRanker>(config, embed_dim);
        case ModelKind::cdssm: return std::make_unique<CdssmRanker>(config, embed_dim);
        case ModelKind::mvlstm: return std::make_unique<MvLstmRanker>(config, embed_dim);
        case ModelKind::knrm: {
            auto m = std::make_unique<KnrmRanker>(config, embed_dim);
            m->needs_input_grad = config.fine_tune;
            return m;
        }
        case ModelKind::bilstm_sa: return std::make_unique<BilstmSaRanker>(config, embed_dim);
    }
    throw UsageError("make_ranker: unknown model");
}

// ---------- embedder ----------

ArticleEmbedder::ArticleEmbedder(const EmbeddingTable& table,
                                 const std::vector<UnitSequence>& corpus, std::size_t max_len,
                                 bool trainable, const Vocabulary* model_vocab)
    : dim_(table.dim), trainable_(trainable) {
    const std::size_t V = table.units.size();
    const bool has_unk = table.has(Vocabulary::unk_unit());
    bank_ = Parameter("embeddings", Tensor::matrix(V + (has_unk ? 0 : 1),
                                                   static_cast<std::size_t>(dim_)));
    for (std::size_t r = 0; r < V; ++r) {
        const auto v = table.exported(r);
        for (int k = 0; k < dim_; ++k)
            bank_.value.at(r, static_cast<std::size_t>(k)) = static_cast<Real>(v[static_cast<std::size_t>(k)]);
    }
    unk_row_ = has_unk ? table.row_of(Vocabulary::unk_unit()) : V;

    for (const auto& seq : corpus) {
        const UnitSequence cut = max_len > 0 ? truncate(seq, max_len) : seq;
        if (rows_by_id_.count(cut.article_id))
            throw DataError("duplicate article '" + cut.article_id + "' in labeled corpus");
        level_ = cut.level;
        std::vector<std::size_t> rows;
        rows.reserve(cut.units.size());
        for (const auto& unit : cut.units) {
            if (model_vocab && !model_vocab->contains(unit)) {
                rows.push_back(unk_row_);
            } else if (table.has(unit)) {
                rows.push_back(table.row_of(unit));
            } else {
                rows.push_back(unk_row_);
            }
        }
        rows_by_id_.emplace(cut.article_id, std::move(rows));
        units_by_id_.emplace(cut.article_id, cut.units);
    }
}

bool ArticleEmbedder::has(const std::string& id) const { return rows_by_id_.count(id) > 0; }

const std::vector<std::string>& ArticleEmbedder::units_of(const std::string& id) const {
    auto it = units_by_id_.find(id);
    if (it == units_by_id_.end())
        throw DataError("article '" + id + "' not in the labeled corpus");
    return it->second;
}

Tensor ArticleEmbedder::embed(const std::string& id) const {
    auto it = rows_by_id_.find(id);
    if (it == rows_by_id_.end())
        throw DataError("article '" + id + "' not in the labeled corpus");
    const auto& rows = it->second;
    Tensor E = Tensor::matrix(rows.size(), static_cast<std::size_t>(dim_));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Real* src = bank_.value.row(rows[i]);
        Real* dst = E.row(i);
        std::copy(src, src + dim_, dst);
    }
    return E;
}

void ArticleEmbedder::scatter_grad(const std::string& id, const Tensor& dE) {
    auto it = rows_by_id_.find(id);
    if (it == rows_by_id_.end())
        throw DataError("article '" + id + "' not in the labeled corpus");
    const auto& rows = it->second;
    check_dims(dE.rows() == rows.size() && dE.cols() == static_cast<std::size_t>(dim_),
               "scatter_grad", "dE " + dE.shape_str());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Real* src = dE.row(i);
        Real* dst = bank_.grad.row(rows[i]);
        for (int k = 0; k < dim_; ++k) dst[k] += src[k];
    }
}

// ---------- trainer ----------

namespace {

double validation_mrr(Ranker& model, const std::vector<EvalInstance>& val,
                      const ArticleEmbedder& embedder) {
    std::vector<int> ranks;
    ranks.reserve(val.size());
    for (const auto& ins : val) {
        const Tensor ec = embedder.embed(ins.a_c);
        const Real s_pos = model.score(ec, embedder.embed(ins.pos));
        std::vector<Real> s_negs;
        s_negs.reserve(ins.negs.size());
        for (const auto& n : ins.negs) s_negs.push_back(model.score(ec, embedder.embed(n)));
        ranks.push_back(rank_positive(s_pos, s_negs));
    }
    return mrr_from_ranks(ranks);
}

} // namespace

TrainResult train_ranker(Ranker& model, const RankerConfig& config,
                         const std::vector<EvalInstance>& train,
                         const std::vector<EvalInstance>& val, ArticleEmbedder& embedder,
                         const TrainOptions& options) {
    config.validate();
    if (train.empty()) throw DataError("train_ranker: empty training set");
    for (const auto& ins : train)
        if (ins.negs.empty())
            throw DataError("train_ranker: instance for '" + ins.a_c + "' has no negatives");

    auto params = model.params();
    if (embedder.trainable()) params.push_back(&embedder.bank());

    nn::Adam adam;
    adam.lr = static_cast<Real>(config.lr_or_default());

    TrainResult result;
    const bool track = model.kind() == ModelKind::bilstm_sa && !options.track_ids.empty();
    if (track) {
        for (const auto& id : options.track_ids) {
            AttentionTrace trace;
            trace.article_id = id;
            trace.level = embedder.level();
            trace.units = embedder.units_of(id); // throws if unknown
            if (trace.units.empty())
                throw DataError("train_ranker: tracked article '" + id + "' has no units");
            result.traces.push_back(std::move(trace));
        }
    }

    Rng shuffle_rng(derive_seed(config.seed, "train:shuffle"));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<std::vector<Real>> best_values;
    result.best_val_mrr = -1;

    const Real margin = static_cast<Real>(config.margin);
    const Real penalty_coef = static_cast<Real>(config.attn_penalty);
    const bool want_input_grad = embedder.trainable();

    struct Scored {
        std::unique_ptr<Ranker::Enc> enc;
        std::unique_ptr<Ranker::PairCtx> ctx;
        Real score = 0;
        const std::string* id = nullptr;
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            const std::size_t end =
                std::min(start + static_cast<std::size_t>(config.batch_size), order.size());
            const Real gscale = Real(1) / static_cast<Real>(end - start);
            nn::zero_grads(params);
            double batch_loss = 0;

            for (std::size_t k = start; k < end; ++k) {
                const EvalInstance& ins = train[order[k]];
                const Tensor Ec = embedder.embed(ins.a_c);
                std::unique_ptr<Ranker::Enc> enc_c;
                if (Ec.rows() > 0)
                    enc_c = model.encode(Ec);
                else
                    model.warn_empty("train a_c '" + ins.a_c + "'");

                std::vector<Scored> cands(1 + ins.negs.size());
                cands[0].id = &ins.pos;
                for (std::size_t j = 0; j < ins.negs.size(); ++j)
                    cands[j + 1].id = &ins.negs[j];
                for (auto& cand : cands) {
                    const Tensor Er = embedder.embed(*cand.id);
                    if (!enc_c || Er.rows() == 0) {
                        if (Er.rows() == 0) model.warn_empty("train candidate '" + *cand.id + "'");
                        continue;
                    }
                    cand.enc = model.encode(Er);
                    cand.score = model.score_encoded(*enc_c, *cand.enc, &cand.ctx);
                }

                std::vector<Real> s_negs(ins.negs.size());
                for (std::size_t j = 0; j < ins.negs.size(); ++j) s_negs[j] = cands[j + 1].score;
                const Real loss_i = hinge_loss(cands[0].score, s_negs, margin);
                batch_loss += loss_i;

                const Real invm = Real(1) / static_cast<Real>(ins.negs.size());
                Real d_pos = 0;
                std::vector<Real> d_negs(ins.negs.size(), Real(0));
                for (std::size_t j = 0; j < ins.negs.size(); ++j) {
                    if (margin - cands[0].score + s_negs[j] > 0) {
                        d_pos -= invm;
                        d_negs[j] = invm;
                    }
                }
                if (cands[0].ctx && d_pos != 0)
                    model.backward_pair(*cands[0].ctx, gscale * d_pos, *enc_c, *cands[0].enc);
                for (std::size_t j = 0; j < ins.negs.size(); ++j) {
                    if (cands[j + 1].ctx && d_negs[j] != 0)
                        model.backward_pair(*cands[j + 1].ctx, gscale * d_negs[j], *enc_c,
                                            *cands[j + 1].enc);
                }

                const Real pscale = penalty_coef > 0 ? penalty_coef * gscale : Real(0);
                if (penalty_coef > 0) {
                    if (enc_c) batch_loss += penalty_coef * model.encoding_penalty(*enc_c);
                    for (const auto& cand : cands)
                        if (cand.enc) batch_loss += penalty_coef * model.encoding_penalty(*cand.enc);
                }

                Tensor dE;
                if (enc_c) {
                    model.encoder_backward(*enc_c, want_input_grad ? &dE : nullptr, pscale);
                    if (want_input_grad) embedder.scatter_grad(ins.a_c, dE);
                }
                for (auto& cand : cands) {
                    if (!cand.enc) continue;
                    model.encoder_backward(*cand.enc, want_input_grad ? &dE : nullptr, pscale);
                    if (want_input_grad) embedder.scatter_grad(*cand.id, dE);
                }
            }

            if (!std::isfinite(batch_loss))
                throw NumericError("train_ranker: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            loss_sum += batch_loss;
            adam.step(params);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(train.size());
        if (!val.empty()) {
            stats.val_mrr = validation_mrr(model, val, embedder);
            if (stats.val_mrr > result.best_val_mrr) {
                result.best_val_mrr = stats.val_mrr;
                result.best_epoch = epoch;
                best_values.clear();
                for (Parameter* p : params) best_values.push_back(p->value.values);
            }
        }
        result.history.push_back(stats);

        for (auto& trace : result.traces) {
            const Tensor E = embedder.embed(trace.article_id);
            auto enc = model.encode(E);
            record_attention(trace, epoch, model.attention_of(*enc));
        }
    }

    if (!best_values.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.values = best_values[i];
    }
    return result;
}

// ---------- checkpoints ----------

namespace {

json config_to_json(const RankerConfig& c) {
    json j;
    j["model"] = to_string(c.model);
    j["level"] = to_string(c.level);
    j["filters"] = c.filters;
    j["hidden"] = c.hidden;
    j["max_len"] = c.max_len;
    j["alpha"] = c.alpha;
    j["mlp_out"] = c.mlp_out;
    j["topk"] = c.topk;
    j["mlp_dims"] = c.mlp_dims;
    j["kernels"] = c.kernels;
    j["sigma"] = c.sigma;
    j["d_a"] = c.d_a;
    j["r"] = c.r;
    j["lr"] = c.lr;
    j["margin"] = c.margin;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["fine_tune"] = c.fine_tune;
    j["attn_penalty"] = c.attn_penalty;
    return j;
}

RankerConfig config_from_json(const json& j) {
    RankerConfig c;
    c.model = model_from_string(j.at("model").get<std::string>());
    c.level = unit_level_from_string(j.at("level").get<std::string>());
    c.filters = j.at("filters").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.mlp_out = j.at("mlp_out").get<int>();
    c.topk = j.at("topk").get<int>();
    c.mlp_dims = j.at("mlp_dims").get<std::vector<int>>();
    c.kernels = j.at("kernels").get<int>();
    c.sigma = j.at("sigma").get<double>();
    c.d_a = j.at("d_a").get<int>();
    c.r = j.at("r").get<int>();
    c.lr = j.at("lr").get<double>();
    c.margin = j.at("margin").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.fine_tune = j.at("fine_tune").get<bool>();
    c.attn_penalty = j.at("attn_penalty").get<double>();
    return c;
}

} // namespace

void save_checkpoint(const std::string& path, Ranker& model, const RankerConfig& config,
                     int embed_dim, const std::map<std::string, std::string>& extras) {
    auto params = model.params();
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw DataError("cannot write checkpoint '" + path + "'");
    json manifest;
    manifest["model"] = to_string(config.model);
    manifest["embed_dim"] = embed_dim;
    manifest["config"] = config_to_json(config);
    json plist = json::array();
    std::size_t offset = 0;
    for (Parameter* p : params) {
        json pj;
        pj["name"] = p->name;
        pj["shape"] = p->value.shape;
        pj["offset"] = offset;
        pj["count"] = p->value.count();
        plist.push_back(std::move(pj));
        for (Real v : p->value.values) {
            const double d = static_cast<double>(v);
            bin.write(reinterpret_cast<const char*>(&d), sizeof(double));
        }
        offset += p->value.count();
    }
    manifest["params"] = std::move(plist);
    manifest["extras"] = extras;
    std::ofstream mf(path + ".json", std::ios::binary);
    if (!mf) throw DataError("cannot write checkpoint manifest '" + path + ".json'");
    mf << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream mf(path + ".json");
    if (!mf) throw DataError("cannot open checkpoint manifest '" + path + ".json'");
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw DataError(path + ".json: parse error: " + e.what());
    }
    LoadedCheckpoint out;
    out.config = config_from_json(manifest.at("config"));
    out.embed_dim = manifest.at("embed_dim").get<int>();
    if (manifest.contains("extras"))
        out.extras = manifest.at("extras").get<std::map<std::string, std::string>>();
    out.model = make_ranker(out.config, out.embed_dim);

    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw DataError("cannot open checkpoint '" + path + "'");
    const auto& plist = manifest.at("params");
    auto params = out.model->params();
    if (plist.size() != params.size())
        throw DataError(path + ": manifest lists " + std::to_string(plist.size()) +
                        " parameters, model has " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& pj = plist[i];
        if (pj.at("name").get<std::string>() != params[i]->name)
            throw DataError(path + ": parameter " + std::to_string(i) + " is '" +
                            pj.at("name").get<std::string>() + "', expected '" + params[i]->name +
                            "'");
        const auto count = pj.at("count").get<std::size_t>();
        if (count != params[i]->value.count())
            throw DataError(path + ": parameter '" + params[i]->name + "' count mismatch");
        for (std::size_t k = 0; k < count; ++k) {
            double d = 0;
            if (!bin.read(reinterpret_cast<char*>(&d), sizeof(double)))
                throw DataError(path + ": checkpoint truncated at parameter '" + params[i]->name +
                                "'");
            params[i]->value.values[k] = static_cast<Real>(d);
        }
    }
    return out;
}

} // namespace phrec
