#ifndef PHREC_RANKERS_HPP
#define PHREC_RANKERS_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "phrec/attention.hpp"
#include "phrec/glove.hpp"
#include "phrec/instances.hpp"
#include "phrec/labeler.hpp"
#include "phrec/layers.hpp"
#include "phrec/optim.hpp"

namespace phrec {

enum class ModelKind { textcnn, cdssm, mvlstm, knrm, bilstm_sa };

ModelKind model_from_string(const std::string& s);
const char* to_string(ModelKind kind);

struct RankerConfig {
    ModelKind model = ModelKind::textcnn;
    UnitLevel level = UnitLevel::phrase;
    int filters = 32;        // CNN filter count
    int hidden = 32;         // LSTM hidden size per direction
    int max_len = 512;       // model input truncation
    double alpha = 0.85;     // asymmetric cosine
    int mlp_out = 128;       // CDSSM representation size
    int topk = 512;          // MV-LSTM k-max pooling
    std::vector<int> mlp_dims = {64, 1};
    int kernels = 32;        // K-NRM kernel count
    double sigma = 0.05;
    int d_a = 100;           // self-attention inner size
    int r = 15;              // attention rows
    double lr = 0.0;         // 0 -> per-model default
    double margin = 1.0;
    int epochs = 50;
    int batch_size = 32;
    std::uint64_t seed = 1;
    bool fine_tune = false;     // embeddings frozen by default
    double attn_penalty = 0.0;  // |A A^T - I|^2 coefficient, BiLSTM-SA only

    double lr_or_default() const;
    void validate() const;
    void apply_kv(const std::map<std::string, std::string>& kv);
};

// mean over negatives of max(0, margin - s_pos + s_neg)
Real hinge_loss(Real s_pos, const std::vector<Real>& s_negs, Real margin);

// Pair scorer with hand-chained gradients. Encodings are per-article so a_c
// is encoded once per instance; pair contexts carry the head activations.
class Ranker {
public:
    virtual ~Ranker() = default;
    virtual ModelKind kind() const = 0;
    virtual std::vector<Parameter*> params() = 0;

    struct Enc {
        virtual ~Enc() = default;
        Tensor E; // embedded input, kept for input gradients
    };
    struct PairCtx {
        virtual ~PairCtx() = default;
    };

    virtual std::unique_ptr<Enc> encode(const Tensor& E) = 0;
    // ctx == nullptr scores without keeping backward state.
    virtual Real score_encoded(Enc& c, Enc& r, std::unique_ptr<PairCtx>* ctx) = 0;
    virtual void backward_pair(PairCtx& ctx, Real dscore, Enc& c, Enc& r) = 0;
    // Flushes accumulated representation grads through the encoder; dE is
    // filled when embeddings are being fine-tuned. penalty_scale > 0 adds the
    // attention penalty gradient (BiLSTM-SA).
    virtual void encoder_backward(Enc& e, Tensor* dE, Real penalty_scale) = 0;

    virtual Real encoding_penalty(const Enc&) const { return 0; }
    virtual Tensor attention_of(const Enc&) const { return {}; }

    // Eval-mode score; empty articles score 0 with a warning recorded.
    Real score(const Tensor& Ec, const Tensor& Er);

    std::size_t empty_input_warnings = 0;
    std::vector<std::string> warnings; // capped at 20
    void warn_empty(const std::string& what);
};

std::unique_ptr<Ranker> make_ranker(const RankerConfig& config, int embed_dim);

// Article id -> embedded matrix, backed by one Parameter bank so fine-tuning
// is a row scatter. Units outside the model vocabulary (when given) map to
// UNK before lookup.
class ArticleEmbedder {
public:
    ArticleEmbedder(const EmbeddingTable& table, const std::vector<UnitSequence>& corpus,
                    std::size_t max_len, bool trainable, const Vocabulary* model_vocab = nullptr);

    bool has(const std::string& id) const;
    const std::vector<std::string>& units_of(const std::string& id) const;
    Tensor embed(const std::string& id) const; // n x dim
    void scatter_grad(const std::string& id, const Tensor& dE);

    Parameter& bank() { return bank_; }
    bool trainable() const { return trainable_; }
    int dim() const { return dim_; }
    UnitLevel level() const { return level_; }

private:
    Parameter bank_; // V x dim
    int dim_ = 0;
    bool trainable_ = false;
    UnitLevel level_ = UnitLevel::word;
    std::size_t unk_row_ = 0;
    std::map<std::string, std::vector<std::size_t>> rows_by_id_;
    std::map<std::string, std::vector<std::string>> units_by_id_;
};

struct EpochStats {
    double train_loss = 0;
    double val_mrr = 0;
};

struct TrainOptions {
    std::vector<std::string> track_ids; // attention traces, BiLSTM-SA only
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_mrr = 0;
    std::vector<AttentionTrace> traces;
};

// Mini-batch hinge-loss training with the model's Adam learning rate;
// validation MRR per epoch; the best-validation parameters are left in the
// model on return. Deterministic for a fixed config seed.
TrainResult train_ranker(Ranker& model, const RankerConfig& config,
                         const std::vector<EvalInstance>& train,
                         const std::vector<EvalInstance>& val, ArticleEmbedder& embedder,
                         const TrainOptions& options = {});

// Flat binary of 64-bit parameter values plus a JSON manifest alongside
// (<path> and <path>.json).
void save_checkpoint(const std::string& path, Ranker& model, const RankerConfig& config,
                     int embed_dim, const std::map<std::string, std::string>& extras = {});

struct LoadedCheckpoint {
    RankerConfig config;
    int embed_dim = 0;
    std::unique_ptr<Ranker> model;
    std::map<std::string, std::string> extras;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace phrec

#endif
