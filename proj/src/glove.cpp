#include "phrec/glove.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "phrec/common.hpp"
#include "phrec/rng.hpp"

namespace phrec {

namespace {

std::uint64_t cell_key(std::size_t i, std::size_t j) {
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

} // namespace

void CooccurrenceTable::accumulate(std::size_t i, std::size_t j, double w) {
    cells_[cell_key(i, j)] += w;
}

double CooccurrenceTable::at(std::size_t i, std::size_t j) const {
    auto it = cells_.find(cell_key(i, j));
    return it == cells_.end() ? 0.0 : it->second;
}

std::vector<CooccurrenceTable::Entry> CooccurrenceTable::sorted_entries() const {
    std::vector<Entry> out;
    out.reserve(cells_.size());
    for (const auto& [key, w] : cells_) {
        if (w <= 0.0) continue;
        out.push_back({static_cast<std::size_t>(key >> 32),
                       static_cast<std::size_t>(key & 0xffffffffull), w});
    }
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return out;
}

CooccurrenceTable build_cooccurrence(const std::vector<UnitSequence>& corpus,
                                     const Vocabulary& vocab, int window) {
    if (window < 1) throw UsageError("build_cooccurrence: window must be >= 1");
    CooccurrenceTable table;
    std::vector<std::size_t> ids;
    for (const auto& seq : corpus) {
        ids.clear();
        ids.reserve(seq.units.size());
        for (const auto& u : seq.units) ids.push_back(vocab.index_of(u));
        const std::size_t n = ids.size();
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t lim = std::min<std::size_t>(n - 1 - p, static_cast<std::size_t>(window));
            for (std::size_t d = 1; d <= lim; ++d) {
                const double w = 1.0 / static_cast<double>(d);
                table.accumulate(ids[p], ids[p + d], w);
                table.accumulate(ids[p + d], ids[p], w);
            }
        }
    }
    return table;
}

double weighting_f(double x, double x_max, double alpha) {
    if (x_max <= 0.0) throw UsageError("weighting_f: x_max must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= x_max) return 1.0;
    return std::pow(x / x_max, alpha);
}

std::vector<double> EmbeddingTable::exported(std::size_t row) const {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k)
        v[static_cast<std::size_t>(k)] =
            main_w[row][static_cast<std::size_t>(k)] + ctx_w[row][static_cast<std::size_t>(k)];
    return v;
}

void EmbeddingTable::rebuild_index() {
    index_.clear();
    for (std::size_t r = 0; r < units.size(); ++r) index_.emplace(units[r], r);
    export_cache_.clear();
}

std::size_t EmbeddingTable::row_of(const std::string& unit) const {
    auto it = index_.find(unit);
    if (it == index_.end()) throw DataError("unknown unit '" + unit + "' in embedding table");
    return it->second;
}

const std::vector<double>* EmbeddingTable::exported_for(const std::string& unit) const {
    auto it = index_.find(unit);
    if (it == index_.end()) return nullptr;
    if (export_cache_.empty()) {
        export_cache_.resize(units.size());
        for (std::size_t r = 0; r < units.size(); ++r) export_cache_[r] = exported(r);
    }
    return &export_cache_[it->second];
}

std::vector<std::pair<std::string, double>> EmbeddingTable::nearest_neighbors(
    const std::string& unit, std::size_t k) const {
    const std::size_t query = row_of(unit);
    const auto qv = exported(query);
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(units.size());
    for (std::size_t r = 0; r < units.size(); ++r) {
        if (r == query) continue;
        scored.emplace_back(units[r], cosine(qv, exported(r)));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

void EmbeddingTable::save_text(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write embeddings file '" + path + "'");
    out << units.size() << ' ' << dim << '\n';
    char buf[40];
    for (std::size_t r = 0; r < units.size(); ++r) {
        out << units[r];
        const auto v = exported(r);
        for (double x : v) {
            std::snprintf(buf, sizeof(buf), " %.9g", x);
            out << buf;
        }
        out << '\n';
    }
}

EmbeddingTable EmbeddingTable::load_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embeddings file '" + path + "'");
    std::size_t vocab_size = 0;
    int dim = 0;
    std::string header;
    if (!std::getline(in, header)) throw DataError(path + ": empty embeddings file");
    {
        std::istringstream hs(header);
        if (!(hs >> vocab_size >> dim) || dim <= 0)
            throw DataError(path + ":1: parse error: expected '<vocab_size> <dim>'");
    }
    EmbeddingTable table;
    table.dim = dim;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string unit;
        if (!(ls >> unit)) throw DataError(path + ":" + std::to_string(line_no) + ": parse error");
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (int k = 0; k < dim; ++k) {
            if (!(ls >> v[static_cast<std::size_t>(k)]))
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": parse error: expected " + std::to_string(dim) + " values");
        }
        table.units.push_back(unit);
        // Loaded tables hold the exported vector in main_w with zero context.
        table.main_w.push_back(std::move(v));
        table.ctx_w.emplace_back(static_cast<std::size_t>(dim), 0.0);
        table.main_b.push_back(0.0);
        table.ctx_b.push_back(0.0);
    }
    if (table.units.size() != vocab_size)
        throw DataError(path + ": header promises " + std::to_string(vocab_size) + " units, found " +
                        std::to_string(table.units.size()));
    table.rebuild_index();
    return table;
}

EmbeddingTable glove_train(const CooccurrenceTable& table, const Vocabulary& vocab,
                           const GloveConfig& config) {
    if (config.dim < 1) throw UsageError("glove_train: dim must be >= 1");
    if (config.epochs < 0) throw UsageError("glove_train: epochs must be >= 0");
    const auto entries = table.sorted_entries();
    if (entries.empty()) throw DataError("glove_train: empty co-occurrence table");

    const std::size_t V = vocab.size();
    const auto d = static_cast<std::size_t>(config.dim);
    EmbeddingTable emb;
    emb.dim = config.dim;
    emb.units.reserve(V);
    for (std::size_t r = 0; r < V; ++r) emb.units.push_back(vocab.unit_of(r));

    Rng rng(config.seed);
    const double scale = 0.5 / static_cast<double>(config.dim);
    auto init_matrix = [&](std::vector<std::vector<double>>& m) {
        m.assign(V, std::vector<double>(d));
        for (auto& row : m)
            for (auto& x : row) x = rng.uniform(-scale, scale);
    };
    init_matrix(emb.main_w);
    init_matrix(emb.ctx_w);
    emb.main_b.resize(V);
    emb.ctx_b.resize(V);
    for (auto& x : emb.main_b) x = rng.uniform(-scale, scale);
    for (auto& x : emb.ctx_b) x = rng.uniform(-scale, scale);

    // AdaGrad accumulators start at 1 so the first steps are plain SGD.
    std::vector<std::vector<double>> acc_w(V, std::vector<double>(d, 1.0));
    std::vector<std::vector<double>> acc_cw(V, std::vector<double>(d, 1.0));
    std::vector<double> acc_b(V, 1.0), acc_cb(V, 1.0);

    std::vector<std::size_t> order(entries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

    std::vector<double> log_x(entries.size());
    std::vector<double> f_x(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        log_x[k] = std::log(entries[k].weight);
        f_x[k] = weighting_f(entries[k].weight, config.x_max, config.alpha);
    }

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss = 0.0;
        for (std::size_t k : order) {
            const auto& e = entries[k];
            auto& wi = emb.main_w[e.i];
            auto& wj = emb.ctx_w[e.j];
            double pred = emb.main_b[e.i] + emb.ctx_b[e.j];
            for (std::size_t t = 0; t < d; ++t) pred += wi[t] * wj[t];
            const double diff = pred - log_x[k];
            const double f = f_x[k];
            loss += f * diff * diff;
            const double g_shared = 2.0 * f * diff;
            for (std::size_t t = 0; t < d; ++t) {
                const double gw = g_shared * wj[t];
                const double gc = g_shared * wi[t];
                wi[t] -= config.lr * gw / std::sqrt(acc_w[e.i][t]);
                wj[t] -= config.lr * gc / std::sqrt(acc_cw[e.j][t]);
                acc_w[e.i][t] += gw * gw;
                acc_cw[e.j][t] += gc * gc;
            }
            emb.main_b[e.i] -= config.lr * g_shared / std::sqrt(acc_b[e.i]);
            emb.ctx_b[e.j] -= config.lr * g_shared / std::sqrt(acc_cb[e.j]);
            acc_b[e.i] += g_shared * g_shared;
            acc_cb[e.j] += g_shared * g_shared;
        }
        if (!std::isfinite(loss))
            throw NumericError("glove_train: non-finite loss at epoch " + std::to_string(epoch));
        emb.loss_history.push_back(loss);
    }
    emb.rebuild_index();
    return emb;
}

} // namespace phrec
