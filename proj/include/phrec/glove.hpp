#ifndef PHREC_GLOVE_HPP
#define PHREC_GLOVE_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "phrec/article.hpp"
#include "phrec/labeler.hpp"

namespace phrec {

class CooccurrenceTable {
public:
    struct Entry {
        std::size_t i;
        std::size_t j;
        double weight;
    };

    void accumulate(std::size_t i, std::size_t j, double w);
    // Entries sorted by (i, j); weights strictly positive.
    std::vector<Entry> sorted_entries() const;
    std::size_t size() const { return cells_.size(); }
    double at(std::size_t i, std::size_t j) const;

private:
    std::unordered_map<std::uint64_t, double> cells_;
};

// Distance-weighted counts: every ordered pair within `window` units adds 1/d
// in both directions.
CooccurrenceTable build_cooccurrence(const std::vector<UnitSequence>& corpus,
                                     const Vocabulary& vocab, int window);

// (x / x_max)^alpha below x_max, 1 above.
double weighting_f(double x, double x_max, double alpha);

struct GloveConfig {
    int dim = 50;
    int epochs = 25;
    double lr = 0.05;
    double x_max = 100.0;
    double alpha = 0.75;
    std::uint64_t seed = 1;
};

class EmbeddingTable {
public:
    int dim = 0;
    std::vector<std::string> units;           // row order of every matrix below
    std::vector<std::vector<double>> main_w;  // w_i
    std::vector<std::vector<double>> ctx_w;   // w~_i
    std::vector<double> main_b;
    std::vector<double> ctx_b;
    std::vector<double> loss_history; // per-epoch J

    // w_i + w~_i
    std::vector<double> exported(std::size_t row) const;
    const std::vector<double>* exported_for(const std::string& unit) const; // cached, nullptr if absent
    bool has(const std::string& unit) const { return index_.count(unit) > 0; }
    std::size_t row_of(const std::string& unit) const;

    std::vector<std::pair<std::string, double>> nearest_neighbors(const std::string& unit,
                                                                  std::size_t k) const;

    // word2vec text convention: "<vocab_size> <dim>" header, then one line per
    // unit with the exported vector.
    void save_text(const std::string& path) const;
    static EmbeddingTable load_text(const std::string& path);

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> index_;
    mutable std::vector<std::vector<double>> export_cache_;
};

// Adaptive per-coordinate gradient descent on
// J = sum f(X_ij) (w_i.w~_j + b_i + b~_j - ln X_ij)^2, entries visited in
// seeded-shuffled order each epoch.
EmbeddingTable glove_train(const CooccurrenceTable& table, const Vocabulary& vocab,
                           const GloveConfig& config);

} // namespace phrec

#endif
