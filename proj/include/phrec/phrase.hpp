#ifndef PHREC_PHRASE_HPP
#define PHREC_PHRASE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "phrec/article.hpp"

namespace phrec {

struct PhraseCandidate {
    std::vector<std::string> words; // >= 2 words
    std::int64_t freq = 0;
    double quality = 0.0;
};

// Raw n-gram counts (orders 1..max_n) with probabilities normalized by the
// total token count, so scaling the corpus leaves every probability fixed.
class CorpusStats {
public:
    static CorpusStats build(const std::vector<UnitSequence>& corpus, int max_n);

    std::int64_t count(const std::vector<std::string>& words) const;
    double prob(const std::vector<std::string>& words) const;
    std::int64_t total_tokens() const { return total_tokens_; }
    int max_n() const { return max_n_; }

private:
    std::unordered_map<std::string, std::int64_t> counts_;
    std::int64_t total_tokens_ = 0;
    int max_n_ = 0;
    friend std::vector<PhraseCandidate> generate_candidates(const std::vector<UnitSequence>&, int,
                                                            std::int64_t, const CorpusStats*);
};

struct PhraseScore {
    double npmi_raw = 0.0;     // before clamping
    double npmi = 0.0;         // clamped to [0, 1]
    double completeness = 0.0; // freq(c) / min(freq of the two (n-1)-subgrams)
    double quality = 0.0;
};

// quality = sqrt(npmi * completeness); either weak signal suppresses the score.
double combine_quality(double npmi_clamped, double completeness);

PhraseScore score_candidate(const PhraseCandidate& c, const CorpusStats& stats);

// All contiguous n-grams, 2 <= n <= max_n, count >= min_freq, never crossing
// article boundaries. Sorted by (freq desc, words asc). Pass stats to reuse
// counts already built over the same corpus.
std::vector<PhraseCandidate> generate_candidates(const std::vector<UnitSequence>& corpus, int max_n,
                                                 std::int64_t min_freq,
                                                 const CorpusStats* stats = nullptr);

class PhraseLexicon {
public:
    struct Entry {
        std::vector<std::string> words;
        double quality = 0.0;
    };

    PhraseLexicon() = default;
    explicit PhraseLexicon(double threshold) : threshold_(threshold) {}

    // Keeps candidates with quality >= threshold (inclusive).
    static PhraseLexicon from_candidates(const std::vector<PhraseCandidate>& candidates,
                                         double threshold);

    // TSV rows "score<TAB>phrase", phrase words space-separated. Single-word
    // rows are skipped (words are already units).
    static PhraseLexicon import_tsv(const std::string& path, double threshold);
    void export_tsv(const std::string& path) const;

    void insert(std::vector<std::string> words, double quality);
    bool contains(const std::vector<std::string>& words) const;

    // Length in words of the longest lexicon phrase starting at words[pos],
    // 0 when none matches.
    std::size_t longest_match(const std::vector<std::string>& words, std::size_t pos) const;

    double threshold() const { return threshold_; }
    std::size_t size() const { return entries_.size(); }
    // Sorted by (quality desc, words asc).
    std::vector<Entry> sorted_entries() const;

private:
    double threshold_ = 0.5;
    std::map<std::vector<std::string>, double> entries_;
    // first word -> distinct phrase lengths starting with it, longest first
    std::unordered_map<std::string, std::vector<std::size_t>> lengths_by_first_;
};

} // namespace phrec

#endif
