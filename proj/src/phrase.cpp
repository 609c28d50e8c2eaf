#include "phrec/phrase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "phrec/common.hpp"

namespace phrec {

namespace {

constexpr char kSep = '\x1f';

std::string join_key(const std::vector<std::string>& words, std::size_t begin, std::size_t len) {
    std::string key;
    for (std::size_t i = 0; i < len; ++i) {
        if (i) key.push_back(kSep);
        key += words[begin + i];
    }
    return key;
}

} // namespace

CorpusStats CorpusStats::build(const std::vector<UnitSequence>& corpus, int max_n) {
    if (max_n < 1) throw UsageError("CorpusStats: max_n must be >= 1");
    CorpusStats stats;
    stats.max_n_ = max_n;
    for (const auto& seq : corpus) {
        const auto& w = seq.units;
        stats.total_tokens_ += static_cast<std::int64_t>(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            const std::size_t max_len = std::min<std::size_t>(max_n, w.size() - i);
            std::string key;
            for (std::size_t n = 1; n <= max_len; ++n) {
                if (n > 1) key.push_back(kSep);
                key += w[i + n - 1];
                ++stats.counts_[key];
            }
        }
    }
    return stats;
}

std::int64_t CorpusStats::count(const std::vector<std::string>& words) const {
    auto it = counts_.find(join_key(words, 0, words.size()));
    return it == counts_.end() ? 0 : it->second;
}

double CorpusStats::prob(const std::vector<std::string>& words) const {
    if (total_tokens_ == 0) return 0.0;
    return static_cast<double>(count(words)) / static_cast<double>(total_tokens_);
}

double combine_quality(double npmi_clamped, double completeness) {
    return std::sqrt(npmi_clamped * completeness);
}

PhraseScore score_candidate(const PhraseCandidate& c, const CorpusStats& stats) {
    const std::size_t n = c.words.size();
    if (n < 2) throw UsageError("score_candidate: candidate must have >= 2 words");
    const double p_c = stats.prob(c.words);
    if (p_c <= 0.0)
        throw DataError("score_candidate: candidate '" + join_key(c.words, 0, n) +
                        "' has zero corpus probability");
    double log_indep = 0.0;
    for (const auto& w : c.words) {
        const double p_u = stats.prob({w});
        if (p_u <= 0.0) throw DataError("score_candidate: unit '" + w + "' has zero probability");
        log_indep += std::log(p_u);
    }
    const double pmi = std::log(p_c) - log_indep;

    PhraseScore s;
    s.npmi_raw = pmi / (-std::log(p_c));
    s.npmi = std::clamp(s.npmi_raw, 0.0, 1.0);

    std::vector<std::string> left(c.words.begin(), c.words.end() - 1);
    std::vector<std::string> right(c.words.begin() + 1, c.words.end());
    const auto freq_c = stats.count(c.words);
    const auto freq_sub = std::min(stats.count(left), stats.count(right));
    s.completeness = freq_sub > 0 ? static_cast<double>(freq_c) / static_cast<double>(freq_sub) : 0.0;
    s.quality = combine_quality(s.npmi, s.completeness);
    return s;
}

std::vector<PhraseCandidate> generate_candidates(const std::vector<UnitSequence>& corpus, int max_n,
                                                 std::int64_t min_freq, const CorpusStats* stats) {
    if (max_n < 2) throw UsageError("generate_candidates: max_n must be >= 2");
    if (min_freq < 1) throw UsageError("generate_candidates: min_freq must be >= 1");
    CorpusStats local;
    if (!stats) {
        local = CorpusStats::build(corpus, max_n);
        stats = &local;
    }
    std::vector<PhraseCandidate> out;
    for (const auto& [key, freq] : stats->counts_) {
        if (freq < min_freq) continue;
        PhraseCandidate c;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= key.size(); ++i) {
            if (i == key.size() || key[i] == kSep) {
                c.words.push_back(key.substr(start, i - start));
                start = i + 1;
            }
        }
        if (c.words.size() < 2) continue;
        c.freq = freq;
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const PhraseCandidate& a, const PhraseCandidate& b) {
        if (a.freq != b.freq) return a.freq > b.freq;
        return a.words < b.words;
    });
    return out;
}

PhraseLexicon PhraseLexicon::from_candidates(const std::vector<PhraseCandidate>& candidates,
                                             double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw UsageError("filter threshold must lie in [0, 1]");
    PhraseLexicon lex(threshold);
    for (const auto& c : candidates) {
        if (c.quality >= threshold) lex.insert(c.words, c.quality);
    }
    return lex;
}

void PhraseLexicon::insert(std::vector<std::string> words, double quality) {
    if (words.size() < 2) throw UsageError("lexicon phrases must have >= 2 words");
    auto [it, fresh] = entries_.try_emplace(std::move(words), quality);
    if (!fresh) {
        it->second = std::max(it->second, quality);
        return;
    }
    auto& lens = lengths_by_first_[it->first.front()];
    const std::size_t len = it->first.size();
    auto pos = std::lower_bound(lens.begin(), lens.end(), len, std::greater<>());
    if (pos == lens.end() || *pos != len) lens.insert(pos, len);
}

bool PhraseLexicon::contains(const std::vector<std::string>& words) const {
    return entries_.count(words) > 0;
}

std::size_t PhraseLexicon::longest_match(const std::vector<std::string>& words,
                                         std::size_t pos) const {
    if (pos >= words.size()) return 0;
    auto it = lengths_by_first_.find(words[pos]);
    if (it == lengths_by_first_.end()) return 0;
    std::vector<std::string> probe;
    for (std::size_t len : it->second) {
        if (pos + len > words.size()) continue;
        probe.assign(words.begin() + static_cast<std::ptrdiff_t>(pos),
                     words.begin() + static_cast<std::ptrdiff_t>(pos + len));
        if (entries_.count(probe)) return len;
    }
    return 0;
}

std::vector<PhraseLexicon::Entry> PhraseLexicon::sorted_entries() const {
    std::vector<Entry> out;
    out.reserve(entries_.size());
    for (const auto& [words, quality] : entries_) out.push_back({words, quality});
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
        if (a.quality != b.quality) return a.quality > b.quality;
        return a.words < b.words;
    });
    return out;
}

PhraseLexicon PhraseLexicon::import_tsv(const std::string& path, double threshold) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file '" + path + "'");
    PhraseLexicon lex(threshold);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        const std::string loc = path + ":" + std::to_string(line_no);
        if (tab == std::string::npos)
            throw DataError(loc + ": parse error: expected 'score<TAB>phrase'");
        const std::string score_str = line.substr(0, tab);
        std::size_t used = 0;
        double score = 0.0;
        try {
            score = std::stod(score_str, &used);
        } catch (const std::exception&) {
            throw DataError(loc + ": parse error: non-numeric score '" + score_str + "'");
        }
        if (used != score_str.size() || !std::isfinite(score))
            throw DataError(loc + ": parse error: non-numeric score '" + score_str + "'");
        if (score < 0.0 || score > 1.0)
            throw DataError(loc + ": parse error: score " + score_str + " outside [0, 1]");
        std::vector<std::string> words;
        std::string w;
        for (std::size_t i = tab + 1; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ' ') {
                if (!w.empty()) words.push_back(std::move(w));
                w.clear();
            } else {
                w.push_back(line[i]);
            }
        }
        if (words.empty()) throw DataError(loc + ": parse error: empty phrase");
        if (words.size() < 2) continue;
        if (score >= threshold) lex.insert(std::move(words), score);
    }
    return lex;
}

void PhraseLexicon::export_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write lexicon file '" + path + "'");
    char buf[32];
    for (const auto& e : sorted_entries()) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.quality);
        out << buf << '\t';
        for (std::size_t i = 0; i < e.words.size(); ++i) {
            if (i) out << ' ';
            out << e.words[i];
        }
        out << '\n';
    }
}

} // namespace phrec
