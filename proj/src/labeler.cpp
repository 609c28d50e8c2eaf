#include "phrec/labeler.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "phrec/common.hpp"

namespace phrec {

using nlohmann::json;

std::string escape_unit_word(const std::string& word) {
    std::string out;
    out.reserve(word.size());
    for (char c : word) {
        if (c == '\\' || c == '_') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string join_phrase_unit(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back('_');
        out += escape_unit_word(words[i]);
    }
    return out;
}

std::vector<std::string> split_phrase_unit(const std::string& unit) {
    std::vector<std::string> words;
    std::string cur;
    for (std::size_t i = 0; i < unit.size(); ++i) {
        const char c = unit[i];
        if (c == '\\' && i + 1 < unit.size()) {
            cur.push_back(unit[++i]);
        } else if (c == '_') {
            words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    words.push_back(std::move(cur));
    return words;
}

UnitSequence label(const UnitSequence& words, const PhraseLexicon& lexicon) {
    if (words.level != UnitLevel::word) throw UsageError("label: input must be word-level");
    UnitSequence out;
    out.article_id = words.article_id;
    out.level = UnitLevel::phrase;
    const auto& w = words.units;
    std::size_t i = 0;
    while (i < w.size()) {
        const std::size_t len = lexicon.longest_match(w, i);
        if (len >= 2) {
            std::vector<std::string> phrase(w.begin() + static_cast<std::ptrdiff_t>(i),
                                            w.begin() + static_cast<std::ptrdiff_t>(i + len));
            out.units.push_back(join_phrase_unit(phrase));
            i += len;
        } else {
            out.units.push_back(escape_unit_word(w[i]));
            ++i;
        }
    }
    return out;
}

UnitSequence unlabel(const UnitSequence& seq) {
    if (seq.level != UnitLevel::phrase) throw UsageError("unlabel: input must be phrase-level");
    UnitSequence out;
    out.article_id = seq.article_id;
    out.level = UnitLevel::word;
    for (const auto& unit : seq.units) {
        for (auto& word : split_phrase_unit(unit)) out.units.push_back(std::move(word));
    }
    return out;
}

const std::string& Vocabulary::unk_unit() {
    static const std::string unk = "<UNK>";
    return unk;
}

Vocabulary Vocabulary::build(const std::vector<UnitSequence>& corpus, std::int64_t min_count) {
    if (min_count < 1) throw UsageError("build_vocab: min_count must be >= 1");
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& seq : corpus) {
        for (const auto& u : seq.units) {
            if (u.empty()) throw DataError("build_vocab: empty unit in article '" + seq.article_id + "'");
            ++counts[u];
        }
    }
    std::vector<std::pair<std::string, std::int64_t>> kept;
    kept.reserve(counts.size());
    for (auto& [unit, count] : counts) {
        if (count >= min_count && unit != unk_unit()) kept.emplace_back(unit, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.units_.push_back(unk_unit());
    vocab.counts_.push_back(0);
    vocab.index_.emplace(unk_unit(), kUnkIndex);
    for (auto& [unit, count] : kept) {
        vocab.index_.emplace(unit, vocab.units_.size());
        vocab.units_.push_back(std::move(unit));
        vocab.counts_.push_back(count);
    }
    return vocab;
}

std::size_t Vocabulary::index_of(const std::string& unit) const {
    auto it = index_.find(unit);
    return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(const std::string& unit) const { return index_.count(unit) > 0; }

const std::string& Vocabulary::unit_of(std::size_t index) const {
    if (index >= units_.size()) throw UsageError("vocabulary index out of range");
    return units_[index];
}

std::int64_t Vocabulary::count_of(const std::string& unit) const {
    auto it = index_.find(unit);
    return it == index_.end() ? 0 : counts_[it->second];
}

void save_labeled_corpus(const std::string& path, const std::vector<UnitSequence>& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write labeled corpus '" + path + "'");
    for (const auto& seq : corpus) {
        json j;
        j["article_id"] = seq.article_id;
        j["level"] = to_string(seq.level);
        j["units"] = seq.units;
        out << j.dump() << '\n';
    }
}

std::vector<UnitSequence> load_labeled_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open labeled corpus '" + path + "'");
    std::vector<UnitSequence> corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            UnitSequence seq;
            seq.article_id = j.at("article_id").get<std::string>();
            seq.level = unit_level_from_string(j.at("level").get<std::string>());
            seq.units = j.at("units").get<std::vector<std::string>>();
            corpus.push_back(std::move(seq));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
    }
    return corpus;
}

} // namespace phrec
