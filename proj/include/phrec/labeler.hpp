#ifndef PHREC_LABELER_HPP
#define PHREC_LABELER_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "phrec/article.hpp"
#include "phrec/phrase.hpp"

namespace phrec {

// Phrase units are their words joined by '_'. Literal '_' and '\' inside a
// word are escaped so that unlabel(label(w)) == w for any input.
std::string escape_unit_word(const std::string& word);
std::string join_phrase_unit(const std::vector<std::string>& words);
std::vector<std::string> split_phrase_unit(const std::string& unit);

// Greedy left-to-right longest match against the lexicon.
UnitSequence label(const UnitSequence& words, const PhraseLexicon& lexicon);

// Splits phrase units back into their words.
UnitSequence unlabel(const UnitSequence& seq);

class Vocabulary {
public:
    static constexpr std::size_t kUnkIndex = 0;
    static const std::string& unk_unit();

    // Units with count >= min_count are indexed in descending count order,
    // ties broken lexicographically; everything else maps to UNK.
    static Vocabulary build(const std::vector<UnitSequence>& corpus, std::int64_t min_count);

    std::size_t index_of(const std::string& unit) const; // kUnkIndex when absent
    bool contains(const std::string& unit) const;
    const std::string& unit_of(std::size_t index) const;
    std::int64_t count_of(const std::string& unit) const;
    std::size_t size() const { return units_.size(); }

private:
    std::vector<std::string> units_;
    std::vector<std::int64_t> counts_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Labeled corpus persistence: JSON-lines {article_id, level, units:[...]}.
void save_labeled_corpus(const std::string& path, const std::vector<UnitSequence>& corpus);
std::vector<UnitSequence> load_labeled_corpus(const std::string& path);

} // namespace phrec

#endif
