#ifndef PHREC_ARTICLE_HPP
#define PHREC_ARTICLE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "phrec/text.hpp"

namespace phrec {

struct Article {
    std::string id;
    std::string title;
    std::string body;
    std::int64_t timestamp = 0;
};

enum class UnitLevel { word, phrase };

const char* to_string(UnitLevel level);
UnitLevel unit_level_from_string(const std::string& s);

struct UnitSequence {
    std::string article_id;
    UnitLevel level = UnitLevel::word;
    std::vector<std::string> units;
};

// Keeps the first max_len units.
UnitSequence truncate(const UnitSequence& seq, std::size_t max_len);

class ArticleStore {
public:
    // Adds one article; duplicate ids are rejected.
    void add(Article article);

    const Article* find(const std::string& id) const;
    const Article& get(const std::string& id) const; // throws DataError if absent
    const std::vector<Article>& articles() const { return articles_; }
    std::size_t size() const { return articles_.size(); }

    // Word-level tokenization of one article. When prepend_title is set the
    // title tokens come first.
    UnitSequence unit_sequence(const Article& article, bool prepend_title = true,
                               const PreTokenizer& pre_tokenize = nullptr) const;

    // JSON-lines with keys id, title, body, timestamp.
    static ArticleStore load_jsonl(const std::string& path);
    void save_jsonl(const std::string& path) const;

private:
    std::vector<Article> articles_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

} // namespace phrec

#endif
