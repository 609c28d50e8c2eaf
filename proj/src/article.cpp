#include "phrec/article.hpp"

#include <fstream>

#include <json.hpp>

#include "phrec/common.hpp"

namespace phrec {

using nlohmann::json;

const char* to_string(UnitLevel level) { return level == UnitLevel::word ? "word" : "phrase"; }

UnitLevel unit_level_from_string(const std::string& s) {
    if (s == "word") return UnitLevel::word;
    if (s == "phrase") return UnitLevel::phrase;
    throw DataError("unknown unit level '" + s + "'");
}

UnitSequence truncate(const UnitSequence& seq, std::size_t max_len) {
    if (max_len < 1) throw UsageError("truncate: max_len must be >= 1");
    if (seq.units.size() <= max_len) return seq;
    UnitSequence out;
    out.article_id = seq.article_id;
    out.level = seq.level;
    out.units.assign(seq.units.begin(), seq.units.begin() + static_cast<std::ptrdiff_t>(max_len));
    return out;
}

void ArticleStore::add(Article article) {
    if (article.id.empty()) throw DataError("article with empty id");
    if (article.timestamp < 0) throw DataError("article '" + article.id + "' has negative timestamp");
    if (by_id_.count(article.id)) throw DataError("duplicate article id '" + article.id + "'");
    by_id_.emplace(article.id, articles_.size());
    articles_.push_back(std::move(article));
}

const Article* ArticleStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &articles_[it->second];
}

const Article& ArticleStore::get(const std::string& id) const {
    const Article* a = find(id);
    if (!a) throw DataError("unknown article id '" + id + "'");
    return *a;
}

UnitSequence ArticleStore::unit_sequence(const Article& article, bool prepend_title,
                                         const PreTokenizer& pre_tokenize) const {
    UnitSequence seq;
    seq.article_id = article.id;
    seq.level = UnitLevel::word;
    if (prepend_title) seq.units = normalize_text(article.title, pre_tokenize);
    auto body = normalize_text(article.body, pre_tokenize);
    seq.units.insert(seq.units.end(), body.begin(), body.end());
    return seq;
}

ArticleStore ArticleStore::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open articles file '" + path + "'");
    ArticleStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("title") || !j.contains("body") ||
            !j.contains("timestamp") || !j["id"].is_string() || !j["title"].is_string() ||
            !j["body"].is_string() || !j["timestamp"].is_number_integer()) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": parse error: expected {id, title, body, timestamp}");
        }
        Article a;
        a.id = j["id"].get<std::string>();
        a.title = j["title"].get<std::string>();
        a.body = j["body"].get<std::string>();
        a.timestamp = j["timestamp"].get<std::int64_t>();
        try {
            store.add(std::move(a));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

void ArticleStore::save_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write store file '" + path + "'");
    for (const auto& a : articles_) {
        json j;
        j["id"] = a.id;
        j["title"] = a.title;
        j["body"] = a.body;
        j["timestamp"] = a.timestamp;
        out << j.dump() << '\n';
    }
}

} // namespace phrec
