#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "phrec/article.hpp"
#include "phrec/common.hpp"

using namespace phrec;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace

TEST_CASE("ingest and retrieve round trip") {
    const std::string path = temp_file("phrec_store_in.jsonl");
    write_file(path,
               R"({"id":"a1","title":"Tést \"quotes\"","body":"Line1\nLine2","timestamp":3})"
               "\n"
               R"({"id":"a2","title":"second","body":"b","timestamp":4})"
               "\n");
    auto store = ArticleStore::load_jsonl(path);
    REQUIRE(store.size() == 2);
    const Article& a = store.get("a1");
    CHECK(a.title == "Tést \"quotes\"");
    CHECK(a.body == "Line1\nLine2");
    CHECK(a.timestamp == 3);

    // persisted store reloads byte-identically per field
    const std::string out = temp_file("phrec_store_out.jsonl");
    store.save_jsonl(out);
    auto reloaded = ArticleStore::load_jsonl(out);
    REQUIRE(reloaded.size() == 2);
    CHECK(reloaded.get("a1").title == a.title);
    CHECK(reloaded.get("a1").body == a.body);
    CHECK(reloaded.get("a2").timestamp == 4);
    std::remove(path.c_str());
    std::remove(out.c_str());
}

TEST_CASE("ingest rejects duplicates and malformed records") {
    const std::string path = temp_file("phrec_store_bad.jsonl");

    write_file(path, R"({"id":"a1","title":"t","body":"b","timestamp":1})"
                     "\n"
                     R"({"id":"a1","title":"t2","body":"b2","timestamp":2})"
                     "\n");
    CHECK_THROWS_WITH_AS(ArticleStore::load_jsonl(path), doctest::Contains("a1"), DataError);

    write_file(path, R"({"id":"a1","title":"t","timestamp":1})"
                     "\n");
    CHECK_THROWS_WITH_AS(ArticleStore::load_jsonl(path), doctest::Contains(":1"), DataError);

    write_file(path, "not json\n");
    CHECK_THROWS_AS(ArticleStore::load_jsonl(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("truncate keeps a prefix and is idempotent") {
    UnitSequence seq;
    seq.article_id = "x";
    seq.level = UnitLevel::word;
    for (int i = 0; i < 600; ++i) seq.units.push_back("u" + std::to_string(i));

    const auto cut = truncate(seq, 512);
    CHECK(cut.units.size() == 512);
    CHECK(cut.units.front() == "u0");
    CHECK(cut.units.back() == "u511");

    const auto again = truncate(cut, 512);
    CHECK(again.units == cut.units);

    UnitSequence small = seq;
    small.units.resize(10);
    CHECK(truncate(small, 512).units.size() == 10);

    UnitSequence exact = seq;
    exact.units.resize(512);
    CHECK(truncate(exact, 512).units == exact.units);
}

TEST_CASE("unit_sequence tokenizes title then body") {
    ArticleStore store;
    store.add({"a", "Big News!", "something happened.", 1});
    const auto with_title = store.unit_sequence(store.get("a"), true);
    CHECK(with_title.units ==
          std::vector<std::string>{"big", "news", "something", "happened"});
    const auto body_only = store.unit_sequence(store.get("a"), false);
    CHECK(body_only.units == std::vector<std::string>{"something", "happened"});
}
