#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "phrec/common.hpp"
#include "phrec/interactions.hpp"
#include "phrec/rng.hpp"
#include "phrec/synthetic.hpp"

using namespace phrec;

namespace {

Event ev(const std::string& user, const std::string& article, EventKind kind, std::int64_t ts,
         std::vector<std::string> impressions = {}) {
    Event e;
    e.user_id = user;
    e.article_id = article;
    e.kind = kind;
    e.timestamp = ts;
    e.impressions = std::move(impressions);
    return e;
}

} // namespace

TEST_CASE("event log groups, sorts, and validates clicks") {
    auto log = EventLog::from_events({
        ev("u1", "B", EventKind::click, 3),
        ev("u1", "A", EventKind::view, 1, {"B", "D"}),
        ev("u1", "B", EventKind::view, 5, {"C"}),
    });
    const auto& seq = log.users().at("u1");
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].article_id == "A");  // sorted by timestamp
    CHECK(seq[1].article_id == "B");
    CHECK(seq[2].kind == EventKind::view);

    // click on a never-shown article
    CHECK_THROWS_WITH_AS(EventLog::from_events({
                             ev("u1", "A", EventKind::view, 1, {"B"}),
                             ev("u1", "Z", EventKind::click, 2),
                         }),
                         doctest::Contains("integrity"), DataError);

    // click before any view
    CHECK_THROWS_AS(EventLog::from_events({ev("u1", "B", EventKind::click, 1)}), DataError);
}

TEST_CASE("click pairs come from view->click adjacency") {
    const std::vector<Event> events = {
        ev("u", "A", EventKind::view, 1, {"B", "D"}),
        ev("u", "B", EventKind::click, 2),
        ev("u", "B", EventKind::view, 3, {"C", "E"}),
        ev("u", "C", EventKind::click, 4),
        ev("u", "C", EventKind::view, 5, {"D"}),
    };
    const auto pairs = build_click_pairs("u", events, 8);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].pair.a_c == "A");
    CHECK(pairs[0].pair.a_r == "B");
    CHECK(pairs[1].pair.a_c == "B");
    CHECK(pairs[1].pair.a_r == "C");

    // views only -> no click pairs
    const std::vector<Event> views_only = {ev("u", "A", EventKind::view, 1),
                                           ev("u", "B", EventKind::view, 2)};
    CHECK(build_click_pairs("u", views_only, 8).empty());
}

TEST_CASE("latest-8 cap keeps the most recent pairs") {
    std::vector<Event> events;
    std::int64_t ts = 0;
    for (int i = 0; i < 10; ++i) {
        const std::string cur = "A" + std::to_string(i);
        const std::string next = "A" + std::to_string(i + 1);
        events.push_back(ev("u", cur, EventKind::view, ts++, {next}));
        events.push_back(ev("u", next, EventKind::click, ts++));
    }
    const auto pairs = build_click_pairs("u", events, 8);
    REQUIRE(pairs.size() == 8);
    CHECK(pairs.front().pair.a_c == "A2"); // first two dropped
    CHECK(pairs.back().pair.a_r == "A10");
}

TEST_CASE("view pairs survive interleaved clicks") {
    const std::vector<Event> events = {
        ev("u", "A", EventKind::view, 1, {"C"}),
        ev("u", "B", EventKind::view, 2, {"C"}),
        ev("u", "C", EventKind::click, 3),
        ev("u", "D", EventKind::view, 4),
    };
    const auto pairs = build_view_pairs("u", events, 8);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].pair.a_c == "A");
    CHECK(pairs[0].pair.a_r == "B");
    CHECK(pairs[1].pair.a_c == "B");
    CHECK(pairs[1].pair.a_r == "D");

    CHECK(build_view_pairs("u", {ev("u", "A", EventKind::view, 1)}, 8).empty());
}

TEST_CASE("negatives come from un-clicked impressions, corpus-filled when short") {
    const std::vector<Event> events = {
        ev("u", "A", EventKind::view, 1, {"B", "C", "D", "E", "F"}),
        ev("u", "B", EventKind::click, 2),
    };
    auto log = EventLog::from_events(events);
    const auto pairs = build_click_pairs("u", log.users().at("u"), 8);
    REQUIRE(pairs.size() == 1);

    // exact fit: impressions minus the positive
    const auto ins = attach_negatives(pairs[0], log, 4, 1);
    CHECK(ins.a_c == "A");
    CHECK(ins.pos == "B");
    REQUIRE(ins.negs.size() == 4);
    const std::set<std::string> negs(ins.negs.begin(), ins.negs.end());
    CHECK(negs == std::set<std::string>{"C", "D", "E", "F"});

    // short impressions: corpus-random fill excludes a_c and a_r
    auto log2 = EventLog::from_events({
        ev("u", "A", EventKind::view, 1, {"B", "C"}),
        ev("u", "B", EventKind::click, 2),
        ev("v", "X", EventKind::view, 1, {"Y", "Z"}),
        ev("v", "Y", EventKind::click, 2),
    });
    const auto pairs2 = build_click_pairs("u", log2.users().at("u"), 8);
    const auto ins2 = attach_negatives(pairs2[0], log2, 4, 1);
    REQUIRE(ins2.negs.size() == 4);
    const std::set<std::string> negs2(ins2.negs.begin(), ins2.negs.end());
    CHECK(negs2.count("C") == 1);
    CHECK(negs2.count("A") == 0);
    CHECK(negs2.count("B") == 0);
    for (const auto& n : ins2.negs) CHECK(n != ins2.pos);

    // m=1 with a single un-clicked impression
    const auto ins3 = attach_negatives(pairs2[0], log2, 1, 1);
    REQUIRE(ins3.negs.size() == 1);
    CHECK(ins3.negs[0] == "C");
}

TEST_CASE("split puts last pair in test, second-to-last in val") {
    auto make = [](const std::string& user, int n) {
        std::vector<EvalInstance> list;
        for (int i = 1; i <= n; ++i) {
            EvalInstance ins;
            ins.a_c = user + "p" + std::to_string(i);
            ins.pos = user + "q" + std::to_string(i);
            ins.negs = {"n"};
            list.push_back(ins);
        }
        return list;
    };
    std::map<std::string, std::vector<EvalInstance>> per_user;
    per_user["five"] = make("", 5);
    per_user["one"] = make("one_", 1);
    per_user["two"] = make("two_", 2);
    const auto split = split_instances(per_user);

    REQUIRE(split.test.size() == 3);
    REQUIRE(split.val.size() == 2);
    REQUIRE(split.train.size() == 3);

    // five pairs: train p1..p3, val p4, test p5
    CHECK(split.train[0].a_c == "p1");
    CHECK(split.train[2].a_c == "p3");
    bool found_p4 = false, found_p5 = false;
    for (const auto& v : split.val) found_p4 |= v.a_c == "p4";
    for (const auto& t : split.test) found_p5 |= t.a_c == "p5";
    CHECK(found_p4);
    CHECK(found_p5);

    // no pair id appears in two splits
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (const auto& ins : *part) CHECK(seen.insert(ins.a_c + "|" + ins.pos).second);
}

TEST_CASE("pair builders match a brute-force reference on random logs") {
    Rng rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        // random per-user event stream over a small article universe
        std::vector<Event> events;
        const int n = 2 + static_cast<int>(rng.below(12));
        std::int64_t ts = 0;
        std::string last_view;
        for (int i = 0; i < n; ++i) {
            const std::string art = "a" + std::to_string(rng.below(6));
            // keep click integrity: clicks reference the preceding view's impressions
            if (!last_view.empty() && rng.below(3) == 0) {
                events.push_back(ev("u", art, EventKind::click, ts++));
                events.back().article_id = events[events.size() - 2].impressions.empty()
                                               ? art
                                               : events[events.size() - 2].impressions[0];
            } else {
                events.push_back(ev("u", art, EventKind::view, ts++, {"a0", "a1", "a2"}));
                last_view = art;
            }
        }
        // brute force (independent of the production scan)
        std::vector<std::pair<std::string, std::string>> brute_click, brute_view;
        for (std::size_t i = 0; i + 1 < events.size(); ++i) {
            if (events[i].kind == EventKind::view && events[i + 1].kind == EventKind::click &&
                events[i].article_id != events[i + 1].article_id)
                brute_click.emplace_back(events[i].article_id, events[i + 1].article_id);
        }
        std::vector<std::string> viewed;
        for (const auto& e : events)
            if (e.kind == EventKind::view) viewed.push_back(e.article_id);
        for (std::size_t i = 0; i + 1 < viewed.size(); ++i)
            if (viewed[i] != viewed[i + 1]) brute_view.emplace_back(viewed[i], viewed[i + 1]);
        if (brute_click.size() > 8)
            brute_click.erase(brute_click.begin(),
                              brute_click.end() - 8);
        if (brute_view.size() > 8) brute_view.erase(brute_view.begin(), brute_view.end() - 8);

        const auto got_click = build_click_pairs("u", events, 8);
        const auto got_view = build_view_pairs("u", events, 8);
        REQUIRE(got_click.size() == brute_click.size());
        for (std::size_t i = 0; i < brute_click.size(); ++i) {
            CHECK(got_click[i].pair.a_c == brute_click[i].first);
            CHECK(got_click[i].pair.a_r == brute_click[i].second);
        }
        REQUIRE(got_view.size() == brute_view.size());
        for (std::size_t i = 0; i < brute_view.size(); ++i) {
            CHECK(got_view[i].pair.a_c == brute_view[i].first);
            CHECK(got_view[i].pair.a_r == brute_view[i].second);
        }
    }
}

TEST_CASE("dataset build on the synthetic log honors invariants") {
    SyntheticSpec spec;
    spec.users = 10;
    spec.topics = 4;
    spec.articles_per_topic = 6;
    spec.reads_per_user = 6;
    spec.article_len = 20;
    const auto data = generate_synthetic(spec);
    const auto log = EventLog::from_events(data.events);

    PairDatasetOptions opts;
    opts.behavior = Behavior::click;
    opts.m = 4;
    opts.cap = 8;
    opts.seed = 3;
    const auto split = build_pair_dataset(log, opts);
    CHECK(split.test.size() == 10);
    CHECK(split.val.size() == 10);
    CHECK(split.train.size() == 10 * (6 - 1 - 2));
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (const auto& ins : *part) {
            CHECK(ins.negs.size() == 4);
            for (const auto& n : ins.negs) {
                CHECK(n != ins.pos);
                CHECK(n != ins.a_c);
            }
        }
    }

    // determinism of the whole dataset build
    const auto split2 = build_pair_dataset(log, opts);
    REQUIRE(split.train.size() == split2.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        CHECK(split.train[i].a_c == split2.train[i].a_c);
        CHECK(split.train[i].negs == split2.train[i].negs);
    }
}

TEST_CASE("instances persist as jsonl") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "phrec_instances.jsonl").string();
    std::vector<EvalInstance> instances(2);
    instances[0] = {"a", "b", {"c", "d"}};
    instances[1] = {"x", "y", {"z"}};
    save_instances(path, instances);
    const auto back = load_instances(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].a_c == "a");
    CHECK(back[0].negs == std::vector<std::string>{"c", "d"});
    CHECK(back[1].pos == "y");
    std::remove(path.c_str());
}

TEST_CASE("event log jsonl parsing reports line numbers") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "phrec_events.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"user_id":"u","article_id":"A","kind":"view","timestamp":1,"impressions":["B"]})"
            << "\n";
        out << R"({"user_id":"u","article_id":"B","kind":"click","timestamp":2})" << "\n";
    }
    const auto log = EventLog::parse_jsonl(path);
    CHECK(log.users().at("u").size() == 2);
    CHECK(log.corpus_ids() == std::vector<std::string>{"A", "B"});

    {
        std::ofstream out(path);
        out << "{}\n";
    }
    CHECK_THROWS_WITH_AS(EventLog::parse_jsonl(path), doctest::Contains(":1"), DataError);
    std::remove(path.c_str());
}
