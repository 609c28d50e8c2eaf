#include "phrec/interactions.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "phrec/common.hpp"
#include "phrec/rng.hpp"

namespace phrec {

using nlohmann::json;

Behavior behavior_from_string(const std::string& s) {
    if (s == "click") return Behavior::click;
    if (s == "view") return Behavior::view;
    throw UsageError("unknown behavior '" + s + "' (expected click or view)");
}

const char* to_string(Behavior b) { return b == Behavior::click ? "click" : "view"; }

void save_instances(const std::string& path, const std::vector<EvalInstance>& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write instances file '" + path + "'");
    for (const auto& ins : instances) {
        json j;
        j["a_c"] = ins.a_c;
        j["pos"] = ins.pos;
        j["negs"] = ins.negs;
        out << j.dump() << '\n';
    }
}

std::vector<EvalInstance> load_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open instances file '" + path + "'");
    std::vector<EvalInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            EvalInstance ins;
            ins.a_c = j.at("a_c").get<std::string>();
            ins.pos = j.at("pos").get<std::string>();
            ins.negs = j.at("negs").get<std::vector<std::string>>();
            out.push_back(std::move(ins));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
    }
    return out;
}

namespace {

Event parse_event(const json& j) {
    Event e;
    e.user_id = j.at("user_id").get<std::string>();
    e.article_id = j.at("article_id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "view")
        e.kind = EventKind::view;
    else if (kind == "click")
        e.kind = EventKind::click;
    else
        throw DataError("unknown event kind '" + kind + "'");
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    if (j.contains("impressions"))
        e.impressions = j.at("impressions").get<std::vector<std::string>>();
    return e;
}

std::string describe(const Event& e) {
    return "user '" + e.user_id + "' " + (e.kind == EventKind::click ? "click" : "view") +
           " of '" + e.article_id + "' at t=" + std::to_string(e.timestamp);
}

} // namespace

EventLog EventLog::from_events(std::vector<Event> events) {
    EventLog log;
    for (auto& e : events) log.by_user_[e.user_id].push_back(std::move(e));

    std::set<std::string> corpus;
    for (auto& [user, seq] : log.by_user_) {
        std::stable_sort(seq.begin(), seq.end(),
                         [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
        const Event* last_view = nullptr;
        for (const auto& e : seq) {
            corpus.insert(e.article_id);
            for (const auto& imp : e.impressions) corpus.insert(imp);
            if (e.kind == EventKind::view) {
                last_view = &e;
                continue;
            }
            if (!last_view)
                throw DataError("integrity error: click before any view: " + describe(e));
            if (std::find(last_view->impressions.begin(), last_view->impressions.end(),
                          e.article_id) == last_view->impressions.end())
                throw DataError("integrity error: clicked article not among impressions of the "
                                "preceding view ('" +
                                last_view->article_id + "'): " + describe(e));
        }
    }
    log.corpus_ids_.assign(corpus.begin(), corpus.end());
    return log;
}

EventLog EventLog::parse_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open event log '" + path + "'");
    std::vector<Event> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            events.push_back(parse_event(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
    }
    return from_events(std::move(events));
}

std::vector<std::string> EventLog::impressions_of(const std::string& user_id,
                                                  const std::string& a_c) const {
    std::vector<std::string> out;
    auto it = by_user_.find(user_id);
    if (it == by_user_.end()) return out;
    std::unordered_set<std::string> seen;
    for (const auto& e : it->second) {
        if (e.kind != EventKind::view || e.article_id != a_c) continue;
        for (const auto& imp : e.impressions) {
            if (seen.insert(imp).second) out.push_back(imp);
        }
    }
    return out;
}

namespace {

std::vector<SourcedPair> cap_latest(std::vector<SourcedPair> pairs, std::size_t cap) {
    if (cap < 1) throw UsageError("pair cap must be >= 1");
    if (pairs.size() > cap)
        pairs.erase(pairs.begin(), pairs.end() - static_cast<std::ptrdiff_t>(cap));
    return pairs;
}

} // namespace

std::vector<SourcedPair> build_click_pairs(const std::string& user_id,
                                           const std::vector<Event>& events, std::size_t cap) {
    std::vector<SourcedPair> pairs;
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
        if (events[i].kind != EventKind::view || events[i + 1].kind != EventKind::click) continue;
        if (events[i].article_id == events[i + 1].article_id) continue;
        SourcedPair p;
        p.pair = {events[i].article_id, events[i + 1].article_id, PairLabel::positive};
        p.user_id = user_id;
        p.view_event_index = i;
        pairs.push_back(std::move(p));
    }
    return cap_latest(std::move(pairs), cap);
}

std::vector<SourcedPair> build_view_pairs(const std::string& user_id,
                                          const std::vector<Event>& events, std::size_t cap) {
    std::vector<SourcedPair> pairs;
    std::size_t prev_view = events.size(); // sentinel
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].kind != EventKind::view) continue;
        if (prev_view != events.size() && events[prev_view].article_id != events[i].article_id) {
            SourcedPair p;
            p.pair = {events[prev_view].article_id, events[i].article_id, PairLabel::positive};
            p.user_id = user_id;
            p.view_event_index = prev_view;
            pairs.push_back(std::move(p));
        }
        prev_view = i;
    }
    return cap_latest(std::move(pairs), cap);
}

EvalInstance attach_negatives(const SourcedPair& pair, const EventLog& log, std::size_t m,
                              std::uint64_t seed) {
    if (m < 1) throw UsageError("attach_negatives: m must be >= 1");
    EvalInstance ins;
    ins.a_c = pair.pair.a_c;
    ins.pos = pair.pair.a_r;

    // un-clicked impressions of a_c's generating view event
    std::vector<std::string> pool;
    auto it = log.users().find(pair.user_id);
    if (it != log.users().end() && pair.view_event_index < it->second.size() &&
        it->second[pair.view_event_index].article_id == pair.pair.a_c) {
        pool = it->second[pair.view_event_index].impressions;
    } else {
        pool = log.impressions_of(pair.user_id, pair.pair.a_c);
    }
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [&](const std::string& id) {
                                  return id == ins.pos || id == ins.a_c;
                              }),
               pool.end());

    Rng rng(derive_seed(seed, "negatives:" + pair.user_id + ":" + ins.a_c + ":" + ins.pos));
    rng.shuffle(pool);
    for (const auto& id : pool) {
        if (ins.negs.size() == m) break;
        ins.negs.push_back(id);
    }
    if (ins.negs.size() < m) {
        std::unordered_set<std::string> taken(ins.negs.begin(), ins.negs.end());
        taken.insert(ins.a_c);
        taken.insert(ins.pos);
        std::vector<std::string> corpus;
        for (const auto& id : log.corpus_ids())
            if (!taken.count(id)) corpus.push_back(id);
        rng.shuffle(corpus);
        for (const auto& id : corpus) {
            if (ins.negs.size() == m) break;
            ins.negs.push_back(id);
        }
    }
    return ins;
}

DatasetSplit split_instances(const std::map<std::string, std::vector<EvalInstance>>& per_user) {
    DatasetSplit split;
    for (const auto& [user, instances] : per_user) {
        const std::size_t n = instances.size();
        if (n == 0) continue;
        split.test.push_back(instances[n - 1]);
        if (n >= 2) split.val.push_back(instances[n - 2]);
        for (std::size_t i = 0; i + 2 < n; ++i) split.train.push_back(instances[i]);
    }
    return split;
}

DatasetSplit build_pair_dataset(const EventLog& log, const PairDatasetOptions& options) {
    std::map<std::string, std::vector<EvalInstance>> per_user;
    for (const auto& [user, events] : log.users()) {
        const auto pairs = options.behavior == Behavior::click
                               ? build_click_pairs(user, events, options.cap)
                               : build_view_pairs(user, events, options.cap);
        if (pairs.empty()) continue;
        auto& list = per_user[user];
        for (const auto& p : pairs)
            list.push_back(attach_negatives(p, log, options.m, options.seed));
    }
    return split_instances(per_user);
}

} // namespace phrec
