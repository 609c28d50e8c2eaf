#ifndef PHREC_INTERACTIONS_HPP
#define PHREC_INTERACTIONS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phrec/instances.hpp"

namespace phrec {

enum class EventKind { view, click };
enum class Behavior { click, view };

Behavior behavior_from_string(const std::string& s);
const char* to_string(Behavior b);

struct Event {
    std::string user_id;
    std::string article_id;
    EventKind kind = EventKind::view;
    std::int64_t timestamp = 0;
    std::vector<std::string> impressions; // recommendations shown under article_id
};

class EventLog {
public:
    // JSON-lines {user_id, article_id, kind, timestamp, impressions?}. Events
    // are grouped per user and time-sorted; every click must reference an
    // article shown in the user's preceding view event.
    static EventLog parse_jsonl(const std::string& path);
    static EventLog from_events(std::vector<Event> events); // same integrity checks

    const std::map<std::string, std::vector<Event>>& users() const { return by_user_; }
    // Sorted ids of every article seen anywhere in the log (events and
    // impressions); the sampling pool for negative fill.
    const std::vector<std::string>& corpus_ids() const { return corpus_ids_; }
    // Impressions attached to user's view events of a_c (first match wins,
    // later views of the same article extend the pool).
    std::vector<std::string> impressions_of(const std::string& user_id,
                                            const std::string& a_c) const;

private:
    std::map<std::string, std::vector<Event>> by_user_;
    std::vector<std::string> corpus_ids_;
};

// A positive pair plus where it came from, so negatives can be resolved
// against the generating view event.
struct SourcedPair {
    ArticlePair pair;
    std::string user_id;
    std::size_t view_event_index = 0; // index of a_c's view event in the user sequence
};

// (a_i, a_{i+1}) for each view->click adjacency in the user's event sequence,
// capped to the latest `cap` pairs.
std::vector<SourcedPair> build_click_pairs(const std::string& user_id,
                                           const std::vector<Event>& events, std::size_t cap);

// (a_i, a_{i+1}) over the user's viewed articles; interleaved clicks do not
// break adjacency. Same cap.
std::vector<SourcedPair> build_view_pairs(const std::string& user_id,
                                          const std::vector<Event>& events, std::size_t cap);

// m negatives sampled without replacement from the un-clicked impressions of
// a_c, topped up from corpus-random articles when impressions run short.
EvalInstance attach_negatives(const SourcedPair& pair, const EventLog& log, std::size_t m,
                              std::uint64_t seed);

struct DatasetSplit {
    std::vector<EvalInstance> train;
    std::vector<EvalInstance> val;
    std::vector<EvalInstance> test;
};

// Per user: last pair -> test, second-to-last -> val, rest -> train. Users
// with fewer pairs fill test first, then val.
DatasetSplit split_instances(const std::map<std::string, std::vector<EvalInstance>>& per_user);

struct PairDatasetOptions {
    Behavior behavior = Behavior::click;
    std::size_t m = 4;
    std::size_t cap = 8;
    std::uint64_t seed = 1;
};

DatasetSplit build_pair_dataset(const EventLog& log, const PairDatasetOptions& options);

} // namespace phrec

#endif
