#include "phrec/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "phrec/common.hpp"
#include "phrec/rng.hpp"

namespace phrec {

namespace {

std::string padded(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
    return buf;
}

} // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.topics < 2) throw UsageError("synthetic: need at least 2 topics");
    if (spec.concept_words < 4) throw UsageError("synthetic: need at least 4 concept_pool words");
    Rng rng(spec.seed);
    SyntheticData data;

    int concept_words = spec.concept_words;
    if (spec.twin_topics) {
        if (spec.topics % 2 != 0) throw UsageError("synthetic: twin mode needs an even topic count");
        concept_words = (spec.topics / 2) * 2 * spec.phrases_per_topic;
    }
    std::vector<std::string> concept_pool(concept_words);
    for (int i = 0; i < concept_words; ++i) concept_pool[i] = padded("c", i, 2);
    std::vector<std::string> filler(spec.filler_words);
    for (int i = 0; i < spec.filler_words; ++i) filler[i] = padded("w", i, 3);

    data.topic_phrases.resize(spec.topics);
    if (spec.twin_topics) {
        // Twin pair k owns words [base, base + 2P); topic 2k pairs them in
        // order, topic 2k+1 reverses every pair.
        for (int k = 0; k < spec.topics / 2; ++k) {
            const int base = k * 2 * spec.phrases_per_topic;
            for (int i = 0; i < spec.phrases_per_topic; ++i) {
                const auto& first = concept_pool[base + 2 * i];
                const auto& second = concept_pool[base + 2 * i + 1];
                data.topic_phrases[2 * k].emplace_back(first, second);
                data.topic_phrases[2 * k + 1].emplace_back(second, first);
            }
        }
    } else {
        // Distinct signature bigrams; the shared unigram pool makes
        // constituents ambiguous across topics.
        std::set<std::pair<int, int>> used;
        for (int t = 0; t < spec.topics; ++t) {
            while (static_cast<int>(data.topic_phrases[t].size()) < spec.phrases_per_topic) {
                const int a = static_cast<int>(rng.below(concept_words));
                int b = static_cast<int>(rng.below(concept_words));
                if (a == b) continue;
                if (!used.insert({a, b}).second) continue;
                data.topic_phrases[t].emplace_back(concept_pool[a], concept_pool[b]);
            }
        }
    }

    // Articles: filler stream with planted signature phrases and standalone
    // concept_pool unigrams from arbitrary topics.
    std::int64_t ts = 1000;
    for (int t = 0; t < spec.topics; ++t) {
        for (int a = 0; a < spec.articles_per_topic; ++a) {
            Article art;
            art.id = padded("t", t, 2) + "_" + padded("a", a, 3);
            art.timestamp = ts++;
            std::string title;
            for (int k = 0; k < spec.title_len; ++k) {
                if (k) title += ' ';
                title += filler[rng.below(filler.size())];
            }
            art.title = title;
            std::string body;
            int words = 0;
            while (words < spec.article_len) {
                if (!body.empty()) body += ' ';
                const double roll = rng.real();
                if (roll < spec.signature_density && words + 2 <= spec.article_len) {
                    const auto& ph =
                        data.topic_phrases[t][rng.below(data.topic_phrases[t].size())];
                    body += ph.first;
                    body += ' ';
                    body += ph.second;
                    words += 2;
                } else if (roll < spec.signature_density + spec.concept_noise) {
                    body += concept_pool[rng.below(concept_pool.size())];
                    ++words;
                } else {
                    body += filler[rng.below(filler.size())];
                    ++words;
                }
            }
            art.body = body;
            data.topic_of[art.id] = t;
            data.store.add(std::move(art));
        }
    }

    // Per-user within-topic reading chains: view a_k (impressions hold a_{k+1}
    // plus cross-topic distractors), click a_{k+1}, then view a_{k+1}, ...
    std::int64_t event_ts = 1;
    for (int u = 0; u < spec.users; ++u) {
        const int topic = static_cast<int>(rng.below(spec.topics));
        const std::string user = padded("u", u, 3);
        auto pick_article = [&](int t, const std::string& not_id) {
            for (;;) {
                const int a = static_cast<int>(rng.below(spec.articles_per_topic));
                std::string id = padded("t", t, 2) + "_" + padded("a", a, 3);
                if (id != not_id) return id;
            }
        };
        std::vector<std::string> chain;
        chain.push_back(pick_article(topic, ""));
        for (int k = 1; k < spec.reads_per_user; ++k)
            chain.push_back(pick_article(topic, chain.back()));

        for (int k = 0; k < spec.reads_per_user; ++k) {
            Event view;
            view.user_id = user;
            view.article_id = chain[static_cast<std::size_t>(k)];
            view.kind = EventKind::view;
            view.timestamp = event_ts++;
            std::vector<std::string> impressions;
            if (k + 1 < spec.reads_per_user) impressions.push_back(chain[static_cast<std::size_t>(k) + 1]);
            for (int d = 0; d < spec.distractors; ++d) {
                int other;
                if (spec.twin_topics && d < spec.twin_distractors) {
                    other = topic ^ 1; // the hard negatives live in the twin
                } else {
                    other = static_cast<int>(rng.below(spec.topics));
                    while (other == topic) other = static_cast<int>(rng.below(spec.topics));
                }
                impressions.push_back(pick_article(other, ""));
            }
            rng.shuffle(impressions);
            view.impressions = std::move(impressions);
            data.events.push_back(std::move(view));

            if (k + 1 < spec.reads_per_user) {
                Event click;
                click.user_id = user;
                click.article_id = chain[static_cast<std::size_t>(k) + 1];
                click.kind = EventKind::click;
                click.timestamp = event_ts++;
                data.events.push_back(std::move(click));
            }
        }
    }
    return data;
}

void write_synthetic(const SyntheticData& data, const std::string& articles_path,
                     const std::string& events_path) {
    data.store.save_jsonl(articles_path);
    std::ofstream out(events_path, std::ios::binary);
    if (!out) throw DataError("cannot write events file '" + events_path + "'");
    using nlohmann::json;
    for (const auto& e : data.events) {
        json j;
        j["user_id"] = e.user_id;
        j["article_id"] = e.article_id;
        j["kind"] = e.kind == EventKind::view ? "view" : "click";
        j["timestamp"] = e.timestamp;
        if (!e.impressions.empty()) j["impressions"] = e.impressions;
        out << j.dump() << '\n';
    }
}

std::vector<UnitSequence> generate_cluster_corpus(const ClusterCorpusSpec& spec) {
    Rng rng(spec.seed);
    const int vocab = spec.clusters * spec.units_per_cluster;
    std::vector<std::string> units(static_cast<std::size_t>(vocab));
    for (int i = 0; i < vocab; ++i) units[static_cast<std::size_t>(i)] = padded("u", i, 2);

    std::vector<UnitSequence> corpus;
    int emitted = 0;
    int article = 0;
    while (emitted < spec.total_tokens) {
        UnitSequence seq;
        seq.article_id = padded("art", article++, 5);
        seq.level = UnitLevel::word;
        const int len = std::min(spec.article_len, spec.total_tokens - emitted);
        const int cluster = static_cast<int>(rng.below(spec.clusters));
        for (int k = 0; k < len; ++k) {
            int c = cluster;
            if (rng.real() < spec.leak) c = static_cast<int>(rng.below(spec.clusters));
            const int u = c * spec.units_per_cluster +
                          static_cast<int>(rng.below(spec.units_per_cluster));
            seq.units.push_back(units[static_cast<std::size_t>(u)]);
        }
        emitted += len;
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

} // namespace phrec
