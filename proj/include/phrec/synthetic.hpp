#ifndef PHREC_SYNTHETIC_HPP
#define PHREC_SYNTHETIC_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phrec/article.hpp"
#include "phrec/interactions.hpp"

namespace phrec {

// Corpus of topical articles whose relatedness is carried by multi-word
// signature phrases built from a shared pool of ambiguous unigrams: every
// constituent word appears across topics (and standalone as noise), only the
// bigram identifies the topic.
struct SyntheticSpec {
    int topics = 12;
    int phrases_per_topic = 3;
    int concept_words = 30; // ambiguous unigram pool
    int filler_words = 150;
    int articles_per_topic = 20;
    int article_len = 60; // body length in words
    int title_len = 3;
    double signature_density = 0.30; // fraction of body slots holding a signature phrase
    double concept_noise = 0.15;     // standalone concept unigrams from any topic
    int users = 60;
    int reads_per_user = 8; // view->click chain length
    int distractors = 5;    // cross-topic impressions per view
    // Twin mode: topics come in pairs that share one concept-word set with
    // identical unigram marginals; the twins differ only in phrase word
    // order, so unit identity alone cannot tell them apart.
    bool twin_topics = false;
    int twin_distractors = 3; // impressions drawn from the twin (twin mode)
    std::uint64_t seed = 7;
};

struct SyntheticData {
    ArticleStore store;
    std::vector<Event> events;
    std::vector<std::vector<std::pair<std::string, std::string>>> topic_phrases;
    std::map<std::string, int> topic_of;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

void write_synthetic(const SyntheticData& data, const std::string& articles_path,
                     const std::string& events_path);

// Token stream with planted co-occurrence clusters for embedding sanity
// checks: unit u belongs to cluster u / units_per_cluster, articles draw from
// one cluster with a small leak probability.
struct ClusterCorpusSpec {
    int clusters = 4;
    int units_per_cluster = 10;
    int total_tokens = 100000;
    int article_len = 50;
    double leak = 0.05;
    std::uint64_t seed = 11;
};

std::vector<UnitSequence> generate_cluster_corpus(const ClusterCorpusSpec& spec);

} // namespace phrec

#endif
