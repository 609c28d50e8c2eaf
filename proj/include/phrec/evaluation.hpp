#ifndef PHREC_EVALUATION_HPP
#define PHREC_EVALUATION_HPP

#include <string>
#include <vector>

#include "phrec/instances.hpp"
#include "phrec/rankers.hpp"

namespace phrec {

struct EvalReport {
    double mrr = 0;
    double acc = 0;
    double h3 = 0;
    double h5 = 0;
    std::vector<int> ranks;
    std::size_t n_instances = 0;
    std::size_t m = 0;
};

// 1 + |negatives scoring above s_pos| + |negatives tying s_pos|; ties rank
// the positive last so results cannot be inflated.
int rank_positive(Real s_pos, const std::vector<Real>& s_negs);

double mrr_from_ranks(const std::vector<int>& ranks);
double accuracy_from_ranks(const std::vector<int>& ranks);
double hit_at_n_from_ranks(const std::vector<int>& ranks, int n);

EvalReport report_from_ranks(std::vector<int> ranks, std::size_t m);

// Positive first, then the negatives in instance order.
std::vector<PairScore> score_instance(Ranker& model, const EvalInstance& instance,
                                      const ArticleEmbedder& embedder);

// Scores every pair of every instance with the model and aggregates.
EvalReport evaluate_run(Ranker& model, const std::vector<EvalInstance>& instances,
                        const ArticleEmbedder& embedder);

// JSON keys: mrr, acc, h3, h5, n_instances, m.
void save_report_json(const std::string& path, const EvalReport& report);
EvalReport load_report_json(const std::string& path);
std::string report_table(const EvalReport& report);

} // namespace phrec

#endif
