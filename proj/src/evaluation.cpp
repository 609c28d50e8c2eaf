#include "phrec/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "phrec/common.hpp"

namespace phrec {

using nlohmann::json;

int rank_positive(Real s_pos, const std::vector<Real>& s_negs) {
    int rank = 1;
    for (Real s : s_negs) {
        if (s >= s_pos) ++rank;
    }
    return rank;
}

double mrr_from_ranks(const std::vector<int>& ranks) {
    if (ranks.empty()) return 0;
    double sum = 0;
    for (int r : ranks) sum += 1.0 / static_cast<double>(r);
    return sum / static_cast<double>(ranks.size());
}

double accuracy_from_ranks(const std::vector<int>& ranks) {
    return hit_at_n_from_ranks(ranks, 1);
}

double hit_at_n_from_ranks(const std::vector<int>& ranks, int n) {
    if (ranks.empty()) return 0;
    std::size_t hits = 0;
    for (int r : ranks)
        if (r <= n) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

EvalReport report_from_ranks(std::vector<int> ranks, std::size_t m) {
    EvalReport rep;
    rep.n_instances = ranks.size();
    rep.m = m;
    rep.mrr = mrr_from_ranks(ranks);
    rep.acc = accuracy_from_ranks(ranks);
    rep.h3 = hit_at_n_from_ranks(ranks, 3);
    rep.h5 = hit_at_n_from_ranks(ranks, 5);
    rep.ranks = std::move(ranks);
    return rep;
}

std::vector<PairScore> score_instance(Ranker& model, const EvalInstance& instance,
                                      const ArticleEmbedder& embedder) {
    std::vector<PairScore> scored;
    scored.reserve(1 + instance.negs.size());
    const Tensor ec = embedder.embed(instance.a_c);
    scored.push_back({instance.a_c, instance.pos,
                      static_cast<double>(model.score(ec, embedder.embed(instance.pos)))});
    for (const auto& neg : instance.negs)
        scored.push_back(
            {instance.a_c, neg, static_cast<double>(model.score(ec, embedder.embed(neg)))});
    return scored;
}

EvalReport evaluate_run(Ranker& model, const std::vector<EvalInstance>& instances,
                        const ArticleEmbedder& embedder) {
    if (instances.empty()) throw DataError("evaluate_run: empty test set");
    std::vector<int> ranks;
    ranks.reserve(instances.size());
    for (const auto& ins : instances) {
        const auto scored = score_instance(model, ins, embedder);
        std::vector<Real> s_negs;
        s_negs.reserve(ins.negs.size());
        for (std::size_t j = 1; j < scored.size(); ++j)
            s_negs.push_back(static_cast<Real>(scored[j].score));
        ranks.push_back(rank_positive(static_cast<Real>(scored.front().score), s_negs));
    }
    return report_from_ranks(std::move(ranks), instances.front().negs.size());
}

void save_report_json(const std::string& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report file '" + path + "'");
    json j;
    j["mrr"] = report.mrr;
    j["acc"] = report.acc;
    j["h3"] = report.h3;
    j["h5"] = report.h5;
    j["n_instances"] = report.n_instances;
    j["m"] = report.m;
    out << j.dump(2) << '\n';
}

EvalReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report file '" + path + "'");
    json j;
    try {
        in >> j;
        EvalReport rep;
        rep.mrr = j.at("mrr").get<double>();
        rep.acc = j.at("acc").get<double>();
        rep.h3 = j.at("h3").get<double>();
        rep.h5 = j.at("h5").get<double>();
        rep.n_instances = j.at("n_instances").get<std::size_t>();
        rep.m = j.at("m").get<std::size_t>();
        return rep;
    } catch (const json::exception& e) {
        throw DataError(path + ": parse error: " + e.what());
    }
}

std::string report_table(const EvalReport& report) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "  MRR    Acc    h@3    h@5    (n=%zu, m=%zu)\n"
                  "  %.4f %.4f %.4f %.4f\n",
                  report.n_instances, report.m, report.mrr, report.acc, report.h3, report.h5);
    return buf;
}

} // namespace phrec
