#ifndef PHREC_PIPELINE_HPP
#define PHREC_PIPELINE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "phrec/evaluation.hpp"
#include "phrec/glove.hpp"
#include "phrec/interactions.hpp"
#include "phrec/rankers.hpp"

namespace phrec {

// "key = value" lines, '#' comments.
std::map<std::string, std::string> parse_kv_file(const std::string& path);

struct PipelineConfig {
    std::string articles;
    std::string events;
    std::string workdir = "phrec-out";
    std::string import_lexicon; // optional; replaces the mining stage

    int max_n = 6;
    std::int64_t min_freq = 5;
    double threshold = 0.5;

    int window = 5;
    GloveConfig glove;
    std::int64_t embed_min_count = 1;
    std::int64_t vocab_min_count = 3;
    bool prepend_title = true;

    Behavior behavior = Behavior::click;
    std::size_t m = 4;
    std::size_t cap = 8;

    RankerConfig ranker;
    std::string track_article; // default: a_c of the first test instance

    std::uint64_t seed = 1;
    bool force = false;

    void apply_kv(const std::map<std::string, std::string>& kv);
    static PipelineConfig load(const std::string& path);
    void validate_paths() const;
};

// Content-hash stage cache: a stage is skipped when its inputs and parameters
// hash to the stamp recorded by a previous run and its outputs still exist.
class StageCache {
public:
    StageCache(std::string workdir, bool force);
    // Returns true when the stage executed, false when skipped.
    bool run(const std::string& name, const std::vector<std::string>& input_files,
             const std::string& params, const std::vector<std::string>& outputs,
             const std::function<void()>& fn);

private:
    std::string stamps_dir_;
    bool force_ = false;
};

struct StageStatus {
    std::string name;
    bool executed = false;
};

struct LevelOutcome {
    EvalReport report;
    std::string checkpoint;
    std::string report_path;
    std::string trace_path;   // bilstm_sa only
    std::string heatmap_path; // bilstm_sa only
};

struct PipelineResult {
    std::vector<StageStatus> stages;
    LevelOutcome word;
    LevelOutcome phrase;
    std::string summary_path;
};

// ingest -> mine -> label -> embed -> pairs -> train -> eval -> viz, each
// level trained with identical seeds, reports for both levels plus deltas.
PipelineResult run_pipeline(const PipelineConfig& config);

// Same artifacts plus a side-by-side compare.json with per-metric deltas.
PipelineResult compare_levels(const PipelineConfig& config);

// Stage bodies shared by the CLI subcommands (no caching).
namespace stages {

void ingest(const std::string& articles_path, const std::string& store_path);

void mine(const std::string& store_path, const std::string& lexicon_path, int max_n,
          std::int64_t min_freq, double threshold, bool prepend_title);

void import_lexicon_stage(const std::string& input_tsv, const std::string& lexicon_path,
                          double threshold);

void label_level(const std::string& store_path, const std::string& lexicon_path, UnitLevel level,
                 bool prepend_title, const std::string& out_path);

void embed(const std::string& labeled_path, const GloveConfig& config, std::int64_t min_count,
           int window, const std::string& out_path);

void pairs(const std::string& events_path, const PairDatasetOptions& options,
           const std::string& out_dir);

struct TrainStageResult {
    TrainResult train;
    std::size_t empty_warnings = 0;
};
TrainStageResult train(const std::string& pairs_dir, const std::string& embeddings_path,
                       const std::string& labeled_path, const RankerConfig& config,
                       std::int64_t vocab_min_count, const std::vector<std::string>& track_ids,
                       const std::string& ckpt_path, const std::string& trace_path);

EvalReport evaluate(const std::string& ckpt_path, const std::string& test_path,
                    const std::string& embeddings_path, const std::string& labeled_path,
                    std::int64_t vocab_min_count, const std::string& report_path);

void viz(const std::string& trace_path, const std::string& html_path);

} // namespace stages

} // namespace phrec

#endif
