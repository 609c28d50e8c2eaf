#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "phrec/evaluation.hpp"
#include "phrec/pipeline.hpp"
#include "phrec/synthetic.hpp"

namespace fs = std::filesystem;
using namespace phrec;

namespace {

void print_stage_log(const PipelineResult& result) {
    for (const auto& s : result.stages)
        std::printf("  [%s] %s\n", s.executed ? "run " : "skip", s.name.c_str());
}

void print_level_reports(const PipelineResult& result) {
    std::printf("word level:\n%s", report_table(result.word.report).c_str());
    std::printf("phrase level:\n%s", report_table(result.phrase.report).c_str());
    std::printf("delta (phrase - word): MRR %+0.4f  Acc %+0.4f  h@3 %+0.4f  h@5 %+0.4f\n",
                result.phrase.report.mrr - result.word.report.mrr,
                result.phrase.report.acc - result.word.report.acc,
                result.phrase.report.h3 - result.word.report.h3,
                result.phrase.report.h5 - result.word.report.h5);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"phrase-aware content-based article recommendation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    bool force = false;
    app.add_option("--config", config_path, "pipeline config file (key = value lines)");
    app.add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_flag("--force", force, "ignore the stage cache");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate articles and build a store");
    std::string in_articles, in_out;
    ingest->add_option("--articles", in_articles, "articles JSONL")->required();
    ingest->add_option("--out", in_out, "output store path")->required();

    // mine
    auto* mine = app.add_subcommand("mine", "mine a quality phrase lexicon from a store");
    std::string mine_store, mine_out;
    double mine_threshold = 0.5;
    int mine_max_n = 6;
    std::int64_t mine_min_freq = 5;
    bool mine_no_title = false;
    mine->add_option("--store", mine_store, "article store")->required();
    mine->add_option("--out", mine_out, "output lexicon TSV")->required();
    mine->add_option("--threshold", mine_threshold, "minimum quality (inclusive)");
    mine->add_option("--max-n", mine_max_n, "longest candidate in words");
    mine->add_option("--min-freq", mine_min_freq, "minimum candidate frequency");
    mine->add_flag("--no-title", mine_no_title, "tokenize bodies only");

    // label
    auto* label_cmd = app.add_subcommand("label", "rewrite articles into unit sequences");
    std::string label_store, label_lexicon, label_level_str = "phrase", label_out;
    bool label_no_title = false;
    label_cmd->add_option("--store", label_store, "article store")->required();
    label_cmd->add_option("--lexicon", label_lexicon, "lexicon TSV (phrase level)");
    label_cmd->add_option("--level", label_level_str, "word|phrase");
    label_cmd->add_option("--out", label_out, "output labeled corpus JSONL")->required();
    label_cmd->add_flag("--no-title", label_no_title, "tokenize bodies only");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "train unit embeddings on a labeled corpus");
    std::string embed_in, embed_out;
    GloveConfig glove;
    int embed_window = 5;
    std::int64_t embed_min_count = 1;
    embed_cmd->add_option("--labeled", embed_in, "labeled corpus JSONL")->required();
    embed_cmd->add_option("--out", embed_out, "output vectors file")->required();
    embed_cmd->add_option("--dim", glove.dim, "embedding dimension");
    embed_cmd->add_option("--epochs", glove.epochs, "training epochs");
    embed_cmd->add_option("--lr", glove.lr, "learning rate");
    embed_cmd->add_option("--x-max", glove.x_max, "weighting cutoff");
    embed_cmd->add_option("--alpha", glove.alpha, "weighting exponent");
    embed_cmd->add_option("--window", embed_window, "co-occurrence window");
    embed_cmd->add_option("--min-count", embed_min_count, "vocabulary threshold");

    // pairs
    auto* pairs_cmd = app.add_subcommand("pairs", "build train/val/test pair datasets from logs");
    std::string pairs_log, pairs_behavior = "click", pairs_out;
    std::size_t pairs_m = 4, pairs_cap = 8;
    pairs_cmd->add_option("--log", pairs_log, "event log JSONL")->required();
    pairs_cmd->add_option("--behavior", pairs_behavior, "click|view");
    pairs_cmd->add_option("--m", pairs_m, "negatives per positive");
    pairs_cmd->add_option("--cap", pairs_cap, "latest pairs kept per user");
    pairs_cmd->add_option("--out", pairs_out, "output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train one ranking model");
    std::string train_model, train_level, train_pairs, train_embeddings, train_labeled,
                train_ckpt, train_track;
    int train_epochs = -1;
    std::int64_t train_vocab_min = 3;
    train_cmd->add_option("--model", train_model,
                          "textcnn|cdssm|mvlstm|knrm|bilstm_sa (overrides --config)");
    train_cmd->add_option("--level", train_level, "word|phrase (overrides --config)");
    train_cmd->add_option("--pairs", train_pairs, "pairs directory")->required();
    train_cmd->add_option("--embeddings", train_embeddings, "vectors file")->required();
    train_cmd->add_option("--labeled", train_labeled, "labeled corpus JSONL")->required();
    train_cmd->add_option("--out", train_ckpt, "checkpoint path")->required();
    train_cmd->add_option("--epochs", train_epochs, "override epochs");
    train_cmd->add_option("--vocab-min-count", train_vocab_min, "model vocabulary threshold");
    train_cmd->add_option("--track", train_track, "article id to trace (bilstm_sa)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on test instances");
    std::string eval_ckpt, eval_test, eval_out, eval_embeddings, eval_labeled;
    std::int64_t eval_vocab_min = 3;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--test", eval_test, "test instances JSONL")->required();
    eval_cmd->add_option("--out", eval_out, "report JSON path")->required();
    eval_cmd->add_option("--embeddings", eval_embeddings, "vectors file (default: from manifest)");
    eval_cmd->add_option("--labeled", eval_labeled, "labeled corpus (default: from manifest)");
    eval_cmd->add_option("--vocab-min-count", eval_vocab_min, "model vocabulary threshold");

    // viz
    auto* viz_cmd = app.add_subcommand("viz", "render an attention trace as an HTML heatmap");
    std::string viz_trace, viz_out;
    viz_cmd->add_option("--trace", viz_trace, "trace JSON")->required();
    viz_cmd->add_option("--out", viz_out, "output HTML path")->required();

    // pipeline / compare
    auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage end to end");
    auto* compare_cmd =
        app.add_subcommand("compare", "train both unit levels and report metric deltas");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus and event log");
    std::string synth_out = ".";
    SyntheticSpec synth_spec;
    synth_cmd->add_option("--out", synth_out, "output directory");
    synth_cmd->add_option("--topics", synth_spec.topics, "topic count");
    synth_cmd->add_option("--users", synth_spec.users, "user count");
    synth_cmd->add_option("--articles-per-topic", synth_spec.articles_per_topic, "articles/topic");
    synth_cmd->add_option("--article-len", synth_spec.article_len, "body length in words");
    synth_cmd->add_option("--reads-per-user", synth_spec.reads_per_user, "reading chain length");

    // global flags (--config/--seed/--force) may follow the subcommand name
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            stages::ingest(in_articles, in_out);
            std::printf("store written to %s\n", in_out.c_str());
        } else if (*mine) {
            stages::mine(mine_store, mine_out, mine_max_n, mine_min_freq, mine_threshold,
                         !mine_no_title);
            std::printf("lexicon written to %s\n", mine_out.c_str());
        } else if (*label_cmd) {
            stages::label_level(label_store, label_lexicon,
                                unit_level_from_string(label_level_str), !label_no_title,
                                label_out);
            std::printf("labeled corpus written to %s\n", label_out.c_str());
        } else if (*embed_cmd) {
            if (seed_set) glove.seed = seed_override;
            stages::embed(embed_in, glove, embed_min_count, embed_window, embed_out);
            std::printf("embeddings written to %s\n", embed_out.c_str());
        } else if (*pairs_cmd) {
            PairDatasetOptions opts;
            opts.behavior = behavior_from_string(pairs_behavior);
            opts.m = pairs_m;
            opts.cap = pairs_cap;
            if (seed_set) opts.seed = seed_override;
            stages::pairs(pairs_log, opts, pairs_out);
            std::printf("pair datasets written to %s\n", pairs_out.c_str());
        } else if (*train_cmd) {
            RankerConfig rc;
            if (!config_path.empty()) rc.apply_kv(parse_kv_file(config_path));
            if (!train_model.empty()) rc.model = model_from_string(train_model);
            if (!train_level.empty()) rc.level = unit_level_from_string(train_level);
            if (train_epochs >= 0) rc.epochs = train_epochs;
            if (seed_set) rc.seed = seed_override;
            std::vector<std::string> track_ids;
            if (!train_track.empty()) track_ids.push_back(train_track);
            const std::string trace_path = train_ckpt + ".trace.json";
            const auto result = stages::train(train_pairs, train_embeddings, train_labeled, rc,
                                              train_vocab_min, track_ids, train_ckpt,
                                              track_ids.empty() ? "" : trace_path);
            std::printf("checkpoint written to %s (best epoch %d, val MRR %.4f)\n",
                        train_ckpt.c_str(), result.train.best_epoch, result.train.best_val_mrr);
            if (result.empty_warnings)
                std::fprintf(stderr, "warning: %zu empty unit sequences scored as 0\n",
                             result.empty_warnings);
        } else if (*eval_cmd) {
            const EvalReport report = stages::evaluate(eval_ckpt, eval_test, eval_embeddings,
                                                       eval_labeled, eval_vocab_min, eval_out);
            std::printf("%s", report_table(report).c_str());
            std::printf("report written to %s\n", eval_out.c_str());
        } else if (*viz_cmd) {
            stages::viz(viz_trace, viz_out);
            std::printf("heatmap written to %s\n", viz_out.c_str());
        } else if (*pipeline_cmd || *compare_cmd) {
            if (config_path.empty()) throw UsageError("pipeline/compare need --config");
            PipelineConfig config = PipelineConfig::load(config_path);
            if (seed_set) {
                config.seed = seed_override;
                config.ranker.seed = seed_override;
                config.glove.seed = derive_seed(seed_override, "glove");
            }
            config.force = force;
            const PipelineResult result =
                *compare_cmd ? compare_levels(config) : run_pipeline(config);
            print_stage_log(result);
            print_level_reports(result);
            std::printf("summary written to %s\n", result.summary_path.c_str());
        } else if (*synth_cmd) {
            if (seed_set) synth_spec.seed = seed_override;
            fs::create_directories(synth_out);
            const auto data = generate_synthetic(synth_spec);
            const std::string articles = (fs::path(synth_out) / "articles.jsonl").string();
            const std::string events = (fs::path(synth_out) / "events.jsonl").string();
            write_synthetic(data, articles, events);
            std::printf("wrote %s and %s (%zu articles, %zu events)\n", articles.c_str(),
                        events.c_str(), data.store.size(), data.events.size());
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
