#include "phrec/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phrec/phrase.hpp"
#include "phrec/rng.hpp"

namespace phrec {

namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(line_no) +
                             ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw UsageError(path + ":" + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw UsageError(path + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                             "'");
    }
    return kv;
}

namespace {

std::int64_t kv_i64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const auto x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad integer for '" + key + "': '" + v + "'");
    }
}

double kv_num(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config: bad number for '" + key + "': '" + v + "'");
    }
}

bool kv_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("config: bad boolean for '" + key + "': '" + v + "'");
}

} // namespace

void PipelineConfig::apply_kv(const std::map<std::string, std::string>& kv) {
    std::map<std::string, std::string> ranker_kv;
    for (const auto& [key, value] : kv) {
        if (key == "articles")
            articles = value;
        else if (key == "events")
            events = value;
        else if (key == "workdir")
            workdir = value;
        else if (key == "import_lexicon")
            import_lexicon = value;
        else if (key == "max_n")
            max_n = static_cast<int>(kv_i64(key, value));
        else if (key == "min_freq")
            min_freq = kv_i64(key, value);
        else if (key == "threshold")
            threshold = kv_num(key, value);
        else if (key == "window")
            window = static_cast<int>(kv_i64(key, value));
        else if (key == "dim")
            glove.dim = static_cast<int>(kv_i64(key, value));
        else if (key == "glove_epochs")
            glove.epochs = static_cast<int>(kv_i64(key, value));
        else if (key == "glove_lr")
            glove.lr = kv_num(key, value);
        else if (key == "glove_x_max")
            glove.x_max = kv_num(key, value);
        else if (key == "glove_alpha")
            glove.alpha = kv_num(key, value);
        else if (key == "embed_min_count")
            embed_min_count = kv_i64(key, value);
        else if (key == "vocab_min_count")
            vocab_min_count = kv_i64(key, value);
        else if (key == "prepend_title")
            prepend_title = kv_bool(key, value);
        else if (key == "behavior")
            behavior = behavior_from_string(value);
        else if (key == "m")
            m = static_cast<std::size_t>(kv_i64(key, value));
        else if (key == "cap")
            cap = static_cast<std::size_t>(kv_i64(key, value));
        else if (key == "track_article")
            track_article = value;
        else if (key == "seed")
            seed = static_cast<std::uint64_t>(kv_i64(key, value));
        else
            ranker_kv.emplace(key, value);
    }
    ranker.apply_kv(ranker_kv); // rejects anything it does not know
    ranker.seed = seed;
    glove.seed = derive_seed(seed, "glove");
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    PipelineConfig config;
    config.apply_kv(parse_kv_file(path));
    return config;
}

void PipelineConfig::validate_paths() const {
    if (articles.empty() || !fs::exists(articles))
        throw UsageError("pipeline config: articles file '" + articles + "' not found");
    if (events.empty() || !fs::exists(events))
        throw UsageError("pipeline config: events file '" + events + "' not found");
    if (!import_lexicon.empty() && !fs::exists(import_lexicon))
        throw UsageError("pipeline config: lexicon file '" + import_lexicon + "' not found");
}

// ---------- stage cache ----------

StageCache::StageCache(std::string workdir, bool force) : force_(force) {
    stamps_dir_ = (fs::path(workdir) / ".stamps").string();
    fs::create_directories(stamps_dir_);
}

namespace {

std::uint64_t hash_file(const std::string& path, std::uint64_t h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("stage input '" + path + "' not found");
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

} // namespace

bool StageCache::run(const std::string& name, const std::vector<std::string>& input_files,
                     const std::string& params, const std::vector<std::string>& outputs,
                     const std::function<void()>& fn) {
    std::uint64_t h = fnv1a64(params);
    for (const auto& f : input_files) {
        h = fnv1a64(f, h);
        h = hash_file(f, h);
    }
    char stamp[24];
    std::snprintf(stamp, sizeof(stamp), "%016llx", static_cast<unsigned long long>(h));
    const std::string stamp_path = (fs::path(stamps_dir_) / (name + ".stamp")).string();

    if (!force_) {
        std::ifstream sf(stamp_path);
        std::string prev;
        if (sf >> prev && prev == stamp) {
            bool all_outputs = true;
            for (const auto& o : outputs)
                if (!fs::exists(o)) all_outputs = false;
            if (all_outputs) return false;
        }
    }
    fn();
    std::ofstream sf(stamp_path, std::ios::binary);
    sf << stamp << '\n';
    return true;
}

// ---------- stage bodies ----------

namespace stages {

void ingest(const std::string& articles_path, const std::string& store_path) {
    ArticleStore::load_jsonl(articles_path).save_jsonl(store_path);
}

namespace {

std::vector<UnitSequence> tokenize_store(const std::string& store_path, bool prepend_title) {
    const ArticleStore store = ArticleStore::load_jsonl(store_path);
    std::vector<UnitSequence> corpus;
    corpus.reserve(store.size());
    for (const auto& a : store.articles())
        corpus.push_back(store.unit_sequence(a, prepend_title));
    return corpus;
}

} // namespace

void mine(const std::string& store_path, const std::string& lexicon_path, int max_n,
          std::int64_t min_freq, double threshold, bool prepend_title) {
    const auto corpus = tokenize_store(store_path, prepend_title);
    const CorpusStats stats = CorpusStats::build(corpus, max_n);
    auto candidates = generate_candidates(corpus, max_n, min_freq, &stats);
    for (auto& c : candidates) c.quality = score_candidate(c, stats).quality;
    PhraseLexicon::from_candidates(candidates, threshold).export_tsv(lexicon_path);
}

void import_lexicon_stage(const std::string& input_tsv, const std::string& lexicon_path,
                          double threshold) {
    PhraseLexicon::import_tsv(input_tsv, threshold).export_tsv(lexicon_path);
}

void label_level(const std::string& store_path, const std::string& lexicon_path, UnitLevel level,
                 bool prepend_title, const std::string& out_path) {
    auto corpus = tokenize_store(store_path, prepend_title);
    if (level == UnitLevel::phrase) {
        const PhraseLexicon lexicon =
            lexicon_path.empty() ? PhraseLexicon() : PhraseLexicon::import_tsv(lexicon_path, 0.0);
        for (auto& seq : corpus) seq = label(seq, lexicon);
    }
    save_labeled_corpus(out_path, corpus);
}

void embed(const std::string& labeled_path, const GloveConfig& config, std::int64_t min_count,
           int window, const std::string& out_path) {
    const auto corpus = load_labeled_corpus(labeled_path);
    const Vocabulary vocab = Vocabulary::build(corpus, min_count);
    const CooccurrenceTable table = build_cooccurrence(corpus, vocab, window);
    glove_train(table, vocab, config).save_text(out_path);
}

void pairs(const std::string& events_path, const PairDatasetOptions& options,
           const std::string& out_dir) {
    const EventLog log = EventLog::parse_jsonl(events_path);
    const DatasetSplit split = build_pair_dataset(log, options);
    fs::create_directories(out_dir);
    save_instances((fs::path(out_dir) / "train.jsonl").string(), split.train);
    save_instances((fs::path(out_dir) / "val.jsonl").string(), split.val);
    save_instances((fs::path(out_dir) / "test.jsonl").string(), split.test);
}

TrainStageResult train(const std::string& pairs_dir, const std::string& embeddings_path,
                       const std::string& labeled_path, const RankerConfig& config,
                       std::int64_t vocab_min_count, const std::vector<std::string>& track_ids,
                       const std::string& ckpt_path, const std::string& trace_path) {
    const auto train_set = load_instances((fs::path(pairs_dir) / "train.jsonl").string());
    const auto val_set = load_instances((fs::path(pairs_dir) / "val.jsonl").string());
    const EmbeddingTable table = EmbeddingTable::load_text(embeddings_path);
    const auto corpus = load_labeled_corpus(labeled_path);
    const Vocabulary model_vocab = Vocabulary::build(corpus, vocab_min_count);
    ArticleEmbedder embedder(table, corpus, static_cast<std::size_t>(config.max_len),
                             config.fine_tune, &model_vocab);

    auto model = make_ranker(config, table.dim);
    TrainOptions options;
    if (config.model == ModelKind::bilstm_sa) options.track_ids = track_ids;

    TrainStageResult out;
    out.train = train_ranker(*model, config, train_set, val_set, embedder, options);
    out.empty_warnings = model->empty_input_warnings;

    std::map<std::string, std::string> extras;
    extras["embeddings"] = embeddings_path;
    extras["labeled"] = labeled_path;
    extras["pairs"] = pairs_dir;
    extras["vocab_min_count"] = std::to_string(vocab_min_count);
    save_checkpoint(ckpt_path, *model, config, table.dim, extras);

    if (!out.train.traces.empty() && !trace_path.empty())
        save_trace_json(trace_path, out.train.traces.front());
    return out;
}

EvalReport evaluate(const std::string& ckpt_path, const std::string& test_path,
                    const std::string& embeddings_path, const std::string& labeled_path,
                    std::int64_t vocab_min_count, const std::string& report_path) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    const std::string emb = embeddings_path.empty() ? ckpt.extras.at("embeddings")
                                                    : embeddings_path;
    const std::string lab = labeled_path.empty() ? ckpt.extras.at("labeled") : labeled_path;
    const EmbeddingTable table = EmbeddingTable::load_text(emb);
    const auto corpus = load_labeled_corpus(lab);
    const Vocabulary model_vocab = Vocabulary::build(corpus, vocab_min_count);
    const ArticleEmbedder embedder(table, corpus, static_cast<std::size_t>(ckpt.config.max_len),
                                   false, &model_vocab);
    const auto test_set = load_instances(test_path);
    const EvalReport report = evaluate_run(*ckpt.model, test_set, embedder);
    if (!report_path.empty()) save_report_json(report_path, report);
    return report;
}

void viz(const std::string& trace_path, const std::string& html_path) {
    const AttentionTrace trace = load_trace_json(trace_path);
    std::ofstream out(html_path, std::ios::binary);
    if (!out) throw DataError("cannot write heatmap '" + html_path + "'");
    out << emit_heatmap_html(trace);
}

} // namespace stages

// ---------- orchestration ----------

namespace {

std::string glove_params_str(const GloveConfig& g, std::int64_t min_count, int window) {
    std::ostringstream os;
    os << "dim=" << g.dim << " epochs=" << g.epochs << " lr=" << g.lr << " x_max=" << g.x_max
       << " alpha=" << g.alpha << " seed=" << g.seed << " min_count=" << min_count
       << " window=" << window;
    return os.str();
}

std::string ranker_params_str(const RankerConfig& c) {
    std::ostringstream os;
    os << to_string(c.model) << " level=" << to_string(c.level) << " filters=" << c.filters
       << " hidden=" << c.hidden << " max_len=" << c.max_len << " alpha=" << c.alpha
       << " mlp_out=" << c.mlp_out << " topk=" << c.topk << " kernels=" << c.kernels
       << " sigma=" << c.sigma << " d_a=" << c.d_a << " r=" << c.r << " lr=" << c.lr_or_default()
       << " margin=" << c.margin << " epochs=" << c.epochs << " batch=" << c.batch_size
       << " seed=" << c.seed << " fine_tune=" << c.fine_tune << " penalty=" << c.attn_penalty;
    for (int d : c.mlp_dims) os << " mlp:" << d;
    return os.str();
}

json report_to_json(const EvalReport& r) {
    return json{{"mrr", r.mrr}, {"acc", r.acc},           {"h3", r.h3},
                {"h5", r.h5},   {"n_instances", r.n_instances}, {"m", r.m}};
}

json delta_json(const EvalReport& word, const EvalReport& phrase) {
    return json{{"mrr", phrase.mrr - word.mrr},
                {"acc", phrase.acc - word.acc},
                {"h3", phrase.h3 - word.h3},
                {"h5", phrase.h5 - word.h5}};
}

PipelineResult run_pipeline_impl(const PipelineConfig& config, bool write_compare) {
    config.validate_paths();
    config.ranker.validate();
    const fs::path wd(config.workdir);
    fs::create_directories(wd);
    StageCache cache(config.workdir, config.force);
    PipelineResult result;
    auto note = [&](const std::string& name, bool executed) {
        result.stages.push_back({name, executed});
    };

    const std::string store = (wd / "store.jsonl").string();
    note("ingest", cache.run("ingest", {config.articles}, "", {store},
                             [&] { stages::ingest(config.articles, store); }));

    const std::string lexicon = (wd / "lexicon.tsv").string();
    if (config.import_lexicon.empty()) {
        std::ostringstream params;
        params << "max_n=" << config.max_n << " min_freq=" << config.min_freq
               << " threshold=" << config.threshold << " title=" << config.prepend_title;
        note("mine", cache.run("mine", {store}, params.str(), {lexicon}, [&] {
                 stages::mine(store, lexicon, config.max_n, config.min_freq, config.threshold,
                              config.prepend_title);
             }));
    } else {
        std::ostringstream params;
        params << "threshold=" << config.threshold;
        note("import-lexicon",
             cache.run("import-lexicon", {config.import_lexicon}, params.str(), {lexicon}, [&] {
                 stages::import_lexicon_stage(config.import_lexicon, lexicon, config.threshold);
             }));
    }

    const std::string word_corpus = (wd / "word.jsonl").string();
    const std::string phrase_corpus = (wd / "phrase.jsonl").string();
    const std::string title_param = config.prepend_title ? "title=1" : "title=0";
    note("label-word", cache.run("label-word", {store}, title_param, {word_corpus}, [&] {
             stages::label_level(store, "", UnitLevel::word, config.prepend_title, word_corpus);
         }));
    note("label-phrase",
         cache.run("label-phrase", {store, lexicon}, title_param, {phrase_corpus}, [&] {
             stages::label_level(store, lexicon, UnitLevel::phrase, config.prepend_title,
                                 phrase_corpus);
         }));

    // one glove seed for both levels so a degenerate (empty) lexicon makes the
    // phrase run reproduce the word run exactly
    GloveConfig glove_word = config.glove;
    GloveConfig glove_phrase = config.glove;
    const std::string vec_word = (wd / "vectors-word.txt").string();
    const std::string vec_phrase = (wd / "vectors-phrase.txt").string();
    note("embed-word",
         cache.run("embed-word", {word_corpus},
                   glove_params_str(glove_word, config.embed_min_count, config.window), {vec_word},
                   [&] {
                       stages::embed(word_corpus, glove_word, config.embed_min_count,
                                     config.window, vec_word);
                   }));
    note("embed-phrase",
         cache.run("embed-phrase", {phrase_corpus},
                   glove_params_str(glove_phrase, config.embed_min_count, config.window),
                   {vec_phrase}, [&] {
                       stages::embed(phrase_corpus, glove_phrase, config.embed_min_count,
                                     config.window, vec_phrase);
                   }));

    const std::string pairs_dir = (wd / "pairs").string();
    const std::string train_file = (fs::path(pairs_dir) / "train.jsonl").string();
    const std::string val_file = (fs::path(pairs_dir) / "val.jsonl").string();
    const std::string test_file = (fs::path(pairs_dir) / "test.jsonl").string();
    {
        PairDatasetOptions opts;
        opts.behavior = config.behavior;
        opts.m = config.m;
        opts.cap = config.cap;
        opts.seed = derive_seed(config.seed, "pairs");
        std::ostringstream params;
        params << to_string(opts.behavior) << " m=" << opts.m << " cap=" << opts.cap
               << " seed=" << opts.seed;
        note("pairs", cache.run("pairs", {config.events}, params.str(),
                                {train_file, val_file, test_file},
                                [&] { stages::pairs(config.events, opts, pairs_dir); }));
    }

    // Both levels train with identical seeds; only the inputs differ.
    for (UnitLevel level : {UnitLevel::word, UnitLevel::phrase}) {
        const bool is_word = level == UnitLevel::word;
        const std::string tag = is_word ? "word" : "phrase";
        LevelOutcome& outcome = is_word ? result.word : result.phrase;
        RankerConfig rc = config.ranker;
        rc.level = level;
        rc.seed = config.seed;
        const std::string corpus_path = is_word ? word_corpus : phrase_corpus;
        const std::string vectors = is_word ? vec_word : vec_phrase;
        outcome.checkpoint = (wd / ("ckpt-" + tag + ".bin")).string();
        outcome.report_path = (wd / ("report-" + tag + ".json")).string();
        const bool with_trace = rc.model == ModelKind::bilstm_sa;
        outcome.trace_path = with_trace ? (wd / ("trace-" + tag + ".json")).string() : "";

        std::string track = config.track_article;
        if (track.empty()) {
            const auto test_set = load_instances(test_file);
            if (!test_set.empty()) track = test_set.front().a_c;
        }

        std::ostringstream params;
        params << ranker_params_str(rc) << " vocab_min=" << config.vocab_min_count
               << " track=" << track;
        std::vector<std::string> outputs = {outcome.checkpoint, outcome.checkpoint + ".json"};
        if (with_trace) outputs.push_back(outcome.trace_path);
        note("train-" + tag,
             cache.run("train-" + tag, {train_file, val_file, vectors, corpus_path}, params.str(),
                       outputs, [&] {
                           std::vector<std::string> track_ids;
                           if (with_trace && !track.empty()) track_ids.push_back(track);
                           stages::train(pairs_dir, vectors, corpus_path, rc,
                                         config.vocab_min_count, track_ids, outcome.checkpoint,
                                         outcome.trace_path);
                       }));

        note("eval-" + tag,
             cache.run("eval-" + tag, {outcome.checkpoint, test_file, vectors, corpus_path},
                       "vocab_min=" + std::to_string(config.vocab_min_count),
                       {outcome.report_path}, [&] {
                           stages::evaluate(outcome.checkpoint, test_file, vectors, corpus_path,
                                            config.vocab_min_count, outcome.report_path);
                       }));
        outcome.report = load_report_json(outcome.report_path);

        if (with_trace) {
            outcome.heatmap_path = (wd / ("heatmap-" + tag + ".html")).string();
            note("viz-" + tag, cache.run("viz-" + tag, {outcome.trace_path}, "",
                                         {outcome.heatmap_path}, [&] {
                                             stages::viz(outcome.trace_path,
                                                         outcome.heatmap_path);
                                         }));
        }
    }

    json summary;
    summary["model"] = to_string(config.ranker.model);
    summary["behavior"] = to_string(config.behavior);
    summary["seed"] = config.seed;
    summary["word"] = report_to_json(result.word.report);
    summary["phrase"] = report_to_json(result.phrase.report);
    summary["delta"] = delta_json(result.word.report, result.phrase.report);
    result.summary_path = (wd / "summary.json").string();
    {
        std::ofstream out(result.summary_path, std::ios::binary);
        if (!out) throw DataError("cannot write summary '" + result.summary_path + "'");
        out << summary.dump(2) << '\n';
    }

    if (write_compare) {
        json cmp;
        cmp["model"] = to_string(config.ranker.model);
        cmp["behavior"] = to_string(config.behavior);
        cmp["word"] = report_to_json(result.word.report);
        cmp["phrase"] = report_to_json(result.phrase.report);
        cmp["delta"] = delta_json(result.word.report, result.phrase.report);
        std::ofstream out((wd / "compare.json").string(), std::ios::binary);
        if (!out) throw DataError("cannot write compare report");
        out << cmp.dump(2) << '\n';
    }
    return result;
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
    return run_pipeline_impl(config, false);
}

PipelineResult compare_levels(const PipelineConfig& config) {
    return run_pipeline_impl(config, true);
}

} // namespace phrec
