#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "phrec/common.hpp"
#include "phrec/glove.hpp"
#include "phrec/synthetic.hpp"

using namespace phrec;

namespace {

std::vector<UnitSequence> seq_corpus(const std::vector<std::vector<std::string>>& seqs) {
    std::vector<UnitSequence> out;
    int id = 0;
    for (const auto& units : seqs) {
        UnitSequence s;
        s.article_id = "a" + std::to_string(id++);
        s.level = UnitLevel::word;
        s.units = units;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

TEST_CASE("co-occurrence distance weighting") {
    const auto corpus = seq_corpus({{"a", "b"}});
    const auto vocab = Vocabulary::build(corpus, 1);
    const auto table = build_cooccurrence(corpus, vocab, 5);
    const auto ia = vocab.index_of("a"), ib = vocab.index_of("b");
    CHECK(table.at(ia, ib) == doctest::Approx(1.0));
    CHECK(table.at(ib, ia) == doctest::Approx(1.0));

    const auto corpus2 = seq_corpus({{"a", "x", "b"}});
    const auto vocab2 = Vocabulary::build(corpus2, 1);
    const auto t2 = build_cooccurrence(corpus2, vocab2, 5);
    CHECK(t2.at(vocab2.index_of("a"), vocab2.index_of("b")) == doctest::Approx(0.5));

    // [a, b, a], window 1: adjacencies (a,b) and (b,a) both count both ways
    const auto corpus3 = seq_corpus({{"a", "b", "a"}});
    const auto vocab3 = Vocabulary::build(corpus3, 1);
    const auto t3 = build_cooccurrence(corpus3, vocab3, 1);
    CHECK(t3.at(vocab3.index_of("a"), vocab3.index_of("b")) == doctest::Approx(2.0));
    CHECK(t3.at(vocab3.index_of("b"), vocab3.index_of("a")) == doctest::Approx(2.0));
}

TEST_CASE("weighting function") {
    CHECK(weighting_f(100.0, 100.0, 0.75) == doctest::Approx(1.0));
    CHECK(weighting_f(150.0, 100.0, 0.75) == doctest::Approx(1.0));
    CHECK(weighting_f(0.0, 100.0, 0.75) == doctest::Approx(0.0));
    CHECK(weighting_f(50.0, 100.0, 0.75) == doctest::Approx(std::pow(0.5, 0.75)).epsilon(1e-12));
    // monotone
    double prev = -1;
    for (double x = 0; x <= 120; x += 1.5) {
        const double f = weighting_f(x, 100.0, 0.75);
        CHECK(f >= prev);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        prev = f;
    }
}

TEST_CASE("single-entry system converges to ln X") {
    // X_ab = e so the solved product must reach 1 = ln e
    const auto corpus = seq_corpus({{"a", "b"}});
    const auto vocab = Vocabulary::build(corpus, 1);
    CooccurrenceTable table;
    table.accumulate(vocab.index_of("a"), vocab.index_of("b"), std::exp(1.0));

    GloveConfig config;
    config.dim = 8;
    config.epochs = 4000;
    config.lr = 0.05;
    config.seed = 3;
    const auto emb = glove_train(table, vocab, config);
    const auto ia = vocab.index_of("a"), ib = vocab.index_of("b");
    double pred = emb.main_b[ia] + emb.ctx_b[ib];
    for (int k = 0; k < config.dim; ++k)
        pred += emb.main_w[ia][static_cast<std::size_t>(k)] *
                emb.ctx_w[ib][static_cast<std::size_t>(k)];
    CHECK(pred == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(emb.loss_history.back() < 1e-6);
}

TEST_CASE("zero epochs returns the seeded init with empty history") {
    const auto corpus = seq_corpus({{"a", "b"}});
    const auto vocab = Vocabulary::build(corpus, 1);
    const auto table = build_cooccurrence(corpus, vocab, 5);
    GloveConfig config;
    config.dim = 4;
    config.epochs = 0;
    config.seed = 5;
    const auto emb = glove_train(table, vocab, config);
    CHECK(emb.loss_history.empty());
    const auto emb2 = glove_train(table, vocab, config);
    CHECK(emb.main_w == emb2.main_w);
    CHECK(emb.ctx_b == emb2.ctx_b);
}

TEST_CASE("same seed gives bitwise identical embeddings") {
    ClusterCorpusSpec spec;
    spec.total_tokens = 3000;
    const auto corpus = generate_cluster_corpus(spec);
    const auto vocab = Vocabulary::build(corpus, 1);
    const auto table = build_cooccurrence(corpus, vocab, 5);
    GloveConfig config;
    config.dim = 10;
    config.epochs = 3;
    config.seed = 17;
    const auto e1 = glove_train(table, vocab, config);
    const auto e2 = glove_train(table, vocab, config);
    CHECK(e1.main_w == e2.main_w);
    CHECK(e1.ctx_w == e2.ctx_w);
    CHECK(e1.main_b == e2.main_b);
    CHECK(e1.loss_history == e2.loss_history);

    config.seed = 18;
    const auto e3 = glove_train(table, vocab, config);
    CHECK(e1.main_w != e3.main_w);
}

TEST_CASE("analytic gradient of one glove term matches finite differences") {
    // J = f(X) (w.wc + b + bc - ln X)^2 for one entry
    const double X = 7.0, x_max = 100.0, alpha = 0.75;
    std::vector<double> w = {0.1, -0.2, 0.3};
    std::vector<double> wc = {-0.05, 0.15, 0.2};
    double b = 0.02, bc = -0.07;
    auto loss = [&] {
        double pred = b + bc;
        for (int k = 0; k < 3; ++k) pred += w[static_cast<std::size_t>(k)] * wc[static_cast<std::size_t>(k)];
        const double diff = pred - std::log(X);
        return weighting_f(X, x_max, alpha) * diff * diff;
    };
    double pred = b + bc;
    for (int k = 0; k < 3; ++k) pred += w[static_cast<std::size_t>(k)] * wc[static_cast<std::size_t>(k)];
    const double diff = pred - std::log(X);
    const double g_shared = 2.0 * weighting_f(X, x_max, alpha) * diff;

    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        const double analytic = g_shared * wc[static_cast<std::size_t>(k)];
        const double saved = w[static_cast<std::size_t>(k)];
        w[static_cast<std::size_t>(k)] = saved + h;
        const double up = loss();
        w[static_cast<std::size_t>(k)] = saved - h;
        const double down = loss();
        w[static_cast<std::size_t>(k)] = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK(std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)) < 1e-5);
    }
    {
        const double saved = b;
        b = saved + h;
        const double up = loss();
        b = saved - h;
        const double down = loss();
        b = saved;
        CHECK(std::abs(g_shared - (up - down) / (2 * h)) < 1e-5);
    }
}

TEST_CASE("diverging training aborts naming the epoch") {
    const auto corpus = seq_corpus({{"a", "b", "a", "c", "b", "c"}});
    const auto vocab = Vocabulary::build(corpus, 1);
    const auto table = build_cooccurrence(corpus, vocab, 5);
    GloveConfig config;
    config.dim = 4;
    config.epochs = 5;
    config.lr = 1e150; // one step overflows the objective
    config.seed = 2;
    CHECK_THROWS_WITH_AS(glove_train(table, vocab, config), doctest::Contains("epoch"),
                         NumericError);
}

TEST_CASE("nearest neighbors ranks planted duplicates first") {
    EmbeddingTable table;
    table.dim = 3;
    table.units = {"q", "dup", "ortho", "far"};
    table.main_w = {{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}};
    table.ctx_w = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    table.main_b = {0, 0, 0, 0};
    table.ctx_b = {0, 0, 0, 0};
    table.rebuild_index();

    const auto nn = table.nearest_neighbors("q", 2);
    REQUIRE(nn.size() == 2);
    CHECK(nn[0].first == "dup");
    CHECK(nn[0].second == doctest::Approx(1.0));
    CHECK(nn[1].first == "ortho");
    CHECK(nn[1].second == doctest::Approx(0.0));

    // k larger than vocab: everything but the query
    CHECK(table.nearest_neighbors("q", 10).size() == 3);
    CHECK_THROWS_AS(table.nearest_neighbors("missing", 2), DataError);
}

TEST_CASE("embedding text format round trips") {
    namespace fs = std::filesystem;
    EmbeddingTable table;
    table.dim = 2;
    table.units = {"<UNK>", "hello", "world_peace"};
    table.main_w = {{0.5, -1.25}, {1e-7, 2.0}, {3.25, 4.5}};
    table.ctx_w = {{0.5, 0.25}, {0.0, 0.0}, {-0.25, 0.5}};
    table.main_b = {0, 0, 0};
    table.ctx_b = {0, 0, 0};
    table.rebuild_index();

    const std::string path = (fs::temp_directory_path() / "phrec_vec.txt").string();
    table.save_text(path);
    const auto back = EmbeddingTable::load_text(path);
    CHECK(back.dim == 2);
    REQUIRE(back.units.size() == 3);
    CHECK(back.units[1] == "hello");
    const auto v = back.exported(2);
    CHECK(v[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(v[1] == doctest::Approx(5.0).epsilon(1e-8));
    std::remove(path.c_str());
}
