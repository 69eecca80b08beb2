#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mogkan/data.hpp"
#include "mogkan/metrics.hpp"
#include "mogkan/model.hpp"
#include "test_util.hpp"

using namespace mogkan;
using testutil::random_matrix;

namespace {

Graph isolated_graph(int d) {
    std::vector<std::string> ids;
    for (int i = 0; i < d; ++i) ids.push_back("f" + std::to_string(i));
    auto [g, fmap] = attach_features(Graph{}, ids, {});
    return g;
}

Graph random_attached_graph(int d, double p, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (int i = 0; i < d; ++i) ids.push_back("f" + std::to_string(i));
    InteractionTable table;
    Rng rng(seed);
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            if (rng.bernoulli(p)) table.rows.push_back({ids[a], ids[b], 900});
        }
    }
    std::vector<std::pair<std::string, std::string>> identity;
    for (const auto& id : ids) identity.emplace_back(id, id);
    auto [g, fmap] = attach_features(build_graph(table, 0), ids, identity);
    return g;
}

ModelConfig small_config(int d, int classes) {
    ModelConfig config;
    config.num_features = d;
    config.num_classes = classes;
    config.graph_layers = 2;
    config.hidden_width = 3;
    config.grid_intervals = 3;
    config.grid_degree = 3;
    config.dropout_rate = 0.0;
    config.seed = 5;
    return config;
}

}  // namespace

TEST_CASE("init_model validation") {
    Graph g = isolated_graph(4);
    ModelConfig config = small_config(4, 2);

    SUBCASE("constructs on a matching graph") {
        Model model(config, g);
        CHECK(model.trunk().size() == 2);
        CHECK(model.head().size() == 1);
    }

    SUBCASE("node count mismatch") {
        ModelConfig five = config;
        five.num_features = 5;
        CHECK_THROWS_WITH_AS(Model(five, g), doctest::Contains("graph-size-mismatch"),
                             std::invalid_argument);
    }

    SUBCASE("same seed gives identical checkpoints") {
        Model a(config, g);
        Model b(config, g);
        CHECK(save_checkpoint(a) == save_checkpoint(b));
    }

    SUBCASE("hidden width auto-resolves to 2d+1") {
        ModelConfig autocfg = config;
        autocfg.hidden_width = 0;
        Model model(autocfg, g);
        CHECK(model.config().hidden_width == 9);
    }
}

TEST_CASE("forward output rows are probability vectors") {
    Graph g = random_attached_graph(5, 0.5, 2);
    ModelConfig config = small_config(5, 3);
    Model model(config, g);
    Rng rng(9);
    Matrix x = random_matrix(4, 5, rng, -2.0, 2.0);
    Matrix probs = model.forward(x, Mode::Eval);
    for (std::size_t b = 0; b < 4; ++b) {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            CHECK(probs(b, c) >= 0.0);
            sum += probs(b, c);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("eval mode is pure and row-independent") {
    Graph g = random_attached_graph(6, 0.4, 3);
    ModelConfig config = small_config(6, 2);
    config.dropout_rate = 0.4;  // must not fire in eval
    Model model(config, g);
    Matrix x(2, 6);
    for (int j = 0; j < 6; ++j) {
        x(0, j) = 0.3 * j - 1.0;
        x(1, j) = 0.3 * j - 1.0;
    }
    Matrix p1 = model.forward(x, Mode::Eval);
    Matrix p2 = model.forward(x, Mode::Eval);
    CHECK(p1 == p2);
    for (int c = 0; c < 2; ++c) CHECK(p1(0, c) == p1(1, c));
    CHECK(save_checkpoint(model).find("nan") == std::string::npos);
}

TEST_CASE("graph_layers=0 reduces to a plain KAN over the features") {
    Graph g = isolated_graph(4);
    ModelConfig config = small_config(4, 2);
    config.graph_layers = 0;
    Model model(config, g);
    CHECK(model.trunk().empty());
    CHECK(model.head().front().in_dim == 4);
    Rng rng(4);
    Matrix x = random_matrix(3, 4, rng);
    Matrix probs = model.forward(x, Mode::Eval);
    for (std::size_t b = 0; b < 3; ++b) {
        double sum = 0.0;
        for (int c = 0; c < 2; ++c) sum += probs(b, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("isolated graph layer equals plain KAN with matched parameters") {
    const int d = 4, width = 3, classes = 2;
    Graph g = isolated_graph(d);
    ModelConfig cfg1 = small_config(d, classes);
    cfg1.graph_layers = 1;
    cfg1.hidden_width = width;
    Model m1(cfg1, g);
    // neutralize batch norm in eval: running stats are (0,1), so gamma must
    // undo the 1/sqrt(1+eps) factor
    for (auto& layer : m1.trunk()) {
        for (auto& gval : layer.bn.gamma) gval = std::sqrt(1.0 + layer.bn.epsilon);
    }

    ModelConfig cfg0 = cfg1;
    cfg0.graph_layers = 0;
    cfg0.head_widths = {width};
    Model m0(cfg0, g);
    // head layer 0 of m0 <- graph bank of m1 scaled by 1/d (mean pooling)
    KanLayer& bank = m1.trunk()[0].kan;
    KanLayer& first = m0.head()[0];
    for (int q = 0; q < width; ++q) {
        for (int p = 0; p < d; ++p) {
            first.base_weights(q, p) = bank.base_weights(q, p) / d;
            first.spline_weights(q, p) = bank.spline_weights(q, p) / d;
        }
    }
    first.coeffs = bank.coeffs;
    m0.head()[1] = m1.head()[0];

    Rng rng(11);
    Matrix x = random_matrix(5, d, rng, -2.0, 2.0);
    Matrix p1 = m1.forward(x, Mode::Eval);
    Matrix p0 = m0.forward(x, Mode::Eval);
    for (std::size_t i = 0; i < p1.data().size(); ++i) {
        CHECK(p0.data()[i] == doctest::Approx(p1.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("full-model gradients match finite differences") {
    Graph g = random_attached_graph(5, 0.5, 21);
    ModelConfig config = small_config(5, 3);
    config.dropout_rate = 0.25;
    Model model(config, g);
    Rng rng(22);
    Matrix x = random_matrix(6, 5, rng, -1.5, 1.5);
    std::vector<int> labels{0, 1, 2, 0, 1, 2};

    std::vector<double> analytic;
    {
        Rng dropout_rng(777);
        model.loss_and_grad(x, labels, dropout_rng, analytic);
    }
    auto loss = [&]() {
        Rng dropout_rng(777);  // identical masks on every evaluation
        std::vector<double> unused;
        return model.loss_and_grad(x, labels, dropout_rng, unused);
    };
    auto stats = testutil::finite_diff_check(model.params(), analytic, loss);
    CHECK(stats.checked == model.num_params());
    CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("multi-channel nodes: forward shape and exact gradients") {
    Graph g = random_attached_graph(3, 0.6, 41);
    ModelConfig config = small_config(3, 2);
    config.channels_per_node = 2;  // input width 6, grouped in pairs per node
    config.graph_layers = 1;
    Model model(config, g);
    Rng rng(42);
    Matrix x = random_matrix(4, 6, rng, -1.5, 1.5);
    Matrix probs = model.forward(x, Mode::Eval);
    for (std::size_t b = 0; b < 4; ++b) {
        double sum = 0.0;
        for (int c = 0; c < 2; ++c) sum += probs(b, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    std::vector<int> labels{0, 1, 1, 0};
    std::vector<double> analytic;
    {
        Rng dropout_rng(43);
        model.loss_and_grad(x, labels, dropout_rng, analytic);
    }
    auto loss = [&]() {
        Rng dropout_rng(43);
        std::vector<double> unused;
        return model.loss_and_grad(x, labels, dropout_rng, unused);
    };
    auto stats = testutil::finite_diff_check(model.params(), analytic, loss);
    CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("node permutation with matched first-layer columns leaves logits unchanged") {
    const int d = 5;
    Graph g = random_attached_graph(d, 0.5, 31);
    ModelConfig config = small_config(d, 2);
    Model model(config, g);

    std::vector<int> perm{3, 0, 4, 1, 2};  // node v -> position perm[v]
    Graph pg;
    pg.self_loops = true;
    pg.node_ids.resize(d);
    for (int v = 0; v < d; ++v) pg.node_ids[perm[v]] = g.node_ids[v];
    for (auto [a, b] : g.edges) {
        const int pa = perm[a], pb = perm[b];
        pg.edges.emplace_back(std::min(pa, pb), std::max(pa, pb));
    }
    Model pmodel(config, pg);
    // copy weights; permute the first layer's input columns
    const KanLayer& bank = model.trunk()[0].kan;
    KanLayer& pbank = pmodel.trunk()[0].kan;
    const int m = bank.grid.num_basis();
    for (int q = 0; q < bank.out_dim; ++q) {
        for (int p = 0; p < d; ++p) {
            pbank.base_weights(q, perm[p]) = bank.base_weights(q, p);
            pbank.spline_weights(q, perm[p]) = bank.spline_weights(q, p);
            for (int j = 0; j < m; ++j) {
                pbank.coeffs[pbank.coeff_index(q, perm[p], j)] =
                    bank.coeffs[bank.coeff_index(q, p, j)];
            }
        }
    }
    for (std::size_t l = 1; l < model.trunk().size(); ++l) {
        pmodel.trunk()[l].kan = model.trunk()[l].kan;
        pmodel.trunk()[l].bn = model.trunk()[l].bn;
    }
    pmodel.trunk()[0].bn = model.trunk()[0].bn;
    pmodel.head() = model.head();

    Rng rng(32);
    Matrix x = random_matrix(4, d, rng);
    Matrix px(4, d);
    for (std::size_t b = 0; b < 4; ++b) {
        for (int v = 0; v < d; ++v) px(b, perm[v]) = x(b, v);
    }
    Matrix out = model.forward(x, Mode::Eval);
    Matrix pout = pmodel.forward(px, Mode::Eval);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        CHECK(pout.data()[i] == doctest::Approx(out.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("feature importance") {
    const int d = 4;
    Graph g = isolated_graph(d);
    ModelConfig config = small_config(d, 2);
    config.graph_layers = 1;
    Model model(config, g);

    SUBCASE("zeroed column scores exactly 0 and ranks last by index") {
        KanLayer& bank = model.trunk()[0].kan;
        const int m = bank.grid.num_basis();
        for (int q = 0; q < bank.out_dim; ++q) {
            bank.base_weights(q, 2) = 0.0;
            bank.spline_weights(q, 2) = 0.0;
            for (int j = 0; j < m; ++j) bank.coeffs[bank.coeff_index(q, 2, j)] = 0.0;
        }
        auto ranking = feature_importance(model);
        REQUIRE(ranking.size() == 4);
        CHECK(ranking.back().feature_index == 2);
        CHECK(ranking.back().score == 0.0);
    }

    SUBCASE("single nonzero column ranks first") {
        KanLayer& bank = model.trunk()[0].kan;
        const int m = bank.grid.num_basis();
        bank.base_weights.fill(0.0);
        bank.spline_weights.fill(0.0);
        for (auto& c : bank.coeffs) c = 0.0;
        bank.base_weights(0, 1) = 2.5;
        auto ranking = feature_importance(model);
        CHECK(ranking.front().feature_index == 1);
        CHECK(ranking.front().score == doctest::Approx(2.5));
        // zero-score ties are ordered by feature index
        CHECK(ranking[1].feature_index == 0);
        CHECK(ranking[2].feature_index == 2);
        CHECK(ranking[3].feature_index == 3);
        (void)m;
    }

    SUBCASE("scores are non-negative") {
        auto ranking = feature_importance(model);
        for (const auto& e : ranking) CHECK(e.score >= 0.0);
    }
}

TEST_CASE("map_importance_to_genes") {
    std::vector<ImportanceEntry> ranking{{1, 2.0}, {0, 1.0}};
    std::vector<std::string> ids{"fA", "fB"};

    SUBCASE("empty mapping annotates everything unmapped") {
        std::istringstream mapping("feature_id\tgene_name\n");
        auto rows = map_importance_to_genes(ranking, ids, mapping);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].feature_id == "fB");
        CHECK(rows[0].gene_name == "unmapped");
    }

    SUBCASE("mapped and unmapped both kept") {
        std::istringstream mapping(
            "feature_id\tgene_stable_id\tgene_name\nfB\tENSG000001\tMCL1\n");
        auto rows = map_importance_to_genes(ranking, ids, mapping);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].gene_name == "MCL1");
        CHECK(rows[0].gene_stable_id == "ENSG000001");
        CHECK(rows[1].gene_name == "unmapped");
    }

    SUBCASE("malformed mapping rejected") {
        std::istringstream mapping("feature\tgene\nx\ty\n");
        CHECK_THROWS_WITH_AS(map_importance_to_genes(ranking, ids, mapping),
                             doctest::Contains("malformed-mapping-file"), std::runtime_error);
    }
}

TEST_CASE("training reduces loss and is deterministic") {
    SyntheticDataset ds = synthesize(60, 8, 2, 3, 0.2, 0.5, 99);
    LabelEncoding enc = encode_labels(ds.matrix);
    auto [x, stats] = standardize(ds.matrix.values);

    std::vector<std::string> ids = ds.matrix.feature_ids;
    std::vector<std::pair<std::string, std::string>> identity;
    for (const auto& id : ids) identity.emplace_back(id, id);
    std::ostringstream buf;
    save_interactions(buf, ds.interactions);
    std::istringstream in(buf.str());
    auto [graph, fmap] = attach_features(build_graph(parse_interactions(in), 0), ids, identity);

    ModelConfig config;
    config.num_features = 8;
    config.num_classes = 2;
    config.graph_layers = 1;
    config.hidden_width = 8;
    config.dropout_rate = 0.05;
    config.seed = 13;

    TrainOptions options;
    options.epochs = 30;
    options.learning_rate = 0.02;
    options.weight_decay = 0.0;
    options.batch_size = 16;
    options.seed = 14;

    SUBCASE("epochs 0 leaves the model untouched") {
        Model model(config, graph);
        const std::string before = save_checkpoint(model);
        TrainOptions none = options;
        none.epochs = 0;
        auto trace = train(model, x, enc.codes, none);
        CHECK(trace.empty());
        CHECK(save_checkpoint(model) == before);
    }

    SUBCASE("loss drops; 200 epochs reach 0.99 training accuracy on planted data") {
        Model model(config, graph);
        TrainOptions long_run = options;
        long_run.epochs = 200;
        auto trace = train(model, x, enc.codes, long_run);
        REQUIRE(trace.size() == 200);
        CHECK(trace.back() < trace.front());
        auto pred = model.predict(x);
        const double acc = accuracy(confusion(enc.codes, pred, 2));
        CHECK(acc >= 0.99);
    }

    SUBCASE("identical seeds give identical trajectories") {
        Model a(config, graph);
        Model b(config, graph);
        auto ta = train(a, x, enc.codes, options);
        auto tb = train(b, x, enc.codes, options);
        CHECK(ta == tb);
        CHECK(save_checkpoint(a) == save_checkpoint(b));
    }

    SUBCASE("empty dataset rejected") {
        Model model(config, graph);
        Matrix none(0, 8);
        CHECK_THROWS_WITH_AS(train(model, none, {}, options), doctest::Contains("empty-dataset"),
                             std::invalid_argument);
    }
}

TEST_CASE("checkpoint round-trip reproduces outputs bitwise") {
    Graph g = random_attached_graph(5, 0.4, 51);
    ModelConfig config = small_config(5, 3);
    Model model(config, g);
    model.class_names = {"a", "b", "c"};
    Standardization stats;
    stats.means = {0.1, 0.2, 0.3, 0.4, 0.5};
    stats.stds = {1.0, 1.1, 1.2, 1.3, 1.4};
    model.standardization = stats;

    const std::string text = save_checkpoint(model);
    Model loaded = load_checkpoint(text);
    CHECK(save_checkpoint(loaded) == text);

    Rng rng(52);
    Matrix x = random_matrix(6, 5, rng, -2.0, 2.0);
    Matrix a = model.forward(x, Mode::Eval);
    Matrix b = loaded.forward(x, Mode::Eval);
    CHECK(a == b);  // bitwise
    CHECK(loaded.class_names == model.class_names);
}

TEST_CASE("grid_search") {
    SyntheticDataset ds = synthesize(40, 6, 2, 2, 0.2, 0.5, 77);
    LabelEncoding enc = encode_labels(ds.matrix);
    Graph graph = isolated_graph(6);

    ModelConfig base;
    base.num_features = 6;
    base.num_classes = 2;
    base.graph_layers = 1;
    base.hidden_width = 4;
    base.seed = 1;

    TrainOptions options;
    options.epochs = 10;
    options.batch_size = 8;
    options.seed = 2;

    SUBCASE("single-point space returns that config") {
        GridSearchSpace space{{0.02}, {0.0}, {0.0}, {4}};
        GridSearchResult r =
            grid_search(ds.matrix.values, enc.codes, graph, base, options, space, 2);
        CHECK(r.table.size() == 1);
        CHECK(r.best.learning_rate == 0.02);
    }

    SUBCASE("2x2 space explores four configs") {
        GridSearchSpace space{{0.02, 0.01}, {0.0, 1e-4}, {0.0}, {4}};
        GridSearchResult r =
            grid_search(ds.matrix.values, enc.codes, graph, base, options, space, 2);
        CHECK(r.table.size() == 4);
    }

    SUBCASE("a config that learns beats one that cannot") {
        // lr 0 leaves the model at its initialization, so it scores ~chance
        GridSearchSpace space{{0.0, 0.02}, {0.0}, {0.0}, {4}};
        GridSearchResult r =
            grid_search(ds.matrix.values, enc.codes, graph, base, options, space, 2);
        CHECK(r.best.learning_rate == 0.02);
    }

    SUBCASE("empty space rejected") {
        GridSearchSpace space{{}, {0.0}, {0.0}, {4}};
        CHECK_THROWS_WITH_AS(
            grid_search(ds.matrix.values, enc.codes, graph, base, options, space, 2),
            doctest::Contains("empty-space"), std::invalid_argument);
    }
}
