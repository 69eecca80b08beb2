#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mogkan/kan.hpp"
#include "test_util.hpp"

using namespace mogkan;
using testutil::finite_diff_check;
using testutil::random_matrix;

namespace {

std::vector<ParamView> layer_views(KanLayer& layer) {
    return {
        {"base", layer.base_weights.data().data(), layer.base_weights.data().size()},
        {"spline", layer.spline_weights.data().data(), layer.spline_weights.data().size()},
        {"coeffs", layer.coeffs.data(), layer.coeffs.size()},
    };
}

}  // namespace

TEST_CASE("kan_layer_init is deterministic and shaped") {
    SplineGrid grid = make_grid(-3.0, 3.0, 5, 3);
    KanLayer a = kan_layer_init(3, 2, grid, 42);
    KanLayer b = kan_layer_init(3, 2, grid, 42);
    CHECK(a.base_weights == b.base_weights);
    CHECK(a.spline_weights == b.spline_weights);
    CHECK(a.coeffs == b.coeffs);
    CHECK(a.coeffs.size() == 2u * 3u * static_cast<std::size_t>(grid.num_basis()));
    for (int q = 0; q < 2; ++q) {
        for (int p = 0; p < 3; ++p) CHECK(a.spline_weights(q, p) == 1.0);
    }

    KanLayer c = kan_layer_init(3, 2, grid, 43);
    CHECK(a.base_weights.data() != c.base_weights.data());
}

TEST_CASE("kan_layer_forward basics") {
    SplineGrid grid = make_grid(-3.0, 3.0, 5, 3);
    KanLayer layer = kan_layer_init(3, 2, grid, 1);

    SUBCASE("zero parameters give zero output") {
        layer.base_weights.fill(0.0);
        layer.spline_weights.fill(0.0);
        for (auto& c : layer.coeffs) c = 0.0;
        Rng rng(2);
        Matrix x = random_matrix(4, 3, rng);
        Matrix y = kan_layer_forward(layer, x);
        for (double v : y.data()) CHECK(v == 0.0);
    }

    SUBCASE("rows are independent") {
        Matrix x(2, 3);
        for (int j = 0; j < 3; ++j) {
            x(0, j) = 0.1 * (j + 1);
            x(1, j) = 0.1 * (j + 1);
        }
        Matrix y = kan_layer_forward(layer, x);
        for (int q = 0; q < 2; ++q) CHECK(y(0, q) == y(1, q));
    }

    SUBCASE("1x1 layer reduces to evaluate_univariate") {
        KanLayer single = kan_layer_init(1, 1, grid, 3);
        Matrix x(1, 1);
        x(0, 0) = 0.5;
        Matrix y = kan_layer_forward(single, x);
        std::vector<double> coeffs(single.coeffs.begin(), single.coeffs.end());
        const double expected = evaluate_univariate(grid, single.base_weights(0, 0),
                                                    single.spline_weights(0, 0), coeffs, 0.5);
        CHECK(y(0, 0) == doctest::Approx(expected).epsilon(1e-15));
    }

    SUBCASE("width mismatch throws") {
        Matrix x(1, 4);
        CHECK_THROWS_WITH_AS(kan_layer_forward(layer, x), doctest::Contains("shape-mismatch"),
                             std::invalid_argument);
    }
}

TEST_CASE("layer gradients match finite differences") {
    SplineGrid grid = make_grid(-3.0, 3.0, 4, 3);
    KanLayer layer = kan_layer_init(3, 2, grid, 17);
    Rng rng(18);
    Matrix x = random_matrix(5, 3, rng, -2.0, 2.0);
    Matrix target = random_matrix(5, 2, rng);

    // loss = 0.5 * sum (out - target)^2
    auto loss = [&]() {
        Matrix out = kan_layer_forward(layer, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            acc += 0.5 * d * d;
        }
        return acc;
    };

    KanLayerCache cache;
    Matrix out = kan_layer_forward(layer, x, cache);
    Matrix grad_out(5, 2);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        grad_out.data()[i] = out.data()[i] - target.data()[i];
    }
    KanLayerGrads grads = kan_layer_grads_like(layer);
    Matrix grad_in = kan_layer_backward(layer, cache, grad_out, grads);

    std::vector<double> flat;
    flat.insert(flat.end(), grads.base_weights.data().begin(), grads.base_weights.data().end());
    flat.insert(flat.end(), grads.spline_weights.data().begin(),
                grads.spline_weights.data().end());
    flat.insert(flat.end(), grads.coeffs.begin(), grads.coeffs.end());

    auto views = layer_views(layer);
    auto stats = finite_diff_check(views, flat, loss);
    CHECK(stats.max_rel_err < 1e-4);

    // input gradients through the same oracle
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        const double saved = x.data()[i];
        const double h = 1e-5;
        x.data()[i] = saved + h;
        const double hi = loss();
        x.data()[i] = saved - h;
        const double lo = loss();
        x.data()[i] = saved;
        const double fd = (hi - lo) / (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(grad_in.data()[i]), 1e-8});
        CHECK(std::fabs(fd - grad_in.data()[i]) / denom < 1e-4);
    }
}

TEST_CASE("batch norm train mode normalizes and tracks running stats") {
    BatchNormState bn = batch_norm_init(2, 0.1, 1e-12);
    Matrix x(4, 2);
    const double rows[4][2] = {{1.0, -3.0}, {2.0, 0.5}, {4.0, 2.0}, {7.0, 9.0}};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 2; ++j) x(i, j) = rows[i][j];
    }

    SUBCASE("gamma=1 beta=0 gives zero column means") {
        Matrix y = batch_norm_forward(bn, x, Mode::Train);
        for (int j = 0; j < 2; ++j) {
            double mean = 0.0;
            for (int i = 0; i < 4; ++i) mean += y(i, j);
            CHECK(std::fabs(mean / 4.0) < 1e-10);
        }
    }

    SUBCASE("gamma=2 beta=1: mean 1, sample variance 4B/(B-1)") {
        bn.gamma = {2.0, 2.0};
        bn.beta = {1.0, 1.0};
        Matrix y = batch_norm_forward(bn, x, Mode::Train);
        for (int j = 0; j < 2; ++j) {
            double mean = 0.0;
            for (int i = 0; i < 4; ++i) mean += y(i, j);
            mean /= 4.0;
            CHECK(mean == doctest::Approx(1.0).epsilon(1e-9));
            double var = 0.0;
            for (int i = 0; i < 4; ++i) var += (y(i, j) - mean) * (y(i, j) - mean);
            var /= 3.0;  // sample variance over population-normalized values
            CHECK(var == doctest::Approx(4.0 * 4.0 / 3.0).epsilon(1e-6));
        }
    }

    SUBCASE("eval mode is pure") {
        batch_norm_forward(bn, x, Mode::Train);
        BatchNormState snapshot = bn;
        Matrix y1 = batch_norm_forward(bn, x, Mode::Eval);
        Matrix y2 = batch_norm_forward(bn, x, Mode::Eval);
        CHECK(y1 == y2);
        CHECK(bn.running_mean == snapshot.running_mean);
        CHECK(bn.running_var == snapshot.running_var);
    }

    SUBCASE("single-row train batch rejected") {
        Matrix one(1, 2);
        CHECK_THROWS_WITH_AS(batch_norm_forward(bn, one, Mode::Train),
                             doctest::Contains("batch-too-small"), std::invalid_argument);
    }
}

TEST_CASE("batch norm backward matches finite differences") {
    BatchNormState bn = batch_norm_init(3);
    Rng rng(5);
    Matrix x = random_matrix(6, 3, rng, -2.0, 2.0);
    Matrix target = random_matrix(6, 3, rng);
    bn.gamma = {1.3, 0.7, 2.0};
    bn.beta = {0.1, -0.4, 0.0};

    auto loss = [&]() {
        BatchNormState scratch = bn;  // keep running stats fixed across evals
        Matrix out = batch_norm_forward(scratch, x, Mode::Train);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            acc += 0.5 * d * d;
        }
        return acc;
    };

    BatchNormState scratch = bn;
    BatchNormCache cache;
    Matrix out = batch_norm_forward(scratch, x, Mode::Train, cache);
    Matrix grad_out(6, 3);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        grad_out.data()[i] = out.data()[i] - target.data()[i];
    }
    BatchNormGrads grads;
    Matrix grad_in = batch_norm_backward(bn, cache, grad_out, Mode::Train, grads);

    std::vector<ParamView> views = {
        {"gamma", bn.gamma.data(), bn.gamma.size()},
        {"beta", bn.beta.data(), bn.beta.size()},
    };
    std::vector<double> flat;
    flat.insert(flat.end(), grads.gamma.begin(), grads.gamma.end());
    flat.insert(flat.end(), grads.beta.begin(), grads.beta.end());
    auto stats = finite_diff_check(views, flat, loss);
    CHECK(stats.max_rel_err < 1e-4);

    for (std::size_t i = 0; i < x.data().size(); ++i) {
        const double saved = x.data()[i];
        const double h = 1e-5;
        x.data()[i] = saved + h;
        const double hi = loss();
        x.data()[i] = saved - h;
        const double lo = loss();
        x.data()[i] = saved;
        const double fd = (hi - lo) / (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(grad_in.data()[i]), 1e-8});
        CHECK(std::fabs(fd - grad_in.data()[i]) / denom < 1e-4);
    }
}

TEST_CASE("dropout contract") {
    Rng rng(1);
    Matrix x = random_matrix(10, 10, rng);

    SUBCASE("rate 0 and eval mode are the identity") {
        Rng r1(7), r2(7);
        CHECK(dropout(x, 0.0, Mode::Train, r1) == x);
        CHECK(dropout(x, 0.5, Mode::Eval, r2) == x);
    }

    SUBCASE("kept fraction obeys the rate") {
        Matrix big(100, 1000, 1.0);
        Rng r(123);
        Matrix y = dropout(big, 0.5, Mode::Train, r);
        std::size_t kept = 0;
        for (double v : y.data()) {
            if (v != 0.0) {
                ++kept;
                CHECK(v == doctest::Approx(2.0));
            }
        }
        const double fraction = static_cast<double>(kept) / static_cast<double>(y.data().size());
        CHECK(fraction == doctest::Approx(0.5).epsilon(0.02));
    }

    SUBCASE("deterministic per seed") {
        Rng r1(9), r2(9);
        CHECK(dropout(x, 0.3, Mode::Train, r1) == dropout(x, 0.3, Mode::Train, r2));
    }

    SUBCASE("invalid rate") {
        Rng r(1);
        CHECK_THROWS_WITH_AS(dropout(x, 1.0, Mode::Train, r), doctest::Contains("invalid-rate"),
                             std::invalid_argument);
    }
}

TEST_CASE("softmax cross entropy values") {
    SUBCASE("uniform logits, C=4") {
        Matrix logits(2, 4, 0.0);
        auto r = softmax_cross_entropy(logits, {1, 3});
        CHECK(r.loss == doctest::Approx(1.3862943611198906).epsilon(1e-12));
        for (std::size_t b = 0; b < 2; ++b) {
            double sum = 0.0;
            for (int c = 0; c < 4; ++c) sum += r.probabilities(b, c);
            CHECK(std::fabs(sum - 1.0) < 1e-12);
        }
    }

    SUBCASE("extreme logits stay finite") {
        Matrix logits(1, 2);
        logits(0, 0) = 1e4;
        logits(0, 1) = 0.0;
        auto r = softmax_cross_entropy(logits, {0});
        CHECK(std::isfinite(r.loss));
        CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("hand-computed three-class case") {
        Matrix logits(1, 3);
        logits(0, 0) = 1.0;
        logits(0, 1) = 2.0;
        logits(0, 2) = 3.0;
        auto r = softmax_cross_entropy(logits, {2});
        CHECK(r.loss == doctest::Approx(0.4076059644443804).epsilon(1e-12));
    }

    SUBCASE("label out of range") {
        Matrix logits(1, 3, 0.0);
        CHECK_THROWS_WITH_AS(softmax_cross_entropy(logits, {3}),
                             doctest::Contains("label-out-of-range"), std::invalid_argument);
    }

    SUBCASE("probability rows sum to one for random logits") {
        Rng rng(77);
        for (int rep = 0; rep < 50; ++rep) {
            Matrix logits = random_matrix(3, 5, rng, -50.0, 50.0);
            auto r = softmax_cross_entropy(logits, {0, 1, 2});
            for (std::size_t b = 0; b < 3; ++b) {
                double sum = 0.0;
                for (int c = 0; c < 5; ++c) {
                    CHECK(r.probabilities(b, c) >= 0.0);
                    sum += r.probabilities(b, c);
                }
                CHECK(std::fabs(sum - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("duplicated batch leaves mean-loss gradients unchanged") {
    SplineGrid grid = make_grid(-3.0, 3.0, 4, 3);
    KanLayer layer = kan_layer_init(3, 2, grid, 8);
    Rng rng(9);
    Matrix x = random_matrix(4, 3, rng);
    std::vector<int> labels{0, 1, 0, 1};

    auto grads_for = [&](const Matrix& input, const std::vector<int>& y) {
        KanLayerCache cache;
        Matrix logits = kan_layer_forward(layer, input, cache);
        auto sm = softmax_cross_entropy(logits, y);
        Matrix grad = softmax_cross_entropy_backward(sm, y);
        KanLayerGrads g = kan_layer_grads_like(layer);
        kan_layer_backward(layer, cache, grad, g);
        return g;
    };

    Matrix doubled(8, 3);
    std::vector<int> doubled_labels;
    for (int i = 0; i < 4; ++i) {
        for (int rep = 0; rep < 2; ++rep) {
            const int row = 2 * i + rep;
            for (int j = 0; j < 3; ++j) doubled(row, j) = x(i, j);
            doubled_labels.push_back(labels[i]);
        }
    }
    KanLayerGrads a = grads_for(x, labels);
    KanLayerGrads b = grads_for(doubled, doubled_labels);
    for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
        CHECK(a.coeffs[i] == doctest::Approx(b.coeffs[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < a.base_weights.data().size(); ++i) {
        CHECK(a.base_weights.data()[i] == doctest::Approx(b.base_weights.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("adam step algebra") {
    SUBCASE("zero gradients, no decay: parameters unchanged") {
        std::vector<double> p{1.0, -2.0, 3.5};
        std::vector<ParamView> views{{"p", p.data(), p.size()}};
        AdamState state = adam_init(3);
        std::vector<double> g{0.0, 0.0, 0.0};
        adam_step(views, g, state, 0.01, 0.0);
        CHECK(p == std::vector<double>{1.0, -2.0, 3.5});
        CHECK(state.step_count == 1);
    }

    SUBCASE("first step moves by ~lr per entry") {
        std::vector<double> p{0.0, 0.0};
        std::vector<ParamView> views{{"p", p.data(), p.size()}};
        AdamState state = adam_init(2);
        std::vector<double> g{0.5, -2.0};
        adam_step(views, g, state, 0.01, 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double expected = -0.01 * g[i] / (std::fabs(g[i]) + state.epsilon);
            CHECK(p[i] == doctest::Approx(expected).epsilon(1e-9));
        }
    }

    SUBCASE("decoupled decay with zero gradient scales parameters") {
        std::vector<double> p{2.0};
        std::vector<ParamView> views{{"p", p.data(), p.size()}};
        AdamState state = adam_init(1);
        std::vector<double> g{0.0};
        adam_step(views, g, state, 0.01, 0.1);
        CHECK(p[0] == doctest::Approx(2.0 * (1.0 - 0.001)).epsilon(1e-12));
    }

    SUBCASE("shape mismatch") {
        std::vector<double> p{1.0};
        std::vector<ParamView> views{{"p", p.data(), p.size()}};
        AdamState state = adam_init(2);
        std::vector<double> g{0.0};
        CHECK_THROWS_WITH_AS(adam_step(views, g, state, 0.01, 0.0),
                             doctest::Contains("shape-mismatch"), std::invalid_argument);
    }
}

// Expressivity smoke: a 2-layer KAN of width 2d+1 fits f(x1,x2) = x1*x2.
TEST_CASE("two-layer KAN fits a product function") {
    SplineGrid grid = make_grid(-2.0, 2.0, 5, 3);
    KanLayer l1 = kan_layer_init(2, 5, grid, 100);
    KanLayer l2 = kan_layer_init(5, 1, grid, 101);

    Rng rng(555);
    const int n = 256;
    Matrix x = random_matrix(n, 2, rng);
    std::vector<double> target(n);
    for (int i = 0; i < n; ++i) target[i] = x(i, 0) * x(i, 1);

    std::vector<ParamView> views = {
        {"l1.base", l1.base_weights.data().data(), l1.base_weights.data().size()},
        {"l1.spline", l1.spline_weights.data().data(), l1.spline_weights.data().size()},
        {"l1.coeffs", l1.coeffs.data(), l1.coeffs.size()},
        {"l2.base", l2.base_weights.data().data(), l2.base_weights.data().size()},
        {"l2.spline", l2.spline_weights.data().data(), l2.spline_weights.data().size()},
        {"l2.coeffs", l2.coeffs.data(), l2.coeffs.size()},
    };
    std::size_t total = 0;
    for (const auto& v : views) total += v.size;
    AdamState adam = adam_init(total);

    double mse = 0.0;
    for (int step = 0; step < 2000; ++step) {
        KanLayerCache c1, c2;
        Matrix h = kan_layer_forward(l1, x, c1);
        Matrix out = kan_layer_forward(l2, h, c2);
        Matrix grad(n, 1);
        mse = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = out(i, 0) - target[i];
            mse += d * d;
            grad(i, 0) = 2.0 * d / n;
        }
        mse /= n;
        if (mse <= 5e-4) break;
        KanLayerGrads g2 = kan_layer_grads_like(l2);
        Matrix gh = kan_layer_backward(l2, c2, grad, g2);
        KanLayerGrads g1 = kan_layer_grads_like(l1);
        kan_layer_backward(l1, c1, gh, g1);
        std::vector<double> flat;
        auto append = [&flat](const std::vector<double>& v) {
            flat.insert(flat.end(), v.begin(), v.end());
        };
        append(g1.base_weights.data());
        append(g1.spline_weights.data());
        append(g1.coeffs);
        append(g2.base_weights.data());
        append(g2.spline_weights.data());
        append(g2.coeffs);
        adam_step(views, flat, adam, 0.02, 0.0);
    }
    CHECK(mse <= 1e-3);
}
