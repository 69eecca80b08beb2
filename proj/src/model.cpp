#include "mogkan/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "mogkan/data.hpp"
#include "mogkan/metrics.hpp"

namespace mogkan {

namespace {

using nlohmann::json;

Matrix reshape(Matrix&& m, std::size_t rows, std::size_t cols) {
    if (m.rows() * m.cols() != rows * cols) {
        throw std::logic_error("reshape size mismatch");
    }
    Matrix out(0, 0);
    out = Matrix(rows, cols);
    out.data() = std::move(m.data());
    return out;
}

// Aggregation over the graph applied independently to each of the
// `channels` values a node carries. Linear, so the backward pass is the
// same stencil with mean weights attached to the source node.
Matrix aggregate_channels(const std::vector<std::vector<int>>& neighbors, const Matrix& values,
                          int channels, Aggregation mode) {
    const std::size_t b_count = values.rows();
    const std::size_t num_nodes = neighbors.size();
    Matrix out(b_count, values.cols());
    for (std::size_t b = 0; b < b_count; ++b) {
        const double* in_row = values.row_ptr(b);
        double* out_row = out.row_ptr(b);
        for (std::size_t v = 0; v < num_nodes; ++v) {
            const auto& neigh = neighbors[v];
            const double w = mode == Aggregation::Mean ? 1.0 / static_cast<double>(neigh.size()) : 1.0;
            for (int ch = 0; ch < channels; ++ch) {
                double sum = 0.0;
                for (int u : neigh) sum += in_row[u * channels + ch];
                out_row[v * channels + ch] = sum * w;
            }
        }
    }
    return out;
}

Matrix aggregate_channels_backward(const std::vector<std::vector<int>>& neighbors,
                                   const Matrix& grad_out, int channels, Aggregation mode) {
    const std::size_t b_count = grad_out.rows();
    const std::size_t num_nodes = neighbors.size();
    Matrix grad_in(b_count, grad_out.cols());
    for (std::size_t b = 0; b < b_count; ++b) {
        const double* go_row = grad_out.row_ptr(b);
        double* gi_row = grad_in.row_ptr(b);
        for (std::size_t v = 0; v < num_nodes; ++v) {
            const auto& neigh = neighbors[v];
            const double w = mode == Aggregation::Mean ? 1.0 / static_cast<double>(neigh.size()) : 1.0;
            for (int ch = 0; ch < channels; ++ch) {
                const double g = go_row[v * channels + ch] * w;
                for (int u : neigh) gi_row[u * channels + ch] += g;
            }
        }
    }
    return grad_in;
}

// First-layer bank: input column p belongs to node p / channels; its
// functions feed only that node's output channels (no cross-node sum).
Matrix grouped_forward(const KanLayer& layer, const Matrix& inputs, int in_channels,
                       KanLayerCache* cache) {
    const std::size_t b_count = inputs.rows();
    const std::size_t in = inputs.cols();
    const int m = layer.grid.num_basis();
    const int width = layer.out_dim;
    const std::size_t num_nodes = in / in_channels;
    Matrix out(b_count, num_nodes * width);
    std::vector<double> basis_row(m);
    if (cache) {
        cache->inputs = inputs;
        cache->basis.resize(b_count * in * m);
        cache->basis_deriv.resize(b_count * in * m);
    }
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t p = 0; p < in; ++p) {
            const double x = inputs(b, p);
            const std::size_t v = p / in_channels;
            std::vector<double> vals = basis_values(layer.grid, x);
            const double sil = silu(x);
            if (cache) {
                std::vector<double> ders = basis_derivatives(layer.grid, x);
                std::copy(vals.begin(), vals.end(), cache->basis.data() + (b * in + p) * m);
                std::copy(ders.begin(), ders.end(), cache->basis_deriv.data() + (b * in + p) * m);
            }
            for (int q = 0; q < width; ++q) {
                const double* c = layer.coeffs.data() + layer.coeff_index(q, static_cast<int>(p), 0);
                double spline = 0.0;
                for (int j = 0; j < m; ++j) spline += c[j] * vals[j];
                out(b, v * width + q) +=
                    layer.base_weights(q, p) * sil + layer.spline_weights(q, p) * spline;
            }
        }
    }
    return out;
}

Matrix grouped_backward(const KanLayer& layer, const KanLayerCache& cache, const Matrix& grad_out,
                        int in_channels, KanLayerGrads& grads) {
    const std::size_t b_count = cache.inputs.rows();
    const std::size_t in = cache.inputs.cols();
    const int m = layer.grid.num_basis();
    const int width = layer.out_dim;
    Matrix grad_in(b_count, in);
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t p = 0; p < in; ++p) {
            const double x = cache.inputs(b, p);
            const std::size_t v = p / in_channels;
            const double sil = silu(x);
            const double dsil = silu_derivative(x);
            const double* bv = cache.basis.data() + (b * in + p) * m;
            const double* bd = cache.basis_deriv.data() + (b * in + p) * m;
            double gx = 0.0;
            for (int q = 0; q < width; ++q) {
                const double go = grad_out(b, v * width + q);
                if (go == 0.0) continue;
                const std::size_t ci = layer.coeff_index(q, static_cast<int>(p), 0);
                const double* c = layer.coeffs.data() + ci;
                double* gc = grads.coeffs.data() + ci;
                const double sw = layer.spline_weights(q, p);
                double spline = 0.0, dspline = 0.0;
                for (int j = 0; j < m; ++j) {
                    spline += c[j] * bv[j];
                    dspline += c[j] * bd[j];
                    gc[j] += go * sw * bv[j];
                }
                grads.base_weights(q, p) += go * sil;
                grads.spline_weights(q, p) += go * spline;
                gx += go * (layer.base_weights(q, p) * dsil + sw * dspline);
            }
            grad_in(b, p) = gx;
        }
    }
    return grad_in;
}

void validate_finite(const std::vector<double>& values, const std::string& what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("non-finite-input: " + what);
        }
    }
}

}  // namespace

struct Model::ForwardCaches {
    std::vector<KanLayerCache> trunk_kan;
    std::vector<BatchNormCache> trunk_bn;
    std::vector<DropoutMask> trunk_dropout;
    std::vector<KanLayerCache> head;
    Matrix logits;
};

Model::Model(const ModelConfig& config, Graph graph) : config_(config), graph_(std::move(graph)) {
    if (config_.num_features < 1 || config_.num_classes < 1) {
        throw std::invalid_argument("invalid-size: num_features and num_classes must be >= 1");
    }
    if (config_.channels_per_node < 1) {
        throw std::invalid_argument("invalid-size: channels_per_node must be >= 1");
    }
    if (config_.graph_layers < 0) {
        throw std::invalid_argument("invalid-size: graph_layers must be >= 0");
    }
    if (!(config_.dropout_rate >= 0.0 && config_.dropout_rate < 1.0)) {
        throw std::invalid_argument("invalid-rate: dropout_rate must be in [0,1)");
    }
    if (graph_.num_nodes() != config_.num_features) {
        throw std::invalid_argument("graph-size-mismatch: graph has " +
                                    std::to_string(graph_.num_nodes()) + " nodes, config expects " +
                                    std::to_string(config_.num_features));
    }
    if (config_.graph_layers > 0 && !graph_.self_loops) {
        throw std::invalid_argument("graph-size-mismatch: graph layers need a self-looped graph");
    }
    if (config_.hidden_width == 0) {
        config_.hidden_width = 2 * config_.num_features + 1;
    }
    if (config_.hidden_width < 1) {
        throw std::invalid_argument("invalid-size: hidden_width must be >= 1");
    }
    for (int w : config_.head_widths) {
        if (w < 1) throw std::invalid_argument("invalid-size: head widths must be >= 1");
    }
    neighbors_ = adjacency_lists(graph_);

    const SplineGrid grid =
        make_grid(config_.grid_min, config_.grid_max, config_.grid_intervals, config_.grid_degree);
    const int d = config_.num_features;
    const int c0 = config_.channels_per_node;
    const int width = config_.hidden_width;

    for (int l = 0; l < config_.graph_layers; ++l) {
        GraphLayer layer;
        const int in_dim = l == 0 ? d * c0 : width;
        layer.kan = kan_layer_init(in_dim, width, grid, split_seed(config_.seed, l));
        layer.bn = batch_norm_init(width);
        trunk_.push_back(std::move(layer));
    }
    int head_in = config_.graph_layers > 0 ? width : d * c0;
    std::vector<int> chain{head_in};
    chain.insert(chain.end(), config_.head_widths.begin(), config_.head_widths.end());
    chain.push_back(config_.num_classes);
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        head_.push_back(
            kan_layer_init(chain[i], chain[i + 1], grid, split_seed(config_.seed, 1000 + i)));
    }
}

const KanLayer& Model::first_layer() const {
    if (!trunk_.empty()) return trunk_.front().kan;
    if (!head_.empty()) return head_.front();
    throw std::logic_error("model has no layers");
}

Matrix Model::forward(const Matrix& features, Mode mode) {
    Rng rng(0);
    return forward_impl(features, mode, &rng, nullptr);
}

Matrix Model::forward(const Matrix& features, Mode mode, Rng& dropout_rng) {
    return forward_impl(features, mode, &dropout_rng, nullptr);
}

std::vector<int> Model::predict(const Matrix& features) {
    const Matrix probs = forward(features, Mode::Eval);
    std::vector<int> labels(probs.rows());
    for (std::size_t b = 0; b < probs.rows(); ++b) {
        int best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c) {
            if (probs(b, c) > probs(b, best)) best = static_cast<int>(c);
        }
        labels[b] = best;
    }
    return labels;
}

Matrix Model::forward_impl(const Matrix& features, Mode mode, Rng* dropout_rng,
                           ForwardCaches* caches) {
    const int d = config_.num_features;
    const int c0 = config_.channels_per_node;
    const int width = config_.hidden_width;
    if (static_cast<int>(features.cols()) != d * c0) {
        throw std::invalid_argument("shape-mismatch: expected input width " +
                                    std::to_string(d * c0));
    }
    validate_finite(features.data(), "model input must be finite");
    const std::size_t b_count = features.rows();

    Matrix h = features;
    int channels = c0;
    for (std::size_t l = 0; l < trunk_.size(); ++l) {
        GraphLayer& layer = trunk_[l];
        Matrix z = aggregate_channels(neighbors_, h, channels, config_.aggregation);
        Matrix t;
        KanLayerCache* cache = caches ? &caches->trunk_kan[l] : nullptr;
        if (l == 0) {
            t = grouped_forward(layer.kan, z, c0, cache);
        } else {
            Matrix stacked = reshape(std::move(z), b_count * d, width);
            Matrix out = cache ? kan_layer_forward(layer.kan, stacked, *cache)
                               : kan_layer_forward(layer.kan, stacked);
            t = reshape(std::move(out), b_count, d * width);
        }
        {
            Matrix stacked = reshape(std::move(t), b_count * d, width);
            BatchNormCache bn_local;
            BatchNormCache& bn_cache = caches ? caches->trunk_bn[l] : bn_local;
            Matrix normed = batch_norm_forward(layer.bn, stacked, mode, bn_cache);
            t = reshape(std::move(normed), b_count, d * width);
        }
        DropoutMask mask_local;
        DropoutMask& mask = caches ? caches->trunk_dropout[l] : mask_local;
        h = dropout(t, config_.dropout_rate, mode, *dropout_rng, mask);
        channels = width;
    }

    Matrix pooled;
    if (!trunk_.empty()) {
        pooled = Matrix(b_count, width);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t b = 0; b < b_count; ++b) {
            for (int q = 0; q < width; ++q) {
                double sum = 0.0;
                for (int v = 0; v < d; ++v) sum += h(b, v * width + q);
                pooled(b, q) = sum * inv_d;
            }
        }
    } else {
        pooled = std::move(h);
    }

    for (std::size_t i = 0; i < head_.size(); ++i) {
        pooled = caches ? kan_layer_forward(head_[i], pooled, caches->head[i])
                        : kan_layer_forward(head_[i], pooled);
    }
    if (caches) caches->logits = pooled;
    Matrix probs(b_count, config_.num_classes);
    for (std::size_t b = 0; b < b_count; ++b) {
        double max_logit = pooled(b, 0);
        for (int c = 1; c < config_.num_classes; ++c) max_logit = std::max(max_logit, pooled(b, c));
        double denom = 0.0;
        for (int c = 0; c < config_.num_classes; ++c) denom += std::exp(pooled(b, c) - max_logit);
        for (int c = 0; c < config_.num_classes; ++c) {
            probs(b, c) = std::exp(pooled(b, c) - max_logit) / denom;
        }
    }
    return probs;
}

double Model::loss_and_grad(const Matrix& features, const std::vector<int>& labels,
                            Rng& dropout_rng, std::vector<double>& grads) {
    const int d = config_.num_features;
    const int c0 = config_.channels_per_node;
    const int width = config_.hidden_width;
    const std::size_t b_count = features.rows();
    if (labels.size() != b_count) {
        throw std::invalid_argument("shape-mismatch: one label per row required");
    }

    ForwardCaches caches;
    caches.trunk_kan.resize(trunk_.size());
    caches.trunk_bn.resize(trunk_.size());
    caches.trunk_dropout.resize(trunk_.size());
    caches.head.resize(head_.size());
    forward_impl(features, Mode::Train, &dropout_rng, &caches);
    const SoftmaxResult sm = softmax_cross_entropy(caches.logits, labels);

    // Backward.
    std::vector<KanLayerGrads> trunk_grads;
    std::vector<BatchNormGrads> bn_grads(trunk_.size());
    for (const auto& layer : trunk_) trunk_grads.push_back(kan_layer_grads_like(layer.kan));
    std::vector<KanLayerGrads> head_grads;
    for (const auto& layer : head_) head_grads.push_back(kan_layer_grads_like(layer));

    Matrix grad = softmax_cross_entropy_backward(sm, labels);
    for (std::size_t i = head_.size(); i-- > 0;) {
        grad = kan_layer_backward(head_[i], caches.head[i], grad, head_grads[i]);
    }
    if (!trunk_.empty()) {
        // Un-pool: spread each channel gradient evenly over the nodes.
        Matrix spread(b_count, static_cast<std::size_t>(d) * width);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t b = 0; b < b_count; ++b) {
            for (int q = 0; q < width; ++q) {
                const double g = grad(b, q) * inv_d;
                for (int v = 0; v < d; ++v) spread(b, v * width + q) = g;
            }
        }
        grad = std::move(spread);
        for (std::size_t l = trunk_.size(); l-- > 0;) {
            GraphLayer& layer = trunk_[l];
            grad = dropout_backward(caches.trunk_dropout[l], grad);
            {
                Matrix stacked = reshape(std::move(grad), b_count * d, width);
                Matrix back = batch_norm_backward(layer.bn, caches.trunk_bn[l], stacked,
                                                  Mode::Train, bn_grads[l]);
                grad = reshape(std::move(back), b_count, static_cast<std::size_t>(d) * width);
            }
            Matrix grad_z;
            if (l == 0) {
                grad_z = grouped_backward(layer.kan, caches.trunk_kan[l], grad, c0, trunk_grads[l]);
            } else {
                Matrix stacked = reshape(std::move(grad), b_count * d, width);
                Matrix back =
                    kan_layer_backward(layer.kan, caches.trunk_kan[l], stacked, trunk_grads[l]);
                grad_z = reshape(std::move(back), b_count, static_cast<std::size_t>(d) * width);
            }
            const int in_channels = l == 0 ? c0 : width;
            grad = aggregate_channels_backward(neighbors_, grad_z, in_channels, config_.aggregation);
        }
    }

    // Flatten gradients in params() order.
    grads.clear();
    grads.reserve(num_params());
    auto append = [&grads](const std::vector<double>& v) {
        grads.insert(grads.end(), v.begin(), v.end());
    };
    for (std::size_t l = 0; l < trunk_.size(); ++l) {
        append(trunk_grads[l].base_weights.data());
        append(trunk_grads[l].spline_weights.data());
        append(trunk_grads[l].coeffs);
        append(bn_grads[l].gamma);
        append(bn_grads[l].beta);
    }
    for (std::size_t i = 0; i < head_.size(); ++i) {
        append(head_grads[i].base_weights.data());
        append(head_grads[i].spline_weights.data());
        append(head_grads[i].coeffs);
    }
    return sm.loss;
}

std::vector<ParamView> Model::params() {
    std::vector<ParamView> views;
    for (std::size_t l = 0; l < trunk_.size(); ++l) {
        const std::string tag = "graph" + std::to_string(l);
        auto& layer = trunk_[l];
        views.push_back({tag + ".base", layer.kan.base_weights.data().data(),
                         layer.kan.base_weights.data().size()});
        views.push_back({tag + ".spline", layer.kan.spline_weights.data().data(),
                         layer.kan.spline_weights.data().size()});
        views.push_back({tag + ".coeffs", layer.kan.coeffs.data(), layer.kan.coeffs.size()});
        views.push_back({tag + ".gamma", layer.bn.gamma.data(), layer.bn.gamma.size()});
        views.push_back({tag + ".beta", layer.bn.beta.data(), layer.bn.beta.size()});
    }
    for (std::size_t i = 0; i < head_.size(); ++i) {
        const std::string tag = "head" + std::to_string(i);
        auto& layer = head_[i];
        views.push_back({tag + ".base", layer.base_weights.data().data(),
                         layer.base_weights.data().size()});
        views.push_back({tag + ".spline", layer.spline_weights.data().data(),
                         layer.spline_weights.data().size()});
        views.push_back({tag + ".coeffs", layer.coeffs.data(), layer.coeffs.size()});
    }
    return views;
}

std::size_t Model::num_params() const {
    std::size_t total = 0;
    for (const auto& layer : trunk_) {
        total += layer.kan.base_weights.data().size() + layer.kan.spline_weights.data().size() +
                 layer.kan.coeffs.size() + layer.bn.gamma.size() + layer.bn.beta.size();
    }
    for (const auto& layer : head_) {
        total += layer.base_weights.data().size() + layer.spline_weights.data().size() +
                 layer.coeffs.size();
    }
    return total;
}

std::vector<double> train(Model& model, const Matrix& features, const std::vector<int>& labels,
                          const TrainOptions& options) {
    const std::size_t n = features.rows();
    if (n == 0) throw std::invalid_argument("empty-dataset: nothing to train on");
    if (labels.size() != n) {
        throw std::invalid_argument("shape-mismatch: one label per sample required");
    }
    if (options.batch_size < 2) {
        throw std::invalid_argument("invalid-size: batch_size must be >= 2");
    }
    std::vector<double> trace;
    if (options.epochs <= 0) return trace;

    AdamState adam = adam_init(model.num_params());
    std::vector<ParamView> views = model.params();
    Rng shuffle_rng(split_seed(options.seed, 7001));
    Rng dropout_rng(split_seed(options.seed, 7002));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grads;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t start = 0;
        while (start < n) {
            std::size_t take = std::min<std::size_t>(options.batch_size, n - start);
            if (n - start - take == 1) take += 1;  // avoid a trailing singleton batch
            Matrix batch(take, features.cols());
            std::vector<int> batch_labels(take);
            for (std::size_t i = 0; i < take; ++i) {
                const std::size_t src = order[start + i];
                std::copy(features.row_ptr(src), features.row_ptr(src) + features.cols(),
                          batch.row_ptr(i));
                batch_labels[i] = labels[src];
            }
            const double loss = model.loss_and_grad(batch, batch_labels, dropout_rng, grads);
            adam_step(views, grads, adam, options.learning_rate, options.weight_decay);
            epoch_loss += loss * static_cast<double>(take);
            start += take;
        }
        trace.push_back(epoch_loss / static_cast<double>(n));
    }
    return trace;
}

namespace {

double cv_mean_accuracy(const Matrix& features, const std::vector<int>& labels, const Graph& graph,
                        const ModelConfig& config, const TrainOptions& options, int folds,
                        std::vector<double>& fold_accuracies) {
    const int num_classes = config.num_classes;
    FoldPlan plan = stratified_kfold(labels, folds, options.seed);
    fold_accuracies.clear();
    double sum = 0.0;
    for (int fold = 0; fold < folds; ++fold) {
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            (plan.assignments[i] == fold ? val_rows : train_rows).push_back(i);
        }
        Matrix train_x(train_rows.size(), features.cols());
        std::vector<int> train_y(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            std::copy(features.row_ptr(train_rows[i]),
                      features.row_ptr(train_rows[i]) + features.cols(), train_x.row_ptr(i));
            train_y[i] = labels[train_rows[i]];
        }
        Matrix val_x(val_rows.size(), features.cols());
        std::vector<int> val_y(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            std::copy(features.row_ptr(val_rows[i]),
                      features.row_ptr(val_rows[i]) + features.cols(), val_x.row_ptr(i));
            val_y[i] = labels[val_rows[i]];
        }
        auto [train_std, stats] = standardize(train_x);
        const Matrix val_std = apply_standardization(val_x, stats);

        ModelConfig fold_config = config;
        fold_config.seed = split_seed(config.seed, 40000 + fold);
        Model model(fold_config, graph);
        TrainOptions fold_options = options;
        fold_options.seed = split_seed(options.seed, 50000 + fold);
        train(model, train_std, train_y, fold_options);
        const std::vector<int> pred = model.predict(val_std);
        const double acc = accuracy(confusion(val_y, pred, num_classes));
        fold_accuracies.push_back(acc);
        sum += acc;
    }
    return sum / static_cast<double>(folds);
}

}  // namespace

GridSearchResult grid_search(const Matrix& features, const std::vector<int>& labels,
                             const Graph& graph, const ModelConfig& base,
                             const TrainOptions& train_options, const GridSearchSpace& space,
                             int folds) {
    if (space.learning_rates.empty() || space.weight_decays.empty() ||
        space.dropout_rates.empty() || space.hidden_widths.empty()) {
        throw std::invalid_argument("empty-space: every grid dimension needs >= 1 value");
    }
    GridSearchResult result;
    for (double lr : space.learning_rates) {
        for (double wd : space.weight_decays) {
            for (double rate : space.dropout_rates) {
                for (int width : space.hidden_widths) {
                    GridSearchEntry entry;
                    entry.learning_rate = lr;
                    entry.weight_decay = wd;
                    entry.dropout_rate = rate;
                    entry.hidden_width = width;
                    ModelConfig config = base;
                    config.dropout_rate = rate;
                    config.hidden_width = width;
                    TrainOptions options = train_options;
                    options.learning_rate = lr;
                    options.weight_decay = wd;
                    entry.mean_accuracy = cv_mean_accuracy(features, labels, graph, config,
                                                           options, folds, entry.fold_accuracies);
                    result.table.push_back(std::move(entry));
                }
            }
        }
    }
    auto better = [](const GridSearchEntry& a, const GridSearchEntry& b) {
        if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
        const auto key = [](const GridSearchEntry& e) {
            return std::make_tuple(e.weight_decay, e.dropout_rate, e.hidden_width, e.learning_rate);
        };
        return key(a) < key(b);
    };
    result.best = result.table.front();
    for (const auto& entry : result.table) {
        if (better(entry, result.best)) result.best = entry;
    }
    return result;
}

std::vector<ImportanceEntry> feature_importance(const Model& model) {
    const KanLayer& layer = model.first_layer();
    if (layer.in_dim != model.config().num_features * model.config().channels_per_node) {
        throw std::invalid_argument(
            "feature importance needs a first layer over the input features");
    }
    const int m = layer.grid.num_basis();
    std::vector<ImportanceEntry> entries(layer.in_dim);
    for (int p = 0; p < layer.in_dim; ++p) {
        double score = 0.0;
        for (int q = 0; q < layer.out_dim; ++q) {
            double coeff_sum = 0.0;
            const double* c = layer.coeffs.data() + layer.coeff_index(q, p, 0);
            for (int j = 0; j < m; ++j) coeff_sum += std::fabs(c[j]);
            score += std::fabs(layer.base_weights(q, p)) +
                     std::fabs(layer.spline_weights(q, p)) * coeff_sum;
        }
        entries[p] = {p, score};
    }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.feature_index < b.feature_index;
    });
    return entries;
}

std::vector<AnnotatedImportance> map_importance_to_genes(
    const std::vector<ImportanceEntry>& ranking, const std::vector<std::string>& feature_ids,
    std::istream& mapping_tsv) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(mapping_tsv, line)) {
        throw std::runtime_error("malformed-mapping-file: empty stream");
    }
    ++line_no;
    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t pos = s.find('\t', start);
            if (pos == std::string::npos) {
                fields.push_back(s.substr(start));
                break;
            }
            fields.push_back(s.substr(start, pos - start));
            start = pos + 1;
        }
        return fields;
    };
    if (!line.empty() && line.back() == '\r') {
        throw std::runtime_error("malformed-mapping-file: line 1: CRLF line ending");
    }
    const std::vector<std::string> header = split(line);
    int col_f = -1, col_name = -1, col_stable = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "feature_id") col_f = static_cast<int>(i);
        if (header[i] == "gene_name") col_name = static_cast<int>(i);
        if (header[i] == "gene_stable_id") col_stable = static_cast<int>(i);
    }
    if (col_f < 0 || col_name < 0) {
        throw std::runtime_error(
            "malformed-mapping-file: header must name feature_id and gene_name");
    }
    struct GeneInfo {
        std::string stable_id;
        std::string name;
    };
    std::unordered_map<std::string, GeneInfo> genes;
    while (std::getline(mapping_tsv, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') {
            throw std::runtime_error("malformed-mapping-file: line " + std::to_string(line_no) +
                                     ": CRLF line ending");
        }
        const std::vector<std::string> fields = split(line);
        if (fields.size() < header.size()) {
            throw std::runtime_error("malformed-mapping-file: line " + std::to_string(line_no) +
                                     ": too few columns");
        }
        GeneInfo info;
        info.name = fields[col_name];
        info.stable_id = col_stable >= 0 ? fields[col_stable] : "unmapped";
        genes[fields[col_f]] = std::move(info);
    }
    std::vector<AnnotatedImportance> out;
    out.reserve(ranking.size());
    for (const auto& entry : ranking) {
        AnnotatedImportance row;
        row.feature_id = feature_ids.at(entry.feature_index);
        row.score = entry.score;
        auto it = genes.find(row.feature_id);
        if (it != genes.end()) {
            row.gene_stable_id = it->second.stable_id;
            row.gene_name = it->second.name;
        } else {
            row.gene_stable_id = "unmapped";
            row.gene_name = "unmapped";
        }
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

json layer_to_json(const KanLayer& layer) {
    json j;
    j["in_dim"] = layer.in_dim;
    j["out_dim"] = layer.out_dim;
    j["base_weights"] = layer.base_weights.data();
    j["spline_weights"] = layer.spline_weights.data();
    j["coeffs"] = layer.coeffs;
    return j;
}

KanLayer layer_from_json(const json& j, const SplineGrid& grid) {
    KanLayer layer;
    layer.in_dim = j.at("in_dim").get<int>();
    layer.out_dim = j.at("out_dim").get<int>();
    layer.grid = grid;
    layer.base_weights = Matrix(layer.out_dim, layer.in_dim);
    layer.base_weights.data() = j.at("base_weights").get<std::vector<double>>();
    layer.spline_weights = Matrix(layer.out_dim, layer.in_dim);
    layer.spline_weights.data() = j.at("spline_weights").get<std::vector<double>>();
    layer.coeffs = j.at("coeffs").get<std::vector<double>>();
    const std::size_t expected =
        static_cast<std::size_t>(layer.out_dim) * layer.in_dim;
    if (layer.base_weights.data().size() != expected ||
        layer.spline_weights.data().size() != expected ||
        layer.coeffs.size() != expected * grid.num_basis()) {
        throw std::runtime_error("checkpoint layer arrays have wrong shapes");
    }
    return layer;
}

json bn_to_json(const BatchNormState& bn) {
    json j;
    j["dim"] = bn.dim;
    j["gamma"] = bn.gamma;
    j["beta"] = bn.beta;
    j["running_mean"] = bn.running_mean;
    j["running_var"] = bn.running_var;
    j["momentum"] = bn.momentum;
    j["epsilon"] = bn.epsilon;
    return j;
}

BatchNormState bn_from_json(const json& j) {
    BatchNormState bn;
    bn.dim = j.at("dim").get<int>();
    bn.gamma = j.at("gamma").get<std::vector<double>>();
    bn.beta = j.at("beta").get<std::vector<double>>();
    bn.running_mean = j.at("running_mean").get<std::vector<double>>();
    bn.running_var = j.at("running_var").get<std::vector<double>>();
    bn.momentum = j.at("momentum").get<double>();
    bn.epsilon = j.at("epsilon").get<double>();
    return bn;
}

}  // namespace

std::string save_checkpoint(const Model& model) {
    const ModelConfig& config = model.config();
    json j;
    j["format"] = "mogkan-checkpoint-v1";
    j["config"]["num_features"] = config.num_features;
    j["config"]["num_classes"] = config.num_classes;
    j["config"]["channels_per_node"] = config.channels_per_node;
    j["config"]["graph_layers"] = config.graph_layers;
    j["config"]["hidden_width"] = config.hidden_width;
    j["config"]["head_widths"] = config.head_widths;
    j["config"]["grid_min"] = config.grid_min;
    j["config"]["grid_max"] = config.grid_max;
    j["config"]["grid_intervals"] = config.grid_intervals;
    j["config"]["grid_degree"] = config.grid_degree;
    j["config"]["dropout_rate"] = config.dropout_rate;
    j["config"]["aggregation"] = config.aggregation == Aggregation::Mean ? "mean" : "sum";
    j["config"]["seed"] = config.seed;
    j["graph"]["node_ids"] = model.graph().node_ids;
    json edges = json::array();
    for (const auto& [a, b] : model.graph().edges) edges.push_back({a, b});
    j["graph"]["edges"] = std::move(edges);
    j["graph"]["self_loops"] = model.graph().self_loops;
    j["classes"] = model.class_names;
    if (model.standardization) {
        j["standardization"]["means"] = model.standardization->means;
        j["standardization"]["stds"] = model.standardization->stds;
    }
    json trunk = json::array();
    for (const auto& layer : model.trunk()) {
        json lj;
        lj["kan"] = layer_to_json(layer.kan);
        lj["bn"] = bn_to_json(layer.bn);
        trunk.push_back(std::move(lj));
    }
    j["trunk"] = std::move(trunk);
    json head = json::array();
    for (const auto& layer : model.head()) head.push_back(layer_to_json(layer));
    j["head"] = std::move(head);
    return j.dump(2) + "\n";
}

Model load_checkpoint(const std::string& json_text) {
    const json j = json::parse(json_text);
    if (j.at("format").get<std::string>() != "mogkan-checkpoint-v1") {
        throw std::runtime_error("unrecognized checkpoint format");
    }
    const json& cj = j.at("config");
    ModelConfig config;
    config.num_features = cj.at("num_features").get<int>();
    config.num_classes = cj.at("num_classes").get<int>();
    config.channels_per_node = cj.at("channels_per_node").get<int>();
    config.graph_layers = cj.at("graph_layers").get<int>();
    config.hidden_width = cj.at("hidden_width").get<int>();
    config.head_widths = cj.at("head_widths").get<std::vector<int>>();
    config.grid_min = cj.at("grid_min").get<double>();
    config.grid_max = cj.at("grid_max").get<double>();
    config.grid_intervals = cj.at("grid_intervals").get<int>();
    config.grid_degree = cj.at("grid_degree").get<int>();
    config.dropout_rate = cj.at("dropout_rate").get<double>();
    config.aggregation =
        cj.at("aggregation").get<std::string>() == "sum" ? Aggregation::Sum : Aggregation::Mean;
    config.seed = cj.at("seed").get<std::uint64_t>();

    Graph graph;
    graph.node_ids = j.at("graph").at("node_ids").get<std::vector<std::string>>();
    for (const auto& e : j.at("graph").at("edges")) {
        graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    graph.self_loops = j.at("graph").at("self_loops").get<bool>();

    Model model(config, std::move(graph));
    model.class_names = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("standardization")) {
        Standardization stats;
        stats.means = j.at("standardization").at("means").get<std::vector<double>>();
        stats.stds = j.at("standardization").at("stds").get<std::vector<double>>();
        model.standardization = std::move(stats);
    }
    const SplineGrid grid =
        make_grid(config.grid_min, config.grid_max, config.grid_intervals, config.grid_degree);
    const json& trunk = j.at("trunk");
    if (trunk.size() != model.trunk().size()) {
        throw std::runtime_error("checkpoint trunk depth differs from config");
    }
    for (std::size_t l = 0; l < model.trunk().size(); ++l) {
        model.trunk()[l].kan = layer_from_json(trunk[l].at("kan"), grid);
        model.trunk()[l].bn = bn_from_json(trunk[l].at("bn"));
    }
    const json& head = j.at("head");
    if (head.size() != model.head().size()) {
        throw std::runtime_error("checkpoint head depth differs from config");
    }
    for (std::size_t i = 0; i < model.head().size(); ++i) {
        model.head()[i] = layer_from_json(head[i], grid);
    }
    for (const auto& view : model.params()) {
        for (std::size_t i = 0; i < view.size; ++i) {
            if (!std::isfinite(view.values[i])) {
                throw std::runtime_error("checkpoint parameter " + view.name + " is not finite");
            }
        }
    }
    return model;
}

}  // namespace mogkan
