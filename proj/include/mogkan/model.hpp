#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mogkan/graph.hpp"
#include "mogkan/kan.hpp"
#include "mogkan/matrix.hpp"
#include "mogkan/selection.hpp"

namespace mogkan {

struct ModelConfig {
    int num_features = 0;      // d = graph node count
    int num_classes = 0;
    int channels_per_node = 1; // input channels per node; input width = d * channels
    int graph_layers = 1;
    int hidden_width = 0;      // 0 resolves to 2d+1 at init
    std::vector<int> head_widths;
    double grid_min = -3.0;
    double grid_max = 3.0;
    int grid_intervals = 5;
    int grid_degree = 3;
    double dropout_rate = 0.1;
    Aggregation aggregation = Aggregation::Mean;
    std::uint64_t seed = 0;
};

// Graph KAN classifier. Each graph layer aggregates neighbor values per
// channel, then applies a bank of univariate functions: the first layer owns
// one function column per input feature (this is where feature importance is
// read from), deeper layers share one channel-mixing bank across nodes.
// Batch norm over channels and dropout follow each graph layer. The readout
// mean-pools node channels and finishes with dense KAN head layers and a
// softmax. With graph_layers = 0 the head consumes the feature vector
// directly, giving a plain KAN.
class Model {
public:
    Model() = default;
    Model(const ModelConfig& config, Graph graph);

    const ModelConfig& config() const { return config_; }
    const Graph& graph() const { return graph_; }
    const std::vector<std::string>& feature_ids() const { return graph_.node_ids; }

    // B x (d * channels) standardized features -> B x C probabilities.
    Matrix forward(const Matrix& features, Mode mode);
    Matrix forward(const Matrix& features, Mode mode, Rng& dropout_rng);

    std::vector<int> predict(const Matrix& features);

    // Mean cross-entropy over the batch; fills flat gradients aligned with
    // params(). Runs in train mode (batch statistics, fresh dropout masks).
    double loss_and_grad(const Matrix& features, const std::vector<int>& labels,
                         Rng& dropout_rng, std::vector<double>& grads);

    // Trainable blocks in a stable order (graph layers, then head).
    std::vector<ParamView> params();
    std::size_t num_params() const;

    std::vector<std::string> class_names;
    std::optional<Standardization> standardization;

    // Internals exposed for tests and the importance extraction.
    struct GraphLayer {
        KanLayer kan;
        BatchNormState bn;
    };
    std::vector<GraphLayer>& trunk() { return trunk_; }
    std::vector<KanLayer>& head() { return head_; }
    const std::vector<GraphLayer>& trunk() const { return trunk_; }
    const std::vector<KanLayer>& head() const { return head_; }
    const KanLayer& first_layer() const;

private:
    ModelConfig config_;
    Graph graph_;
    std::vector<std::vector<int>> neighbors_;
    std::vector<GraphLayer> trunk_;
    std::vector<KanLayer> head_;

    struct ForwardCaches;
    Matrix forward_impl(const Matrix& features, Mode mode, Rng* dropout_rng,
                        ForwardCaches* caches);
};

struct TrainOptions {
    int epochs = 100;
    double learning_rate = 1e-2;
    double weight_decay = 1e-4;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

// Adam training with per-epoch mean loss trace. Deterministic given the
// option seed; epochs = 0 leaves the model untouched.
std::vector<double> train(Model& model, const Matrix& features, const std::vector<int>& labels,
                          const TrainOptions& options);

struct GridSearchSpace {
    std::vector<double> learning_rates;
    std::vector<double> weight_decays;
    std::vector<double> dropout_rates;
    std::vector<int> hidden_widths;
};

struct GridSearchEntry {
    double learning_rate = 0.0;
    double weight_decay = 0.0;
    double dropout_rate = 0.0;
    int hidden_width = 0;
    double mean_accuracy = 0.0;
    std::vector<double> fold_accuracies;
};

struct GridSearchResult {
    GridSearchEntry best;
    std::vector<GridSearchEntry> table;
};

// Exhaustive product of the space, scored by stratified k-fold CV mean
// accuracy (per-fold standardization on training statistics). Ties break by
// lower weight decay, then dropout, width, learning rate.
GridSearchResult grid_search(const Matrix& features, const std::vector<int>& labels,
                             const Graph& graph, const ModelConfig& base,
                             const TrainOptions& train_options, const GridSearchSpace& space,
                             int folds);

struct ImportanceEntry {
    int feature_index = 0;
    double score = 0.0;
};

// Per-feature sum over the first layer's function column:
//   sum_q |base(q,p)| + |spline(q,p)| * sum_j |coeff(q,p,j)|
// sorted descending, ties by feature index.
std::vector<ImportanceEntry> feature_importance(const Model& model);

struct AnnotatedImportance {
    std::string feature_id;
    std::string gene_stable_id;
    std::string gene_name;
    double score = 0.0;
};

// Gene mapping TSV with header feature_id, gene_name and optional
// gene_stable_id. Features without an entry are annotated "unmapped", never
// dropped.
std::vector<AnnotatedImportance> map_importance_to_genes(
    const std::vector<ImportanceEntry>& ranking, const std::vector<std::string>& feature_ids,
    std::istream& mapping_tsv);

// Single-document JSON checkpoint: config, graph, grids and all parameter
// arrays. load(save(m)) reproduces outputs bitwise.
std::string save_checkpoint(const Model& model);
Model load_checkpoint(const std::string& json_text);

}  // namespace mogkan
