// mogkan: synthetic data generation, feature selection, graph construction,
// cross-validated training and feature-importance reporting for graph
// Kolmogorov-Arnold classifiers.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mogkan/data.hpp"
#include "mogkan/graph.hpp"
#include "mogkan/matrix.hpp"
#include "mogkan/metrics.hpp"
#include "mogkan/model.hpp"
#include "mogkan/selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mogkan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

[[noreturn]] void config_error(const std::string& message) {
    throw std::invalid_argument("config: " + message);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

OmicsMatrix load_matrix_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        return load_matrix(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void load_labels_file(const fs::path& path, OmicsMatrix& matrix) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        load_labels(in, matrix);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

int worker_count(int folds) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    int workers = static_cast<int>(hw);
    if (const char* env = std::getenv("MOGKAN_THREADS")) {
        const int requested = std::atoi(env);
        if (requested >= 1) workers = requested;
    }
    return std::min(workers, folds);
}

// ---------------------------------------------------------------------------
// Run configuration (JSON file)

struct RunConfig {
    std::vector<std::string> matrices;
    std::string labels_path;
    std::vector<std::string> prefixes;
    std::string feature_list_path;  // optional subset from a selection run

    // In-config selection stages; each runs only if its key was present.
    bool run_welch = false;
    double p_threshold = 0.001;
    std::string positive_label;
    bool run_lasso = false;
    double lambda = 1.0;
    double tol = 1e-10;

    std::string interactions_path;  // empty: no graph, isolated fallback
    std::string mapping_path;       // empty: identity mapping by feature id
    int min_score = 400;
    int min_degree = 200;

    ModelConfig model;
    TrainOptions train;
    int folds = 5;
    std::string out_dir = "out";
};

RunConfig parse_run_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        config_error(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        config_error(path.string() + ": " + e.what());
    }
    RunConfig cfg;
    try {
        const json& data = j.at("data");
        cfg.matrices = data.at("matrices").get<std::vector<std::string>>();
        cfg.labels_path = data.value("labels", "");
        cfg.prefixes = data.value("prefixes", std::vector<std::string>{});
        cfg.feature_list_path = data.value("feature_list", "");

        if (j.contains("selection")) {
            const json& sel = j["selection"];
            cfg.run_welch = sel.contains("p_threshold");
            cfg.p_threshold = sel.value("p_threshold", cfg.p_threshold);
            cfg.positive_label = sel.value("positive_label", "");
            cfg.run_lasso = sel.contains("lambda");
            cfg.lambda = sel.value("lambda", cfg.lambda);
            cfg.tol = sel.value("tol", cfg.tol);
        }
        if (j.contains("graph")) {
            const json& graph = j["graph"];
            cfg.interactions_path = graph.value("interactions", "");
            cfg.mapping_path = graph.value("mapping", "");
            cfg.min_score = graph.value("min_score", cfg.min_score);
            cfg.min_degree = graph.value("min_degree", cfg.min_degree);
        }
        if (j.contains("model")) {
            const json& model = j["model"];
            cfg.model.channels_per_node = model.value("channels_per_node", 1);
            cfg.model.graph_layers = model.value("graph_layers", 1);
            cfg.model.hidden_width = model.value("hidden_width", 0);
            cfg.model.head_widths = model.value("head_widths", std::vector<int>{});
            cfg.model.grid_min = model.value("grid_min", -3.0);
            cfg.model.grid_max = model.value("grid_max", 3.0);
            cfg.model.grid_intervals = model.value("grid_intervals", 5);
            cfg.model.grid_degree = model.value("grid_degree", 3);
            cfg.model.dropout_rate = model.value("dropout_rate", 0.1);
            const std::string agg = model.value("aggregation", "mean");
            if (agg == "mean") {
                cfg.model.aggregation = Aggregation::Mean;
            } else if (agg == "sum") {
                cfg.model.aggregation = Aggregation::Sum;
            } else {
                config_error("model.aggregation must be mean or sum");
            }
            cfg.model.seed = model.value("seed", 0);
        }
        if (j.contains("train")) {
            const json& train = j["train"];
            cfg.train.epochs = train.value("epochs", 100);
            cfg.train.learning_rate = train.value("learning_rate", 1e-2);
            cfg.train.weight_decay = train.value("weight_decay", 1e-4);
            cfg.train.batch_size = train.value("batch_size", 32);
            cfg.train.seed = train.value("seed", 0);
            cfg.folds = train.value("folds", 5);
        }
        if (j.contains("output")) {
            cfg.out_dir = j["output"].value("directory", cfg.out_dir);
        }
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& e) {
        config_error(path.string() + ": " + e.what());
    }
    if (cfg.matrices.empty()) config_error("data.matrices must name at least one file");
    if (cfg.matrices.size() > 1 && cfg.prefixes.size() != cfg.matrices.size()) {
        config_error("data.prefixes must give one prefix per matrix");
    }
    if (cfg.folds < 2) config_error("train.folds must be >= 2");
    if (cfg.train.epochs < 0) config_error("train.epochs must be >= 0");
    if (cfg.train.batch_size < 2) config_error("train.batch_size must be >= 2");
    if (cfg.min_score < 0 || cfg.min_score > 1000) config_error("graph.min_score must be 0..1000");
    if (cfg.min_degree < 0) config_error("graph.min_degree must be >= 0");
    if (!(cfg.model.dropout_rate >= 0.0 && cfg.model.dropout_rate < 1.0)) {
        config_error("model.dropout_rate must be in [0,1)");
    }
    if (cfg.run_welch && !(cfg.p_threshold >= 0.0)) {
        config_error("selection.p_threshold must be >= 0");
    }
    if (cfg.run_lasso && (cfg.lambda < 0.0 || cfg.tol <= 0.0)) {
        config_error("selection.lambda must be >= 0 and selection.tol > 0");
    }
    return cfg;
}

struct PreparedData {
    OmicsMatrix matrix;
    LabelEncoding encoding;
    Graph graph;
    FeatureNodeMap feature_map;
};

PreparedData prepare(const RunConfig& cfg, bool need_labels) {
    PreparedData out;
    std::vector<OmicsMatrix> loaded;
    for (const auto& path : cfg.matrices) loaded.push_back(load_matrix_file(path));
    if (loaded.size() == 1) {
        out.matrix = std::move(loaded[0]);
    } else {
        out.matrix = integrate(loaded, cfg.prefixes);
        if (out.matrix.num_samples() == 0) {
            std::cerr << "warning: sample-id intersection is empty\n";
        }
    }
    if (!cfg.labels_path.empty()) load_labels_file(cfg.labels_path, out.matrix);

    if (!cfg.feature_list_path.empty()) {
        std::ifstream in(cfg.feature_list_path);
        if (!in) throw std::runtime_error("cannot read " + cfg.feature_list_path);
        std::vector<std::string> ids;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) ids.push_back(line);
        }
        out.matrix = select_features(out.matrix, ids);
    }

    // In-config selection stages run on the assembled matrix, before the
    // graph is attached to the surviving feature ids.
    if ((cfg.run_welch || cfg.run_lasso) && !out.matrix.labels) {
        throw std::runtime_error("missing-label: selection stages need labels");
    }
    if (cfg.run_welch) {
        const LabelEncoding enc = encode_labels(out.matrix);
        const std::string positive =
            cfg.positive_label.empty() ? enc.classes.front() : cfg.positive_label;
        if (std::find(enc.classes.begin(), enc.classes.end(), positive) == enc.classes.end()) {
            throw std::runtime_error("positive label '" + positive + "' not present in data");
        }
        std::vector<int> groups(out.matrix.num_samples());
        for (std::size_t i = 0; i < groups.size(); ++i) {
            groups[i] = (*out.matrix.labels)[i] == positive ? 0 : 1;
        }
        const std::vector<int> kept =
            welch_filter(out.matrix.values, groups, cfg.p_threshold);
        std::vector<std::string> ids;
        for (int j : kept) ids.push_back(out.matrix.feature_ids[j]);
        out.matrix = select_features(out.matrix, ids);
        std::cerr << "welch filter kept " << ids.size() << " features\n";
    }
    if (cfg.run_lasso) {
        const LabelEncoding enc = encode_labels(out.matrix);
        auto [x, stats] = standardize(out.matrix.values);
        std::vector<bool> keep(out.matrix.num_features(), false);
        const double n = static_cast<double>(out.matrix.num_samples());
        for (std::size_t c = 0; c < enc.classes.size(); ++c) {
            std::vector<double> response(out.matrix.num_samples());
            double mean = 0.0;
            for (std::size_t i = 0; i < response.size(); ++i) {
                response[i] = enc.codes[i] == static_cast<int>(c) ? 1.0 : 0.0;
                mean += response[i];
            }
            mean /= n;
            for (auto& v : response) v -= mean;
            for (int j : lasso_select(x, response, cfg.lambda, cfg.tol)) keep[j] = true;
        }
        std::vector<std::string> ids;
        for (std::size_t j = 0; j < keep.size(); ++j) {
            if (keep[j]) ids.push_back(out.matrix.feature_ids[j]);
        }
        out.matrix = select_features(out.matrix, ids);
        std::cerr << "lasso kept " << ids.size() << " features\n";
    }
    if (out.matrix.num_features() == 0) {
        throw std::runtime_error("selection removed every feature");
    }

    if (need_labels) {
        if (!out.matrix.labels) {
            throw std::runtime_error("missing-label: labels required (data.labels)");
        }
        out.encoding = encode_labels(out.matrix);
    }

    Graph base;
    if (!cfg.interactions_path.empty()) {
        std::ifstream in(cfg.interactions_path);
        if (!in) throw std::runtime_error("cannot read " + cfg.interactions_path);
        base = degree_filter(build_graph(parse_interactions(in), cfg.min_score), cfg.min_degree);
    }
    std::vector<std::pair<std::string, std::string>> mapping;
    if (!cfg.mapping_path.empty()) {
        std::ifstream in(cfg.mapping_path);
        if (!in) throw std::runtime_error("cannot read " + cfg.mapping_path);
        mapping = parse_mapping(in);
    } else {
        for (const auto& id : out.matrix.feature_ids) mapping.emplace_back(id, id);
    }
    auto [graph, fmap] = attach_features(base, out.matrix.feature_ids, mapping);
    out.graph = std::move(graph);
    out.feature_map = std::move(fmap);
    return out;
}

json report_to_json(const MetricsReport& report) {
    json j;
    j["accuracy"] = report.accuracy;
    j["macro_precision"] = report.macro_precision;
    j["macro_recall"] = report.macro_recall;
    j["macro_f1"] = report.macro_f1;
    j["undefined_classes"] = report.undefined_classes;
    return j;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    int samples = 0;
    int features = 0;
    int classes = 2;
    int informative = 0;
    double density = 0.1;
    double noise = 0.5;
    std::uint64_t seed = 0;
    std::string out_dir = "synth";
};

int cmd_synth(const SynthArgs& args) {
    SyntheticDataset ds;
    try {
        ds = synthesize(args.samples, args.features, args.classes, args.informative, args.density,
                        args.noise, args.seed);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        std::ostringstream matrix_csv, labels_csv, graph_tsv, truth_tsv;
        save_matrix(matrix_csv, ds.matrix);
        save_labels(labels_csv, ds.matrix);
        save_interactions(graph_tsv, ds.interactions);
        for (int idx : ds.informative_features) {
            truth_tsv << ds.matrix.feature_ids[idx] << '\n';
        }
        const fs::path dir(args.out_dir);
        write_file_atomic(dir / "matrix.csv", matrix_csv.str());
        write_file_atomic(dir / "labels.csv", labels_csv.str());
        write_file_atomic(dir / "graph.tsv", graph_tsv.str());
        write_file_atomic(dir / "truth.tsv", truth_tsv.str());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// filter / select

int cmd_filter(const std::string& matrix_path, const std::string& labels_path, double p_threshold,
               const std::string& positive_label, const std::string& out_path) {
    try {
        OmicsMatrix matrix = load_matrix_file(matrix_path);
        load_labels_file(labels_path, matrix);
        const LabelEncoding enc = encode_labels(matrix);
        std::string positive = positive_label.empty() ? enc.classes.front() : positive_label;
        if (std::find(enc.classes.begin(), enc.classes.end(), positive) == enc.classes.end()) {
            throw std::runtime_error("positive label '" + positive + "' not present in data");
        }
        std::vector<int> groups(matrix.num_samples());
        for (std::size_t i = 0; i < groups.size(); ++i) {
            groups[i] = (*matrix.labels)[i] == positive ? 0 : 1;
        }
        const std::vector<int> kept = welch_filter(matrix.values, groups, p_threshold);
        std::ostringstream out;
        for (int j : kept) out << matrix.feature_ids[j] << '\n';
        write_file_atomic(out_path, out.str());
        std::cerr << "kept " << kept.size() << " of " << matrix.num_features() << " features\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_select(const std::string& matrix_path, const std::string& labels_path, double lambda,
               double tol, int max_iter, const std::string& out_path) {
    try {
        OmicsMatrix matrix = load_matrix_file(matrix_path);
        load_labels_file(labels_path, matrix);
        const LabelEncoding enc = encode_labels(matrix);
        auto [x, stats] = standardize(matrix.values);
        // one-vs-rest responses per class, union of supports; responses are
        // centered because the objective carries no intercept
        std::vector<bool> selected(matrix.num_features(), false);
        const double n = static_cast<double>(matrix.num_samples());
        for (std::size_t c = 0; c < enc.classes.size(); ++c) {
            std::vector<double> response(matrix.num_samples());
            double mean = 0.0;
            for (std::size_t i = 0; i < response.size(); ++i) {
                response[i] = enc.codes[i] == static_cast<int>(c) ? 1.0 : 0.0;
                mean += response[i];
            }
            mean /= n;
            for (auto& v : response) v -= mean;
            for (int j : lasso_select(x, response, lambda, tol, max_iter)) selected[j] = true;
        }
        std::ostringstream out;
        std::size_t count = 0;
        for (std::size_t j = 0; j < selected.size(); ++j) {
            if (selected[j]) {
                out << matrix.feature_ids[j] << '\n';
                ++count;
            }
        }
        write_file_atomic(out_path, out.str());
        if (count == 0) std::cerr << "warning: lambda removed every feature\n";
        std::cerr << "selected " << count << " of " << matrix.num_features() << " features\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// integrate / build-graph

int cmd_integrate(const std::vector<std::string>& matrix_paths,
                  const std::vector<std::string>& label_paths,
                  const std::vector<std::string>& prefixes, const std::string& out_dir) {
    try {
        std::vector<OmicsMatrix> loaded;
        for (std::size_t i = 0; i < matrix_paths.size(); ++i) {
            loaded.push_back(load_matrix_file(matrix_paths[i]));
            if (i < label_paths.size() && !label_paths[i].empty() && label_paths[i] != "-") {
                load_labels_file(label_paths[i], loaded.back());
            }
        }
        OmicsMatrix joined = integrate(loaded, prefixes);
        if (joined.num_samples() == 0) {
            std::cerr << "warning: sample-id intersection is empty\n";
        }
        std::ostringstream matrix_csv;
        save_matrix(matrix_csv, joined);
        const fs::path dir(out_dir);
        write_file_atomic(dir / "integrated.csv", matrix_csv.str());
        if (joined.labels) {
            std::ostringstream labels_csv;
            save_labels(labels_csv, joined);
            write_file_atomic(dir / "integrated_labels.csv", labels_csv.str());
        }
        std::cerr << "joined " << joined.num_samples() << " samples x " << joined.num_features()
                  << " features\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_build_graph(const std::string& interactions_path, int min_score, int min_degree,
                    const std::string& out_path) {
    try {
        std::ifstream in(interactions_path);
        if (!in) throw std::runtime_error("cannot read " + interactions_path);
        const InteractionTable table = parse_interactions(in);
        Graph graph = degree_filter(build_graph(table, min_score), min_degree);
        // keep the best surviving score per pair so the emitted TSV rebuilds
        // the same graph at min_score 0
        std::map<std::pair<std::string, std::string>, int> best_score;
        for (const auto& row : table.rows) {
            if (row.combined_score < min_score) continue;
            std::pair<std::string, std::string> key = std::minmax(row.node_a, row.node_b);
            auto [it, inserted] = best_score.emplace(key, row.combined_score);
            if (!inserted) it->second = std::max(it->second, row.combined_score);
        }
        std::ostringstream out;
        out << "protein1\tprotein2\tcombined_score\n";
        for (const auto& [a, b] : graph.edges) {
            const std::pair<std::string, std::string> key =
                std::minmax(graph.node_ids[a], graph.node_ids[b]);
            out << graph.node_ids[a] << '\t' << graph.node_ids[b] << '\t' << best_score.at(key)
                << '\n';
        }
        write_file_atomic(out_path, out.str());
        std::cerr << "graph: " << graph.num_nodes() << " nodes, " << graph.edges.size()
                  << " edges\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train / cv

ModelConfig resolve_model_config(const RunConfig& cfg, const PreparedData& data) {
    ModelConfig config = cfg.model;
    config.num_features = static_cast<int>(data.matrix.num_features());
    config.num_classes = static_cast<int>(data.encoding.classes.size());
    return config;
}

int cmd_train(const std::string& config_path) {
    RunConfig cfg = parse_run_config(config_path);
    try {
        PreparedData data = prepare(cfg, true);
        ModelConfig config = resolve_model_config(cfg, data);
        auto [x, stats] = standardize(data.matrix.values);
        Model model(config, data.graph);
        const std::vector<double> trace = train(model, x, data.encoding.codes, cfg.train);
        model.class_names = data.encoding.classes;
        model.standardization = stats;

        const fs::path dir(cfg.out_dir);
        write_file_atomic(dir / "checkpoint.json", save_checkpoint(model));
        json trace_json;
        trace_json["epoch_loss"] = trace;
        write_file_atomic(dir / "trace.json", trace_json.dump(2) + "\n");
        const std::vector<int> pred = model.predict(x);
        const MetricsReport report = evaluate(data.encoding.codes, pred, config.num_classes);
        json train_metrics;
        train_metrics["train"] = report_to_json(report);
        write_file_atomic(dir / "train_metrics.json", train_metrics.dump(2) + "\n");
        std::cerr << "train accuracy " << report.accuracy << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

struct FoldOutcome {
    MetricsReport report;
    std::string checkpoint;
};

int cmd_cv(const std::string& config_path) {
    RunConfig cfg = parse_run_config(config_path);
    try {
        PreparedData data = prepare(cfg, true);
        const ModelConfig config = resolve_model_config(cfg, data);
        const int folds = cfg.folds;
        const FoldPlan plan = stratified_kfold(data.encoding.codes, folds, cfg.train.seed);
        const Matrix& features = data.matrix.values;
        const std::vector<int>& codes = data.encoding.codes;

        std::vector<FoldOutcome> outcomes(folds);
        auto run_fold = [&](int fold) {
            std::vector<std::size_t> train_rows, val_rows;
            for (std::size_t i = 0; i < codes.size(); ++i) {
                (plan.assignments[i] == fold ? val_rows : train_rows).push_back(i);
            }
            Matrix train_x(train_rows.size(), features.cols());
            std::vector<int> train_y(train_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i) {
                std::copy(features.row_ptr(train_rows[i]),
                          features.row_ptr(train_rows[i]) + features.cols(), train_x.row_ptr(i));
                train_y[i] = codes[train_rows[i]];
            }
            Matrix val_x(val_rows.size(), features.cols());
            std::vector<int> val_y(val_rows.size());
            for (std::size_t i = 0; i < val_rows.size(); ++i) {
                std::copy(features.row_ptr(val_rows[i]),
                          features.row_ptr(val_rows[i]) + features.cols(), val_x.row_ptr(i));
                val_y[i] = codes[val_rows[i]];
            }
            auto [train_std, stats] = standardize(train_x);
            const Matrix val_std = apply_standardization(val_x, stats);

            ModelConfig fold_config = config;
            fold_config.seed = split_seed(config.seed, 40000 + fold);
            Model model(fold_config, data.graph);
            TrainOptions fold_options = cfg.train;
            fold_options.seed = split_seed(cfg.train.seed, 50000 + fold);
            train(model, train_std, train_y, fold_options);
            model.class_names = data.encoding.classes;
            model.standardization = stats;

            const std::vector<int> pred = model.predict(val_std);
            outcomes[fold].report = evaluate(val_y, pred, config.num_classes);
            outcomes[fold].checkpoint = save_checkpoint(model);
        };

        const int workers = worker_count(folds);
        if (workers <= 1) {
            for (int fold = 0; fold < folds; ++fold) run_fold(fold);
        } else {
            std::vector<std::thread> pool;
            std::atomic<int> next{0};
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&]() {
                    while (true) {
                        const int fold = next.fetch_add(1);
                        if (fold >= folds) break;
                        run_fold(fold);
                    }
                });
            }
            for (auto& t : pool) t.join();
        }

        std::vector<MetricsReport> reports;
        for (const auto& outcome : outcomes) reports.push_back(outcome.report);
        const CvSummary summary = cv_aggregate(reports);

        json metrics;
        metrics["folds"] = json::array();
        for (const auto& report : reports) metrics["folds"].push_back(report_to_json(report));
        metrics["summary"]["mean"] = report_to_json(summary.mean);
        metrics["summary"]["std"] = report_to_json(summary.std);
        metrics["classes"] = data.encoding.classes;
        metrics["num_samples"] = data.matrix.num_samples();
        metrics["num_features"] = data.matrix.num_features();
        metrics["mapped_features"] = data.feature_map.num_mapped;
        metrics["accuracy_definition"] = "correct/total";

        const fs::path dir(cfg.out_dir);
        write_file_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
        write_file_atomic(dir / "summary.txt", format_cv_table(summary));
        for (int fold = 0; fold < folds; ++fold) {
            write_file_atomic(dir / ("checkpoint_fold" + std::to_string(fold) + ".json"),
                              outcomes[fold].checkpoint);
        }
        std::cerr << format_cv_table(summary);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// importance / report

int cmd_importance(const std::string& checkpoint_path, const std::string& mapping_path, int top_k,
                   const std::string& out_path) {
    try {
        Model model = load_checkpoint(read_file(checkpoint_path));
        std::vector<ImportanceEntry> ranking = feature_importance(model);
        if (top_k > 0 && static_cast<std::size_t>(top_k) < ranking.size()) {
            ranking.resize(top_k);
        }
        std::vector<AnnotatedImportance> rows;
        if (mapping_path.empty()) {
            std::istringstream empty("feature_id\tgene_name\n");
            rows = map_importance_to_genes(ranking, model.feature_ids(), empty);
        } else {
            std::ifstream in(mapping_path);
            if (!in) throw std::runtime_error("cannot read " + mapping_path);
            rows = map_importance_to_genes(ranking, model.feature_ids(), in);
        }
        std::ostringstream out;
        out << "feature_id\tgene_stable_id\tgene_name\tscore\n";
        char buf[64];
        for (const auto& row : rows) {
            std::snprintf(buf, sizeof(buf), "%.6g", row.score);
            out << row.feature_id << '\t' << row.gene_stable_id << '\t' << row.gene_name << '\t'
                << buf << '\n';
        }
        write_file_atomic(out_path, out.str());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_report(const std::string& metrics_path) {
    try {
        const json metrics = json::parse(read_file(metrics_path));
        std::vector<MetricsReport> folds;
        for (const auto& fold : metrics.at("folds")) {
            MetricsReport report;
            report.accuracy = fold.at("accuracy").get<double>();
            report.macro_precision = fold.at("macro_precision").get<double>();
            report.macro_recall = fold.at("macro_recall").get<double>();
            report.macro_f1 = fold.at("macro_f1").get<double>();
            folds.push_back(report);
        }
        std::cout << format_cv_table(cv_aggregate(folds));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph Kolmogorov-Arnold classification pipeline"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a planted-signal dataset");
    synth_cmd->add_option("--samples", synth.samples, "sample count")->required();
    synth_cmd->add_option("--features", synth.features, "feature count")->required();
    synth_cmd->add_option("--classes", synth.classes, "class count");
    synth_cmd->add_option("--informative", synth.informative, "planted informative features");
    synth_cmd->add_option("--density", synth.density, "graph density in [0,1]");
    synth_cmd->add_option("--noise", synth.noise, "noise std for informative features");
    synth_cmd->add_option("--seed", synth.seed, "rng seed");
    synth_cmd->add_option("--out", synth.out_dir, "output directory");

    std::string matrix_path, labels_path, out_path, positive_label;
    double p_threshold = 0.001;
    CLI::App* filter_cmd = app.add_subcommand("filter", "Welch t-test differential filter");
    filter_cmd->add_option("--matrix", matrix_path, "matrix CSV")->required();
    filter_cmd->add_option("--labels", labels_path, "label CSV")->required();
    filter_cmd->add_option("--p-threshold", p_threshold, "two-sided p-value threshold");
    filter_cmd->add_option("--positive-label", positive_label,
                           "group-A label (default: first class)");
    filter_cmd->add_option("--out", out_path, "selected-feature list file")->required();

    double lambda = 1.0, tol = 1e-10;
    int max_iter = 10000;
    CLI::App* select_cmd = app.add_subcommand("select", "lasso feature selection");
    select_cmd->add_option("--matrix", matrix_path, "matrix CSV")->required();
    select_cmd->add_option("--labels", labels_path, "label CSV")->required();
    select_cmd->add_option("--lambda", lambda, "L1 penalty");
    select_cmd->add_option("--tol", tol, "coordinate-descent tolerance");
    select_cmd->add_option("--max-iter", max_iter, "max sweeps");
    select_cmd->add_option("--out", out_path, "selected-feature list file")->required();

    std::vector<std::string> int_matrices, int_labels, int_prefixes;
    std::string int_out = "out";
    CLI::App* integrate_cmd = app.add_subcommand("integrate", "inner-join omics matrices");
    integrate_cmd->add_option("--matrix", int_matrices, "matrix CSV (repeat)")->required();
    integrate_cmd->add_option("--labels", int_labels, "label CSV per matrix ('-' = none)");
    integrate_cmd->add_option("--prefix", int_prefixes, "feature prefix per matrix")->required();
    integrate_cmd->add_option("--out", int_out, "output directory");

    std::string interactions_path;
    int min_score = 400, min_degree = 200;
    CLI::App* graph_cmd = app.add_subcommand("build-graph", "score+degree filter a PPI table");
    graph_cmd->add_option("--interactions", interactions_path, "STRING-style TSV")->required();
    graph_cmd->add_option("--min-score", min_score, "combined-score threshold");
    graph_cmd->add_option("--min-degree", min_degree, "degree threshold");
    graph_cmd->add_option("--out", out_path, "filtered TSV")->required();

    std::string config_path;
    CLI::App* train_cmd = app.add_subcommand("train", "train on the full dataset");
    train_cmd->add_option("--config", config_path, "run-config JSON")->required();

    CLI::App* cv_cmd = app.add_subcommand("cv", "stratified k-fold cross-validation");
    cv_cmd->add_option("--config", config_path, "run-config JSON")->required();

    std::string checkpoint_path, mapping_path;
    int top_k = 0;
    CLI::App* imp_cmd = app.add_subcommand("importance", "rank features from a checkpoint");
    imp_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
    imp_cmd->add_option("--mapping", mapping_path, "feature->gene TSV");
    imp_cmd->add_option("--top-k", top_k, "keep the k best (0 = all)");
    imp_cmd->add_option("--out", out_path, "importance TSV")->required();

    std::string metrics_path;
    CLI::App* report_cmd = app.add_subcommand("report", "render a metrics.json as a table");
    report_cmd->add_option("--metrics", metrics_path, "metrics JSON from cv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (filter_cmd->parsed()) {
            if (!(p_threshold >= 0.0)) {
                std::cerr << "error: --p-threshold must be >= 0\n";
                return kExitUsage;
            }
            return cmd_filter(matrix_path, labels_path, p_threshold, positive_label, out_path);
        }
        if (select_cmd->parsed()) {
            if (lambda < 0.0 || tol <= 0.0 || max_iter < 1) {
                std::cerr << "error: --lambda >= 0, --tol > 0, --max-iter >= 1 required\n";
                return kExitUsage;
            }
            return cmd_select(matrix_path, labels_path, lambda, tol, max_iter, out_path);
        }
        if (integrate_cmd->parsed()) {
            if (int_prefixes.size() != int_matrices.size()) {
                std::cerr << "error: --prefix count must match --matrix count\n";
                return kExitUsage;
            }
            if (!int_labels.empty() && int_labels.size() != int_matrices.size()) {
                std::cerr << "error: --labels count must match --matrix count (use '-')\n";
                return kExitUsage;
            }
            return cmd_integrate(int_matrices, int_labels, int_prefixes, int_out);
        }
        if (graph_cmd->parsed()) {
            if (min_score < 0 || min_score > 1000 || min_degree < 0) {
                std::cerr << "error: --min-score in 0..1000, --min-degree >= 0 required\n";
                return kExitUsage;
            }
            return cmd_build_graph(interactions_path, min_score, min_degree, out_path);
        }
        if (train_cmd->parsed()) return cmd_train(config_path);
        if (cv_cmd->parsed()) return cmd_cv(config_path);
        if (imp_cmd->parsed()) {
            if (top_k < 0) {
                std::cerr << "error: --top-k must be >= 0\n";
                return kExitUsage;
            }
            return cmd_importance(checkpoint_path, mapping_path, top_k, out_path);
        }
        if (report_cmd->parsed()) return cmd_report(metrics_path);
    } catch (const std::invalid_argument& e) {
        // config/domain errors surface before any pipeline work starts
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
