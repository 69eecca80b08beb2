#pragma once

#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "mogkan/matrix.hpp"

namespace mogkan {

// One scored interaction row. Scores follow the STRING convention: integers
// in 0..1000, self-pairs forbidden.
struct InteractionRow {
    std::string node_a;
    std::string node_b;
    int combined_score = 0;
};

struct InteractionTable {
    std::vector<InteractionRow> rows;
};

// Undirected graph over string-identified nodes. Edges are stored once as
// canonical (min,max) index pairs; when self_loops is set every node also
// stores its own (v,v) pair.
struct Graph {
    std::vector<std::string> node_ids;
    std::vector<std::pair<int, int>> edges;
    bool self_loops = false;

    int num_nodes() const { return static_cast<int>(node_ids.size()); }
};

// feature -> node assignment produced by attach_features. Node i of the
// attached graph belongs to feature i; protein_ids records which protein
// node (if any) the feature was mapped onto.
struct FeatureNodeMap {
    std::vector<std::string> feature_ids;
    std::vector<std::string> protein_ids;  // empty string = unmapped
    int num_mapped = 0;
};

// Parses a STRING-style TSV with header columns protein1, protein2,
// combined_score (extra columns are ignored). Malformed rows abort with the
// offending line number; duplicate pairs are kept (build_graph deduplicates).
InteractionTable parse_interactions(std::istream& input);

// Mapping TSV with header columns feature_id, protein_id.
std::vector<std::pair<std::string, std::string>> parse_mapping(std::istream& input);

// Retains rows with combined_score >= min_score, collects nodes in
// first-appearance order and deduplicates undirected edges.
Graph build_graph(const InteractionTable& table, int min_score);

// Keeps nodes with degree >= min_degree and takes the induced subgraph, in a
// single pass (no iterative re-filtering).
Graph degree_filter(const Graph& graph, int min_degree);

// Rebuilds the graph in feature space: node i = feature i. Mapped features
// inherit their protein node's edges; unmapped features are isolated. Every
// node gets a self-loop. Mapping entries must be unambiguous (one protein
// per feature) and injective (one feature per protein); entries pointing at
// proteins absent from the graph are treated as unmapped.
std::pair<Graph, FeatureNodeMap> attach_features(
    const Graph& graph, const std::vector<std::string>& feature_ids,
    const std::vector<std::pair<std::string, std::string>>& mapping);

enum class Aggregation { Sum, Mean };

// Neighbor lists including the node itself (requires self_loops).
std::vector<std::vector<int>> adjacency_lists(const Graph& graph);

// out[b,v] = sum of node_values[b,u] over u in N(v); mean mode divides by
// |N(v)|. Requires self_loops so that N(v) always contains v.
Matrix aggregate(const Graph& graph, const Matrix& node_values, Aggregation mode);

}  // namespace mogkan
