#include "mogkan/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mogkan {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

[[noreturn]] void fail_line(const std::string& kind, std::size_t line_no, const std::string& detail) {
    throw std::runtime_error(kind + ": line " + std::to_string(line_no) + ": " + detail);
}

// Lines ending in '\r' indicate a CRLF file; those rows are rejected rather
// than silently re-interpreted.
void check_crlf(const std::string& line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') {
        fail_line("malformed-row", line_no, "CRLF line ending");
    }
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace

InteractionTable parse_interactions(std::istream& input) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(input, line)) {
        throw std::runtime_error("missing-column: empty interaction stream");
    }
    ++line_no;
    check_crlf(line, line_no);
    const std::vector<std::string> header = split_tabs(line);
    const int col_a = find_column(header, "protein1");
    const int col_b = find_column(header, "protein2");
    const int col_s = find_column(header, "combined_score");
    if (col_a < 0 || col_b < 0 || col_s < 0) {
        throw std::runtime_error(
            "missing-column: header must name protein1, protein2, combined_score");
    }
    const std::size_t need = static_cast<std::size_t>(std::max({col_a, col_b, col_s})) + 1;

    InteractionTable table;
    while (std::getline(input, line)) {
        ++line_no;
        if (line.empty()) continue;
        check_crlf(line, line_no);
        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() < need) fail_line("malformed-row", line_no, "too few columns");
        InteractionRow row;
        row.node_a = fields[col_a];
        row.node_b = fields[col_b];
        const std::string& score_str = fields[col_s];
        std::size_t used = 0;
        int score = 0;
        try {
            score = std::stoi(score_str, &used);
        } catch (const std::exception&) {
            fail_line("bad-score", line_no, "'" + score_str + "' is not an integer");
        }
        if (used != score_str.size()) {
            fail_line("bad-score", line_no, "'" + score_str + "' is not an integer");
        }
        if (score < 0 || score > 1000) {
            fail_line("bad-score", line_no, "score " + std::to_string(score) + " outside 0-1000");
        }
        if (row.node_a == row.node_b) {
            fail_line("self-pair", line_no, "'" + row.node_a + "' paired with itself");
        }
        row.combined_score = score;
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<std::pair<std::string, std::string>> parse_mapping(std::istream& input) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(input, line)) {
        throw std::runtime_error("missing-column: empty mapping stream");
    }
    ++line_no;
    check_crlf(line, line_no);
    const std::vector<std::string> header = split_tabs(line);
    const int col_f = find_column(header, "feature_id");
    const int col_p = find_column(header, "protein_id");
    if (col_f < 0 || col_p < 0) {
        throw std::runtime_error("missing-column: header must name feature_id, protein_id");
    }
    const std::size_t need = static_cast<std::size_t>(std::max(col_f, col_p)) + 1;
    std::vector<std::pair<std::string, std::string>> mapping;
    while (std::getline(input, line)) {
        ++line_no;
        if (line.empty()) continue;
        check_crlf(line, line_no);
        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() < need) fail_line("malformed-row", line_no, "too few columns");
        mapping.emplace_back(fields[col_f], fields[col_p]);
    }
    return mapping;
}

Graph build_graph(const InteractionTable& table, int min_score) {
    Graph graph;
    std::unordered_map<std::string, int> index;
    auto intern = [&](const std::string& id) {
        auto it = index.find(id);
        if (it != index.end()) return it->second;
        int idx = graph.num_nodes();
        index.emplace(id, idx);
        graph.node_ids.push_back(id);
        return idx;
    };
    std::set<std::pair<int, int>> seen;
    for (const auto& row : table.rows) {
        if (row.combined_score < min_score) continue;
        int a = intern(row.node_a);
        int b = intern(row.node_b);
        auto edge = std::minmax(a, b);
        if (seen.insert({edge.first, edge.second}).second) {
            graph.edges.emplace_back(edge.first, edge.second);
        }
    }
    return graph;
}

Graph degree_filter(const Graph& graph, int min_degree) {
    if (graph.self_loops) {
        throw std::invalid_argument("degree_filter expects a graph without self-loops");
    }
    std::vector<int> degree(graph.num_nodes(), 0);
    for (const auto& [a, b] : graph.edges) {
        ++degree[a];
        ++degree[b];
    }
    std::vector<int> remap(graph.num_nodes(), -1);
    Graph out;
    for (int v = 0; v < graph.num_nodes(); ++v) {
        if (degree[v] >= min_degree) {
            remap[v] = out.num_nodes();
            out.node_ids.push_back(graph.node_ids[v]);
        }
    }
    for (const auto& [a, b] : graph.edges) {
        if (remap[a] >= 0 && remap[b] >= 0) {
            out.edges.emplace_back(std::min(remap[a], remap[b]), std::max(remap[a], remap[b]));
        }
    }
    return out;
}

std::pair<Graph, FeatureNodeMap> attach_features(
    const Graph& graph, const std::vector<std::string>& feature_ids,
    const std::vector<std::pair<std::string, std::string>>& mapping) {
    {
        std::unordered_set<std::string> unique(feature_ids.begin(), feature_ids.end());
        if (unique.size() != feature_ids.size()) {
            throw std::invalid_argument("duplicate-feature-id: feature ids must be unique");
        }
    }
    std::unordered_map<std::string, int> protein_index;
    for (int v = 0; v < graph.num_nodes(); ++v) protein_index.emplace(graph.node_ids[v], v);

    std::unordered_map<std::string, std::string> feature_to_protein;
    for (const auto& [feature, protein] : mapping) {
        auto it = feature_to_protein.find(feature);
        if (it != feature_to_protein.end() && it->second != protein) {
            throw std::invalid_argument("ambiguous-mapping: feature '" + feature +
                                        "' maps to multiple nodes");
        }
        feature_to_protein.emplace(feature, protein);
    }

    FeatureNodeMap fmap;
    fmap.feature_ids = feature_ids;
    fmap.protein_ids.assign(feature_ids.size(), "");
    // protein node -> owning feature index; injective by construction.
    std::unordered_map<int, int> owner;
    for (std::size_t f = 0; f < feature_ids.size(); ++f) {
        auto it = feature_to_protein.find(feature_ids[f]);
        if (it == feature_to_protein.end()) continue;
        auto pit = protein_index.find(it->second);
        if (pit == protein_index.end()) continue;  // protein filtered away: unmapped
        auto [oit, inserted] = owner.emplace(pit->second, static_cast<int>(f));
        if (!inserted) {
            throw std::invalid_argument("mapping-collision: features '" +
                                        feature_ids[oit->second] + "' and '" + feature_ids[f] +
                                        "' both map to node '" + it->second + "'");
        }
        fmap.protein_ids[f] = it->second;
        ++fmap.num_mapped;
    }

    Graph out;
    out.node_ids = feature_ids;
    out.self_loops = true;
    for (int v = 0; v < static_cast<int>(feature_ids.size()); ++v) out.edges.emplace_back(v, v);
    for (const auto& [a, b] : graph.edges) {
        auto ia = owner.find(a);
        auto ib = owner.find(b);
        if (ia != owner.end() && ib != owner.end()) {
            out.edges.emplace_back(std::min(ia->second, ib->second),
                                   std::max(ia->second, ib->second));
        }
    }
    return {std::move(out), std::move(fmap)};
}

std::vector<std::vector<int>> adjacency_lists(const Graph& graph) {
    std::vector<std::vector<int>> neigh(graph.num_nodes());
    for (const auto& [a, b] : graph.edges) {
        if (a == b) {
            neigh[a].push_back(a);
        } else {
            neigh[a].push_back(b);
            neigh[b].push_back(a);
        }
    }
    for (auto& list : neigh) std::sort(list.begin(), list.end());
    return neigh;
}

Matrix aggregate(const Graph& graph, const Matrix& node_values, Aggregation mode) {
    if (!graph.self_loops) {
        throw std::invalid_argument("aggregate requires self_loops so N(v) includes v");
    }
    if (static_cast<int>(node_values.cols()) != graph.num_nodes()) {
        throw std::invalid_argument("shape-mismatch: node_values width must equal node count");
    }
    const std::vector<std::vector<int>> neigh = adjacency_lists(graph);
    Matrix out(node_values.rows(), node_values.cols());
    for (std::size_t b = 0; b < node_values.rows(); ++b) {
        for (int v = 0; v < graph.num_nodes(); ++v) {
            double sum = 0.0;
            for (int u : neigh[v]) sum += node_values(b, u);
            out(b, v) = mode == Aggregation::Mean ? sum / static_cast<double>(neigh[v].size()) : sum;
        }
    }
    return out;
}

}  // namespace mogkan
