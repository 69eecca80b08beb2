#include "mogkan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mogkan/rng.hpp"

namespace mogkan {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

[[noreturn]] void fail_cell(const std::string& kind, std::size_t line_no, const std::string& detail) {
    throw std::runtime_error(kind + ": line " + std::to_string(line_no) + ": " + detail);
}

void check_crlf(const std::string& line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') {
        fail_cell("malformed-row", line_no, "CRLF line ending");
    }
}

double parse_double(const std::string& s, std::size_t line_no, std::size_t col) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || s.empty()) {
        fail_cell("non-numeric-cell", line_no, "column " + std::to_string(col + 1) + ": '" + s + "'");
    }
    if (!std::isfinite(value)) {
        fail_cell("non-numeric-cell", line_no, "column " + std::to_string(col + 1) + ": non-finite");
    }
    return value;
}

void format_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

OmicsMatrix load_matrix(std::istream& input) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(input, line)) {
        throw std::runtime_error("malformed-row: empty matrix stream");
    }
    ++line_no;
    check_crlf(line, line_no);
    std::vector<std::string> header = split_csv(line);
    if (header.empty() || header[0] != "sample_id") {
        throw std::runtime_error("malformed-row: first header column must be sample_id");
    }
    OmicsMatrix matrix;
    matrix.feature_ids.assign(header.begin() + 1, header.end());
    {
        std::unordered_set<std::string> unique(matrix.feature_ids.begin(), matrix.feature_ids.end());
        if (unique.size() != matrix.feature_ids.size()) {
            throw std::runtime_error("duplicate-feature-id: header repeats a feature id");
        }
    }
    const std::size_t width = matrix.feature_ids.size();
    std::unordered_set<std::string> seen_samples;
    std::vector<double> values;
    while (std::getline(input, line)) {
        ++line_no;
        if (line.empty()) continue;
        check_crlf(line, line_no);
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != width + 1) {
            fail_cell("ragged-row", line_no,
                      "expected " + std::to_string(width + 1) + " fields, got " +
                          std::to_string(fields.size()));
        }
        if (!seen_samples.insert(fields[0]).second) {
            fail_cell("duplicate-sample-id", line_no, "'" + fields[0] + "'");
        }
        matrix.sample_ids.push_back(fields[0]);
        for (std::size_t j = 0; j < width; ++j) {
            values.push_back(parse_double(fields[j + 1], line_no, j));
        }
    }
    matrix.values = Matrix(matrix.sample_ids.size(), width);
    matrix.values.data() = std::move(values);
    return matrix;
}

void load_labels(std::istream& input, OmicsMatrix& matrix) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(input, line)) {
        throw std::runtime_error("malformed-row: empty label stream");
    }
    ++line_no;
    check_crlf(line, line_no);
    const std::vector<std::string> header = split_csv(line);
    if (header.size() != 2 || header[0] != "sample_id" || header[1] != "label") {
        throw std::runtime_error("malformed-row: label header must be sample_id,label");
    }
    std::unordered_map<std::string, std::string> by_id;
    while (std::getline(input, line)) {
        ++line_no;
        if (line.empty()) continue;
        check_crlf(line, line_no);
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 2) fail_cell("ragged-row", line_no, "expected 2 fields");
        if (!by_id.emplace(fields[0], fields[1]).second) {
            fail_cell("duplicate-sample-id", line_no, "'" + fields[0] + "'");
        }
    }
    std::vector<std::string> labels;
    labels.reserve(matrix.num_samples());
    for (const auto& id : matrix.sample_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw std::runtime_error("missing-label: sample '" + id + "' has no label");
        }
        labels.push_back(it->second);
    }
    matrix.labels = std::move(labels);
}

void save_matrix(std::ostream& output, const OmicsMatrix& matrix) {
    std::string line = "sample_id";
    for (const auto& f : matrix.feature_ids) {
        line += ',';
        line += f;
    }
    line += '\n';
    output << line;
    for (std::size_t i = 0; i < matrix.num_samples(); ++i) {
        line = matrix.sample_ids[i];
        for (std::size_t j = 0; j < matrix.num_features(); ++j) {
            line += ',';
            format_double(line, matrix.values(i, j));
        }
        line += '\n';
        output << line;
    }
}

void save_labels(std::ostream& output, const OmicsMatrix& matrix) {
    if (!matrix.labels) throw std::invalid_argument("missing-label: matrix has no labels");
    output << "sample_id,label\n";
    for (std::size_t i = 0; i < matrix.num_samples(); ++i) {
        output << matrix.sample_ids[i] << ',' << (*matrix.labels)[i] << '\n';
    }
}

OmicsMatrix integrate(const std::vector<OmicsMatrix>& matrices,
                      const std::vector<std::string>& prefixes) {
    if (matrices.empty()) throw std::invalid_argument("empty-input: nothing to integrate");
    if (prefixes.size() != matrices.size()) {
        throw std::invalid_argument("shape-mismatch: one prefix per matrix required");
    }
    {
        std::unordered_set<std::string> unique(prefixes.begin(), prefixes.end());
        if (unique.size() != prefixes.size()) {
            throw std::invalid_argument("duplicate-prefix: prefixes must be unique");
        }
    }
    // Row index per matrix, then the intersection ordered by the first one.
    std::vector<std::unordered_map<std::string, std::size_t>> row_of(matrices.size());
    for (std::size_t m = 0; m < matrices.size(); ++m) {
        for (std::size_t i = 0; i < matrices[m].sample_ids.size(); ++i) {
            row_of[m].emplace(matrices[m].sample_ids[i], i);
        }
    }
    std::vector<std::string> join_ids;
    for (const auto& id : matrices[0].sample_ids) {
        bool everywhere = true;
        for (std::size_t m = 1; m < matrices.size() && everywhere; ++m) {
            everywhere = row_of[m].count(id) > 0;
        }
        if (everywhere) join_ids.push_back(id);
    }
    OmicsMatrix out;
    out.sample_ids = join_ids;
    std::size_t width = 0;
    for (std::size_t m = 0; m < matrices.size(); ++m) {
        width += matrices[m].num_features();
        for (const auto& f : matrices[m].feature_ids) {
            out.feature_ids.push_back(prefixes[m] + ":" + f);
        }
    }
    out.values = Matrix(join_ids.size(), width);
    std::vector<std::string> labels(join_ids.size());
    bool any_labels = false;
    for (std::size_t i = 0; i < join_ids.size(); ++i) {
        std::size_t col = 0;
        for (std::size_t m = 0; m < matrices.size(); ++m) {
            const auto& matrix = matrices[m];
            const std::size_t row = row_of[m].at(join_ids[i]);
            for (std::size_t j = 0; j < matrix.num_features(); ++j) {
                out.values(i, col + j) = matrix.values(row, j);
            }
            col += matrix.num_features();
            if (matrix.labels) {
                const std::string& label = (*matrix.labels)[row];
                if (!any_labels || labels[i].empty()) {
                    labels[i] = label;
                } else if (labels[i] != label) {
                    throw std::runtime_error("label-conflict: sample '" + join_ids[i] +
                                             "' labeled '" + labels[i] + "' and '" + label + "'");
                }
                any_labels = true;
            }
        }
    }
    if (any_labels) out.labels = std::move(labels);
    return out;
}

OmicsMatrix select_features(const OmicsMatrix& matrix, const std::vector<std::string>& ids) {
    std::unordered_set<std::string> wanted(ids.begin(), ids.end());
    if (wanted.size() != ids.size()) {
        throw std::invalid_argument("duplicate-feature-id: selection list repeats an id");
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < matrix.num_features(); ++j) {
        if (wanted.erase(matrix.feature_ids[j]) > 0) keep.push_back(j);
    }
    if (!wanted.empty()) {
        throw std::runtime_error("unknown-feature-id: '" + *wanted.begin() +
                                 "' is not a column of the matrix");
    }
    OmicsMatrix out;
    out.sample_ids = matrix.sample_ids;
    out.labels = matrix.labels;
    for (std::size_t j : keep) out.feature_ids.push_back(matrix.feature_ids[j]);
    out.values = Matrix(matrix.num_samples(), keep.size());
    for (std::size_t i = 0; i < matrix.num_samples(); ++i) {
        for (std::size_t j = 0; j < keep.size(); ++j) {
            out.values(i, j) = matrix.values(i, keep[j]);
        }
    }
    return out;
}

LabelEncoding encode_labels(const OmicsMatrix& matrix) {
    if (!matrix.labels) throw std::invalid_argument("missing-label: matrix has no labels");
    LabelEncoding enc;
    std::map<std::string, int> classes;
    for (const auto& label : *matrix.labels) classes.emplace(label, 0);
    int code = 0;
    for (auto& [name, c] : classes) {
        c = code++;
        enc.classes.push_back(name);
    }
    enc.codes.reserve(matrix.labels->size());
    for (const auto& label : *matrix.labels) enc.codes.push_back(classes.at(label));
    return enc;
}

FoldPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("invalid-size: k must be >= 2");
    const int num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<int>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw std::invalid_argument("label-out-of-range: negative label");
        by_class[labels[i]].push_back(static_cast<int>(i));
    }
    FoldPlan plan;
    plan.k = k;
    plan.assignments.assign(labels.size(), -1);
    for (int c = 0; c < num_classes; ++c) {
        auto& members = by_class[c];
        if (static_cast<int>(members.size()) < k) {
            throw std::invalid_argument("class-too-small: class " + std::to_string(c) + " has " +
                                        std::to_string(members.size()) + " samples for k=" +
                                        std::to_string(k));
        }
        Rng rng(split_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i) {
            plan.assignments[members[i]] = static_cast<int>(i % k);
        }
    }
    return plan;
}

SyntheticDataset synthesize(int num_samples, int num_features, int num_classes,
                            int num_informative, double graph_density, double noise_std,
                            std::uint64_t seed) {
    if (num_samples < 1 || num_features < 1 || num_classes < 1) {
        throw std::invalid_argument("invalid-size: samples, features, classes must be >= 1");
    }
    if (num_informative < 0 || num_informative > num_features) {
        throw std::invalid_argument("invalid-size: num_informative must be in [0, num_features]");
    }
    if (graph_density < 0.0 || graph_density > 1.0) {
        throw std::invalid_argument("invalid-size: graph_density must be in [0,1]");
    }
    if (noise_std < 0.0) throw std::invalid_argument("invalid-size: noise_std must be >= 0");

    SyntheticDataset ds;
    Rng rng(split_seed(seed, 0));

    // Near-balanced labels, then shuffled.
    std::vector<int> labels(num_samples);
    for (int i = 0; i < num_samples; ++i) labels[i] = i % num_classes;
    rng.shuffle(labels);

    // Informative features sit in the first num_informative columns, grouped
    // into modules of up to five. Each module draws one permutation of the
    // class means 0..C-1 (unit separation); features in a module share it,
    // so neighborhood averaging over a module reinforces the signal.
    const int module_size = 5;
    const int num_modules = num_informative == 0 ? 0 : (num_informative + module_size - 1) / module_size;
    std::vector<std::vector<double>> module_means(num_modules);
    for (int m = 0; m < num_modules; ++m) {
        std::vector<double> means(num_classes);
        for (int c = 0; c < num_classes; ++c) means[c] = static_cast<double>(c);
        rng.shuffle(means);
        module_means[m] = std::move(means);
    }
    std::vector<std::vector<double>> class_means(num_informative);
    for (int f = 0; f < num_informative; ++f) class_means[f] = module_means[f / module_size];

    ds.matrix.values = Matrix(num_samples, num_features);
    for (int i = 0; i < num_samples; ++i) {
        for (int j = 0; j < num_features; ++j) {
            if (j < num_informative) {
                ds.matrix.values(i, j) = class_means[j][labels[i]] + rng.normal(0.0, noise_std);
            } else {
                ds.matrix.values(i, j) = rng.normal();
            }
        }
    }
    char buf[32];
    for (int i = 0; i < num_samples; ++i) {
        std::snprintf(buf, sizeof(buf), "S%04d", i);
        ds.matrix.sample_ids.emplace_back(buf);
    }
    for (int j = 0; j < num_features; ++j) {
        std::snprintf(buf, sizeof(buf), "F%04d", j);
        ds.matrix.feature_ids.emplace_back(buf);
    }
    std::vector<std::string> label_names(num_samples);
    for (int i = 0; i < num_samples; ++i) {
        std::snprintf(buf, sizeof(buf), "class%d", labels[i]);
        label_names[i] = buf;
    }
    ds.matrix.labels = std::move(label_names);
    for (int j = 0; j < num_informative; ++j) ds.informative_features.push_back(j);

    // Edges: same-module informative pairs at a boosted rate (score 900),
    // everything else as sparse background (score 600).
    Rng edge_rng(split_seed(seed, 1));
    const double p_module = std::min(1.0, 5.0 * graph_density);
    const double p_background = graph_density / 5.0;
    for (int a = 0; a < num_features; ++a) {
        for (int b = a + 1; b < num_features; ++b) {
            const bool same_module = a < num_informative && b < num_informative &&
                                     a / module_size == b / module_size;
            const double p = same_module ? p_module : p_background;
            if (edge_rng.bernoulli(p)) {
                ds.interactions.rows.push_back(
                    {ds.matrix.feature_ids[a], ds.matrix.feature_ids[b], same_module ? 900 : 600});
            }
        }
    }
    return ds;
}

void save_interactions(std::ostream& output, const InteractionTable& table) {
    output << "protein1\tprotein2\tcombined_score\n";
    for (const auto& row : table.rows) {
        output << row.node_a << '\t' << row.node_b << '\t' << row.combined_score << '\n';
    }
}

}  // namespace mogkan
