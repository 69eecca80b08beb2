#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mogkan/graph.hpp"
#include "mogkan/matrix.hpp"

namespace mogkan {

// Dense samples x features table. Labels are optional so unlabeled matrices
// can flow through inference.
struct OmicsMatrix {
    std::vector<std::string> sample_ids;
    std::vector<std::string> feature_ids;
    Matrix values;
    std::optional<std::vector<std::string>> labels;

    std::size_t num_samples() const { return sample_ids.size(); }
    std::size_t num_features() const { return feature_ids.size(); }
};

struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;  // sample index -> fold in [0, k)
};

// CSV with header "sample_id,<feature>,...". Any non-numeric cell, ragged
// row or duplicate id aborts with its location.
OmicsMatrix load_matrix(std::istream& input);

// Sidecar label CSV with header "sample_id,label"; labels attach by id and
// every sample must be covered.
void load_labels(std::istream& input, OmicsMatrix& matrix);

// Writes values with 17 significant digits so load(save(m)) round-trips
// doubles bitwise.
void save_matrix(std::ostream& output, const OmicsMatrix& matrix);
void save_labels(std::ostream& output, const OmicsMatrix& matrix);

// Inner join on sample ids: keeps the intersection ordered by the first
// matrix, concatenates columns under "prefix:" qualified feature ids. An
// empty intersection yields an empty matrix (callers may warn), label
// disagreement is an error.
OmicsMatrix integrate(const std::vector<OmicsMatrix>& matrices,
                      const std::vector<std::string>& prefixes);

// Keeps the listed feature columns, in the matrix's column order. Unknown
// ids are an error; this is how selection-stage output files feed back in.
OmicsMatrix select_features(const OmicsMatrix& matrix, const std::vector<std::string>& ids);

struct LabelEncoding {
    std::vector<std::string> classes;  // sorted lexicographically
    std::vector<int> codes;
};

LabelEncoding encode_labels(const OmicsMatrix& matrix);

// Within each class, samples are shuffled by seed and dealt round-robin, so
// per-class fold counts differ by at most one. Every class needs >= k
// samples.
FoldPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

struct SyntheticDataset {
    OmicsMatrix matrix;
    InteractionTable interactions;  // scored edges; node ids = feature ids
    std::vector<int> informative_features;
};

// Planted-signal generator: informative features get class-dependent means
// (a per-feature permutation of 0..C-1, unit separation) plus N(0, noise_std)
// noise; the rest are standard normal. Graph edges land preferentially on
// informative pairs, with a sparser random background.
SyntheticDataset synthesize(int num_samples, int num_features, int num_classes,
                            int num_informative, double graph_density, double noise_std,
                            std::uint64_t seed);

void save_interactions(std::ostream& output, const InteractionTable& table);

}  // namespace mogkan
