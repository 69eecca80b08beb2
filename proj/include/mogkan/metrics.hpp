#pragma once

#include <string>
#include <vector>

namespace mogkan {

// counts[t][p] = number of samples with true class t predicted as p.
struct ConfusionMatrix {
    std::vector<std::vector<long long>> counts;

    int num_classes() const { return static_cast<int>(counts.size()); }
    long long total() const;
};

struct MacroMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Classes whose precision/recall hit the 0/0 convention (reported as 0).
    std::vector<int> undefined_classes;
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::vector<int> undefined_classes;
};

// Mean and sample (n-1) standard deviation per metric over folds. A single
// fold reports std 0 with the flag set.
struct CvSummary {
    std::vector<MetricsReport> per_fold;
    MetricsReport mean;
    MetricsReport std;
    bool single_fold = false;
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int num_classes);

// Trace / total. The per-class TP/TN/FP/FN bookkeeping reduces to this for
// the standard overall-correctness definition.
double accuracy(const ConfusionMatrix& cm);

// Per-class precision/recall/F1 averaged without class weighting. A 0/0
// ratio is defined as 0 and the class is flagged.
MacroMetrics macro_metrics(const ConfusionMatrix& cm);

MetricsReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                       int num_classes);

CvSummary cv_aggregate(const std::vector<MetricsReport>& folds);

// Table with one row per fold plus the mean +/- std summary row.
std::string format_cv_table(const CvSummary& summary);

}  // namespace mogkan
