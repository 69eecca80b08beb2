#include "mogkan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mogkan {

long long ConfusionMatrix::total() const {
    long long sum = 0;
    for (const auto& row : counts) {
        for (long long c : row) sum += c;
    }
    return sum;
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int num_classes) {
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument("length-mismatch: y_true and y_pred differ in length");
    }
    ConfusionMatrix cm;
    cm.counts.assign(num_classes, std::vector<long long>(num_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw std::invalid_argument("label-out-of-range: sample " + std::to_string(i));
        }
        ++cm.counts[t][p];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total == 0) throw std::invalid_argument("empty-matrix: no evaluated samples");
    long long trace = 0;
    for (int i = 0; i < cm.num_classes(); ++i) trace += cm.counts[i][i];
    return static_cast<double>(trace) / static_cast<double>(total);
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total == 0) throw std::invalid_argument("empty-matrix: no evaluated samples");
    const int n = cm.num_classes();
    MacroMetrics out;
    double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
    for (int i = 0; i < n; ++i) {
        long long tp = cm.counts[i][i];
        long long fp = 0, fn = 0;
        for (int r = 0; r < n; ++r) {
            if (r == i) continue;
            fp += cm.counts[r][i];
            fn += cm.counts[i][r];
        }
        bool undefined = false;
        double precision = 0.0, recall = 0.0, f1 = 0.0;
        if (tp + fp > 0) {
            precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        } else {
            undefined = true;
        }
        if (tp + fn > 0) {
            recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        } else {
            undefined = true;
        }
        if (precision + recall > 0.0) f1 = 2.0 * precision * recall / (precision + recall);
        if (undefined) out.undefined_classes.push_back(i);
        sum_p += precision;
        sum_r += recall;
        sum_f += f1;
    }
    out.precision = sum_p / n;
    out.recall = sum_r / n;
    out.f1 = sum_f / n;
    return out;
}

MetricsReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                       int num_classes) {
    const ConfusionMatrix cm = confusion(y_true, y_pred, num_classes);
    const MacroMetrics mm = macro_metrics(cm);
    MetricsReport report;
    report.accuracy = accuracy(cm);
    report.macro_precision = mm.precision;
    report.macro_recall = mm.recall;
    report.macro_f1 = mm.f1;
    report.undefined_classes = mm.undefined_classes;
    return report;
}

CvSummary cv_aggregate(const std::vector<MetricsReport>& folds) {
    if (folds.empty()) throw std::invalid_argument("empty-input: no folds to aggregate");
    CvSummary summary;
    summary.per_fold = folds;
    summary.single_fold = folds.size() == 1;
    const double n = static_cast<double>(folds.size());
    auto aggregate_metric = [&](auto member) {
        double mean = 0.0;
        for (const auto& f : folds) mean += f.*member;
        mean /= n;
        double var = 0.0;
        if (folds.size() > 1) {
            for (const auto& f : folds) {
                const double d = f.*member - mean;
                var += d * d;
            }
            var /= (n - 1.0);
        }
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    auto [acc_m, acc_s] = aggregate_metric(&MetricsReport::accuracy);
    auto [pre_m, pre_s] = aggregate_metric(&MetricsReport::macro_precision);
    auto [rec_m, rec_s] = aggregate_metric(&MetricsReport::macro_recall);
    auto [f1_m, f1_s] = aggregate_metric(&MetricsReport::macro_f1);
    summary.mean = {acc_m, pre_m, rec_m, f1_m, {}};
    summary.std = {acc_s, pre_s, rec_s, f1_s, {}};
    return summary;
}

std::string format_cv_table(const CvSummary& summary) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %10s %10s %10s %10s\n", "fold", "accuracy",
                  "precision", "recall", "f1");
    out += buf;
    for (std::size_t i = 0; i < summary.per_fold.size(); ++i) {
        const auto& f = summary.per_fold[i];
        std::snprintf(buf, sizeof(buf), "%-8zu %10.4f %10.4f %10.4f %10.4f\n", i, f.accuracy,
                      f.macro_precision, f.macro_recall, f.macro_f1);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "mean+/-std %.4f+/-%.4f %.4f+/-%.4f %.4f+/-%.4f %.4f+/-%.4f\n",
                  summary.mean.accuracy, summary.std.accuracy, summary.mean.macro_precision,
                  summary.std.macro_precision, summary.mean.macro_recall,
                  summary.std.macro_recall, summary.mean.macro_f1, summary.std.macro_f1);
    out += buf;
    return out;
}

}  // namespace mogkan
