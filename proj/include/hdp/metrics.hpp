#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hdp::metrics {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Positive class is abnormal (label 1).
struct ConfusionMatrix {
  std::size_t true_positive = 0;   // a_p
  std::size_t true_negative = 0;   // a_n
  std::size_t false_positive = 0;  // b_p
  std::size_t false_negative = 0;  // b_n

  std::size_t total() const { return true_positive + true_negative + false_positive + false_negative; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truths);

// Absent value = undefined (zero denominator).
using Measure = std::optional<double>;

struct MetricsReport {
  Measure accuracy;
  Measure prevalence;
  Measure ppv;
  Measure npv;
  Measure sensitivity;
  Measure specificity;
  Measure f1;
  Measure error;
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Columns ACC, Error, Precision, F1, Recall, Specificity, NPV, DP as
// percentages with one decimal; undefined values print as "—".
std::string report_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

// Machine-readable form: one "prefix.name=value" line per measure, "undefined" for absent values.
std::string report_key_values(const MetricsReport& report, const std::string& prefix);

// Inverse of report_table for its numeric cells, in fractions.
std::vector<std::pair<std::string, MetricsReport>> parse_report_table(const std::string& text);

struct PredictiveValues {
  double prevalence;
  double ppv;
  double npv;
};

// PPV and NPV at each prevalence for a test of fixed sensitivity and specificity.
std::vector<PredictiveValues> prevalence_sweep(double sensitivity, double specificity,
                                               std::span<const double> prevalences);

}  // namespace hdp::metrics
