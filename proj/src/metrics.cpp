#include "hdp/metrics.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace hdp::metrics {

namespace {

constexpr const char* kUndefined = "—";

Measure ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

struct Column {
  const char* header;
  Measure MetricsReport::*field;
};

constexpr std::array<Column, 8> kColumns{{
    {"ACC", &MetricsReport::accuracy},
    {"Error", &MetricsReport::error},
    {"Precision", &MetricsReport::ppv},
    {"F1", &MetricsReport::f1},
    {"Recall", &MetricsReport::sensitivity},
    {"Specificity", &MetricsReport::specificity},
    {"NPV", &MetricsReport::npv},
    {"DP", &MetricsReport::prevalence},
}};

// Display width, counting each UTF-8 code point once.
std::size_t width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

std::string pad_left(const std::string& s, std::size_t w) { return std::string(w - std::min(w, width(s)), ' ') + s; }
std::string pad_right(const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, width(s)), ' '); }

std::string percent(const Measure& m) {
  if (!m) return kUndefined;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", *m * 100.0);
  return buf;
}

}  // namespace

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  true_positive += o.true_positive;
  true_negative += o.true_negative;
  false_positive += o.false_positive;
  false_negative += o.false_negative;
  return *this;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.size() != truths.size()) throw MetricsError("confusion: prediction and truth lists differ in length");
  if (predictions.empty()) throw MetricsError("confusion: no predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int t = truths[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) throw MetricsError("confusion: labels must be 0 or 1");
    if (p == 1) (t == 1 ? cm.true_positive : cm.false_positive)++;
    else (t == 0 ? cm.true_negative : cm.false_negative)++;
  }
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw MetricsError("compute_metrics: empty confusion matrix");
  const auto tp = cm.true_positive, tn = cm.true_negative, fp = cm.false_positive, fn = cm.false_negative;
  MetricsReport r;
  r.accuracy = ratio(tp + tn, total);
  r.prevalence = ratio(tp + fn, total);
  r.ppv = ratio(tp, tp + fp);
  r.npv = ratio(tn, tn + fn);
  r.sensitivity = ratio(tp, tp + fn);
  r.specificity = ratio(tn, tn + fp);
  if (r.ppv && r.sensitivity && *r.ppv + *r.sensitivity > 0.0) {
    r.f1 = 2.0 * (*r.ppv * *r.sensitivity) / (*r.ppv + *r.sensitivity);
  }
  r.error = 1.0 - *r.accuracy;
  return r;
}

std::string report_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  if (rows.empty()) throw MetricsError("report_table: no rows");
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Label"};
  for (const auto& c : kColumns) header.emplace_back(c.header);
  cells.push_back(header);
  for (const auto& [label, report] : rows) {
    std::vector<std::string> line{label};
    for (const auto& c : kColumns) line.push_back(percent(report.*(c.field)));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));
  }
  std::ostringstream os;
  for (const auto& line : cells) {
    os << pad_right(line[0], widths[0]);
    for (std::size_t i = 1; i < line.size(); ++i) os << "  " << pad_left(line[i], widths[i]);
    os << '\n';
  }
  return os.str();
}

std::string report_key_values(const MetricsReport& report, const std::string& prefix) {
  static constexpr std::array<std::pair<const char*, Measure MetricsReport::*>, 8> kKeys{{
      {"accuracy", &MetricsReport::accuracy},
      {"error", &MetricsReport::error},
      {"ppv", &MetricsReport::ppv},
      {"npv", &MetricsReport::npv},
      {"sensitivity", &MetricsReport::sensitivity},
      {"specificity", &MetricsReport::specificity},
      {"f1", &MetricsReport::f1},
      {"prevalence", &MetricsReport::prevalence},
  }};
  std::ostringstream os;
  for (const auto& [name, field] : kKeys) {
    os << prefix << '.' << name << '=';
    const auto& m = report.*field;
    if (m) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", *m);
      os << buf;
    } else {
      os << "undefined";
    }
    os << '\n';
  }
  return os.str();
}

std::vector<std::pair<std::string, MetricsReport>> parse_report_table(const std::string& text) {
  std::vector<std::pair<std::string, MetricsReport>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    // The label may contain spaces; the last eight fields are the measures.
    std::vector<std::string> tokens;
    std::istringstream ls(line);
    for (std::string t; ls >> t;) tokens.push_back(t);
    if (tokens.size() < kColumns.size() + 1) throw MetricsError("parse_report_table: short row '" + line + "'");
    const auto first_value = tokens.size() - kColumns.size();
    std::string label = tokens[0];
    for (std::size_t i = 1; i < first_value; ++i) label += " " + tokens[i];
    MetricsReport r;
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      const auto& tok = tokens[first_value + c];
      if (tok != kUndefined) r.*(kColumns[c].field) = std::stod(tok) / 100.0;
    }
    rows.emplace_back(std::move(label), r);
  }
  return rows;
}

std::vector<PredictiveValues> prevalence_sweep(double sensitivity, double specificity,
                                               std::span<const double> prevalences) {
  if (!(sensitivity > 0.0 && sensitivity <= 1.0)) throw MetricsError("prevalence_sweep: sensitivity must be in (0,1]");
  if (!(specificity > 0.0 && specificity <= 1.0)) throw MetricsError("prevalence_sweep: specificity must be in (0,1]");
  std::vector<PredictiveValues> out;
  out.reserve(prevalences.size());
  for (double p : prevalences) {
    if (!(p > 0.0 && p < 1.0)) throw MetricsError("prevalence_sweep: prevalence must be in (0,1)");
    const double true_pos = p * sensitivity;
    const double false_pos = (1.0 - p) * (1.0 - specificity);
    const double true_neg = (1.0 - p) * specificity;
    const double false_neg = p * (1.0 - sensitivity);
    out.push_back({p, true_pos / (true_pos + false_pos), true_neg / (true_neg + false_neg)});
  }
  return out;
}

}  // namespace hdp::metrics
