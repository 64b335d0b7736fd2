#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hdp/config.hpp"
#include "hdp/dataio.hpp"
#include "hdp/mcfa.hpp"
#include "hdp/metrics.hpp"
#include "hdp/network.hpp"

namespace hdp::pipeline {

// Error raised inside a named pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct TrainedModel {
  std::vector<std::string> predictors;  // attributes available after preprocessing
  mcfa::FeatureMask mask;               // over `predictors`
  data::NormalizationTable normalization;  // selected attributes only, in input order
  nn::NetworkSpec spec;
  nn::Weights weights;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::string config_hash;
  ExperimentConfig config;
  std::vector<double> mcfa_history;
  std::vector<double> aeho_history;
  std::vector<double> loss_history;

  std::vector<std::string> selected() const { return normalization.names; }
};

struct Prediction {
  int label = 0;
  double score = 0.0;
};

struct Prepared {
  data::Dataset data;  // complete, deduplicated, raw units
  data::PreprocessReport report;
};

Prepared prepare(const data::Dataset& raw, const ExperimentConfig& config);
Prepared prepare(const ExperimentConfig& config);

struct Selection {
  mcfa::FeatureMask mask;
  std::vector<double> history;
  std::size_t evaluations = 0;       // optimizer fitness calls
  std::size_t distinct_subsets = 0;  // classifier trainings
};

// Wrapper feature selection over a complete dataset: validation accuracy of a
// budget-capped network minus lambda * (selected / total).
Selection select_features(const data::Dataset& train, const ExperimentConfig& config);

// AEHO over flattened weights (fitness -MSE), then backpropagation.
// `budget_divisors` scales the AEHO generations and epochs down, for wrapper use.
TrainedModel fit_model(const data::Dataset& train, const mcfa::FeatureMask& mask, const ExperimentConfig& config,
                       int aeho_divisor = 1, int epoch_divisor = 1);

TrainedModel train_pipeline(const ExperimentConfig& config);
TrainedModel train_pipeline(const data::Dataset& prepared, const ExperimentConfig& config);

// Model input for raw attribute values, clamped to the training range.
// Throws StageError naming the first missing selected attribute.
Eigen::VectorXd encode(const TrainedModel& model, const std::map<std::string, double>& raw);

Prediction predict(const TrainedModel& model, const std::map<std::string, double>& raw);
std::vector<Prediction> predict(const TrainedModel& model, const data::Dataset& ds);

struct FoldOutcome {
  std::size_t index = 0;
  std::vector<std::size_t> test_rows;
  std::vector<int> truths;
  std::vector<Prediction> predictions;
  metrics::ConfusionMatrix confusion;
  std::optional<metrics::MetricsReport> report;
  std::optional<TrainedModel> model;
  std::string error;  // non-empty when the fold failed
};

struct Evaluation {
  std::vector<FoldOutcome> folds;
  metrics::MetricsReport mean;      // per-measure mean over successful folds
  metrics::ConfusionMatrix pooled;  // summed over successful folds
  std::map<int, std::optional<metrics::MetricsReport>> by_chest_pain;  // pooled per cp stratum

  std::string table() const;
  std::string key_values() const;
};

// Retrains on each fold with the model's configuration and fixed feature mask.
Evaluation evaluate(const TrainedModel& model, const data::Dataset& ds, int folds);

struct AlertEvent {
  std::string id;         // JSON text of the passthrough id
  std::string timestamp;  // JSON text, empty when absent
  int label = 0;
  double score = 0.0;
  std::string severity;  // NORMAL or ABNORMAL
};

struct StreamSummary {
  std::size_t processed = 0;
  std::size_t normal = 0;
  std::size_t abnormal = 0;
  std::size_t malformed = 0;

  std::string to_text() const;
};

// One JSON object per input line; one alert or error object per output line.
StreamSummary predict_stream(const TrainedModel& model, std::istream& source, std::ostream& sink);

// The raw attributes of one record as a stream line.
std::string record_to_json_line(const data::Dataset& ds, std::size_t row, const std::string& id);

std::string history_text(const std::vector<double>& history);

}  // namespace hdp::pipeline
