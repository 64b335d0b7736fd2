#include "hdp/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hdp/aeho.hpp"
#include "hdp/random.hpp"

namespace hdp::pipeline {

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Selected columns of `ds`, normalized with `table` (one entry per selected column).
Eigen::MatrixXd normalized_matrix(const data::Dataset& ds, const std::vector<std::size_t>& columns,
                                  const data::NormalizationTable& table) {
  Eigen::MatrixXd x = data::feature_matrix(ds, columns);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = table.apply(static_cast<std::size_t>(c), x(r, c));
  }
  return x;
}

data::NormalizationTable restrict(const data::NormalizationTable& full, const std::vector<std::size_t>& columns) {
  data::NormalizationTable t;
  for (auto c : columns) {
    t.names.push_back(full.names.at(c));
    t.ranges.push_back(full.ranges.at(c));
  }
  return t;
}

struct TrainedNetwork {
  nn::NetworkSpec spec;
  nn::Weights weights;
  std::vector<double> aeho_history;
  std::vector<double> loss_history;
};

TrainedNetwork train_network(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ExperimentConfig& config,
                             int aeho_divisor, int epoch_divisor) {
  TrainedNetwork out;
  out.spec = nn::make_spec(static_cast<int>(x.cols()), config.network.hidden);
  Rng init_rng(config.stage_seed("init"));
  out.weights = nn::random_weights<double>(out.spec, init_rng, config.network.init_range, config.network.learning_rate);

  if (config.aeho_enabled) {
    auto aeho_cfg = config.aeho;
    aeho_cfg.seed = config.stage_seed("aeho");
    aeho_cfg.max_generations = std::max(1, aeho_cfg.max_generations / aeho_divisor);
    const auto& spec = out.spec;
    const aeho::Fitness<double> fitness = [&](const Eigen::VectorXd& position) {
      return -nn::mean_squared_error(spec, nn::unflatten<double>(spec, position), x, y);
    };
    const Eigen::VectorXd start = nn::flatten(out.weights);
    auto result = aeho::run_aeho<double>(fitness, start.size(), aeho_cfg, start);
    out.weights = nn::unflatten<double>(spec, result.best_position, config.network.learning_rate);
    out.aeho_history = std::move(result.history);
  }

  const int epochs = config.network.epochs / epoch_divisor;
  auto trained = nn::train_epochs<double>(out.spec, out.weights, x, y, epochs, config.network.learning_rate,
                                          config.stage_seed("backprop"), config.network.mode);
  out.weights = std::move(trained.weights);
  out.loss_history = std::move(trained.loss_history);
  return out;
}

// Stratified holdout split of a dataset, deterministic in seed.
std::pair<data::Dataset, data::Dataset> holdout(const data::Dataset& ds, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> groups[2];
  for (std::size_t i = 0; i < ds.size(); ++i) groups[data::binarize_label(ds.records[i].num)].push_back(i);
  std::vector<bool> is_validation(ds.size(), false);
  for (auto& g : groups) {
    rng.shuffle(std::span(g));
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(g.size())));
    for (std::size_t i = 0; i < std::min(take, g.size()); ++i) is_validation[g[i]] = true;
  }
  auto train = ds.with_records({});
  auto validation = ds.with_records({});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (is_validation[i] ? validation : train).records.push_back(ds.records[i]);
  }
  if (train.empty() || validation.empty()) throw std::runtime_error("holdout split left an empty side");
  return {std::move(train), std::move(validation)};
}

metrics::MetricsReport undefined_report() { return {}; }

metrics::MetricsReport report_or_undefined(const metrics::ConfusionMatrix& cm) {
  return cm.total() == 0 ? undefined_report() : metrics::compute_metrics(cm);
}

}  // namespace

Prepared prepare(const data::Dataset& raw, const ExperimentConfig& config) {
  return in_stage("preprocess", [&] {
    Prepared p;
    p.data = data::preprocess(raw, config.impute_k, &p.report);
    return p;
  });
}

Prepared prepare(const ExperimentConfig& config) {
  const auto raw = in_stage("load", [&] { return data::parse_csv(config.dataset); });
  return prepare(raw, config);
}

Selection select_features(const data::Dataset& train, const ExperimentConfig& config) {
  return in_stage("select-features", [&] {
    // Inner validation splits: one stratified holdout, or stratified k-fold when inner_folds >= 2.
    struct Split {
      Eigen::MatrixXd x_train, x_valid;
      Eigen::VectorXd y_train, y_valid;
    };
    std::vector<std::size_t> all(train.schema.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<Split> splits;
    const auto add_split = [&](const data::Dataset& inner, const data::Dataset& validation) {
      const auto table = data::fit_normalization(inner);
      splits.push_back({normalized_matrix(inner, all, table), normalized_matrix(validation, all, table),
                        data::binary_labels(inner), data::binary_labels(validation)});
    };
    const auto split_seed = config.stage_seed("wrapper-split");
    if (config.wrapper.inner_folds >= 2) {
      for (const auto& fold : data::kfold_split(train, config.wrapper.inner_folds, split_seed)) {
        add_split(fold.train, fold.test);
      }
    } else {
      const auto [inner, validation] = holdout(train, config.wrapper.validation_fraction, split_seed);
      add_split(inner, validation);
    }
    const double total = static_cast<double>(train.schema.size());

    // Fitness is a pure function of the mask, so repeated subsets are served from the cache.
    std::unordered_map<std::string, double> cache;
    const mcfa::MaskFitness fitness = [&](const mcfa::FeatureMask& mask) {
      const auto key = mask.to_string();
      if (auto it = cache.find(key); it != cache.end()) return it->second;
      const auto cols = mask.indices();
      Eigen::Index correct = 0, seen = 0;
      for (const auto& split : splits) {
        const Eigen::MatrixXd xt = split.x_train(Eigen::all, cols);
        const Eigen::MatrixXd xv = split.x_valid(Eigen::all, cols);
        const auto net =
            train_network(xt, split.y_train, config, config.wrapper.aeho_divisor, config.wrapper.epoch_divisor);
        const Eigen::VectorXd out = nn::forward_batch(net.spec, net.weights, xv);
        for (Eigen::Index r = 0; r < out.size(); ++r) {
          correct += ((out(r) >= config.network.threshold ? 1.0 : 0.0) == split.y_valid(r)) ? 1 : 0;
        }
        seen += out.size();
      }
      const double accuracy = static_cast<double>(correct) / static_cast<double>(seen);
      const double value = accuracy - config.mcfa.lambda * static_cast<double>(cols.size()) / total;
      cache.emplace(key, value);
      return value;
    };

    auto mcfa_cfg = config.mcfa;
    mcfa_cfg.seed = config.stage_seed("mcfa");
    auto result = mcfa::run_mcfa(fitness, static_cast<int>(train.schema.size()), mcfa_cfg);
    return Selection{result.best_mask, result.history, result.evaluations, cache.size()};
  });
}

TrainedModel fit_model(const data::Dataset& train, const mcfa::FeatureMask& mask, const ExperimentConfig& config,
                       int aeho_divisor, int epoch_divisor) {
  return in_stage("train", [&] {
    if (mask.size() != train.schema.size()) throw std::runtime_error("feature mask does not match dataset schema");
    if (mask.count() == 0) throw std::runtime_error("feature mask selects no attributes");
    if (train.empty()) throw std::runtime_error("empty training set");
    const auto cols = mask.indices();
    TrainedModel model;
    for (const auto& a : train.schema) model.predictors.push_back(a.name);
    model.mask = mask;
    model.normalization = restrict(data::fit_normalization(train), cols);
    const Eigen::MatrixXd x = normalized_matrix(train, cols, model.normalization);
    const Eigen::VectorXd y = data::binary_labels(train);
    auto net = train_network(x, y, config, aeho_divisor, epoch_divisor);
    model.spec = std::move(net.spec);
    model.weights = std::move(net.weights);
    model.aeho_history = std::move(net.aeho_history);
    model.loss_history = std::move(net.loss_history);
    model.threshold = config.network.threshold;
    model.seed = config.seed;
    model.config = config;
    model.config_hash = hex(fnv1a(config.to_text()));
    return model;
  });
}

TrainedModel train_pipeline(const data::Dataset& prepared, const ExperimentConfig& config) {
  config.validate();
  mcfa::FeatureMask mask = mcfa::FeatureMask::all(prepared.schema.size());
  std::vector<double> mcfa_history;
  if (config.mcfa_enabled) {
    auto selection = select_features(prepared, config);
    mask = std::move(selection.mask);
    mcfa_history = std::move(selection.history);
  }
  auto model = fit_model(prepared, mask, config);
  model.mcfa_history = std::move(mcfa_history);
  return model;
}

TrainedModel train_pipeline(const ExperimentConfig& config) {
  config.validate();
  return train_pipeline(prepare(config).data, config);
}

Eigen::VectorXd encode(const TrainedModel& model, const std::map<std::string, double>& raw) {
  Eigen::VectorXd input(static_cast<Eigen::Index>(model.normalization.size()));
  for (std::size_t i = 0; i < model.normalization.size(); ++i) {
    const auto& name = model.normalization.names[i];
    auto it = raw.find(name);
    if (it == raw.end()) throw StageError("score", "record is missing selected attribute '" + name + "'");
    input(static_cast<Eigen::Index>(i)) = model.normalization.apply(i, it->second);
  }
  return input;
}

Prediction predict(const TrainedModel& model, const std::map<std::string, double>& raw) {
  const auto input = encode(model, raw);
  const double score = nn::forward(model.spec, model.weights, input).output;
  return {score >= model.threshold ? 1 : 0, score};
}

std::vector<Prediction> predict(const TrainedModel& model, const data::Dataset& ds) {
  std::vector<Prediction> out;
  out.reserve(ds.size());
  for (const auto& rec : ds.records) {
    std::map<std::string, double> raw;
    for (std::size_t a = 0; a < ds.schema.size(); ++a) {
      if (rec.values[a]) raw[ds.schema[a].name] = *rec.values[a];
    }
    out.push_back(predict(model, raw));
  }
  return out;
}

Evaluation evaluate(const TrainedModel& model, const data::Dataset& ds, int folds) {
  const auto splits = in_stage("evaluate", [&] { return data::kfold_split(ds, folds, model.config.stage_seed("folds")); });

  // Re-express the model's mask over this dataset's schema.
  mcfa::FeatureMask mask{std::vector<bool>(ds.schema.size(), false)};
  for (const auto& name : model.selected()) {
    const auto col = ds.find(name);
    if (!col) throw StageError("evaluate", "dataset lacks selected attribute '" + name + "'");
    mask.selected[*col] = true;
  }
  const auto cp_col = ds.find("cp");

  Evaluation ev;
  std::map<int, metrics::ConfusionMatrix> strata{{1, {}}, {2, {}}, {3, {}}, {4, {}}};
  for (std::size_t f = 0; f < splits.size(); ++f) {
    FoldOutcome outcome;
    outcome.index = f;
    outcome.test_rows = splits[f].test_rows;
    try {
      auto fold_model = fit_model(splits[f].train, mask, model.config);
      outcome.predictions = predict(fold_model, splits[f].test);
      std::vector<int> labels;
      for (std::size_t i = 0; i < splits[f].test.size(); ++i) {
        outcome.truths.push_back(data::binarize_label(splits[f].test.records[i].num));
        labels.push_back(outcome.predictions[i].label);
      }
      outcome.confusion = metrics::confusion(labels, outcome.truths);
      outcome.report = metrics::compute_metrics(outcome.confusion);
      outcome.model = std::move(fold_model);
      ev.pooled += outcome.confusion;
      if (cp_col) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const auto& cp = splits[f].test.records[i].values[*cp_col];
          if (!cp) continue;
          const int one_pred[] = {labels[i]};
          const int one_truth[] = {outcome.truths[i]};
          strata[static_cast<int>(*cp)] += metrics::confusion(one_pred, one_truth);
        }
      }
    } catch (const std::exception& e) {
      outcome.error = e.what();
      outcome.report.reset();
    }
    ev.folds.push_back(std::move(outcome));
  }

  using Field = metrics::Measure metrics::MetricsReport::*;
  for (Field field : {&metrics::MetricsReport::accuracy, &metrics::MetricsReport::prevalence,
                      &metrics::MetricsReport::ppv, &metrics::MetricsReport::npv,
                      &metrics::MetricsReport::sensitivity, &metrics::MetricsReport::specificity,
                      &metrics::MetricsReport::f1, &metrics::MetricsReport::error}) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& fo : ev.folds) {
      if (fo.report && (*fo.report).*field) {
        sum += *((*fo.report).*field);
        ++n;
      }
    }
    if (n > 0) ev.mean.*field = sum / static_cast<double>(n);
  }
  for (const auto& [cp, cm] : strata) ev.by_chest_pain[cp] = cm.total() ? std::optional(metrics::compute_metrics(cm)) : std::nullopt;
  return ev;
}

std::string Evaluation::table() const {
  std::vector<std::pair<std::string, metrics::MetricsReport>> rows;
  for (const auto& f : folds) {
    rows.emplace_back("fold " + std::to_string(f.index + 1), f.report.value_or(undefined_report()));
  }
  rows.emplace_back("mean", mean);
  rows.emplace_back("pooled", report_or_undefined(pooled));
  for (const auto& [cp, r] : by_chest_pain) rows.emplace_back("cp=" + std::to_string(cp), r.value_or(undefined_report()));
  return metrics::report_table(rows);
}

std::string Evaluation::key_values() const {
  std::string out;
  for (const auto& f : folds) {
    const auto prefix = "fold." + std::to_string(f.index + 1);
    if (!f.error.empty()) out += prefix + ".error=" + f.error + "\n";
    else out += metrics::report_key_values(*f.report, prefix);
  }
  out += metrics::report_key_values(mean, "mean");
  out += metrics::report_key_values(report_or_undefined(pooled), "pooled");
  for (const auto& [cp, r] : by_chest_pain) {
    out += metrics::report_key_values(r.value_or(undefined_report()), "cp" + std::to_string(cp));
  }
  return out;
}

std::string StreamSummary::to_text() const {
  std::ostringstream os;
  os << "processed=" << processed << "\nnormal=" << normal << "\nabnormal=" << abnormal << "\nmalformed=" << malformed
     << '\n';
  return os.str();
}

StreamSummary predict_stream(const TrainedModel& model, std::istream& source, std::ostream& sink) {
  if (!source.good() && !source.eof()) throw StageError("stream", "input stream is not readable");
  StreamSummary summary;
  std::string line;
  std::size_t line_no = 0;
  const auto reject = [&](const std::string& why) {
    nlohmann::ordered_json err;
    err["error"] = why;
    err["line"] = line_no;
    sink << err.dump() << '\n';
    ++summary.malformed;
  };
  while (std::getline(source, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      reject("not a JSON object");
      continue;
    }
    std::map<std::string, double> raw;
    std::string problem;
    for (const auto& name : model.selected()) {
      auto it = record.find(name);
      if (it == record.end() || it->is_null()) {
        problem = "missing attribute '" + name + "'";
        break;
      }
      if (!it->is_number()) {
        problem = "attribute '" + name + "' is not a number";
        break;
      }
      raw[name] = it->get<double>();
    }
    if (!problem.empty()) {
      reject(problem);
      continue;
    }
    AlertEvent event;
    const auto id_it = record.find("id");
    const nlohmann::json id = id_it != record.end() ? *id_it : nlohmann::json(line_no);
    event.id = id.dump();
    if (auto ts = record.find("timestamp"); ts != record.end()) event.timestamp = ts->dump();
    const auto p = predict(model, raw);
    event.label = p.label;
    event.score = p.score;
    event.severity = p.label == 1 ? "ABNORMAL" : "NORMAL";

    nlohmann::ordered_json alert;
    alert["id"] = id;
    alert["label"] = event.label;
    alert["score"] = event.score;
    alert["severity"] = event.severity;
    sink << alert.dump() << '\n';
    ++summary.processed;
    ++(event.label == 1 ? summary.abnormal : summary.normal);
  }
  if (source.bad()) throw StageError("stream", "read error on input stream");
  sink.flush();
  return summary;
}

std::string record_to_json_line(const data::Dataset& ds, std::size_t row, const std::string& id) {
  nlohmann::ordered_json j;
  j["id"] = id;
  const auto& rec = ds.records.at(row);
  for (std::size_t a = 0; a < ds.schema.size(); ++a) {
    if (rec.values[a]) j[ds.schema[a].name] = *rec.values[a];
  }
  return j.dump();
}

std::string history_text(const std::vector<double>& history) {
  std::string out = "# generation value\n";
  for (std::size_t i = 0; i < history.size(); ++i) out += std::to_string(i + 1) + " " + shortest(history[i]) + "\n";
  return out;
}

}  // namespace hdp::pipeline
