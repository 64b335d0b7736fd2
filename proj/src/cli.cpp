#include "hdp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hdp/aeho.hpp"
#include "hdp/config.hpp"
#include "hdp/dataio.hpp"
#include "hdp/mcfa.hpp"
#include "hdp/metrics.hpp"
#include "hdp/model_io.hpp"
#include "hdp/pipeline.hpp"

namespace hdp::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigOptions {
  std::string path;
  std::optional<long long> seed;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "Experiment config (TOML subset)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Override the master seed");
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set mcfa.population=30");
  }

  // Layers the config file, overrides and seed over `base` (empty: built-in defaults).
  ExperimentConfig load(const ConfigTree& base = {}) const {
    ConfigTree tree = base;
    if (!path.empty()) {
      const auto file = ConfigTree::load(path);
      for (const auto& [k, v] : file.values()) tree.set(k, v);
    }
    for (const auto& o : overrides) tree.apply_override(o);
    if (seed) tree.set("seed", std::to_string(*seed));
    return ExperimentConfig::from_tree(tree);
  }
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? sep : "") + items[i];
  return s;
}

std::string training_report(const pipeline::TrainedModel& model, const pipeline::Prepared& prepared,
                            const metrics::MetricsReport& train_metrics) {
  std::ostringstream os;
  os << "config_hash=" << model.config_hash << '\n';
  os << "seed=" << model.seed << '\n';
  os << prepared.report.to_text();
  os << "predictors=" << join(model.predictors, ",") << '\n';
  os << "feature_mask=" << model.mask.to_string() << '\n';
  os << "selected=" << join(model.selected(), ",") << '\n';
  os << "selected_count=" << model.mask.count() << '\n';
  os << "network=" ;
  for (std::size_t i = 0; i < model.spec.layer_sizes.size(); ++i) os << (i ? "-" : "") << model.spec.layer_sizes[i];
  os << '\n';
  if (!model.loss_history.empty()) os << "final_mse=" << data::format_value(model.loss_history.back()) << '\n';
  os << '\n' << metrics::report_table({{"training", train_metrics}});
  return os.str();
}

metrics::MetricsReport score_dataset(const pipeline::TrainedModel& model, const data::Dataset& ds) {
  const auto preds = pipeline::predict(model, ds);
  std::vector<int> labels, truths;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    labels.push_back(preds[i].label);
    truths.push_back(data::binarize_label(ds.records[i].num));
  }
  return metrics::compute_metrics(metrics::confusion(labels, truths));
}

// Groups "prefix.measure=value" lines into one report per prefix, in first-seen order.
std::vector<std::pair<std::string, metrics::MetricsReport>> parse_key_values(const std::string& text) {
  static const std::map<std::string, metrics::Measure metrics::MetricsReport::*> fields{
      {"accuracy", &metrics::MetricsReport::accuracy},   {"error", &metrics::MetricsReport::error},
      {"ppv", &metrics::MetricsReport::ppv},             {"npv", &metrics::MetricsReport::npv},
      {"sensitivity", &metrics::MetricsReport::sensitivity}, {"specificity", &metrics::MetricsReport::specificity},
      {"f1", &metrics::MetricsReport::f1},               {"prevalence", &metrics::MetricsReport::prevalence},
  };
  std::vector<std::pair<std::string, metrics::MetricsReport>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) continue;
    auto field = fields.find(key.substr(dot + 1));
    if (field == fields.end()) continue;
    const auto prefix = key.substr(0, dot);
    auto row = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.first == prefix; });
    if (row == rows.end()) {
      rows.emplace_back(prefix, metrics::MetricsReport{});
      row = rows.end() - 1;
    }
    const auto value = line.substr(eq + 1);
    if (value != "undefined") row->second.*(field->second) = std::stod(value);
  }
  return rows;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heart-disease prediction pipeline: preprocessing, cuttlefish feature selection, "
               "elephant-herd + backprop training, evaluation and stream scoring"};
  app.name("hdp");
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Impute, deduplicate and report on a raw CSV");
  std::string pre_input, pre_output, pre_report;
  int pre_k = 5;
  pre->add_option("--input", pre_input, "Raw 14-column CSV")->required()->check(CLI::ExistingFile);
  pre->add_option("--output", pre_output, "Where to write the processed CSV");
  pre->add_option("--report", pre_report, "Where to write the preprocessing report");
  pre->add_option("--impute-k", pre_k, "Neighbours used for imputation");

  // select-features
  auto* sel = app.add_subcommand("select-features", "Run wrapper feature selection");
  ConfigOptions sel_cfg;
  sel_cfg.attach(sel);

  // train
  auto* train = app.add_subcommand("train", "Run the full training pipeline and write the model");
  ConfigOptions train_cfg;
  train_cfg.attach(train);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Stratified k-fold evaluation");
  ConfigOptions eval_cfg;
  eval_cfg.attach(eval);
  std::string eval_model, eval_data;
  std::optional<int> eval_folds;
  bool save_folds = false;
  eval->add_option("--model", eval_model, "Reuse the feature mask and config of a trained model")
      ->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset CSV (defaults to the configured dataset)");
  eval->add_option("--folds", eval_folds, "Fold count");
  eval->add_flag("--save-fold-models", save_folds, "Write each fold's model and test records");

  // predict
  auto* pred = app.add_subcommand("predict", "Score every row of a CSV");
  std::string pred_model, pred_input;
  pred->add_option("--model", pred_model, "Model file")->required()->check(CLI::ExistingFile);
  pred->add_option("--input", pred_input, "14-column CSV")->required()->check(CLI::ExistingFile);

  // stream
  auto* stream = app.add_subcommand("stream", "Score newline-delimited JSON records and emit alerts");
  std::string stream_model, stream_input;
  stream->add_option("--model", stream_model, "Model file")->required()->check(CLI::ExistingFile);
  stream->add_option("--input", stream_input, "JSONL file (default: standard input)");

  // report
  auto* report = app.add_subcommand("report", "Render metrics tables");
  std::string report_input;
  std::optional<double> sweep_sens, sweep_spec;
  std::vector<double> sweep_prev;
  report->add_option("--input", report_input, "key=value metrics file")->check(CLI::ExistingFile);
  report->add_option("--sensitivity", sweep_sens, "Prevalence sweep: test sensitivity");
  report->add_option("--specificity", sweep_spec, "Prevalence sweep: test specificity");
  report->add_option("--prevalence", sweep_prev, "Prevalence sweep: prevalences in (0,1)");

  // bench-opt
  auto* bench = app.add_subcommand("bench-opt", "Run an optimizer on a benchmark objective");
  std::string bench_opt = "aeho", bench_fn;
  int bench_dim = 10, bench_gens = 200;
  long long bench_seed = 1;
  bench->add_option("--optimizer", bench_opt, "mcfa or aeho")->check(CLI::IsMember({"mcfa", "aeho"}));
  bench->add_option("--function", bench_fn, "aeho: sphere|rastrigin; mcfa: planted");
  bench->add_option("--dim", bench_dim, "Dimension");
  bench->add_option("--generations", bench_gens, "Generations");
  bench->add_option("--seed", bench_seed, "Seed");

  std::vector<const char*> argv{"hdp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*pre) {
      const auto raw = data::parse_csv(pre_input);
      data::PreprocessReport rep;
      const auto clean = data::preprocess(raw, pre_k, &rep);
      if (!pre_output.empty()) {
        std::ostringstream csv;
        data::write_csv(csv, clean);
        write_file(pre_output, csv.str());
      }
      if (!pre_report.empty()) write_file(pre_report, rep.to_text());
      else out << rep.to_text();
      return kOk;
    }

    if (*sel) {
      const auto config = sel_cfg.load();
      const auto prepared = pipeline::prepare(config);
      const auto selection = pipeline::select_features(prepared.data, config);
      std::vector<std::string> names;
      for (auto i : selection.mask.indices()) names.push_back(prepared.data.schema[i].name);
      std::ostringstream os;
      os << "feature_mask=" << selection.mask.to_string() << '\n'
         << "selected=" << join(names, ",") << '\n'
         << "selected_count=" << selection.mask.count() << '\n'
         << "evaluations=" << selection.evaluations << '\n'
         << "distinct_subsets=" << selection.distinct_subsets << '\n';
      write_file(fs::path(config.output_dir) / "selection.txt", os.str());
      write_file(fs::path(config.output_dir) / "mcfa_history.txt", pipeline::history_text(selection.history));
      out << os.str();
      return kOk;
    }

    if (*train) {
      const auto config = train_cfg.load();
      const auto prepared = pipeline::prepare(config);
      const auto model = pipeline::train_pipeline(prepared.data, config);
      const auto train_metrics = score_dataset(model, prepared.data);
      const fs::path dir = config.output_dir;
      model_io::save(model, dir / "model.json");
      const auto report_text = training_report(model, prepared, train_metrics);
      write_file(dir / "report.txt", report_text);
      write_file(dir / "metrics.kv", metrics::report_key_values(train_metrics, "training"));
      write_file(dir / "mcfa_history.txt", pipeline::history_text(model.mcfa_history));
      write_file(dir / "aeho_history.txt", pipeline::history_text(model.aeho_history));
      write_file(dir / "loss_history.txt", pipeline::history_text(model.loss_history));
      out << report_text;
      return kOk;
    }

    if (*eval) {
      pipeline::TrainedModel model;
      ExperimentConfig config;
      if (!eval_model.empty()) {
        model = model_io::load(eval_model);
        config = model.config;
        if (!eval_cfg.overrides.empty() || eval_cfg.seed || !eval_cfg.path.empty()) {
          config = eval_cfg.load(model.config.to_tree());
        }
        model.config = config;
      } else {
        config = eval_cfg.load();
      }
      if (!eval_data.empty()) config.dataset = eval_data;
      const auto prepared = pipeline::prepare(config);
      if (eval_model.empty()) model = pipeline::train_pipeline(prepared.data, config);
      const int k = eval_folds.value_or(config.folds);
      const auto ev = pipeline::evaluate(model, prepared.data, k);
      const fs::path dir = config.output_dir;
      std::ostringstream head;
      head << "selected=" << join(model.selected(), ",") << '\n'
           << "selected_count=" << model.mask.count() << '\n'
           << "folds=" << k << "\n\n";
      write_file(dir / "evaluation.txt", head.str() + ev.table());
      write_file(dir / "evaluation.kv", ev.key_values());
      if (save_folds) {
        for (const auto& f : ev.folds) {
          if (!f.model) continue;
          const auto stem = "fold_" + std::to_string(f.index + 1);
          model_io::save(*f.model, dir / (stem + "_model.json"));
          std::string lines, preds;
          for (std::size_t i = 0; i < f.test_rows.size(); ++i) {
            lines += pipeline::record_to_json_line(prepared.data, f.test_rows[i], "row-" + std::to_string(f.test_rows[i])) + "\n";
            preds += std::to_string(f.test_rows[i]) + "," + std::to_string(f.predictions[i].label) + "," +
                     data::format_value(f.predictions[i].score) + "\n";
          }
          write_file(dir / (stem + "_test.jsonl"), lines);
          write_file(dir / (stem + "_predictions.csv"), preds);
        }
      }
      out << head.str() << ev.table();
      return kOk;
    }

    if (*pred) {
      const auto model = model_io::load(pred_model);
      // Only the selected attributes must be present; predict() names the first gap.
      const auto ds = data::parse_csv(pred_input);
      out << "row,label,score\n";
      const auto preds = pipeline::predict(model, ds);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        out << i << ',' << preds[i].label << ',' << data::format_value(preds[i].score) << '\n';
      }
      return kOk;
    }

    if (*stream) {
      const auto model = model_io::load(stream_model);
      pipeline::StreamSummary summary;
      if (stream_input.empty()) {
        summary = pipeline::predict_stream(model, in, out);
      } else {
        std::ifstream file(stream_input);
        if (!file) throw std::runtime_error("cannot open " + stream_input);
        summary = pipeline::predict_stream(model, file, out);
      }
      err << summary.to_text();
      return kOk;
    }

    if (*report) {
      if (sweep_sens || sweep_spec || !sweep_prev.empty()) {
        if (!sweep_sens || !sweep_spec || sweep_prev.empty()) {
          err << "error: --sensitivity, --specificity and --prevalence are used together\n";
          return kUsage;
        }
        out << "DP PPV NPV\n";
        for (const auto& row : metrics::prevalence_sweep(*sweep_sens, *sweep_spec, sweep_prev)) {
          char buf[96];
          std::snprintf(buf, sizeof(buf), "%.4f %.4f %.4f\n", row.prevalence, row.ppv, row.npv);
          out << buf;
        }
        return kOk;
      }
      if (report_input.empty()) {
        err << "error: report needs --input or a prevalence sweep\n\n" << report->help();
        return kUsage;
      }
      const auto rows = parse_key_values(read_file(report_input));
      if (rows.empty()) throw std::runtime_error("no metrics found in " + report_input);
      out << metrics::report_table(rows);
      return kOk;
    }

    if (*bench) {
      if (bench_dim < 1 || bench_gens < 1) {
        err << "error: --dim and --generations must be >= 1\n";
        return kUsage;
      }
      std::vector<double> history;
      std::string summary;
      if (bench_opt == "aeho") {
        const auto fn = bench_fn.empty() ? std::string("sphere") : bench_fn;
        aeho::Fitness<double> f;
        if (fn == "sphere") {
          f = [](const Eigen::VectorXd& x) { return -x.squaredNorm(); };
        } else if (fn == "rastrigin") {
          f = [](const Eigen::VectorXd& x) {
            return -(10.0 * static_cast<double>(x.size()) +
                     (x.array().square() - 10.0 * (2.0 * M_PI * x.array()).cos()).sum());
          };
        } else {
          err << "error: unknown aeho function '" << fn << "'\n";
          return kUsage;
        }
        aeho::AehoConfig cfg;
        cfg.max_generations = bench_gens;
        cfg.seed = static_cast<std::uint64_t>(bench_seed);
        const auto res = aeho::run_aeho<double>(f, bench_dim, cfg);
        history = res.history;
        summary = "best_fitness=" + data::format_value(res.best_fitness) + "\n";
      } else {
        const auto fn = bench_fn.empty() ? std::string("planted") : bench_fn;
        if (fn != "planted") {
          err << "error: unknown mcfa function '" << fn << "'\n";
          return kUsage;
        }
        mcfa::McfaConfig cfg;
        cfg.generations = bench_gens;
        cfg.seed = static_cast<std::uint64_t>(bench_seed);
        const auto planted = std::min(3, bench_dim);
        const mcfa::MaskFitness f = [&](const mcfa::FeatureMask& m) {
          double hits = 0.0;
          for (int j = 0; j < planted; ++j) hits += m.selected[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
          return hits - cfg.lambda * static_cast<double>(m.count()) / static_cast<double>(m.size());
        };
        const auto res = mcfa::run_mcfa(f, bench_dim, cfg);
        history = res.history;
        summary = "best_fitness=" + data::format_value(res.best_fitness) + "\nbest_mask=" + res.best_mask.to_string() + "\n";
      }
      out << pipeline::history_text(history) << summary;
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace hdp::cli
