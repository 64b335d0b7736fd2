#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "hdp/model_io.hpp"
#include "hdp/pipeline.hpp"

using namespace hdp;
using namespace hdp::pipeline;

namespace {

const std::string kCleveland = std::string(HDP_DATA_DIR) + "/cleveland.csv";

// Small budgets so each training run takes well under a second.
ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.dataset = kCleveland;
  c.mcfa.population = 4;
  c.mcfa.generations = 2;
  c.network.hidden = {4};
  c.network.epochs = 8;
  c.aeho.max_generations = 3;
  c.aeho.clan_size = 4;
  c.wrapper.aeho_divisor = 3;
  c.wrapper.epoch_divisor = 2;
  return c;
}

// Two numeric predictors; label 1 iff x + y > 1.
data::Dataset separable(std::size_t n, std::uint64_t seed) {
  data::Dataset ds;
  ds.name = "separable";
  ds.schema = {{"x", data::AttributeKind::Numeric, {}, false}, {"y", data::AttributeKind::Numeric, {}, false}};
  Rng rng(seed);
  while (ds.size() < n) {
    const double x = rng.uniform();
    const double y = rng.uniform();
    if (std::abs(x + y - 1.0) < 0.1) continue;  // keep a margin
    ds.records.push_back({{x, y}, x + y > 1.0 ? 1 : 0});
  }
  return ds;
}

}  // namespace

TEST_CASE("prepare reports the Cleveland preprocessing") {
  const auto p = prepare(quick_config());
  CHECK(p.data.size() == 303);
  CHECK(p.report.imputed.total() == 6);
}

TEST_CASE("separable data is learned") {
  auto cfg = quick_config();
  cfg.mcfa_enabled = false;
  cfg.network.hidden = {8};
  cfg.network.epochs = 200;
  cfg.network.learning_rate = 0.5;
  cfg.aeho.max_generations = 10;
  const auto ds = separable(200, 3);
  const auto model = train_pipeline(ds, cfg);
  const auto preds = predict(model, ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) correct += preds[i].label == ds.records[i].num ? 1 : 0;
  CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) >= 0.95);
}

TEST_CASE("training is deterministic and the model file round-trips") {
  const auto cfg = quick_config();
  const auto data = prepare(cfg).data;
  const auto a = train_pipeline(data, cfg);
  const auto b = train_pipeline(data, cfg);
  const auto text = model_io::to_json_text(a);
  CHECK(text == model_io::to_json_text(b));
  CHECK(a.mask.count() == static_cast<std::size_t>(a.spec.inputs()));

  const auto back = model_io::from_json_text(text);
  CHECK(model_io::to_json_text(back) == text);
  CHECK(back.weights == a.weights);
  const auto pa = predict(a, data);
  const auto pb = predict(back, data);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].score == pb[i].score);
    CHECK(pa[i].label == pb[i].label);
  }

  auto other = cfg;
  other.seed = 8;
  CHECK(model_io::to_json_text(train_pipeline(data, other)) != text);
}

TEST_CASE("corrupt model files are rejected") {
  const auto cfg = quick_config();
  auto c = cfg;
  c.mcfa_enabled = false;
  const auto text = model_io::to_json_text(train_pipeline(prepare(c).data, c));
  CHECK_THROWS(model_io::from_json_text("{}"));
  CHECK_THROWS(model_io::from_json_text(text.substr(0, text.size() / 2)));
  auto bad = text;
  bad.replace(bad.find("\"feature_mask\": \"1"), 19, "\"feature_mask\": \"0");
  CHECK_THROWS(model_io::from_json_text(bad));
}

TEST_CASE("ablations run") {
  auto cfg = quick_config();
  const auto data = prepare(cfg).data;
  cfg.mcfa_enabled = false;
  const auto all = train_pipeline(data, cfg);
  CHECK(all.mask.count() == 13);
  CHECK(all.mcfa_history.empty());
  cfg.aeho_enabled = false;
  const auto backprop_only = train_pipeline(data, cfg);
  CHECK(backprop_only.aeho_history.empty());
  CHECK(backprop_only.loss_history.size() == static_cast<std::size_t>(cfg.network.epochs));
}

TEST_CASE("selection history is non-decreasing") {
  const auto cfg = quick_config();
  const auto sel = select_features(prepare(cfg).data, cfg);
  CHECK(sel.history.size() == static_cast<std::size_t>(cfg.mcfa.generations));
  for (std::size_t g = 1; g < sel.history.size(); ++g) CHECK(sel.history[g] >= sel.history[g - 1]);
  CHECK(sel.distinct_subsets <= sel.evaluations);
  auto folded = cfg;
  folded.wrapper.inner_folds = 3;
  CHECK(select_features(prepare(cfg).data, folded).mask.count() >= 1);
}

TEST_CASE("scoring requires every selected attribute") {
  auto cfg = quick_config();
  cfg.mcfa_enabled = false;
  const auto model = train_pipeline(prepare(cfg).data, cfg);
  std::map<std::string, double> raw{{"age", 50}};
  try {
    predict(model, raw);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "score");
    CHECK(std::string(e.what()).find("sex") != std::string::npos);
  }
}

TEST_CASE("stage errors carry the stage name") {
  auto cfg = quick_config();
  cfg.dataset = "/nonexistent/file.csv";
  try {
    train_pipeline(cfg);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "load");
  }
}

TEST_CASE("evaluation on a tiny dataset") {
  auto cfg = quick_config();
  cfg.mcfa_enabled = false;
  auto ds = separable(4, 5);
  ds.records[0].num = 0;
  ds.records[1].num = 0;
  ds.records[2].num = 1;
  ds.records[3].num = 1;
  const auto model = train_pipeline(ds, cfg);
  const auto ev = evaluate(model, ds, 2);
  REQUIRE(ev.folds.size() == 2);
  double sum = 0.0;
  for (const auto& f : ev.folds) {
    REQUIRE(f.report.has_value());
    sum += *f.report->accuracy;
  }
  CHECK(std::abs(*ev.mean.accuracy - sum / 2.0) < 1e-12);
  CHECK(ev.pooled.total() == 4);
}

TEST_CASE("Cleveland evaluation aggregates folds and strata") {
  auto cfg = quick_config();
  const auto data = prepare(cfg).data;
  const auto model = train_pipeline(data, cfg);
  const auto ev = evaluate(model, data, 5);
  REQUIRE(ev.folds.size() == 5);
  double sum = 0.0;
  std::size_t rows = 0;
  for (const auto& f : ev.folds) {
    CHECK(f.error.empty());
    sum += *f.report->accuracy;
    rows += f.test_rows.size();
  }
  CHECK(rows == 303);
  CHECK(std::abs(*ev.mean.accuracy - sum / 5.0) < 1e-12);
  CHECK(ev.pooled.total() == 303);
  std::size_t strata = 0;
  for (const auto& [cp, r] : ev.by_chest_pain) strata += r ? 1 : 0;
  CHECK(strata == 4);
  CHECK(ev.table().find("cp=4") != std::string::npos);
  CHECK(ev.key_values().find("mean.accuracy=") != std::string::npos);
}

TEST_CASE("streaming matches batch predictions and survives bad lines") {
  auto cfg = quick_config();
  const auto data = prepare(cfg).data;
  const auto model = train_pipeline(data, cfg);
  const auto batch = predict(model, data);

  std::string lines;
  for (std::size_t i = 0; i < 40; ++i) {
    lines += record_to_json_line(data, i, "r" + std::to_string(i)) + "\n";
    if (i == 10) lines += "not json\n";
    if (i == 20) lines += "{\"id\": \"x\"}\n";
    if (i == 30) lines += "\n";
  }
  std::istringstream in(lines);
  std::ostringstream out;
  const auto summary = predict_stream(model, in, out);
  CHECK(summary.processed == 40);
  CHECK(summary.malformed == 2);
  CHECK(summary.normal + summary.abnormal == 40);

  std::istringstream alerts(out.str());
  std::size_t row = 0;
  std::size_t errors = 0;
  for (std::string line; std::getline(alerts, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j.contains("error")) {
      ++errors;
      continue;
    }
    CHECK(j.size() == 4);
    CHECK(j.at("id") == "r" + std::to_string(row));
    CHECK(j.at("score").get<double>() == batch[row].score);
    CHECK(j.at("label").get<int>() == batch[row].label);
    CHECK(j.at("severity") == (batch[row].label == 1 ? "ABNORMAL" : "NORMAL"));
    ++row;
  }
  CHECK(row == 40);
  CHECK(errors == 2);
}

TEST_CASE("empty stream and out-of-range values") {
  auto cfg = quick_config();
  cfg.mcfa_enabled = false;
  const auto model = train_pipeline(prepare(cfg).data, cfg);
  std::istringstream empty;
  std::ostringstream out;
  const auto s = predict_stream(model, empty, out);
  CHECK(s.processed == 0);
  CHECK(s.malformed == 0);
  CHECK(out.str().empty());

  std::map<std::string, double> raw;
  for (const auto& name : model.selected()) raw[name] = 1e6;
  const auto x = encode(model, raw);
  CHECK(x.maxCoeff() == 1.0);
}

TEST_CASE("history text") {
  CHECK(history_text({0.5, 0.75}) == "# generation value\n1 0.5\n2 0.75\n");
}
