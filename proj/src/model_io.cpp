#include "hdp/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hdp::model_io {

using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "hdp-model/1";

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string to_json_text(const pipeline::TrainedModel& model) {
  ordered_json j;
  j["format"] = kFormat;
  j["predictors"] = model.predictors;
  j["feature_mask"] = model.mask.to_string();
  ordered_json norm = ordered_json::array();
  for (std::size_t i = 0; i < model.normalization.size(); ++i) {
    norm.push_back({{"name", model.normalization.names[i]},
                    {"min", model.normalization.ranges[i].min},
                    {"max", model.normalization.ranges[i].max}});
  }
  j["normalization"] = norm;
  j["network"] = {{"layer_sizes", model.spec.layer_sizes},
                  {"hidden_activation", "gaussian"},
                  {"output_activation", "logistic"},
                  {"learning_rate", model.weights.learning_rate},
                  {"threshold", model.threshold}};
  j["weights"] = to_vector(nn::flatten(model.weights));
  j["seed"] = model.seed;
  j["config_hash"] = model.config_hash;
  ordered_json cfg = ordered_json::object();
  const auto tree = model.config.to_tree();
  for (const auto& [k, v] : tree.values()) cfg[k] = v;
  j["config"] = cfg;
  j["history"] = {{"mcfa", model.mcfa_history}, {"aeho", model.aeho_history}, {"loss", model.loss_history}};
  return j.dump(2) + "\n";
}

pipeline::TrainedModel from_json_text(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw std::runtime_error("unsupported model format");
    pipeline::TrainedModel m;
    m.predictors = j.at("predictors").get<std::vector<std::string>>();
    m.mask = mcfa::FeatureMask::from_string(j.at("feature_mask").get<std::string>());
    if (m.mask.size() != m.predictors.size()) throw std::runtime_error("feature mask length differs from predictors");
    for (const auto& entry : j.at("normalization")) {
      m.normalization.names.push_back(entry.at("name").get<std::string>());
      m.normalization.ranges.push_back({entry.at("min").get<double>(), entry.at("max").get<double>()});
    }
    if (m.normalization.size() != m.mask.count()) throw std::runtime_error("normalization table differs from mask");
    const auto& net = j.at("network");
    m.spec.layer_sizes = net.at("layer_sizes").get<std::vector<int>>();
    m.spec.validate();
    if (static_cast<std::size_t>(m.spec.inputs()) != m.mask.count()) {
      throw std::runtime_error("network input size differs from feature mask cardinality");
    }
    m.threshold = net.at("threshold").get<double>();
    const auto flat = j.at("weights").get<std::vector<double>>();
    m.weights = nn::unflatten<double>(m.spec, Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size())),
                                      net.at("learning_rate").get<double>());
    if (!m.weights.all_finite()) throw std::runtime_error("non-finite weight");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    ConfigTree tree;
    for (const auto& [k, v] : j.at("config").items()) tree.set(k, v.get<std::string>());
    m.config = ExperimentConfig::from_tree(tree);
    const auto& h = j.at("history");
    m.mcfa_history = h.at("mcfa").get<std::vector<double>>();
    m.aeho_history = h.at("aeho").get<std::vector<double>>();
    m.loss_history = h.at("loss").get<std::vector<double>>();
    return m;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("invalid model file: ") + e.what());
  }
}

void save(const pipeline::TrainedModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json_text(model);
}

pipeline::TrainedModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

}  // namespace hdp::model_io
