#include "ecgdx/model_io.hpp"

#include <cmath>

#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"

namespace ecgdx {

namespace {

using nlohmann::json;

json node_to_json(const Tree& tree, int index) {
  const auto& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return {{"weight", node.weight}, {"cover", node.cover}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"default_left", node.default_left},
          {"cover", node.cover},
          {"gain", node.gain},
          {"children", json::array({node_to_json(tree, node.left), node_to_json(tree, node.right)})}};
}

[[noreturn]] void bad_model(const std::string& why) { throw Error(ErrorCode::BadValue, "model file: " + why); }

double finite_number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) bad_model(std::string("missing numeric '") + key + "'");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) bad_model(std::string("'") + key + "' is not finite");
  return v;
}

int node_from_json(const json& j, Tree& tree, int depth) {
  if (!j.is_object()) bad_model("tree node must be an object");
  if (depth > 64) bad_model("tree deeper than 64 levels");
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode node;
  node.cover = finite_number(j, "cover");
  if (j.contains("children")) {
    const auto& children = j.at("children");
    if (!children.is_array() || children.size() != 2) bad_model("split node needs exactly two children");
    if (!j.contains("feature") || !j.at("feature").is_number_integer()) bad_model("split node needs integer 'feature'");
    node.feature = j.at("feature").get<int>();
    if (node.feature < 0 || node.feature >= static_cast<int>(kNumFeatures)) bad_model("feature index out of range");
    node.threshold = finite_number(j, "threshold");
    if (!j.contains("default_left") || !j.at("default_left").is_boolean()) bad_model("split node needs 'default_left'");
    node.default_left = j.at("default_left").get<bool>();
    node.gain = j.contains("gain") ? finite_number(j, "gain") : 0.0;
    node.left = node_from_json(children[0], tree, depth + 1);
    node.right = node_from_json(children[1], tree, depth + 1);
  } else {
    node.weight = finite_number(j, "weight");
  }
  tree.nodes[static_cast<std::size_t>(index)] = node;
  return index;
}

}  // namespace

json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},       {"max_depth", c.max_depth},
          {"lambda_l2", c.lambda_l2},               {"gamma_min_gain", c.gamma_min_gain},
          {"min_child_weight", c.min_child_weight}, {"max_rounds", c.max_rounds},
          {"patience", c.patience},                 {"positive_weight", c.positive_weight},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto need_number = [&] {
      if (!value.is_number()) throw Error(ErrorCode::BadConfig, "'" + key + "' must be a number");
    };
    const auto need_integer = [&] {
      if (!value.is_number_integer()) throw Error(ErrorCode::BadConfig, "'" + key + "' must be an integer");
    };
    if (key == "learning_rate") {
      need_number();
      c.learning_rate = value.get<double>();
    } else if (key == "max_depth") {
      need_integer();
      c.max_depth = value.get<int>();
    } else if (key == "lambda_l2") {
      need_number();
      c.lambda_l2 = value.get<double>();
    } else if (key == "gamma_min_gain") {
      need_number();
      c.gamma_min_gain = value.get<double>();
    } else if (key == "min_child_weight") {
      need_number();
      c.min_child_weight = value.get<double>();
    } else if (key == "max_rounds") {
      need_integer();
      c.max_rounds = value.get<int>();
    } else if (key == "patience") {
      need_integer();
      c.patience = value.get<int>();
    } else if (key == "positive_weight") {
      need_number();
      c.positive_weight = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw Error(ErrorCode::BadConfig, "'seed' must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "threads") {
      need_integer();
      c.threads = value.get<int>();
    } else {
      throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json model_to_json(const BoostedModel& model) {
  json trees = json::array();
  for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
  return {{"format_version", kModelFormatVersion},
          {"target_code", model.target_code},
          {"base_score", model.base_score},
          {"best_iteration", model.best_iteration},
          {"schema", model.schema},
          {"config", train_config_to_json(model.config)},
          {"training",
           {{"rounds_trained", model.info.rounds_trained},
            {"fold_seed", model.info.fold_seed},
            {"n_train", model.info.n_train},
            {"n_val", model.info.n_val},
            {"best_val_auroc", model.info.best_val_auroc}}},
          {"trees", trees}};
}

BoostedModel model_from_json(const json& j) {
  if (!j.is_object()) bad_model("root must be an object");
  if (!j.contains("format_version") || j.at("format_version") != kModelFormatVersion) {
    bad_model("unsupported format_version");
  }
  BoostedModel model;
  if (!j.contains("schema") || !j.at("schema").is_array()) bad_model("missing 'schema'");
  model.schema = j.at("schema").get<std::vector<std::string>>();
  if (!j.contains("target_code") || !j.at("target_code").is_string()) bad_model("missing 'target_code'");
  model.target_code = j.at("target_code").get<std::string>();
  model.base_score = finite_number(j, "base_score");
  if (!j.contains("best_iteration") || !j.at("best_iteration").is_number_unsigned()) bad_model("missing 'best_iteration'");
  model.best_iteration = j.at("best_iteration").get<std::size_t>();
  if (j.contains("config")) {
    try {
      model.config = train_config_from_json(j.at("config"));
    } catch (const Error& e) {
      bad_model(e.what());
    }
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    model.info.rounds_trained = t.value("rounds_trained", 0);
    model.info.fold_seed = t.value("fold_seed", std::uint64_t{0});
    model.info.n_train = t.value("n_train", std::size_t{0});
    model.info.n_val = t.value("n_val", std::size_t{0});
    model.info.best_val_auroc = t.value("best_val_auroc", 0.0);
  }
  if (!j.contains("trees") || !j.at("trees").is_array()) bad_model("missing 'trees'");
  for (const auto& root : j.at("trees")) {
    Tree tree;
    node_from_json(root, tree, 0);
    model.trees.push_back(std::move(tree));
  }
  if (model.trees.size() != model.best_iteration) bad_model("tree count differs from best_iteration");
  return model;
}

std::string serialize_model(const BoostedModel& model) { return model_to_json(model).dump(1) + "\n"; }

BoostedModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadValue, path.string() + ": invalid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace ecgdx
