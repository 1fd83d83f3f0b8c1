#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecgdx/cohort.hpp"
#include "ecgdx/tree.hpp"

namespace ecgdx {

struct TrainConfig {
  double learning_rate = 0.1;
  int max_depth = 6;
  double lambda_l2 = 1.0;
  double gamma_min_gain = 0.0;
  double min_child_weight = 1.0;
  int max_rounds = 1000;
  int patience = 10;
  double positive_weight = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  double gain = 0.0;
  double grad_left = 0.0;
  double hess_left = 0.0;
  double grad_right = 0.0;
  double hess_right = 0.0;
};

// Exact greedy search over one feature for the rows of a node. Returns
// nothing when no candidate has positive gain.
std::optional<SplitCandidate> best_split(const FeatureMatrix& features, std::span<const double> gradients,
                                         std::span<const double> hessians, std::span<const std::size_t> node_rows,
                                         int feature_index, const TrainConfig& config);

// Second-order split gain, already net of gamma_min_gain.
double split_gain(double grad_left, double hess_left, double grad_right, double hess_right, double lambda,
                  double gamma);

// Unscaled optimal leaf weight -G / (H + lambda).
inline double leaf_weight(double grad_sum, double hess_sum, double lambda) {
  return -grad_sum / (hess_sum + lambda);
}

// Grows one tree depth-first; leaf weights come back multiplied by the
// learning rate.
Tree grow_tree(std::span<const double> gradients, std::span<const double> hessians, const FeatureMatrix& features,
               const TrainConfig& config);

struct TrainingInfo {
  int rounds_trained = 0;
  std::uint64_t fold_seed = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  double best_val_auroc = 0.0;
};

struct BoostedModel {
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::size_t best_iteration = 0;
  std::string target_code;
  std::vector<std::string> schema = schema_names();
  TrainConfig config;
  TrainingInfo info;

  // Throws SchemaMismatch unless the model was trained on the harmonized schema.
  void check_schema() const;
};

double sigmoid(double margin);

double predict_margin(const BoostedModel& model, std::span<const double> row);
double predict_proba(const BoostedModel& model, std::span<const double> row);
std::vector<double> predict_margins(const BoostedModel& model, const FeatureMatrix& features);
std::vector<double> predict_probas(const BoostedModel& model, const FeatureMatrix& features);

// Patience-based stopping on a maximized metric. `update` returns true once
// training should halt.
class EarlyStopping {
 public:
  static constexpr double kMinImprovement = 1e-12;

  explicit EarlyStopping(int patience) : patience_(patience) {}

  bool update(double metric);

  int best_round() const { return best_round_; }
  double best_metric() const { return best_metric_; }
  int rounds_seen() const { return rounds_; }

 private:
  int patience_;
  int rounds_ = 0;
  int best_round_ = 0;
  int since_best_ = 0;
  double best_metric_ = 0.0;
};

// Score of the validation margins after a round; defaults to AUROC.
using ValidationScorer = std::function<double(int round, std::span<const double> val_margins,
                                              std::span<const std::uint8_t> val_labels)>;

struct TrainHistory {
  std::vector<double> val_metric;
  std::vector<double> train_loss;  // mean logistic loss after each round
};

struct TrainResult {
  BoostedModel model;
  TrainHistory history;
};

TrainResult train(const CohortTable& train_set, const CohortTable& val_set, const std::string& target,
                  const TrainConfig& config, const ValidationScorer& scorer = {});

// Mean logistic loss of raw margins against labels.
double logistic_loss(std::span<const double> margins, std::span<const std::uint8_t> labels);

}  // namespace ecgdx
