#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "emag/model.hpp"

namespace emag {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lambda_reg = 2e-4;
  double grad_clip = 1.0;
  int max_epochs = 100;
  int patience = 20;
  double min_improvement = 1e-4;
  std::uint64_t seed = 0;
  int chunk_T = 256;  // rounded up to a multiple of Renderer::kBlock

  int effective_chunk() const;
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// One trial: LD input and HD target, both channels x time.
struct Sample {
  Mat ld, hd;
  std::string id;
};

/// lambda * sum over regularized groups of mean(theta^2), masked entries excluded.
/// Adds the gradient into *grad when given.
double penalty(const Model& model, double lambda, Vec* grad = nullptr);

/// MSE(pred, target) + penalty(model, lambda).
double loss(const Mat& pred, const Mat& target, const Model& model, double lambda);

/// Gradient of the training loss for one sample (MSE + penalty). Throws NumericError
/// naming the first parameter group holding a non-finite entry.
Vec gradients(const Model& model, const Sample& sample, const TrainConfig& cfg, double* loss_out = nullptr);

/// Scales g in place so that ||g||_2 <= max_norm; returns the norm before clipping.
double clip_global_norm(Vec& g, double max_norm);

struct AdamState {
  Vec m, v;
  long step = 0;
  void reset(Eigen::Index n);
};

/// Clips `grad` at cfg.grad_clip, then applies one bias-corrected Adam update.
/// Entries with mask 0 are left untouched.
void adam_step(Vec& params, Vec grad, AdamState& state, const TrainConfig& cfg, const Vec& mask);

/// Patience counter: an epoch improves when val < best - min_delta.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}
  /// Records one epoch; returns true when it improved on the best value.
  bool update(double val);
  /// Patience 0 behaves as 1: stop after the first non-improving epoch.
  bool should_stop() const { return seen_ && wait_ >= std::max(patience_, 1); }
  double best() const { return best_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int wait_ = 0;
  bool seen_ = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool improved = false;
  nlohmann::json to_json() const;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int stop_epoch = 0;
  std::string stop_reason;
  int best_epoch = 0;
  double best_val = 0.0;
  double wall_time_s = 0.0;
  nlohmann::json final_metrics = nlohmann::json::object();
  nlohmann::json to_json() const;
};

struct TrainResult {
  TrainReport report;
  AdamState optimizer;
};

/// Trains in place and leaves the best-validation parameters in the model.
TrainResult train(Model& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

struct FiniteDiffReport {
  std::map<std::string, double> max_rel_error;  // per parameter group
  std::map<std::string, long> checked;
  double worst() const;
  std::string worst_group() const;
  bool passed(double tol) const { return worst() < tol; }
  nlohmann::json to_json() const;
};

/// Central differences on every unmasked scalar, relative error |g - g_fd| / max(|g|, 1e-8).
/// When `analytic` is given it replaces the computed gradient (for mutation checks).
FiniteDiffReport finite_diff_check(const Model& model, const Sample& sample, const TrainConfig& cfg, double h,
                                   const Vec* analytic = nullptr);

}  // namespace emag
