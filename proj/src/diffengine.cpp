#include "emag/diffengine.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace emag {

using nlohmann::json;

int TrainConfig::effective_chunk() const {
  const int b = Renderer::kBlock;
  return ((std::max(chunk_T, 1) + b - 1) / b) * b;
}

void TrainConfig::validate() const {
  require(lr > 0 && beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1 && eps > 0,
          "train config: lr, betas and eps must be positive (betas < 1)");
  require(lambda_reg >= 0 && grad_clip > 0, "train config: lambda_reg >= 0 and grad_clip > 0 required");
  require(max_epochs >= 1 && patience >= 0, "train config: need max_epochs >= 1 and patience >= 0");
  require(min_improvement >= 0 && chunk_T >= 1, "train config: min_improvement >= 0 and chunk_T >= 1 required");
}

json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"lambda_reg", lambda_reg},
          {"grad_clip", grad_clip},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"min_improvement", min_improvement},
          {"seed", seed},
          {"chunk_T", chunk_T}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("train config: expected an object");
  TrainConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "lr") c.lr = v.get<double>();
      else if (k == "beta1") c.beta1 = v.get<double>();
      else if (k == "beta2") c.beta2 = v.get<double>();
      else if (k == "eps") c.eps = v.get<double>();
      else if (k == "lambda_reg") c.lambda_reg = v.get<double>();
      else if (k == "grad_clip") c.grad_clip = v.get<double>();
      else if (k == "max_epochs") c.max_epochs = v.get<int>();
      else if (k == "patience") c.patience = v.get<int>();
      else if (k == "min_improvement") c.min_improvement = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "chunk_T") c.chunk_T = v.get<int>();
      else throw ParseError("train config: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double penalty(const Model& model, double lambda, Vec* grad) {
  if (lambda == 0.0) return 0.0;
  const Vec& p = model.params();
  const Vec& mask = model.mask();
  double total = 0.0;
  for (const auto& g : model.layout().groups()) {
    if (!g.regularized) continue;
    const auto off = static_cast<Eigen::Index>(g.offset);
    const double count = mask.segment(off, g.size()).sum();
    if (count == 0.0) continue;
    const auto seg = p.segment(off, g.size()).cwiseProduct(mask.segment(off, g.size()));
    total += lambda * seg.squaredNorm() / count;
    if (grad) grad->segment(off, g.size()) += (2.0 * lambda / count) * seg;
  }
  return total;
}

double loss(const Mat& pred, const Mat& target, const Model& model, double lambda) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "loss: prediction/target shape mismatch");
  require(pred.size() > 0, "loss: empty prediction");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size()) + penalty(model, lambda);
}

namespace {
void check_finite(const Model& model, const Vec& g) {
  for (const auto& grp : model.layout().groups()) {
    if (!g.segment(static_cast<Eigen::Index>(grp.offset), grp.size()).allFinite())
      throw NumericError("non-finite gradient in parameter group '" + grp.name + "'");
  }
}
}  // namespace

Vec gradients(const Model& model, const Sample& sample, const TrainConfig& cfg, double* loss_out) {
  Vec g = Vec::Zero(model.params().size());
  const double mse = model.mse(sample.ld, sample.hd, cfg.effective_chunk(), &g);
  const double pen = penalty(model, cfg.lambda_reg, &g);
  check_finite(model, g);
  if (loss_out) *loss_out = mse + pen;
  return g;
}

double clip_global_norm(Vec& g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
  return norm;
}

void AdamState::reset(Eigen::Index n) {
  m = Vec::Zero(n);
  v = Vec::Zero(n);
  step = 0;
}

void adam_step(Vec& params, Vec grad, AdamState& s, const TrainConfig& cfg, const Vec& mask) {
  if (s.m.size() != params.size()) s.reset(params.size());
  require(grad.size() == params.size(), "adam: gradient size mismatch");
  grad.array() *= mask.array();
  clip_global_norm(grad, cfg.grad_clip);
  ++s.step;
  s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * grad;
  s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  const Vec update = (cfg.lr / bc1) * s.m.array() / ((s.v.array() / bc2).sqrt() + cfg.eps);
  params -= update.cwiseProduct(mask);
}

bool EarlyStopping::update(double val) {
  seen_ = true;
  if (val < best_ - min_delta_) {
    best_ = val;
    wait_ = 0;
    return true;
  }
  ++wait_;
  return false;
}

json EpochRecord::to_json() const {
  return {{"epoch", epoch}, {"train_loss", train_loss}, {"val_loss", val_loss}, {"improved", improved}};
}

json TrainReport::to_json() const {
  json ep = json::array();
  for (const auto& e : epochs) ep.push_back(e.to_json());
  return {{"epochs", ep},
          {"stop_epoch", stop_epoch},
          {"stop_reason", stop_reason},
          {"best_epoch", best_epoch},
          {"best_val", best_val},
          {"wall_time_s", wall_time_s},
          {"final_metrics", final_metrics}};
}

TrainResult train(Model& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("train: the training split is empty");
  if (val_set.empty()) throw ValidationError("train: the validation split is empty");
  const auto start = std::chrono::steady_clock::now();
  const int chunk = cfg.effective_chunk();

  TrainResult result;
  result.optimizer.reset(model.params().size());
  EarlyStopping stopper(cfg.patience, cfg.min_improvement);
  Vec best = model.params();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto& rep = result.report;
  rep.stop_reason = "max-epochs";

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0x7472, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double train_sum = 0.0;
    for (std::size_t idx : order) {
      double l = 0.0;
      Vec g = gradients(model, train_set[idx], cfg, &l);
      train_sum += l;
      adam_step(model.params(), std::move(g), result.optimizer, cfg, model.mask());
    }
    double val_sum = 0.0;
    for (const auto& s : val_set) val_sum += model.mse(s.ld, s.hd, chunk, nullptr);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(train_set.size());
    rec.val_loss = val_sum / static_cast<double>(val_set.size());
    rep.stop_epoch = epoch;
    if (!std::isfinite(rec.val_loss)) {
      rep.epochs.push_back(rec);
      rep.stop_reason = "diverged";
      if (on_epoch) on_epoch(rec);
      break;
    }
    rec.improved = stopper.update(rec.val_loss);
    if (rec.improved) {
      best = model.params();
      rep.best_epoch = epoch;
      rep.best_val = rec.val_loss;
    }
    rep.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      rep.stop_reason = "early-stopping";
      break;
    }
  }
  model.params() = best;
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double FiniteDiffReport::worst() const {
  double w = 0.0;
  for (const auto& [k, v] : max_rel_error) w = std::max(w, v);
  return w;
}

std::string FiniteDiffReport::worst_group() const {
  std::string name;
  double w = -1.0;
  for (const auto& [k, v] : max_rel_error)
    if (v > w) {
      w = v;
      name = k;
    }
  return name;
}

json FiniteDiffReport::to_json() const {
  return {{"max_rel_error", max_rel_error}, {"checked", checked}, {"worst", worst()}, {"worst_group", worst_group()}};
}

FiniteDiffReport finite_diff_check(const Model& model, const Sample& sample, const TrainConfig& cfg, double h,
                                   const Vec* analytic) {
  const Vec g = analytic ? *analytic : gradients(model, sample, cfg);
  Model probe = model;
  const int chunk = cfg.effective_chunk();
  auto eval = [&] { return probe.mse(sample.ld, sample.hd, chunk, nullptr) + penalty(probe, cfg.lambda_reg); };
  FiniteDiffReport rep;
  for (const auto& grp : model.layout().groups()) {
    double worst = 0.0;
    long n = 0;
    for (Eigen::Index k = 0; k < grp.size(); ++k) {
      const Eigen::Index i = static_cast<Eigen::Index>(grp.offset) + k;
      if (model.mask()[i] == 0.0) continue;
      const double x = probe.params()[i];
      probe.params()[i] = x + h;
      const double up = eval();
      probe.params()[i] = x - h;
      const double down = eval();
      probe.params()[i] = x;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(g[i] - fd) / std::max(std::abs(g[i]), 1e-8));
      ++n;
    }
    if (n == 0) continue;
    rep.max_rel_error[grp.name] = worst;
    rep.checked[grp.name] = n;
  }
  return rep;
}

}  // namespace emag
