#include "emag/model.hpp"

#include <cmath>

namespace emag {

using nlohmann::json;

std::string to_string(ForwardVariant v) {
  switch (v) {
    case ForwardVariant::Gaussian: return "gaussian";
    case ForwardVariant::DirectMlp: return "direct-mlp";
    case ForwardVariant::LearnedLinear: return "learned-linear";
  }
  return "?";
}

ForwardVariant forward_variant_from_string(const std::string& s) {
  const std::string k = to_lower_ascii(s);
  if (k == "gaussian") return ForwardVariant::Gaussian;
  if (k == "direct-mlp" || k == "direct") return ForwardVariant::DirectMlp;
  if (k == "learned-linear" || k == "linear") return ForwardVariant::LearnedLinear;
  throw ParseError("unknown forward variant '" + s + "'");
}

json ModelConfig::to_json() const {
  return {{"grid", grid.to_json()},
          {"per_point", per_point},
          {"precision", to_string(precision)},
          {"conditioning", to_string(conditioning)},
          {"forward", to_string(forward)},
          {"features", features},
          {"hidden", hidden},
          {"direct_hidden", direct_hidden},
          {"spline", spline.to_json()},
          {"init", {{"seed", init_seed},
                    {"spatial_std_mm", init_spatial_std_mm},
                    {"temporal_std", init_temporal_std},
                    {"mu_max", init_mu_max}}},
          {"hd_montage", hd_montage.to_json()},
          {"ld_labels", ld_labels}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model config: expected an object");
  ModelConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "grid") c.grid = GridSpec::from_json(v);
      else if (k == "per_point") c.per_point = v.get<int>();
      else if (k == "precision") c.precision = precision_variant_from_string(v.get<std::string>());
      else if (k == "conditioning") c.conditioning = conditioning_variant_from_string(v.get<std::string>());
      else if (k == "forward") c.forward = forward_variant_from_string(v.get<std::string>());
      else if (k == "features") c.features = v.get<int>();
      else if (k == "hidden") c.hidden = v.get<int>();
      else if (k == "direct_hidden") c.direct_hidden = v.get<int>();
      else if (k == "spline") c.spline = SplineConfig::from_json(v);
      else if (k == "init") {
        for (const auto& [ik, iv] : v.items()) {
          if (ik == "seed") c.init_seed = iv.get<std::uint64_t>();
          else if (ik == "spatial_std_mm") c.init_spatial_std_mm = iv.get<double>();
          else if (ik == "temporal_std") c.init_temporal_std = iv.get<double>();
          else if (ik == "mu_max") c.init_mu_max = iv.get<double>();
          else throw ParseError("model config: unknown key 'init." + ik + "'");
        }
      } else if (k == "hd_montage") c.hd_montage = Montage::from_json(v);
      else if (k == "ld_labels") c.ld_labels = v.get<std::vector<std::string>>();
      else throw ParseError("model config: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  return c;
}

std::string ModelConfig::hash() const { return sha256_hex(to_json().dump()); }

void ParamLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols, bool regularized) {
  ParamGroup g{std::move(name), total_, rows, cols, regularized};
  total_ += static_cast<std::size_t>(g.size());
  groups_.push_back(std::move(g));
}

const ParamGroup* ParamLayout::find(const std::string& name) const {
  for (const auto& g : groups_)
    if (g.name == name) return &g;
  return nullptr;
}

const ParamGroup& ParamLayout::at(const std::string& name) const {
  const ParamGroup* g = find(name);
  if (!g) throw ValidationError("parameter group '" + name + "' is not part of this model");
  return *g;
}

const ParamGroup& ParamLayout::group_of(std::size_t i) const {
  for (const auto& g : groups_)
    if (i >= g.offset && i < g.offset + static_cast<std::size_t>(g.size())) return g;
  throw ValidationError("parameter index out of range");
}

json ParamLayout::to_json() const {
  json arr = json::array();
  for (const auto& g : groups_)
    arr.push_back({{"name", g.name}, {"offset", g.offset}, {"rows", g.rows}, {"cols", g.cols},
                   {"regularized", g.regularized}});
  return arr;
}

namespace {

bool has_gaussians(const ModelConfig& c) { return c.forward == ForwardVariant::Gaussian; }

void build_layout(const ModelConfig& c, int N, int enc_in, int direct_hidden, ParamLayout& L) {
  const int NT = N * c.per_point;
  const int M = c.hd_montage.size();
  if (c.forward != ForwardVariant::DirectMlp) L.add("w", NT, 1, true);
  if (has_gaussians(c)) {
    L.add("mu", NT, 1);
    if (c.precision == PrecisionVariant::Isotropic) {
      L.add("log_sigma", NT, 1, true);
    } else {
      L.add("log_diag", NT, 4, true);
      if (c.precision != PrecisionVariant::Diagonal) L.add("offdiag", NT, 6, true);
    }
    if (c.grid.variant == GridVariant::FreeInit) L.add("centers", NT, 3);
  }
  if (c.forward == ForwardVariant::LearnedLinear) L.add("lin_W", M, NT);
  if (c.forward == ForwardVariant::DirectMlp) {
    L.add("enc_W", c.features, enc_in);
    L.add("enc_b", c.features, 1);
    L.add("dmlp_W1", direct_hidden, c.features);
    L.add("dmlp_b1", direct_hidden, 1);
    L.add("dmlp_W2", M, direct_hidden);
    L.add("dmlp_b2", M, 1);
  } else if (c.conditioning != ConditioningVariant::None) {
    const int out = c.conditioning == ConditioningVariant::GlobalScalar ? 1 : N;
    L.add("enc_W", c.features, enc_in);
    L.add("enc_b", c.features, 1);
    L.add("mlp_W1", c.hidden, c.features);
    L.add("mlp_b1", c.hidden, 1);
    L.add("mlp_W2", out, c.hidden);
    L.add("mlp_b2", out, 1);
  }
}

void fill_uniform(Rng& rng, double* p, Eigen::Index n, double bound) {
  for (Eigen::Index i = 0; i < n; ++i) p[i] = rng.uniform(-bound, bound);
}

}  // namespace

long gaussian_parameter_count(const ModelConfig& cfg) {
  ModelConfig g = cfg;
  g.forward = ForwardVariant::Gaussian;
  g.conditioning = ConditioningVariant::PerGridPoint;
  g.precision = PrecisionVariant::Full;
  g.grid.variant = GridVariant::Sphere;
  return Model(g).parameter_count();
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  require(cfg_.per_point >= 1, "model: per_point must be >= 1");
  require(cfg_.features >= 1 && cfg_.hidden >= 1, "model: features and hidden must be >= 1");
  require(cfg_.hd_montage.size() >= 1, "model: HD montage is empty");
  require(!cfg_.ld_labels.empty(), "model: LD label list is empty");
  require(cfg_.init_spatial_std_mm > 0 && cfg_.init_temporal_std > 0, "model: init widths must be positive");
  grid_ = generate_grid(cfg_.grid);
  for (const auto& label : cfg_.ld_labels) {
    const auto idx = cfg_.hd_montage.index_of(label);
    if (!idx) throw ValidationError("model: LD label '" + label + "' is not in the HD montage");
    ld_indices_.push_back(*idx);
  }
  if (cfg_.conditioning == ConditioningVariant::PreInterpolated)
    spline_ = spline_matrix(ld_positions(), cfg_.hd_montage.positions(), cfg_.spline);
  if (cfg_.forward == ForwardVariant::DirectMlp) {
    direct_hidden_ = cfg_.direct_hidden > 0
                         ? cfg_.direct_hidden
                         : direct_mlp_hidden_for(gaussian_parameter_count(cfg_), encoder_width(), cfg_.features,
                                                 hd_channels());
  }
  build_layout(cfg_, grid_points(), encoder_width(), direct_hidden_, layout_);

  const int NT = components();
  anchor_centers_.resize(NT, 3);
  for (int n = 0; n < NT; ++n) anchor_centers_.row(n) = grid_.points.row(n / cfg_.per_point);

  mask_ = Vec::Ones(static_cast<Eigen::Index>(layout_.total()));
  if (const auto* g = layout_.find("log_diag"); g && cfg_.precision == PrecisionVariant::Spatial3x3)
    for (int n = 0; n < NT; ++n) mask_[static_cast<Eigen::Index>(g->offset) + 4 * n + 3] = 0.0;
  if (const auto* g = layout_.find("offdiag")) {
    const auto m = offdiag_mask(cfg_.precision);
    for (int n = 0; n < NT; ++n)
      for (int k = 0; k < 6; ++k)
        if (!m[static_cast<std::size_t>(k)]) mask_[static_cast<Eigen::Index>(g->offset) + 6 * n + k] = 0.0;
  }
  if (const auto* g = layout_.find("mu"); g && !uses_temporal_axis(cfg_.precision))
    mask_.segment(static_cast<Eigen::Index>(g->offset), g->size()).setZero();
  params_ = Vec::Zero(static_cast<Eigen::Index>(layout_.total()));
  initialize(cfg_.init_seed);
}

int Model::encoder_width() const {
  return cfg_.conditioning == ConditioningVariant::PreInterpolated ? hd_channels() : ld_channels();
}

long Model::parameter_count() const { return static_cast<long>(mask_.sum()); }

Positions Model::ld_positions() const {
  const Positions all = cfg_.hd_montage.positions();
  Positions p(static_cast<Eigen::Index>(ld_indices_.size()), 3);
  for (std::size_t i = 0; i < ld_indices_.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = all.row(ld_indices_[i]);
  return p;
}

ConstMatMap Model::group(const std::string& name) const {
  const auto& g = layout_.at(name);
  return ConstMatMap(params_.data() + g.offset, g.rows, g.cols);
}

MatMap Model::group(const std::string& name) {
  const auto& g = layout_.at(name);
  return MatMap(params_.data() + g.offset, g.rows, g.cols);
}

void Model::initialize(std::uint64_t seed) {
  params_.setZero();
  const int NT = components();
  std::uint64_t tag = 0;
  auto stream = [&] { return Rng(mix_seed(seed, 0x454d4147, ++tag)); };
  for (const auto& g : layout_.groups()) {
    double* p = params_.data() + g.offset;
    Rng rng = stream();
    if (g.name == "w") {
      // zero
    } else if (g.name == "mu") {
      for (int n = 0; n < NT; ++n) p[n] = rng.uniform(0.0, cfg_.init_mu_max);
    } else if (g.name == "log_diag") {
      for (int n = 0; n < NT; ++n) {
        for (int k = 0; k < 3; ++k) p[4 * n + k] = std::log(1.0 / cfg_.init_spatial_std_mm);
        p[4 * n + 3] = std::log(1.0 / cfg_.init_temporal_std);
      }
    } else if (g.name == "log_sigma") {
      for (int n = 0; n < NT; ++n) p[n] = std::log(cfg_.init_spatial_std_mm);
    } else if (g.name == "centers") {
      for (int n = 0; n < NT; ++n)
        for (int k = 0; k < 3; ++k) p[3 * n + k] = anchor_centers_(n, k);
    } else if (g.name == "lin_W") {
      fill_uniform(rng, p, g.size(), 1.0 / std::sqrt(static_cast<double>(NT)));
    } else if (g.name.ends_with("_W") || g.name.ends_with("_W1") || g.name.ends_with("_W2")) {
      fill_uniform(rng, p, g.size(), 1.0 / std::sqrt(static_cast<double>(g.cols)));
    } else if (g.name.ends_with("_b") || g.name.ends_with("_b1") || g.name.ends_with("_b2")) {
      // bias fan-in is the column count of the matching weight
      const std::string wname = g.name.substr(0, g.name.size() - (g.name.back() == 'b' ? 1 : 2)) +
                                (g.name.back() == 'b' ? "W" : std::string("W") + g.name.back());
      fill_uniform(rng, p, g.size(), 1.0 / std::sqrt(static_cast<double>(layout_.at(wname).cols)));
    }
  }
  params_.array() *= mask_.array();
}

FieldView Model::field_view() const {
  require(has_gaussians(cfg_), "model: the " + to_string(cfg_.forward) + " forward variant has no Gaussian field");
  FieldView v;
  const int NT = components();
  v.count = NT;
  auto span_of = [&](const char* name) -> std::span<const double> {
    const auto* g = layout_.find(name);
    if (!g) return {};
    return {params_.data() + g->offset, static_cast<std::size_t>(g->size())};
  };
  v.centers = layout_.find("centers") ? span_of("centers")
                                      : std::span<const double>(anchor_centers_.data(),
                                                                static_cast<std::size_t>(anchor_centers_.size()));
  v.log_diag = span_of("log_diag");
  v.offdiag = span_of("offdiag");
  v.temporal_center = span_of("mu");
  v.log_sigma = span_of("log_sigma");
  v.variant = cfg_.precision;
  return v;
}

GaussianField Model::field() const {
  const FieldView v = field_view();
  GaussianField f;
  f.anchors = grid_.points;
  f.per_point = cfg_.per_point;
  f.variant = cfg_.precision;
  if (layout_.find("centers")) f.free_centers = ConstMatMap(v.centers.data(), v.count, 3);
  const auto w = group("w");
  f.components.resize(static_cast<std::size_t>(v.count));
  for (int n = 0; n < v.count; ++n) {
    auto& c = f.components[static_cast<std::size_t>(n)];
    c.grid_index = n / cfg_.per_point;
    c.slot = n % cfg_.per_point;
    c.amplitude = w(n, 0);
    c.temporal_center = v.temporal_center[static_cast<std::size_t>(n)];
    if (!v.log_diag.empty())
      for (int k = 0; k < 4; ++k) c.chol.log_diag[static_cast<std::size_t>(k)] = v.log_diag[4 * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
    if (!v.offdiag.empty())
      for (int k = 0; k < 6; ++k) c.chol.offdiag[static_cast<std::size_t>(k)] = v.offdiag[6 * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
    if (!v.log_sigma.empty()) c.log_sigma = v.log_sigma[static_cast<std::size_t>(n)];
  }
  return f;
}

void Model::check_ld(const Mat& X_ld) const {
  require(X_ld.rows() == ld_channels(), "model: LD input has " + std::to_string(X_ld.rows()) +
                                            " channels, model expects " + std::to_string(ld_channels()));
  require(X_ld.cols() >= 1, "model: LD input has no timesteps");
  require(X_ld.allFinite(), "model: LD input must be finite");
}

Mat Model::encoder_input(const Mat& X_ld) const {
  return cfg_.conditioning == ConditioningVariant::PreInterpolated ? Mat(spline_ * X_ld) : X_ld;
}

TemporalEncoder Model::encoder() const {
  const auto W = group("enc_W");
  const auto& b = layout_.at("enc_b");
  return {W, ConstVecMap(params_.data() + b.offset, b.size())};
}

ModulationMlp Model::mlp() const {
  const auto& b1 = layout_.at("mlp_b1");
  const auto& b2 = layout_.at("mlp_b2");
  return {group("mlp_W1"), ConstVecMap(params_.data() + b1.offset, b1.size()), group("mlp_W2"),
          ConstVecMap(params_.data() + b2.offset, b2.size())};
}

Mat Model::modulation(const Mat& X_ld) const {
  check_ld(X_ld);
  require(cfg_.forward != ForwardVariant::DirectMlp, "model: direct-MLP forward has no modulation");
  if (cfg_.conditioning == ConditioningVariant::None) return Mat::Zero(1, X_ld.cols());
  return modulate_batch(mlp(), encode_batch(encoder(), encoder_input(X_ld)));
}

Mat Model::amplitudes(const Mat& X_ld) const {
  const Vec w = group("w");
  return expand_amplitudes(w, modulation(X_ld), cfg_.per_point);
}

Mat Model::predict(const Mat& X_ld) const {
  if (cfg_.forward == ForwardVariant::Gaussian) return predict(X_ld, cfg_.hd_montage.positions());
  check_ld(X_ld);
  if (cfg_.forward == ForwardVariant::LearnedLinear) return learned_linear_forward(amplitudes(X_ld), group("lin_W"));
  const auto& b1 = layout_.at("dmlp_b1");
  const auto& b2 = layout_.at("dmlp_b2");
  const DirectMlp d{group("dmlp_W1"), ConstVecMap(params_.data() + b1.offset, b1.size()), group("dmlp_W2"),
                    ConstVecMap(params_.data() + b2.offset, b2.size())};
  return direct_mlp_forward(encoder_input(X_ld), encoder(), d);
}

Mat Model::predict(const Mat& X_ld, const Positions& electrodes) const {
  require(cfg_.forward == ForwardVariant::Gaussian,
          "model: rendering to arbitrary electrodes needs the Gaussian forward variant");
  const Mat a = amplitudes(X_ld);
  const FieldView v = field_view();
  const PrecomputeTables tables = precompute_tables(v, electrodes);
  const Renderer r(tables, v.temporal_center, static_cast<int>(a.cols()));
  return r.forward(a, 0);
}

double Model::mse(const Mat& X_ld, const Mat& target, int chunk_T, Vec* grad) const {
  check_ld(X_ld);
  const int M = hd_channels();
  const int T = static_cast<int>(X_ld.cols());
  require(target.rows() == M && target.cols() == T,
          "model: target shape " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()) +
              " does not match " + std::to_string(M) + "x" + std::to_string(T));
  require(chunk_T >= 1, "model: chunk_T must be >= 1");
  if (grad) require(grad->size() == params_.size(), "model: gradient vector has the wrong size");
  const double scale = 2.0 / (static_cast<double>(M) * static_cast<double>(T));
  const Mat Xin = encoder_input(X_ld);
  auto gmap = [&](const char* name) {
    const auto& g = layout_.at(name);
    return MatMap(grad->data() + g.offset, g.rows, g.cols);
  };
  auto gvec = [&](const char* name) {
    const auto& g = layout_.at(name);
    return VecMap(grad->data() + g.offset, g.size());
  };
  double sse = 0.0;

  if (cfg_.forward == ForwardVariant::DirectMlp) {
    const TemporalEncoder enc = encoder();
    const auto W1 = group("dmlp_W1");
    const auto W2 = group("dmlp_W2");
    const auto& b1 = layout_.at("dmlp_b1");
    const auto& b2 = layout_.at("dmlp_b2");
    const DirectMlp d{W1, ConstVecMap(params_.data() + b1.offset, b1.size()), W2,
                      ConstVecMap(params_.data() + b2.offset, b2.size())};
    for (int t0 = 0; t0 < T; t0 += chunk_T) {
      const int Tc = std::min(chunk_T, T - t0);
      const Mat Xc = Xin.middleCols(t0, Tc);
      const Mat H = encode_batch(enc, Xc);
      Mat Z = W1 * H;
      Z.colwise() += d.b1;
      Z = Z.cwiseMax(0.0);
      Mat pred = W2 * Z;
      pred.colwise() += d.b2;
      const Mat R = pred - target.middleCols(t0, Tc);
      sse += R.squaredNorm();
      if (!grad) continue;
      const Mat G = scale * R;
      gmap("dmlp_W2").noalias() += G * Z.transpose();
      gvec("dmlp_b2") += G.rowwise().sum();
      Mat dZ = W2.transpose() * G;
      dZ = (Z.array() > 0.0).select(dZ, 0.0);
      gmap("dmlp_W1").noalias() += dZ * H.transpose();
      gvec("dmlp_b1") += dZ.rowwise().sum();
      const Mat dH = W1.transpose() * dZ;
      EncoderGrad eg{gmap("enc_W"), gvec("enc_b")};
      encode_backward(Xc, H, dH, eg);
    }
    return sse / (static_cast<double>(M) * static_cast<double>(T));
  }

  const bool gaussian = cfg_.forward == ForwardVariant::Gaussian;
  const bool conditioned = cfg_.conditioning != ConditioningVariant::None;
  const Vec w = group("w");
  std::optional<FieldView> view;
  std::optional<PrecomputeTables> tables;
  std::optional<Renderer> renderer;
  TableGrads tg;
  const Positions electrodes = cfg_.hd_montage.positions();
  if (gaussian) {
    view = field_view();
    tables = precompute_tables(*view, electrodes);
    renderer.emplace(*tables, view->temporal_center, T);
    if (grad) tg.reset(M, components());
  }
  std::optional<TemporalEncoder> enc;
  std::optional<ModulationMlp> net;
  if (conditioned) {
    enc.emplace(encoder());
    net.emplace(mlp());
  }
  const int delta_rows = cfg_.conditioning == ConditioningVariant::GlobalScalar ? 1 : grid_points();

  for (int t0 = 0; t0 < T; t0 += chunk_T) {
    const int Tc = std::min(chunk_T, T - t0);
    Mat Xc, H, Z, a;
    if (conditioned) {
      Xc = Xin.middleCols(t0, Tc);
      H = encode_batch(*enc, Xc);
      a = expand_amplitudes(w, modulate_batch(*net, H, &Z), cfg_.per_point);
    } else {
      a = expand_amplitudes(w, Mat::Zero(1, Tc), cfg_.per_point);
    }
    const Mat pred = gaussian ? renderer->forward(a, t0) : Mat(group("lin_W") * a);
    const Mat R = pred - target.middleCols(t0, Tc);
    sse += R.squaredNorm();
    if (!grad) continue;
    const Mat G = scale * R;
    Mat ga;
    if (gaussian) {
      renderer->backward(a, t0, G, tg, ga);
    } else {
      gmap("lin_W").noalias() += G * a.transpose();
      ga = group("lin_W").transpose() * G;
    }
    gvec("w") += ga.rowwise().sum();
    if (conditioned) {
      const Mat gd = reduce_amplitude_grad(ga, cfg_.per_point, delta_rows);
      MlpGrad mg{gmap("mlp_W1"), gvec("mlp_b1"), gmap("mlp_W2"), gvec("mlp_b2")};
      const Mat dH = modulate_backward(*net, H, Z, gd, mg);
      EncoderGrad eg{gmap("enc_W"), gvec("enc_b")};
      encode_backward(Xc, H, dH, eg);
    }
  }

  if (grad && gaussian) {
    auto sink = [&](const char* name) -> std::span<double> {
      const auto* g = layout_.find(name);
      if (!g) return {};
      return {grad->data() + g->offset, static_cast<std::size_t>(g->size())};
    };
    precompute_tables_backward(*view, electrodes, tg,
                               {sink("log_diag"), sink("offdiag"), sink("log_sigma"), sink("centers")});
    if (uses_temporal_axis(cfg_.precision)) gvec("mu") += temporal_center_grad(*tables, tg);
  }
  if (grad) grad->array() *= mask_.array();
  return sse / (static_cast<double>(M) * static_cast<double>(T));
}

}  // namespace emag
