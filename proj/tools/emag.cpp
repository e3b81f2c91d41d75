// emag command-line tool.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "emag/braingrid.hpp"
#include "emag/checkpoint.hpp"
#include "emag/eegd.hpp"
#include "emag/harness.hpp"
#include "emag/interp.hpp"
#include "emag/svg.hpp"
#include "emag/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emag;

namespace {

struct Globals {
  bool json_out = false;
};

Globals g;

void emit(const json& j, const std::string& text) {
  if (g.json_out) std::cout << j.dump(2) << "\n";
  else std::cout << text;
}

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string metrics_text(const AggregateMetrics& a) {
  return "nmse " + fmt("%.6f", a.nmse.mean) + "  pcc " + fmt("%.6f", a.pcc.mean) + "  snr_db " +
         fmt("%.4f", a.snr_db.mean) + "  (" + std::to_string(a.trials) + " trials)\n";
}

/// RunConfig file: {"model": {...}, "train": {...}}.
void load_run_config(const std::string& path, json& model, TrainConfig& train) {
  if (path.empty()) return;
  const json j = read_json(path);
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (k == "model") {
      ModelConfig::from_json(v);
      model = v;
    } else if (k == "train") {
      train = TrainConfig::from_json(v);
    } else if (k != "$comment") {
      throw ParseError(path + ": unknown key '" + k + "'");
    }
  }
}

SubsetSpec subset_from_arg(const std::string& s) {
  if (to_lower_ascii(s) == "random") return SubsetSpec{};
  const auto id = canonical_subset_id(s);
  if (!id) throw ValidationError("unknown named subset '" + s + "'");
  return SubsetSpec::named(*id);
}

std::string subject_of(const ModelCheckpoint& c, const std::string& override_subject) {
  if (!override_subject.empty()) return override_subject;
  const std::string s = c.provenance.value("subject", std::string());
  if (s.empty()) throw ValidationError("checkpoint has no subject in its provenance; pass --subject");
  return s;
}

// ---------------------------------------------------------------------------------------------

void cmd_grid(int R, double radius, const std::string& variant, const std::string& lattice, const std::string& out) {
  GridSpec spec;
  spec.resolution = R;
  spec.radius_mm = radius;
  spec.variant = grid_variant_from_string(variant);
  spec.lattice = lattice_convention_from_string(lattice);
  const BrainGrid grid = generate_grid(spec);
  if (!out.empty()) write_json_file(out, grid.to_json());
  emit({{"R", R}, {"radius_mm", radius}, {"variant", to_string(spec.variant)}, {"lattice", to_string(spec.lattice)},
        {"points", grid.size()}},
       "R=" + std::to_string(R) + " " + to_string(spec.variant) + " grid: " + std::to_string(grid.size()) + " points\n");
}

void cmd_synth(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
  SynthSpec spec = spec_path.empty() ? SynthSpec{} : SynthSpec::from_json(read_json(spec_path));
  if (seed) spec.seed = *seed;
  const Dataset ds = generate(spec);
  save_dataset(ds, out);
  write_json_file((fs::path(out) / "synth_spec.json").string(), spec.to_json());
  emit({{"out", out}, {"subjects", ds.subjects.size()}, {"trials", spec.trials}, {"channels", ds.montage.size()},
        {"dataset_hash", dataset_hash(ds)}},
       "wrote " + std::to_string(ds.subjects.size()) + " subjects x " + std::to_string(spec.trials) + " trials to " +
           out + "\n");
}

void cmd_train(const std::string& data, const std::string& subject, double r, std::uint64_t seed,
               const std::string& subset, const std::string& variant, const std::string& config, const std::string& out,
               std::optional<int> R, std::optional<int> G, std::optional<int> epochs) {
  CellSpec cell;
  load_run_config(config, cell.model, cell.train);
  if (R) cell.model["grid"]["R"] = *R;
  if (G) cell.model["per_point"] = *G;
  if (epochs) cell.train.max_epochs = *epochs;
  const Dataset ds = load_dataset(data);
  cell.subject = subject.empty() ? ds.subjects.at(0).id : subject;
  cell.r = r;
  cell.seed = seed;
  cell.subset = subset_from_arg(subset);
  if (cell.subset.kind == SubsetSpec::Kind::Named) {
    const int m = static_cast<int>(named_subset_catalog().at(cell.subset.id).size());
    cell.r = static_cast<double>(ds.montage.size()) / m;
  }
  cell.subset = cell.resolved_subset(ds.montage.size());
  cell.variant = variant;
  cell.dataset_hash = dataset_hash(ds);
  const CellOutcome o = run_cell(cell, ds, out);
  if (!o.ok) throw Error("training failed: " + o.error, "train");
  const json rep = read_json((fs::path(out) / "train_report.json").string());
  emit({{"out", out}, {"key", o.key}, {"metrics", o.metrics.to_json()}, {"stop_reason", rep.at("stop_reason")},
        {"best_epoch", rep.at("best_epoch")}},
       "trained " + cell.subject + " (" + rep.at("stop_reason").get<std::string>() + ", best epoch " +
           std::to_string(rep.at("best_epoch").get<int>()) + ")\ntest " + metrics_text(o.metrics));
}

void cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& subject_arg,
              std::optional<std::uint64_t> seed_arg, const std::string& csv_out) {
  const ModelCheckpoint ck = load_checkpoint(ckpt_path);
  const Model model = ck.to_model();
  const Dataset ds = load_dataset(data);
  if (ds.montage.hash() != model.config().hd_montage.hash())
    throw ValidationError("dataset montage differs from the checkpoint's HD montage");
  const std::string subject = subject_of(ck, subject_arg);
  const std::uint64_t seed = seed_arg.value_or(ck.provenance.value("seed", std::uint64_t{0}));
  const PreparedSubject ps = prepare_subject(ds, subject, seed);
  const auto trials = evaluate_model(model, ps, model.ld_indices(), seed);
  const AggregateMetrics a = aggregate(trials);
  if (!csv_out.empty()) write_file_atomic(csv_out, trial_csv(trials));
  emit({{"subject", subject}, {"seed", seed}, {"metrics", a.to_json()}}, subject + " test " + metrics_text(a));
}

EegRecording select_labels(const EegRecording& rec, const std::vector<std::string>& labels) {
  std::vector<int> idx;
  for (const auto& l : labels) {
    int found = -1;
    for (std::size_t i = 0; i < rec.labels.size(); ++i)
      if (to_lower_ascii(rec.labels[i]) == to_lower_ascii(l)) found = static_cast<int>(i);
    if (found < 0) throw ValidationError("LD recording has no channel '" + l + "'");
    idx.push_back(found);
  }
  EegRecording out = make_ld(rec, idx);
  out.labels = labels;
  return out;
}

void cmd_render(const std::string& ckpt_path, const std::string& montage_path, const std::string& ld_path,
                const std::string& out) {
  const ModelCheckpoint ck = load_checkpoint(ckpt_path);
  const Model model = ck.to_model();
  const Montage target = montage_path.empty() ? model.config().hd_montage : load_montage(montage_path);
  const EegRecording ld = select_labels(read_eegd(ld_path), model.config().ld_labels);
  EegRecording hd;
  hd.data = model.config().forward == ForwardVariant::Gaussian ? model.predict(ld.data, target.positions())
                                                                : model.predict(ld.data);
  if (hd.data.rows() != target.size())
    throw ValidationError("this forward variant only renders to the training montage");
  hd.rate_hz = ld.rate_hz;
  hd.labels = target.labels();
  hd.subject = ld.subject;
  hd.trial = ld.trial;
  hd.split = ld.split;
  if (out.size() > 5 && out.substr(out.size() - 5) == ".json") write_eegd_pair(hd, out);
  else write_eegd(hd, out);
  emit({{"out", out}, {"channels", hd.channels()}, {"timesteps", hd.timesteps()}, {"finite", hd.data.allFinite()}},
       "rendered " + std::to_string(hd.channels()) + " x " + std::to_string(hd.timesteps()) + " to " + out + "\n");
}

void cmd_spline(const std::string& data, const std::string& subject, double r, std::uint64_t seed,
                const std::string& subset, const std::string& ld_path, const std::string& montage_path,
                const std::string& out) {
  const SplineConfig cfg;
  if (!ld_path.empty()) {
    if (montage_path.empty() || out.empty()) throw ValidationError("--ld needs --montage and --out");
    const EegRecording ld = read_eegd(ld_path);
    const Montage target = load_montage(montage_path);
    Positions ldpos(ld.channels(), 3);
    for (int i = 0; i < ld.channels(); ++i) {
      const auto k = target.index_of(ld.labels[static_cast<std::size_t>(i)]);
      if (!k) throw ValidationError("LD channel '" + ld.labels[static_cast<std::size_t>(i)] + "' is not in the montage");
      ldpos.row(i) = target[*k].position.transpose();
    }
    EegRecording hd = ld;
    hd.data = spline_upsample(ld.data, ldpos, target.positions(), cfg);
    hd.labels = target.labels();
    write_eegd(hd, out);
    emit({{"out", out}, {"channels", hd.channels()}}, "wrote " + out + "\n");
    return;
  }
  if (data.empty()) throw ValidationError("either --data or --ld is required");
  const Dataset ds = load_dataset(data);
  CellSpec cell;
  cell.r = r;
  cell.seed = seed;
  cell.subset = subset_from_arg(subset);
  const auto idx = select_subset(ds.montage, cell.resolved_subset(ds.montage.size()));
  const std::string sub = subject.empty() ? ds.subjects.at(0).id : subject;
  const auto trials = evaluate_spline(ds.montage, prepare_subject(ds, sub, seed), idx, seed, cfg);
  const AggregateMetrics a = aggregate(trials);
  if (!out.empty()) write_file_atomic(out, trial_csv(trials));
  emit({{"subject", sub}, {"r", r}, {"m", idx.size()}, {"metrics", a.to_json()}}, sub + " spline " + metrics_text(a));
}

void cmd_subset_list() {
  json j = json::object();
  std::string text;
  for (const auto& [id, labels] : named_subset_catalog()) {
    j[id] = labels;
    text += id + " (" + std::to_string(labels.size()) + "):";
    for (const auto& l : labels) text += " " + l;
    text += "\n";
  }
  emit(j, text);
}

void cmd_subset_resolve(const std::string& id, std::optional<std::uint64_t> seed, int m, std::optional<double> r,
                        const std::string& montage_path) {
  const Montage montage = montage_path.empty() ? seed62_montage() : load_montage(montage_path);
  SubsetSpec spec;
  if (!id.empty()) {
    spec = subset_from_arg(id);
  } else {
    if (r) m = ld_count_for_factor(montage.size(), *r);
    spec = SubsetSpec::random(seed.value_or(0), m);
  }
  const auto idx = select_subset(montage, spec);
  std::vector<std::string> labels;
  for (int i : idx) labels.push_back(montage[i].label);
  std::string text = spec.key() + ":";
  for (const auto& l : labels) text += " " + l;
  emit({{"subset", spec.to_json()}, {"indices", idx}, {"labels", labels}}, text + "\n");
}

json plan_summary(const PlanResult& res) {
  return {{"cells", res.cells.size()}, {"trained", res.trained}, {"cached", res.cached}, {"failed", res.failed}};
}

std::string plan_text(const PlanResult& res) {
  return std::to_string(res.cells.size()) + " cells: " + std::to_string(res.trained) + " trained, " +
         std::to_string(res.cached) + " cached, " + std::to_string(res.failed) + " failed\n";
}

int cmd_run(const std::string& plan_path, int jobs, bool verbose) {
  const ExperimentPlan plan = ExperimentPlan::load(plan_path);
  const PlanResult res = run_plan(plan, jobs, verbose);
  emit(plan_summary(res), plan_text(res));
  return res.failed ? 1 : 0;
}

int cmd_table(const std::string& plan_path, int jobs, bool verbose, bool ablate) {
  ExperimentPlan plan = ExperimentPlan::load(plan_path);
  if (ablate) {
    plan.variants.clear();
    for (const auto& [n, o] : ablation_variants()) plan.variants.push_back(n);
  }
  const PlanResult res = run_plan(plan, jobs, verbose);
  const auto rows = ablate ? ablation_table(res) : subset_table(res);
  const std::string stem = (fs::path(plan.out) / (ablate ? "ablation" : "subset_study")).string();
  write_file_atomic(stem + ".csv", table_csv(rows));
  const std::string md = table_markdown(rows, ablate ? "Ablation" : "Electrode subsets");
  write_file_atomic(stem + ".md", md);
  json j = plan_summary(res);
  j["table"] = stem + ".csv";
  emit(j, plan_text(res) + "\n" + md);
  return res.failed ? 1 : 0;
}

void cmd_xfer(const std::string& ckpt_dir, const std::string& data, const std::string& out, const std::string& svg_out) {
  const Dataset ds = load_dataset(data);
  // Group checkpoints by (r, seed, subset); one model per subject within a group.
  std::map<std::string, std::vector<std::pair<std::string, ModelCheckpoint>>> groups;
  std::vector<std::string> paths;
  for (const auto& e : fs::recursive_directory_iterator(ckpt_dir))
    if (e.is_regular_file() && e.path().extension() == ".ckpt") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ValidationError("no .ckpt files under " + ckpt_dir);
  for (const auto& p : paths) {
    ModelCheckpoint c = load_checkpoint(p);
    const json& pv = c.provenance;
    if (!pv.contains("subject") || !pv.contains("r") || !pv.contains("seed") || !pv.contains("subset"))
      throw ValidationError(p + ": checkpoint provenance lacks subject/r/seed/subset");
    const std::string key = pv.at("r").dump() + "|" + pv.at("seed").dump() + "|" + pv.at("subset").dump();
    groups[key].emplace_back(pv.at("subject").get<std::string>(), std::move(c));
  }
  json result = json::array();
  std::string text, svgs;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ModelCheckpoint> models;
    std::vector<std::string> subjects;
    for (auto& [s, c] : members) {
      if (std::find(subjects.begin(), subjects.end(), s) != subjects.end())
        throw ValidationError("two checkpoints for subject " + s + " in one (r, seed, subset) group");
      subjects.push_back(s);
      models.push_back(c);
    }
    const json& pv = models.front().provenance;
    const double r = pv.at("r").get<double>();
    const auto seed = pv.at("seed").get<std::uint64_t>();
    const auto tm = transfer_matrix(models, subjects, ds, r, seed, SubsetSpec::from_json(pv.at("subset")));
    json entry = {{"r", r}, {"seed", seed}, {"subset", pv.at("subset")}};
    for (const auto& [name, t] : tm) entry[name] = t.to_json();
    result.push_back(entry);
    const auto& pcc = tm.at("pcc");
    text += "r=" + fmt("%g", r) + " seed=" + std::to_string(seed) + "  within PCC " + fmt("%.4f", pcc.within) +
            "  cross PCC " + (pcc.cross ? fmt("%.4f", *pcc.cross) : std::string("no off-diagonal")) + "\n";
    if (!svg_out.empty() && svgs.empty())
      svgs = svg::heatmap(pcc.values, subjects, subjects,
                          {"Transfer PCC (r=" + fmt("%g", r) + ", seed " + std::to_string(seed) + ")", "data subject",
                           "model subject", 420, 360});
  }
  if (!out.empty()) write_json_file(out, result);
  if (!svg_out.empty()) write_file_atomic(svg_out, svgs);
  emit(result, text);
}

void cmd_sources(const std::string& ckpt_path, const std::string& data, const std::string& subject_arg, int k,
                 int samples, const std::string& window, const std::string& mode, const std::string& svg_out,
                 const std::string& out) {
  const ModelCheckpoint ck = load_checkpoint(ckpt_path);
  const Model model = ck.to_model();
  if (model.config().forward != ForwardVariant::Gaussian)
    throw ValidationError("source validation needs a Gaussian forward model");
  const Dataset ds = load_dataset(data);
  const std::string subject = subject_of(ck, subject_arg);
  const SubjectData& sd = ds.subject(subject);
  if (sd.truth.empty()) throw ValidationError("dataset has no planted sources for " + subject);
  const std::uint64_t seed = ck.provenance.value("seed", std::uint64_t{0});
  const PreparedSubject ps = prepare_subject(ds, subject, seed);
  std::vector<Mat> ld;
  for (const auto& s : ps.samples(model.ld_indices(), "test")) ld.push_back(s.ld);
  if (ld.empty()) throw ValidationError("subject has no test trials");
  int t0 = 0, t1 = static_cast<int>(ld.front().cols());
  if (!window.empty()) {
    const auto colon = window.find(':');
    if (colon == std::string::npos) throw ValidationError("--window expects begin:end");
    t0 = std::stoi(window.substr(0, colon));
    t1 = std::stoi(window.substr(colon + 1));
  }
  const auto scores = score_components(model, ld, t0, t1, mode == "base" ? ScoreMode::BaseAmplitude : ScoreMode::Energy);
  Positions truth(static_cast<Eigen::Index>(sd.truth.size()), 3);
  for (std::size_t i = 0; i < sd.truth.size(); ++i) truth.row(static_cast<Eigen::Index>(i)) = sd.truth[i].position.transpose();
  const Positions centers = model.field().centers();
  const auto rep = validate_sources(scores, centers, truth, model.grid().points, k, samples, seed);
  if (!svg_out.empty()) {
    svg::Series top{"top-" + std::to_string(k), {}, {}, "#d62728", 4.0}, src{"planted", {}, {}, "#2ca02c", 6.0},
        grid{"grid", {}, {}, "#cccccc", 1.5};
    for (int i = 0; i < model.grid().size(); ++i) {
      grid.x.push_back(model.grid().points(i, 0));
      grid.y.push_back(model.grid().points(i, 1));
    }
    for (int i = 0; i < std::min<int>(k, static_cast<int>(scores.size())); ++i) {
      top.x.push_back(centers(scores[static_cast<std::size_t>(i)].component, 0));
      top.y.push_back(centers(scores[static_cast<std::size_t>(i)].component, 1));
    }
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      src.x.push_back(truth(i, 0));
      src.y.push_back(truth(i, 1));
    }
    write_file_atomic(svg_out, svg::scatter({grid, top, src}, {"Top components vs planted sources (x-y)", "x (mm)",
                                                               "y (mm)", 480, 440}));
  }
  if (!out.empty()) write_json_file(out, rep.to_json());
  emit(rep.to_json(), "d1 " + fmt("%.2f", rep.d1) + " mm  d_mean@" + std::to_string(rep.k) + " " +
                          fmt("%.2f", rep.d_mean_k) + " mm  chance " + fmt("%.2f", rep.d_chance) + " mm  p " +
                          fmt("%.4f", rep.p) + "\n");
}

void cmd_aniso(const std::string& ckpt_path, const std::string& csv_out, const std::string& svg_out) {
  const ModelCheckpoint ck = load_checkpoint(ckpt_path);
  const Model model = ck.to_model();
  if (model.config().forward != ForwardVariant::Gaussian) throw ValidationError("anisotropy needs a Gaussian forward model");
  const AnisotropyStats st = anisotropy_stats(model.field());
  if (!csv_out.empty()) write_file_atomic(csv_out, st.csv());
  if (!svg_out.empty()) {
    std::vector<double> v;
    for (const auto& c : st.components) v.push_back(c.log10_condition);
    write_file_atomic(svg_out, svg::histogram(v, 30, {"Spatial covariance anisotropy", "log10 condition number",
                                                       "components", 480, 360}));
  }
  const json s = st.summary();
  emit(s, s.dump(2) + "\n");
}

void cmd_version() {
  emit({{"version", kCodeVersion},
        {"format_versions", {{"checkpoint", kCheckpointVersion}, {"eegd", kEegdVersion}, {"dataset", 1}}}},
       std::string("emag ") + kCodeVersion + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMAG: EEG super-resolution with anisotropic 4D Gaussian fields"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", g.json_out, "Machine-readable JSON output");

  int R = 12, jobs = 1, k = 10, samples = 5000, m = 0;
  double radius = 90.0, r = 2.0;
  std::string variant = "sphere", lattice = "cell-centered", out, spec, data, subject, subset = "random",
              model_variant = "full", config, ckpt, montage, ld, plan, ckpts, window, mode = "energy", svg_out, csv_out,
              id;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> opt_seed;
  std::optional<int> opt_R, opt_G, opt_epochs;
  std::optional<double> opt_r;
  bool verbose = false;

  auto* grid = app.add_subcommand("grid", "Generate the anchor grid and report its size");
  grid->add_option("--R", R, "Lattice resolution")->capture_default_str();
  grid->add_option("--radius", radius, "Brain sphere radius (mm)")->capture_default_str();
  grid->add_option("--variant", variant, "sphere | surface-shell | free")->capture_default_str();
  grid->add_option("--lattice", lattice, "cell-centered | inclusive")->capture_default_str();
  grid->add_option("--out", out, "Write grid points as JSON");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", spec, "Synthetic spec JSON (default: built-in)");
  synth->add_option("--out", out, "Output dataset directory")->required();
  synth->add_option("--seed", opt_seed, "Override the generator seed");

  auto* train = app.add_subcommand("train", "Train one model and evaluate it on the test split");
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--subject", subject, "Subject id (default: first)");
  train->add_option("--r", r, "Super-resolution factor")->capture_default_str();
  train->add_option("--seed", seed, "Split / subset / init seed")->capture_default_str();
  train->add_option("--subset", subset, "random or a named subset id")->capture_default_str();
  train->add_option("--variant", model_variant, "Model variant (see ablate)")->capture_default_str();
  train->add_option("--config", config, "Run config JSON {model, train}");
  train->add_option("--R", opt_R, "Grid resolution override");
  train->add_option("--G", opt_G, "Components per grid point override");
  train->add_option("--epochs", opt_epochs, "Max epochs override");
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a subject's test split");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--subject", subject, "Subject id (default: from checkpoint)");
  eval->add_option("--seed", opt_seed, "Split seed (default: from checkpoint)");
  eval->add_option("--csv", csv_out, "Write per-trial CSV");

  auto* render = app.add_subcommand("render", "Render HD signals for an LD recording");
  render->add_option("--ckpt", ckpt, "Checkpoint")->required();
  render->add_option("--montage", montage, "Target montage JSON (default: training montage)");
  render->add_option("--ld", ld, "LD recording (.eegd)")->required();
  render->add_option("--out", out, "Output recording (.eegd, or .json for header + .bin)")->required();

  auto* spline = app.add_subcommand("spline", "Spherical-spline LD upsampling baseline");
  spline->add_option("--data", data, "Dataset directory (metrics mode)");
  spline->add_option("--subject", subject, "Subject id");
  spline->add_option("--r", r, "Super-resolution factor")->capture_default_str();
  spline->add_option("--seed", seed, "Split / subset seed")->capture_default_str();
  spline->add_option("--subset", subset, "random or a named subset id")->capture_default_str();
  spline->add_option("--ld,--in", ld, "LD recording to upsample");
  spline->add_option("--montage", montage, "Target montage for --ld");
  spline->add_option("--out", out, "Output recording (--ld) or per-trial CSV (--data)");

  auto* subset_cmd = app.add_subcommand("subset", "Inspect electrode subsets");
  subset_cmd->require_subcommand(1);
  auto* subset_list = subset_cmd->add_subcommand("list", "List the named subsets");
  auto* subset_resolve = subset_cmd->add_subcommand("resolve", "Resolve a subset to labels");
  subset_resolve->add_option("--id", id, "Named subset id");
  subset_resolve->add_option("--seed", opt_seed, "Random subset seed");
  subset_resolve->add_option("--m", m, "Random subset size");
  subset_resolve->add_option("--r", opt_r, "Random subset size from a factor");
  subset_resolve->add_option("--montage", montage, "Montage JSON (default: seed62)");

  auto add_plan = [&](CLI::App* sc) {
    sc->add_option("--plan", plan, "Experiment plan JSON")->required();
    sc->add_option("--jobs", jobs, "Worker processes")->capture_default_str();
    sc->add_flag("--verbose", verbose, "Log each finished cell");
  };
  auto* subset_study = app.add_subcommand("subset-study", "Run a plan and emit the subset table");
  add_plan(subset_study);
  auto* ablate = app.add_subcommand("ablate", "Run a plan over every ablation variant and emit the table");
  add_plan(ablate);
  auto* run = app.add_subcommand("run", "Run every cell of an experiment plan");
  add_plan(run);

  auto* xfer = app.add_subcommand("xfer", "Cross-subject transfer matrices");
  xfer->add_option("--ckpts", ckpts, "Directory searched for .ckpt files")->required();
  xfer->add_option("--data", data, "Dataset directory")->required();
  xfer->add_option("--out", out, "Output JSON");
  xfer->add_option("--svg", svg_out, "PCC heatmap of the first group");

  auto* sources = app.add_subcommand("sources", "Score components and compare with planted sources");
  sources->add_option("--ckpt", ckpt, "Checkpoint")->required();
  sources->add_option("--data", data, "Dataset directory with truth.json")->required();
  sources->add_option("--subject", subject, "Subject id (default: from checkpoint)");
  sources->add_option("--k,--topk", k, "Top-K components")->capture_default_str();
  sources->add_option("--samples", samples, "Chance draws")->capture_default_str();
  sources->add_option("--window", window, "Timestep window begin:end (default: whole trial)");
  sources->add_option("--mode", mode, "energy | base")->capture_default_str();
  sources->add_option("--svg", svg_out, "Scatter of top components and sources");
  sources->add_option("--out", out, "Write the report JSON");

  auto* aniso = app.add_subcommand("aniso", "Anisotropy statistics of a trained field");
  aniso->add_option("--ckpt", ckpt, "Checkpoint")->required();
  aniso->add_option("--csv,--out", csv_out, "Per-component CSV");
  aniso->add_option("--svg", svg_out, "Histogram of log10 condition numbers");

  auto* version = app.add_subcommand("version", "Print version information");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*grid) cmd_grid(R, radius, variant, lattice, out);
    else if (*synth) cmd_synth(spec, out, opt_seed);
    else if (*train) cmd_train(data, subject, r, seed, subset, model_variant, config, out, opt_R, opt_G, opt_epochs);
    else if (*eval) cmd_eval(ckpt, data, subject, opt_seed, csv_out);
    else if (*render) cmd_render(ckpt, montage, ld, out);
    else if (*spline) cmd_spline(data, subject, r, seed, subset, ld, montage, out);
    else if (*subset_list) cmd_subset_list();
    else if (*subset_resolve) cmd_subset_resolve(id, opt_seed, m, opt_r, montage);
    else if (*subset_study) return cmd_table(plan, jobs, verbose, false);
    else if (*ablate) return cmd_table(plan, jobs, verbose, true);
    else if (*run) return cmd_run(plan, jobs, verbose);
    else if (*xfer) cmd_xfer(ckpts, data, out, svg_out);
    else if (*sources) cmd_sources(ckpt, data, subject, k, samples, window, mode, svg_out, out);
    else if (*aniso) cmd_aniso(ckpt, csv_out, svg_out);
    else if (*version) cmd_version();
    return 0;
  } catch (const Error& e) {
    std::cerr << json({{"error", e.kind()}, {"message", e.what()}}).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json({{"error", "internal"}, {"message", e.what()}}).dump() << "\n";
    return 1;
  }
}
