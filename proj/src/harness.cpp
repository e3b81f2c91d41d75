#include "emag/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

namespace emag {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::pair<std::string, json>>& ablation_variants() {
  static const std::vector<std::pair<std::string, json>> v = {
      {"full", json::object()},
      {"spatial3x3", {{"precision", "spatial3x3"}}},
      {"diagonal", {{"precision", "diagonal"}}},
      {"spatial-coupling", {{"precision", "spatial-coupling"}}},
      {"temporal-coupling", {{"precision", "temporal-coupling"}}},
      {"isotropic", {{"precision", "isotropic"}}},
      {"free-centers", {{"grid", {{"variant", "free"}}}}},
      {"surface-shell", {{"grid", {{"variant", "surface-shell"}}}}},
      {"static", {{"conditioning", "none"}}},
      {"global-scalar", {{"conditioning", "global-scalar"}}},
      {"pre-interpolated", {{"conditioning", "pre-interpolated"}}},
      {"direct-mlp", {{"forward", "direct-mlp"}}},
      {"learned-linear", {{"forward", "learned-linear"}}},
  };
  return v;
}

json variant_overrides(const std::string& name) {
  for (const auto& [n, o] : ablation_variants())
    if (n == name) return o;
  std::string known;
  for (const auto& [n, o] : ablation_variants()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown model variant '" + name + "' (known: " + known + ")");
}

std::string dataset_hash(const Dataset& ds) {
  std::string acc = ds.montage.hash();
  for (const auto& s : ds.subjects) {
    acc += "|" + s.id;
    for (const auto& t : s.trials) acc += sha256_hex(encode_eegd(t));
  }
  return sha256_hex(acc);
}

std::vector<Sample> PreparedSubject::samples(const std::vector<int>& ld_indices, const std::string& split) const {
  require(split == "train" || split == "val" || split == "test", "samples: unknown split '" + split + "'");
  std::vector<Sample> out;
  for (const auto& rec : trials)
    if (rec.split == split) out.push_back({make_ld(rec, ld_indices).data, rec.data, id + "/" + std::to_string(rec.trial)});
  return out;
}

PreparedSubject prepare_subject(const Dataset& ds, const std::string& subject, std::uint64_t seed) {
  PreparedSubject p;
  p.id = subject;
  p.trials = ds.subject(subject).trials;
  p.manifest = split_and_normalize(p.trials, seed);
  return p;
}

// ---------------------------------------------------------------------------------------------

SubsetSpec CellSpec::resolved_subset(int M) const {
  if (subset.kind != SubsetSpec::Kind::Random) return subset;
  return SubsetSpec::random(seed, ld_count_for_factor(M, r));
}

ModelConfig CellSpec::model_config(const Montage& montage) const {
  for (const char* k : {"hd_montage", "ld_labels"})
    if (model.contains(k)) throw ValidationError(std::string("plan model config: '") + k + "' is set per cell");
  json j = model;
  j.merge_patch(variant_overrides(variant));
  ModelConfig c = ModelConfig::from_json(j);
  c.hd_montage = montage;
  c.ld_labels.clear();
  for (int i : select_subset(montage, resolved_subset(montage.size()))) c.ld_labels.push_back(montage[i].label);
  c.init_seed = seed;
  return c;
}

json CellSpec::to_json() const {
  json j = {{"kind", kind == Kind::Emag ? "emag" : "spline"},
            {"subject", subject},
            {"r", r},
            {"seed", seed},
            {"subset", subset.to_json()},
            {"dataset_hash", dataset_hash}};
  if (kind == Kind::Emag) {
    j["variant"] = variant;
    j["model"] = model;
    j["train"] = train.to_json();
  } else {
    j["spline"] = model.value("spline", SplineConfig{}.to_json());
  }
  return j;
}

CellSpec CellSpec::from_json(const json& j) {
  CellSpec c;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "emag" && kind != "spline") throw ParseError("cell: unknown kind '" + kind + "'");
    c.kind = kind == "emag" ? Kind::Emag : Kind::Spline;
    c.subject = j.at("subject").get<std::string>();
    c.r = j.at("r").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.subset = SubsetSpec::from_json(j.at("subset"));
    c.dataset_hash = j.value("dataset_hash", std::string());
    if (c.kind == Kind::Emag) {
      c.variant = j.at("variant").get<std::string>();
      c.model = j.at("model");
      c.train = TrainConfig::from_json(j.at("train"));
    } else {
      c.variant = "spline";
      c.model = {{"spline", j.value("spline", SplineConfig{}.to_json())}};
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("cell: ") + e.what());
  }
  return c;
}

std::string CellSpec::key() const { return sha256_hex(to_json().dump() + "|" + kCodeVersion); }

// ---------------------------------------------------------------------------------------------

std::vector<TrialRecord> evaluate_model(const Model& model, const PreparedSubject& subject,
                                        const std::vector<int>& ld_indices, std::uint64_t seed) {
  require(ld_indices == model.ld_indices(), "evaluation LD subset differs from the model's LD channels");
  std::vector<TrialRecord> out;
  for (const auto& rec : subject.trials) {
    if (rec.split != "test") continue;
    const Mat pred = model.predict(make_ld(rec, ld_indices).data);
    out.push_back({subject.id, seed, rec.trial, evaluate_trial(pred, rec.data)});
  }
  return out;
}

std::vector<TrialRecord> evaluate_spline(const Montage& montage, const PreparedSubject& subject,
                                         const std::vector<int>& ld_indices, std::uint64_t seed,
                                         const SplineConfig& cfg) {
  const Mat S = spline_matrix(montage.subset(ld_indices).positions(), montage.positions(), cfg);
  std::vector<TrialRecord> out;
  for (const auto& rec : subject.trials) {
    if (rec.split != "test") continue;
    const Mat pred = S * make_ld(rec, ld_indices).data;
    out.push_back({subject.id, seed, rec.trial, evaluate_trial(pred, rec.data)});
  }
  return out;
}

namespace {

void write_json(const fs::path& p, const json& j) { write_file_atomic(p.string(), j.dump(2) + "\n"); }

json metrics_file(const CellSpec& cell, const AggregateMetrics& agg, const std::vector<int>& idx, long params) {
  json j = {{"key", cell.key()}, {"metrics", agg.to_json()}, {"m", idx.size()}, {"ld_indices", idx}};
  if (cell.kind == CellSpec::Kind::Emag) j["parameter_count"] = params;
  return j;
}

}  // namespace

CellOutcome run_cell(const CellSpec& cell, const Dataset& ds, const std::string& dir) {
  const fs::path d(dir);
  fs::create_directories(d);
  CellOutcome out;
  out.key = cell.key();
  write_json(d / "cell.json", cell.to_json());
  std::error_code ec;
  fs::remove(d / "error.json", ec);
  try {
    const PreparedSubject ps = prepare_subject(ds, cell.subject, cell.seed);
    const auto idx = select_subset(ds.montage, cell.resolved_subset(ds.montage.size()));
    long params = 0;
    if (cell.kind == CellSpec::Kind::Emag) {
      const ModelConfig mc = cell.model_config(ds.montage);
      TrainConfig tc = cell.train;
      tc.seed = cell.seed;
      write_json(d / "config.json", {{"model", mc.to_json()}, {"train", tc.to_json()}, {"split", ps.manifest.to_json()}});
      Model model(mc);
      params = model.parameter_count();
      TrainResult res = train(model, ps.samples(idx, "train"), ps.samples(idx, "val"), tc);
      out.trials = evaluate_model(model, ps, idx, cell.seed);
      out.metrics = aggregate(out.trials);
      res.report.final_metrics = out.metrics.to_json();
      json report = res.report.to_json();
      report.erase("wall_time_s");
      write_json(d / "train_report.json", report);
      write_json(d / "timing.json", {{"wall_time_s", res.report.wall_time_s}});
      const json prov = {{"seed", cell.seed},
                         {"subject", cell.subject},
                         {"r", cell.r},
                         {"subset", cell.resolved_subset(ds.montage.size()).to_json()},
                         {"dataset_hash", cell.dataset_hash},
                         {"epochs", res.report.stop_epoch},
                         {"best_epoch", res.report.best_epoch},
                         {"best_val_loss", res.report.best_val},
                         {"stop_reason", res.report.stop_reason},
                         {"train", tc.to_json()},
                         {"split_hash", ps.manifest.hash()},
                         {"cell_key", out.key}};
      save_checkpoint(ModelCheckpoint::from_model(model, prov, &res.optimizer), (d / "model.ckpt").string());
    } else {
      const SplineConfig sc = SplineConfig::from_json(cell.model.value("spline", SplineConfig{}.to_json()));
      out.trials = evaluate_spline(ds.montage, ps, idx, cell.seed, sc);
      out.metrics = aggregate(out.trials);
    }
    write_file_atomic((d / "trials.csv").string(), trial_csv(out.trials));
    write_json(d / "metrics.json", metrics_file(cell, out.metrics, idx, params));
    out.ok = true;
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    out.error = e.what();
    write_json(d / "error.json", {{"key", out.key}, {"kind", err ? err->kind() : "internal"}, {"error", out.error}});
  }
  return out;
}

std::optional<CellOutcome> load_cell(const std::string& dir) {
  const fs::path d(dir);
  if (!fs::exists(d / "metrics.json") || !fs::exists(d / "trials.csv")) return std::nullopt;
  CellOutcome out;
  const json m = json::parse(read_file((d / "metrics.json").string()));
  out.key = m.at("key").get<std::string>();
  out.ok = true;
  out.cached = true;
  out.trials = parse_trial_csv(read_file((d / "trials.csv").string()));
  out.metrics = aggregate(out.trials);
  return out;
}

// ---------------------------------------------------------------------------------------------

ExperimentPlan ExperimentPlan::from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ParseError("plan: expected an object");
  ExperimentPlan p;
  const auto resolve = [&](const std::string& s) {
    const fs::path q(s);
    return q.is_absolute() ? s : (fs::path(base_dir) / q).lexically_normal().string();
  };
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "dataset") p.dataset = resolve(v.get<std::string>());
      else if (k == "out") p.out = resolve(v.get<std::string>());
      else if (k == "subjects") p.subjects = v.get<std::vector<std::string>>();
      else if (k == "factors") p.factors = v.get<std::vector<double>>();
      else if (k == "seeds") p.seeds = v.get<std::vector<std::uint64_t>>();
      else if (k == "subsets") p.subsets = v.get<std::vector<std::string>>();
      else if (k == "variants") p.variants = v.is_string() ? std::vector<std::string>{v.get<std::string>()}
                                                          : v.get<std::vector<std::string>>();
      else if (k == "baselines") p.baselines = v.get<std::vector<std::string>>();
      else if (k == "model") p.model = v;
      else if (k == "train") p.train = TrainConfig::from_json(v);
      else if (k == "$comment") continue;
      else throw ParseError("plan: unknown key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
  if (p.dataset.empty()) throw ParseError("plan: 'dataset' is required");
  if (p.out.empty()) throw ParseError("plan: 'out' is required");
  require(!p.factors.empty() && !p.seeds.empty(), "plan: factors and seeds must be non-empty");
  for (double r : p.factors) require(r > 1.0, "plan: super-resolution factors must exceed 1");
  for (const auto& b : p.baselines) require(b == "spline", "plan: unknown baseline '" + b + "'");
  std::vector<std::string> expanded;
  for (const auto& v : p.variants) {
    if (v == "ablation") {
      for (const auto& [n, o] : ablation_variants()) expanded.push_back(n);
    } else {
      variant_overrides(v);
      expanded.push_back(v);
    }
  }
  p.variants = expanded;
  for (auto& s : p.subsets) {
    if (to_lower_ascii(s) == "random") {
      s = "random";
      continue;
    }
    const auto id = canonical_subset_id(s);
    if (!id) throw ValidationError("plan: unknown named subset '" + s + "'");
    s = *id;
  }
  ModelConfig::from_json(p.model);  // reject unknown keys early
  p.train.validate();
  return p;
}

ExperimentPlan ExperimentPlan::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

json ExperimentPlan::to_json() const {
  return {{"dataset", dataset}, {"out", out},         {"subjects", subjects}, {"factors", factors},
          {"seeds", seeds},     {"subsets", subsets}, {"variants", variants}, {"baselines", baselines},
          {"model", ModelConfig::from_json(model).to_json()},                 {"train", train.to_json()}};
}

std::vector<CellSpec> ExperimentPlan::cells(const Dataset& ds) const {
  std::vector<std::string> subs = subjects;
  if (subs.empty())
    for (const auto& s : ds.subjects) subs.push_back(s.id);
  const std::string dh = dataset_hash(ds);
  const int M = ds.montage.size();
  std::vector<CellSpec> out;
  for (const auto& subject : subs) {
    ds.subject(subject);
    for (auto seed : seeds) {
      for (const auto& subset : subsets) {
        std::vector<double> rs;
        SubsetSpec spec;
        if (subset == "random") {
          rs = factors;
        } else {
          spec = SubsetSpec::named(subset);
          const int m = static_cast<int>(named_subset_catalog().at(subset).size());
          double r = static_cast<double>(M) / m;
          for (double f : factors)
            if (ld_count_for_factor(M, f) == m) r = f;
          rs = {r};
        }
        for (double r : rs) {
          CellSpec base;
          base.subject = subject;
          base.r = r;
          base.seed = seed;
          base.subset = spec;
          base.dataset_hash = dh;
          if (subset == "random") base.subset = base.resolved_subset(M);
          for (const auto& v : variants) {
            CellSpec c = base;
            c.variant = v;
            c.model = model;
            c.train = train;
            out.push_back(c);
          }
          for (const auto& b : baselines) {
            (void)b;
            CellSpec c = base;
            c.kind = CellSpec::Kind::Spline;
            c.variant = "spline";
            c.model = {{"spline", ModelConfig::from_json(model).spline.to_json()}};
            out.push_back(c);
          }
        }
      }
    }
  }
  return out;
}

json PlanResult::to_json() const {
  json cj = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto& o = outcomes[i];
    json e = {{"key", o.key},         {"kind", c.kind == CellSpec::Kind::Emag ? "emag" : "spline"},
              {"subject", c.subject}, {"r", c.r},
              {"seed", c.seed},       {"subset", c.subset.key()},
              {"variant", c.variant}, {"ok", o.ok}};
    if (o.ok) e["metrics"] = o.metrics.to_json();
    else e["error"] = o.error;
    cj.push_back(e);
  }
  return {{"trained", trained}, {"cached", cached}, {"failed", failed}, {"cells", cj}};
}

PlanResult run_plan(const ExperimentPlan& plan, int jobs, bool verbose) {
  const Dataset ds = load_dataset(plan.dataset);
  PlanResult res;
  res.cells = plan.cells(ds);
  res.outcomes.resize(res.cells.size());
  const fs::path root(plan.out);
  fs::create_directories(root / "cells");
  write_json(root / "plan.json", plan.to_json());

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const std::string key = res.cells[i].key();
    if (auto done = load_cell((root / "cells" / key).string())) {
      res.outcomes[i] = *done;
      ++res.cached;
    } else {
      pending.push_back(i);
    }
  }
  const auto log = [&](std::size_t i, const CellOutcome& o) {
    if (!verbose) return;
    const auto& c = res.cells[i];
    std::cerr << "[" << (o.ok ? "done" : "FAIL") << "] " << c.subject << " r=" << c.r << " seed=" << c.seed << " "
              << c.subset.key() << " " << c.variant;
    if (o.ok) std::cerr << " nmse=" << o.metrics.nmse.mean << " pcc=" << o.metrics.pcc.mean;
    else std::cerr << " error: " << o.error;
    std::cerr << "\n";
  };
  const auto finish = [&](std::size_t i, CellOutcome o) {
    res.outcomes[i] = std::move(o);
    if (res.outcomes[i].ok) ++res.trained;
    else ++res.failed;
    log(i, res.outcomes[i]);
  };

  if (jobs <= 1) {
    for (std::size_t i : pending) finish(i, run_cell(res.cells[i], ds, (root / "cells" / res.cells[i].key()).string()));
  } else {
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0;
    std::cout.flush();
    std::cerr.flush();
    while (next < pending.size() || !running.empty()) {
      while (next < pending.size() && static_cast<int>(running.size()) < jobs) {
        const std::size_t i = pending[next++];
        const pid_t pid = fork();
        if (pid < 0) throw Error("fork failed", "io");
        if (pid == 0) {
          const CellOutcome o = run_cell(res.cells[i], ds, (root / "cells" / res.cells[i].key()).string());
          std::_Exit(o.ok ? 0 : 1);
        }
        running[pid] = i;
      }
      int status = 0;
      const pid_t pid = waitpid(-1, &status, 0);
      if (pid < 0) throw Error("waitpid failed", "io");
      const auto it = running.find(pid);
      if (it == running.end()) continue;
      const std::size_t i = it->second;
      running.erase(it);
      const fs::path dir = root / "cells" / res.cells[i].key();
      if (auto done = load_cell(dir.string())) {
        done->cached = false;
        finish(i, *done);
      } else {
        CellOutcome o;
        o.key = res.cells[i].key();
        if (fs::exists(dir / "error.json")) {
          o.error = json::parse(read_file((dir / "error.json").string())).value("error", "unknown error");
        } else {
          o.error = "worker exited with status " + std::to_string(status);
          write_json(dir / "error.json", {{"key", o.key}, {"kind", "internal"}, {"error", o.error}});
        }
        finish(i, o);
      }
    }
  }
  write_json(root / "summary.json", res.to_json());
  return res;
}

// ---------------------------------------------------------------------------------------------

json TransferMatrix::to_json() const {
  json rows = json::array();
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < values.cols(); ++j) row.push_back(values(i, j));
    rows.push_back(row);
  }
  json j = {{"subjects", subjects}, {"metric", metric}, {"r", r}, {"seed", seed}, {"values", rows}, {"within", within}};
  if (cross) j["cross"] = *cross;
  else j["cross"] = "no off-diagonal";
  return j;
}

std::map<std::string, TransferMatrix> transfer_matrix(const std::vector<ModelCheckpoint>& models,
                                                      const std::vector<std::string>& model_subjects,
                                                      const Dataset& ds, double r, std::uint64_t seed,
                                                      const SubsetSpec& subset) {
  require(models.size() == model_subjects.size() && !models.empty(), "transfer: one checkpoint per subject required");
  const std::size_t S = models.size();
  const std::string mh = ds.montage.hash();
  std::vector<Model> built;
  for (std::size_t i = 0; i < S; ++i) {
    if (models[i].config.hd_montage.hash() != mh)
      throw ValidationError("transfer: checkpoint for " + model_subjects[i] + " was trained on a different montage");
    built.push_back(models[i].to_model());
  }
  CellSpec probe;
  probe.r = r;
  probe.seed = seed;
  probe.subset = subset;
  const auto idx = select_subset(ds.montage, probe.resolved_subset(ds.montage.size()));

  std::map<std::string, TransferMatrix> out;
  for (const char* metric : {"nmse", "pcc", "snr_db"}) {
    TransferMatrix& t = out[metric];
    t.subjects = model_subjects;
    t.metric = metric;
    t.r = r;
    t.seed = seed;
    t.values = Mat::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
  }
  for (std::size_t j = 0; j < S; ++j) {
    const PreparedSubject ps = prepare_subject(ds, model_subjects[j], seed);
    for (std::size_t i = 0; i < S; ++i) {
      const AggregateMetrics a = aggregate(evaluate_model(built[i], ps, idx, seed));
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      out["nmse"].values(ii, jj) = a.nmse.mean;
      out["pcc"].values(ii, jj) = a.pcc.mean;
      out["snr_db"].values(ii, jj) = a.snr_db.mean;
    }
  }
  for (auto& [name, t] : out) {
    double diag = 0.0, off = 0.0;
    for (Eigen::Index i = 0; i < t.values.rows(); ++i)
      for (Eigen::Index j = 0; j < t.values.cols(); ++j) (i == j ? diag : off) += t.values(i, j);
    t.within = diag / static_cast<double>(S);
    if (S > 1) t.cross = off / static_cast<double>(S * (S - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

std::string subset_label(const SubsetSpec& s) { return s.kind == SubsetSpec::Kind::Random ? "Random" : s.key().substr(6); }

int subset_size(const SubsetSpec& s) {
  if (s.kind == SubsetSpec::Kind::Named) return static_cast<int>(named_subset_catalog().at(*canonical_subset_id(s.id)).size());
  return s.target_count;
}

struct Group {
  std::string label, reference;
  double r;
  int m;
  std::vector<TrialRecord> records;
};

std::vector<TableRow> build_table(const PlanResult& res, bool by_subset) {
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    if (!res.outcomes[i].ok) continue;
    const auto& c = res.cells[i];
    const std::string sub = subset_label(c.subset);
    std::string label, ref, ctx;
    char rbuf[32];
    std::snprintf(rbuf, sizeof rbuf, "%g", c.r);
    if (by_subset) {
      label = c.kind == CellSpec::Kind::Spline ? sub + " (spline)" : (c.variant == "full" ? sub : sub + "/" + c.variant);
      ref = c.variant == "full" || c.kind == CellSpec::Kind::Spline ? "Random" : "Random/" + c.variant;
    } else {
      label = c.variant + (sub == "Random" ? "" : " [" + sub + "]");
      ref = std::string("full") + (sub == "Random" ? "" : " [" + sub + "]");
    }
    const std::string id = label + "@" + rbuf;
    auto [it, fresh] = groups.try_emplace(id, Group{label, ref + "@" + rbuf, c.r, subset_size(c.subset), {}});
    if (fresh) order.push_back(id);
    auto& recs = it->second.records;
    recs.insert(recs.end(), res.outcomes[i].trials.begin(), res.outcomes[i].trials.end());
  }
  std::vector<TableRow> rows;
  std::map<std::string, AggregateMetrics> agg;
  for (const auto& id : order) agg[id] = aggregate(groups[id].records);
  for (const auto& id : order) {
    const Group& g = groups[id];
    TableRow row{g.label, g.r, g.m, agg[id], {}, {}, {}};
    if (const auto ref = agg.find(g.reference); ref != agg.end()) {
      row.d_nmse = row.metrics.nmse.mean - ref->second.nmse.mean;
      row.d_pcc = row.metrics.pcc.mean - ref->second.pcc.mean;
      row.d_snr = row.metrics.snr_db.mean - ref->second.snr_db.mean;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

}  // namespace

std::vector<TableRow> subset_table(const PlanResult& result) { return build_table(result, true); }
std::vector<TableRow> ablation_table(const PlanResult& result) { return build_table(result, false); }

std::string table_csv(const std::vector<TableRow>& rows) {
  std::string s = "label,r,m,seeds,nmse_mean,nmse_std,pcc_mean,pcc_std,snr_db_mean,snr_db_std,d_nmse,d_pcc,d_snr_db\n";
  for (const auto& r : rows) {
    const auto& a = r.metrics;
    s += r.label + "," + fmt(r.r) + "," + std::to_string(r.m) + "," + std::to_string(a.seeds) + "," + fmt(a.nmse.mean) +
         "," + fmt(a.nmse.std) + "," + fmt(a.pcc.mean) + "," + fmt(a.pcc.std) + "," + fmt(a.snr_db.mean) + "," +
         fmt(a.snr_db.std) + "," + opt(r.d_nmse) + "," + opt(r.d_pcc) + "," + opt(r.d_snr) + "\n";
  }
  return s;
}

std::string table_markdown(const std::vector<TableRow>& rows, const std::string& title) {
  char b[256];
  std::string s = "### " + title + "\n\n| Variant | r | m | NMSE | PCC | SNR (dB) | ΔNMSE | ΔPCC | ΔSNR |\n";
  s += "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    const auto& a = r.metrics;
    std::snprintf(b, sizeof b, "| %s | %g | %d | %.4f ± %.4f | %.4f ± %.4f | %.2f ± %.2f | ", r.label.c_str(), r.r, r.m,
                  a.nmse.mean, a.nmse.std, a.pcc.mean, a.pcc.std, a.snr_db.mean, a.snr_db.std);
    s += b;
    const auto d = [&](const std::optional<double>& v, const char* f) {
      if (!v) return std::string("–");
      std::snprintf(b, sizeof b, f, *v);
      return std::string(b);
    };
    s += d(r.d_nmse, "%+.4f") + " | " + d(r.d_pcc, "%+.4f") + " | " + d(r.d_snr, "%+.2f") + " |\n";
  }
  return s;
}

}  // namespace emag
