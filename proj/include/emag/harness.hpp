#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "emag/checkpoint.hpp"
#include "emag/diffengine.hpp"
#include "emag/metrics.hpp"
#include "emag/synthdata.hpp"

namespace emag {

#ifndef EMAG_VERSION
#define EMAG_VERSION "0.0.0"
#endif
inline constexpr const char* kCodeVersion = EMAG_VERSION;

/// Model-config overrides for each ablation variant, in table order ("full" first).
const std::vector<std::pair<std::string, nlohmann::json>>& ablation_variants();
nlohmann::json variant_overrides(const std::string& name);

/// Content hash of a dataset (montage and every trial payload).
std::string dataset_hash(const Dataset& ds);

/// One subject's trials, split and z-scored with a given seed.
struct PreparedSubject {
  std::string id;
  std::vector<EegRecording> trials;
  DatasetManifest manifest;
  std::vector<Sample> samples(const std::vector<int>& ld_indices, const std::string& split) const;
};
PreparedSubject prepare_subject(const Dataset& ds, const std::string& subject, std::uint64_t seed);

struct CellSpec {
  enum class Kind { Emag, Spline };
  Kind kind = Kind::Emag;
  std::string subject;
  double r = 2.0;
  std::uint64_t seed = 0;  // split, subset, init and shuffle seed
  SubsetSpec subset;       // Random subsets take their seed and size from the cell
  std::string variant = "full";
  nlohmann::json model = nlohmann::json::object();  // base model config, before variant overrides
  TrainConfig train;
  std::string dataset_hash;

  /// Subset with cell-derived fields filled in.
  SubsetSpec resolved_subset(int M) const;
  ModelConfig model_config(const Montage& montage) const;
  nlohmann::json to_json() const;
  static CellSpec from_json(const nlohmann::json& j);
  /// SHA-256 of the canonical cell JSON and the code version.
  std::string key() const;
};

/// Per-trial metrics of a model on one subject's test split.
std::vector<TrialRecord> evaluate_model(const Model& model, const PreparedSubject& subject,
                                        const std::vector<int>& ld_indices, std::uint64_t seed);
std::vector<TrialRecord> evaluate_spline(const Montage& montage, const PreparedSubject& subject,
                                         const std::vector<int>& ld_indices, std::uint64_t seed,
                                         const SplineConfig& cfg = {});

struct CellOutcome {
  std::string key;
  bool ok = false;
  bool cached = false;
  std::string error;
  AggregateMetrics metrics;
  std::vector<TrialRecord> trials;
};

/// Trains (when needed) and evaluates one cell, writing into dir:
/// cell.json, config.json, model.ckpt, train_report.json, timing.json, trials.csv, metrics.json.
/// A failure writes error.json instead of metrics.
CellOutcome run_cell(const CellSpec& cell, const Dataset& ds, const std::string& dir);
/// Reads a completed cell directory; nullopt when metrics.json is absent.
std::optional<CellOutcome> load_cell(const std::string& dir);

struct ExperimentPlan {
  std::string dataset;  // directory
  std::string out;      // result store
  std::vector<std::string> subjects;  // empty: all
  std::vector<double> factors{2.0};
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> subsets{"random"};  // "random" or named ids
  std::vector<std::string> variants{"full"};  // "ablation" expands to the full grid
  std::vector<std::string> baselines;          // "spline"
  nlohmann::json model = nlohmann::json::object();
  TrainConfig train;

  /// Paths are resolved against base_dir. Unknown keys are rejected.
  static ExperimentPlan from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static ExperimentPlan load(const std::string& path);
  nlohmann::json to_json() const;

  std::vector<CellSpec> cells(const Dataset& ds) const;
};

struct PlanResult {
  std::vector<CellSpec> cells;
  std::vector<CellOutcome> outcomes;  // parallel to cells
  int trained = 0, cached = 0, failed = 0;
  nlohmann::json to_json() const;
};

/// Runs every cell not already complete under plan.out/cells/<key>. jobs > 1 forks one
/// worker process per cell, at most `jobs` at a time.
PlanResult run_plan(const ExperimentPlan& plan, int jobs = 1, bool verbose = false);

struct TransferMatrix {
  std::vector<std::string> subjects;
  std::string metric;
  double r = 0.0;
  std::uint64_t seed = 0;
  Mat values;  // row: model subject, column: data subject
  double within = 0.0;
  std::optional<double> cross;  // undefined for one subject
  nlohmann::json to_json() const;
};

/// T(i, j) = mean test metric of model i on subject j (subject j's split and LD subset).
std::map<std::string, TransferMatrix> transfer_matrix(const std::vector<ModelCheckpoint>& models,
                                                      const std::vector<std::string>& model_subjects,
                                                      const Dataset& ds, double r, std::uint64_t seed,
                                                      const SubsetSpec& subset);

/// Aggregated row of a subset or ablation table.
struct TableRow {
  std::string label;
  double r = 0.0;
  int m = 0;
  AggregateMetrics metrics;
  std::optional<double> d_nmse, d_pcc, d_snr;  // vs the reference row at the same r
};

/// Subset study: one row per (subset, r) with deltas against Random at the same r.
std::vector<TableRow> subset_table(const PlanResult& result);
/// Ablation grid: one row per variant with deltas against "full".
std::vector<TableRow> ablation_table(const PlanResult& result);

std::string table_csv(const std::vector<TableRow>& rows);
std::string table_markdown(const std::vector<TableRow>& rows, const std::string& title);

}  // namespace emag
