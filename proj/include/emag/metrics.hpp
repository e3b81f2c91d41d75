#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "emag/common.hpp"

namespace emag {

struct TrialMetrics {
  double nmse = 0.0;
  double pcc = 0.0;
  double snr_db = 0.0;
  int constant_channels = 0;  // channels skipped by pcc
};

/// ||pred - target||_F^2 / ||target||_F^2.
double nmse(const Mat& pred, const Mat& target);
/// Mean over channels of the per-channel Pearson correlation over time. Channels where
/// either signal is constant are skipped and counted in *skipped.
double pcc(const Mat& pred, const Mat& target, int* skipped = nullptr);
/// 10 log10(||target||^2 / ||pred - target||^2); +inf for an exact reconstruction.
double snr_db(const Mat& pred, const Mat& target);

TrialMetrics evaluate_trial(const Mat& pred, const Mat& target);

struct TrialRecord {
  std::string subject;
  std::uint64_t seed = 0;
  int trial = 0;
  TrialMetrics metrics;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1) across seeds; 0 for a single seed
  int infinite = 0;  // non-finite values excluded
};

struct AggregateMetrics {
  MetricSummary nmse, pcc, snr_db;
  int seeds = 0;
  int subjects = 0;
  int trials = 0;
  nlohmann::json to_json() const;
};

/// Trials -> subject mean -> mean over subjects per seed -> mean and sample std over seeds.
AggregateMetrics aggregate(const std::vector<TrialRecord>& records);

/// CSV with header subject,seed,trial,nmse,pcc,snr_db.
std::string trial_csv(const std::vector<TrialRecord>& records);
std::vector<TrialRecord> parse_trial_csv(const std::string& text);

}  // namespace emag
