#include "emag/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace emag {

namespace {
void check_shapes(const Mat& pred, const Mat& target, const char* what) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          std::string(what) + ": prediction is " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
              ", target is " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  require(target.size() > 0, std::string(what) + ": empty input");
}
}  // namespace

double nmse(const Mat& pred, const Mat& target) {
  check_shapes(pred, target, "nmse");
  const double energy = target.squaredNorm();
  if (energy == 0.0) throw NumericError("nmse: target has zero energy");
  return (pred - target).squaredNorm() / energy;
}

double pcc(const Mat& pred, const Mat& target, int* skipped) {
  check_shapes(pred, target, "pcc");
  double sum = 0.0;
  int used = 0, constant = 0;
  for (Eigen::Index j = 0; j < target.rows(); ++j) {
    const Eigen::ArrayXd p = pred.row(j).transpose().array() - pred.row(j).mean();
    const Eigen::ArrayXd t = target.row(j).transpose().array() - target.row(j).mean();
    const double vp = p.square().sum(), vt = t.square().sum();
    if (vp == 0.0 || vt == 0.0) {
      ++constant;
      continue;
    }
    sum += (p * t).sum() / std::sqrt(vp * vt);
    ++used;
  }
  if (skipped) *skipped = constant;
  if (used == 0) throw NumericError("pcc: every channel is constant");
  return sum / used;
}

double snr_db(const Mat& pred, const Mat& target) {
  check_shapes(pred, target, "snr");
  const double err = (pred - target).squaredNorm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(err / target.squaredNorm());
}

TrialMetrics evaluate_trial(const Mat& pred, const Mat& target) {
  TrialMetrics m;
  m.nmse = nmse(pred, target);
  m.pcc = pcc(pred, target, &m.constant_channels);
  m.snr_db = m.nmse == 0.0 ? std::numeric_limits<double>::infinity() : -10.0 * std::log10(m.nmse);
  return m;
}

nlohmann::json AggregateMetrics::to_json() const {
  auto one = [](const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"std", s.std}, {"infinite", s.infinite}};
  };
  return {{"nmse", one(nmse)},  {"pcc", one(pcc)},         {"snr_db", one(snr_db)},
          {"seeds", seeds},     {"subjects", subjects},    {"trials", trials},
          {"std_kind", "sample"}};
}

AggregateMetrics aggregate(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw ValidationError("aggregate: no trials");
  AggregateMetrics out;
  out.trials = static_cast<int>(records.size());
  using Getter = double (*)(const TrialMetrics&);
  const Getter getters[3] = {[](const TrialMetrics& m) { return m.nmse; },
                             [](const TrialMetrics& m) { return m.pcc; },
                             [](const TrialMetrics& m) { return m.snr_db; }};
  MetricSummary* slots[3] = {&out.nmse, &out.pcc, &out.snr_db};
  std::map<std::string, int> subjects;
  for (const auto& r : records) subjects[r.subject] = 1;
  out.subjects = static_cast<int>(subjects.size());

  for (int k = 0; k < 3; ++k) {
    // seed -> subject -> (sum, count)
    std::map<std::uint64_t, std::map<std::string, std::pair<double, int>>> acc;
    int infinite = 0;
    for (const auto& r : records) {
      const double v = getters[k](r.metrics);
      auto& cell = acc[r.seed][r.subject];
      if (!std::isfinite(v)) {
        ++infinite;
        continue;
      }
      cell.first += v;
      cell.second += 1;
    }
    std::vector<double> per_seed;
    for (const auto& [seed, subj] : acc) {
      double s = 0.0;
      int n = 0;
      for (const auto& [name, sc] : subj) {
        if (sc.second == 0) continue;
        s += sc.first / sc.second;
        ++n;
      }
      if (n > 0) per_seed.push_back(s / n);
    }
    out.seeds = static_cast<int>(acc.size());
    MetricSummary& m = *slots[k];
    m.infinite = infinite;
    if (per_seed.empty()) {
      m.mean = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double mean = 0.0;
    for (double v : per_seed) mean += v;
    mean /= static_cast<double>(per_seed.size());
    double var = 0.0;
    for (double v : per_seed) var += (v - mean) * (v - mean);
    m.mean = mean;
    m.std = per_seed.size() > 1 ? std::sqrt(var / static_cast<double>(per_seed.size() - 1)) : 0.0;
  }
  return out;
}

namespace {
std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string trial_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  out << "subject,seed,trial,nmse,pcc,snr_db\n";
  for (const auto& r : records)
    out << r.subject << ',' << r.seed << ',' << r.trial << ',' << fmt(r.metrics.nmse) << ',' << fmt(r.metrics.pcc)
        << ',' << fmt(r.metrics.snr_db) << '\n';
  return out.str();
}

std::vector<TrialRecord> parse_trial_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "subject,seed,trial,nmse,pcc,snr_db")
    throw ParseError("trial csv: unexpected header '" + line + "'");
  std::vector<TrialRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ParseError("trial csv line " + std::to_string(lineno) + ": expected 6 fields");
    try {
      TrialRecord r;
      r.subject = f[0];
      r.seed = std::stoull(f[1]);
      r.trial = std::stoi(f[2]);
      r.metrics.nmse = std::stod(f[3]);
      r.metrics.pcc = std::stod(f[4]);
      r.metrics.snr_db = std::stod(f[5]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("trial csv line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

}  // namespace emag
