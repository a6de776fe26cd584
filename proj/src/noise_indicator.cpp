#include "icgnn/noise_indicator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>

#include "icgnn/errors.hpp"

namespace icgnn {

int ClassIndexSets::total() const {
  int t = 0;
  for (const auto& s : sets) t += static_cast<int>(s.size());
  return t;
}

std::vector<int> ClassIndexSets::labels() const {
  std::vector<int> lab(static_cast<std::size_t>(total()), -1);
  for (int c = 0; c < n_classes(); ++c)
    for (int i : sets[c]) lab[static_cast<std::size_t>(i)] = c;
  return lab;
}

ClassIndexSets class_index_sets(const std::vector<int>& noisy_labels, int n_classes) {
  ClassIndexSets out;
  out.sets.resize(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < noisy_labels.size(); ++i) {
    const int y = noisy_labels[i];
    if (y < 0 || y >= n_classes)
      throw DataError("class_index_sets: label " + std::to_string(y) + " outside [0," +
                      std::to_string(n_classes) + ") at position " + std::to_string(i));
    out.sets[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

// Shared evaluation; `map` turns a labeled position into a matrix index.
template <typename MapFn>
IcsVector ics_impl(const Matrix& influence, const ClassIndexSets& sets, int l, MapFn map,
                   IcsLevel level) {
  const auto label_of = sets.labels();
  IcsVector out;
  out.level = level;
  out.values.assign(static_cast<std::size_t>(l), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < l; ++i) {
    const std::size_t col = map(static_cast<int>(i));
    double score = 0.0;
    for (int c = 0; c < sets.n_classes(); ++c) {
      if (c == label_of[static_cast<std::size_t>(i)] || sets.sets[c].empty()) continue;
      double s = 0.0;
      for (int k : sets.sets[c]) s += influence(map(k), col);
      score += s / static_cast<double>(sets.sets[c].size());
    }
    out.values[static_cast<std::size_t>(i)] = score;
  }
  return out;
}

}  // namespace

IcsVector structure_ics(const Matrix& influence, const ClassIndexSets& sets,
                        const std::vector<int>& labeled_ids) {
  const int l = sets.total();
  if (static_cast<int>(labeled_ids.size()) != l)
    throw DataError("structure_ics: labeled_ids size does not match class sets");
  return ics_impl(
      influence, sets, l,
      [&labeled_ids](int i) { return static_cast<std::size_t>(labeled_ids[static_cast<std::size_t>(i)]); },
      IcsLevel::structure);
}

IcsVector attribute_ics(const Matrix& influence, const ClassIndexSets& sets) {
  const int l = sets.total();
  if (influence.rows != static_cast<std::size_t>(l) || influence.cols != static_cast<std::size_t>(l))
    throw DataError("attribute_ics: diffusion matrix must be L x L");
  return ics_impl(
      influence, sets, l, [](int i) { return static_cast<std::size_t>(i); },
      IcsLevel::attribute);
}

IcsVector fuse_ics(const IcsVector& s, const IcsVector& a, double alpha) {
  if (s.values.size() != a.values.size()) throw DataError("fuse_ics: length mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("fuse_ics: alpha must lie in [0,1]");
  IcsVector out;
  out.level = IcsLevel::fused;
  out.values.resize(s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i)
    out.values[i] = (1.0 - alpha) * s.values[i] + alpha * a.values[i];
  return out;
}

namespace {

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

// Linear interpolation between closest ranks, on sorted input.
double percentile(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

double GmmModel::posterior(double x, int q) const {
  double lp[2];
  for (int c = 0; c < 2; ++c)
    lp[c] = (weight[c] > 0.0 ? std::log(weight[c]) : -1e300) +
            log_normal_pdf(x, mean[c], variance[c]);
  const double mx = std::max(lp[0], lp[1]);
  const double lse = mx + std::log(std::exp(lp[0] - mx) + std::exp(lp[1] - mx));
  return std::exp(lp[q] - lse);
}

GmmModel fit_gmm(const IcsVector& ics, int max_iters) {
  const std::size_t l = ics.values.size();
  if (l < 2) throw DataError("fit_gmm: need at least 2 values");
  if (max_iters < 1) throw ConfigError("fit_gmm: max_iters must be >= 1");
  const auto& x = ics.values;

  GmmModel m;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) {
    m.degenerate = true;
    m.mean = {*mn, *mn};
    m.variance = {kGmmVarianceFloor, kGmmVarianceFloor};
    return m;
  }

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double total_mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(l);
  double var = 0.0;
  for (double v : x) var += (v - total_mean) * (v - total_mean);
  var = std::max(var / static_cast<double>(l), kGmmVarianceFloor);
  m.mean = {percentile(sorted, 0.25), percentile(sorted, 0.75)};
  m.variance = {var, var};
  m.weight = {0.5, 0.5};

  std::vector<double> resp0(l);
  for (int it = 0; it < max_iters; ++it) {
    // E step
    double ll = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      double lp[2];
      for (int q = 0; q < 2; ++q)
        lp[q] = (m.weight[q] > 0.0 ? std::log(m.weight[q]) : -1e300) +
                log_normal_pdf(x[i], m.mean[q], m.variance[q]);
      const double peak = std::max(lp[0], lp[1]);
      const double lse = peak + std::log(std::exp(lp[0] - peak) + std::exp(lp[1] - peak));
      resp0[i] = std::exp(lp[0] - lse);
      ll += lse;
    }
    m.log_likelihood.push_back(ll);
    if (it > 0 && ll - m.log_likelihood[static_cast<std::size_t>(it) - 1] < 1e-6) break;

    // M step
    for (int q = 0; q < 2; ++q) {
      double nq = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < l; ++i) {
        const double r = q == 0 ? resp0[i] : 1.0 - resp0[i];
        nq += r;
        sx += r * x[i];
      }
      m.weight[q] = nq / static_cast<double>(l);
      if (nq <= 0.0) continue;  // dead component keeps its location
      m.mean[q] = sx / nq;
      double sv = 0.0;
      for (std::size_t i = 0; i < l; ++i) {
        const double r = q == 0 ? resp0[i] : 1.0 - resp0[i];
        const double d = x[i] - m.mean[q];
        sv += r * d * d;
      }
      m.variance[q] = std::max(sv / nq, kGmmVarianceFloor);
    }
  }
  return m;
}

CleanConfidence clean_confidence(const GmmModel& model, const IcsVector& ics) {
  CleanConfidence out;
  out.beta.resize(ics.values.size());
  if (model.degenerate) {
    std::fill(out.beta.begin(), out.beta.end(), 1.0);
    return out;
  }
  const int clean = model.mean[0] <= model.mean[1] ? 0 : 1;
  for (std::size_t i = 0; i < ics.values.size(); ++i)
    out.beta[i] = model.posterior(ics.values[i], clean);
  return out;
}

}  // namespace icgnn
