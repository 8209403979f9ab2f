#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "gobs/core/error.hpp"

namespace gobs::stats {

inline constexpr std::size_t kWilcoxonExactMaxN = 12;

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw PreconditionError("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw PreconditionError("median of empty sample");
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Average ranks (1-based) of `values`, ties sharing the mean rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

struct WilcoxonResult {
  double w_plus = 0.0;   // sum of ranks of positive differences
  double w_minus = 0.0;  // sum of ranks of negative differences
  std::size_t n = 0;     // nonzero differences
  double z = 0.0;        // normal-approximation statistic (reported on both paths)
  double p = 1.0;        // two-sided
  bool exact = false;
};

// Signed-rank test on paired samples (x_i - y_i). Zero differences are dropped.
// For n <= 12 the p-value is exact: the null distribution of W+ over all 2^n
// sign assignments is counted by dynamic programming on doubled ranks. Above
// that a normal approximation with tie correction is used.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("wilcoxon: samples differ in length");
  if (x.empty()) throw PreconditionError("wilcoxon: empty input");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (double d = x[i] - y[i]; d != 0.0) diffs.push_back(d);

  WilcoxonResult r;
  r.n = diffs.size();
  if (r.n == 0) {
    r.exact = true;
    return r;
  }
  std::vector<double> abs_d(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) abs_d[i] = std::abs(diffs[i]);
  auto ranks = average_ranks(abs_d);
  for (std::size_t i = 0; i < diffs.size(); ++i) (diffs[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];

  const double n = static_cast<double>(r.n);
  const double mu = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  {
    auto sorted = abs_d;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      double t = static_cast<double>(j - i + 1);
      var -= (t * t * t - t) / 48.0;
      i = j + 1;
    }
  }
  r.z = var > 0.0 ? (r.w_plus - mu) / std::sqrt(var) : 0.0;

  if (r.n <= kWilcoxonExactMaxN) {
    // Doubled average ranks are integers.
    std::vector<std::int64_t> dr(ranks.size());
    std::int64_t total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      dr[i] = std::llround(2.0 * ranks[i]);
      total += dr[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    std::int64_t reach = 0;
    for (auto v : dr) {
      for (std::int64_t s = reach; s >= 0; --s)
        if (count[s] != 0.0) count[s + v] += count[s];
      reach += v;
    }
    const std::int64_t obs = std::llround(2.0 * r.w_plus);
    const std::int64_t obs_dist = std::llabs(2 * obs - total);
    double extreme = 0.0;
    for (std::int64_t s = 0; s <= total; ++s)
      if (std::llabs(2 * s - total) >= obs_dist) extreme += count[s];
    r.p = std::min(1.0, extreme / std::ldexp(1.0, static_cast<int>(r.n)));
    r.exact = true;
  } else {
    r.p = var > 0.0 ? normal_two_sided_p(r.z) : 1.0;
  }
  return r;
}

struct PairedTResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Dependent-samples t-test on x_i - y_i. Requires n >= 2 and differences
// with nonzero variance.
inline PairedTResult paired_t(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("paired_t: samples differ in length");
  if (x.size() < 2) throw PreconditionError("paired_t: need at least 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  double sd = sample_sd(d);
  if (!(sd > 0.0)) throw PreconditionError("paired_t: differences have zero variance");
  PairedTResult r;
  r.df = static_cast<double>(d.size() - 1);
  r.t = mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

// Holm step-down adjustment. Output is aligned with the input positions.
inline std::vector<double> holm_correct(std::span<const double> p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("holm_correct: p-value outside [0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double v = std::min(1.0, static_cast<double>(m - k) * p[order[k]]);
    running = std::max(running, v);
    adj[order[k]] = running;
  }
  return adj;
}

struct BrownForsytheResult {
  double f = 0.0;  // F'
  double df1 = 0.0;
  double df2 = 0.0;
  double p = 1.0;
};

// One-way ANOVA on z_ij = |x_ij - median_i|.
inline BrownForsytheResult brown_forsythe(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw PreconditionError("brown_forsythe: need at least 2 groups");
  for (const auto& g : groups)
    if (g.size() < 2) throw PreconditionError("brown_forsythe: every group needs at least 2 values");

  std::vector<std::vector<double>> z(groups.size());
  double grand_sum = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double med = median(groups[i]);
    for (double x : groups[i]) {
      z[i].push_back(std::abs(x - med));
      grand_sum += z[i].back();
    }
    total += groups[i].size();
  }
  const double grand = grand_sum / static_cast<double>(total);
  double between = 0.0;
  double within = 0.0;
  for (const auto& zi : z) {
    double mi = mean(zi);
    between += static_cast<double>(zi.size()) * (mi - grand) * (mi - grand);
    for (double v : zi) within += (v - mi) * (v - mi);
  }
  BrownForsytheResult r;
  r.df1 = static_cast<double>(groups.size() - 1);
  r.df2 = static_cast<double>(total - groups.size());
  if (r.df2 <= 0.0) throw PreconditionError("brown_forsythe: no within-group degrees of freedom");
  if (within == 0.0) {
    r.f = between == 0.0 ? 0.0 : INFINITY;
    r.p = between == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.f = (between / r.df1) / (within / r.df2);
  boost::math::fisher_f dist(r.df1, r.df2);
  r.p = boost::math::cdf(boost::math::complement(dist, r.f));
  return r;
}

// kappa = (p_o - p_e) / (1 - p_e) from a square rater-by-rater count table.
inline double cohens_kappa(const std::vector<std::vector<double>>& table) {
  const std::size_t k = table.size();
  if (k == 0) throw PreconditionError("cohens_kappa: empty table");
  double n = 0.0;
  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (table[i].size() != k) throw PreconditionError("cohens_kappa: table must be square");
    for (std::size_t j = 0; j < k; ++j) {
      double v = table[i][j];
      if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("cohens_kappa: counts must be nonnegative");
      rows[i] += v;
      cols[j] += v;
      n += v;
    }
  }
  if (!(n > 0.0)) throw PreconditionError("cohens_kappa: table total must be positive");
  double po = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    po += table[i][i] / n;
    pe += (rows[i] / n) * (cols[i] / n);
  }
  if (std::abs(1.0 - pe) < 1e-15) throw PreconditionError("cohens_kappa: degenerate marginals (p_e = 1)");
  return (po - pe) / (1.0 - pe);
}

}  // namespace gobs::stats
