#include "ccm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ccm/errors.hpp"
#include "ccm/math.hpp"

namespace ccm {

GpdFit gpd_fit_tail(std::vector<double> x) {
  GpdFit fit;
  if (x.size() < 5) throw ValidationError("gpd_fit_tail needs at least 5 tail points");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (x.front() == x.back()) {
    fit.degenerate = true;
    fit.k = -std::numeric_limits<double>::infinity();
    fit.sigma = 0.0;
    return fit;
  }

  const std::size_t m = 30 + static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  double quart = x[static_cast<std::size_t>(static_cast<double>(n) / 4.0 + 0.5) - 1];
  if (!(quart > 0)) quart = x[n / 2];
  if (!(quart > 0)) quart = x[n - 1];

  std::vector<double> theta(m), prof(m);
  for (std::size_t j = 0; j < m; ++j) {
    theta[j] = 1.0 / x[n - 1] +
               (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j) + 0.5))) /
                   (3.0 * quart);
    double k = 0.0;
    for (double xi : x) k += std::log1p(-theta[j] * xi);
    k /= static_cast<double>(n);
    prof[j] = theta[j] == 0.0 || k == 0.0
                  ? -std::numeric_limits<double>::infinity()
                  : static_cast<double>(n) * (std::log(-theta[j] / k) - k - 1.0);
  }
  const double lse = log_sum_exp(prof);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(prof[j] - lse);

  double k_hat = 0.0;
  for (double xi : x) k_hat += std::log1p(-theta_hat * xi);
  k_hat /= static_cast<double>(n);
  fit.sigma = -k_hat / theta_hat;
  // Weak-prior shrinkage stabilizing small tails.
  fit.k = (static_cast<double>(n) * k_hat + 10.0 * 0.5) / (static_cast<double>(n) + 10.0);
  return fit;
}

namespace {

// GPD quantile for probability p given (k, sigma).
double gpd_quantile(double p, double k, double sigma) {
  if (std::fabs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma / k * (std::pow(1.0 - p, -k) - 1.0);
}

}  // namespace

LooResult psis_loo(const std::vector<std::vector<double>>& log_lik, double k_threshold,
                   PsisDetail* detail) {
  if (log_lik.size() < 100) throw ValidationError("psis_loo needs at least 100 draws");
  const std::size_t s = log_lik.size();
  const std::size_t n = log_lik[0].size();
  for (std::size_t d = 0; d < s; ++d) {
    if (log_lik[d].size() != n) throw ValidationError("ragged log_lik matrix");
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(log_lik[d][i]))
        throw ValidationError("non-finite log_lik at draw " + std::to_string(d) +
                              ", observation " + std::to_string(i));
  }

  LooResult out;
  out.k_threshold = k_threshold;
  out.pointwise.resize(n);
  out.pareto_k.resize(n);

  const std::size_t tail_len = static_cast<std::size_t>(
      std::ceil(std::min(0.2 * static_cast<double>(s), 3.0 * std::sqrt(static_cast<double>(s)))));

  std::vector<double> lw(s), ll(s);
  std::vector<std::size_t> order(s);
  for (std::size_t i = 0; i < n; ++i) {
    double raw_max = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < s; ++d) {
      ll[d] = log_lik[d][i];
      lw[d] = -ll[d];  // importance ratios 1/p(y_i | theta_s)
      raw_max = std::max(raw_max, lw[d]);
    }

    double k_hat = -std::numeric_limits<double>::infinity();
    if (tail_len >= 5) {
      for (std::size_t d = 0; d < s; ++d) order[d] = d;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return lw[a] < lw[b]; });
      const double cutoff = lw[order[s - tail_len - 1]];
      std::vector<double> excess(tail_len);
      for (std::size_t t = 0; t < tail_len; ++t)
        excess[t] = std::exp(lw[order[s - tail_len + t]] - raw_max) -
                    std::exp(cutoff - raw_max);
      GpdFit fit = gpd_fit_tail(excess);
      if (!fit.degenerate && std::isfinite(fit.k)) {
        k_hat = fit.k;
        // Replace tail weights with expected order statistics of the fit,
        // truncated at the raw maximum.
        for (std::size_t t = 0; t < tail_len; ++t) {
          const double p = (static_cast<double>(t) + 0.5) / static_cast<double>(tail_len);
          const double q = gpd_quantile(p, fit.k, fit.sigma) + std::exp(cutoff - raw_max);
          double smoothed = std::log(q) + raw_max;
          if (smoothed > raw_max) smoothed = raw_max;
          lw[order[s - tail_len + t]] = smoothed;
        }
      }
    }

    // Self-normalize and combine.
    double lw_lse = log_sum_exp(lw);
    std::vector<double> combined(s);
    for (std::size_t d = 0; d < s; ++d) combined[d] = lw[d] - lw_lse + ll[d];
    out.pointwise[i] = log_sum_exp(combined);
    out.pareto_k[i] = k_hat;
    if (std::isfinite(k_hat) && k_hat > k_threshold) out.flagged.push_back(static_cast<int>(i));
    if (detail) {
      detail->log_weights.push_back(lw);
      detail->raw_max.push_back(raw_max);
    }
  }

  out.elpd = 0.0;
  for (double v : out.pointwise) out.elpd += v;
  out.se = std::sqrt(static_cast<double>(n) * variance(out.pointwise));
  return out;
}

std::vector<ModelComparisonRow> compare_models(const std::vector<std::string>& names,
                                               const std::vector<LooResult>& results) {
  if (names.size() != results.size() || names.empty())
    throw ValidationError("compare_models: names/results mismatch");
  const std::size_t n = results[0].pointwise.size();
  for (const auto& r : results)
    if (r.pointwise.size() != n)
      throw ValidationError("compare_models: models evaluated on different observation counts");

  std::size_t best = 0;
  for (std::size_t m = 1; m < results.size(); ++m)
    if (results[m].elpd > results[best].elpd) best = m;

  std::vector<ModelComparisonRow> rows;
  for (std::size_t m = 0; m < results.size(); ++m) {
    ModelComparisonRow row;
    row.name = names[m];
    row.elpd = results[m].elpd;
    row.elpd_diff = results[m].elpd - results[best].elpd;
    if (m == best) {
      row.se_diff = 0.0;
    } else {
      std::vector<double> diff(n);
      for (std::size_t i = 0; i < n; ++i)
        diff[i] = results[m].pointwise[i] - results[best].pointwise[i];
      row.se_diff = std::sqrt(static_cast<double>(n) * variance(diff));
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(),
            [](const ModelComparisonRow& a, const ModelComparisonRow& b) {
              return a.elpd > b.elpd;
            });
  return rows;
}

RelooResult reloo(const LooResult& base, const RefitFn& refit) {
  RelooResult out;
  out.corrected = base;
  for (int idx : base.flagged) {
    RefitOutcome r = refit(idx);
    if (!r.converged) {
      out.nonconverged.push_back(idx);
      continue;
    }
    out.corrected.pointwise[idx] = r.elpd_i;
  }
  out.corrected.elpd = 0.0;
  for (double v : out.corrected.pointwise) out.corrected.elpd += v;
  out.corrected.se = std::sqrt(static_cast<double>(out.corrected.pointwise.size()) *
                               variance(out.corrected.pointwise));
  return out;
}

RootogramData rootogram(const std::vector<long>& observed,
                        const std::vector<std::vector<long>>& predictive, int max_count) {
  if (max_count < 1) throw ValidationError("rootogram: max_count must be >= 1");
  for (const auto& rep : predictive)
    if (rep.size() != observed.size())
      throw ValidationError("rootogram: replicate length differs from observed");

  const std::size_t bins = static_cast<std::size_t>(max_count) + 1;
  std::vector<double> obs_freq(bins, 0.0);
  for (long y : observed)
    if (y >= 0 && y <= max_count) obs_freq[static_cast<std::size_t>(y)] += 1.0;

  const std::size_t s = predictive.size();
  std::vector<std::vector<double>> freq_draws(bins, std::vector<double>(s, 0.0));
  for (std::size_t d = 0; d < s; ++d) {
    for (long y : predictive[d])
      if (y >= 0 && y <= max_count) freq_draws[static_cast<std::size_t>(y)][d] += 1.0;
  }

  RootogramData out;
  out.bins.resize(bins);
  for (std::size_t c = 0; c < bins; ++c) {
    RootogramBin& bin = out.bins[c];
    bin.count = static_cast<long>(c);
    bin.observed = obs_freq[c];
    bin.sqrt_observed = std::sqrt(obs_freq[c]);
    if (s > 0) {
      bin.expected = mean(freq_draws[c]);
      auto [lo, hi] = central_interval(freq_draws[c], 0.95);
      bin.expected_lo = lo;
      bin.expected_hi = hi;
    }
    bin.sqrt_expected = std::sqrt(bin.expected);
    bin.sqrt_expected_lo = std::sqrt(bin.expected_lo);
    bin.sqrt_expected_hi = std::sqrt(bin.expected_hi);
    bin.deviation = bin.sqrt_expected - bin.sqrt_observed;
  }
  return out;
}

PpcStatistic ppc_statistic_from_string(const std::string& s) {
  if (s == "prop_zero") return PpcStatistic::PropZero;
  if (s == "q95") return PpcStatistic::Q95;
  if (s == "q99") return PpcStatistic::Q99;
  throw ValidationError("unsupported ppc statistic: " + s);
}

std::string to_string(PpcStatistic s) {
  switch (s) {
    case PpcStatistic::PropZero: return "prop_zero";
    case PpcStatistic::Q95: return "q95";
    case PpcStatistic::Q99: return "q99";
  }
  return "prop_zero";
}

namespace {

double count_stat(const std::vector<long>& ys, PpcStatistic stat) {
  switch (stat) {
    case PpcStatistic::PropZero: {
      std::size_t zeros = 0;
      for (long y : ys) zeros += y == 0;
      return static_cast<double>(zeros) / static_cast<double>(ys.size());
    }
    case PpcStatistic::Q95:
    case PpcStatistic::Q99: {
      std::vector<double> v(ys.begin(), ys.end());
      return percentile_nearest_rank(std::move(v), stat == PpcStatistic::Q95 ? 0.95 : 0.99);
    }
  }
  return 0.0;
}

}  // namespace

PpcResult ppc_stat(const std::vector<long>& observed,
                   const std::vector<std::vector<long>>& predictive, PpcStatistic stat) {
  PpcResult out;
  out.observed = count_stat(observed, stat);
  out.draws.reserve(predictive.size());
  for (const auto& rep : predictive) out.draws.push_back(count_stat(rep, stat));
  return out;
}

}  // namespace ccm
