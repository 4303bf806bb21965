#include "ccm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ccm/math.hpp"

namespace ccm {

int thread_cap() {
  if (const char* env = std::getenv("CLONE_COMMONS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

bool leapfrog(const LogProbGrad& f, std::vector<double>& q, std::vector<double>& p,
              double& logp, std::vector<double>& grad, double step_size,
              const std::vector<double>& inv_mass, int direction) {
  const double eps = direction * step_size;
  const std::size_t d = q.size();
  for (std::size_t i = 0; i < d; ++i) p[i] += 0.5 * eps * grad[i];
  for (std::size_t i = 0; i < d; ++i) q[i] += eps * inv_mass[i] * p[i];
  if (!f(q, logp, grad)) return false;
  for (std::size_t i = 0; i < d; ++i) p[i] += 0.5 * eps * grad[i];
  return true;
}

namespace {

double kinetic(const std::vector<double>& p, const std::vector<double>& inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) k += p[i] * p[i] * inv_mass[i];
  return 0.5 * k;
}

struct PhasePoint {
  std::vector<double> q, p, grad;
  double logp = 0.0;
};

// dot(inv_mass * p_boundary, rho) for the U-turn criterion.
double turn_dot(const std::vector<double>& p, const std::vector<double>& rho,
                const std::vector<double>& inv_mass) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * inv_mass[i] * rho[i];
  return s;
}

struct TreeCtx {
  const LogProbGrad* f;
  const std::vector<double>* inv_mass;
  double step_size;
  double h0;
  double divergence_threshold;
  Rng* rng;
  // accumulated across the whole transition
  double sum_metro = 0.0;
  int n_leapfrog = 0;
  bool divergent = false;
};

struct Subtree {
  PhasePoint fwd, bwd;
  std::vector<double> rho;
  std::vector<double> prop_q;
  double prop_logp = 0.0;
  double log_sum_w = 0.0;
  bool ok = false;
};

// Builds a subtree of 2^depth leapfrog steps in `direction` starting from
// `from` (which is a trajectory boundary, moving outward).
Subtree build_tree(TreeCtx& ctx, const PhasePoint& from, int depth, int direction) {
  Subtree t;
  if (depth == 0) {
    PhasePoint z = from;
    const bool ok = leapfrog(*ctx.f, z.q, z.p, z.logp, z.grad, ctx.step_size, *ctx.inv_mass,
                             direction);
    ++ctx.n_leapfrog;
    double h = ok ? -z.logp + kinetic(z.p, *ctx.inv_mass)
                  : std::numeric_limits<double>::infinity();
    if (!std::isfinite(h)) h = std::numeric_limits<double>::infinity();
    const double log_w = ctx.h0 - h;
    ctx.sum_metro += std::min(1.0, std::exp(log_w));
    if (h - ctx.h0 > ctx.divergence_threshold) {
      ctx.divergent = true;
      t.ok = false;
      return t;
    }
    t.fwd = z;
    t.bwd = std::move(z);
    t.rho = t.bwd.p;
    t.prop_q = t.bwd.q;
    t.prop_logp = t.bwd.logp;
    t.log_sum_w = log_w;
    t.ok = true;
    return t;
  }

  Subtree first = build_tree(ctx, from, depth - 1, direction);
  if (!first.ok) return first;
  Subtree second = build_tree(ctx, direction > 0 ? first.fwd : first.bwd, depth - 1, direction);
  if (!second.ok) return second;

  Subtree merged;
  merged.log_sum_w = log_sum_exp(first.log_sum_w, second.log_sum_w);
  if (std::log(ctx.rng->uniform_pos()) < second.log_sum_w - merged.log_sum_w) {
    merged.prop_q = std::move(second.prop_q);
    merged.prop_logp = second.prop_logp;
  } else {
    merged.prop_q = std::move(first.prop_q);
    merged.prop_logp = first.prop_logp;
  }
  merged.rho = first.rho;
  for (std::size_t i = 0; i < merged.rho.size(); ++i) merged.rho[i] += second.rho[i];
  merged.fwd = direction > 0 ? std::move(second.fwd) : std::move(first.fwd);
  merged.bwd = direction > 0 ? std::move(first.bwd) : std::move(second.bwd);
  merged.ok = turn_dot(merged.bwd.p, merged.rho, *ctx.inv_mass) > 0 &&
              turn_dot(merged.fwd.p, merged.rho, *ctx.inv_mass) > 0;
  return merged;
}

}  // namespace

void nuts_transition(const LogProbGrad& f, std::vector<double>& q, double& logp,
                     std::vector<double>& grad, double step_size,
                     const std::vector<double>& inv_mass, int max_treedepth,
                     double divergence_threshold, Rng& rng, NutsStats& stats) {
  const std::size_t d = q.size();
  PhasePoint z0;
  z0.q = q;
  z0.p.resize(d);
  for (std::size_t i = 0; i < d; ++i) z0.p[i] = rng.normal() / std::sqrt(inv_mass[i]);
  z0.grad = grad;
  z0.logp = logp;

  TreeCtx ctx;
  ctx.f = &f;
  ctx.inv_mass = &inv_mass;
  ctx.step_size = step_size;
  ctx.h0 = -logp + kinetic(z0.p, inv_mass);
  ctx.divergence_threshold = divergence_threshold;
  ctx.rng = &rng;

  PhasePoint fwd = z0, bwd = z0;
  std::vector<double> rho = z0.p;
  std::vector<double> prop_q = q;
  double prop_logp = logp;
  double log_sum_w = 0.0;  // weight of the initial point relative to itself
  int depth = 0;

  while (depth < max_treedepth) {
    const int direction = rng.bernoulli(0.5) ? 1 : -1;
    Subtree sub = build_tree(ctx, direction > 0 ? fwd : bwd, depth, direction);
    if (!sub.ok) break;
    // Biased progressive sampling: favor the new subtree.
    if (std::log(rng.uniform_pos()) < sub.log_sum_w - log_sum_w) {
      prop_q = sub.prop_q;
      prop_logp = sub.prop_logp;
    }
    log_sum_w = log_sum_exp(log_sum_w, sub.log_sum_w);
    for (std::size_t i = 0; i < d; ++i) rho[i] += sub.rho[i];
    if (direction > 0) fwd = std::move(sub.fwd);
    else bwd = std::move(sub.bwd);
    ++depth;
    if (!(turn_dot(bwd.p, rho, inv_mass) > 0 && turn_dot(fwd.p, rho, inv_mass) > 0)) break;
  }

  q = std::move(prop_q);
  logp = prop_logp;
  std::vector<double> g(d);
  double lp_check;
  if (!f(q, lp_check, g)) throw std::runtime_error("density became non-finite at accepted point");
  grad = std::move(g);
  logp = lp_check;

  stats.divergent = ctx.divergent;
  stats.treedepth = depth;
  stats.n_leapfrog = ctx.n_leapfrog;
  stats.accept_stat = ctx.n_leapfrog > 0 ? ctx.sum_metro / ctx.n_leapfrog : 0.0;
  stats.energy = ctx.h0;
}

namespace {

double find_reasonable_step_size(const LogProbGrad& f, const std::vector<double>& q0,
                                 double logp0, const std::vector<double>& grad0,
                                 const std::vector<double>& inv_mass, Rng& rng) {
  const std::size_t d = q0.size();
  double eps = 1.0;
  std::vector<double> p(d);
  for (std::size_t i = 0; i < d; ++i) p[i] = rng.normal() / std::sqrt(inv_mass[i]);
  const double h0 = -logp0 + kinetic(p, inv_mass);

  auto energy_after_step = [&](double step) {
    std::vector<double> q = q0, pp = p, g = grad0;
    double lp = logp0;
    if (!leapfrog(f, q, pp, lp, g, step, inv_mass, 1))
      return std::numeric_limits<double>::infinity();
    const double h = -lp + kinetic(pp, inv_mass);
    return std::isfinite(h) ? h : std::numeric_limits<double>::infinity();
  };

  double delta_h = h0 - energy_after_step(eps);
  const int dir = delta_h > std::log(0.5) ? 1 : -1;
  for (int iter = 0; iter < 100; ++iter) {
    eps *= dir > 0 ? 2.0 : 0.5;
    delta_h = h0 - energy_after_step(eps);
    if (dir > 0 ? delta_h <= std::log(0.5) : delta_h >= std::log(0.5)) break;
    if (eps > 1e7 || eps < 1e-10) break;
  }
  return dir > 0 ? eps / 2.0 : eps;
}

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int m = 0;
  static constexpr double gamma = 0.05;
  static constexpr double t0 = 10.0;
  static constexpr double kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    m = 0;
  }
  void update(double accept_stat, double target) {
    ++m;
    const double eta = 1.0 / (m + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept_stat);
    log_eps = mu - std::sqrt(static_cast<double>(m)) / gamma * h_bar;
    const double w = std::pow(static_cast<double>(m), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
  double current() const { return std::exp(log_eps); }
  double averaged() const { return std::exp(log_eps_bar); }
};

struct Welford {
  std::vector<double> mean_, m2_;
  long n_ = 0;
  void reset(std::size_t d) {
    mean_.assign(d, 0.0);
    m2_.assign(d, 0.0);
    n_ = 0;
  }
  void add(const std::vector<double>& x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(n_);
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }
  // Regularized variance estimate (shrunk toward 1e-3, Stan-style).
  std::vector<double> regularized_variance() const {
    std::vector<double> v(mean_.size(), 1.0);
    if (n_ < 2) return v;
    const double n = static_cast<double>(n_);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double var = m2_[i] / (n - 1.0);
      v[i] = n / (n + 5.0) * var + 1e-3 * (5.0 / (n + 5.0));
      if (!(v[i] > 0.0)) v[i] = 1e-3;
    }
    return v;
  }
};

ChainResult run_one_chain(const LogProbGrad& f, int dim, const ChainConfig& cfg, int chain) {
  Rng rng(cfg.seed, static_cast<std::uint64_t>(chain) + 1);
  std::vector<double> q(dim), grad(dim);
  double logp = 0.0;

  bool initialized = false;
  if (static_cast<std::size_t>(chain) < cfg.inits.size() && !cfg.inits[chain].empty()) {
    q = cfg.inits[chain];
    initialized = f(q, logp, grad);
    if (!initialized) throw std::runtime_error("explicit init has non-finite density");
  } else {
    for (int attempt = 0; attempt < cfg.max_init_retries && !initialized; ++attempt) {
      for (auto& qi : q) qi = (2.0 * rng.uniform() - 1.0) * cfg.init_radius;
      initialized = f(q, logp, grad);
    }
    if (!initialized)
      throw std::runtime_error("chain " + std::to_string(chain) + ": no finite density found in " +
                               std::to_string(cfg.max_init_retries) + " initialization attempts");
  }

  std::vector<double> inv_mass(dim, 1.0);
  double eps = find_reasonable_step_size(f, q, logp, grad, inv_mass, rng);
  DualAveraging da;
  da.restart(eps);

  // Stan-style warmup windows: step-size-only buffers around expanding
  // variance-estimation windows; adaptation below 100 warmup draws is
  // step-size only.
  const bool adapt_metric = cfg.warmup >= 100;
  int init_buf = 75, term_buf = 50, base_window = 25;
  if (adapt_metric && init_buf + term_buf + base_window > cfg.warmup) {
    init_buf = std::max(1, static_cast<int>(0.15 * cfg.warmup));
    term_buf = std::max(1, static_cast<int>(0.10 * cfg.warmup));
    base_window = cfg.warmup - init_buf - term_buf;
  }
  std::vector<int> window_ends;
  if (adapt_metric) {
    int start = init_buf, width = base_window;
    while (true) {
      int end = start + width;
      if (end + 2 * width + term_buf > cfg.warmup) {
        end = cfg.warmup - term_buf;
        window_ends.push_back(end);
        break;
      }
      window_ends.push_back(end);
      start = end;
      width *= 2;
    }
  }

  Welford welford;
  welford.reset(dim);
  std::size_t window_idx = 0;

  ChainResult result;
  result.draws.reserve(cfg.samples);
  result.divergent.reserve(cfg.samples);
  result.treedepth.reserve(cfg.samples);

  for (int iter = 0; iter < cfg.warmup + cfg.samples; ++iter) {
    const bool warming = iter < cfg.warmup;
    NutsStats stats;
    nuts_transition(f, q, logp, grad, warming ? da.current() : eps, inv_mass, cfg.max_treedepth,
                    cfg.divergence_threshold, rng, stats);
    if (warming) {
      da.update(stats.accept_stat, cfg.target_accept);
      if (adapt_metric && iter >= init_buf && window_idx < window_ends.size()) {
        welford.add(q);
        if (iter + 1 == window_ends[window_idx]) {
          inv_mass = welford.regularized_variance();
          welford.reset(dim);
          ++window_idx;
          da.restart(da.averaged());
        }
      }
      if (iter + 1 == cfg.warmup) eps = da.averaged();
    } else {
      result.draws.push_back(q);
      result.divergent.push_back(stats.divergent ? 1 : 0);
      result.treedepth.push_back(stats.treedepth);
      if (stats.divergent) ++result.n_divergent;
    }
  }

  result.step_size = eps;
  result.inv_mass = inv_mass;
  return result;
}

}  // namespace

SampleBatch run_chains(const DensityFactory& make_density, int dim, const ChainConfig& config) {
  if (config.chains < 1) throw std::invalid_argument("chains must be >= 1");
  SampleBatch batch;
  batch.config = config;
  batch.chains.resize(config.chains);

  const int cap = config.threads > 0 ? config.threads : thread_cap();
  std::vector<std::exception_ptr> errors(config.chains);
  for (int start = 0; start < config.chains; start += cap) {
    const int end = std::min(config.chains, start + cap);
    std::vector<std::thread> workers;
    for (int c = start; c < end; ++c) {
      workers.emplace_back([&, c]() {
        try {
          LogProbGrad f = make_density(c);
          batch.chains[c] = run_one_chain(f, dim, config, c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return batch;
}

namespace {

// Split each chain in half; drop a trailing draw when the length is odd.
std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half == 0) continue;
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  return out;
}

bool all_equal(const std::vector<std::vector<double>>& chains) {
  double first = 0.0;
  bool seen = false;
  for (const auto& c : chains)
    for (double v : c) {
      if (!seen) {
        first = v;
        seen = true;
      } else if (v != first) {
        return false;
      }
    }
  return true;
}

double classic_rhat(const std::vector<std::vector<double>>& seqs) {
  const std::size_t m = seqs.size();
  const double n = static_cast<double>(seqs[0].size());
  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean(seqs[j]);
    vars[j] = variance(seqs[j]);
  }
  const double w = mean(vars);
  const double b = n * variance(means);
  const double var_plus = (n - 1.0) / n * w + b / n;
  if (w <= 0.0) return 1.0;
  return std::sqrt(var_plus / w);
}

}  // namespace

ScalarDiagnostic split_rhat(const std::vector<std::vector<double>>& chains) {
  ScalarDiagnostic out;
  auto seqs = split_chains(chains);
  if (seqs.size() < 2 || seqs[0].size() < 2) {
    out.value = 1.0;
    out.degenerate = true;
    return out;
  }
  if (all_equal(seqs)) {
    out.value = 1.0;
    out.degenerate = true;
    return out;
  }
  // Rank-normalize pooled draws (average ranks on ties), then classic R-hat.
  struct Entry {
    double v;
    std::size_t seq, idx;
  };
  std::vector<Entry> pool;
  for (std::size_t j = 0; j < seqs.size(); ++j)
    for (std::size_t i = 0; i < seqs[j].size(); ++i) pool.push_back({seqs[j][i], j, i});
  std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) { return a.v < b.v; });
  const double s = static_cast<double>(pool.size());
  std::vector<std::vector<double>> zseqs(seqs.size(),
                                         std::vector<double>(seqs[0].size(), 0.0));
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].v == pool[i].v) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    const double z = inv_std_normal_cdf((avg_rank - 0.375) / (s + 0.25));
    for (std::size_t k = i; k < j; ++k) zseqs[pool[k].seq][pool[k].idx] = z;
    i = j;
  }
  out.value = classic_rhat(zseqs);
  return out;
}

ScalarDiagnostic ess(const std::vector<std::vector<double>>& chains) {
  ScalarDiagnostic out;
  if (chains.empty() || chains[0].size() < 4) {
    out.degenerate = true;
    return out;
  }
  if (all_equal(chains)) {
    out.value = 0.0;
    out.degenerate = true;
    return out;
  }
  const std::size_t m = chains.size();
  std::size_t n = chains[0].size();
  for (const auto& c : chains) n = std::min(n, c.size());

  std::vector<double> means(m), vars(m);
  std::vector<std::vector<double>> centered(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> c(chains[j].begin(), chains[j].begin() + n);
    means[j] = mean(c);
    vars[j] = variance(c);
    for (auto& v : c) v -= means[j];
    centered[j] = std::move(c);
  }
  const double w = mean(vars);
  const double b_over_n = m > 1 ? variance(means) : 0.0;
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b_over_n;
  if (var_plus <= 0.0) {
    out.value = 0.0;
    out.degenerate = true;
    return out;
  }

  auto acov = [&](std::size_t j, std::size_t t) {
    double s = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) s += centered[j][i] * centered[j][i + t];
    return s / static_cast<double>(n);
  };

  // Geyer initial monotone sequence on paired autocorrelations.
  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  std::size_t t = 0;
  std::vector<double> rho(n, 0.0);
  while (t + 1 < n) {
    double rho_t, rho_t1;
    {
      double ac = 0.0;
      for (std::size_t j = 0; j < m; ++j) ac += acov(j, t);
      rho_t = 1.0 - (w - ac / static_cast<double>(m)) / var_plus;
    }
    {
      double ac = 0.0;
      for (std::size_t j = 0; j < m; ++j) ac += acov(j, t + 1);
      rho_t1 = 1.0 - (w - ac / static_cast<double>(m)) / var_plus;
    }
    double pair = rho_t + rho_t1;
    if (pair < 0.0 && t > 0) break;
    if (pair > prev_pair) pair = prev_pair;  // enforce monotone decrease
    prev_pair = pair;
    tau += pair;
    t += 2;
    if (t > n - 2) break;
  }
  tau = 2.0 * tau - 1.0;  // rho_0 = 1 counted inside the first pair
  if (tau < 1e-12) tau = 1e-12;
  out.value = static_cast<double>(m * n) / tau;
  return out;
}

}  // namespace ccm
