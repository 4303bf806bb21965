#include "ccm/model.hpp"

#include <cassert>
#include <cmath>

#include "json.hpp"

#include "ccm/errors.hpp"
#include "ccm/math.hpp"
#include "ccm/rng.hpp"

namespace ccm {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::M0: return "m0";
    case ModelKind::M1: return "m1";
    case ModelKind::M2: return "m2";
    case ModelKind::M3: return "m3";
  }
  return "m0";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "m0" || s == "M0") return ModelKind::M0;
  if (s == "m1" || s == "M1") return ModelKind::M1;
  if (s == "m2" || s == "M2") return ModelKind::M2;
  if (s == "m3" || s == "M3") return ModelKind::M3;
  throw ValidationError("unknown model: " + s);
}

std::string PriorConfig::to_json() const {
  nlohmann::json j{{"intercept_scale", intercept_scale}, {"slope_scale", slope_scale},
                   {"sigma_shape", sigma_shape},         {"sigma_scale", sigma_scale},
                   {"lkj_eta", lkj_eta},                 {"phi_shape", phi_shape},
                   {"phi_rate", phi_rate}};
  return j.dump();
}

PriorConfig PriorConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("prior config JSON: ") + e.what());
  }
  PriorConfig p;
  p.intercept_scale = j.value("intercept_scale", p.intercept_scale);
  p.slope_scale = j.value("slope_scale", p.slope_scale);
  p.sigma_shape = j.value("sigma_shape", p.sigma_shape);
  p.sigma_scale = j.value("sigma_scale", p.sigma_scale);
  p.lkj_eta = j.value("lkj_eta", p.lkj_eta);
  p.phi_shape = j.value("phi_shape", p.phi_shape);
  p.phi_rate = j.value("phi_rate", p.phi_rate);
  return p;
}

std::vector<int> ModelSpec::population_slopes() const {
  switch (kind) {
    case ModelKind::M0:
    case ModelKind::M3: return {};
    case ModelKind::M1: return {0, 1};
    case ModelKind::M2: return {0, 1, 2, 3};
  }
  return {};
}

std::vector<int> ModelSpec::varying_predictors() const {
  switch (kind) {
    case ModelKind::M0:
    case ModelKind::M3: return {};
    case ModelKind::M1: return {1};
    case ModelKind::M2: return {1, 2, 3};
  }
  return {};
}

ParamLayout ParamLayout::make(const ModelSpec& spec, int n_team, int n_teamrepo) {
  ParamLayout l;
  l.n_varying = spec.n_varying();
  l.n_team = n_team;
  l.n_teamrepo = n_teamrepo;
  l.pop_slopes = spec.population_slopes();
  int off = 0;
  l.b_pop = off;
  off += l.n_pop();
  l.g_pop = off;
  off += l.n_pop();
  for (int blk = 0; blk < 4; ++blk) {
    l.sigma_off[blk] = off;
    off += l.n_varying;
  }
  for (int blk = 0; blk < 4; ++blk) {
    l.cpc_off[blk] = off;
    off += l.n_cpc();
  }
  for (int blk = 0; blk < 4; ++blk) {
    l.z_off[blk] = off;
    off += l.group_count(blk % 2) * l.n_varying;
  }
  l.log_phi = off;
  l.total = off + 1;
  return l;
}

namespace {

const char* kSideTag[2] = {"b", "g"};
const char* kFactorTag[2] = {"team", "teamrepo"};

// Varying term t: 0 = intercept, then predictor order R, C, D.
std::string term_tag(int t) {
  static const char* tags[4] = {"0", "R", "C", "D"};
  return tags[t];
}

}  // namespace

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> out;
  out.reserve(total);
  auto pop = [&](const char* side) {
    out.push_back(std::string(side) + "0");
    for (int s : pop_slopes) out.push_back(std::string(side) + kPredictorNames[s]);
  };
  pop("b");
  pop("g");
  for (int blk = 0; blk < 4; ++blk)
    for (int p = 0; p < n_varying; ++p)
      out.push_back(std::string("log_sigma_") + kSideTag[blk / 2] + "_" + kFactorTag[blk % 2] +
                    "." + term_tag(p));
  for (int blk = 0; blk < 4; ++blk)
    for (int c = 0; c < n_cpc(); ++c)
      out.push_back(std::string("cpc_") + kSideTag[blk / 2] + "_" + kFactorTag[blk % 2] + "." +
                    std::to_string(c));
  for (int blk = 0; blk < 4; ++blk)
    for (int k = 0; k < group_count(blk % 2); ++k)
      for (int p = 0; p < n_varying; ++p)
        out.push_back(std::string("z_") + kSideTag[blk / 2] + "_" + kFactorTag[blk % 2] + "." +
                      std::to_string(k) + "." + term_tag(p));
  out.push_back("log_phi");
  assert(static_cast<int>(out.size()) == total);
  return out;
}

std::vector<std::string> ParamLayout::constrained_names() const {
  std::vector<std::string> out;
  out.reserve(total);
  auto pop = [&](const char* side) {
    out.push_back(std::string(side) + "0");
    for (int s : pop_slopes) out.push_back(std::string(side) + kPredictorNames[s]);
  };
  pop("b");
  pop("g");
  for (int blk = 0; blk < 4; ++blk)
    for (int p = 0; p < n_varying; ++p)
      out.push_back(std::string("sigma_") + kSideTag[blk / 2] + "_" + kFactorTag[blk % 2] + "." +
                    term_tag(p));
  for (int blk = 0; blk < 4; ++blk)
    for (int i = 1; i < n_varying; ++i)
      for (int j = 0; j < i; ++j)
        out.push_back(std::string("L_") + kSideTag[blk / 2] + "_" + kFactorTag[blk % 2] + "." +
                      std::to_string(i) + "." + std::to_string(j));
  for (int blk = 0; blk < 4; ++blk)
    for (int k = 0; k < group_count(blk % 2); ++k)
      for (int p = 0; p < n_varying; ++p)
        out.push_back(std::string("off_") + kSideTag[blk / 2] + "_" + kFactorTag[blk % 2] + "." +
                      std::to_string(k) + "." + term_tag(p));
  out.push_back("phi");
  assert(static_cast<int>(out.size()) == total);
  return out;
}

namespace {

// Cholesky factor of a correlation matrix from canonical partial correlations
// w (strictly-lower, row-major packing).
void build_cholesky(int p, const std::vector<double>& w, std::vector<double>& L) {
  L.assign(static_cast<std::size_t>(p) * p, 0.0);
  L[0] = 1.0;
  int c = 0;
  for (int i = 1; i < p; ++i) {
    double sum_sq = 0.0;
    for (int j = 0; j < i; ++j) {
      const double lij = w[c++] * std::sqrt(1.0 - sum_sq);
      L[i * p + j] = lij;
      sum_sq += lij * lij;
    }
    L[i * p + i] = std::sqrt(1.0 - sum_sq);
  }
}

}  // namespace

ConstrainedDraw constrain(const ParamLayout& l, const std::vector<double>& params) {
  ConstrainedDraw d;
  d.b0 = params[l.b_pop];
  for (std::size_t s = 0; s < l.pop_slopes.size(); ++s)
    d.b_slopes.push_back(params[l.b_pop + 1 + s]);
  d.g0 = params[l.g_pop];
  for (std::size_t s = 0; s < l.pop_slopes.size(); ++s)
    d.g_slopes.push_back(params[l.g_pop + 1 + s]);
  const int P = l.n_varying;
  for (int blk = 0; blk < 4; ++blk) {
    d.sigma[blk].resize(P);
    for (int p = 0; p < P; ++p) d.sigma[blk][p] = std::exp(params[l.sigma_off[blk] + p]);
    std::vector<double> w(l.n_cpc());
    for (int c = 0; c < l.n_cpc(); ++c) w[c] = std::tanh(params[l.cpc_off[blk] + c]);
    build_cholesky(P, w, d.chol[blk]);
    const int K = l.group_count(blk % 2);
    d.offsets[blk].assign(static_cast<std::size_t>(K) * P, 0.0);
    for (int k = 0; k < K; ++k) {
      const double* z = &params[l.z_off[blk] + k * P];
      for (int p = 0; p < P; ++p) {
        double acc = 0.0;
        for (int q = 0; q <= p; ++q) acc += d.chol[blk][p * P + q] * z[q];
        d.offsets[blk][k * P + p] = d.sigma[blk][p] * acc;
      }
    }
  }
  d.phi = std::exp(params[l.log_phi]);
  return d;
}

std::vector<double> constrained_flat(const ParamLayout& l, const std::vector<double>& params) {
  const ConstrainedDraw d = constrain(l, params);
  std::vector<double> out;
  out.reserve(l.total);
  out.push_back(d.b0);
  for (double v : d.b_slopes) out.push_back(v);
  out.push_back(d.g0);
  for (double v : d.g_slopes) out.push_back(v);
  const int P = l.n_varying;
  for (int blk = 0; blk < 4; ++blk)
    for (int p = 0; p < P; ++p) out.push_back(d.sigma[blk][p]);
  for (int blk = 0; blk < 4; ++blk)
    for (int i = 1; i < P; ++i)
      for (int j = 0; j < i; ++j) out.push_back(d.chol[blk][i * P + j]);
  for (int blk = 0; blk < 4; ++blk)
    for (double v : d.offsets[blk]) out.push_back(v);
  out.push_back(d.phi);
  return out;
}

double zinb_log_pmf(long y, double mu, double phi, double xi) {
  if (!(mu > 0) || !(phi > 0) || !(xi >= 0 && xi <= 1) || y < 0)
    throw std::invalid_argument("zinb_log_pmf: domain violation");
  const double a = std::log(mu);
  const double v = std::log(phi);
  const double lse = log_sum_exp(v, a);  // log(phi + mu)
  const double log_nb =
      y == 0 ? phi * (v - lse)
             : lgamma_safe(y + phi) - lgamma_safe(phi) - lgamma_safe(y + 1.0) +
                   phi * (v - lse) + y * (a - lse);
  if (xi <= 0.0) return log_nb;
  if (xi >= 1.0) return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (y == 0) return log_sum_exp(std::log(xi), std::log1p(-xi) + log_nb);
  return std::log1p(-xi) + log_nb;
}

LinearPredictors linear_predictors(const Observation& obs, const ConstrainedDraw& d,
                                   const ParamLayout& l) {
  if (obs.team < 0 || obs.team >= l.n_team || obs.teamrepo < 0 || obs.teamrepo >= l.n_teamrepo)
    throw std::out_of_range("observation indices outside the fitted dataset");
  const int P = l.n_varying;
  LinearPredictors lp;
  lp.log_mu = d.b0;
  lp.logit_xi = d.g0;
  for (std::size_t s = 0; s < l.pop_slopes.size(); ++s) {
    lp.log_mu += d.b_slopes[s] * obs.x[l.pop_slopes[s]];
    lp.logit_xi += d.g_slopes[s] * obs.x[l.pop_slopes[s]];
  }
  for (int factor = 0; factor < 2; ++factor) {
    const int group = factor == 0 ? obs.team : obs.teamrepo;
    const double* off_b = &d.offsets[factor][static_cast<std::size_t>(group) * P];
    const double* off_g = &d.offsets[2 + factor][static_cast<std::size_t>(group) * P];
    lp.log_mu += off_b[0];
    lp.logit_xi += off_g[0];
    for (int t = 1; t < P; ++t) {
      const double x = obs.x[t];  // varying terms follow predictor order R, C, D
      lp.log_mu += off_b[t] * x;
      lp.logit_xi += off_g[t] * x;
    }
  }
  return lp;
}

ModelEvaluator::ModelEvaluator(const Dataset& dataset, const ModelSpec& spec)
    : spec_(spec), layout_(ParamLayout::make(spec, dataset.n_teams(), dataset.n_teamrepo())) {
  const int n = dataset.n_obs();
  y_.resize(n);
  lgamma_y1_.resize(n);
  for (int p = 0; p < kNumPredictors; ++p) x_[p].resize(n);
  team_.resize(n);
  teamrepo_.resize(n);
  for (int i = 0; i < n; ++i) {
    const Observation& o = dataset.observations[i];
    y_[i] = o.y;
    lgamma_y1_[i] = lgamma_safe(static_cast<double>(o.y) + 1.0);
    for (int p = 0; p < kNumPredictors; ++p) x_[p][i] = o.x[p];
    team_[i] = o.team;
    teamrepo_[i] = o.teamrepo;
  }
}

LogDensityValue ModelEvaluator::value(const std::vector<double>& params) {
  return eval(params, nullptr);
}

LogDensityValue ModelEvaluator::value_and_gradient(const std::vector<double>& params,
                                                   std::vector<double>& grad) {
  return eval(params, &grad);
}

LogDensityValue ModelEvaluator::eval(const std::vector<double>& params,
                                     std::vector<double>* grad) {
  using ad::Var;
  LogDensityValue out;
  const ParamLayout& l = layout_;
  assert(static_cast<int>(params.size()) == l.total);
  const PriorConfig& pc = spec_.priors;
  const int P = l.n_varying;

  tape_.clear();
  std::vector<Var> leaf(l.total);
  for (int i = 0; i < l.total; ++i) leaf[i] = Var::leaf(tape_, params[i]);

  // --- group-level transforms and log prior on the tape ---
  std::vector<Var> offsets[4];  // group-major K x P
  Var phi_var = exp(leaf[l.log_phi]);
  Var log_prior = 0.0 * leaf[0];

  const double norm_c = -0.5 * kLog2Pi;
  auto normal_term = [&](const Var& x, double scale) {
    log_prior = log_prior - 0.5 * square(x * (1.0 / scale)) + (norm_c - std::log(scale));
  };

  normal_term(leaf[l.b_pop], pc.intercept_scale);
  normal_term(leaf[l.g_pop], pc.intercept_scale);
  for (std::size_t s = 0; s < l.pop_slopes.size(); ++s) {
    normal_term(leaf[l.b_pop + 1 + static_cast<int>(s)], pc.slope_scale);
    normal_term(leaf[l.g_pop + 1 + static_cast<int>(s)], pc.slope_scale);
  }

  // Weibull(k, lam) on sigma = exp(u) plus the log jacobian u:
  //   log(k/lam) - (k-1) log(lam) + k*u - exp(k*u)/lam^k
  const double wk = pc.sigma_shape, wlam = pc.sigma_scale;
  const double weibull_const = std::log(wk / wlam) - (wk - 1.0) * std::log(wlam);
  const double inv_wlam_pow = 1.0 / std::pow(wlam, wk);

  for (int blk = 0; blk < 4; ++blk) {
    std::vector<Var> sig(P);
    for (int p = 0; p < P; ++p) {
      const Var u = leaf[l.sigma_off[blk] + p];
      sig[p] = exp(u);
      log_prior = log_prior + (wk * u - exp(wk * u) * inv_wlam_pow + weibull_const);
    }

    // Under LKJ(eta) the canonical partial correlations are independent
    // Beta(alpha, alpha) on (-1,1), alpha = eta + (P - 2 - col)/2; together
    // with the tanh jacobian this places exactly LKJ(eta) on the implied
    // correlation matrix.
    std::vector<Var> w(l.n_cpc());
    {
      int c = 0;
      for (int i = 1; i < P; ++i) {
        for (int j = 0; j < i; ++j, ++c) {
          const Var yv = leaf[l.cpc_off[blk] + c];
          w[c] = tanh(yv);
          const double alpha = pc.lkj_eta + 0.5 * (P - 2 - j);
          const double log_beta_fn = 2.0 * lgamma_safe(alpha) - lgamma_safe(2.0 * alpha);
          log_prior = log_prior + alpha * log1p(-square(w[c])) +
                      (-(2.0 * alpha - 1.0) * std::log(2.0) - log_beta_fn);
        }
      }
    }

    // Cholesky rows as tape vars; row 0 is the constant [1, 0, ...].
    // L_row[i] holds i+1 entries (including the diagonal).
    std::vector<std::vector<Var>> L_rows(P);
    {
      int c = 0;
      for (int i = 1; i < P; ++i) {
        L_rows[i].resize(i + 1);
        Var sum_sq;
        for (int j = 0; j < i; ++j, ++c) {
          Var lij = j == 0 ? w[c] : w[c] * sqrt(1.0 - sum_sq);
          L_rows[i][j] = lij;
          sum_sq = j == 0 ? square(lij) : sum_sq + square(lij);
        }
        L_rows[i][i] = sqrt(1.0 - sum_sq);
      }
    }

    const int K = l.group_count(blk % 2);
    offsets[blk].resize(static_cast<std::size_t>(K) * P);
    for (int k = 0; k < K; ++k) {
      std::vector<Var> z(P);
      for (int p = 0; p < P; ++p) {
        z[p] = leaf[l.z_off[blk] + k * P + p];
        log_prior = log_prior + (-0.5) * square(z[p]) + norm_c;
      }
      offsets[blk][k * P + 0] = sig[0] * z[0];
      for (int p = 1; p < P; ++p) {
        Var acc = L_rows[p][0] * z[0];
        for (int q = 1; q <= p; ++q) acc = acc + L_rows[p][q] * z[q];
        offsets[blk][k * P + p] = sig[p] * acc;
      }
    }
  }

  // phi ~ Gamma(a, rate) with sigma = exp(v) jacobian folded in:
  //   a*v - rate*phi + a*log(rate) - lgamma(a)
  log_prior = log_prior + pc.phi_shape * leaf[l.log_phi] - pc.phi_rate * phi_var +
              (pc.phi_shape * std::log(pc.phi_rate) - lgamma_safe(pc.phi_shape));

  if (!std::isfinite(log_prior.value()) || !std::isfinite(phi_var.value())) {
    out.finite = false;
    return out;
  }

  // --- analytic likelihood over observations ---
  const int n = static_cast<int>(y_.size());
  const double v = params[l.log_phi];
  const double phi = phi_var.value();
  const double digamma_phi = digamma(phi);

  adj_.assign(tape_.size(), 0.0);

  const int n_slopes = static_cast<int>(l.pop_slopes.size());
  double log_lik = 0.0;
  bool finite = true;
  for (int i = 0; i < n && finite; ++i) {
    double eta_b = params[l.b_pop];
    double eta_g = params[l.g_pop];
    for (int s = 0; s < n_slopes; ++s) {
      const double x = x_[l.pop_slopes[s]][i];
      eta_b += params[l.b_pop + 1 + s] * x;
      eta_g += params[l.g_pop + 1 + s] * x;
    }
    const int groups[2] = {team_[i], teamrepo_[i]};
    for (int factor = 0; factor < 2; ++factor) {
      const int base = groups[factor] * P;
      eta_b += offsets[factor][base].value();
      eta_g += offsets[2 + factor][base].value();
      for (int t = 1; t < P; ++t) {
        const double x = x_[t][i];
        eta_b += offsets[factor][base + t].value() * x;
        eta_g += offsets[2 + factor][base + t].value() * x;
      }
    }
    if (!std::isfinite(eta_b) || !std::isfinite(eta_g)) {
      finite = false;
      break;
    }

    const long y = y_[i];
    const double lse = log_sum_exp(v, eta_b);  // log(phi + mu)
    double ll, d_a, d_zeta, d_phi;
    if (y == 0) {
      const double l1 = -log1p_exp(eta_g) + phi * (v - lse);
      const double l0 = -log1p_exp(-eta_g);
      ll = log_sum_exp(l0, l1);
      const double q1 = std::exp(l1 - ll);
      const double xi = sigmoid(eta_g);
      d_a = -q1 * phi * sigmoid(eta_b - v);
      d_zeta = (1.0 - q1) * (1.0 - xi) - q1 * xi;
      d_phi = q1 * (v + 1.0 - lse - sigmoid(v - eta_b));
    } else {
      const double yd = static_cast<double>(y);
      ll = -log1p_exp(eta_g) + lgamma_safe(yd + phi) - lgamma_safe(phi) - lgamma_y1_[i] +
           phi * (v - lse) + yd * (eta_b - lse);
      d_a = yd - (phi + yd) * sigmoid(eta_b - v);
      d_zeta = -sigmoid(eta_g);
      d_phi = digamma(yd + phi) - digamma_phi + v + 1.0 - lse -
              std::exp(std::log(phi + yd) - lse);
    }
    if (!std::isfinite(ll)) {
      finite = false;
      break;
    }
    log_lik += ll;

    if (grad) {
      adj_[static_cast<std::size_t>(leaf[l.b_pop].index())] += d_a;
      adj_[static_cast<std::size_t>(leaf[l.g_pop].index())] += d_zeta;
      for (int s = 0; s < n_slopes; ++s) {
        const double x = x_[l.pop_slopes[s]][i];
        adj_[static_cast<std::size_t>(leaf[l.b_pop + 1 + s].index())] += d_a * x;
        adj_[static_cast<std::size_t>(leaf[l.g_pop + 1 + s].index())] += d_zeta * x;
      }
      for (int factor = 0; factor < 2; ++factor) {
        const int base = groups[factor] * P;
        adj_[static_cast<std::size_t>(offsets[factor][base].index())] += d_a;
        adj_[static_cast<std::size_t>(offsets[2 + factor][base].index())] += d_zeta;
        for (int t = 1; t < P; ++t) {
          const double x = x_[t][i];
          adj_[static_cast<std::size_t>(offsets[factor][base + t].index())] += d_a * x;
          adj_[static_cast<std::size_t>(offsets[2 + factor][base + t].index())] += d_zeta * x;
        }
      }
      adj_[static_cast<std::size_t>(phi_var.index())] += d_phi;
    }
  }

  if (!finite || !std::isfinite(log_lik)) {
    out.finite = false;
    return out;
  }

  out.log_prior = log_prior.value();
  out.log_lik = log_lik;
  out.log_posterior = out.log_prior + out.log_lik;
  out.finite = std::isfinite(out.log_posterior);

  if (grad && out.finite) {
    adj_[static_cast<std::size_t>(log_prior.index())] += 1.0;
    tape_.backward(adj_);
    grad->resize(l.total);
    for (int i = 0; i < l.total; ++i) {
      (*grad)[i] = adj_[static_cast<std::size_t>(leaf[i].index())];
      if (!std::isfinite((*grad)[i])) out.finite = false;
    }
  }
  return out;
}

LogDensityValue log_posterior(const std::vector<double>& params, const Dataset& dataset,
                              const ModelSpec& spec) {
  ModelEvaluator ev(dataset, spec);
  return ev.value(params);
}

std::vector<double> gradient(const std::vector<double>& params, const Dataset& dataset,
                             const ModelSpec& spec) {
  ModelEvaluator ev(dataset, spec);
  std::vector<double> g;
  ev.value_and_gradient(params, g);
  return g;
}

std::vector<double> sample_prior(const ModelSpec& spec, const ParamLayout& l,
                                 std::uint64_t seed) {
  const PriorConfig& pc = spec.priors;
  Rng rng(seed, 0x70726972);  // fixed prior stream
  std::vector<double> params(l.total, 0.0);
  params[l.b_pop] = rng.normal() * pc.intercept_scale;
  for (std::size_t s = 0; s < l.pop_slopes.size(); ++s)
    params[l.b_pop + 1 + s] = rng.normal() * pc.slope_scale;
  params[l.g_pop] = rng.normal() * pc.intercept_scale;
  for (std::size_t s = 0; s < l.pop_slopes.size(); ++s)
    params[l.g_pop + 1 + s] = rng.normal() * pc.slope_scale;
  const int P = l.n_varying;
  for (int blk = 0; blk < 4; ++blk) {
    for (int p = 0; p < P; ++p)
      params[l.sigma_off[blk] + p] = std::log(rng.weibull(pc.sigma_shape, pc.sigma_scale));
    int c = 0;
    for (int i = 1; i < P; ++i) {
      for (int j = 0; j < i; ++j, ++c) {
        const double alpha = pc.lkj_eta + 0.5 * (P - 2 - j);
        const double w = 2.0 * rng.beta(alpha, alpha) - 1.0;
        params[l.cpc_off[blk] + c] = std::atanh(w);
      }
    }
    const int K = l.group_count(blk % 2);
    for (int k = 0; k < K * P; ++k) params[l.z_off[blk] + k] = rng.normal();
  }
  params[l.log_phi] = std::log(rng.gamma(pc.phi_shape, 1.0 / pc.phi_rate));
  return params;
}

}  // namespace ccm
