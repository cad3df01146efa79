#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "netspill/dgp.hpp"
#include "netspill/error.hpp"
#include "netspill/network.hpp"

namespace netspill {

struct EstimateResult {
  double estimate = 0.0;
  std::string method;
  std::optional<double> eta;
  std::optional<double> se;
  std::map<std::string, double> diagnostics;
};

// Regression objects the variance estimators reuse: the exposure regressor,
// the fitted slope, and the residuals (all after partialling out covariates,
// when any are given).
struct OlsFit {
  double beta = 0.0;
  std::vector<double> exposure;   // (net x)_i, residualized
  std::vector<double> residuals;  // y - beta * exposure, residualized y
  double exposure_ss = 0.0;       // sum of squared (residualized) exposure
};

namespace detail {

// Replaces each column of `cols` by its residual from the span of W.
inline void partial_out(const std::vector<std::vector<double>>& w,
                        std::vector<std::vector<double>*> cols) {
  if (w.empty()) return;
  const std::size_t n = w.front().size();
  Eigen::MatrixXd W(n, w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j].size() != n) throw InputError("covariate length mismatch");
    for (std::size_t i = 0; i < n; ++i) W(i, j) = w[j][i];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(
                                              static_cast<long>(n),
                                              static_cast<long>(w.size()));
  for (auto* col : cols) {
    if (col->size() != n) throw InputError("column length mismatch");
    Eigen::Map<Eigen::VectorXd> v(col->data(), static_cast<long>(n));
    v -= Q * (Q.transpose() * v);
  }
}

}  // namespace detail

// Slope of y on the network exposure to x. Covariates, if given, are
// partialled out of both sides first.
inline OlsFit ols_fit(const Network& net, const std::vector<double>& x,
                      const std::vector<double>& y,
                      const std::vector<std::vector<double>>& covariates = {}) {
  if (y.size() != net.size()) throw InputError("ols_fit: y length mismatch");
  OlsFit fit;
  fit.exposure = spillovers(net, x);
  std::vector<double> yr = y;
  detail::partial_out(covariates, {&fit.exposure, &yr});
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < yr.size(); ++i) {
    sxy += fit.exposure[i] * yr[i];
    sxx += fit.exposure[i] * fit.exposure[i];
  }
  if (!(sxx > 0.0))
    throw NumericalError("ols_fit: exposure has no variation");
  fit.beta = sxy / sxx;
  fit.exposure_ss = sxx;
  fit.residuals.resize(yr.size());
  for (std::size_t i = 0; i < yr.size(); ++i)
    fit.residuals[i] = yr[i] - fit.beta * fit.exposure[i];
  return fit;
}

inline EstimateResult ols_spillover(
    const Network& net, const std::vector<double>& x,
    const std::vector<double>& y,
    const std::vector<std::vector<double>>& covariates = {}) {
  OlsFit fit = ols_fit(net, x, y, covariates);
  EstimateResult r;
  r.estimate = fit.beta;
  r.method = "ols";
  r.diagnostics["exposure_ss"] = fit.exposure_ss;
  return r;
}

// Divides out the attenuation/inflation factor 1 + eta. The factor must stay
// clear of zero.
inline EstimateResult correct_known_eta(const EstimateResult& ols, double eta,
                                        const std::string& method = "corrected") {
  if (std::abs(1.0 + eta) < 1e-6)
    throw NumericalError("correction factor 1 + eta = " +
                         std::to_string(1.0 + eta) + " too close to zero");
  EstimateResult r = ols;
  r.estimate = ols.estimate / (1.0 + eta);
  r.method = method;
  r.eta = eta;
  return r;
}

namespace detail {

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

inline double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double a : v) acc += a * a;
  return acc / static_cast<double>(v.size());
}

inline double exposure_mean_square(const Network& sampled,
                                   const std::vector<double>& x) {
  double ms = mean_square(spillovers(sampled, x));
  if (!(ms > 0.0))
    throw NumericalError("eta_hat: observed exposure has no variation");
  return ms;
}

}  // namespace detail

// Ratio of the missing to the observed exposure second moment under
// independence of treatment and links, from aggregate degree data alone:
//   (n_bad / n) * mean sampled degree * mean missing degree * xbar^2
// over the mean squared observed exposure.
inline double eta_hat_independent(const Network& sampled,
                                  const std::vector<double>& x,
                                  const DegreeStats& stats) {
  if (stats.n != sampled.size())
    throw InputError("eta_hat_independent: stats population mismatch");
  if (stats.n_bad == 0) return 0.0;
  double xbar = detail::mean(x);
  double share = static_cast<double>(stats.n_bad) / static_cast<double>(stats.n);
  double num = share * stats.d_h_bar * stats.d_b_bar * xbar * xbar;
  return num / detail::exposure_mean_square(sampled, x);
}

// Same ratio but using the missing degree conditional on the observed one,
// which matters when the two are dependent.
inline double eta_hat_conditional(const Network& sampled,
                                  const std::vector<double>& x,
                                  const DegreeStats& stats) {
  if (stats.n != sampled.size())
    throw InputError("eta_hat_conditional: stats population mismatch");
  if (!stats.conditional)
    throw InputError("eta_hat_conditional: stats lack the conditional table");
  if (stats.n_bad == 0) return 0.0;
  double xbar = detail::mean(x);
  double num = 0.0;
  for (const ConditionalCell& c : *stats.conditional)
    num += static_cast<double>(c.count) * c.d_h * c.d_b_bar;
  num *= xbar * xbar / static_cast<double>(stats.n);
  return num / detail::exposure_mean_square(sampled, x);
}

// Closed-form ratio for capped surveys when the degree law itself is known:
// nodes above the cap keep `cap` links and lose on average the law's
// conditional excess.
inline double eta_fixed_choice_analytic(const DegreeLaw& law, long cap,
                                        const Network& sampled,
                                        const std::vector<double>& x) {
  if (cap <= 0) throw InputError("eta_fixed_choice_analytic: cap must be > 0");
  double xbar = detail::mean(x);
  double num = 0.0;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    double p_above = 1.0 - law.prob_le(i, cap);
    if (p_above <= 0.0) continue;
    num += p_above * static_cast<double>(cap) *
           (law.mean_above(i, cap) - static_cast<double>(cap)) * xbar * xbar;
  }
  num /= static_cast<double>(sampled.size());
  return num / detail::exposure_mean_square(sampled, x);
}

// ---------------------------------------------------------------------------
// Binary "any treated contact" outcome.

// Rescaling factor mapping the naive any-observed-contact slope to the
// any-true-contact slope, from aggregate degree data:
//   numerator   (E d^H + E d^B) / p(any true treated contact)
//   denominator E d^H / p(any observed treated contact)
//               + E(d^B | observed contact) - E(d^B | none)
inline double dummy_rescale_factor(double e_dh, double e_db,
                                   double split_pos_mean, double split_zero_mean,
                                   double p_pos_observed, double p_pos_true) {
  if (!(p_pos_observed > 0.0) || !(p_pos_true > 0.0))
    throw NumericalError("dummy_rescale: contact probabilities must be > 0");
  double num = (e_dh + e_db) / p_pos_true;
  double den = e_dh / p_pos_observed + (split_pos_mean - split_zero_mean);
  if (std::abs(den) < 1e-12)
    throw NumericalError("dummy_rescale: degenerate denominator");
  return num / den;
}

struct DummyOptions {
  // Probability that a node has at least one treated true contact. When
  // absent, estimated as 1 - mean over nodes of (1 - xbar)^(d^H_i + mean d^B),
  // treating links as independent of treatment.
  std::optional<double> p_pos_true;
};

inline EstimateResult estimate_dummy(const Network& sampled,
                                     const std::vector<double>& x,
                                     const std::vector<double>& y,
                                     const DegreeStats& stats,
                                     const DummyOptions& opt = {}) {
  if (y.size() != sampled.size()) throw InputError("estimate_dummy: y length");
  if (!stats.treated_split)
    throw InputError("estimate_dummy: stats lack the exposure split");
  std::vector<double> sh = spillovers(sampled, x);
  double sy_pos = 0.0, sy_zero = 0.0;
  std::size_t npos = 0, nzero = 0;
  for (std::size_t i = 0; i < sh.size(); ++i)
    if (sh[i] > 0.0) {
      sy_pos += y[i];
      ++npos;
    } else {
      sy_zero += y[i];
      ++nzero;
    }
  if (npos == 0 || nzero == 0)
    throw NumericalError("estimate_dummy: a contact-dummy group is empty");
  double gamma_ols = sy_pos / static_cast<double>(npos) -
                     sy_zero / static_cast<double>(nzero);
  double p_pos_obs =
      static_cast<double>(npos) / static_cast<double>(sh.size());

  double xbar = detail::mean(x);
  double share = static_cast<double>(stats.n_bad) / static_cast<double>(stats.n);
  double e_db = share * stats.d_b_bar;
  std::vector<double> dh = sampled.in_degrees();
  double e_dh = detail::mean(dh);
  double p_pos_true;
  if (opt.p_pos_true) {
    p_pos_true = *opt.p_pos_true;
  } else {
    double acc = 0.0;
    for (double d : dh) acc += std::pow(1.0 - xbar, d + e_db);
    p_pos_true = 1.0 - acc / static_cast<double>(dh.size());
  }
  double factor = dummy_rescale_factor(
      e_dh, e_db, stats.treated_split->pos_mean, stats.treated_split->zero_mean,
      p_pos_obs, p_pos_true);
  EstimateResult r;
  r.estimate = factor * gamma_ols;
  r.method = "dummy_rescaled";
  r.diagnostics["gamma_ols"] = gamma_ols;
  r.diagnostics["rescale_factor"] = factor;
  r.diagnostics["p_pos_observed"] = p_pos_obs;
  r.diagnostics["p_pos_true"] = p_pos_true;
  return r;
}

// ---------------------------------------------------------------------------
// Robustness summaries: how much missing-link bias a conclusion can absorb.

struct RobustnessOptions {
  // Target slope: reports the eta that would move the naive estimate to it.
  std::optional<double> tau;
  // Interval of plausible eta values: reports the implied slope interval.
  std::optional<std::pair<double, double>> eta_range;
};

struct RobustnessReport {
  double beta_ols = 0.0;
  std::optional<double> eta_star;    // bias ratio needed to reach tau
  std::optional<double> d_b_star;    // mean missing degree implying eta_star
  std::optional<std::pair<double, double>> beta_range;
};

inline RobustnessReport robustness(const Network& sampled,
                                   const std::vector<double>& x,
                                   const std::vector<double>& y,
                                   const DegreeStats& stats,
                                   const RobustnessOptions& opt) {
  RobustnessReport rep;
  rep.beta_ols = ols_fit(sampled, x, y).beta;
  if (opt.tau) {
    if (*opt.tau == 0.0) throw InputError("robustness: tau must be nonzero");
    double eta_star = (rep.beta_ols - *opt.tau) / *opt.tau;
    rep.eta_star = eta_star;
    // Inverting the independence-based ratio for the mean missing degree.
    if (stats.n_bad > 0 && stats.d_h_bar != 0.0) {
      double xbar = detail::mean(x);
      if (xbar != 0.0) {
        double denom = detail::exposure_mean_square(sampled, x);
        double share =
            static_cast<double>(stats.n_bad) / static_cast<double>(stats.n);
        rep.d_b_star =
            eta_star * denom / (share * stats.d_h_bar * xbar * xbar);
      }
    }
  }
  if (opt.eta_range) {
    auto [lo, hi] = *opt.eta_range;
    if (hi < lo) throw InputError("robustness: empty eta interval");
    if (1.0 + lo <= 0.0 || 1.0 + hi <= 0.0)
      throw NumericalError("robustness: correction pole inside eta interval");
    double b1 = rep.beta_ols / (1.0 + hi);
    double b2 = rep.beta_ols / (1.0 + lo);
    rep.beta_range = {std::min(b1, b2), std::max(b1, b2)};
  }
  return rep;
}

}  // namespace netspill
