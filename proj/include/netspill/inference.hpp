#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "netspill/error.hpp"
#include "netspill/linear.hpp"
#include "netspill/network.hpp"
#include "netspill/rng.hpp"

namespace netspill {

struct VarianceReport {
  double se = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  std::map<std::string, double> components;
};

struct BootstrapConfig {
  int outer = 40;  // synthetic missing-network draws
  int inner = 25;  // observation resamples per draw
  std::uint64_t seed = 0;
  // Rows allowed to receive synthetic missing links; all rows when empty.
  std::vector<std::size_t> rows;
};

// Standard error of the corrected slope by simulation. Each outer pass plants
// round(n * d_bar_b) unit links uniformly over cells the observed network
// leaves empty (within the allowed rows) and recomputes the corrected slope
// against the planted links; each inner pass resamples the regression
// residuals to rebuild outcomes and re-estimate that slope. Two variance
// sources enter once each: where the unobserved links sit (outer draws) and
// regression noise (inner resamples). The regression residuals also carry the
// unobserved-spillover term, which the corrected slope already absorbs, so
// their variance is shrunk by the planted draws' own second moment before
// resampling; without that the spread double-counts. With d_bar_b = 0 no
// links are planted and this collapses to a plain residual bootstrap of the
// uncorrected slope.
inline VarianceReport bootstrap_se(const Network& sampled,
                                   const std::vector<double>& x,
                                   const std::vector<double>& y,
                                   double d_bar_b,
                                   const BootstrapConfig& cfg = {}) {
  const std::size_t n = sampled.size();
  if (x.size() != n || y.size() != n)
    throw InputError("bootstrap_se: length mismatch");
  if (d_bar_b < 0.0) throw InputError("bootstrap_se: negative mean degree");
  if (cfg.outer < 1 || cfg.inner < 1)
    throw InputError("bootstrap_se: loop counts must be positive");
  const long long n_place = std::llround(static_cast<double>(n) * d_bar_b);

  std::vector<std::size_t> rows = cfg.rows;
  if (rows.empty()) {
    rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  } else {
    for (std::size_t r : rows)
      if (r >= n) throw InputError("bootstrap_se: row index out of range");
  }

  // Per allowed row: sorted blocked columns (observed links and diagonal) and
  // the count of cells still open.
  std::vector<std::vector<std::size_t>> blocked(rows.size());
  std::vector<long long> cum(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t i = rows[r];
    for (const Link& l : sampled.row(i)) blocked[r].push_back(l.src);
    blocked[r].push_back(i);
    std::sort(blocked[r].begin(), blocked[r].end());
    cum[r + 1] = cum[r] + static_cast<long long>(n - blocked[r].size());
  }
  if (n_place > cum.back())
    throw NumericalError("bootstrap_se: more links to plant than open cells");

  std::vector<double> sh = spillovers(sampled, x);
  std::mt19937_64 rng = make_rng(cfg.seed);
  std::uniform_int_distribution<long long> cell(0, cum.back() - 1);
  std::uniform_int_distribution<std::size_t> obs(0, n - 1);

  double shh = 0.0, shy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    shh += sh[i] * sh[i];
    shy += sh[i] * y[i];
  }
  if (!(shh > 0.0))
    throw NumericalError("bootstrap_se: observed spillovers are all zero");
  const double beta_raw = shy / shh;
  const double msq = shh / static_cast<double>(n);
  std::vector<double> resid(n);
  double ubar2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = y[i] - beta_raw * sh[i];
    ubar2 += resid[i] * resid[i];
  }
  ubar2 /= static_cast<double>(n);

  std::vector<double> replicates;
  replicates.reserve(static_cast<std::size_t>(cfg.outer) * cfg.inner);
  std::vector<std::vector<std::size_t>> planted(rows.size());
  std::vector<double> sb(n);
  long long degenerate = 0;
  double eta_star_sum = 0.0, scale_sum = 0.0;
  for (int b = 0; b < cfg.outer; ++b) {
    for (auto& p : planted) p.clear();
    for (long long placed = 0; placed < n_place;) {
      long long t = cell(rng);
      std::size_t r = static_cast<std::size_t>(
          std::upper_bound(cum.begin(), cum.end(), t) - cum.begin() - 1);
      long long k = t - cum[r];
      // k-th open column: advance past blocked columns at or below it.
      std::size_t j = static_cast<std::size_t>(k);
      for (std::size_t bcol : blocked[r]) {
        if (bcol <= j) ++j;
        else break;
      }
      auto& pl = planted[r];
      if (std::find(pl.begin(), pl.end(), j) != pl.end()) continue;
      pl.push_back(j);
      ++placed;
    }
    std::fill(sb.begin(), sb.end(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j : planted[r]) sb[rows[r]] += x[j];

    double shb = 0.0, m2b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      shb += sh[i] * sb[i];
      m2b += sb[i] * sb[i];
    }
    m2b /= static_cast<double>(n);
    const double eta = shb / shh;
    if (std::abs(1.0 + eta) < 1e-6) {
      degenerate += cfg.inner;
      continue;
    }
    const double center = beta_raw / (1.0 + eta);
    // Residual second moment net of the planted spillover's contribution;
    // what remains is the regression-noise share.
    const double sigma2 = std::max(
        0.0, ubar2 - center * center * std::max(0.0, m2b - eta * eta * msq));
    const double scale = ubar2 > 0.0 ? std::sqrt(sigma2 / ubar2) : 0.0;
    eta_star_sum += eta;
    scale_sum += scale;

    for (int m = 0; m < cfg.inner; ++m) {
      double noise = 0.0;
      for (std::size_t i = 0; i < n; ++i) noise += sh[i] * resid[obs(rng)];
      replicates.push_back(center + scale * noise / shh / (1.0 + eta));
    }
  }
  if (replicates.size() < 2)
    throw NumericalError("bootstrap_se: all replicates degenerate");
  double mean = 0.0;
  for (double v : replicates) mean += v;
  mean /= static_cast<double>(replicates.size());
  double ss = 0.0;
  for (double v : replicates) ss += (v - mean) * (v - mean);
  VarianceReport rep;
  rep.se = std::sqrt(ss / static_cast<double>(replicates.size() - 1));
  rep.method = "bootstrap";
  rep.seed = cfg.seed;
  rep.components["outer"] = cfg.outer;
  rep.components["inner"] = cfg.inner;
  rep.components["n_planted"] = static_cast<double>(n_place);
  rep.components["replicates"] = static_cast<double>(replicates.size());
  rep.components["degenerate"] = static_cast<double>(degenerate);
  rep.components["replicate_mean"] = mean;
  rep.components["eta_star_mean"] = eta_star_sum / cfg.outer;
  rep.components["residual_scale"] = scale_sum / cfg.outer;
  return rep;
}

// Sandwich variance for the corrected slope when the bias ratio is known:
// the heteroskedasticity-robust slope variance shrunk by (1 + eta)^2.
inline VarianceReport sandwich_known_eta(const OlsFit& fit, double eta) {
  const double n = static_cast<double>(fit.exposure.size());
  if (n < 2.0) throw InputError("sandwich_known_eta: too few observations");
  if (std::abs(1.0 + eta) < 1e-6)
    throw NumericalError("sandwich_known_eta: 1 + eta too close to zero");
  double mxx = 0.0, mxox = 0.0;
  for (std::size_t i = 0; i < fit.exposure.size(); ++i) {
    double s2 = fit.exposure[i] * fit.exposure[i];
    mxx += s2;
    mxox += s2 * fit.residuals[i] * fit.residuals[i];
  }
  mxx /= n;
  mxox /= n;
  if (!(mxx > 0.0)) throw NumericalError("sandwich_known_eta: degenerate design");
  double var = mxox / (mxx * mxx) / ((1.0 + eta) * (1.0 + eta));
  VarianceReport rep;
  rep.se = std::sqrt(var / n);
  rep.method = "sandwich_known_eta";
  rep.components["eta"] = eta;
  rep.components["sigma2_robust"] = mxox / (mxx * mxx);
  return rep;
}

enum class EtaEstimator { independent, conditional };

// Sandwich variance acknowledging that the bias ratio was itself estimated
// from the sample moments (mean treatment, mean squared exposure) while the
// degree aggregates came from outside. Stacked-moment form; the derivative of
// the ratio in the moments is taken by central finite differences with a
// step-doubling consistency check.
inline VarianceReport sandwich_two_step(const Network& sampled,
                                        const std::vector<double>& x,
                                        const std::vector<double>& y,
                                        const DegreeStats& stats,
                                        EtaEstimator kind =
                                            EtaEstimator::independent) {
  const std::size_t n = sampled.size();
  if (x.size() != n || y.size() != n)
    throw InputError("sandwich_two_step: length mismatch");
  OlsFit fit = ols_fit(sampled, x, y);
  double xbar = 0.0;
  for (double xi : x) xbar += xi;
  xbar /= static_cast<double>(n);
  double msq = fit.exposure_ss / static_cast<double>(n);

  double eta0 = kind == EtaEstimator::independent
                    ? eta_hat_independent(sampled, x, stats)
                    : eta_hat_conditional(sampled, x, stats);
  // Both estimators have the form c * xbar^2 / msq with c fixed by the degree
  // aggregates; recover c so the ratio can be re-evaluated at nearby moments.
  double c = xbar == 0.0 ? 0.0 : eta0 * msq / (xbar * xbar);
  auto eta_at = [&](double xb, double ms) {
    if (!(ms > 0.0))
      throw NumericalError("sandwich_two_step: nonpositive moment");
    return c * xb * xb / ms;
  };

  auto fd = [&](double rel) {
    double hx = std::max(std::abs(xbar), 1e-8) * rel;
    double hm = std::max(std::abs(msq), 1e-8) * rel;
    double d1 = (eta_at(xbar + hx, msq) - eta_at(xbar - hx, msq)) / (2.0 * hx);
    double d2 = (eta_at(xbar, msq + hm) - eta_at(xbar, msq - hm)) / (2.0 * hm);
    return std::pair<double, double>{d1, d2};
  };
  auto [g1, g2] = fd(1e-5);
  auto [g1b, g2b] = fd(1e-4);
  auto close = [](double a, double b) {
    double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) <= 0.1 * scale;
  };
  if (!close(g1, g1b) || !close(g2, g2b))
    throw NumericalError("sandwich_two_step: unstable derivative of the ratio");

  double beta_corr = fit.beta / (1.0 + eta0);
  if (std::abs(1.0 + eta0) < 1e-6)
    throw NumericalError("sandwich_two_step: 1 + eta too close to zero");

  // Moment blocks: g1i = (x_i, s_i^2) - their means, g2i = s_i * residual.
  double s11_11 = 0.0, s11_12 = 0.0, s11_22 = 0.0;
  double s12_1 = 0.0, s12_2 = 0.0, s22 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a1 = x[i] - xbar;
    double a2 = fit.exposure[i] * fit.exposure[i] - msq;
    double b = fit.exposure[i] * fit.residuals[i];
    s11_11 += a1 * a1;
    s11_12 += a1 * a2;
    s11_22 += a2 * a2;
    s12_1 += a1 * b;
    s12_2 += a2 * b;
    s22 += b * b;
  }
  const double dn = static_cast<double>(n);
  s11_11 /= dn; s11_12 /= dn; s11_22 /= dn;
  s12_1 /= dn; s12_2 /= dn; s22 /= dn;

  double k21_1 = -g1 * beta_corr * msq;
  double k21_2 = -g2 * beta_corr * msq;
  double k22 = -(1.0 + eta0) * msq;
  // With K11 = -I the stacked sandwich reduces to
  // (S22 + K21 S11 K21' + K21 S12 + S12' K21') / K22^2.
  double mid = s22 +
               k21_1 * (s11_11 * k21_1 + s11_12 * k21_2) +
               k21_2 * (s11_12 * k21_1 + s11_22 * k21_2) +
               2.0 * (k21_1 * s12_1 + k21_2 * s12_2);
  if (mid < 0.0) mid = 0.0;
  double var = mid / (k22 * k22);
  VarianceReport rep;
  rep.se = std::sqrt(var / dn);
  rep.method = "sandwich_two_step";
  rep.components["eta"] = eta0;
  rep.components["beta_corrected"] = beta_corr;
  rep.components["d_eta_d_xbar"] = g1;
  rep.components["d_eta_d_msq"] = g2;
  return rep;
}

}  // namespace netspill
