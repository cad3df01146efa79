#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "netspill/error.hpp"
#include "netspill/network.hpp"

namespace netspill {

// ---------------------------------------------------------------------------
// Normal distribution helpers.

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse standard normal CDF: rational approximation (Acklam) polished with
// one Halley step, giving close to machine precision on (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InputError("normal_quantile: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

// ---------------------------------------------------------------------------
// Gumbel copula family, theta >= 1. theta = 1 is independence; dependence
// strengthens with theta. C(u,v) = exp(-((-ln u)^t + (-ln v)^t)^(1/t)).

inline void check_theta(double theta) {
  if (!(theta >= 1.0) || !std::isfinite(theta))
    throw InputError("gumbel: theta must be >= 1");
}

inline double gumbel_cdf(double u, double v, double theta) {
  check_theta(theta);
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0)
    throw InputError("gumbel_cdf: arguments outside [0,1]");
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  double lu = -std::log(u), lv = -std::log(v);
  double s = std::pow(lu, theta) + std::pow(lv, theta);
  return std::exp(-std::pow(s, 1.0 / theta));
}

// dC/du: the conditional CDF of V given U = u. Monotone in v from 0 to 1.
inline double gumbel_conditional(double u, double v, double theta) {
  check_theta(theta);
  if (u <= 0.0 || u >= 1.0)
    throw InputError("gumbel_conditional: u outside (0,1)");
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  double lu = -std::log(u), lv = -std::log(v);
  double s = std::pow(lu, theta) + std::pow(lv, theta);
  // C * lu^(t-1) * s^(1/t-1) / u, assembled in logs for stability.
  double lc = -std::pow(s, 1.0 / theta) + (theta - 1.0) * std::log(lu) +
              (1.0 / theta - 1.0) * std::log(s) + lu;
  return std::exp(lc);
}

inline double gumbel_log_density(double u, double v, double theta) {
  check_theta(theta);
  if (u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0)
    throw InputError("gumbel_log_density: arguments outside (0,1)");
  double lu = -std::log(u), lv = -std::log(v);
  double s = std::pow(lu, theta) + std::pow(lv, theta);
  double s1t = std::pow(s, 1.0 / theta);
  return -s1t + (theta - 1.0) * (std::log(lu) + std::log(lv)) + (lu + lv) +
         (2.0 / theta - 2.0) * std::log(s) +
         std::log1p((theta - 1.0) / s1t);
}

// Draws (u, v) from the copula by conditional inversion: u uniform, then v
// solving dC/du(u, v) = w for uniform w (bisection, then Newton polish with
// the copula density).
inline std::pair<double, double> gumbel_sample(double theta,
                                               std::mt19937_64& rng) {
  check_theta(theta);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0, w = 0.0;
  do { u = unif(rng); } while (u <= 0.0 || u >= 1.0);
  do { w = unif(rng); } while (w <= 0.0 || w >= 1.0);
  if (theta == 1.0) return {u, w};
  double lo = 1e-14, hi = 1.0 - 1e-14;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (gumbel_conditional(u, mid, theta) < w)
      lo = mid;
    else
      hi = mid;
  }
  double v = 0.5 * (lo + hi);
  for (int it = 0; it < 2; ++it) {
    double f = gumbel_conditional(u, v, theta) - w;
    double dens = std::exp(gumbel_log_density(u, v, theta));
    if (!(dens > 0.0) || !std::isfinite(dens)) break;
    double step = f / dens;
    double vn = v - step;
    if (vn <= lo || vn >= hi) break;
    v = vn;
  }
  return {u, v};
}

// ---------------------------------------------------------------------------
// Marginal distributions usable on either side of the copula.

class Marginal {
 public:
  enum class Kind { normal, discrete_uniform, empirical };

  static Marginal normal(double mean, double sd) {
    if (!(sd > 0.0)) throw InputError("normal marginal: sd must be positive");
    Marginal m;
    m.kind_ = Kind::normal;
    m.mean_ = mean;
    m.sd_ = sd;
    return m;
  }

  static Marginal discrete_uniform(long lo, long hi) {
    if (hi < lo) throw InputError("discrete uniform marginal: hi < lo");
    Marginal m;
    m.kind_ = Kind::discrete_uniform;
    m.lo_ = lo;
    m.hi_ = hi;
    return m;
  }

  static Marginal empirical(std::vector<double> sample) {
    if (sample.empty()) throw InputError("empirical marginal: empty sample");
    for (double v : sample)
      if (!std::isfinite(v)) throw InputError("empirical marginal: non-finite value");
    std::sort(sample.begin(), sample.end());
    Marginal m;
    m.kind_ = Kind::empirical;
    m.sample_ = std::move(sample);
    return m;
  }

  Kind kind() const { return kind_; }
  double normal_mean() const { return mean_; }
  double normal_sd() const { return sd_; }
  long du_lo() const { return lo_; }
  long du_hi() const { return hi_; }
  const std::vector<double>& sample() const { return sample_; }

  double cdf(double x) const {
    switch (kind_) {
      case Kind::normal:
        return normal_cdf((x - mean_) / sd_);
      case Kind::discrete_uniform: {
        if (x < static_cast<double>(lo_)) return 0.0;
        if (x >= static_cast<double>(hi_)) return 1.0;
        double k = std::floor(x) - static_cast<double>(lo_) + 1.0;
        return k / static_cast<double>(hi_ - lo_ + 1);
      }
      case Kind::empirical: {
        auto it = std::upper_bound(sample_.begin(), sample_.end(), x);
        return static_cast<double>(it - sample_.begin()) /
               static_cast<double>(sample_.size());
      }
    }
    return 0.0;
  }

  double quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile: p outside [0,1]");
    switch (kind_) {
      case Kind::normal:
        if (p <= 0.0 || p >= 1.0)
          throw InputError("normal quantile: p must be interior");
        return mean_ + sd_ * normal_quantile(p);
      case Kind::discrete_uniform: {
        if (p == 0.0) return static_cast<double>(lo_);
        double k = static_cast<double>(hi_ - lo_ + 1);
        return static_cast<double>(lo_) + std::ceil(p * k) - 1.0;
      }
      case Kind::empirical: {
        if (p == 0.0) return sample_.front();
        std::size_t n = sample_.size();
        std::size_t idx = static_cast<std::size_t>(
            std::ceil(p * static_cast<double>(n))) - 1;
        return sample_[std::min(idx, n - 1)];
      }
    }
    return 0.0;
  }

  bool has_atoms() const { return kind_ != Kind::normal; }

  // Sorted unique support values with the CDF evaluated at each. Only for
  // marginals with atoms.
  std::vector<std::pair<double, double>> atoms() const {
    std::vector<std::pair<double, double>> out;
    if (kind_ == Kind::discrete_uniform) {
      double k = static_cast<double>(hi_ - lo_ + 1);
      for (long v = lo_; v <= hi_; ++v)
        out.emplace_back(static_cast<double>(v),
                         static_cast<double>(v - lo_ + 1) / k);
    } else if (kind_ == Kind::empirical) {
      std::size_t n = sample_.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n && sample_[i + 1] == sample_[i]) continue;
        out.emplace_back(sample_[i],
                         static_cast<double>(i + 1) / static_cast<double>(n));
      }
    } else {
      throw InputError("atoms: continuous marginal");
    }
    return out;
  }

  double mean() const {
    switch (kind_) {
      case Kind::normal:
        return mean_;
      case Kind::discrete_uniform:
        return 0.5 * static_cast<double>(lo_ + hi_);
      case Kind::empirical:
        return std::accumulate(sample_.begin(), sample_.end(), 0.0) /
               static_cast<double>(sample_.size());
    }
    return 0.0;
  }

 private:
  Kind kind_ = Kind::normal;
  double mean_ = 0.0, sd_ = 1.0;
  long lo_ = 0, hi_ = 0;
  std::vector<double> sample_;
};

// A fitted (or posited) dependence model between a covariate and degrees.
struct CopulaModel {
  double theta = 1.0;
  Marginal x_marginal = Marginal::normal(0.0, 1.0);
  Marginal d_marginal = Marginal::normal(0.0, 1.0);
};

// ---------------------------------------------------------------------------
// Rank-based pseudo-likelihood fit of theta.

// Midranks scaled by 1/(n+1), keeping pseudo-observations strictly interior.
inline std::vector<double> pseudo_observations(const std::vector<double>& x) {
  std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> u(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      u[idx[k]] = midrank / static_cast<double>(n + 1);
    i = j + 1;
  }
  return u;
}

struct GumbelFitOptions {
  double theta_lo = 1.0;
  double theta_hi = 50.0;
  double tol = 1e-6;
};

inline double fit_gumbel_theta(const std::vector<double>& u,
                               const std::vector<double>& v,
                               const GumbelFitOptions& opt = {}) {
  if (u.size() != v.size() || u.size() < 4)
    throw InputError("fit_gumbel: need matched samples of size >= 4");
  auto degenerate = [](const std::vector<double>& a) {
    for (double w : a)
      if (w != a.front()) return false;
    return true;
  };
  if (degenerate(u) || degenerate(v))
    throw NumericalError("fit_gumbel: a margin is degenerate (all ties)");
  auto nll = [&](double theta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      acc -= gumbel_log_density(u[i], v[i], theta);
    return acc;
  };
  // Coarse scan brackets the optimum, golden-section narrows it.
  const int grid = 50;
  double best = opt.theta_lo, best_val = nll(opt.theta_lo);
  for (int k = 1; k <= grid; ++k) {
    double th = opt.theta_lo +
                (opt.theta_hi - opt.theta_lo) * static_cast<double>(k) / grid;
    double val = nll(th);
    if (val < best_val) {
      best_val = val;
      best = th;
    }
  }
  double step = (opt.theta_hi - opt.theta_lo) / grid;
  double lo = std::max(opt.theta_lo, best - step);
  double hi = std::min(opt.theta_hi, best + step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = nll(c), fd = nll(d);
  while (hi - lo > opt.tol) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = nll(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = nll(d);
    }
  }
  double theta = 0.5 * (lo + hi);
  if (theta > opt.theta_hi - 10.0 * opt.tol)
    throw NumericalError("fit_gumbel: optimum at the upper search bound " +
                         std::to_string(opt.theta_hi));
  return theta;
}

inline CopulaModel fit_gumbel(const std::vector<double>& x,
                              const std::vector<double>& d,
                              const GumbelFitOptions& opt = {}) {
  if (x.size() != d.size())
    throw InputError("fit_gumbel: sample length mismatch");
  std::vector<double> u = pseudo_observations(x);
  std::vector<double> v = pseudo_observations(d);
  CopulaModel m;
  m.theta = fit_gumbel_theta(u, v, opt);
  m.x_marginal = Marginal::empirical(x);
  m.d_marginal = Marginal::empirical(d);
  return m;
}

// ---------------------------------------------------------------------------
// E(d | x): mean of the degree marginal under the conditional copula law.
// Uses the survival identity E(D|u) = d_min + integral of
// P(D > s | u) = 1 - dC/du(u, F_D(s)) over the support. Marginals with atoms
// reduce to an exact finite sum over the jump points; continuous marginals
// use composite Gauss-Legendre with panel doubling.

struct QuadratureOptions {
  int initial_panels = 8;
  int max_panels = 2048;
  double tol = 1e-4;
};

namespace detail {

inline double survival_weight(double u, double q, double theta) {
  if (q <= 0.0) return 1.0;
  if (q >= 1.0) return 0.0;
  return 1.0 - gumbel_conditional(u, q, theta);
}

inline double gauss_survival_integral(const CopulaModel& m, double u, double a,
                                      double b, int panels) {
  // 8-point Gauss-Legendre nodes on [-1, 1].
  static const double xs[] = {-0.9602898564975363, -0.7966664774136267,
                              -0.5255324099163290, -0.1834346424956498,
                              0.1834346424956498,  0.5255324099163290,
                              0.7966664774136267,  0.9602898564975363};
  static const double ws[] = {0.1012285362903763, 0.2223810344533745,
                              0.3137066458778873, 0.3626837833783620,
                              0.3626837833783620, 0.3137066458778873,
                              0.2223810344533745, 0.1012285362903763};
  double total = 0.0;
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    double mid = lo + 0.5 * h;
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) {
      double s = mid + 0.5 * h * xs[k];
      acc += ws[k] * survival_weight(u, m.d_marginal.cdf(s), m.theta);
    }
    total += acc * 0.5 * h;
  }
  return total;
}

}  // namespace detail

inline double expected_degree_given_x(const CopulaModel& m, double x,
                                      const QuadratureOptions& opt = {}) {
  check_theta(m.theta);
  double u = m.x_marginal.cdf(x);
  const double eps = 1e-12;
  u = std::min(std::max(u, eps), 1.0 - eps);
  if (m.d_marginal.has_atoms()) {
    auto at = m.d_marginal.atoms();
    double e = at.front().first;
    for (std::size_t k = 0; k + 1 < at.size(); ++k)
      e += (at[k + 1].first - at[k].first) *
           detail::survival_weight(u, at[k].second, m.theta);
    return e;
  }
  // Continuous (normal) degree marginal: truncate the support at +-8 sd and
  // integrate the survival, doubling panels until stable.
  double mu = m.d_marginal.normal_mean(), sd = m.d_marginal.normal_sd();
  double a = mu - 8.0 * sd, b = mu + 8.0 * sd;
  double prev = detail::gauss_survival_integral(m, u, a, b, opt.initial_panels);
  for (int panels = 2 * opt.initial_panels; panels <= opt.max_panels;
       panels *= 2) {
    double cur = detail::gauss_survival_integral(m, u, a, b, panels);
    if (std::abs(cur - prev) < opt.tol * std::max(1.0, std::abs(cur)))
      return a + cur;
    prev = cur;
  }
  throw NumericalError(
      "expected_degree_given_x: quadrature failed to stabilize");
}

// ---------------------------------------------------------------------------
// Correction ratio for capped surveys using a fitted dependence model.
// For each node whose reported links hit the cap, the expected number of
// unreported links is E(d | x_i) minus the reported degree (floored at zero);
// scaled by the mean of x this plays the role of the missing exposure.
// Intended for binary unit-weight networks, where weighted and counted
// degrees coincide.
inline double eta_hat_copula(const Network& sampled,
                             const std::vector<double>& x,
                             const CopulaModel& model, std::size_t cap) {
  if (x.size() != sampled.size())
    throw InputError("eta_hat_copula: length mismatch");
  if (cap == 0) throw InputError("eta_hat_copula: cap must be positive");
  std::vector<double> sh = spillovers(sampled, x);
  std::vector<double> dh = sampled.in_degrees();
  std::vector<std::size_t> counts = sampled.link_counts();
  double xbar = std::accumulate(x.begin(), x.end(), 0.0) /
                static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    den += sh[i] * sh[i];
    if (counts[i] != cap) continue;
    double excess = expected_degree_given_x(model, x[i]) - dh[i];
    if (excess > 0.0) num += sh[i] * excess * xbar;
  }
  if (den == 0.0)
    throw NumericalError("eta_hat_copula: zero observed exposure variance");
  return num / den;
}

}  // namespace netspill
