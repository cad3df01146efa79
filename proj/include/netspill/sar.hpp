#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netspill/error.hpp"
#include "netspill/network.hpp"

namespace netspill {

// Expected action of the unobserved part of the network on a vector, given
// only each row's missing weighted degree `d_b`. Positive mass is spread
// uniformly over the cells the observed row leaves empty (diagonal excluded);
// negative mass (suspected spurious links) is spread uniformly over the
// observed links themselves.
inline std::vector<double> expected_missing_apply(const Network& sampled,
                                                  const std::vector<double>& d_b,
                                                  const std::vector<double>& v) {
  const std::size_t n = sampled.size();
  if (d_b.size() != n || v.size() != n)
    throw InputError("expected_missing_apply: length mismatch");
  double vsum = 0.0;
  for (double a : v) vsum += a;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (d_b[i] == 0.0) continue;
    const auto& row = sampled.row(i);
    double row_v = 0.0;
    for (const Link& l : row) row_v += v[l.src];
    if (d_b[i] > 0.0) {
      std::size_t eligible = n - 1 - row.size();
      if (eligible == 0)
        throw NumericalError("expected_missing_apply: full row cannot gain links");
      out[i] = d_b[i] * (vsum - v[i] - row_v) / static_cast<double>(eligible);
    } else {
      if (row.empty())
        throw NumericalError(
            "expected_missing_apply: empty row cannot lose links");
      out[i] = d_b[i] * row_v / static_cast<double>(row.size());
    }
  }
  return out;
}

enum class CorrectionForm {
  expected_paths,   // append E(Bx) and H E(Bx) columns
  degree_weighted,  // append H(d_b * x) and H^2(d_b * x) columns
};

namespace detail {

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<long>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

// Power-of-the-network instruments [x, Hx, ..., H^k x].
inline Eigen::MatrixXd build_instruments(const Network& sampled,
                                         const std::vector<double>& x,
                                         int k = 2) {
  if (k < 1) throw InputError("build_instruments: k must be >= 1");
  const long n = static_cast<long>(sampled.size());
  Eigen::MatrixXd J(n, k + 1);
  std::vector<double> cur = x;
  J.col(0) = detail::to_eigen(cur);
  for (int p = 1; p <= k; ++p) {
    cur = spillovers(sampled, cur);
    J.col(p) = detail::to_eigen(cur);
  }
  return J;
}

// Same, augmented with the expected contribution of the missing links, so the
// first stage can pick up the part of the exposure the observed network
// cannot explain.
inline Eigen::MatrixXd build_instruments_corrected(
    const Network& sampled, const std::vector<double>& x,
    const std::vector<double>& d_b, int k = 2,
    CorrectionForm form = CorrectionForm::expected_paths) {
  Eigen::MatrixXd base = build_instruments(sampled, x, k);
  const long n = base.rows();
  Eigen::MatrixXd J(n, base.cols() + 2);
  J.leftCols(base.cols()) = base;
  std::vector<double> e1;
  if (form == CorrectionForm::expected_paths) {
    e1 = expected_missing_apply(sampled, d_b, x);
  } else {
    std::vector<double> wx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) wx[i] = d_b[i] * x[i];
    e1 = spillovers(sampled, wx);
  }
  std::vector<double> e2 = spillovers(sampled, e1);
  J.col(base.cols()) = detail::to_eigen(e1);
  J.col(base.cols() + 1) = detail::to_eigen(e2);
  return J;
}

struct TslsFit {
  Eigen::Vector2d theta;      // (lambda, beta)
  Eigen::MatrixXd z;          // n x 2: [observed exposure to y, x]
  Eigen::MatrixXd pz;         // projection of z on the instrument span
  Eigen::VectorXd residuals;  // y - z theta
  Eigen::Matrix2d zpz;        // z' P z
};

// Two-stage least squares of y on [net y, x] with instrument matrix J. The
// projection uses a rank-revealing QR so redundant columns are harmless.
inline TslsFit tsls(const Network& sampled, const std::vector<double>& x,
                    const std::vector<double>& y, const Eigen::MatrixXd& J) {
  const std::size_t n = sampled.size();
  if (x.size() != n || y.size() != n) throw InputError("tsls: length mismatch");
  if (J.rows() != static_cast<long>(n)) throw InputError("tsls: J row mismatch");
  TslsFit fit;
  fit.z.resize(static_cast<long>(n), 2);
  fit.z.col(0) = detail::to_eigen(spillovers(sampled, y));
  fit.z.col(1) = detail::to_eigen(x);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
  long rank = qr.rank();
  if (rank < 2) throw NumericalError("tsls: instrument rank below 2");
  Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(J.rows(), rank);
  fit.pz = Q * (Q.transpose() * fit.z);
  fit.zpz = fit.z.transpose() * fit.pz;
  double scale = fit.zpz.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || std::abs(fit.zpz.determinant()) < 1e-12 * scale * scale)
    throw NumericalError("tsls: projected regressors near collinear");
  Eigen::VectorXd yv = detail::to_eigen(y);
  fit.theta = fit.zpz.inverse() * (fit.pz.transpose() * yv);
  fit.residuals = yv - fit.z * fit.theta;
  return fit;
}

// Bias-ratio matrix (z' P z)^{-1} z' P [w, 0], where w is the missing part of
// the exposure to y (exact when the missing network is known, expected
// otherwise). Its second column is identically zero: only the exposure
// regressor is contaminated.
inline Eigen::Matrix2d eta_matrix(const TslsFit& fit,
                                  const std::vector<double>& missing_exposure) {
  if (static_cast<long>(missing_exposure.size()) != fit.z.rows())
    throw InputError("eta_matrix: length mismatch");
  Eigen::MatrixXd zb = Eigen::MatrixXd::Zero(fit.z.rows(), 2);
  zb.col(0) = detail::to_eigen(missing_exposure);
  Eigen::Matrix2d raw = fit.pz.transpose() * zb;
  return fit.zpz.inverse() * raw;
}

// theta = (I + eta)^{-1} theta_biased.
inline Eigen::Vector2d debias_theta(const Eigen::Vector2d& theta,
                                    const Eigen::Matrix2d& eta) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Identity() + eta;
  if (std::abs(m.determinant()) < 1e-10)
    throw NumericalError("debias_theta: I + eta near singular");
  return m.inverse() * theta;
}

struct SarVariance {
  std::array<std::array<double, 2>, 2> cov{};  // asymptotic, per-observation
  double se_lambda = 0.0;
  double se_beta = 0.0;
};

// Sandwich for the debiased coefficients:
//   sigma^2 (I+eta)^{-1} Qzz^{-1} Qhj [(I+eta)^{-1} Qzz^{-1}]'
// with Qzz = z'Pz/n and Qhj = (Pz)'(Pz)/n. With eta = 0 this is the textbook
// homoskedastic 2SLS covariance.
inline SarVariance sar_sandwich(const TslsFit& fit, const Eigen::Matrix2d& eta) {
  const double n = static_cast<double>(fit.z.rows());
  double sigma2 = fit.residuals.squaredNorm() / n;
  Eigen::Matrix2d qzz = fit.zpz / n;
  Eigen::Matrix2d qhj = (fit.pz.transpose() * fit.pz) / n;
  Eigen::Matrix2d m = Eigen::Matrix2d::Identity() + eta;
  if (std::abs(m.determinant()) < 1e-10)
    throw NumericalError("sar_sandwich: I + eta near singular");
  Eigen::Matrix2d a = m.inverse() * qzz.inverse();
  Eigen::Matrix2d v = sigma2 * a * qhj * a.transpose();
  SarVariance out;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) out.cov[r][c] = v(r, c);
  out.se_lambda = std::sqrt(v(0, 0) / n);
  out.se_beta = std::sqrt(v(1, 1) / n);
  return out;
}

struct SarEstimate {
  double lambda = 0.0;
  double beta = 0.0;
  std::string method;
  std::optional<std::array<std::array<double, 2>, 2>> eta;
  std::optional<double> se_lambda;
  std::optional<double> se_beta;
  std::map<std::string, double> diagnostics;
};

inline SarEstimate sar_naive(const Network& sampled,
                             const std::vector<double>& x,
                             const std::vector<double>& y, int k = 2) {
  TslsFit fit = tsls(sampled, x, y, build_instruments(sampled, x, k));
  SarVariance var = sar_sandwich(fit, Eigen::Matrix2d::Zero());
  SarEstimate est;
  est.lambda = fit.theta(0);
  est.beta = fit.theta(1);
  est.method = "sar_naive";
  est.se_lambda = var.se_lambda;
  est.se_beta = var.se_beta;
  return est;
}

struct SarCorrectionInputs {
  // Per-row missing weighted degree (negative where observed links are
  // suspected spurious).
  std::vector<double> d_b;
  // When set, the true missing network; the bias ratio then uses the real
  // missing exposure instead of its expectation.
  const Network* true_missing = nullptr;
  int k = 2;
  CorrectionForm form = CorrectionForm::expected_paths;
};

inline SarEstimate sar_corrected(const Network& sampled,
                                 const std::vector<double>& x,
                                 const std::vector<double>& y,
                                 const SarCorrectionInputs& in) {
  TslsFit fit = tsls(
      sampled, x, y,
      build_instruments_corrected(sampled, x, in.d_b, in.k, in.form));
  std::vector<double> missing_exposure;
  if (in.true_missing != nullptr) {
    if (in.true_missing->size() != sampled.size())
      throw InputError("sar_corrected: missing network size mismatch");
    missing_exposure = spillovers(*in.true_missing, y);
  } else {
    missing_exposure = expected_missing_apply(sampled, in.d_b, y);
  }
  Eigen::Matrix2d eta = eta_matrix(fit, missing_exposure);
  Eigen::Vector2d theta = debias_theta(fit.theta, eta);
  SarVariance var = sar_sandwich(fit, eta);
  SarEstimate est;
  est.lambda = theta(0);
  est.beta = theta(1);
  est.method = in.true_missing ? "sar_corrected_oracle" : "sar_corrected_feasible";
  std::array<std::array<double, 2>, 2> em{};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) em[r][c] = eta(r, c);
  est.eta = em;
  est.se_lambda = var.se_lambda;
  est.se_beta = var.se_beta;
  est.diagnostics["lambda_biased"] = fit.theta(0);
  est.diagnostics["beta_biased"] = fit.theta(1);
  return est;
}

}  // namespace netspill
