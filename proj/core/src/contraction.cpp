#include "offtd/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "offtd/error.hpp"
#include "offtd/rng.hpp"

namespace offtd {
namespace {

constexpr double kProbeSlack = 1e-9;
constexpr double kTransientMass = 1e-14;

Matrix dominating_stochastic(const Matrix& m_prime) {
  const auto d = m_prime.cols();
  Matrix m2 = m_prime;
  for (Eigen::Index i = 0; i < m2.rows(); ++i) {
    const double deficit = 1.0 - m_prime.row(i).sum();
    m2.row(i).array() += deficit / static_cast<double>(d);
  }
  return m2;
}

ContractionCertificate certificate_from(const Matrix& m_double_prime, double beta, double theta,
                                        bool shortcut) {
  ContractionCertificate cert;
  cert.theta = theta;
  cert.beta = beta;
  cert.mu = stationary_of(m_double_prime);
  cert.mu_min = cert.mu.minCoeff();
  cert.used_irreducible_shortcut = shortcut;
  return cert;
}

Vector probe_vector(Eigen::Index d, int probe, std::uint64_t seed) {
  Vector x = Vector::Zero(d);
  const auto basis = static_cast<int>(2 * d);
  if (probe < basis) {
    x(probe / 2) = (probe % 2 == 0) ? 1.0 : -1.0;
    return x;
  }
  if (probe == basis) return Vector::Ones(d);
  CounterRng rng(seed, Stream::kProbe, static_cast<std::uint64_t>(probe));
  const bool heavy = probe % 2 == 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double u = 2.0 * rng.uniform() - 1.0;
    x(i) = heavy ? u * std::exp(6.0 * (rng.uniform() - 0.5)) : u;
  }
  return x;
}

}  // namespace

double f_factor(double x, int n) {
  require(x >= 0.0, ErrorCode::kInvalidParameter, "f_factor: x must be nonnegative");
  require(n >= 1, ErrorCode::kInvalidParameter, "f_factor: n must be >= 1");
  if (x == 1.0) return static_cast<double>(n);
  if (std::abs(1.0 - x) < 1e-6) {
    // Direct sum near the removable singularity.
    double sum = 0.0, term = 1.0;
    for (int i = 0; i < n; ++i, term *= x) sum += term;
    return sum;
  }
  return (1.0 - std::pow(x, n)) / (1.0 - x);
}

ModulusResult check_substochastic(const Eigen::Ref<const Matrix>& m, double tol) {
  require(m.rows() == m.cols() && m.rows() > 0, ErrorCode::kDimensionMismatch,
          "check_substochastic: matrix must be square and nonempty");
  ModulusResult r;
  r.min_entry = m.minCoeff();
  r.max_row_sum = m.rowwise().sum().maxCoeff();
  r.is_substochastic = r.min_entry >= -tol && r.max_row_sum <= 1.0 + tol;
  r.modulus_beta = std::max(0.0, 1.0 - r.max_row_sum);
  return r;
}

double omega_formula(const OperatorMatrices& m) {
  return m.K_SA.minCoeff() * f_factor(m.gamma * m.D_c_min, m.n) * (1.0 - m.gamma * m.D_rho_max);
}

ModulusResult certify_modulus(const OperatorMatrices& m) {
  ModulusResult r = check_substochastic(m.A);
  r.omega_formula = omega_formula(m);
  return r;
}

double ContractionCertificate::factor(double p) const {
  require(p >= 1.0, ErrorCode::kInvalidParameter, "factor: p must be >= 1");
  if (std::isinf(p)) return 1.0 - beta;
  return std::pow(1.0 - beta, 1.0 - 1.0 / p) * std::pow(1.0 - theta * beta, 1.0 / p);
}

double ContractionCertificate::mu_lower_bound() const {
  if (used_irreducible_shortcut) return 0.0;
  return beta * (1.0 - theta) / ((1.0 - theta * beta) * static_cast<double>(mu.size()));
}

ContractionCertificate build_weights(const Eigen::Ref<const Matrix>& m, double beta,
                                     double theta) {
  require(beta > 0.0 && beta < 1.0, ErrorCode::kInvalidParameter,
          "build_weights: beta must lie in (0,1)");
  require(theta > 0.0 && theta < 1.0, ErrorCode::kInvalidParameter,
          "build_weights: theta must lie in (0,1)");
  const auto check = check_substochastic(m);
  require(check.is_substochastic && check.modulus_beta >= beta - kSubstochasticTol,
          ErrorCode::kNotSubstochastic,
          "build_weights: matrix is not substochastic with modulus " + std::to_string(beta));
  const auto d = static_cast<double>(m.rows());
  const double scale = 1.0 - theta * beta;
  Matrix m_prime = m / scale;
  m_prime.array() += beta * (1.0 - theta) / (scale * d);
  return certificate_from(dominating_stochastic(m_prime), beta, theta, false);
}

ContractionCertificate build_weights_preferring_irreducible(const Eigen::Ref<const Matrix>& m,
                                                            double beta, double fallback_theta) {
  require(beta > 0.0 && beta < 1.0, ErrorCode::kInvalidParameter,
          "build_weights: beta must lie in (0,1)");
  const auto check = check_substochastic(m);
  require(check.is_substochastic && check.modulus_beta >= beta - kSubstochasticTol,
          ErrorCode::kNotSubstochastic,
          "build_weights: matrix is not substochastic with modulus " + std::to_string(beta));
  if (is_irreducible(m)) {
    const Matrix m_prime = m / (1.0 - beta);
    try {
      auto cert = certificate_from(dominating_stochastic(m_prime), beta, 1.0, true);
      if (cert.mu_min >= kTransientMass) return cert;
    } catch (const Error&) {
      // singular M'': fall through to the theta < 1 construction
    }
  }
  return build_weights(m, beta, fallback_theta);
}

double weighted_p_norm(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu,
                       double p) {
  require(x.size() == mu.size(), ErrorCode::kDimensionMismatch,
          "weighted_p_norm: size mismatch");
  require((mu.array() > 0.0).all(), ErrorCode::kInvalidParameter,
          "weighted_p_norm: weights must be strictly positive");
  require(p >= 1.0, ErrorCode::kInvalidParameter, "weighted_p_norm: p must be >= 1");
  if (std::isinf(p)) return inf_norm(x);
  // Factor out the largest magnitude so large p does not overflow.
  const double scale = inf_norm(x);
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += mu(i) * std::pow(std::abs(x(i)) / scale, p);
  return scale * std::pow(acc, 1.0 / p);
}

VerificationReport verify_contraction(const Eigen::Ref<const Matrix>& m,
                                      const ContractionCertificate& cert,
                                      const std::vector<double>& p_list, int num_probes,
                                      std::uint64_t seed) {
  require(m.rows() == m.cols() && m.rows() == cert.mu.size(), ErrorCode::kDimensionMismatch,
          "verify_contraction: certificate does not match matrix");
  require(num_probes >= 0, ErrorCode::kInvalidParameter, "verify_contraction: negative probes");
  VerificationReport report;
  report.p_checked = p_list;
  const auto d = m.rows();

  for (double p : p_list) {
    const double allowed = cert.factor(p);
    double worst = 0.0;
    for (int probe = 0; probe < num_probes; ++probe) {
      const Vector x = probe_vector(d, probe, seed);
      const double in = weighted_p_norm(x, cert.mu, p);
      const double out = weighted_p_norm(m * x, cert.mu, p);
      const double ratio = in > 0.0 ? out / in : 0.0;
      worst = std::max(worst, ratio);
      if (out > allowed * in + kProbeSlack) {
        report.passed = false;
        report.violations.push_back({p, probe, ratio, allowed});
      }
    }
    report.worst_ratio.push_back(worst);
  }

  const Vector column_mass = m.cwiseAbs().transpose() * cert.mu;
  report.exact_p1_norm = column_mass.cwiseQuotient(cert.mu).maxCoeff();
  if (report.exact_p1_norm > cert.factor(1.0) + kProbeSlack) {
    report.passed = false;
    report.violations.push_back({1.0, -1, report.exact_p1_norm, cert.factor(1.0)});
  }
  report.inf_norm = matrix_inf_norm(m);
  if (report.inf_norm > 1.0 - cert.beta + 1e-12) {
    report.passed = false;
    report.violations.push_back({kInfinityNorm, -1, report.inf_norm, 1.0 - cert.beta});
  }
  return report;
}

LyapunovReport lyapunov_inequality_check(const Eigen::Ref<const Matrix>& a_bar,
                                         const Eigen::Ref<const Vector>& mu, double eta) {
  require(a_bar.rows() == a_bar.cols() && a_bar.rows() == mu.size(),
          ErrorCode::kDimensionMismatch, "lyapunov_inequality_check: dimension mismatch");
  require((mu.array() > 0.0).all(), ErrorCode::kInvalidParameter,
          "lyapunov_inequality_check: weights must be strictly positive");
  const auto d = a_bar.rows();
  const Matrix shifted = a_bar - Matrix::Identity(d, d);
  const Matrix n = mu.asDiagonal();
  Matrix lhs = shifted.transpose() * n + n * shifted + eta * n;
  lhs = 0.5 * (lhs + lhs.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(lhs, Eigen::EigenvaluesOnly);
  LyapunovReport r;
  r.max_eigenvalue = es.eigenvalues().maxCoeff();
  r.passed = r.max_eigenvalue <= 1e-9;
  return r;
}

bool hurwitz_check(const Eigen::Ref<const Matrix>& m) {
  require(check_substochastic(m).is_substochastic, ErrorCode::kNotSubstochastic,
          "hurwitz_check: matrix is not substochastic");
  const auto d = m.rows();
  Eigen::EigenSolver<Matrix> es(m - Matrix::Identity(d, d), false);
  return (es.eigenvalues().real().array() <= -1e-12).all();
}

HurwitzShift hurwitz_shift(const Eigen::Ref<const Matrix>& m_prime) {
  require(m_prime.rows() == m_prime.cols() && m_prime.rows() > 0, ErrorCode::kDimensionMismatch,
          "hurwitz_shift: matrix must be square and nonempty");
  Eigen::EigenSolver<Matrix> es(m_prime, false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  require((ev.real().array() < 0.0).all(), ErrorCode::kNotHurwitz,
          "hurwitz_shift: an eigenvalue has nonnegative real part");

  // max_lambda |1 + phi lambda| is convex in phi; shrink the bracket around
  // its minimiser.
  const auto radius_at = [&ev](double phi) {
    return (Eigen::VectorXcd::Ones(ev.size()) + phi * ev).cwiseAbs().maxCoeff();
  };
  double lo = 1e-6, hi = 1.0 - 1e-6;
  while (hi - lo > 1e-9) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (radius_at(m1) <= radius_at(m2))
      hi = m2;
    else
      lo = m1;
  }
  HurwitzShift out;
  out.phi = 0.5 * (lo + hi);
  const auto d = m_prime.rows();
  Eigen::EigenSolver<Matrix> shifted(out.phi * m_prime + Matrix::Identity(d, d), false);
  out.spectral_radius = shifted.eigenvalues().cwiseAbs().maxCoeff();
  return out;
}

}  // namespace offtd
