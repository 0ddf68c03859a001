#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "offtd/linalg.hpp"
#include "offtd/operators.hpp"

namespace offtd {

inline constexpr double kInfinityNorm = std::numeric_limits<double>::infinity();
inline constexpr double kSubstochasticTol = 1e-10;

/// f(x) = sum_{i<n} x^i, equal to n at x = 1.
double f_factor(double x, int n);

struct ModulusResult {
  bool is_substochastic = false;
  double modulus_beta = 0.0;  ///< max(0, 1 - max row sum)
  double max_row_sum = 0.0;
  double min_entry = 0.0;
  std::optional<double> omega_formula;
};

ModulusResult check_substochastic(const Eigen::Ref<const Matrix>& m,
                                  double tol = kSubstochasticTol);

/// omega = K_SA_min f(gamma D_c_min) (1 - gamma D_rho_max)
double omega_formula(const OperatorMatrices& m);

/// check_substochastic(A) together with the closed-form modulus omega.
ModulusResult certify_modulus(const OperatorMatrices& m);

/// Weights mu under which a substochastic matrix of modulus beta contracts
/// in every weighted l_p norm. mu is the stationary distribution of a
/// stochastic matrix M'' dominating M' = M/(1 - theta beta) + the uniform
/// mass beta(1-theta)/(1-theta beta) E/d.
struct ContractionCertificate {
  double theta = 0.5;
  double beta = 0.0;
  Vector mu;
  double mu_min = 0.0;
  std::vector<double> p_checked;
  bool used_irreducible_shortcut = false;

  /// (1-beta)^{1-1/p} (1-theta beta)^{1/p}; 1-beta at p = infinity.
  double factor(double p) const;
  double uniform_factor() const { return 1.0 - theta * beta; }
  /// beta(1-theta) / ((1-theta beta) d); zero on the theta = 1 path.
  double mu_lower_bound() const;
};

/// theta in (0,1), beta in (0,1). Throws kNotSubstochastic when M is not
/// substochastic with modulus at least beta.
ContractionCertificate build_weights(const Eigen::Ref<const Matrix>& m, double beta, double theta);

/// Tries the theta = 1 construction (M' = M/(1-beta)) when M is irreducible,
/// falling back to build_weights(m, beta, fallback_theta) when M is reducible
/// or M'' has a transient state.
ContractionCertificate build_weights_preferring_irreducible(const Eigen::Ref<const Matrix>& m,
                                                            double beta,
                                                            double fallback_theta = 0.5);

/// (sum_i mu_i |x_i|^p)^{1/p}; p = kInfinityNorm gives max_i |x_i|.
double weighted_p_norm(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu,
                       double p);

struct ProbeViolation {
  double p = 0.0;
  int probe = -1;  ///< -1 for the exact p=1 / p=inf checks
  double ratio = 0.0;
  double allowed = 0.0;
};

struct VerificationReport {
  bool passed = true;
  std::vector<double> p_checked;
  std::vector<double> worst_ratio;  ///< per p, max ||Mx|| / ||x|| over probes
  double exact_p1_norm = 0.0;       ///< max_j (sum_i mu_i |M_ij|) / mu_j
  double inf_norm = 0.0;            ///< max absolute row sum
  std::vector<ProbeViolation> violations;
};

/// Probe-based check of ||M x||_{mu,p} <= factor(p) ||x||_{mu,p} + 1e-9 using
/// +-basis vectors, the all-ones vector and seeded random vectors, plus the
/// exact induced norms for p = 1 and p = infinity.
VerificationReport verify_contraction(const Eigen::Ref<const Matrix>& m,
                                      const ContractionCertificate& cert,
                                      const std::vector<double>& p_list, int num_probes,
                                      std::uint64_t seed);

struct LyapunovReport {
  bool passed = false;
  double max_eigenvalue = 0.0;
};

/// (A-I)^T N + N (A-I) + eta N <= 0 with N = diag(mu).
LyapunovReport lyapunov_inequality_check(const Eigen::Ref<const Matrix>& a_bar,
                                         const Eigen::Ref<const Vector>& mu, double eta);

/// True iff every eigenvalue of M - I has real part <= -1e-12.
/// Throws kNotSubstochastic when M is not substochastic.
bool hurwitz_check(const Eigen::Ref<const Matrix>& m);

struct HurwitzShift {
  double phi = 0.0;
  double spectral_radius = 0.0;  ///< of phi M' + I
};

/// phi in (0,1) minimising the spectral radius of phi M' + I.
/// Throws kNotHurwitz when some eigenvalue of M' has nonnegative real part.
HurwitzShift hurwitz_shift(const Eigen::Ref<const Matrix>& m_prime);

}  // namespace offtd
