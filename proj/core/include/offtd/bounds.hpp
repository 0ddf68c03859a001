#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "offtd/mdp.hpp"
#include "offtd/operators.hpp"
#include "offtd/td.hpp"

namespace offtd {

/// Numerical constants of the finite-sample bounds. The defaults are the
/// explicit values obtained with theta = 1/2 and p = 4 log(1/mu_min).
struct BoundConstants {
  double cap_denominator = 32832.0;           ///< 1 / c_1
  double zeta1_factor = 2.0;                  ///< c_2
  double zeta2_factor = 912.0 * std::numbers::e;  ///< c_3
  double weighted_cap_denominator = 2052.0;
  double weighted_zeta2_factor = 228.0;
};

struct BoundInputs {
  double omega = 0.0;
  double c_max = 0.0;
  double rho_max = 0.0;
  int n = 1;
  double gamma = 0.0;
  double tau = 0.0;    ///< tau_{alpha,n}
  double alpha = 0.0;
  int sa_count = 1;

  double q0_inf = 0.0;             ///< ||Q_0||_inf
  double qref_inf = 0.0;           ///< ||Q^{pi,rho}||_inf
  double q0_minus_ref_inf = 0.0;   ///< ||Q_0 - Q^{pi,rho}||_inf

  // Weighted-norm form.
  double mu_min = 0.0;
  double theta = 0.5;
  double p = 2.0;
  double q0_mu_p = 0.0;
  double qref_mu_p = 0.0;
  double q0_minus_ref_mu_p = 0.0;

  /// Replaces f(gamma c_max)(gamma rho_max + 1) in the cap and variance term;
  /// Vanilla IS uses (gamma r_max)^n + 1.
  std::optional<double> lipschitz_override;
};

/// f(gamma c_max)(gamma rho_max + 1), or the override when present.
double lipschitz_factor(const BoundInputs& in);

/// The Lipschitz factor appropriate for a preset: (gamma r_max)^n + 1 for
/// Vanilla IS, f(gamma c_max)(gamma rho_max + 1) otherwise.
double preset_lipschitz_factor(const RatioPair& ratios, double gamma, int n);

/// omega / (cap_denominator log(2|S||A|/omega) L^2)
double cap_rhs(const BoundInputs& in, const BoundConstants& k = {});
/// theta mu_min^{2/p} omega / (weighted_cap_denominator p L^2)
double weighted_cap_rhs(const BoundInputs& in, const BoundConstants& k = {});

enum class CapForm { kInfinity, kWeighted };

struct StepsizeCap {
  double alpha = 0.0;
  int tau = 0;          ///< tau_{alpha,n} at the returned alpha
  double cap = 0.0;     ///< right-hand side of alpha tau <= cap
};

/// Largest alpha in [1e-12, 1] with alpha * max(t_alpha + tau_offset, tau_floor) <= cap,
/// where t_alpha is the exact mixing time of `mixing` at precision alpha.
/// Throws kNoFeasibleStepsize when even 1e-12 is infeasible.
StepsizeCap largest_stepsize(double cap, const MixingInfo& mixing, int tau_offset,
                             int tau_floor = 0);

/// Largest alpha with alpha * tau_{alpha,n} <= cap, where tau uses the exact
/// mixing time at precision delta = alpha. Bisection in log(alpha) down to
/// 1e-12; throws kNoFeasibleStepsize below that.
StepsizeCap stepsize_cap(const BoundInputs& in, const MixingInfo& mixing,
                         CapForm form = CapForm::kInfinity, const BoundConstants& k = {});

struct BoundCurve {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double geometric_rate = 1.0;
  double variance_term = 0.0;
  double tau = 0.0;

  /// zeta1 rate^{k - tau} + variance_term; +infinity before tau.
  double value(double k) const;
  std::vector<std::pair<std::int64_t, double>> sample(const std::vector<std::int64_t>& ks) const;
};

/// sup-norm envelope:
///   zeta1 (1 - omega alpha/2)^{k-tau} + zeta2 L^2 log(2|S||A|/omega)/omega alpha tau.
/// Throws kStepsizeTooLarge when alpha tau exceeds cap_rhs.
BoundCurve bound_curve(const BoundInputs& in, const BoundConstants& k = {});

/// Weighted l_p envelope:
///   zeta1~ (1 - theta omega alpha)^{k-tau} + zeta2~ p L^2/(mu_min^{2/p} omega) alpha tau.
BoundCurve weighted_bound_curve(const BoundInputs& in, const BoundConstants& k = {});

/// Weighted envelope pushed to the sup norm through
/// ||x||_inf^2 <= mu_min^{-2/p} ||x||_{mu,p}^2.
BoundCurve weighted_bound_in_sup_norm(const BoundInputs& in, const BoundConstants& k = {});

/// p = 4 log(1/mu_min)
double theorem_p(double mu_min);

struct ComplexityInputs {
  double gamma = 0.0;
  int n = 1;
  double K_SA_min = 0.0;
  double D_c_min = 0.0;
  double D_rho_max = 0.0;
  double c_max = 0.0;
  double rho_max = 0.0;
  double r_max = 0.0;
  double pi_max = 0.0;
  PresetKind kind = PresetKind::kCustom;
  PresetParams params;
};

ComplexityInputs complexity_inputs(const OperatorMatrices& m, const RatioPair& ratios,
                                   const Policy& target, const Policy& behavior);

/// Iteration count for E||Q_k - Q^{pi,rho}||_inf <= epsilon, taking
/// E||.|| <= sqrt(E||.||^2). All totals drop the O~ constants.
struct ComplexityReport {
  std::string tag;
  double epsilon = 0.0;
  double t1 = 0.0;   ///< log^2(1/eps) / eps^2
  double t2 = 0.0;   ///< 1 / (1 - gamma D_rho_max)^2
  double t3 = 0.0;   ///< L^2 / omega^2
  double t_n = 0.0;  ///< n
  double total = 0.0;
  double specialized_total = 0.0;  ///< the preset's own closed form
  double omega = 0.0;
  std::optional<double> prior_work_total;    ///< Q-trace only
  std::optional<double> improvement_factor;  ///< ours / prior
};

ComplexityReport sample_complexity(const ComplexityInputs& in, double epsilon);

/// Sample variance of the n-step TD increment
/// sum_{i<n} gamma^i prod c Delta_i at a fixed Q along one trajectory.
/// Needs a trajectory of at least 10^4 pairs.
double variance_proxy(const TabularMdp& mdp, const RatioPair& ratios, int n,
                      const Trajectory& trajectory, const QTable& q);

}  // namespace offtd
