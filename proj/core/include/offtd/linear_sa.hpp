#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "offtd/bounds.hpp"
#include "offtd/contraction.hpp"
#include "offtd/linalg.hpp"
#include "offtd/mdp.hpp"
#include "offtd/td.hpp"

namespace offtd {

/// x_{k+1} = x_k + alpha ((A~(Y_k) - I) x_k + b~(Y_k)) driven by a finite
/// Markov chain Y.
struct LinearSaProblem {
  Matrix noise_kernel;
  std::vector<Matrix> A_tables;
  std::vector<Vector> b_tables;

  // Derived by make_linear_sa_problem.
  Vector kappa_Y;
  Matrix A_bar;
  Vector b_bar;
  double A_max = 0.0;
  double b_max = 0.0;
  double omega_prime = 0.0;
  Vector x_star;

  int dim() const { return static_cast<int>(A_bar.rows()); }
  int noise_size() const { return static_cast<int>(noise_kernel.rows()); }
};

/// Validates the tables, requires an ergodic noise chain (kNotErgodic) and a
/// substochastic A_bar with positive modulus (kNotSubstochastic), then fills
/// the derived fields.
LinearSaProblem make_linear_sa_problem(Matrix noise_kernel, std::vector<Matrix> A_tables,
                                       std::vector<Vector> b_tables);

struct LinearSaOptions {
  Vector x0;  ///< empty means zeros
  std::int64_t record_stride = 1;
  std::optional<Vector> mu;  ///< weights for err_sq_mu_p; uniform when absent
  double p = 2.0;
  std::optional<int> start;  ///< Y_0; drawn from kappa_Y when absent
};

struct LinearSaRun {
  std::vector<std::int64_t> steps;
  std::vector<double> err_sq_mu_p;
  std::vector<double> err_sq_inf;
  Vector final_x;
};

/// Seeded run; Y_0 and the transitions come from independent linear-SA streams.
/// Throws kDiverged once ||x||_inf exceeds 1e6.
LinearSaRun run_linear_sa(const LinearSaProblem& problem, double alpha, std::int64_t num_steps,
                          std::uint64_t seed, const LinearSaOptions& options = {});

/// Same recursion along a prescribed noise path (one index per step).
LinearSaRun run_linear_sa_on_path(const LinearSaProblem& problem, double alpha,
                                  const std::vector<int>& path, const LinearSaOptions& options = {});

/// Exact mixing profile of the noise chain.
MixingInfo noise_mixing(const LinearSaProblem& problem);

/// max(1, t_alpha): the mixing time entering the step-size condition and the
/// bound. An i.i.d. noise chain has t_alpha = 0, which would make the condition vacuous.
int sa_mixing_time(const MixingInfo& mixing, double alpha);

/// theta omega' mu_min^{2/p} / (228 p (A_max + 1)^2)
double theorem9_cap(const LinearSaProblem& problem, const ContractionCertificate& cert, double p);

/// Weighted l_p envelope on E||x_k - x*||_{mu,p}^2 with t = t_alpha(MC_Y):
///   c1 (1 - theta omega' alpha)^{k-t} + 228 p c2 (A_max+1)^2 / (mu_min^{2/p} theta omega') alpha t,
///   c1 = (||x0-x*|| + ||x0|| + b_max mu_min^{1/p}/(A_max+1))^2,
///   c2 = (||x*|| + b_max mu_min^{1/p}/(A_max+1))^2.
/// Throws kStepsizeTooLarge when alpha t exceeds theorem9_cap.
BoundCurve theorem9_bound(const LinearSaProblem& problem, double alpha, int t_alpha,
                          const ContractionCertificate& cert, double p, const Vector& x0);

/// Sup-norm form, valid for a certificate with theta = 1/2 and
/// p = 4 log(1/mu_min):
///   c1 sqrt(e) (1 - omega' alpha/2)^{k-t} + 1824 e log(2d/omega') c2 (A_max+1)^2/omega' alpha t.
BoundCurve theorem9_sup_norm_bound(const LinearSaProblem& problem, double alpha, int t_alpha,
                                   const ContractionCertificate& cert, const Vector& x0);

/// The n-step TD recursion written as linear SA over the window chain
/// y = (s_0,a_0,...,s_n,a_n): A~(y) = I + e_{(s0,a0)} w_y^T, b~(y) = r_y e_{(s0,a0)}.
struct TdEncoding {
  LinearSaProblem problem;
  std::vector<std::vector<StateAction>> windows;

  /// Noise index of the window starting at trajectory position k, for k < count.
  std::vector<int> path_of(const Trajectory& trajectory, std::int64_t count) const;
  int index_of(const std::vector<StateAction>& window) const;

  std::map<std::vector<int>, int> lookup;
};

/// Limited to |S||A| <= 6 and n <= 2.
TdEncoding encode_td_as_linear_sa(const TabularMdp& mdp, const Policy& behavior,
                                  const RatioPair& ratios, int n);

/// Random problem over `noise_size` noise states in dimension `dim`: every
/// A~(y) is nonnegative with row sums at most 1 - modulus, b~(y) in [-1,1].
LinearSaProblem random_certified_problem(int dim, int noise_size, double modulus,
                                         std::uint64_t seed);

/// Eigenvalue extremes of the solution of (A_bar - I)^T S + S (A_bar - I) + I = 0.
struct LyapunovEquationDiagnostic {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};
LyapunovEquationDiagnostic lyapunov_equation_diagnostic(const Matrix& a_bar);

}  // namespace offtd
