#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "offtd/linalg.hpp"
#include "offtd/mdp.hpp"
#include "offtd/operators.hpp"
#include "offtd/rng.hpp"

namespace offtd {

/// Ratio tables of the named presets, from r = pi / pi_b:
///   vanilla-is   c = rho = r
///   qpi-lambda   c = lambda,            rho = r
///   tree-backup  c = lambda pi(a|s),    rho = r
///   retrace      c = lambda min(1, r),  rho = r
///   q-trace      c = min(c_bar, r),     rho = min(rho_bar, r)
/// Throws kZeroBehaviorProb if pi_b has a zero entry and kInvalidTruncation
/// if c_bar > rho_bar.
RatioPair preset(PresetKind kind, const PresetParams& params, const TabularMdp& mdp,
                 const Policy& target, const Policy& behavior);

/// max_{s,a} pi(a|s) / pi_b(a|s)
double max_ratio(const Policy& target, const Policy& behavior);
double min_ratio(const Policy& target, const Policy& behavior);

struct StateAction {
  int s = 0;
  int a = 0;
  bool operator==(const StateAction&) const = default;
};

struct Trajectory {
  std::vector<StateAction> pairs;
  std::uint64_t seed = 0;
  int start_state = 0;
};

/// Streams (S_k, A_k) under pi_b. Actions and transitions come from the
/// trajectory stream of `seed`; with no explicit start state, S_0 is drawn
/// from kappa_S using the start-state stream.
class TrajectorySampler {
 public:
  TrajectorySampler(const TabularMdp& mdp, const Policy& behavior, std::optional<int> start_state,
                    std::uint64_t seed);

  StateAction next();
  int start_state() const { return start_; }

 private:
  int draw(const double* cdf, int count);

  int num_states_;
  int num_actions_;
  Matrix action_cdf_;               ///< (s, a)
  std::vector<Matrix> next_cdf_;    ///< next_cdf_[a](s, s')
  CounterRng rng_;
  int start_;
  int state_;
};

Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, std::int64_t length,
                             std::optional<int> start_state, std::uint64_t seed);

struct LearnerConfig {
  int n = 1;
  double step_size = 0.0;
  std::int64_t num_iterations = 1;
  QTable initial_q;  ///< empty means all zeros
  RatioPair ratios;
  std::uint64_t seed = 0;
  std::optional<int> start_state;
  /// When set, ||Q_k - ref||_{mu,p}^2 is recorded alongside the sup norm.
  std::optional<Vector> record_mu;
  double record_p = 2.0;
};

struct RunResult {
  std::vector<std::int64_t> iterations;
  std::vector<double> error_trajectory;           ///< ||Q_k - ref||_inf^2
  std::vector<double> weighted_error_trajectory;  ///< ||Q_k - ref||_{mu,p}^2 if requested
  QTable final_q;
  std::int64_t record_stride = 1;
  QTable reference;
  int start_state = 0;
};

inline constexpr double kDivergenceThreshold = 1e6;

/// n-step TD increment at the head of a window (s_0,a_0,...,s_n,a_n):
/// sum_{i<n} gamma^i prod_{j=1..i} c(s_j,a_j) (R_i + gamma rho_{i+1} Q_{i+1} - Q_i).
double window_increment(const TabularMdp& mdp, const RatioPair& ratios, const QTable& q,
                        const StateAction* window, int n);

/// Runs the n-step off-policy TD recursion for config.num_iterations steps on
/// a streamed trajectory. Errors are recorded at k = 0, stride, 2 stride, ...
/// and at the final iteration. Throws kDiverged (with the iteration) once
/// ||Q||_inf exceeds kDivergenceThreshold or turns nonfinite.
RunResult run_learner(const TabularMdp& mdp, const Policy& behavior, const LearnerConfig& config,
                      const QTable& reference, std::int64_t record_stride);

/// F(Q, y): Q with component (s_0, a_0) shifted by the window increment.
QTable noise_operator_F(const TabularMdp& mdp, const RatioPair& ratios, int n, const QTable& q,
                        const std::vector<StateAction>& window);

/// Telescoped form for c = rho:
/// F(Q,y)(s_0,a_0) = sum_{i<n} gamma^i prod c R_i + gamma^n prod_{j=1..n} c Q(s_n,a_n).
/// Throws kNotVanillaIS unless c and rho agree exactly.
QTable vanilla_is_telescoped_F(const TabularMdp& mdp, const RatioPair& ratios, int n,
                               const QTable& q, const std::vector<StateAction>& window);

struct WeightedWindow {
  std::vector<StateAction> window;
  double probability = 0.0;
};

/// All windows with positive stationary probability
/// kappa_Y(y) = kappa_S(s_0) prod_{i<n} pi_b(a_i|s_i) P_{a_i}(s_i,s_{i+1}) * pi_b(a_n|s_n).
/// Refuses instances with more than 2^20 candidate windows.
std::vector<WeightedWindow> enumerate_windows(const TabularMdp& mdp, const Policy& behavior, int n,
                                              const StationaryInfo& stationary);

}  // namespace offtd
