#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "offtd/linalg.hpp"

namespace offtd {

/// Finite MDP. State-action pairs are flattened state-major:
/// index(s, a) = s * num_actions + a, matching the [s][a] layout of Q tables.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Matrix> transitions;  ///< transitions[a](s, s')
  Matrix rewards;                   ///< rewards(s, a) in [0, 1]
  double discount = 0.9;

  int sa_count() const { return num_states * num_actions; }
  int index(int s, int a) const { return s * num_actions + a; }
  Vector reward_vector() const;
};

/// probs(s, a) = pi(a | s); every row is a distribution.
struct Policy {
  Matrix probs;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_mdp(const TabularMdp& mdp);
ValidationReport validate_policy(const TabularMdp& mdp, const Policy& policy);

/// Throws kInvalidParameter listing every violation when the report is not ok.
void expect_valid(const ValidationReport& report, const std::string& what);

/// P_pol((s,a),(s',a')) = P_a(s,s') pol(a'|s'), an SA x SA row-stochastic matrix.
Matrix state_action_kernel(const TabularMdp& mdp, const Policy& pol);

/// P(s,s') = sum_a pol(a|s) P_a(s,s'): the state chain induced by `pol`.
Matrix state_kernel(const TabularMdp& mdp, const Policy& pol);

struct StationaryInfo {
  Vector kappa_S;
  Vector kappa_SA;
  double K_SA_min = 0.0;
  double K_SA_max = 0.0;
  double K_S_min = 0.0;
  double K_S_max = 0.0;
};

/// Throws kNotErgodic unless the positive-entry graph of `p` is strongly
/// connected with period 1.
void check_ergodic(const Eigen::Ref<const Matrix>& p);

/// Stationary distributions of the behavior-induced state and state-action
/// chains. Throws kNotErgodic when the state chain is reducible or periodic.
StationaryInfo stationary(const TabularMdp& mdp, const Policy& behavior);

/// Exact total-variation mixing profile of an ergodic chain.
///
/// tv(k) = max_s ||P^k(s,.) - kappa||_TV is tabulated by repeated
/// multiplication until it reaches the numerical floor or the step cap.
/// The geometric envelope tv(k) <= C sigma^k uses sigma = |lambda_2| + 1e-6
/// and C = max_k tv(k) / sigma^k over the tabulated range.
class MixingInfo {
 public:
  static constexpr int kStepCap = 100000;
  static constexpr double kTvFloor = 1e-13;

  static MixingInfo of_chain(const Eigen::Ref<const Matrix>& p, const Eigen::Ref<const Vector>& kappa);

  double geometric_C() const { return C_; }
  double geometric_sigma() const { return sigma_; }

  /// Smallest k with tv(k) <= delta. Throws kMixingTooSlow past the cap.
  int t_delta(double delta) const;
  /// t_delta + n + 1
  int tau(double delta, int n) const { return t_delta(delta) + n + 1; }

  double tv(int k) const;
  int horizon() const { return static_cast<int>(tv_.size()) - 1; }
  bool reached_floor() const { return reached_floor_; }

 private:
  std::vector<double> tv_;
  bool reached_floor_ = false;
  double C_ = 0.0;
  double sigma_ = 0.0;
};

MixingInfo mixing(const TabularMdp& mdp, const Policy& behavior);

/// Random Garnet instance: each (s,a) moves to `branching` distinct successors
/// drawn uniformly, with Dirichlet(1) weights; rewards are uniform on [0,1].
TabularMdp garnet(int num_states, int num_actions, int branching, std::uint64_t seed,
                  double discount = 0.9);

Policy uniform_policy(int num_states, int num_actions);
/// Each row drawn from Dirichlet(1); all entries strictly positive.
Policy random_policy(int num_states, int num_actions, std::uint64_t seed);
/// (1 - epsilon) * target + epsilon * uniform
Policy epsilon_greedy_of(const Policy& target, double epsilon);

}  // namespace offtd
