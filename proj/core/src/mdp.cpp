#include "offtd/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "offtd/error.hpp"
#include "offtd/rng.hpp"

namespace offtd {
namespace {

constexpr double kSumTol = 1e-12;

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void check_policy_shape(const TabularMdp& mdp, const Policy& pol) {
  require(pol.probs.rows() == mdp.num_states && pol.probs.cols() == mdp.num_actions,
          ErrorCode::kDimensionMismatch, "policy shape does not match MDP");
}

// Draws `count` iid Exp(1) variables normalized to sum to one.
Vector dirichlet_one(CounterRng& rng, int count) {
  Vector w(count);
  for (int i = 0; i < count; ++i) w(i) = -std::log(rng.uniform_open());
  return w / w.sum();
}

}  // namespace

Vector TabularMdp::reward_vector() const {
  Vector r(sa_count());
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) r(index(s, a)) = rewards(s, a);
  return r;
}

ValidationReport validate_mdp(const TabularMdp& mdp) {
  ValidationReport report;
  auto& v = report.violations;
  if (mdp.num_states <= 0) v.push_back("num_states must be positive");
  if (mdp.num_actions <= 0) v.push_back("num_actions must be positive");
  if (!(mdp.discount > 0.0 && mdp.discount < 1.0))
    v.push_back("discount " + fmt_double(mdp.discount) + " outside (0,1)");
  if (!report.ok()) return report;

  if (static_cast<int>(mdp.transitions.size()) != mdp.num_actions) {
    v.push_back("transitions has " + std::to_string(mdp.transitions.size()) +
                " action slices, expected " + std::to_string(mdp.num_actions));
  } else {
    for (int a = 0; a < mdp.num_actions; ++a) {
      const Matrix& p = mdp.transitions[a];
      if (p.rows() != mdp.num_states || p.cols() != mdp.num_states) {
        v.push_back("transition slice a=" + std::to_string(a) + " has wrong shape");
        continue;
      }
      for (int s = 0; s < mdp.num_states; ++s) {
        if ((p.row(s).array() < 0.0).any() || !p.row(s).allFinite())
          v.push_back("transition row (a=" + std::to_string(a) + ",s=" + std::to_string(s) +
                      ") has a negative or nonfinite entry");
        const double sum = p.row(s).sum();
        if (std::abs(sum - 1.0) > kSumTol)
          v.push_back("transition row (a=" + std::to_string(a) + ",s=" + std::to_string(s) +
                      ") sums to " + fmt_double(sum));
      }
    }
  }

  if (mdp.rewards.rows() != mdp.num_states || mdp.rewards.cols() != mdp.num_actions) {
    v.push_back("rewards table has wrong shape");
  } else {
    for (int s = 0; s < mdp.num_states; ++s)
      for (int a = 0; a < mdp.num_actions; ++a) {
        const double r = mdp.rewards(s, a);
        if (!(r >= 0.0 && r <= 1.0))
          v.push_back("reward out of [0,1] at (s=" + std::to_string(s) + ",a=" +
                      std::to_string(a) + "): " + fmt_double(r));
      }
  }
  return report;
}

ValidationReport validate_policy(const TabularMdp& mdp, const Policy& policy) {
  ValidationReport report;
  if (policy.probs.rows() != mdp.num_states || policy.probs.cols() != mdp.num_actions) {
    report.violations.push_back("policy shape does not match MDP");
    return report;
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    if ((policy.probs.row(s).array() < 0.0).any() || !policy.probs.row(s).allFinite())
      report.violations.push_back("policy row s=" + std::to_string(s) +
                                  " has a negative or nonfinite entry");
    const double sum = policy.probs.row(s).sum();
    if (std::abs(sum - 1.0) > kSumTol)
      report.violations.push_back("policy row s=" + std::to_string(s) + " sums to " +
                                  fmt_double(sum));
  }
  return report;
}

void expect_valid(const ValidationReport& report, const std::string& what) {
  if (report.ok()) return;
  std::string msg = what + " invalid:";
  for (const auto& v : report.violations) msg += "\n  " + v;
  fail(ErrorCode::kInvalidParameter, msg);
}

Matrix state_action_kernel(const TabularMdp& mdp, const Policy& pol) {
  check_policy_shape(mdp, pol);
  const int d = mdp.sa_count();
  Matrix k = Matrix::Zero(d, d);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        const double p = mdp.transitions[a](s, s2);
        if (p == 0.0) continue;
        for (int a2 = 0; a2 < mdp.num_actions; ++a2)
          k(mdp.index(s, a), mdp.index(s2, a2)) = p * pol.probs(s2, a2);
      }
  return k;
}

Matrix state_kernel(const TabularMdp& mdp, const Policy& pol) {
  check_policy_shape(mdp, pol);
  Matrix p = Matrix::Zero(mdp.num_states, mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) p.row(s) += pol.probs(s, a) * mdp.transitions[a].row(s);
  return p;
}

void check_ergodic(const Eigen::Ref<const Matrix>& p) {
  require(is_irreducible(p), ErrorCode::kNotErgodic, "chain is not irreducible");
  const int d = period(p);
  require(d == 1, ErrorCode::kNotErgodic, "chain is periodic with period " + std::to_string(d));
}

StationaryInfo stationary(const TabularMdp& mdp, const Policy& behavior) {
  const Matrix p = state_kernel(mdp, behavior);
  check_ergodic(p);
  StationaryInfo info;
  info.kappa_S = stationary_of(p);
  info.kappa_SA.resize(mdp.sa_count());
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      info.kappa_SA(mdp.index(s, a)) = info.kappa_S(s) * behavior.probs(s, a);
  info.K_S_min = info.kappa_S.minCoeff();
  info.K_S_max = info.kappa_S.maxCoeff();
  info.K_SA_min = info.kappa_SA.minCoeff();
  info.K_SA_max = info.kappa_SA.maxCoeff();
  return info;
}

MixingInfo MixingInfo::of_chain(const Eigen::Ref<const Matrix>& p,
                                const Eigen::Ref<const Vector>& kappa) {
  require(p.rows() == p.cols() && p.rows() == kappa.size(), ErrorCode::kDimensionMismatch,
          "MixingInfo: dimension mismatch");
  MixingInfo info;
  const auto d = p.rows();
  Matrix power = Matrix::Identity(d, d);
  for (int k = 0;; ++k) {
    const double tv = max_tv_distance(power, kappa);
    info.tv_.push_back(tv);
    if (tv <= kTvFloor) {
      info.reached_floor_ = true;
      break;
    }
    if (k == kStepCap) break;
    power = power * p;
  }

  // Second-largest eigenvalue modulus: drop the eigenvalue nearest to 1.
  double lambda2 = 0.0;
  if (d > 1) {
    Eigen::EigenSolver<Matrix> es(p, false);
    const auto ev = es.eigenvalues();
    Eigen::Index unit = 0;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
      if (std::abs(ev(i) - 1.0) < std::abs(ev(unit) - 1.0)) unit = i;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (i != unit) lambda2 = std::max(lambda2, std::abs(ev(i)));
  }
  info.sigma_ = lambda2 + 1e-6;
  require(info.sigma_ < 1.0, ErrorCode::kMixingTooSlow,
          "second eigenvalue modulus too close to one");

  // log-domain ratio keeps sigma^k from underflowing for fast chains.
  double log_c = -std::numeric_limits<double>::infinity();
  const double log_sigma = std::log(info.sigma_);
  for (std::size_t k = 0; k < info.tv_.size(); ++k) {
    if (info.tv_[k] <= kTvFloor) continue;
    log_c = std::max(log_c, std::log(info.tv_[k]) - static_cast<double>(k) * log_sigma);
  }
  info.C_ = std::isfinite(log_c) ? std::exp(log_c) : std::numeric_limits<double>::min();
  return info;
}

int MixingInfo::t_delta(double delta) const {
  require(delta > 0.0, ErrorCode::kInvalidParameter, "t_delta: delta must be positive");
  for (std::size_t k = 0; k < tv_.size(); ++k)
    if (tv_[k] <= delta) return static_cast<int>(k);
  fail(ErrorCode::kMixingTooSlow, "t_delta: tv distance still above " + fmt_double(delta) +
                                      " after " + std::to_string(kStepCap) + " steps");
}

double MixingInfo::tv(int k) const {
  require(k >= 0, ErrorCode::kInvalidParameter, "tv: negative step");
  if (k < static_cast<int>(tv_.size())) return tv_[k];
  require(reached_floor_, ErrorCode::kMixingTooSlow, "tv: step beyond tabulated horizon");
  // Past the floor the distance is numerically zero; report the last value.
  return tv_.back();
}

MixingInfo mixing(const TabularMdp& mdp, const Policy& behavior) {
  const auto info = stationary(mdp, behavior);
  return MixingInfo::of_chain(state_kernel(mdp, behavior), info.kappa_S);
}

TabularMdp garnet(int num_states, int num_actions, int branching, std::uint64_t seed,
                  double discount) {
  require(num_states >= 1 && num_actions >= 1, ErrorCode::kInvalidParameter,
          "garnet: state and action counts must be positive");
  require(branching >= 1 && branching <= num_states, ErrorCode::kInvalidParameter,
          "garnet: branching must lie in [1, num_states]");
  require(discount > 0.0 && discount < 1.0, ErrorCode::kInvalidParameter,
          "garnet: discount must lie in (0,1)");
  CounterRng rng(seed, Stream::kGarnet);
  TabularMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.discount = discount;
  mdp.transitions.assign(num_actions, Matrix::Zero(num_states, num_states));
  std::vector<int> order(num_states);
  for (int a = 0; a < num_actions; ++a) {
    for (int s = 0; s < num_states; ++s) {
      std::iota(order.begin(), order.end(), 0);
      // Partial Fisher-Yates: the first `branching` entries are the successors.
      for (int i = 0; i < branching; ++i) {
        const auto span = static_cast<std::uint64_t>(num_states - i);
        const int j = i + static_cast<int>(rng() % span);
        std::swap(order[i], order[j]);
      }
      const Vector w = dirichlet_one(rng, branching);
      for (int i = 0; i < branching; ++i) mdp.transitions[a](s, order[i]) = w(i);
    }
  }
  mdp.rewards.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) mdp.rewards(s, a) = rng.uniform();
  return mdp;
}

Policy uniform_policy(int num_states, int num_actions) {
  require(num_states >= 1 && num_actions >= 1, ErrorCode::kInvalidParameter,
          "uniform_policy: sizes must be positive");
  return Policy{Matrix::Constant(num_states, num_actions, 1.0 / num_actions)};
}

Policy random_policy(int num_states, int num_actions, std::uint64_t seed) {
  require(num_states >= 1 && num_actions >= 1, ErrorCode::kInvalidParameter,
          "random_policy: sizes must be positive");
  CounterRng rng(seed, Stream::kPolicy);
  Policy pol{Matrix(num_states, num_actions)};
  for (int s = 0; s < num_states; ++s) pol.probs.row(s) = dirichlet_one(rng, num_actions).transpose();
  return pol;
}

Policy epsilon_greedy_of(const Policy& target, double epsilon) {
  require(epsilon >= 0.0 && epsilon <= 1.0, ErrorCode::kInvalidParameter,
          "epsilon_greedy_of: epsilon must lie in [0,1]");
  const auto actions = static_cast<double>(target.probs.cols());
  Policy pol{(1.0 - epsilon) * target.probs};
  pol.probs.array() += epsilon / actions;
  return pol;
}

}  // namespace offtd
