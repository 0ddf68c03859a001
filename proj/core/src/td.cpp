#include "offtd/td.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "offtd/contraction.hpp"
#include "offtd/error.hpp"

namespace offtd {
namespace {

void check_policy_pair(const TabularMdp& mdp, const Policy& target, const Policy& behavior) {
  const bool ok = target.probs.rows() == mdp.num_states &&
                  target.probs.cols() == mdp.num_actions &&
                  behavior.probs.rows() == mdp.num_states &&
                  behavior.probs.cols() == mdp.num_actions;
  require(ok, ErrorCode::kDimensionMismatch, "policy shape does not match the MDP");
}

void check_window(const TabularMdp& mdp, const std::vector<StateAction>& window, int n) {
  require(n >= 1, ErrorCode::kInvalidParameter, "n must be >= 1");
  require(static_cast<int>(window.size()) == n + 1, ErrorCode::kDimensionMismatch,
          "window has " + std::to_string(window.size()) + " pairs, expected " +
              std::to_string(n + 1));
  for (const auto& sa : window) {
    require(sa.s >= 0 && sa.s < mdp.num_states && sa.a >= 0 && sa.a < mdp.num_actions,
            ErrorCode::kDimensionMismatch, "window pair out of range");
  }
}

void check_learner_inputs(const TabularMdp& mdp, const QTable& q) {
  require(q.size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
          "Q table size does not match the MDP");
}

// Row-normalised cumulative sums; the last positive entry is exactly 1.
Matrix cumulative_rows(const Matrix& probs) {
  Matrix cdf(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const double total = probs.row(r).sum();
    require(total > 0.0, ErrorCode::kInvalidParameter, "distribution row has no mass");
    double acc = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      acc += probs(r, c);
      cdf(r, c) = acc / total;
    }
  }
  return cdf;
}

}  // namespace

double max_ratio(const Policy& target, const Policy& behavior) {
  return target.probs.cwiseQuotient(behavior.probs).maxCoeff();
}

double min_ratio(const Policy& target, const Policy& behavior) {
  return target.probs.cwiseQuotient(behavior.probs).minCoeff();
}

RatioPair preset(PresetKind kind, const PresetParams& params, const TabularMdp& mdp,
                 const Policy& target, const Policy& behavior) {
  check_policy_pair(mdp, target, behavior);
  require((behavior.probs.array() > 0.0).all(), ErrorCode::kZeroBehaviorProb,
          "behavior policy assigns zero probability to some action");
  const Matrix r = target.probs.cwiseQuotient(behavior.probs);
  const Matrix ones = Matrix::Ones(r.rows(), r.cols());

  switch (kind) {
    case PresetKind::kVanillaIS:
      return RatioPair::from_tables(r, r, kind, params);
    case PresetKind::kQPiLambda:
      require(params.lambda > 0.0, ErrorCode::kInvalidParameter, "lambda must be positive");
      return RatioPair::from_tables(params.lambda * ones, r, kind, params);
    case PresetKind::kTreeBackup:
      require(params.lambda > 0.0, ErrorCode::kInvalidParameter, "lambda must be positive");
      return RatioPair::from_tables(params.lambda * target.probs, r, kind, params);
    case PresetKind::kRetrace:
      require(params.lambda > 0.0, ErrorCode::kInvalidParameter, "lambda must be positive");
      return RatioPair::from_tables(params.lambda * r.cwiseMin(1.0), r, kind, params);
    case PresetKind::kQTrace:
      require(params.c_bar > 0.0 && params.rho_bar > 0.0, ErrorCode::kInvalidParameter,
              "truncation levels must be positive");
      require(params.c_bar <= params.rho_bar, ErrorCode::kInvalidTruncation,
              "c_bar = " + std::to_string(params.c_bar) + " exceeds rho_bar = " +
                  std::to_string(params.rho_bar));
      return RatioPair::from_tables(r.cwiseMin(params.c_bar), r.cwiseMin(params.rho_bar), kind,
                                    params);
    case PresetKind::kCustom:
      break;
  }
  fail(ErrorCode::kInvalidParameter, "custom ratios have no preset tables");
}

TrajectorySampler::TrajectorySampler(const TabularMdp& mdp, const Policy& behavior,
                                     std::optional<int> start_state, std::uint64_t seed)
    : num_states_(mdp.num_states),
      num_actions_(mdp.num_actions),
      action_cdf_(cumulative_rows(behavior.probs)),
      rng_(seed, Stream::kTrajectory) {
  require(behavior.probs.rows() == mdp.num_states && behavior.probs.cols() == mdp.num_actions,
          ErrorCode::kDimensionMismatch, "behavior policy shape does not match the MDP");
  next_cdf_.reserve(mdp.transitions.size());
  for (const auto& p : mdp.transitions) next_cdf_.push_back(cumulative_rows(p));
  // Row-major copies so draw() can scan contiguous memory.
  action_cdf_.transposeInPlace();
  for (auto& m : next_cdf_) m.transposeInPlace();

  if (start_state) {
    require(*start_state >= 0 && *start_state < num_states_, ErrorCode::kInvalidParameter,
            "start state out of range");
    start_ = *start_state;
  } else {
    const Vector kappa = stationary(mdp, behavior).kappa_S;
    const Matrix kappa_cdf = cumulative_rows(kappa.transpose());
    CounterRng start_rng(seed, Stream::kStartState);
    const double u = start_rng.uniform();
    start_ = num_states_ - 1;
    for (int s = 0; s < num_states_; ++s) {
      if (u < kappa_cdf(0, s)) {
        start_ = s;
        break;
      }
    }
  }
  state_ = start_;
}

int TrajectorySampler::draw(const double* cdf, int count) {
  const double u = rng_.uniform();
  for (int i = 0; i < count; ++i)
    if (u < cdf[i]) return i;
  return count - 1;
}

StateAction TrajectorySampler::next() {
  const int s = state_;
  const int a = draw(action_cdf_.col(s).data(), num_actions_);
  state_ = draw(next_cdf_[a].col(s).data(), num_states_);
  return {s, a};
}

Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, std::int64_t length,
                             std::optional<int> start_state, std::uint64_t seed) {
  require(length >= 1, ErrorCode::kInvalidParameter, "trajectory length must be >= 1");
  TrajectorySampler sampler(mdp, behavior, start_state, seed);
  Trajectory t;
  t.seed = seed;
  t.start_state = sampler.start_state();
  t.pairs.reserve(static_cast<std::size_t>(length));
  for (std::int64_t k = 0; k < length; ++k) t.pairs.push_back(sampler.next());
  return t;
}

double window_increment(const TabularMdp& mdp, const RatioPair& ratios, const QTable& q,
                        const StateAction* window, int n) {
  const double gamma = mdp.discount;
  double total = 0.0;
  double trace = 1.0;
  double discount = 1.0;
  for (int i = 0; i < n; ++i) {
    const StateAction& cur = window[i];
    const StateAction& nxt = window[i + 1];
    if (i > 0) trace *= ratios.c(cur.s, cur.a);
    const double delta = mdp.rewards(cur.s, cur.a) +
                         gamma * ratios.rho(nxt.s, nxt.a) * q(mdp.index(nxt.s, nxt.a)) -
                         q(mdp.index(cur.s, cur.a));
    total += discount * trace * delta;
    discount *= gamma;
  }
  return total;
}

RunResult run_learner(const TabularMdp& mdp, const Policy& behavior, const LearnerConfig& config,
                      const QTable& reference, std::int64_t record_stride) {
  const int n = config.n;
  require(n >= 1, ErrorCode::kInvalidParameter, "n must be >= 1");
  require(config.step_size >= 0.0 && std::isfinite(config.step_size),
          ErrorCode::kInvalidParameter, "step size must be finite and nonnegative");
  require(config.num_iterations >= 1, ErrorCode::kInvalidParameter,
          "num_iterations must be >= 1");
  require(record_stride >= 1, ErrorCode::kInvalidParameter, "record_stride must be >= 1");
  require(config.ratios.c.rows() == mdp.num_states && config.ratios.c.cols() == mdp.num_actions &&
              config.ratios.rho.rows() == mdp.num_states &&
              config.ratios.rho.cols() == mdp.num_actions,
          ErrorCode::kDimensionMismatch, "ratio tables do not match the MDP");
  check_learner_inputs(mdp, reference);

  QTable q = config.initial_q.size() == 0 ? QTable::Zero(mdp.sa_count()) : config.initial_q;
  check_learner_inputs(mdp, q);
  if (config.record_mu)
    require(config.record_mu->size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
            "record weights do not match the MDP");

  RunResult out;
  out.record_stride = record_stride;
  out.reference = reference;

  const auto record = [&](std::int64_t k) {
    const QTable diff = q - reference;
    const double e = inf_norm(diff);
    out.iterations.push_back(k);
    out.error_trajectory.push_back(e * e);
    if (config.record_mu) {
      const double w = weighted_p_norm(diff, *config.record_mu, config.record_p);
      out.weighted_error_trajectory.push_back(w * w);
    }
  };

  TrajectorySampler sampler(mdp, behavior, config.start_state, config.seed);
  out.start_state = sampler.start_state();
  std::vector<StateAction> window(static_cast<std::size_t>(n) + 1);
  for (auto& sa : window) sa = sampler.next();

  const double alpha = config.step_size;
  record(0);
  for (std::int64_t k = 0; k < config.num_iterations; ++k) {
    const StateAction head = window[0];
    const double inc = window_increment(mdp, config.ratios, q, window.data(), n);
    double& entry = q(mdp.index(head.s, head.a));
    entry += alpha * inc;
    if (!std::isfinite(entry) || std::abs(entry) > kDivergenceThreshold) {
      throw Error(ErrorCode::kDiverged,
                  "iterate left the ball of radius 1e6 at iteration " + std::to_string(k + 1),
                  k + 1);
    }
    std::rotate(window.begin(), window.begin() + 1, window.end());
    window.back() = sampler.next();

    const std::int64_t done = k + 1;
    if (done % record_stride == 0 || done == config.num_iterations) record(done);
  }
  out.final_q = q;
  return out;
}

QTable noise_operator_F(const TabularMdp& mdp, const RatioPair& ratios, int n, const QTable& q,
                        const std::vector<StateAction>& window) {
  check_window(mdp, window, n);
  check_learner_inputs(mdp, q);
  QTable out = q;
  out(mdp.index(window[0].s, window[0].a)) += window_increment(mdp, ratios, q, window.data(), n);
  return out;
}

QTable vanilla_is_telescoped_F(const TabularMdp& mdp, const RatioPair& ratios, int n,
                               const QTable& q, const std::vector<StateAction>& window) {
  check_window(mdp, window, n);
  check_learner_inputs(mdp, q);
  require(ratios.c.rows() == ratios.rho.rows() && ratios.c.cols() == ratios.rho.cols() &&
              (ratios.c.array() == ratios.rho.array()).all(),
          ErrorCode::kNotVanillaIS, "telescoped form needs c == rho everywhere");
  const double gamma = mdp.discount;
  double value = 0.0;
  double weight = 1.0;  // gamma^i prod_{j=1..i} c_j
  for (int i = 0; i < n; ++i) {
    if (i > 0) weight *= gamma * ratios.c(window[i].s, window[i].a);
    value += weight * mdp.rewards(window[i].s, window[i].a);
  }
  const StateAction& last = window[n];
  weight *= gamma * ratios.c(last.s, last.a);
  value += weight * q(mdp.index(last.s, last.a));

  QTable out = q;
  out(mdp.index(window[0].s, window[0].a)) = value;
  return out;
}

std::vector<WeightedWindow> enumerate_windows(const TabularMdp& mdp, const Policy& behavior, int n,
                                              const StationaryInfo& stationary) {
  require(n >= 1, ErrorCode::kInvalidParameter, "n must be >= 1");
  double candidates = static_cast<double>(mdp.num_states) * mdp.num_actions;
  for (int i = 0; i < n; ++i) candidates *= static_cast<double>(mdp.num_states) * mdp.num_actions;
  require(candidates <= static_cast<double>(1 << 20), ErrorCode::kInvalidParameter,
          "too many windows to enumerate");
  require(stationary.kappa_S.size() == mdp.num_states, ErrorCode::kDimensionMismatch,
          "stationary info does not match the MDP");

  std::vector<WeightedWindow> out;
  std::vector<StateAction> window(static_cast<std::size_t>(n) + 1);

  // depth i: s_i is fixed, choose a_i and (for i < n) s_{i+1}.
  const auto extend = [&](auto&& self, int depth, double prob) -> void {
    const int s = window[depth].s;
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double pa = prob * behavior.probs(s, a);
      if (pa <= 0.0) continue;
      window[depth].a = a;
      if (depth == n) {
        out.push_back({window, pa});
        continue;
      }
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        const double ps = pa * mdp.transitions[a](s, s2);
        if (ps <= 0.0) continue;
        window[depth + 1].s = s2;
        self(self, depth + 1, ps);
      }
    }
  };
  for (int s0 = 0; s0 < mdp.num_states; ++s0) {
    if (stationary.kappa_S(s0) <= 0.0) continue;
    window[0].s = s0;
    extend(extend, 0, stationary.kappa_S(s0));
  }
  return out;
}

}  // namespace offtd
