#include "offtd/operators.hpp"

#include <cmath>

#include "offtd/error.hpp"

namespace offtd {
namespace {

void check_dims(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios) {
  const bool ok = behavior.probs.rows() == mdp.num_states &&
                  behavior.probs.cols() == mdp.num_actions &&
                  ratios.c.rows() == mdp.num_states && ratios.c.cols() == mdp.num_actions &&
                  ratios.rho.rows() == mdp.num_states && ratios.rho.cols() == mdp.num_actions;
  require(ok, ErrorCode::kDimensionMismatch, "policy or ratio tables do not match the MDP");
}

void check_q(const TabularMdp& mdp, const QTable& q) {
  require(q.size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
          "Q table has " + std::to_string(q.size()) + " entries, expected " +
              std::to_string(mdp.sa_count()));
}

// (M x)(s,a) = sum_{s'} P_a(s,s') sum_{a'} pi_b(a'|s') w(s',a') x(s',a')
QTable weighted_expectation(const TabularMdp& mdp, const Policy& behavior, const Matrix& w,
                            const QTable& x) {
  Vector next_value(mdp.num_states);
  for (int s2 = 0; s2 < mdp.num_states; ++s2) {
    double acc = 0.0;
    for (int a2 = 0; a2 < mdp.num_actions; ++a2)
      acc += behavior.probs(s2, a2) * w(s2, a2) * x(mdp.index(s2, a2));
    next_value(s2) = acc;
  }
  QTable out(mdp.sa_count());
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a)
      out(mdp.index(s, a)) = mdp.transitions[a].row(s).dot(next_value);
  return out;
}

}  // namespace

std::string to_string(PresetKind kind) {
  switch (kind) {
    case PresetKind::kVanillaIS: return "vanilla-is";
    case PresetKind::kQPiLambda: return "qpi-lambda";
    case PresetKind::kTreeBackup: return "tree-backup";
    case PresetKind::kRetrace: return "retrace";
    case PresetKind::kQTrace: return "q-trace";
    case PresetKind::kCustom: return "custom";
  }
  return "custom";
}

PresetKind preset_kind_from_string(const std::string& name) {
  for (auto kind : {PresetKind::kVanillaIS, PresetKind::kQPiLambda, PresetKind::kTreeBackup,
                    PresetKind::kRetrace, PresetKind::kQTrace, PresetKind::kCustom}) {
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorCode::kUnknownTag, "unknown preset '" + name + "'");
}

RatioPair RatioPair::from_tables(Matrix c, Matrix rho, PresetKind kind, PresetParams params) {
  require(c.rows() == rho.rows() && c.cols() == rho.cols() && c.size() > 0,
          ErrorCode::kDimensionMismatch, "ratio tables must have matching nonempty shapes");
  require(c.allFinite() && rho.allFinite() && (c.array() >= 0.0).all() &&
              (rho.array() >= 0.0).all(),
          ErrorCode::kInvalidParameter, "ratio tables must be finite and nonnegative");
  RatioPair r;
  r.c_max = c.maxCoeff();
  r.rho_max = rho.maxCoeff();
  r.c = std::move(c);
  r.rho = std::move(rho);
  r.kind = kind;
  r.params = params;
  return r;
}

QTable apply_H_rho(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios,
                   const QTable& q) {
  check_dims(mdp, behavior, ratios);
  check_q(mdp, q);
  return mdp.reward_vector() + mdp.discount * weighted_expectation(mdp, behavior, ratios.rho, q);
}

QTable apply_T_c(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios, int n,
                 const QTable& q) {
  check_dims(mdp, behavior, ratios);
  check_q(mdp, q);
  require(n >= 1, ErrorCode::kInvalidParameter, "apply_T_c: n must be >= 1");
  QTable acc = q;
  for (int i = 1; i < n; ++i)
    acc = q + mdp.discount * weighted_expectation(mdp, behavior, ratios.c, acc);
  return acc;
}

QTable apply_tilde_B_definitional(const TabularMdp& mdp, const Policy& behavior,
                                  const RatioPair& ratios, int n, const StationaryInfo& stationary,
                                  const QTable& q) {
  require(stationary.kappa_SA.size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
          "stationary info does not match the MDP");
  const QTable td = apply_H_rho(mdp, behavior, ratios, q) - q;
  return stationary.kappa_SA.cwiseProduct(apply_T_c(mdp, behavior, ratios, n, td)) + q;
}

Policy ratio_weighted_policy(const Policy& behavior, const Matrix& weights) {
  require(behavior.probs.rows() == weights.rows() && behavior.probs.cols() == weights.cols(),
          ErrorCode::kDimensionMismatch, "ratio_weighted_policy: shape mismatch");
  Policy out{behavior.probs.cwiseProduct(weights)};
  for (Eigen::Index s = 0; s < out.probs.rows(); ++s) {
    const double total = out.probs.row(s).sum();
    if (total > 0.0)
      out.probs.row(s) /= total;
    else
      out.probs.row(s) = behavior.probs.row(s);
  }
  return out;
}

Vector ratio_diagonal(const TabularMdp& mdp, const Policy& behavior, const Matrix& weights) {
  Vector d(mdp.sa_count());
  for (int s = 0; s < mdp.num_states; ++s) {
    const double total = behavior.probs.row(s).dot(weights.row(s));
    for (int a = 0; a < mdp.num_actions; ++a) d(mdp.index(s, a)) = total;
  }
  return d;
}

OperatorMatrices build_matrices(const TabularMdp& mdp, const Policy& behavior,
                                const RatioPair& ratios, int n, const StationaryInfo& stationary) {
  check_dims(mdp, behavior, ratios);
  require(n >= 1, ErrorCode::kInvalidParameter, "build_matrices: n must be >= 1");
  require(stationary.kappa_SA.size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
          "stationary info does not match the MDP");
  const int d = mdp.sa_count();
  const double gamma = mdp.discount;

  OperatorMatrices m;
  m.n = n;
  m.gamma = gamma;
  m.K_SA = stationary.kappa_SA;
  m.D_c = ratio_diagonal(mdp, behavior, ratios.c);
  m.D_rho = ratio_diagonal(mdp, behavior, ratios.rho);
  m.P_pi_c = state_action_kernel(mdp, ratio_weighted_policy(behavior, ratios.c));
  m.P_pi_rho = state_action_kernel(mdp, ratio_weighted_policy(behavior, ratios.rho));
  m.D_c_min = m.D_c.minCoeff();
  m.D_c_max = m.D_c.maxCoeff();
  m.D_rho_min = m.D_rho.minCoeff();
  m.D_rho_max = m.D_rho.maxCoeff();

  const Matrix identity = Matrix::Identity(d, d);
  const Matrix trace_step = gamma * m.P_pi_c * m.D_c.asDiagonal();
  // Horner accumulation of sum_{i<n} trace_step^i.
  Matrix geometric = identity;
  for (int i = 1; i < n; ++i) geometric = identity + trace_step * geometric;

  const Matrix td_part = identity - gamma * m.P_pi_rho * m.D_rho.asDiagonal();
  m.A = identity - m.K_SA.asDiagonal() * (geometric * td_part);
  m.b = m.K_SA.asDiagonal() * (geometric * mdp.reward_vector());
  return m;
}

QTable apply_tilde_B(const OperatorMatrices& m, const QTable& q) {
  require(q.size() == m.A.cols(), ErrorCode::kDimensionMismatch,
          "apply_tilde_B: Q table size does not match the operator");
  return m.A * q + m.b;
}

QTable solve_Q_pi(const TabularMdp& mdp, const Policy& target) {
  const int d = mdp.sa_count();
  const Matrix system = Matrix::Identity(d, d) - mdp.discount * state_action_kernel(mdp, target);
  return solve_dense(system, mdp.reward_vector());
}

QTable solve_Q_pi_rho(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios) {
  check_dims(mdp, behavior, ratios);
  const Vector d_rho = ratio_diagonal(mdp, behavior, ratios.rho);
  const double contraction = mdp.discount * d_rho.maxCoeff();
  require(contraction < 1.0, ErrorCode::kContractionViolated,
          "gamma * D_rho_max = " + std::to_string(contraction) + " >= 1");
  const int d = mdp.sa_count();
  const Matrix p_rho = state_action_kernel(mdp, ratio_weighted_policy(behavior, ratios.rho));
  const Matrix system = Matrix::Identity(d, d) - mdp.discount * p_rho * d_rho.asDiagonal();
  return solve_dense(system, mdp.reward_vector());
}

BiasReport bias_report(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                       const RatioPair& ratios) {
  const QTable q_rho = solve_Q_pi_rho(mdp, behavior, ratios);
  const QTable q_pi = solve_Q_pi(mdp, target);
  const double gamma = mdp.discount;
  const double d_rho_max = ratio_diagonal(mdp, behavior, ratios.rho).maxCoeff();

  double mismatch = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    double row = 0.0;
    for (int a = 0; a < mdp.num_actions; ++a)
      row += std::abs(target.probs(s, a) - behavior.probs(s, a) * ratios.rho(s, a));
    mismatch = std::max(mismatch, row);
  }

  BiasReport r;
  r.fixed_point_gap_bound = gamma * mismatch / ((1.0 - gamma) * (1.0 - gamma * d_rho_max));
  r.fixed_point_norm_bound = 1.0 / (1.0 - gamma * d_rho_max);
  r.actual_gap = inf_norm(q_pi - q_rho);
  r.actual_norm = inf_norm(q_rho);
  return r;
}

}  // namespace offtd
