#pragma once

#include <string>

#include "offtd/linalg.hpp"
#include "offtd/mdp.hpp"

namespace offtd {

/// Q tables are flat vectors over state-action pairs (TabularMdp::index).
using QTable = Vector;

enum class PresetKind { kVanillaIS, kQPiLambda, kTreeBackup, kRetrace, kQTrace, kCustom };

std::string to_string(PresetKind kind);
PresetKind preset_kind_from_string(const std::string& name);

/// Parameters of the ratio presets: lambda for Q^pi(lambda), TB(lambda) and
/// Retrace(lambda); the truncation levels for Q-trace.
struct PresetParams {
  double lambda = 1.0;
  double c_bar = 1.0;
  double rho_bar = 1.0;
};

/// Generalized importance-sampling ratios. c drives the trace products,
/// rho sits inside the temporal difference and fixes the limit point.
struct RatioPair {
  Matrix c;    ///< c(s, a) >= 0
  Matrix rho;  ///< rho(s, a) >= 0
  double c_max = 0.0;
  double rho_max = 0.0;
  PresetKind kind = PresetKind::kCustom;
  PresetParams params;

  /// Validates nonnegativity and fills the maxima.
  static RatioPair from_tables(Matrix c, Matrix rho, PresetKind kind = PresetKind::kCustom,
                               PresetParams params = {});
};

/// Explicit affine form of the asynchronous generalized Bellman operator,
/// B~(Q) = A Q + b. Diagonal matrices are stored as their diagonals.
struct OperatorMatrices {
  Matrix A;
  Vector b;
  Vector D_c;      ///< D_c(s,a) = sum_a' pi_b(a'|s) c(s,a')
  Vector D_rho;
  Matrix P_pi_c;   ///< state-action kernel of pi_c = pi_b c / D_c
  Matrix P_pi_rho;
  Vector K_SA;     ///< stationary state-action distribution
  int n = 1;
  double gamma = 0.0;
  double D_c_min = 0.0, D_c_max = 0.0;
  double D_rho_min = 0.0, D_rho_max = 0.0;
};

struct BiasReport {
  double fixed_point_gap_bound = 0.0;
  double fixed_point_norm_bound = 0.0;
  double actual_gap = 0.0;
  double actual_norm = 0.0;
};

/// [H_rho(Q)](s,a) = R(s,a) + gamma E_{pi_b}[rho(S',A') Q(S',A') | s, a],
/// evaluated as the one-step expectation.
QTable apply_H_rho(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios,
                   const QTable& q);

/// T_c(Q) = sum_{i<n} gamma^i E_{pi_b}[prod_{j=1..i} c(S_j,A_j) Q(S_i,A_i)],
/// evaluated by nested one-step expectations.
QTable apply_T_c(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios, int n,
                 const QTable& q);

/// K_SA T_c(H_rho(Q) - Q) + Q from the operator definitions (no matrices).
QTable apply_tilde_B_definitional(const TabularMdp& mdp, const Policy& behavior,
                                  const RatioPair& ratios, int n, const StationaryInfo& stationary,
                                  const QTable& q);

/// pi_w(a|s) = pi_b(a|s) w(s,a) / D_w(s), falling back to pi_b(.|s) when D_w(s) = 0.
Policy ratio_weighted_policy(const Policy& behavior, const Matrix& weights);

/// Diagonal of D_w over state-action pairs.
Vector ratio_diagonal(const TabularMdp& mdp, const Policy& behavior, const Matrix& weights);

/// A = I - K_SA sum_{i<n} (gamma P_c D_c)^i (I - gamma P_rho D_rho),
/// b = K_SA sum_{i<n} (gamma P_c D_c)^i R.
OperatorMatrices build_matrices(const TabularMdp& mdp, const Policy& behavior,
                                const RatioPair& ratios, int n, const StationaryInfo& stationary);

QTable apply_tilde_B(const OperatorMatrices& m, const QTable& q);

/// Q^pi from (I - gamma P_pi) Q = R.
QTable solve_Q_pi(const TabularMdp& mdp, const Policy& target);

/// Fixed point of H_rho, (I - gamma P_rho D_rho)^{-1} R.
/// Throws kContractionViolated when gamma * D_rho_max >= 1.
QTable solve_Q_pi_rho(const TabularMdp& mdp, const Policy& behavior, const RatioPair& ratios);

BiasReport bias_report(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                       const RatioPair& ratios);

}  // namespace offtd
