#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "offtd/bounds.hpp"
#include "offtd/contraction.hpp"
#include "offtd/error.hpp"
#include "offtd/td.hpp"
#include "oracles.hpp"

using namespace offtd;
using fixtures::mat;

namespace {

struct TdCase {
  TabularMdp mdp;
  Policy target, behavior;
  StationaryInfo info;
};

TdCase setup(int S, int A, std::uint64_t seed) {
  TdCase s;
  s.behavior = random_policy(S, A, seed + 1);
  s.target = random_policy(S, A, seed + 2);
  s.mdp = oracle::ergodic_garnet(S, A, std::min(S, 2), seed, s.behavior).first;
  s.info = stationary(s.mdp, s.behavior);
  return s;
}

TEST(Preset, OnPolicyVanillaIsOne) {
  const TdCase s = setup(3, 2, 1);
  const RatioPair r = preset(PresetKind::kVanillaIS, {}, s.mdp, s.behavior, s.behavior);
  EXPECT_TRUE((r.c.array() == 1.0).all());
  EXPECT_TRUE((r.rho.array() == 1.0).all());
}

TEST(Preset, Clamps) {
  const TabularMdp m = fixtures::identity_mdp(1, 3, 0, 0, 0.9);
  const Policy target = fixtures::policy({{0.6, 0.3, 0.1}});
  const Policy behavior = fixtures::policy({{0.2, 0.15, 0.65}});
  // ratios 3, 2, 1/6.5
  const RatioPair retrace = preset(PresetKind::kRetrace, {1.0}, m, target, behavior);
  EXPECT_DOUBLE_EQ(retrace.c(0, 1), 1.0);
  EXPECT_NEAR(retrace.rho(0, 1), 2.0, 1e-15);
  const RatioPair qt = preset(PresetKind::kQTrace, {1.0, 1.0, 2.0}, m, target, behavior);
  EXPECT_DOUBLE_EQ(qt.c(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(qt.rho(0, 0), 2.0);
  const RatioPair tb = preset(PresetKind::kTreeBackup, {0.5}, m, target, behavior);
  EXPECT_DOUBLE_EQ(tb.c(0, 0), 0.3);
  const RatioPair qpi = preset(PresetKind::kQPiLambda, {0.1}, m, target, behavior);
  EXPECT_TRUE((qpi.c.array() == 0.1).all());
  EXPECT_NEAR(max_ratio(target, behavior), 3.0, 1e-15);
  EXPECT_NEAR(min_ratio(target, behavior), 0.1 / 0.65, 1e-15);
}

TEST(Preset, Errors) {
  const TabularMdp m = fixtures::identity_mdp(1, 2, 0, 0, 0.9);
  const Policy target = fixtures::policy({{0.5, 0.5}});
  const Policy zero = fixtures::policy({{1.0, 0.0}});
  try {
    preset(PresetKind::kRetrace, {}, m, target, zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroBehaviorProb);
  }
  try {
    preset(PresetKind::kQTrace, {1.0, 2.0, 1.0}, m, target, target);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidTruncation);
  }
  EXPECT_EQ(preset_kind_from_string("tree-backup"), PresetKind::kTreeBackup);
  EXPECT_THROW(preset_kind_from_string("v-trace"), Error);
}

TEST(Trajectory, DeterministicPath) {
  const TabularMdp m = fixtures::chain_mdp(mat({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
  const Trajectory t = sample_trajectory(m, uniform_policy(3, 1), 7, 0, 5);
  for (int k = 0; k < 7; ++k) EXPECT_EQ(t.pairs[k].s, k % 3);
}

TEST(Trajectory, SeedDeterminism) {
  const TdCase s = setup(4, 2, 3);
  const Trajectory a = sample_trajectory(s.mdp, s.behavior, 1000, std::nullopt, 9);
  const Trajectory b = sample_trajectory(s.mdp, s.behavior, 1000, std::nullopt, 9);
  const Trajectory c = sample_trajectory(s.mdp, s.behavior, 1000, std::nullopt, 10);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_NE(a.pairs, c.pairs);
}

TEST(Trajectory, SymmetricChainFrequency) {
  const TabularMdp m = fixtures::chain_mdp(mat({{.5, .5}, {.5, .5}}));
  const Trajectory t = sample_trajectory(m, uniform_policy(2, 1), 1000000, 0, 1);
  std::int64_t zeros = 0;
  for (const auto& p : t.pairs) zeros += p.s == 0;
  const double freq = static_cast<double>(zeros) / 1e6;
  EXPECT_GE(freq, 0.49);
  EXPECT_LE(freq, 0.51);
}

TEST(Trajectory, ActionFrequenciesFollowBehavior) {
  const TdCase s = setup(3, 3, 8);
  const Trajectory t = sample_trajectory(s.mdp, s.behavior, 400000, std::nullopt, 2);
  Matrix counts = Matrix::Zero(3, 3);
  for (const auto& p : t.pairs) counts(p.s, p.a) += 1;
  for (int st = 0; st < 3; ++st) {
    const double visits = counts.row(st).sum();
    EXPECT_NEAR(visits / 4e5, s.info.kappa_S(st), 0.01);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(counts(st, a) / visits, s.behavior.probs(st, a), 0.01);
  }
}

TEST(Learner, ZeroStepFreezes) {
  const TdCase s = setup(3, 2, 4);
  LearnerConfig cfg;
  cfg.n = 2;
  cfg.step_size = 0.0;
  cfg.num_iterations = 500;
  cfg.initial_q = oracle::random_vector(6, 3);
  cfg.ratios = preset(PresetKind::kRetrace, {}, s.mdp, s.target, s.behavior);
  const RunResult r = run_learner(s.mdp, s.behavior, cfg, Vector::Zero(6), 100);
  EXPECT_EQ(r.final_q, cfg.initial_q);
}

TEST(Learner, ScalarRecursion) {
  const TabularMdp m = fixtures::scalar_mdp(1.0, 0.5);
  LearnerConfig cfg;
  cfg.step_size = 1.0;
  cfg.num_iterations = 2;
  cfg.ratios = RatioPair::from_tables(Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const Vector ref = Vector::Constant(1, 2.0);
  RunResult r = run_learner(m, uniform_policy(1, 1), cfg, ref, 1);
  EXPECT_DOUBLE_EQ(r.final_q(0), 1.5);
  ASSERT_EQ(r.error_trajectory.size(), 3u);
  EXPECT_DOUBLE_EQ(r.error_trajectory[0], 4.0);
  EXPECT_DOUBLE_EQ(r.error_trajectory[1], 1.0);
  EXPECT_DOUBLE_EQ(r.error_trajectory[2], 0.25);
  cfg.num_iterations = 60;
  r = run_learner(m, uniform_policy(1, 1), cfg, ref, 10);
  EXPECT_NEAR(r.final_q(0), 2.0, 1e-12);
}

TEST(Learner, RecordingGrid) {
  const TdCase s = setup(3, 2, 5);
  LearnerConfig cfg;
  cfg.step_size = 0.1;
  cfg.num_iterations = 25;
  cfg.ratios = preset(PresetKind::kRetrace, {}, s.mdp, s.target, s.behavior);
  const RunResult r = run_learner(s.mdp, s.behavior, cfg, Vector::Zero(6), 10);
  EXPECT_EQ(r.iterations, (std::vector<std::int64_t>{0, 10, 20, 25}));
}

TEST(Learner, SparseUpdatesMatchNoiseOperator) {
  const TdCase s = setup(3, 2, 6);
  const int n = 3;
  const double alpha = 0.05;
  const RatioPair ratios = preset(PresetKind::kQTrace, {1.0, 1.0, 1.5}, s.mdp, s.target, s.behavior);
  const std::uint64_t seed = 17;
  const Trajectory traj = sample_trajectory(s.mdp, s.behavior, 40 + n, std::nullopt, seed);

  LearnerConfig cfg;
  cfg.n = n;
  cfg.step_size = alpha;
  cfg.ratios = ratios;
  cfg.seed = seed;
  Vector q = Vector::Zero(6);
  for (int k = 0; k < 40; ++k) {
    cfg.num_iterations = k + 1;
    const RunResult r = run_learner(s.mdp, s.behavior, cfg, Vector::Zero(6), 1000);
    const std::vector<StateAction> window(traj.pairs.begin() + k, traj.pairs.begin() + k + n + 1);
    const QTable f = noise_operator_F(s.mdp, ratios, n, q, window);
    const Vector expected = q + alpha * (f - q);
    EXPECT_LE(oracle::sup(r.final_q - expected), 1e-14);
    int changed = 0;
    for (int i = 0; i < 6; ++i) changed += r.final_q(i) != q(i);
    EXPECT_LE(changed, 1);
    q = r.final_q;
  }
}

TEST(Learner, Deterministic) {
  const TdCase s = setup(4, 2, 7);
  LearnerConfig cfg;
  cfg.n = 2;
  cfg.step_size = 0.02;
  cfg.num_iterations = 5000;
  cfg.seed = 3;
  cfg.ratios = preset(PresetKind::kTreeBackup, {}, s.mdp, s.target, s.behavior);
  const QTable ref = solve_Q_pi_rho(s.mdp, s.behavior, cfg.ratios);
  const RunResult a = run_learner(s.mdp, s.behavior, cfg, ref, 7);
  const RunResult b = run_learner(s.mdp, s.behavior, cfg, ref, 7);
  EXPECT_EQ(a.final_q, b.final_q);
  EXPECT_EQ(a.error_trajectory, b.error_trajectory);
}

TEST(Learner, DivergenceIsReported) {
  const TabularMdp m = fixtures::scalar_mdp(1.0, 0.9);
  LearnerConfig cfg;
  cfg.step_size = 1.0;
  cfg.num_iterations = 1000;
  cfg.ratios = RatioPair::from_tables(Matrix::Constant(1, 1, 5.0), Matrix::Constant(1, 1, 5.0));
  try {
    run_learner(m, uniform_policy(1, 1), cfg, Vector::Zero(1), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDiverged);
    ASSERT_TRUE(e.iteration().has_value());
    EXPECT_GT(*e.iteration(), 0);
  }
}

TEST(Learner, ConvergesTowardFixedPoint) {
  const TdCase s = setup(3, 2, 9);
  LearnerConfig cfg;
  cfg.n = 2;
  cfg.step_size = 0.01;
  cfg.num_iterations = 300000;
  cfg.ratios = preset(PresetKind::kRetrace, {}, s.mdp, s.target, s.behavior);
  const QTable ref = solve_Q_pi_rho(s.mdp, s.behavior, cfg.ratios);
  const RunResult r = run_learner(s.mdp, s.behavior, cfg, ref, 100000);
  EXPECT_LT(r.error_trajectory.back(), 0.05 * r.error_trajectory.front());
}

TEST(NoiseOperator, ZeroTemporalDifferenceIsFixed) {
  const TabularMdp m = fixtures::scalar_mdp(1.0, 0.5);
  const RatioPair r = RatioPair::from_tables(Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const std::vector<StateAction> window(3, StateAction{0, 0});
  const QTable q = Vector::Constant(1, 2.0);
  EXPECT_DOUBLE_EQ(noise_operator_F(m, r, 2, q, window)(0), 2.0);
}

TEST(NoiseOperator, ExpectationIdentity) {
  const TdCase s = setup(2, 2, 11);
  const RatioPair r = preset(PresetKind::kRetrace, {}, s.mdp, s.target, s.behavior);
  const auto windows = enumerate_windows(s.mdp, s.behavior, 2, s.info);
  double total = 0.0;
  for (const auto& w : windows) total += w.probability;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto m = build_matrices(s.mdp, s.behavior, r, 2, s.info);
  for (std::uint64_t t = 0; t < 5; ++t) {
    const Vector q = oracle::random_vector(4, t, 5.0);
    Vector mean = Vector::Zero(4);
    for (const auto& w : windows) mean += w.probability * noise_operator_F(s.mdp, r, 2, q, w.window);
    EXPECT_LE(oracle::sup(mean - apply_tilde_B(m, q)), 1e-10);
  }
}

TEST(NoiseOperator, LipschitzAndOffsetBounds) {
  const TdCase s = setup(2, 3, 12);
  const int n = 2;
  const RatioPair r = preset(PresetKind::kQTrace, {1.0, 1.0, 1.5}, s.mdp, s.target, s.behavior);
  const double g = s.mdp.discount;
  const double lip = f_factor(g * r.c_max, n) * (g * r.rho_max + 1.0) + 1.0;
  const auto windows = enumerate_windows(s.mdp, s.behavior, n, s.info);
  std::uint64_t t = 0;
  for (const auto& w : windows) {
    const Vector q1 = oracle::random_vector(6, t++, 4.0), q2 = oracle::random_vector(6, t++, 4.0);
    const double lhs = oracle::sup(noise_operator_F(s.mdp, r, n, q1, w.window) -
                                   noise_operator_F(s.mdp, r, n, q2, w.window));
    EXPECT_LE(lhs, lip * oracle::sup(q1 - q2) + 1e-12);
    EXPECT_LE(oracle::sup(noise_operator_F(s.mdp, r, n, Vector::Zero(6), w.window)),
              f_factor(g * r.c_max, n) + 1e-12);
  }
}

TEST(Telescoped, AgreesWithDirectForm) {
  const TdCase s = setup(3, 2, 14);
  for (int n : {1, 2, 3}) {
    const RatioPair r = preset(PresetKind::kVanillaIS, {}, s.mdp, s.target, s.behavior);
    const Trajectory traj = sample_trajectory(s.mdp, s.behavior, 200, std::nullopt, n);
    for (int k = 0; k + n < 200; k += 7) {
      const std::vector<StateAction> w(traj.pairs.begin() + k, traj.pairs.begin() + k + n + 1);
      const Vector q = oracle::random_vector(6, k, 3.0);
      EXPECT_LE(oracle::sup(vanilla_is_telescoped_F(s.mdp, r, n, q, w) -
                            noise_operator_F(s.mdp, r, n, q, w)),
                1e-12);
    }
  }
  const RatioPair retrace = preset(PresetKind::kRetrace, {}, s.mdp, s.target, s.behavior);
  const std::vector<StateAction> w(2, StateAction{0, 0});
  try {
    vanilla_is_telescoped_F(s.mdp, retrace, 1, Vector::Zero(6), w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotVanillaIS);
  }
}

TEST(Windows, ProbabilityProductFormula) {
  const TdCase s = setup(2, 2, 15);
  const auto windows = enumerate_windows(s.mdp, s.behavior, 1, s.info);
  for (const auto& w : windows) {
    const auto& y = w.window;
    const double p = s.info.kappa_S(y[0].s) * s.behavior.probs(y[0].s, y[0].a) *
                     s.mdp.transitions[y[0].a](y[0].s, y[1].s) * s.behavior.probs(y[1].s, y[1].a);
    EXPECT_NEAR(w.probability, p, 1e-15);
  }
}

}  // namespace
