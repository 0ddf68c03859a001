#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "offtd/contraction.hpp"
#include "offtd/error.hpp"
#include "offtd/td.hpp"
#include "oracles.hpp"

using namespace offtd;

namespace {

Matrix random_substochastic(int d, double beta, std::uint64_t seed) {
  Matrix m = oracle::random_stochastic(d, d, seed);
  CounterRng rng(seed, Stream::kProbe, 3);
  for (int i = 0; i < d; ++i) m.row(i) *= (1.0 - beta) * (0.3 + 0.7 * rng.uniform());
  return m;
}

TEST(FFactor, Values) {
  EXPECT_DOUBLE_EQ(f_factor(1.0, 5), 5.0);
  EXPECT_DOUBLE_EQ(f_factor(0.0, 7), 1.0);
  EXPECT_DOUBLE_EQ(f_factor(0.5, 3), 1.75);
  for (double x : {0.3, 0.9, 0.999999, 1.0000001, 1.2, 2.0})
    for (int n = 1; n <= 10; ++n)
      EXPECT_NEAR(f_factor(x, n), oracle::geometric_sum(x, n), 1e-10 * oracle::geometric_sum(x, n));
}

TEST(CheckSubstochastic, Examples) {
  const auto id = check_substochastic(Matrix::Identity(3, 3));
  EXPECT_TRUE(id.is_substochastic);
  EXPECT_DOUBLE_EQ(id.modulus_beta, 0.0);

  Matrix last = Matrix::Zero(3, 3);
  last.col(2).setConstant(0.8);
  const auto r = check_substochastic(last);
  EXPECT_TRUE(r.is_substochastic);
  EXPECT_NEAR(r.modulus_beta, 0.2, 1e-15);

  Matrix neg = 0.5 * Matrix::Identity(2, 2);
  neg(0, 1) = -0.01;
  EXPECT_FALSE(check_substochastic(neg).is_substochastic);
}

TEST(BuildWeights, SymmetricDiagonal) {
  const auto cert = build_weights(0.5 * Matrix::Identity(2, 2), 0.5, 0.5);
  EXPECT_NEAR(cert.mu(0), 0.5, 1e-14);
  EXPECT_NEAR(cert.mu(1), 0.5, 1e-14);
  EXPECT_FALSE(cert.used_irreducible_shortcut);
}

TEST(BuildWeights, LowerBoundOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const double beta = 0.05 + 0.03 * static_cast<double>(seed % 10);
    const Matrix m = random_substochastic(6, beta, seed);
    const auto cert = build_weights(m, beta, 0.5);
    EXPECT_NEAR(cert.mu.sum(), 1.0, 1e-12);
    EXPECT_GT(cert.mu.minCoeff(), 0.0);
    EXPECT_GE(cert.mu_min, beta * 0.5 / ((1 - 0.5 * beta) * 6) - 1e-12);
    EXPECT_DOUBLE_EQ(cert.mu_lower_bound(), beta * 0.5 / ((1 - 0.5 * beta) * 6));
  }
}

TEST(BuildWeights, RejectsInsufficientModulus) {
  EXPECT_THROW(build_weights(0.9 * Matrix::Identity(3, 3), 0.2, 0.5), Error);
  EXPECT_THROW(build_weights(0.5 * Matrix::Identity(3, 3), 0.2, 1.0), Error);
}

TEST(BuildWeights, FactorFormula) {
  ContractionCertificate c;
  c.beta = 0.2;
  c.theta = 0.5;
  EXPECT_NEAR(c.factor(1.0), 0.9, 1e-15);
  EXPECT_NEAR(c.factor(2.0), std::sqrt(0.8 * 0.9), 1e-15);
  EXPECT_NEAR(c.factor(kInfinityNorm), 0.8, 1e-15);
  EXPECT_NEAR(c.uniform_factor(), 0.9, 1e-15);
  for (double p : {1.0, 2.0, 4.0, 16.0}) EXPECT_LE(c.factor(p), c.uniform_factor() + 1e-15);
}

TEST(BuildWeights, IrreducibleShortcut) {
  const Matrix m = random_substochastic(5, 0.1, 4);
  const auto cert = build_weights_preferring_irreducible(m, 0.1);
  EXPECT_TRUE(cert.used_irreducible_shortcut);
  EXPECT_DOUBLE_EQ(cert.theta, 1.0);
  EXPECT_DOUBLE_EQ(cert.mu_lower_bound(), 0.0);
  const auto rep = verify_contraction(m, cert, {1.0, 2.0, 4.0}, 200, 1);
  EXPECT_TRUE(rep.passed);

  Matrix reducible = 0.5 * Matrix::Identity(3, 3);
  const auto fallback = build_weights_preferring_irreducible(reducible, 0.5);
  EXPECT_FALSE(fallback.used_irreducible_shortcut);
}

TEST(WeightedNorm, Examples) {
  const Vector x = (Vector(2) << 3, 4).finished();
  const Vector mu = Vector::Constant(2, 0.5);
  EXPECT_NEAR(weighted_p_norm(x, mu, 2.0), std::sqrt(12.5), 1e-14);
  EXPECT_DOUBLE_EQ(weighted_p_norm((Vector(2) << -2, 1).finished(), mu, kInfinityNorm), 2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector v = oracle::random_vector(5, seed, 3.0);
    const Vector w = oracle::random_stochastic(1, 5, seed).row(0).transpose();
    for (double p : {1.0, 1.5, 2.0, 7.0}) EXPECT_LE(weighted_p_norm(v, w, p), oracle::sup(v) + 1e-14);
  }
}

TEST(WeightedNorm, ReducibleExampleCannotContract) {
  const double omega = 0.2;
  Matrix m = Matrix::Zero(3, 3);
  m.col(2).setConstant(1.0 - omega);
  const Vector e3 = Vector::Unit(3, 2);
  for (const Vector& mu : {Vector(Vector::Constant(3, 1.0 / 3)), Vector((Vector(3) << 0.2, 0.3, 0.5).finished())}) {
    for (double p : {1.0, 2.0, 4.0}) {
      const double ratio = weighted_p_norm(m * e3, mu, p) / weighted_p_norm(e3, mu, p);
      EXPECT_NEAR(ratio, (1 - omega) / std::pow(mu(2), 1.0 / p), 1e-12);
      EXPECT_GT(ratio, 1 - omega);
    }
  }
}

TEST(VerifyContraction, ZeroMatrixPasses) {
  const auto cert = build_weights(Matrix::Zero(3, 3), 0.5, 0.5);
  const auto rep = verify_contraction(Matrix::Zero(3, 3), cert, {1.0, 2.0, 4.0}, 50, 0);
  EXPECT_TRUE(rep.passed);
  for (double w : rep.worst_ratio) EXPECT_EQ(w, 0.0);
}

TEST(VerifyContraction, DetectsAWrongCertificate) {
  Matrix m = Matrix::Zero(3, 3);
  m.col(2).setConstant(0.8);
  ContractionCertificate bogus;
  bogus.beta = 0.2;
  bogus.theta = 0.5;
  bogus.mu = Vector::Constant(3, 1.0 / 3);
  bogus.mu_min = 1.0 / 3;
  const auto rep = verify_contraction(m, bogus, {2.0}, 20, 0);
  EXPECT_FALSE(rep.passed);
  EXPECT_FALSE(rep.violations.empty());
}

struct TdCase {
  TabularMdp mdp;
  Policy target, behavior;
  StationaryInfo info;
};

TdCase td_case(int S, int A, std::uint64_t seed, bool on_policy = false) {
  TdCase c;
  c.behavior = random_policy(S, A, seed + 7);
  c.target = on_policy ? c.behavior : random_policy(S, A, seed + 8);
  c.mdp = oracle::ergodic_garnet(S, A, std::min(S, 3), seed, c.behavior).first;
  c.info = stationary(c.mdp, c.behavior);
  return c;
}

TEST(Certificate, OnPolicyModulus) {
  for (int n = 1; n <= 4; ++n) {
    const TdCase c = td_case(4, 2, 31 + n, true);
    const RatioPair r = preset(PresetKind::kVanillaIS, {}, c.mdp, c.target, c.behavior);
    const auto m = build_matrices(c.mdp, c.behavior, r, n, c.info);
    const double expected = c.info.K_SA_min * (1.0 - std::pow(c.mdp.discount, n));
    EXPECT_NEAR(omega_formula(m), expected, 1e-14);
    EXPECT_LE(matrix_inf_norm(m.A), 1.0 - expected + 1e-12);
  }
}

TEST(Certificate, OmegaMatchesRawFormula) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TdCase c = td_case(5, 3, seed);
    for (PresetKind kind : {PresetKind::kRetrace, PresetKind::kTreeBackup, PresetKind::kQTrace}) {
      const RatioPair r = preset(kind, {1.0, 1.0, 1.5}, c.mdp, c.target, c.behavior);
      const auto m = build_matrices(c.mdp, c.behavior, r, 3, c.info);
      EXPECT_NEAR(omega_formula(m), oracle::omega(c.mdp, c.behavior, r, 3, c.info.kappa_SA), 1e-15);
      const auto mod = certify_modulus(m);
      ASSERT_TRUE(mod.omega_formula.has_value());
      EXPECT_TRUE(mod.is_substochastic);
      EXPECT_GE(mod.modulus_beta, *mod.omega_formula - 1e-9);
    }
  }
}

TEST(Certificate, RetraceGarnetProbesPass) {
  const TdCase c = td_case(5, 3, 77);
  const RatioPair r = preset(PresetKind::kRetrace, {}, c.mdp, c.target, c.behavior);
  const auto m = build_matrices(c.mdp, c.behavior, r, 2, c.info);
  const double omega = omega_formula(m);
  const auto cert = build_weights(m.A, omega, 0.5);
  const auto rep = verify_contraction(m.A, cert, {1.0, 2.0, 4.0}, 1000, 5);
  EXPECT_TRUE(rep.passed);
  for (std::size_t i = 0; i < rep.p_checked.size(); ++i) {
    EXPECT_LE(rep.worst_ratio[i], cert.factor(rep.p_checked[i]) + 1e-9);
    EXPECT_LE(rep.worst_ratio[i], cert.uniform_factor() + 1e-9);
  }
  EXPECT_LE(rep.inf_norm, 1.0 - omega + 1e-12);
  // the exact p=1 induced norm against a direct column computation
  double p1 = 0.0;
  for (Eigen::Index j = 0; j < m.A.cols(); ++j)
    p1 = std::max(p1, (cert.mu.array() * m.A.col(j).array().abs()).sum() / cert.mu(j));
  EXPECT_NEAR(rep.exact_p1_norm, p1, 1e-14);
}

TEST(Lyapunov, DiagonalCase) {
  const double w = 0.3;
  const auto rep = lyapunov_inequality_check((1 - w) * Matrix::Identity(3, 3), Vector::Constant(3, 1.0 / 3), w);
  EXPECT_TRUE(rep.passed);
  EXPECT_NEAR(rep.max_eigenvalue, -w / 3, 1e-14);
}

TEST(Lyapunov, CertifiedInstancePassesAndLargeEtaFails) {
  const TdCase c = td_case(4, 2, 12);
  const RatioPair r = preset(PresetKind::kRetrace, {}, c.mdp, c.target, c.behavior);
  const auto m = build_matrices(c.mdp, c.behavior, r, 2, c.info);
  const double omega = omega_formula(m);
  const auto cert = build_weights(m.A, omega, 0.5);
  EXPECT_TRUE(lyapunov_inequality_check(m.A, cert.mu, omega).passed);
  EXPECT_FALSE(lyapunov_inequality_check(m.A, cert.mu, 3.0).passed);
}

TEST(Hurwitz, Examples) {
  EXPECT_TRUE(hurwitz_check(0.5 * Matrix::Identity(3, 3)));
  EXPECT_FALSE(hurwitz_check(oracle::random_stochastic(3, 3, 2)));
  EXPECT_THROW(hurwitz_check(-Matrix::Identity(2, 2)), Error);

  const TdCase c = td_case(4, 2, 13);
  const RatioPair r = preset(PresetKind::kRetrace, {}, c.mdp, c.target, c.behavior);
  const auto m = build_matrices(c.mdp, c.behavior, r, 1, c.info);
  EXPECT_TRUE(hurwitz_check(m.A));
}

TEST(HurwitzShift, Examples) {
  const auto s = hurwitz_shift(-Matrix::Identity(2, 2));
  EXPECT_GT(s.phi, 0.0);
  EXPECT_LT(s.phi, 1.0);
  EXPECT_NEAR(s.spectral_radius, 1.0 - s.phi, 1e-9);

  const auto two = hurwitz_shift(-2.0 * Matrix::Identity(2, 2));
  EXPECT_NEAR(two.phi, 0.5, 1e-6);
  EXPECT_NEAR(two.spectral_radius, 0.0, 1e-5);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix mp = random_substochastic(4, 0.2, seed) - Matrix::Identity(4, 4);
    const auto h = hurwitz_shift(mp);
    const Matrix shifted = h.phi * mp + Matrix::Identity(4, 4);
    const double radius = shifted.eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_LT(radius, 1.0);
    EXPECT_NEAR(radius, h.spectral_radius, 1e-9);
  }
  Matrix unstable = Matrix::Identity(2, 2);
  EXPECT_THROW(hurwitz_shift(unstable), Error);
}

}  // namespace
