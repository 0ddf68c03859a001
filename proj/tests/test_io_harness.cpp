#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "offtd/error.hpp"
#include "offtd/harness.hpp"
#include "offtd/io.hpp"
#include "oracles.hpp"

using namespace offtd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("offtd_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.mdp.num_states = 4;
  spec.mdp.num_actions = 2;
  spec.mdp.seed = 7;
  spec.preset = "retrace";
  spec.n = 2;
  spec.alpha = 0.01;
  spec.num_seeds = 4;
  spec.num_iterations = 3000;
  spec.record_stride = 100;
  return spec;
}

TEST(Json, MdpRoundTripIsExact) {
  const TabularMdp m = garnet(5, 3, 2, 4, 0.95);
  const TabularMdp back = io::mdp_from_json(io::json::parse(io::mdp_to_json(m).dump()));
  EXPECT_EQ(back.num_states, 5);
  EXPECT_EQ(back.discount, 0.95);
  EXPECT_EQ(back.rewards, m.rewards);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(back.transitions[a], m.transitions[a]);
}

TEST(Json, PolicyAndQRoundTrip) {
  const TabularMdp m = garnet(3, 2, 2, 1);
  const Policy pi = random_policy(3, 2, 8);
  EXPECT_EQ(io::policy_from_json(io::policy_to_json(pi)).probs, pi.probs);
  const QTable q = oracle::random_vector(6, 2, 3.0);
  EXPECT_EQ(io::qtable_from_json(m, io::qtable_to_json(m, q)), q);
}

TEST(Json, ParsesStructureAndLeavesValidationToCaller) {
  io::json j = io::mdp_to_json(garnet(2, 2, 2, 1));
  j["transitions"][0][1][0] = 0.3;
  EXPECT_FALSE(validate_mdp(io::mdp_from_json(j)).ok());
  io::json broken = {{"num_states", 2}};
  EXPECT_THROW(io::mdp_from_json(broken), Error);
}

TEST(Json, LinearSaProblemRoundTrip) {
  const auto p = random_certified_problem(3, 2, 0.3, 1);
  const auto back = io::linear_sa_problem_from_json(io::linear_sa_problem_to_json(p));
  EXPECT_EQ(back.noise_kernel, p.noise_kernel);
  EXPECT_EQ(back.x_star, p.x_star);
}

TEST(Json, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17}) {
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
}

TEST(Spec, RoundTripPreservesEveryField) {
  ExperimentSpec spec = small_spec();
  spec.params.c_bar = 0.75;
  spec.params.rho_bar = 1.25;
  spec.behavior.generator = "epsilon-greedy-of-target";
  spec.behavior.epsilon = 0.2;
  spec.base_seed = 99;
  const io::json j = spec_to_json(spec);
  const ExperimentSpec back = spec_from_json(io::json::parse(j.dump()));
  EXPECT_EQ(spec_to_json(back), j);
  EXPECT_EQ(*back.alpha, 0.01);

  spec.alpha.reset();
  EXPECT_EQ(spec_to_json(spec)["alpha"], "auto-cap");
  EXPECT_FALSE(spec_from_json(spec_to_json(spec)).alpha.has_value());
}

TEST(Spec, UnknownGeneratorIsTyped) {
  ExperimentSpec spec = small_spec();
  spec.target.generator = "softmax";
  try {
    resolve(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownTag);
  }
}

TEST(WriteText, RefusesOverwriteWithoutForce) {
  const fs::path dir = scratch_dir("write");
  const fs::path f = dir / "a.txt";
  io::write_text(f, "one", false);
  EXPECT_THROW(io::write_text(f, "two", false), Error);
  EXPECT_EQ(io::read_text(f), "one");
  io::write_text(f, "two", true);
  EXPECT_EQ(io::read_text(f), "two");
  fs::remove_all(dir);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for_index(hits.size(), 3, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsLowestIndexFailure) {
  try {
    parallel_for_index(50, 4, [](std::size_t i) {
      if (i == 7 || i == 30) throw Error(ErrorCode::kDiverged, "boom " + std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("boom 7"), std::string::npos);
  }
}

TEST(Threads, EnvironmentOverride) {
  ::setenv("OFFPOLICY_TD_THREADS", "3", 1);
  EXPECT_EQ(default_threads(), 3);
  ::setenv("OFFPOLICY_TD_THREADS", "zero", 1);
  EXPECT_THROW(default_threads(), Error);
  ::unsetenv("OFFPOLICY_TD_THREADS");
  EXPECT_GE(default_threads(), 1);
}

TEST(Resolve, ExplicitAlphaAndDerivedQuantities) {
  const ExperimentSpec spec = small_spec();
  const ResolvedExperiment ex = resolve(spec);
  EXPECT_EQ(ex.alpha, 0.01);
  EXPECT_FALSE(ex.alpha_from_cap);
  EXPECT_EQ(ex.tau, ex.mixing.tau(0.01, 2));
  EXPECT_GT(ex.omega, 0.0);
  EXPECT_NEAR(ex.omega, oracle::omega(ex.mdp, ex.behavior, ex.ratios, 2, ex.matrices.K_SA), 1e-12);
  EXPECT_FALSE(ex.bound.has_value());
  EXPECT_LE(oracle::sup(ex.matrices.A * ex.reference + ex.matrices.b - ex.reference), 1e-10);
}

TEST(Resolve, AutoCapGivesBound) {
  ExperimentSpec spec = small_spec();
  spec.alpha.reset();
  spec.num_iterations = 0;
  const ResolvedExperiment ex = resolve(spec);
  EXPECT_TRUE(ex.alpha_from_cap);
  ASSERT_TRUE(ex.bound.has_value());
  EXPECT_LE(ex.alpha * ex.tau, cap_rhs(ex.bound_inputs) * (1 + 1e-12));
  EXPECT_EQ(ex.num_iterations, envelope_horizon(ex.tau, ex.omega, ex.alpha));
  EXPECT_EQ(envelope_horizon(3, 0.5, 0.1), 1200);
}

TEST(Analyze, PassesOnGarnet) {
  const ResolvedExperiment ex = resolve(small_spec());
  const AnalysisReport r = analyze(ex, {1.0, 2.0, 4.0, kInfinityNorm}, 200, 1);
  EXPECT_TRUE(r.modulus_ok);
  EXPECT_TRUE(r.passed);
  EXPECT_TRUE(r.verification.passed);
}

TEST(RunExperiment, CsvIsIdenticalAcrossThreadCounts) {
  const ExperimentSpec spec = small_spec();
  const ResolvedExperiment ex = resolve(spec);
  const auto one = run_experiment(ex, spec, 1);
  const auto three = run_experiment(ex, spec, 3);
  EXPECT_EQ(aggregate_csv(one), aggregate_csv(three));
  EXPECT_EQ(io::learner_csv(one.seeds, one.runs), io::learner_csv(three.seeds, three.runs));
  ASSERT_EQ(one.iterations.size(), 31u);
  EXPECT_EQ(one.iterations.back(), 3000);
  for (double b : one.bound) EXPECT_TRUE(std::isnan(b));
}

TEST(RunExperiment, MeanAndStandardErrorMatchSeeds) {
  const ExperimentSpec spec = small_spec();
  const ResolvedExperiment ex = resolve(spec);
  const auto r = run_experiment(ex, spec, 2);
  ASSERT_EQ(r.runs.size(), 4u);
  const std::size_t i = 10;
  double mean = 0.0;
  for (const auto& run : r.runs) mean += run.error_trajectory[i] / 4.0;
  double var = 0.0;
  for (const auto& run : r.runs) var += std::pow(run.error_trajectory[i] - mean, 2) / 3.0;
  EXPECT_NEAR(r.mean[i], mean, 1e-14 * mean);
  EXPECT_NEAR(r.std_error[i], std::sqrt(var / 4.0), 1e-12 * (1 + r.std_error[i]));
}

TEST(RunExperiment, DivergedSeedsAreListed) {
  ExperimentSpec spec = small_spec();
  spec.preset = "vanilla-is";
  spec.n = 4;
  spec.alpha = 1.0;
  spec.mdp.discount = 0.99;
  spec.target.generator = "random";
  spec.num_iterations = 20000;
  const ResolvedExperiment ex = resolve(spec);
  const auto r = run_experiment(ex, spec, 1);
  EXPECT_EQ(r.failures.size() + r.runs.size(), 4u);
  for (const auto& [seed, msg] : r.failures) EXPECT_NE(msg.find("1e6"), std::string::npos);
}

TEST(TableParams, QPiLambdaRespectsMinimumRatio) {
  const Policy b = uniform_policy(3, 2);
  const Policy t = random_policy(3, 2, 4);
  const PresetParams p = table_params(PresetKind::kQPiLambda, {1.0, 1.0, 1.0}, t, b);
  EXPECT_EQ(p.lambda, min_ratio(t, b));
  EXPECT_EQ(table_params(PresetKind::kRetrace, {0.9, 1.0, 1.0}, t, b).lambda, 0.9);
}

TEST(Gnuplot, ReferencesCsv) {
  const std::string script = gnuplot_script("out/run.csv", "Retrace");
  EXPECT_NE(script.find("out/run.csv"), std::string::npos);
  EXPECT_NE(script.find("Retrace"), std::string::npos);
}

TEST(LinearSaExperiment, AutoCapRespectsCondition) {
  const auto p = random_certified_problem(3, 3, 0.5, 4);
  const auto r = run_linear_sa_experiment(p, std::nullopt, 2000, 4, 0, 0.5, 2.0, 100, 2);
  EXPECT_GE(r.t_alpha, 1);
  EXPECT_LE(r.alpha * r.t_alpha, theorem9_cap(p, r.certificate, 2.0) * (1 + 1e-12));
  EXPECT_TRUE(r.below_bound);
  EXPECT_EQ(io::linear_sa_csv(r.seeds, r.runs),
            io::linear_sa_csv(r.seeds, run_linear_sa_experiment(p, std::nullopt, 2000, 4, 0, 0.5,
                                                                2.0, 100, 1)
                                           .runs));
}

}  // namespace
