#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "offtd/bounds.hpp"
#include "offtd/contraction.hpp"
#include "offtd/linear_sa.hpp"
#include "offtd/mdp.hpp"
#include "offtd/operators.hpp"
#include "offtd/td.hpp"

namespace offtd {

struct MdpSource {
  std::optional<std::string> file;
  int num_states = 4;
  int num_actions = 2;
  int branching = 2;
  std::uint64_t seed = 0;
  double discount = 0.9;
};

/// generator: "uniform", "random" (Dirichlet rows from `seed`) or
/// "epsilon-greedy-of-target" (behavior only).
struct PolicySource {
  std::optional<std::string> file;
  std::string generator = "uniform";
  std::uint64_t seed = 0;
  double epsilon = 0.3;
};

struct ExperimentSpec {
  MdpSource mdp;
  PolicySource target{std::nullopt, "random", 1, 0.3};
  PolicySource behavior{std::nullopt, "uniform", 0, 0.3};
  std::string preset = "retrace";
  PresetParams params;
  int n = 1;
  std::optional<double> alpha;  ///< absent means "auto-cap"
  int num_seeds = 10;
  std::uint64_t base_seed = 0;
  std::int64_t num_iterations = 1000;  ///< 0 means 10 tau / (omega alpha / 2)
  std::int64_t record_stride = 1;
  std::string csv_path = "run.csv";
  std::string json_path = "run.json";
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

/// Everything an experiment needs, computed once from the spec.
struct ResolvedExperiment {
  TabularMdp mdp;
  Policy target;
  Policy behavior;
  RatioPair ratios;
  StationaryInfo stationary;
  MixingInfo mixing;
  OperatorMatrices matrices;
  QTable reference;  ///< Q^{pi,rho}
  double omega = 0.0;
  double alpha = 0.0;
  bool alpha_from_cap = false;
  int tau = 0;
  std::int64_t num_iterations = 0;
  BoundInputs bound_inputs;
  std::optional<BoundCurve> bound;  ///< absent when alpha exceeds the cap
};

TabularMdp load_mdp(const MdpSource& source);
Policy load_policy(const PolicySource& source, const TabularMdp& mdp, const Policy* target);

/// Throws the typed errors of the underlying modules (kNotErgodic,
/// kContractionViolated, kNoFeasibleStepsize, ...).
ResolvedExperiment resolve(const ExperimentSpec& spec);

/// ceil(10 tau / (omega alpha / 2))
std::int64_t envelope_horizon(int tau, double omega, double alpha);

struct AnalysisReport {
  ModulusResult modulus;
  ContractionCertificate certificate;
  VerificationReport verification;
  BiasReport bias;
  bool modulus_ok = false;  ///< substochastic with 1 - max row sum >= omega - 1e-9
  bool passed = false;
};

AnalysisReport analyze(const ResolvedExperiment& ex, const std::vector<double>& p_list,
                       int num_probes, std::uint64_t probe_seed);

struct AggregateResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::int64_t> iterations;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<double> bound;  ///< NaN before tau or without a bound
  std::vector<RunResult> runs;  ///< completed runs, in seed order
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  bool envelope_holds = false;       ///< mean <= bound for every recorded k >= tau
  bool final_below_variance = false;  ///< final mean <= variance term
  std::optional<std::int64_t> first_violation;
};

/// Worker count: OFFPOLICY_TD_THREADS if set, else hardware concurrency.
int default_threads();

/// Calls fn(i) for i < count on up to `threads` workers. The first exception
/// (lowest index) is rethrown after all workers finish.
void parallel_for_index(std::size_t count, int threads,
                        const std::function<void(std::size_t)>& fn);

/// Monte Carlo over spec.num_seeds seeds base_seed, base_seed + 1, ...
/// Diverged seeds are listed in `failures` and excluded from the means.
AggregateResult run_experiment(const ResolvedExperiment& ex, const ExperimentSpec& spec,
                               int threads);

/// `iteration,mean_error_sq_inf,std_error,bound`
std::string aggregate_csv(const AggregateResult& r);
nlohmann::json aggregate_to_json(const AggregateResult& r, const ResolvedExperiment& ex);

/// gnuplot script overlaying the empirical mean and the bound from an
/// aggregate CSV.
std::string gnuplot_script(const std::string& aggregate_csv_path, const std::string& title);

struct PresetComparisonRow {
  std::string preset;
  double omega = 0.0;
  double alpha = 0.0;
  double final_mean_error = 0.0;
  double variance_proxy = 0.0;
  std::size_t diverged = 0;
};

/// Runs all five presets on the spec's instance with the spec's alpha policy.
std::vector<PresetComparisonRow> compare_presets(const ExperimentSpec& spec, int threads);

/// Parameters used for each preset in comparison tables; Q^pi(lambda) takes
/// min(lambda, r_min) so its lambda <= r_min requirement holds.
PresetParams table_params(PresetKind kind, const PresetParams& base, const Policy& target,
                          const Policy& behavior);

std::vector<ComplexityReport> complexity_table(const ExperimentSpec& spec, double epsilon);

struct LinearSaExperiment {
  double alpha = 0.0;
  int t_alpha = 0;
  ContractionCertificate certificate;
  double p = 2.0;
  std::vector<std::uint64_t> seeds;
  std::vector<LinearSaRun> runs;
  std::vector<std::int64_t> steps;
  std::vector<double> mean_err_sq_mu_p;
  std::vector<double> bound;
  bool below_bound = false;
};

/// Runs num_seeds seeds at alpha (largest step under theorem9_cap when absent) and compares the
/// mean weighted error against theorem9_bound from x0 = 0.
LinearSaExperiment run_linear_sa_experiment(const LinearSaProblem& problem,
                                            std::optional<double> alpha, std::int64_t num_steps,
                                            int num_seeds, std::uint64_t base_seed, double theta,
                                            double p, std::int64_t record_stride, int threads);

}  // namespace offtd
