#include "offtd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include "offtd/error.hpp"
#include "offtd/io.hpp"

namespace offtd {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::int64_t kProxyLength = 100000;

constexpr PresetKind kAllPresets[] = {PresetKind::kVanillaIS, PresetKind::kQPiLambda,
                                      PresetKind::kTreeBackup, PresetKind::kRetrace,
                                      PresetKind::kQTrace};

json policy_source_to_json(const PolicySource& p) {
  json j = {{"generator", p.generator}, {"seed", p.seed}, {"epsilon", p.epsilon}};
  if (p.file) j["file"] = *p.file;
  return j;
}

PolicySource policy_source_from_json(const json& j) {
  PolicySource p;
  if (j.contains("file")) p.file = j.at("file").get<std::string>();
  p.generator = j.value("generator", p.generator);
  p.seed = j.value("seed", p.seed);
  p.epsilon = j.value("epsilon", p.epsilon);
  return p;
}

}  // namespace

json spec_to_json(const ExperimentSpec& spec) {
  json mdp = {{"num_states", spec.mdp.num_states},
              {"num_actions", spec.mdp.num_actions},
              {"branching", spec.mdp.branching},
              {"seed", spec.mdp.seed},
              {"discount", spec.mdp.discount}};
  if (spec.mdp.file) mdp["file"] = *spec.mdp.file;
  json j = {{"mdp", std::move(mdp)},
            {"target", policy_source_to_json(spec.target)},
            {"behavior", policy_source_to_json(spec.behavior)},
            {"preset", spec.preset},
            {"params",
             {{"lambda", spec.params.lambda},
              {"c_bar", spec.params.c_bar},
              {"rho_bar", spec.params.rho_bar}}},
            {"n", spec.n},
            {"alpha", spec.alpha ? json(*spec.alpha) : json("auto-cap")},
            {"num_seeds", spec.num_seeds},
            {"base_seed", spec.base_seed},
            {"num_iterations", spec.num_iterations},
            {"record_stride", spec.record_stride},
            {"csv_path", spec.csv_path},
            {"json_path", spec.json_path}};
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  try {
    ExperimentSpec spec;
    if (j.contains("mdp")) {
      const json& m = j.at("mdp");
      if (m.contains("file")) spec.mdp.file = m.at("file").get<std::string>();
      spec.mdp.num_states = m.value("num_states", spec.mdp.num_states);
      spec.mdp.num_actions = m.value("num_actions", spec.mdp.num_actions);
      spec.mdp.branching = m.value("branching", spec.mdp.branching);
      spec.mdp.seed = m.value("seed", spec.mdp.seed);
      spec.mdp.discount = m.value("discount", spec.mdp.discount);
    }
    if (j.contains("target")) spec.target = policy_source_from_json(j.at("target"));
    if (j.contains("behavior")) spec.behavior = policy_source_from_json(j.at("behavior"));
    spec.preset = j.value("preset", spec.preset);
    if (j.contains("params")) {
      const json& p = j.at("params");
      spec.params.lambda = p.value("lambda", spec.params.lambda);
      spec.params.c_bar = p.value("c_bar", spec.params.c_bar);
      spec.params.rho_bar = p.value("rho_bar", spec.params.rho_bar);
    }
    spec.n = j.value("n", spec.n);
    if (j.contains("alpha")) {
      const json& a = j.at("alpha");
      if (a.is_string()) {
        require(a.get<std::string>() == "auto-cap", ErrorCode::kUnknownTag,
                "alpha must be a number or \"auto-cap\"");
        spec.alpha.reset();
      } else {
        spec.alpha = a.get<double>();
      }
    }
    spec.num_seeds = j.value("num_seeds", spec.num_seeds);
    spec.base_seed = j.value("base_seed", spec.base_seed);
    spec.num_iterations = j.value("num_iterations", spec.num_iterations);
    spec.record_stride = j.value("record_stride", spec.record_stride);
    spec.csv_path = j.value("csv_path", spec.csv_path);
    spec.json_path = j.value("json_path", spec.json_path);
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed experiment spec: ") + e.what());
  }
}

TabularMdp load_mdp(const MdpSource& source) {
  TabularMdp mdp = source.file ? io::mdp_from_json(io::read_json(*source.file))
                               : garnet(source.num_states, source.num_actions, source.branching,
                                        source.seed, source.discount);
  expect_valid(validate_mdp(mdp), "MDP");
  return mdp;
}

Policy load_policy(const PolicySource& source, const TabularMdp& mdp, const Policy* target) {
  Policy pol;
  if (source.file) {
    pol = io::policy_from_json(io::read_json(*source.file));
  } else if (source.generator == "uniform") {
    pol = uniform_policy(mdp.num_states, mdp.num_actions);
  } else if (source.generator == "random") {
    pol = random_policy(mdp.num_states, mdp.num_actions, source.seed);
  } else if (source.generator == "epsilon-greedy-of-target") {
    require(target != nullptr, ErrorCode::kInvalidParameter,
            "epsilon-greedy-of-target needs a target policy");
    pol = epsilon_greedy_of(*target, source.epsilon);
  } else {
    fail(ErrorCode::kUnknownTag, "unknown policy generator '" + source.generator + "'");
  }
  expect_valid(validate_policy(mdp, pol), "policy");
  return pol;
}

std::int64_t envelope_horizon(int tau, double omega, double alpha) {
  require(omega > 0.0 && alpha > 0.0, ErrorCode::kInvalidParameter,
          "omega and alpha must be positive");
  return static_cast<std::int64_t>(std::ceil(10.0 * tau / (omega * alpha / 2.0)));
}

ResolvedExperiment resolve(const ExperimentSpec& spec) {
  require(spec.n >= 1, ErrorCode::kInvalidParameter, "n must be >= 1");
  require(spec.num_seeds >= 1, ErrorCode::kInvalidParameter, "num_seeds must be >= 1");
  require(spec.record_stride >= 1, ErrorCode::kInvalidParameter, "record_stride must be >= 1");
  require(spec.num_iterations >= 0, ErrorCode::kInvalidParameter,
          "num_iterations must be nonnegative");

  ResolvedExperiment ex;
  ex.mdp = load_mdp(spec.mdp);
  ex.target = load_policy(spec.target, ex.mdp, nullptr);
  ex.behavior = load_policy(spec.behavior, ex.mdp, &ex.target);
  ex.ratios = preset(preset_kind_from_string(spec.preset), spec.params, ex.mdp, ex.target,
                     ex.behavior);
  ex.stationary = stationary(ex.mdp, ex.behavior);
  ex.mixing = mixing(ex.mdp, ex.behavior);
  ex.matrices = build_matrices(ex.mdp, ex.behavior, ex.ratios, spec.n, ex.stationary);
  ex.reference = solve_Q_pi_rho(ex.mdp, ex.behavior, ex.ratios);
  ex.omega = omega_formula(ex.matrices);
  require(ex.omega > 0.0 && ex.omega < 1.0, ErrorCode::kContractionViolated,
          "omega = " + std::to_string(ex.omega) + " is outside (0,1)");

  BoundInputs& in = ex.bound_inputs;
  in.omega = ex.omega;
  in.c_max = ex.ratios.c_max;
  in.rho_max = ex.ratios.rho_max;
  in.n = spec.n;
  in.gamma = ex.mdp.discount;
  in.sa_count = ex.mdp.sa_count();
  in.q0_inf = 0.0;
  in.qref_inf = inf_norm(ex.reference);
  in.q0_minus_ref_inf = in.qref_inf;
  if (ex.ratios.kind == PresetKind::kVanillaIS)
    in.lipschitz_override = preset_lipschitz_factor(ex.ratios, in.gamma, in.n);

  if (spec.alpha) {
    require(*spec.alpha > 0.0, ErrorCode::kInvalidParameter, "alpha must be positive");
    ex.alpha = *spec.alpha;
    ex.tau = ex.mixing.tau(ex.alpha, spec.n);
  } else {
    const StepsizeCap cap = stepsize_cap(in, ex.mixing);
    ex.alpha = cap.alpha;
    ex.tau = cap.tau;
    ex.alpha_from_cap = true;
  }
  in.alpha = ex.alpha;
  in.tau = ex.tau;
  ex.num_iterations = spec.num_iterations > 0 ? spec.num_iterations
                                              : envelope_horizon(ex.tau, ex.omega, ex.alpha);
  if (ex.alpha * ex.tau <= cap_rhs(in) * (1.0 + 1e-12)) ex.bound = bound_curve(in);
  return ex;
}

AnalysisReport analyze(const ResolvedExperiment& ex, const std::vector<double>& p_list,
                       int num_probes, std::uint64_t probe_seed) {
  AnalysisReport r;
  r.modulus = certify_modulus(ex.matrices);
  r.modulus_ok = r.modulus.is_substochastic && r.modulus.modulus_beta >= ex.omega - 1e-9;
  r.certificate = build_weights(ex.matrices.A, ex.omega, 0.5);
  r.certificate.p_checked = p_list;
  r.verification = verify_contraction(ex.matrices.A, r.certificate, p_list, num_probes, probe_seed);
  r.bias = bias_report(ex.mdp, ex.target, ex.behavior, ex.ratios);
  r.passed = r.modulus_ok && r.verification.passed;
  return r;
}

int default_threads() {
  if (const char* env = std::getenv("OFFPOLICY_TD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, ErrorCode::kInvalidParameter,
            std::string("OFFPOLICY_TD_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for_index(std::size_t count, int threads,
                        const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(count)));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

AggregateResult run_experiment(const ResolvedExperiment& ex, const ExperimentSpec& spec,
                               int threads) {
  const auto count = static_cast<std::size_t>(spec.num_seeds);
  std::vector<std::optional<RunResult>> results(count);
  std::vector<std::string> failure(count);

  parallel_for_index(count, threads, [&](std::size_t i) {
    LearnerConfig cfg;
    cfg.n = spec.n;
    cfg.step_size = ex.alpha;
    cfg.num_iterations = ex.num_iterations;
    cfg.ratios = ex.ratios;
    cfg.seed = spec.base_seed + i;
    try {
      results[i] = run_learner(ex.mdp, ex.behavior, cfg, ex.reference, spec.record_stride);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDiverged) throw;
      failure[i] = e.what();
    }
  });

  AggregateResult agg;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = spec.base_seed + i;
    if (results[i]) {
      agg.seeds.push_back(seed);
      agg.runs.push_back(std::move(*results[i]));
    } else {
      agg.failures.emplace_back(seed, failure[i]);
    }
  }
  if (agg.runs.empty()) return agg;

  agg.iterations = agg.runs.front().iterations;
  const std::size_t points = agg.iterations.size();
  const double m = static_cast<double>(agg.runs.size());
  agg.mean.assign(points, 0.0);
  agg.std_error.assign(points, 0.0);
  agg.bound.assign(points, kNaN);
  for (std::size_t t = 0; t < points; ++t) {
    double sum = 0.0;
    for (const auto& run : agg.runs) sum += run.error_trajectory[t];
    const double mean = sum / m;
    double ss = 0.0;
    for (const auto& run : agg.runs) ss += (run.error_trajectory[t] - mean) * (run.error_trajectory[t] - mean);
    agg.mean[t] = mean;
    agg.std_error[t] = agg.runs.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
  }

  if (ex.bound) {
    agg.envelope_holds = agg.failures.empty();
    for (std::size_t t = 0; t < points; ++t) {
      const auto k = agg.iterations[t];
      if (k < ex.tau) continue;
      agg.bound[t] = ex.bound->value(static_cast<double>(k));
      if (!(agg.mean[t] <= agg.bound[t])) {
        agg.envelope_holds = false;
        if (!agg.first_violation) agg.first_violation = k;
      }
    }
    agg.final_below_variance = agg.failures.empty() && agg.mean.back() <= ex.bound->variance_term;
  }
  return agg;
}

std::string aggregate_csv(const AggregateResult& r) {
  std::string out = "iteration,mean_error_sq_inf,std_error,bound\n";
  for (std::size_t t = 0; t < r.iterations.size(); ++t) {
    out += std::to_string(r.iterations[t]) + ',' + io::format_double(r.mean[t]) + ',' +
           io::format_double(r.std_error[t]) + ',' + io::format_double(r.bound[t]) + '\n';
  }
  return out;
}

json aggregate_to_json(const AggregateResult& r, const ResolvedExperiment& ex) {
  json failures = json::array();
  for (const auto& [seed, msg] : r.failures) failures.push_back({{"seed", seed}, {"error", msg}});
  json j = {{"omega", ex.omega},
            {"alpha", ex.alpha},
            {"alpha_from_cap", ex.alpha_from_cap},
            {"tau", ex.tau},
            {"num_iterations", ex.num_iterations},
            {"completed_seeds", r.runs.size()},
            {"failures", std::move(failures)},
            {"envelope_holds", r.envelope_holds},
            {"final_below_variance", r.final_below_variance},
            {"final_mean", r.mean.empty() ? json(nullptr) : json(r.mean.back())}};
  if (r.first_violation) j["first_violation"] = *r.first_violation;
  if (ex.bound) {
    std::vector<std::int64_t> ks;
    for (auto k : r.iterations)
      if (k >= ex.tau) ks.push_back(k);
    j["bound"] = io::bound_to_json(*ex.bound, ks);
  } else {
    j["bound"] = nullptr;
  }
  return j;
}

std::string gnuplot_script(const std::string& aggregate_csv_path, const std::string& title) {
  return "set datafile separator ','\n"
         "set logscale y\n"
         "set key top right\n"
         "set xlabel 'iteration'\n"
         "set ylabel 'squared sup-norm error'\n"
         "set title '" + title + "'\n"
         "plot '" + aggregate_csv_path + "' every ::1 using 1:2 with lines title 'empirical mean', \\\n"
         "     '' every ::1 using 1:4 with lines title 'bound'\n";
}

PresetParams table_params(PresetKind kind, const PresetParams& base, const Policy& target,
                          const Policy& behavior) {
  PresetParams p = base;
  if (kind == PresetKind::kQPiLambda) p.lambda = std::min(base.lambda, min_ratio(target, behavior));
  return p;
}

std::vector<PresetComparisonRow> compare_presets(const ExperimentSpec& spec, int threads) {
  std::vector<PresetComparisonRow> rows;
  const TabularMdp mdp = load_mdp(spec.mdp);
  const Policy target = load_policy(spec.target, mdp, nullptr);
  const Policy behavior = load_policy(spec.behavior, mdp, &target);
  const Trajectory proxy_path = sample_trajectory(mdp, behavior, kProxyLength, std::nullopt,
                                                  spec.base_seed);
  for (PresetKind kind : kAllPresets) {
    ExperimentSpec s = spec;
    s.preset = to_string(kind);
    s.params = table_params(kind, spec.params, target, behavior);
    const ResolvedExperiment ex = resolve(s);
    const AggregateResult agg = run_experiment(ex, s, threads);
    PresetComparisonRow row;
    row.preset = s.preset;
    row.omega = ex.omega;
    row.alpha = ex.alpha;
    row.final_mean_error = agg.mean.empty() ? kNaN : agg.mean.back();
    row.diverged = agg.failures.size();
    row.variance_proxy = variance_proxy(mdp, ex.ratios, s.n, proxy_path, ex.reference);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ComplexityReport> complexity_table(const ExperimentSpec& spec, double epsilon) {
  const TabularMdp mdp = load_mdp(spec.mdp);
  const Policy target = load_policy(spec.target, mdp, nullptr);
  const Policy behavior = load_policy(spec.behavior, mdp, &target);
  const StationaryInfo info = stationary(mdp, behavior);
  std::vector<ComplexityReport> out;
  for (PresetKind kind : kAllPresets) {
    const RatioPair ratios =
        preset(kind, table_params(kind, spec.params, target, behavior), mdp, target, behavior);
    const OperatorMatrices m = build_matrices(mdp, behavior, ratios, spec.n, info);
    out.push_back(sample_complexity(complexity_inputs(m, ratios, target, behavior), epsilon));
  }
  return out;
}

LinearSaExperiment run_linear_sa_experiment(const LinearSaProblem& problem,
                                            std::optional<double> alpha, std::int64_t num_steps,
                                            int num_seeds, std::uint64_t base_seed, double theta,
                                            double p, std::int64_t record_stride, int threads) {
  require(num_seeds >= 1, ErrorCode::kInvalidParameter, "num_seeds must be >= 1");
  LinearSaExperiment ex;
  ex.p = p;
  ex.certificate = build_weights(problem.A_bar, problem.omega_prime, theta);
  ex.certificate.p_checked = {p};
  const MixingInfo mix = noise_mixing(problem);
  if (alpha) {
    ex.alpha = *alpha;
    ex.t_alpha = sa_mixing_time(mix, ex.alpha);
  } else {
    const StepsizeCap cap = largest_stepsize(theorem9_cap(problem, ex.certificate, p), mix, 0, 1);
    ex.alpha = cap.alpha;
    ex.t_alpha = cap.tau;
  }

  const auto count = static_cast<std::size_t>(num_seeds);
  ex.runs.resize(count);
  for (std::size_t i = 0; i < count; ++i) ex.seeds.push_back(base_seed + i);
  LinearSaOptions opts;
  opts.record_stride = record_stride;
  opts.mu = ex.certificate.mu;
  opts.p = p;
  parallel_for_index(count, threads, [&](std::size_t i) {
    ex.runs[i] = run_linear_sa(problem, ex.alpha, num_steps, ex.seeds[i], opts);
  });

  ex.steps = ex.runs.front().steps;
  ex.mean_err_sq_mu_p.assign(ex.steps.size(), 0.0);
  for (const auto& run : ex.runs)
    for (std::size_t t = 0; t < ex.steps.size(); ++t) ex.mean_err_sq_mu_p[t] += run.err_sq_mu_p[t];
  for (double& v : ex.mean_err_sq_mu_p) v /= static_cast<double>(count);

  const BoundCurve curve = theorem9_bound(problem, ex.alpha, ex.t_alpha, ex.certificate, p,
                                          Vector::Zero(problem.dim()));
  ex.bound.assign(ex.steps.size(), kNaN);
  ex.below_bound = true;
  for (std::size_t t = 0; t < ex.steps.size(); ++t) {
    if (ex.steps[t] < ex.t_alpha) continue;
    ex.bound[t] = curve.value(static_cast<double>(ex.steps[t]));
    if (!(ex.mean_err_sq_mu_p[t] <= ex.bound[t])) ex.below_bound = false;
  }
  return ex;
}

}  // namespace offtd
