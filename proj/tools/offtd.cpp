// offtd: instance generation, certification, simulation and bound reports for
// n-step off-policy TD.

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "offtd/error.hpp"
#include "offtd/harness.hpp"
#include "offtd/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace offtd;

namespace {

enum ExitCode : int {
  kOk = 0,
  kPropertyFailed = 1,
  kLibraryError = 2,
};

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string output_dir = ".";
  bool force = false;

  fs::path out(const std::string& name) const {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(output_dir) / p;
  }
  int worker_count() const { return threads > 0 ? threads : default_threads(); }
};

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Relative file references inside a spec resolve against the spec's directory.
ExperimentSpec load_spec(const std::string& path) {
  ExperimentSpec spec = spec_from_json(io::read_json(path));
  const fs::path base = fs::path(path).parent_path();
  const auto rebase = [&](std::optional<std::string>& f) {
    if (f && fs::path(*f).is_relative()) f = (base / *f).string();
  };
  rebase(spec.mdp.file);
  rebase(spec.target.file);
  rebase(spec.behavior.file);
  return spec;
}

std::vector<double> parse_p_list(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) {
    if (s == "inf") {
      out.push_back(kInfinityNorm);
      continue;
    }
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidParameter, "bad p value '" + s + "'");
    }
    require(out.back() >= 1.0, ErrorCode::kInvalidParameter, "p must be >= 1");
  }
  return out;
}

std::optional<double> parse_alpha(const std::string& s) {
  if (s == "auto-cap") return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidParameter, "alpha must be a number or auto-cap, got '" + s + "'");
  }
}

PolicySource policy_from_args(const std::vector<std::string>& args, std::uint64_t seed) {
  PolicySource src;
  src.seed = seed;
  if (args.empty()) return src;
  src.generator = args[0];
  if (args.size() > 1) {
    try {
      src.epsilon = std::stod(args[1]);
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidParameter, "bad epsilon '" + args[1] + "'");
    }
  }
  return src;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string kind = "garnet";
  int states = 4;
  int actions = 2;
  int branching = 2;
  double discount = 0.9;
  std::vector<std::string> target{"random"};
  std::vector<std::string> behavior{"uniform"};
  std::string preset = "retrace";
  double lambda = 1.0, c_bar = 1.0, rho_bar = 1.0;
  int n = 1;
};

int cmd_generate(const Globals& g, const GenerateArgs& a) {
  require(a.kind == "garnet", ErrorCode::kUnknownTag, "unknown instance kind '" + a.kind + "'");
  const std::uint64_t seed = g.seed.value_or(0);
  MdpSource ms;
  ms.num_states = a.states;
  ms.num_actions = a.actions;
  ms.branching = a.branching;
  ms.seed = seed;
  ms.discount = a.discount;
  const TabularMdp mdp = load_mdp(ms);
  PolicySource ts = policy_from_args(a.target, seed + 1);
  require(ts.generator != "epsilon-greedy-of-target", ErrorCode::kInvalidParameter,
          "the target policy cannot be epsilon-greedy-of-target");
  PolicySource bs = policy_from_args(a.behavior, seed + 2);
  const Policy target = load_policy(ts, mdp, nullptr);
  const Policy behavior = load_policy(bs, mdp, &target);

  ExperimentSpec spec;
  spec.mdp.file = "mdp.json";
  spec.target = PolicySource{"target.json"};
  spec.behavior = PolicySource{"behavior.json"};
  spec.preset = a.preset;
  spec.params = {a.lambda, a.c_bar, a.rho_bar};
  spec.n = a.n;
  spec.base_seed = seed;

  io::write_json(g.out("mdp.json"), io::mdp_to_json(mdp), g.force);
  io::write_json(g.out("target.json"), io::policy_to_json(target), g.force);
  io::write_json(g.out("behavior.json"), io::policy_to_json(behavior), g.force);
  io::write_json(g.out("spec.json"), spec_to_json(spec), g.force);
  std::cout << "wrote " << g.out("spec.json").string() << " (Garnet(" << a.states << ","
            << a.actions << "), branching " << a.branching << ", seed " << seed << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string spec;
  std::vector<std::string> p{"1", "2", "4", "inf"};
  int probes = 1000;
  std::string output = "analysis.json";
};

json analysis_json(const ResolvedExperiment& ex, const AnalysisReport& r) {
  return {{"preset", to_string(ex.ratios.kind)},
          {"operator", io::operator_summary_to_json(ex.matrices)},
          {"stationary", io::stationary_to_json(ex.stationary)},
          {"modulus", io::modulus_to_json(r.modulus)},
          {"modulus_ok", r.modulus_ok},
          {"certificate", io::certificate_to_json(r.certificate, ex.omega)},
          {"verification", io::verification_to_json(r.verification)},
          {"bias", io::bias_to_json(r.bias)},
          {"passed", r.passed}};
}

void print_analysis(const ResolvedExperiment& ex, const AnalysisReport& r) {
  std::cout << "omega            " << fmt(ex.omega) << "\n"
            << "max row sum of A " << fmt(r.modulus.max_row_sum) << "\n"
            << "modulus check    " << verdict(r.modulus_ok) << "\n"
            << "mu_min           " << fmt(r.certificate.mu_min) << "\n"
            << "probe suite      " << verdict(r.verification.passed) << " ("
            << r.verification.violations.size() << " violations)\n"
            << "bias gap         " << fmt(r.bias.actual_gap) << " <= "
            << fmt(r.bias.fixed_point_gap_bound) << "\n";
}

int cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  const ResolvedExperiment ex = resolve(load_spec(a.spec));
  const AnalysisReport r = analyze(ex, parse_p_list(a.p), a.probes, g.seed.value_or(0));
  io::write_json(g.out(a.output), analysis_json(ex, r), g.force);
  print_analysis(ex, r);
  std::cout << "certification    " << verdict(r.passed) << "\n";
  return r.passed ? kOk : kPropertyFailed;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string spec;
  std::string preset;
  std::string alpha;
  std::optional<int> seeds;
  std::optional<std::int64_t> iterations;
  std::optional<std::int64_t> stride;
  bool skip_cert = false;
  bool gnuplot = false;
};

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

int cmd_run_all(const Globals& g, const ExperimentSpec& spec) {
  const auto rows = compare_presets(spec, g.worker_count());
  std::string csv = "preset,omega,alpha,final_mean_error_sq_inf,variance_proxy,diverged\n";
  json j = json::array();
  std::cout << "preset        omega        alpha        final_err    var_proxy    diverged\n";
  for (const auto& r : rows) {
    csv += r.preset + ',' + io::format_double(r.omega) + ',' + io::format_double(r.alpha) + ',' +
           io::format_double(r.final_mean_error) + ',' + io::format_double(r.variance_proxy) + ',' +
           std::to_string(r.diverged) + '\n';
    j.push_back({{"preset", r.preset},
                 {"omega", r.omega},
                 {"alpha", r.alpha},
                 {"final_mean_error_sq_inf", r.final_mean_error},
                 {"variance_proxy", r.variance_proxy},
                 {"diverged", r.diverged}});
    std::printf("%-13s %-12s %-12s %-12s %-12s %zu\n", r.preset.c_str(), fmt(r.omega).c_str(),
                fmt(r.alpha).c_str(), fmt(r.final_mean_error).c_str(),
                fmt(r.variance_proxy).c_str(), r.diverged);
  }
  io::write_text(g.out("presets.csv"), csv, g.force);
  io::write_json(g.out("presets.json"), j, g.force);
  bool ok = true;
  for (const auto& r : rows) ok = ok && r.diverged == 0;
  return ok ? kOk : kPropertyFailed;
}

int cmd_run(const Globals& g, const RunArgs& a) {
  ExperimentSpec spec = load_spec(a.spec);
  if (!a.preset.empty()) spec.preset = a.preset;
  if (!a.alpha.empty()) spec.alpha = parse_alpha(a.alpha);
  if (a.seeds) spec.num_seeds = *a.seeds;
  if (a.iterations) spec.num_iterations = *a.iterations;
  if (a.stride) spec.record_stride = *a.stride;
  if (g.seed) spec.base_seed = *g.seed;

  if (spec.preset == "all") return cmd_run_all(g, spec);

  const ResolvedExperiment ex = resolve(spec);
  if (ex.alpha_from_cap) {
    std::cout << "auto-cap: alpha = " << fmt(ex.alpha) << ", tau = " << ex.tau
              << ", cap = " << fmt(cap_rhs(ex.bound_inputs)) << "\n";
  }
  if (!a.skip_cert) {
    const AnalysisReport r = analyze(ex, {1.0, 2.0, 4.0, kInfinityNorm}, 1000, spec.base_seed);
    if (!r.passed) {
      print_analysis(ex, r);
      std::cerr << "certification failed; rerun with --skip-cert to simulate anyway\n";
      return kPropertyFailed;
    }
  }

  const AggregateResult agg = run_experiment(ex, spec, g.worker_count());
  for (const auto& [seed, msg] : agg.failures) std::cerr << "seed " << seed << ": " << msg << "\n";

  const fs::path csv_path = g.out(spec.csv_path);
  io::write_text(csv_path, aggregate_csv(agg), g.force);
  io::write_text(with_suffix(csv_path, ".seeds.csv"), io::learner_csv(agg.seeds, agg.runs),
                 g.force);
  json summary = aggregate_to_json(agg, ex);
  summary["spec"] = spec_to_json(spec);
  io::write_json(g.out(spec.json_path), summary, g.force);
  if (a.gnuplot) {
    io::write_text(with_suffix(csv_path, ".gp"),
                   gnuplot_script(csv_path.filename().string(), spec.preset), g.force);
  }

  std::cout << "seeds completed  " << agg.runs.size() << "/" << spec.num_seeds << "\n"
            << "iterations       " << ex.num_iterations << "\n"
            << "final mean err^2 " << (agg.mean.empty() ? "n/a" : fmt(agg.mean.back())) << "\n";
  bool ok = agg.failures.empty();
  if (ex.bound) {
    std::cout << "envelope k>=tau  " << verdict(agg.envelope_holds);
    if (agg.first_violation) std::cout << " (first violation at k = " << *agg.first_violation << ")";
    std::cout << "\n";
    ok = ok && agg.envelope_holds;
  } else {
    std::cout << "envelope k>=tau  n/a (alpha exceeds the step-size cap)\n";
  }
  return ok ? kOk : kPropertyFailed;
}

// ---------------------------------------------------------------- bound

struct BoundArgs {
  std::string spec;
  std::string alpha;
  std::int64_t k_max = 0;
  int points = 200;
  std::string form = "sup";
  std::string output = "bound.json";
};

int cmd_bound(const Globals& g, const BoundArgs& a) {
  ExperimentSpec spec = load_spec(a.spec);
  if (!a.alpha.empty()) spec.alpha = parse_alpha(a.alpha);
  if (spec.num_iterations == 0) spec.num_iterations = 1;
  ResolvedExperiment ex = resolve(spec);

  BoundInputs in = ex.bound_inputs;
  BoundCurve curve;
  if (a.form == "sup") {
    curve = bound_curve(in);
  } else if (a.form == "weighted") {
    const ContractionCertificate cert = build_weights(ex.matrices.A, ex.omega, in.theta);
    in.mu_min = cert.mu_min;
    in.p = theorem_p(cert.mu_min);
    in.q0_mu_p = 0.0;
    in.qref_mu_p = weighted_p_norm(ex.reference, cert.mu, in.p);
    in.q0_minus_ref_mu_p = in.qref_mu_p;
    curve = weighted_bound_in_sup_norm(in);
  } else {
    fail(ErrorCode::kUnknownTag, "unknown bound form '" + a.form + "' (sup|weighted)");
  }

  const std::int64_t k_max =
      a.k_max > 0 ? a.k_max : envelope_horizon(ex.tau, ex.omega, ex.alpha);
  std::vector<std::int64_t> ks;
  const auto first = static_cast<std::int64_t>(curve.tau);
  const int pts = std::max(a.points, 2);
  for (int i = 0; i < pts; ++i) {
    const auto k = first + static_cast<std::int64_t>(std::llround(
                               static_cast<double>(k_max - first) * i / (pts - 1)));
    if (ks.empty() || k > ks.back()) ks.push_back(k);
  }
  json j = io::bound_to_json(curve, ks);
  j["alpha"] = ex.alpha;
  j["alpha_from_cap"] = ex.alpha_from_cap;
  j["cap"] = cap_rhs(ex.bound_inputs);
  j["omega"] = ex.omega;
  j["lipschitz"] = lipschitz_factor(ex.bound_inputs);
  j["form"] = a.form;
  io::write_json(g.out(a.output), j, g.force);
  std::cout << "alpha " << fmt(ex.alpha) << "  tau " << ex.tau << "  zeta1 " << fmt(curve.zeta1)
            << "  zeta2 " << fmt(curve.zeta2) << "  rate " << fmt(curve.geometric_rate)
            << "  variance " << fmt(curve.variance_term) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- complexity

struct ComplexityArgs {
  std::string spec;
  double epsilon = 0.1;
  std::string output = "complexity.json";
};

int cmd_complexity(const Globals& g, const ComplexityArgs& a) {
  const auto rows = complexity_table(load_spec(a.spec), a.epsilon);
  json j = json::array();
  std::string csv = "tag,epsilon,omega,t1,t2,t3,t_n,total,specialized_total,prior_work_total,improvement_factor\n";
  std::cout << "preset        T1           T2           T3           n    total        specialized\n";
  for (const auto& r : rows) {
    j.push_back(io::complexity_to_json(r));
    csv += r.tag + ',' + io::format_double(r.epsilon) + ',' + io::format_double(r.omega) + ',' +
           io::format_double(r.t1) + ',' + io::format_double(r.t2) + ',' + io::format_double(r.t3) +
           ',' + io::format_double(r.t_n) + ',' + io::format_double(r.total) + ',' +
           io::format_double(r.specialized_total) + ',' +
           (r.prior_work_total ? io::format_double(*r.prior_work_total) : "") + ',' +
           (r.improvement_factor ? io::format_double(*r.improvement_factor) : "") + '\n';
    std::printf("%-13s %-12s %-12s %-12s %-4g %-12s %s\n", r.tag.c_str(), fmt(r.t1).c_str(),
                fmt(r.t2).c_str(), fmt(r.t3).c_str(), r.t_n, fmt(r.total).c_str(),
                fmt(r.specialized_total).c_str());
    if (r.prior_work_total) {
      std::printf("%-13s prior work %s, ratio %s\n", "", fmt(*r.prior_work_total).c_str(),
                  fmt(*r.improvement_factor).c_str());
    }
  }
  io::write_json(g.out(a.output), j, g.force);
  io::write_text(g.out("complexity.csv"), csv, g.force);
  return kOk;
}

// ---------------------------------------------------------------- linear-sa

struct LinearSaArgs {
  std::string problem;
  int dim = 4;
  int noise = 5;
  double modulus = 0.5;
  std::string alpha;
  std::int64_t steps = 20000;
  int seeds = 20;
  double theta = 0.5;
  double p = 2.0;
  std::int64_t stride = 100;
  std::string csv = "linear_sa.csv";
  std::string output = "linear_sa.json";
};

int cmd_linear_sa(const Globals& g, const LinearSaArgs& a) {
  const std::uint64_t seed = g.seed.value_or(0);
  const LinearSaProblem problem =
      a.problem.empty() ? random_certified_problem(a.dim, a.noise, a.modulus, seed)
                        : io::linear_sa_problem_from_json(io::read_json(a.problem));
  const std::optional<double> alpha = a.alpha.empty() ? std::nullopt : parse_alpha(a.alpha);
  const LinearSaExperiment ex = run_linear_sa_experiment(problem, alpha, a.steps, a.seeds, seed,
                                                         a.theta, a.p, a.stride, g.worker_count());

  std::string csv = "step,mean_err_sq_mu_p,bound\n";
  for (std::size_t i = 0; i < ex.steps.size(); ++i) {
    csv += std::to_string(ex.steps[i]) + ',' + io::format_double(ex.mean_err_sq_mu_p[i]) + ',' +
           io::format_double(ex.bound[i]) + '\n';
  }
  io::write_text(g.out(a.csv), csv, g.force);
  io::write_text(with_suffix(g.out(a.csv), ".seeds.csv"), io::linear_sa_csv(ex.seeds, ex.runs),
                 g.force);
  json j = {{"alpha", ex.alpha},
            {"t_alpha", ex.t_alpha},
            {"p", ex.p},
            {"omega_prime", problem.omega_prime},
            {"A_max", problem.A_max},
            {"b_max", problem.b_max},
            {"certificate", io::certificate_to_json(ex.certificate, problem.omega_prime)},
            {"below_bound", ex.below_bound},
            {"problem", io::linear_sa_problem_to_json(problem)}};
  io::write_json(g.out(a.output), j, g.force);
  std::cout << "omega' " << fmt(problem.omega_prime) << "  alpha " << fmt(ex.alpha) << "  t_alpha "
            << ex.t_alpha << "\n"
            << "mean error below bound for k >= t_alpha: " << verdict(ex.below_bound) << "\n";
  return ex.below_bound ? kOk : kPropertyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"n-step off-policy TD: certification, simulation and finite-sample bounds"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed (instance, probes or first Monte Carlo seed)");
  app.add_option("--threads", g.threads,
                 "Worker threads (default: OFFPOLICY_TD_THREADS or hardware concurrency)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--output-dir", g.output_dir, "Directory for output files");
  app.add_flag("--force", g.force, "Overwrite existing output files");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Write a Garnet MDP, policies and a spec file");
  c_gen->add_option("kind", gen.kind, "Instance kind (garnet)")->required();
  c_gen->add_option("states", gen.states, "Number of states")->required()->check(CLI::PositiveNumber);
  c_gen->add_option("actions", gen.actions, "Number of actions")->required()->check(CLI::PositiveNumber);
  c_gen->add_option("--branching", gen.branching, "Successors per state-action pair");
  c_gen->add_option("--discount", gen.discount, "Discount factor");
  c_gen->add_option("--target", gen.target, "Target policy generator: uniform | random")
      ->expected(1, 2);
  c_gen->add_option("--behavior", gen.behavior,
                    "Behavior policy generator: uniform | random | epsilon-greedy-of-target EPS")
      ->expected(1, 2);
  c_gen->add_option("--preset", gen.preset, "Preset written into the spec");
  c_gen->add_option("--lambda", gen.lambda);
  c_gen->add_option("--c-bar", gen.c_bar);
  c_gen->add_option("--rho-bar", gen.rho_bar);
  c_gen->add_option("-n", gen.n, "Lookahead steps")->check(CLI::PositiveNumber);

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Certify the contraction of the TD operator");
  c_an->add_option("spec", an.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  c_an->add_option("--p", an.p, "Norm exponents to probe (numbers or inf)")->delimiter(',');
  c_an->add_option("--probes", an.probes, "Random probes per exponent");
  c_an->add_option("-o,--output", an.output);

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "Monte Carlo simulation with the bound overlay");
  c_run->add_option("spec", run.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  c_run->add_option("--preset", run.preset, "Preset override, or 'all' for a comparison table");
  c_run->add_option("--alpha", run.alpha, "Step size or auto-cap");
  c_run->add_option("--seeds", run.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  c_run->add_option("--iterations", run.iterations, "Iterations per seed (0: envelope horizon)");
  c_run->add_option("--stride", run.stride, "Record every k-th iteration")->check(CLI::PositiveNumber);
  c_run->add_flag("--skip-cert", run.skip_cert, "Simulate without certifying first");
  c_run->add_flag("--gnuplot", run.gnuplot, "Also write a gnuplot script");

  BoundArgs bd;
  auto* c_bd = app.add_subcommand("bound", "Evaluate the finite-sample envelope");
  c_bd->add_option("spec", bd.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  c_bd->add_option("--alpha", bd.alpha, "Step size or auto-cap");
  c_bd->add_option("--k-max", bd.k_max, "Last iteration (default: envelope horizon)");
  c_bd->add_option("--points", bd.points, "Curve samples");
  c_bd->add_option("--form", bd.form, "sup | weighted");
  c_bd->add_option("-o,--output", bd.output);

  ComplexityArgs cx;
  auto* c_cx = app.add_subcommand("complexity", "Sample-complexity decomposition per preset");
  c_cx->add_option("spec", cx.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
  c_cx->add_option("--epsilon", cx.epsilon, "Target accuracy")->check(CLI::PositiveNumber);
  c_cx->add_option("-o,--output", cx.output);

  LinearSaArgs ls;
  auto* c_ls = app.add_subcommand("linear-sa", "Linear stochastic approximation against its bound");
  c_ls->add_option("problem", ls.problem, "Problem JSON (default: random certified problem)");
  c_ls->add_option("--dim", ls.dim);
  c_ls->add_option("--noise", ls.noise, "Noise chain size");
  c_ls->add_option("--modulus", ls.modulus);
  c_ls->add_option("--alpha", ls.alpha, "Step size or auto-cap");
  c_ls->add_option("--steps", ls.steps);
  c_ls->add_option("--seeds", ls.seeds)->check(CLI::PositiveNumber);
  c_ls->add_option("--theta", ls.theta);
  c_ls->add_option("--p", ls.p);
  c_ls->add_option("--stride", ls.stride)->check(CLI::PositiveNumber);
  c_ls->add_option("--csv", ls.csv);
  c_ls->add_option("-o,--output", ls.output);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_gen) return cmd_generate(g, gen);
    if (*c_an) return cmd_analyze(g, an);
    if (*c_run) return cmd_run(g, run);
    if (*c_bd) return cmd_bound(g, bd);
    if (*c_cx) return cmd_complexity(g, cx);
    if (*c_ls) return cmd_linear_sa(g, ls);
  } catch (const offtd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLibraryError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLibraryError;
  }
  return kOk;
}
