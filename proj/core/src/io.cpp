#include "offtd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "offtd/error.hpp"

namespace offtd::io {
namespace {

template <typename F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, "malformed " + what + ": " + e.what());
  }
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    fail(ErrorCode::kIo, std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  return guarded("matrix", [&] {
    require(j.is_array(), ErrorCode::kIo, "matrix must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      require(j[r].is_array() && static_cast<Eigen::Index>(j[r].size()) == cols, ErrorCode::kIo,
              "matrix rows have unequal lengths");
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
  });
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  return guarded("vector", [&] {
    require(j.is_array(), ErrorCode::kIo, "vector must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
  });
}

json mdp_to_json(const TabularMdp& mdp) {
  json transitions = json::array();
  for (const auto& p : mdp.transitions) transitions.push_back(matrix_to_json(p));
  return {{"num_states", mdp.num_states},
          {"num_actions", mdp.num_actions},
          {"discount", mdp.discount},
          {"transitions", std::move(transitions)},
          {"rewards", matrix_to_json(mdp.rewards)}};
}

TabularMdp mdp_from_json(const json& j) {
  return guarded("MDP", [&] {
    TabularMdp mdp;
    mdp.num_states = field(j, "num_states").get<int>();
    mdp.num_actions = field(j, "num_actions").get<int>();
    mdp.discount = field(j, "discount").get<double>();
    const json& tr = field(j, "transitions");
    require(tr.is_array() && static_cast<int>(tr.size()) == mdp.num_actions, ErrorCode::kIo,
            "transitions must have one matrix per action");
    for (const auto& p : tr) mdp.transitions.push_back(matrix_from_json(p));
    mdp.rewards = matrix_from_json(field(j, "rewards"));
    return mdp;
  });
}

json policy_to_json(const Policy& policy) { return {{"probs", matrix_to_json(policy.probs)}}; }

Policy policy_from_json(const json& j) { return Policy{matrix_from_json(field(j, "probs"))}; }

json qtable_to_json(const TabularMdp& mdp, const QTable& q) {
  require(q.size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
          "Q table size does not match the MDP");
  json rows = json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    json row = json::array();
    for (int a = 0; a < mdp.num_actions; ++a) row.push_back(q(mdp.index(s, a)));
    rows.push_back(std::move(row));
  }
  return {{"values", std::move(rows)}};
}

QTable qtable_from_json(const TabularMdp& mdp, const json& j) {
  const Matrix m = matrix_from_json(field(j, "values"));
  require(m.rows() == mdp.num_states && m.cols() == mdp.num_actions, ErrorCode::kDimensionMismatch,
          "Q table shape does not match the MDP");
  QTable q(mdp.sa_count());
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) q(mdp.index(s, a)) = m(s, a);
  return q;
}

json bias_to_json(const BiasReport& r) {
  return {{"fixed_point_gap_bound", r.fixed_point_gap_bound},
          {"fixed_point_norm_bound", r.fixed_point_norm_bound},
          {"actual_gap", r.actual_gap},
          {"actual_norm", r.actual_norm}};
}

json modulus_to_json(const ModulusResult& r) {
  json j = {{"is_substochastic", r.is_substochastic},
            {"modulus_beta", r.modulus_beta},
            {"max_row_sum", r.max_row_sum},
            {"min_entry", r.min_entry}};
  if (r.omega_formula) j["omega_formula"] = *r.omega_formula;
  return j;
}

json certificate_to_json(const ContractionCertificate& c, double omega) {
  return {{"theta", c.theta},
          {"beta", c.beta},
          {"mu", vector_to_json(c.mu)},
          {"mu_min", c.mu_min},
          {"mu_lower_bound", c.mu_lower_bound()},
          {"omega", omega},
          {"p_checked", c.p_checked},
          {"uniform_factor", c.uniform_factor()},
          {"used_irreducible_shortcut", c.used_irreducible_shortcut}};
}

json verification_to_json(const VerificationReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations) {
    violations.push_back({{"p", std::isinf(v.p) ? json("inf") : json(v.p)},
                          {"probe", v.probe},
                          {"ratio", v.ratio},
                          {"allowed", v.allowed}});
  }
  return {{"passed", r.passed},
          {"p_checked", r.p_checked},
          {"worst_ratio", r.worst_ratio},
          {"exact_p1_norm", r.exact_p1_norm},
          {"inf_norm", r.inf_norm},
          {"violations", std::move(violations)}};
}

json operator_summary_to_json(const OperatorMatrices& m) {
  return {{"n", m.n},
          {"gamma", m.gamma},
          {"D_c_min", m.D_c_min},
          {"D_c_max", m.D_c_max},
          {"D_rho_min", m.D_rho_min},
          {"D_rho_max", m.D_rho_max},
          {"K_SA_min", m.K_SA.minCoeff()},
          {"K_SA_max", m.K_SA.maxCoeff()},
          {"A_max_row_sum", m.A.rowwise().sum().maxCoeff()},
          {"A_min_entry", m.A.minCoeff()},
          {"b", vector_to_json(m.b)}};
}

json stationary_to_json(const StationaryInfo& info) {
  return {{"kappa_S", vector_to_json(info.kappa_S)},
          {"kappa_SA", vector_to_json(info.kappa_SA)},
          {"K_SA_min", info.K_SA_min},
          {"K_SA_max", info.K_SA_max},
          {"K_S_min", info.K_S_min},
          {"K_S_max", info.K_S_max}};
}

json bound_to_json(const BoundCurve& curve, const std::vector<std::int64_t>& ks) {
  json points = json::array();
  for (const auto& [k, v] : curve.sample(ks)) {
    if (std::isfinite(v)) points.push_back({k, v});
  }
  return {{"zeta1", curve.zeta1},
          {"zeta2", curve.zeta2},
          {"rate", curve.geometric_rate},
          {"variance_term", curve.variance_term},
          {"tau", curve.tau},
          {"curve", std::move(points)}};
}

json complexity_to_json(const ComplexityReport& r) {
  json j = {{"tag", r.tag},
            {"epsilon", r.epsilon},
            {"omega", r.omega},
            {"t1", r.t1},
            {"t2", r.t2},
            {"t3", r.t3},
            {"t_n", r.t_n},
            {"total", r.total},
            {"specialized_total", r.specialized_total},
            {"convention", "E||.||_inf <= sqrt(E||.||_inf^2); O~ constants dropped"}};
  if (r.prior_work_total) j["prior_work_total"] = *r.prior_work_total;
  if (r.improvement_factor) j["improvement_factor"] = *r.improvement_factor;
  return j;
}

json linear_sa_problem_to_json(const LinearSaProblem& p) {
  json a = json::array();
  json b = json::array();
  for (const auto& m : p.A_tables) a.push_back(matrix_to_json(m));
  for (const auto& v : p.b_tables) b.push_back(vector_to_json(v));
  return {{"noise_kernel", matrix_to_json(p.noise_kernel)},
          {"A_tables", std::move(a)},
          {"b_tables", std::move(b)}};
}

LinearSaProblem linear_sa_problem_from_json(const json& j) {
  Matrix kernel = matrix_from_json(field(j, "noise_kernel"));
  std::vector<Matrix> a;
  std::vector<Vector> b;
  guarded("linear SA problem", [&] {
    for (const auto& m : field(j, "A_tables")) a.push_back(matrix_from_json(m));
    for (const auto& v : field(j, "b_tables")) b.push_back(vector_from_json(v));
    return 0;
  });
  return make_linear_sa_problem(std::move(kernel), std::move(a), std::move(b));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string learner_csv(const std::vector<std::uint64_t>& seeds,
                        const std::vector<RunResult>& runs) {
  require(seeds.size() == runs.size(), ErrorCode::kDimensionMismatch,
          "one seed per run is required");
  std::string out = "iteration,seed,error_sq_inf\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    for (std::size_t i = 0; i < run.iterations.size(); ++i) {
      out += std::to_string(run.iterations[i]);
      out += ',';
      out += std::to_string(seeds[r]);
      out += ',';
      out += format_double(run.error_trajectory[i]);
      out += '\n';
    }
  }
  return out;
}

std::string linear_sa_csv(const std::vector<std::uint64_t>& seeds,
                          const std::vector<LinearSaRun>& runs) {
  require(seeds.size() == runs.size(), ErrorCode::kDimensionMismatch,
          "one seed per run is required");
  std::string out = "step,seed,err_sq_mu_p,err_sq_inf\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    for (std::size_t i = 0; i < run.steps.size(); ++i) {
      out += std::to_string(run.steps[i]) + ',' + std::to_string(seeds[r]) + ',' +
             format_double(run.err_sq_mu_p[i]) + ',' + format_double(run.err_sq_inf[i]) + '\n';
    }
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return guarded(path.string(), [&] { return json::parse(text); });
}

void write_text(const std::filesystem::path& path, const std::string& content, bool force) {
  if (!force && std::filesystem::exists(path))
    fail(ErrorCode::kIo, path.string() + " exists; pass --force to overwrite");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j, bool force) {
  write_text(path, j.dump(2) + "\n", force);
}

}  // namespace offtd::io
