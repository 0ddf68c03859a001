#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "offtd/bounds.hpp"
#include "offtd/contraction.hpp"
#include "offtd/linear_sa.hpp"
#include "offtd/mdp.hpp"
#include "offtd/operators.hpp"
#include "offtd/td.hpp"

namespace offtd::io {

using nlohmann::json;

/// {"num_states", "num_actions", "discount", "transitions": [a][s][s'], "rewards": [s][a]}
json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const json& j);

/// {"probs": [s][a]}
json policy_to_json(const Policy& policy);
Policy policy_from_json(const json& j);

/// {"values": [s][a]}
json qtable_to_json(const TabularMdp& mdp, const QTable& q);
QTable qtable_from_json(const TabularMdp& mdp, const json& j);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

json bias_to_json(const BiasReport& r);
json modulus_to_json(const ModulusResult& r);
json certificate_to_json(const ContractionCertificate& c, double omega);
json verification_to_json(const VerificationReport& r);
json operator_summary_to_json(const OperatorMatrices& m);
json stationary_to_json(const StationaryInfo& info);

/// {"zeta1", "zeta2", "rate", "variance_term", "tau", "curve": [[k, value], ...]}
json bound_to_json(const BoundCurve& curve, const std::vector<std::int64_t>& ks);
json complexity_to_json(const ComplexityReport& r);

/// {"noise_kernel", "A_tables", "b_tables"}
json linear_sa_problem_to_json(const LinearSaProblem& p);
LinearSaProblem linear_sa_problem_from_json(const json& j);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// `iteration,seed,error_sq_inf`, one row per recorded step, runs in the given order.
std::string learner_csv(const std::vector<std::uint64_t>& seeds, const std::vector<RunResult>& runs);

/// `step,seed,err_sq_mu_p,err_sq_inf`
std::string linear_sa_csv(const std::vector<std::uint64_t>& seeds,
                          const std::vector<LinearSaRun>& runs);

json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Throws kIo when the file exists and `force` is false, or on write failure.
void write_text(const std::filesystem::path& path, const std::string& content, bool force);
void write_json(const std::filesystem::path& path, const json& j, bool force);

}  // namespace offtd::io
