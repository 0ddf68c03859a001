#include "offtd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "offtd/contraction.hpp"
#include "offtd/error.hpp"

namespace offtd {
namespace {

constexpr double kAlphaFloor = 1e-12;
constexpr double kCapSlack = 1e-12;

void check_common(const BoundInputs& in) {
  require(in.omega > 0.0 && in.omega < 1.0, ErrorCode::kInvalidParameter,
          "omega must lie in (0,1), got " + std::to_string(in.omega));
  require(in.n >= 1, ErrorCode::kInvalidParameter, "n must be >= 1");
  require(in.gamma >= 0.0 && in.gamma < 1.0, ErrorCode::kInvalidParameter,
          "gamma must lie in [0,1)");
  require(in.sa_count >= 1, ErrorCode::kInvalidParameter, "sa_count must be >= 1");
  require(in.c_max >= 0.0 && in.rho_max >= 0.0, ErrorCode::kInvalidParameter,
          "ratio maxima must be nonnegative");
}

void check_weighted(const BoundInputs& in) {
  require(in.mu_min > 0.0 && in.mu_min <= 1.0, ErrorCode::kInvalidParameter,
          "mu_min must lie in (0,1]");
  require(in.theta > 0.0 && in.theta <= 1.0, ErrorCode::kInvalidParameter,
          "theta must lie in (0,1]");
  require(in.p >= 1.0 && std::isfinite(in.p), ErrorCode::kInvalidParameter,
          "p must be finite and >= 1");
}

void check_step(const BoundInputs& in, double cap) {
  require(in.alpha > 0.0 && in.tau >= 1.0, ErrorCode::kInvalidParameter,
          "alpha must be positive and tau at least 1");
  require(in.alpha * in.tau <= cap * (1.0 + kCapSlack), ErrorCode::kStepsizeTooLarge,
          "alpha * tau = " + std::to_string(in.alpha * in.tau) + " exceeds the cap " +
              std::to_string(cap));
}

double log_factor(const BoundInputs& in) {
  return std::log(2.0 * in.sa_count / in.omega);
}

double sq(double x) { return x * x; }

}  // namespace

double lipschitz_factor(const BoundInputs& in) {
  if (in.lipschitz_override) return *in.lipschitz_override;
  return f_factor(in.gamma * in.c_max, in.n) * (in.gamma * in.rho_max + 1.0);
}

double preset_lipschitz_factor(const RatioPair& ratios, double gamma, int n) {
  if (ratios.kind == PresetKind::kVanillaIS) return std::pow(gamma * ratios.c_max, n) + 1.0;
  return f_factor(gamma * ratios.c_max, n) * (gamma * ratios.rho_max + 1.0);
}

double cap_rhs(const BoundInputs& in, const BoundConstants& k) {
  check_common(in);
  return in.omega / (k.cap_denominator * log_factor(in) * sq(lipschitz_factor(in)));
}

double weighted_cap_rhs(const BoundInputs& in, const BoundConstants& k) {
  check_common(in);
  check_weighted(in);
  return in.theta * std::pow(in.mu_min, 2.0 / in.p) * in.omega /
         (k.weighted_cap_denominator * in.p * sq(lipschitz_factor(in)));
}

StepsizeCap largest_stepsize(double cap, const MixingInfo& mixing, int tau_offset,
                             int tau_floor) {
  require(cap > 0.0 && tau_offset >= 0, ErrorCode::kInvalidParameter,
          "largest_stepsize: cap must be positive");
  const auto tau_at = [&](double alpha) -> std::optional<int> {
    try {
      return std::max(mixing.t_delta(alpha) + tau_offset, tau_floor);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMixingTooSlow) return std::nullopt;
      throw;
    }
  };
  const auto feasible = [&](double alpha) {
    const auto tau = tau_at(alpha);
    return tau && alpha * *tau <= cap;
  };

  // tau >= max(tau_offset, tau_floor), so nothing above cap / that can be feasible.
  const int tau_min = std::max(tau_offset, tau_floor);
  double hi = tau_min > 0 ? std::min(1.0, cap / tau_min) : 1.0;
  double lo = kAlphaFloor;
  if (!feasible(lo))
    fail(ErrorCode::kNoFeasibleStepsize,
         "no stepsize above 1e-12 satisfies alpha * tau <= " + std::to_string(cap));
  if (feasible(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 400 && hi / lo - 1.0 > 1e-13; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (feasible(mid))
        lo = mid;
      else
        hi = mid;
    }
  }
  StepsizeCap out;
  out.alpha = lo;
  out.tau = *tau_at(lo);
  out.cap = cap;
  return out;
}

StepsizeCap stepsize_cap(const BoundInputs& in, const MixingInfo& mixing, CapForm form,
                         const BoundConstants& k) {
  const double cap = form == CapForm::kInfinity ? cap_rhs(in, k) : weighted_cap_rhs(in, k);
  return largest_stepsize(cap, mixing, in.n + 1);
}

double BoundCurve::value(double k) const {
  if (k < tau) return std::numeric_limits<double>::infinity();
  return zeta1 * std::pow(geometric_rate, k - tau) + variance_term;
}

std::vector<std::pair<std::int64_t, double>> BoundCurve::sample(
    const std::vector<std::int64_t>& ks) const {
  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(ks.size());
  for (auto k : ks) out.emplace_back(k, value(static_cast<double>(k)));
  return out;
}

BoundCurve bound_curve(const BoundInputs& in, const BoundConstants& k) {
  check_step(in, cap_rhs(in, k));
  BoundCurve c;
  c.tau = in.tau;
  c.zeta1 = k.zeta1_factor * sq(in.q0_minus_ref_inf + in.q0_inf + 1.0);
  c.zeta2 = k.zeta2_factor * sq(3.0 * in.qref_inf + 1.0);
  c.geometric_rate = 1.0 - in.omega * in.alpha / 2.0;
  c.variance_term =
      c.zeta2 * sq(lipschitz_factor(in)) * log_factor(in) / in.omega * in.alpha * in.tau;
  return c;
}

BoundCurve weighted_bound_curve(const BoundInputs& in, const BoundConstants& k) {
  check_step(in, weighted_cap_rhs(in, k));
  BoundCurve c;
  c.tau = in.tau;
  c.zeta1 = sq(in.q0_minus_ref_mu_p + in.q0_mu_p + 1.0);
  c.zeta2 = k.weighted_zeta2_factor * sq(3.0 * in.qref_mu_p + 1.0);
  c.geometric_rate = 1.0 - in.theta * in.omega * in.alpha;
  c.variance_term = c.zeta2 * in.p * sq(lipschitz_factor(in)) /
                    (std::pow(in.mu_min, 2.0 / in.p) * in.omega) * in.alpha * in.tau;
  return c;
}

BoundCurve weighted_bound_in_sup_norm(const BoundInputs& in, const BoundConstants& k) {
  BoundCurve c = weighted_bound_curve(in, k);
  const double lift = std::pow(in.mu_min, -2.0 / in.p);
  c.zeta1 *= lift;
  c.variance_term *= lift;
  return c;
}

double theorem_p(double mu_min) {
  require(mu_min > 0.0 && mu_min < 1.0, ErrorCode::kInvalidParameter,
          "mu_min must lie in (0,1)");
  return 4.0 * std::log(1.0 / mu_min);
}

ComplexityInputs complexity_inputs(const OperatorMatrices& m, const RatioPair& ratios,
                                   const Policy& target, const Policy& behavior) {
  ComplexityInputs in;
  in.gamma = m.gamma;
  in.n = m.n;
  in.K_SA_min = m.K_SA.minCoeff();
  in.D_c_min = m.D_c_min;
  in.D_rho_max = m.D_rho_max;
  in.c_max = ratios.c_max;
  in.rho_max = ratios.rho_max;
  in.r_max = max_ratio(target, behavior);
  in.pi_max = target.probs.maxCoeff();
  in.kind = ratios.kind;
  in.params = ratios.params;
  return in;
}

ComplexityReport sample_complexity(const ComplexityInputs& in, double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::kInvalidParameter,
          "epsilon must lie in (0,1)");
  require(in.gamma * in.D_rho_max < 1.0, ErrorCode::kContractionViolated,
          "gamma * D_rho_max >= 1");
  require(in.K_SA_min > 0.0 && in.n >= 1, ErrorCode::kInvalidParameter,
          "K_SA_min must be positive and n >= 1");
  const double g = in.gamma;
  const double n = in.n;
  const double K = in.K_SA_min;
  const double f_dc = f_factor(g * in.D_c_min, in.n);
  const double rho_gap = 1.0 - g * in.D_rho_max;

  ComplexityReport r;
  r.tag = to_string(in.kind);
  r.epsilon = epsilon;
  r.omega = K * f_dc * rho_gap;
  r.t1 = sq(std::log(1.0 / epsilon)) / sq(epsilon);
  r.t2 = 1.0 / sq(rho_gap);
  const double lipschitz = in.kind == PresetKind::kVanillaIS
                               ? std::pow(g * in.r_max, in.n) + 1.0
                               : f_factor(g * in.c_max, in.n) * (g * in.rho_max + 1.0);
  r.t3 = sq(lipschitz) / sq(r.omega);
  r.t_n = n;
  r.total = r.t1 * r.t2 * r.t3 * r.t_n;

  const double lambda = in.params.lambda;
  switch (in.kind) {
    case PresetKind::kVanillaIS:
      r.specialized_total = r.t1 * n * sq(std::pow(g * in.r_max, in.n) + 1.0) /
                            (sq(K) * sq(1.0 - std::pow(g, in.n)) * sq(1.0 - g));
      break;
    case PresetKind::kQPiLambda:
      r.specialized_total = r.t1 * n * sq(g * in.r_max + 1.0) / (sq(K) * std::pow(1.0 - g, 4));
      break;
    case PresetKind::kTreeBackup:
      r.specialized_total = r.t1 * n * sq(f_factor(g * lambda * in.pi_max, in.n)) *
                            sq(g * in.r_max + 1.0) / (sq(K) * sq(f_dc) * std::pow(1.0 - g, 4));
      break;
    case PresetKind::kRetrace:
      r.specialized_total = r.t1 * n * sq(f_factor(g * lambda, in.n)) * sq(g * in.r_max + 1.0) /
                            (sq(K) * sq(f_dc) * std::pow(1.0 - g, 4));
      break;
    case PresetKind::kQTrace: {
      const double numerator =
          r.t1 * n * sq(f_factor(g * in.params.c_bar, in.n)) * sq(g * in.params.rho_bar + 1.0);
      r.specialized_total = numerator / (sq(K) * sq(f_dc) * sq(rho_gap) * sq(1.0 - g));
      r.prior_work_total =
          numerator / (std::pow(K * f_dc * rho_gap, 3) * sq(1.0 - g));
      r.improvement_factor = r.specialized_total / *r.prior_work_total;
      break;
    }
    case PresetKind::kCustom:
      r.specialized_total = r.total;
      break;
  }
  return r;
}

double variance_proxy(const TabularMdp& mdp, const RatioPair& ratios, int n,
                      const Trajectory& trajectory, const QTable& q) {
  require(n >= 1, ErrorCode::kInvalidParameter, "n must be >= 1");
  require(q.size() == mdp.sa_count(), ErrorCode::kDimensionMismatch,
          "Q table size does not match the MDP");
  const auto length = static_cast<std::int64_t>(trajectory.pairs.size());
  require(length >= 10000, ErrorCode::kInvalidParameter,
          "variance proxy needs a trajectory of at least 10^4 pairs");
  const std::int64_t count = length - n;
  // Welford accumulation.
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t k = 0; k < count; ++k) {
    const double g = window_increment(mdp, ratios, q, trajectory.pairs.data() + k, n);
    const double delta = g - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (g - mean);
  }
  return m2 / static_cast<double>(count - 1);
}

}  // namespace offtd
