#include "offtd/linear_sa.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "offtd/error.hpp"
#include "offtd/rng.hpp"

namespace offtd {
namespace {

constexpr double kCapSlack = 1e-12;

double sq(double x) { return x * x; }

std::vector<int> flatten(const std::vector<StateAction>& window) {
  std::vector<int> key;
  key.reserve(window.size() * 2);
  for (const auto& sa : window) {
    key.push_back(sa.s);
    key.push_back(sa.a);
  }
  return key;
}

int draw_row(CounterRng& rng, const Matrix& cdf_t, int row) {
  const double u = rng.uniform();
  const double* c = cdf_t.col(row).data();
  const auto n = static_cast<int>(cdf_t.rows());
  for (int i = 0; i < n; ++i)
    if (u < c[i]) return i;
  return n - 1;
}

// Transposed row-normalised CDF so each row is a contiguous column.
Matrix cdf_columns(const Matrix& p) {
  Matrix cdf(p.cols(), p.rows());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double total = p.row(r).sum();
    double acc = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      acc += p(r, c);
      cdf(c, r) = acc / total;
    }
  }
  return cdf;
}

LinearSaRun run_impl(const LinearSaProblem& problem, double alpha, std::int64_t num_steps,
                     const LinearSaOptions& options, const auto& next_noise) {
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorCode::kInvalidParameter,
          "alpha must be finite and nonnegative");
  require(options.record_stride >= 1, ErrorCode::kInvalidParameter,
          "record_stride must be >= 1");
  const int d = problem.dim();
  Vector x = options.x0.size() == 0 ? Vector::Zero(d) : options.x0;
  require(x.size() == d, ErrorCode::kDimensionMismatch, "x0 has the wrong dimension");
  const Vector mu = options.mu ? *options.mu : Vector::Constant(d, 1.0 / d);
  require(mu.size() == d, ErrorCode::kDimensionMismatch, "weights have the wrong dimension");

  std::vector<Matrix> shifted;
  shifted.reserve(problem.A_tables.size());
  for (const auto& a : problem.A_tables) shifted.push_back(a - Matrix::Identity(d, d));

  LinearSaRun run;
  const auto record = [&](std::int64_t k) {
    const Vector diff = x - problem.x_star;
    run.steps.push_back(k);
    run.err_sq_mu_p.push_back(sq(weighted_p_norm(diff, mu, options.p)));
    run.err_sq_inf.push_back(sq(inf_norm(diff)));
  };

  Vector direction(d);
  record(0);
  for (std::int64_t k = 0; k < num_steps; ++k) {
    const int y = next_noise(k);
    direction.noalias() = shifted[y] * x;
    direction += problem.b_tables[y];
    x += alpha * direction;
    const double norm = inf_norm(x);
    if (!std::isfinite(norm) || norm > kDivergenceThreshold) {
      throw Error(ErrorCode::kDiverged,
                  "linear SA iterate left the ball of radius 1e6 at step " + std::to_string(k + 1),
                  k + 1);
    }
    const std::int64_t done = k + 1;
    if (done % options.record_stride == 0 || done == num_steps) record(done);
  }
  run.final_x = x;
  return run;
}

void check_certificate(const LinearSaProblem& problem, const ContractionCertificate& cert) {
  require(cert.mu.size() == problem.dim(), ErrorCode::kDimensionMismatch,
          "certificate dimension does not match the problem");
}

struct Constants {
  double c1 = 0.0;
  double c2 = 0.0;
};

Constants theorem9_constants(const LinearSaProblem& problem, const ContractionCertificate& cert,
                             double p, const Vector& x0) {
  require(x0.size() == problem.dim(), ErrorCode::kDimensionMismatch,
          "x0 has the wrong dimension");
  const double shift = problem.b_max * std::pow(cert.mu_min, 1.0 / p) / (problem.A_max + 1.0);
  Constants c;
  c.c1 = sq(weighted_p_norm(x0 - problem.x_star, cert.mu, p) + weighted_p_norm(x0, cert.mu, p) +
            shift);
  c.c2 = sq(weighted_p_norm(problem.x_star, cert.mu, p) + shift);
  return c;
}

void check_alpha(double alpha, int t_alpha, double cap) {
  require(alpha > 0.0 && t_alpha >= 1, ErrorCode::kInvalidParameter,
          "alpha must be positive and t_alpha at least 1");
  require(alpha * t_alpha <= cap * (1.0 + kCapSlack), ErrorCode::kStepsizeTooLarge,
          "alpha * t_alpha = " + std::to_string(alpha * t_alpha) + " exceeds the cap " +
              std::to_string(cap));
}

}  // namespace

LinearSaProblem make_linear_sa_problem(Matrix noise_kernel, std::vector<Matrix> A_tables,
                                       std::vector<Vector> b_tables) {
  const auto ny = noise_kernel.rows();
  require(ny > 0 && noise_kernel.cols() == ny, ErrorCode::kDimensionMismatch,
          "noise kernel must be square and nonempty");
  require(static_cast<Eigen::Index>(A_tables.size()) == ny &&
              static_cast<Eigen::Index>(b_tables.size()) == ny,
          ErrorCode::kDimensionMismatch, "need one A and one b table per noise state");
  require((noise_kernel.array() >= 0.0).all() &&
              ((noise_kernel.rowwise().sum().array() - 1.0).abs() <= 1e-10).all(),
          ErrorCode::kInvalidParameter, "noise kernel must be row-stochastic");
  const auto d = A_tables.front().rows();
  require(d > 0, ErrorCode::kDimensionMismatch, "empty A table");
  for (Eigen::Index y = 0; y < ny; ++y) {
    require(A_tables[y].rows() == d && A_tables[y].cols() == d && b_tables[y].size() == d,
            ErrorCode::kDimensionMismatch,
            "table " + std::to_string(y) + " has inconsistent dimensions");
    require(A_tables[y].allFinite() && b_tables[y].allFinite(), ErrorCode::kInvalidParameter,
            "table " + std::to_string(y) + " is not finite");
  }
  check_ergodic(noise_kernel);

  LinearSaProblem p;
  p.noise_kernel = std::move(noise_kernel);
  p.A_tables = std::move(A_tables);
  p.b_tables = std::move(b_tables);
  p.kappa_Y = stationary_of(p.noise_kernel);
  p.A_bar = Matrix::Zero(d, d);
  p.b_bar = Vector::Zero(d);
  for (Eigen::Index y = 0; y < ny; ++y) {
    p.A_bar += p.kappa_Y(y) * p.A_tables[y];
    p.b_bar += p.kappa_Y(y) * p.b_tables[y];
    p.A_max = std::max(p.A_max, matrix_inf_norm(p.A_tables[y]));
    p.b_max = std::max(p.b_max, inf_norm(p.b_tables[y]));
  }
  const auto modulus = check_substochastic(p.A_bar);
  require(modulus.is_substochastic && modulus.modulus_beta > 0.0, ErrorCode::kNotSubstochastic,
          "A_bar is not substochastic with a positive modulus (max row sum " +
              std::to_string(modulus.max_row_sum) + ")");
  p.omega_prime = modulus.modulus_beta;
  p.x_star = solve_dense(Matrix::Identity(d, d) - p.A_bar, p.b_bar);
  return p;
}

LinearSaRun run_linear_sa(const LinearSaProblem& problem, double alpha, std::int64_t num_steps,
                          std::uint64_t seed, const LinearSaOptions& options) {
  require(num_steps >= 0, ErrorCode::kInvalidParameter, "num_steps must be nonnegative");
  const Matrix cdf = cdf_columns(problem.noise_kernel);
  int y = 0;
  if (options.start) {
    require(*options.start >= 0 && *options.start < problem.noise_size(),
            ErrorCode::kInvalidParameter, "start noise state out of range");
    y = *options.start;
  } else {
    CounterRng start_rng(seed, Stream::kLinearSa, 0);
    y = draw_row(start_rng, cdf_columns(problem.kappa_Y.transpose()), 0);
  }
  CounterRng rng(seed, Stream::kLinearSa, 1);
  const auto next_noise = [&](std::int64_t k) {
    if (k > 0) y = draw_row(rng, cdf, y);
    return y;
  };
  return run_impl(problem, alpha, num_steps, options, next_noise);
}

LinearSaRun run_linear_sa_on_path(const LinearSaProblem& problem, double alpha,
                                  const std::vector<int>& path, const LinearSaOptions& options) {
  for (int y : path)
    require(y >= 0 && y < problem.noise_size(), ErrorCode::kInvalidParameter,
            "noise path entry out of range");
  const auto next_noise = [&](std::int64_t k) { return path[static_cast<std::size_t>(k)]; };
  return run_impl(problem, alpha, static_cast<std::int64_t>(path.size()), options, next_noise);
}

int sa_mixing_time(const MixingInfo& mixing, double alpha) {
  return std::max(1, mixing.t_delta(alpha));
}

MixingInfo noise_mixing(const LinearSaProblem& problem) {
  return MixingInfo::of_chain(problem.noise_kernel, problem.kappa_Y);
}

double theorem9_cap(const LinearSaProblem& problem, const ContractionCertificate& cert,
                    double p) {
  check_certificate(problem, cert);
  require(p >= 1.0 && std::isfinite(p), ErrorCode::kInvalidParameter, "p must be finite and >= 1");
  return cert.theta * problem.omega_prime * std::pow(cert.mu_min, 2.0 / p) /
         (228.0 * p * sq(problem.A_max + 1.0));
}

BoundCurve theorem9_bound(const LinearSaProblem& problem, double alpha, int t_alpha,
                          const ContractionCertificate& cert, double p, const Vector& x0) {
  check_alpha(alpha, t_alpha, theorem9_cap(problem, cert, p));
  const auto c = theorem9_constants(problem, cert, p, x0);
  BoundCurve curve;
  curve.tau = t_alpha;
  curve.zeta1 = c.c1;
  curve.zeta2 = c.c2;
  curve.geometric_rate = 1.0 - cert.theta * problem.omega_prime * alpha;
  curve.variance_term = 228.0 * p * c.c2 * sq(problem.A_max + 1.0) /
                        (std::pow(cert.mu_min, 2.0 / p) * cert.theta * problem.omega_prime) *
                        alpha * t_alpha;
  return curve;
}

BoundCurve theorem9_sup_norm_bound(const LinearSaProblem& problem, double alpha, int t_alpha,
                                   const ContractionCertificate& cert, const Vector& x0) {
  require(cert.theta == 0.5, ErrorCode::kInvalidParameter,
          "the sup-norm form needs a theta = 1/2 certificate");
  const double p = theorem_p(cert.mu_min);
  check_alpha(alpha, t_alpha, theorem9_cap(problem, cert, p));
  const auto c = theorem9_constants(problem, cert, p, x0);
  const double d = problem.dim();
  BoundCurve curve;
  curve.tau = t_alpha;
  curve.zeta1 = c.c1 * std::sqrt(std::numbers::e);
  curve.zeta2 = c.c2;
  curve.geometric_rate = 1.0 - problem.omega_prime * alpha / 2.0;
  curve.variance_term = 1824.0 * std::numbers::e * std::log(2.0 * d / problem.omega_prime) * c.c2 *
                        sq(problem.A_max + 1.0) / problem.omega_prime * alpha * t_alpha;
  return curve;
}

int TdEncoding::index_of(const std::vector<StateAction>& window) const {
  const auto it = lookup.find(flatten(window));
  require(it != lookup.end(), ErrorCode::kInvalidParameter,
          "window has zero stationary probability");
  return it->second;
}

std::vector<int> TdEncoding::path_of(const Trajectory& trajectory, std::int64_t count) const {
  require(windows.size() > 0, ErrorCode::kInvalidParameter, "empty encoding");
  const auto len = static_cast<std::int64_t>(windows.front().size());
  require(count >= 0 && count + len - 1 <= static_cast<std::int64_t>(trajectory.pairs.size()),
          ErrorCode::kInvalidParameter, "trajectory too short for the requested path");
  std::vector<int> path;
  path.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    const auto first = trajectory.pairs.begin() + k;
    path.push_back(index_of(std::vector<StateAction>(first, first + len)));
  }
  return path;
}

TdEncoding encode_td_as_linear_sa(const TabularMdp& mdp, const Policy& behavior,
                                  const RatioPair& ratios, int n) {
  require(mdp.sa_count() <= 6 && n >= 1 && n <= 2, ErrorCode::kInvalidParameter,
          "window enumeration is limited to |S||A| <= 6 and n <= 2");
  const auto info = stationary(mdp, behavior);
  const auto weighted = enumerate_windows(mdp, behavior, n, info);

  TdEncoding enc;
  for (const auto& w : weighted) {
    enc.lookup.emplace(flatten(w.window), static_cast<int>(enc.windows.size()));
    enc.windows.push_back(w.window);
  }
  const auto ny = static_cast<int>(enc.windows.size());
  const int d = mdp.sa_count();
  const double gamma = mdp.discount;

  Matrix kernel = Matrix::Zero(ny, ny);
  std::vector<Matrix> a_tables;
  std::vector<Vector> b_tables;
  a_tables.reserve(ny);
  b_tables.reserve(ny);
  for (int y = 0; y < ny; ++y) {
    const auto& win = enc.windows[y];
    const StateAction last = win.back();
    std::vector<StateAction> shifted(win.begin() + 1, win.end());
    shifted.push_back({});
    for (int s2 = 0; s2 < mdp.num_states; ++s2) {
      for (int a2 = 0; a2 < mdp.num_actions; ++a2) {
        const double prob = mdp.transitions[last.a](last.s, s2) * behavior.probs(s2, a2);
        if (prob <= 0.0) continue;
        shifted.back() = {s2, a2};
        kernel(y, enc.index_of(shifted)) += prob;
      }
    }

    Vector row = Vector::Zero(d);
    double reward = 0.0;
    double coef = 1.0;  // gamma^i prod_{j=1..i} c_j
    for (int i = 0; i < n; ++i) {
      if (i > 0) coef *= gamma * ratios.c(win[i].s, win[i].a);
      const StateAction nxt = win[i + 1];
      reward += coef * mdp.rewards(win[i].s, win[i].a);
      row(mdp.index(nxt.s, nxt.a)) += coef * gamma * ratios.rho(nxt.s, nxt.a);
      row(mdp.index(win[i].s, win[i].a)) -= coef;
    }
    const int head = mdp.index(win[0].s, win[0].a);
    Matrix a = Matrix::Identity(d, d);
    a.row(head) += row.transpose();
    Vector b = Vector::Zero(d);
    b(head) = reward;
    a_tables.push_back(std::move(a));
    b_tables.push_back(std::move(b));
  }
  enc.problem = make_linear_sa_problem(std::move(kernel), std::move(a_tables), std::move(b_tables));
  return enc;
}

LinearSaProblem random_certified_problem(int dim, int noise_size, double modulus,
                                         std::uint64_t seed) {
  require(dim >= 1 && noise_size >= 1, ErrorCode::kInvalidParameter,
          "dimension and noise size must be positive");
  require(modulus > 0.0 && modulus < 1.0, ErrorCode::kInvalidParameter,
          "modulus must lie in (0,1)");
  CounterRng rng(seed, Stream::kProblem);
  Matrix kernel(noise_size, noise_size);
  for (int i = 0; i < noise_size; ++i) {
    for (int j = 0; j < noise_size; ++j) kernel(i, j) = rng.uniform_open();
    kernel.row(i) /= kernel.row(i).sum();
  }
  std::vector<Matrix> a_tables;
  std::vector<Vector> b_tables;
  for (int y = 0; y < noise_size; ++y) {
    Matrix a(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) a(r, c) = rng.uniform();
      const double target = (1.0 - modulus) * (0.2 + 0.8 * rng.uniform());
      const double total = a.row(r).sum();
      a.row(r) *= total > 0.0 ? target / total : 0.0;
    }
    Vector b(dim);
    for (int r = 0; r < dim; ++r) b(r) = 2.0 * rng.uniform() - 1.0;
    a_tables.push_back(std::move(a));
    b_tables.push_back(std::move(b));
  }
  return make_linear_sa_problem(std::move(kernel), std::move(a_tables), std::move(b_tables));
}

LyapunovEquationDiagnostic lyapunov_equation_diagnostic(const Matrix& a_bar) {
  const auto d = a_bar.rows();
  require(d > 0 && a_bar.cols() == d && d <= 40, ErrorCode::kInvalidParameter,
          "Lyapunov equation diagnostic needs a square matrix of size <= 40");
  const Matrix m = a_bar - Matrix::Identity(d, d);
  // vec(M^T S + S M) = (I (x) M^T + M^T (x) I) vec(S)
  Matrix system = Matrix::Zero(d * d, d * d);
  for (Eigen::Index col = 0; col < d; ++col) {
    system.block(col * d, col * d, d, d) += m.transpose();
    for (Eigen::Index k = 0; k < d; ++k)
      system.block(k * d, col * d, d, d).diagonal().array() += m(col, k);
  }
  const Matrix identity = Matrix::Identity(d, d);
  const Vector rhs = -Eigen::Map<const Vector>(identity.data(), d * d);
  const Vector vec_s = solve_dense(system, rhs, 1e-8);
  Matrix s = Eigen::Map<const Matrix>(vec_s.data(), d, d);
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace offtd
