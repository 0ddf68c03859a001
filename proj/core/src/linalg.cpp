#include "offtd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "offtd/error.hpp"

namespace offtd {
namespace {

std::vector<int> bfs_levels(const Eigen::Ref<const Matrix>& m, double tol, bool transpose) {
  const auto d = m.rows();
  std::vector<int> level(d, -1);
  std::queue<Eigen::Index> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < d; ++v) {
      const double w = transpose ? m(v, u) : m(u, v);
      if (w > tol && level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      }
    }
  }
  return level;
}

}  // namespace

bool is_irreducible(const Eigen::Ref<const Matrix>& m, double tol) {
  require(m.rows() == m.cols(), ErrorCode::kDimensionMismatch, "is_irreducible: matrix not square");
  if (m.rows() == 0) return false;
  // Strongly connected iff node 0 reaches everything in both G and G^T.
  for (bool transpose : {false, true}) {
    for (int l : bfs_levels(m, tol, transpose)) {
      if (l < 0) return false;
    }
  }
  return true;
}

int period(const Eigen::Ref<const Matrix>& m, double tol) {
  require(is_irreducible(m, tol), ErrorCode::kNotErgodic, "period: matrix is not irreducible");
  const auto level = bfs_levels(m, tol, false);
  int g = 0;
  for (Eigen::Index u = 0; u < m.rows(); ++u) {
    for (Eigen::Index v = 0; v < m.cols(); ++v) {
      if (m(u, v) > tol) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    }
  }
  return g;
}

Vector stationary_of(const Eigen::Ref<const Matrix>& p, double residual_tol) {
  require(p.rows() == p.cols() && p.rows() > 0, ErrorCode::kDimensionMismatch,
          "stationary_of: matrix must be square and nonempty");
  const auto d = p.rows();
  Matrix system = p.transpose() - Matrix::Identity(d, d);
  system.row(d - 1).setOnes();
  Vector rhs = Vector::Zero(d);
  rhs(d - 1) = 1.0;
  Vector x = Eigen::PartialPivLU<Matrix>(system).solve(rhs);
  const double residual = inf_norm(p.transpose() * x - x);
  require(std::abs(x.sum() - 1.0) <= residual_tol && residual <= residual_tol,
          ErrorCode::kNotErgodic,
          "stationary_of: residual " + std::to_string(residual) + " exceeds tolerance");
  return x;
}

Vector solve_dense(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& b,
                   double residual_tol) {
  require(a.rows() == a.cols() && a.rows() == b.size(), ErrorCode::kDimensionMismatch,
          "solve_dense: dimension mismatch");
  Vector x = Eigen::PartialPivLU<Matrix>(a).solve(b);
  const double residual = inf_norm(a * x - b);
  require(std::isfinite(residual) && residual <= residual_tol, ErrorCode::kInvalidParameter,
          "solve_dense: residual " + std::to_string(residual) + " exceeds tolerance");
  return x;
}

double max_tv_distance(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Vector>& target) {
  require(m.cols() == target.size(), ErrorCode::kDimensionMismatch,
          "max_tv_distance: dimension mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    worst = std::max(worst, 0.5 * (m.row(i).transpose() - target).cwiseAbs().sum());
  }
  return worst;
}

}  // namespace offtd
