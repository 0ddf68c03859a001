#pragma once

#include <Eigen/Dense>

namespace offtd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// True when the directed graph with an edge i->j for every entry > tol is
/// strongly connected.
bool is_irreducible(const Eigen::Ref<const Matrix>& m, double tol = 0.0);

/// Period of an irreducible nonnegative matrix: the gcd of all cycle lengths
/// in its positive-entry graph (1 means aperiodic).
int period(const Eigen::Ref<const Matrix>& m, double tol = 0.0);

/// Stationary distribution of a row-stochastic matrix by a dense LU solve of
/// (P^T - I) x = 0 with one equation replaced by sum(x) = 1. The caller is
/// responsible for ergodicity; the residual is checked against `residual_tol`.
Vector stationary_of(const Eigen::Ref<const Matrix>& p, double residual_tol = 1e-12);

/// Solves a x = b by LU with partial pivoting and asserts
/// ||a x - b||_inf <= residual_tol.
Vector solve_dense(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& b,
                   double residual_tol = 1e-10);

/// max_i 0.5 * sum_j |m(i,j) - target(j)|
double max_tv_distance(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Vector>& target);

inline double inf_norm(const Eigen::Ref<const Vector>& x) {
  return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

/// Induced infinity norm: max absolute row sum.
inline double matrix_inf_norm(const Eigen::Ref<const Matrix>& m) {
  return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace offtd
