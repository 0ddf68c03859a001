#pragma once

#include <vector>

#include "offtd/mdp.hpp"
#include "offtd/operators.hpp"
#include "offtd/td.hpp"

namespace fixtures {

using offtd::Matrix;
using offtd::Policy;
using offtd::TabularMdp;

/// One state, one action, self loop.
inline TabularMdp scalar_mdp(double reward, double discount) {
  TabularMdp m;
  m.num_states = 1;
  m.num_actions = 1;
  m.transitions = {Matrix::Ones(1, 1)};
  m.rewards = Matrix::Constant(1, 1, reward);
  m.discount = discount;
  return m;
}

/// Single-action chain with transition matrix p.
inline TabularMdp chain_mdp(const Matrix& p, double discount = 0.9) {
  TabularMdp m;
  m.num_states = static_cast<int>(p.rows());
  m.num_actions = 1;
  m.transitions = {p};
  m.rewards = Matrix::Constant(m.num_states, 1, 0.5);
  m.discount = discount;
  return m;
}

/// Every action keeps the state; reward 1 only at (s0, a0).
inline TabularMdp identity_mdp(int S, int A, int s0, int a0, double discount) {
  TabularMdp m;
  m.num_states = S;
  m.num_actions = A;
  m.transitions.assign(A, Matrix::Identity(S, S));
  m.rewards = Matrix::Zero(S, A);
  m.rewards(s0, a0) = 1.0;
  m.discount = discount;
  return m;
}

inline Policy policy(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return Policy{m};
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  return policy(rows).probs;
}

}  // namespace fixtures
