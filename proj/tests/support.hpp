#pragma once

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "bsc/sysmodel.hpp"

namespace bsc::test {

inline MatrixXd mat(int r, int c, std::initializer_list<double> v) {
  MatrixXd m(r, c);
  auto it = v.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

inline LinearPlant plant_of(const MatrixXd& phi, const MatrixXd& gamma) {
  const int n = static_cast<int>(phi.rows());
  LinearPlant p;
  p.phi = phi;
  p.gamma = gamma;
  p.c_out = MatrixXd::Identity(n, n);
  p.q_w = 1e-6 * MatrixXd::Identity(n, n);
  p.r_v = 1e-6 * MatrixXd::Identity(n, n);
  p.x_ref = VectorXd::Zero(n);
  p.u_ref = VectorXd::Zero(gamma.cols());
  return p;
}

inline Polytope sym_box(const VectorXd& half) { return Polytope::box(-half, half); }

inline double rel_fro(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

inline MatrixXd random_spd(std::mt19937_64& rng, int n, double min_eig = 0.05) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return m * m.transpose() + min_eig * MatrixXd::Identity(n, n);
}

// Shifted Gaussian matrix with every eigenvalue real part <= -0.2.
inline MatrixXd random_stable(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  const double shift = Eigen::EigenSolver<MatrixXd>(m).eigenvalues().real().maxCoeff() + 0.2;
  return m - std::max(shift, 0.0) * MatrixXd::Identity(n, n);
}

}  // namespace bsc::test
