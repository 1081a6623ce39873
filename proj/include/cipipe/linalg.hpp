#pragma once

#include "cipipe/types.hpp"

#include <Eigen/Jacobi>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cipipe {

template <typename Scalar>
struct SymmetricEigen {
  Vector<Scalar> values;   // descending
  Matrix<Scalar> vectors;  // column i pairs with values(i)
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm falls below tol times the full norm.
template <typename Derived>
SymmetricEigen<typename Derived::Scalar> jacobi_eigen(const Eigen::MatrixBase<Derived>& input,
                                                       double tol = 1e-10, int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw Error(Errc::dimension_mismatch, "jacobi_eigen needs a square matrix");

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a = input;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> v =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(n, n);

  const double total = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += static_cast<double>(a(i, j)) * static_cast<double>(a(i, j));
    return std::sqrt(s);
  };

  int sweep = 0;
  while (total > 0.0 && off_norm() > tol * total) {
    if (sweep == max_sweeps) throw Error(Errc::not_converged, "jacobi_eigen did not converge");
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
        v.applyOnTheRight(p, q, rot);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  out.sweeps = sweep;
  return out;
}

template <typename Scalar>
struct CgResult {
  Vector<Scalar> x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
/// system. The true residual is recomputed every `restart` iterations.
/// Throws singular_system when a search direction has non-positive curvature.
template <typename DerivedA, typename DerivedB>
CgResult<typename DerivedA::Scalar> conjugate_gradient(const Eigen::MatrixBase<DerivedA>& a,
                                                        const Eigen::MatrixBase<DerivedB>& b,
                                                        double tol, int max_iters) {
  using Scalar = typename DerivedA::Scalar;
  using Vec = Vector<Scalar>;
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) throw Error(Errc::dimension_mismatch, "conjugate_gradient shape mismatch");

  CgResult<Scalar> res;
  res.x = Vec::Zero(n);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    res.converged = true;
    return res;
  }

  Vec inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar d = a(i, i);
    if (!(d > Scalar(0))) throw Error(Errc::singular_system, "normal matrix has a non-positive diagonal entry");
    inv_diag(i) = Scalar(1) / d;
  }

  const int restart = static_cast<int>(std::max<Eigen::Index>(50, 2 * n));
  Vec r = b - a * res.x;
  Vec z = inv_diag.cwiseProduct(r);
  Vec p = z;
  Scalar rz = r.dot(z);
  int since_restart = 0;
  while (res.iterations < max_iters) {
    res.relative_residual = r.norm() / b_norm;
    if (res.relative_residual < tol) {
      // confirm against the true residual before accepting
      const Vec true_r = b - a * res.x;
      res.relative_residual = true_r.norm() / b_norm;
      if (res.relative_residual < tol) {
        res.converged = true;
        return res;
      }
      r = true_r;
      z = inv_diag.cwiseProduct(r);
      p = z;
      rz = r.dot(z);
      since_restart = 0;
    }
    const Vec ap = a * p;
    const Scalar curvature = p.dot(ap);
    if (!(curvature > Scalar(0))) throw Error(Errc::singular_system, "normal matrix is not positive definite");
    const Scalar alpha = rz / curvature;
    res.x += alpha * p;
    ++res.iterations;
    if (++since_restart == restart) {
      r = b - a * res.x;
      z = inv_diag.cwiseProduct(r);
      p = z;
      rz = r.dot(z);
      since_restart = 0;
      continue;
    }
    r -= alpha * ap;
    z = inv_diag.cwiseProduct(r);
    const Scalar rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  res.relative_residual = (b - a * res.x).norm() / b_norm;
  res.converged = res.relative_residual < tol;
  return res;
}

}  // namespace cipipe
