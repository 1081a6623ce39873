#pragma once

#include "cipipe/linalg.hpp"
#include "cipipe/parallel.hpp"
#include "cipipe/types.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace cipipe {

struct NormalizedTargets {
  std::map<int, double> targets;  // partition -> (ci - min) / (max - min)
  double target_min = 0.0;
  double target_max = 1.0;
};

/// Min-max normalization of per-partition CI. Throws degenerate_targets when
/// all scores are equal.
NormalizedTargets normalize_targets(const std::map<int, double>& ci_scores);

/// Relative residual at which the conjugate-gradient solve stops.
inline constexpr double kRegressionTol = 1e-8;

/// Centered normal equations of the ridge problem. The intercept is
/// unpenalized, so it is eliminated by centering and recovered afterwards.
struct NormalEquations {
  MatrixD gram;       // Xc^T Xc, d x d
  VectorD rhs;        // Xc^T tc
  VectorD x_mean;
  double t_mean = 0.0;
  std::size_t n = 0;
};

/// Gram accumulation over row chunks; partial sums are combined in chunk order.
template <typename Derived>
NormalEquations normal_equations(const Eigen::MatrixBase<Derived>& x, const VectorD& t, int threads = 1) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (t.size() != n) throw Error(Errc::dimension_mismatch, "targets and embeddings differ in length");
  if (n < 1) throw Error(Errc::invalid_argument, "regression needs at least one sample");
  if (!x.allFinite() || !t.allFinite()) throw Error(Errc::non_finite, "regression input has non-finite values");

  NormalEquations ne;
  ne.n = static_cast<std::size_t>(n);
  ne.x_mean = VectorD::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) ne.x_mean += x.row(i).transpose().template cast<double>();
  ne.x_mean /= static_cast<double>(n);
  ne.t_mean = t.mean();

  const int chunks = resolve_threads(threads);
  std::vector<MatrixD> grams(static_cast<std::size_t>(chunks), MatrixD::Zero(d, d));
  std::vector<VectorD> rhss(static_cast<std::size_t>(chunks), VectorD::Zero(d));
  for_each_chunk(static_cast<std::size_t>(n), chunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    constexpr std::size_t kBlock = 1024;
    for (std::size_t s = begin; s < end; s += kBlock) {
      const auto len = static_cast<Eigen::Index>(std::min(kBlock, end - s));
      const auto start = static_cast<Eigen::Index>(s);
      const MatrixD block = x.middleRows(start, len).template cast<double>().rowwise() - ne.x_mean.transpose();
      const VectorD tc = t.segment(start, len).array() - ne.t_mean;
      grams[chunk].noalias() += block.transpose() * block;
      rhss[chunk].noalias() += block.transpose() * tc;
    }
  });
  ne.gram = grams[0];
  ne.rhs = rhss[0];
  for (std::size_t c = 1; c < grams.size(); ++c) {
    ne.gram += grams[c];
    ne.rhs += rhss[c];
  }
  return ne;
}

/// 1e-4 * trace(Xc^T Xc) / d.
template <typename Derived>
double default_ridge_lambda(const Eigen::MatrixBase<Derived>& x) {
  const VectorD t = VectorD::Zero(x.rows());
  const auto ne = normal_equations(x, t);
  return 1e-4 * ne.gram.trace() / static_cast<double>(x.cols());
}

/// Solves the ridge normal equations by conjugate gradient.
CiRegressor fit_normal_equations(const NormalEquations& ne, double ridge_lambda);

/// Minimizes sum (w.x_i + b - t_i)^2 + lambda |w|^2 with b unpenalized.
/// The returned model carries target_min = 0 and target_max = 1; callers
/// that fit normalized CI targets overwrite them with the normalization.
template <typename Derived>
CiRegressor fit(const Eigen::MatrixBase<Derived>& x, const VectorD& t, double ridge_lambda, int threads = 1) {
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw Error(Errc::invalid_argument, "ridge_lambda must be a finite value >= 0");
  }
  return fit_normal_equations(normal_equations(x, t, threads), ridge_lambda);
}

/// w.x + b per row; with `clamp` the scores are clipped to [0,1].
template <typename Derived>
VectorD predict(const CiRegressor& model, const Eigen::MatrixBase<Derived>& x, bool clamp = false) {
  if (x.cols() != model.dim()) {
    throw Error(Errc::dimension_mismatch, "regressor expects dimension " + std::to_string(model.dim()) + ", got " +
                                              std::to_string(x.cols()));
  }
  VectorD out = (x.template cast<double>() * model.weights).array() + model.bias;
  if (clamp) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

/// 1 - SS_res / SS_tot.
double r_squared(const VectorD& predictions, const VectorD& targets);

/// Objective value and its gradient with respect to (w, b), both computed in
/// the uncentered form, for checking a solution independently of the solver.
template <typename Derived>
double ridge_objective(const Eigen::MatrixBase<Derived>& x, const VectorD& t, const VectorD& w, double b,
                       double ridge_lambda) {
  const VectorD r = (x.template cast<double>() * w).array() + b - t.array();
  return r.squaredNorm() + ridge_lambda * w.squaredNorm();
}

/// Gradient in (w, b) order, i.e. d+1 entries.
template <typename Derived>
VectorD ridge_gradient(const Eigen::MatrixBase<Derived>& x, const VectorD& t, const VectorD& w, double b,
                       double ridge_lambda) {
  const MatrixD xd = x.template cast<double>();
  const VectorD r = (xd * w).array() + b - t.array();
  VectorD g(w.size() + 1);
  g.head(w.size()) = 2.0 * (xd.transpose() * r + ridge_lambda * w);
  g(w.size()) = 2.0 * r.sum();
  return g;
}

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seed-keyed Fisher-Yates shuffle, then the last floor(n * (1 - fraction))
/// ids (at least one) form the test side.
Split split_train_test(const std::vector<std::string>& image_ids, double fraction, std::uint64_t seed);

}  // namespace cipipe
