#pragma once

#include "cipipe/linalg.hpp"
#include "cipipe/parallel.hpp"
#include "cipipe/types.hpp"

#include <cstdint>

namespace cipipe {

namespace detail {

/// Flips each row so that its largest-magnitude entry (first on ties) is positive.
void fix_component_signs(MatrixD& components_by_row);

/// Rows of `components` are the top-r principal directions.
struct PcaBasis {
  MatrixD components;
  double explained_variance_ratio = 0.0;
};
PcaBasis pca_from_covariance(const MatrixD& covariance, int r);
PcaBasis pca_from_gram(const MatrixD& centered, int r);

}  // namespace detail

/// Principal component reducer. Deterministic: the eigensolver is cyclic
/// Jacobi, so `seed` does not influence the result; it is accepted so the
/// call shape matches randomized solvers.
template <typename Derived>
Reducer fit_pca(const Eigen::MatrixBase<Derived>& vectors, int r, [[maybe_unused]] std::uint64_t seed = 0) {
  const Eigen::Index n = vectors.rows();
  const Eigen::Index d = vectors.cols();
  if (r < 1) throw Error(Errc::invalid_argument, "target dimension must be >= 1");
  if (r > d) throw Error(Errc::invalid_argument, "target dimension " + std::to_string(r) + " exceeds input dimension " + std::to_string(d));
  if (r >= n) throw Error(Errc::too_few_points, "pca needs more points than target dimensions");
  if (!vectors.allFinite()) throw Error(Errc::non_finite, "pca input has non-finite values");

  VectorD mean = VectorD::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += vectors.row(i).transpose().template cast<double>();
  mean /= static_cast<double>(n);

  detail::PcaBasis basis;
  if (n >= d) {
    MatrixD cov = MatrixD::Zero(d, d);
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < n; start += kChunk) {
      const Eigen::Index len = std::min(kChunk, n - start);
      const MatrixD block = vectors.middleRows(start, len).template cast<double>().rowwise() - mean.transpose();
      cov.noalias() += block.transpose() * block;
    }
    cov /= static_cast<double>(n - 1);
    basis = detail::pca_from_covariance(cov, r);
  } else {
    const MatrixD centered = vectors.template cast<double>().rowwise() - mean.transpose();
    basis = detail::pca_from_gram(centered, r);
  }

  Reducer out;
  out.kind = ReducerKind::pca;
  out.input_dim = static_cast<int>(d);
  out.output_dim = r;
  out.mean = std::move(mean);
  out.components = std::move(basis.components);
  out.explained_variance_ratio = basis.explained_variance_ratio;
  return out;
}

/// n x d -> n x r. Identity reducers return the input converted to double.
template <typename Derived>
MatrixD transform(const Reducer& reducer, const Eigen::MatrixBase<Derived>& vectors, int threads = 1) {
  if (vectors.cols() != reducer.input_dim) {
    throw Error(Errc::dimension_mismatch, "transform expects " + std::to_string(reducer.input_dim) +
                                              " columns, got " + std::to_string(vectors.cols()));
  }
  if (reducer.kind == ReducerKind::identity) return vectors.template cast<double>();

  MatrixD out(vectors.rows(), reducer.output_dim);
  for_each_chunk(static_cast<std::size_t>(vectors.rows()), resolve_threads(threads),
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   const auto b = static_cast<Eigen::Index>(begin);
                   const auto len = static_cast<Eigen::Index>(end - begin);
                   if (len == 0) return;
                   const MatrixD centered =
                       vectors.middleRows(b, len).template cast<double>().rowwise() - reducer.mean.transpose();
                   out.middleRows(b, len).noalias() = centered * reducer.components.transpose();
                 });
  return out;
}

}  // namespace cipipe
