#include "cipipe/reduce.hpp"

#include <cmath>

namespace cipipe::detail {
namespace {

// Eigenvalues at or below this fraction of the largest count as zero.
constexpr double kRankTol = 1e-10;

int achievable_rank(const VectorD& eigenvalues) {
  const double top = eigenvalues.size() > 0 ? eigenvalues(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues(i) > kRankTol * top && eigenvalues(i) > 0.0) ++rank;
  }
  return rank;
}

void require_rank(const VectorD& eigenvalues, int r) {
  const int rank = achievable_rank(eigenvalues);
  if (rank < r) {
    throw Error(Errc::degenerate_rank, "data has rank " + std::to_string(rank) + ", cannot extract " +
                                           std::to_string(r) + " components");
  }
}

double explained_ratio(const VectorD& eigenvalues, int r) {
  const double total = eigenvalues.cwiseMax(0.0).sum();
  return total > 0.0 ? eigenvalues.head(r).cwiseMax(0.0).sum() / total : 0.0;
}

}  // namespace

void fix_component_signs(MatrixD& rows) {
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < rows.cols(); ++j) {
      if (std::abs(rows(k, j)) > std::abs(rows(k, best))) best = j;
    }
    if (rows(k, best) < 0.0) rows.row(k) *= -1.0;
  }
}

PcaBasis pca_from_covariance(const MatrixD& covariance, int r) {
  const auto eig = jacobi_eigen(covariance);
  require_rank(eig.values, r);
  PcaBasis out;
  out.components = eig.vectors.leftCols(r).transpose();
  fix_component_signs(out.components);
  out.explained_variance_ratio = explained_ratio(eig.values, r);
  return out;
}

PcaBasis pca_from_gram(const MatrixD& centered, int r) {
  const MatrixD gram = centered * centered.transpose();
  const auto eig = jacobi_eigen(gram);
  require_rank(eig.values, r);
  PcaBasis out;
  out.components.resize(r, centered.cols());
  for (int k = 0; k < r; ++k) {
    VectorD v = centered.transpose() * eig.vectors.col(k);
    out.components.row(k) = (v / v.norm()).transpose();
  }
  fix_component_signs(out.components);
  out.explained_variance_ratio = explained_ratio(eig.values, r);
  return out;
}

}  // namespace cipipe::detail
