#include "cipipe/regress.hpp"

#include "cipipe/random.hpp"

#include <algorithm>

namespace cipipe {

NormalizedTargets normalize_targets(const std::map<int, double>& ci_scores) {
  if (ci_scores.empty()) throw Error(Errc::degenerate_targets, "no CI scores to normalize");
  NormalizedTargets out;
  const auto [lo, hi] = std::minmax_element(ci_scores.begin(), ci_scores.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
  out.target_min = lo->second;
  out.target_max = hi->second;
  if (!(out.target_min < out.target_max)) {
    throw Error(Errc::degenerate_targets, "all CI scores are equal; targets cannot be normalized");
  }
  const double span = out.target_max - out.target_min;
  for (const auto& [id, ci] : ci_scores) out.targets[id] = (ci - out.target_min) / span;
  return out;
}

CiRegressor fit_normal_equations(const NormalEquations& ne, double ridge_lambda) {
  const auto d = ne.gram.rows();
  if (ridge_lambda == 0.0 && ne.n <= static_cast<std::size_t>(d)) {
    throw Error(Errc::singular_system, "unregularized regression needs more samples than dimensions");
  }
  MatrixD a = ne.gram;
  a.diagonal().array() += ridge_lambda;

  CiRegressor model;
  model.ridge_lambda = ridge_lambda;
  model.target_min = 0.0;
  model.target_max = 1.0;
  const auto cg = conjugate_gradient(a, ne.rhs, kRegressionTol, static_cast<int>(50 * (d + 1)));
  if (!cg.converged) {
    if (ridge_lambda == 0.0) throw Error(Errc::singular_system, "normal equations are singular or too ill-conditioned");
    throw Error(Errc::not_converged, "conjugate gradient did not reach the residual tolerance");
  }
  model.weights = cg.x;
  model.bias = ne.t_mean - ne.x_mean.dot(model.weights);
  return model;
}

double r_squared(const VectorD& predictions, const VectorD& targets) {
  if (predictions.size() != targets.size()) throw Error(Errc::dimension_mismatch, "r_squared: length mismatch");
  if (targets.size() < 2) throw Error(Errc::invalid_argument, "r_squared needs at least two samples");
  const double mean = targets.mean();
  const double ss_tot = (targets.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) throw Error(Errc::degenerate_targets, "r_squared: targets are all equal");
  const double ss_res = (predictions - targets).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

Split split_train_test(const std::vector<std::string>& image_ids, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::bad_fraction, "train fraction must lie in (0,1)");
  const std::size_t n = image_ids.size();
  // 1e-9 absorbs representation error, e.g. 10 * (1 - 0.8) = 1.9999999999999996
  const auto raw = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - fraction) + 1e-9));
  const std::size_t n_test = std::max<std::size_t>(1, raw);
  if (n_test >= n) throw Error(Errc::empty_split, "split leaves the training side empty");

  std::vector<std::string> ids = image_ids;
  CounterRng rng(seed, 0x5B1177);
  for (std::size_t i = n; i-- > 1;) std::swap(ids[i], ids[rng.below(i + 1)]);

  Split out;
  out.train.assign(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(n_test));
  out.test.assign(ids.end() - static_cast<std::ptrdiff_t>(n_test), ids.end());
  return out;
}

}  // namespace cipipe
