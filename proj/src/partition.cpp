#include "cipipe/partition.hpp"

#include "cipipe/parallel.hpp"
#include "cipipe/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cipipe {
namespace {

std::vector<Eigen::Index> canonical_order(const MatrixD& points) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto ra = points.row(a);
    const auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

struct Assignment {
  std::vector<int> labels;
  std::vector<double> sq_dist;
  double inertia = 0.0;
};

Assignment assign_points(const MatrixD& centroids, const MatrixD& points, int threads) {
  const auto n = static_cast<std::size_t>(points.rows());
  Assignment out;
  out.labels.resize(n);
  out.sq_dist.resize(n);
  const int chunks = resolve_threads(threads);
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
  for_each_chunk(n, chunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = points.row(static_cast<Eigen::Index>(i));
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
        const double d = (centroids.row(k) - row).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(k);
        }
      }
      out.labels[i] = best;
      out.sq_dist[i] = best_d;
      sum += best_d;
    }
    partial[chunk] = sum;
  });
  for (double s : partial) out.inertia += s;
  return out;
}

// Index drawn with probability proportional to d2; never a zero-weight point.
std::size_t sample_by_weight(const std::vector<double>& d2, double total, double u) {
  const double target = u * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    cum += d2[i];
    if (cum > target && d2[i] > 0.0) return i;
  }
  for (std::size_t i = d2.size(); i-- > 0;) {  // rounding at the tail
    if (d2[i] > 0.0) return i;
  }
  return d2.size();
}

// Greedy k-means++: each step draws 2 + floor(ln N) candidates by D^2
// sampling and keeps the one that lowers the potential most.
MatrixD seed_plus_plus(const MatrixD& points, int n_clusters, std::uint64_t seed, int threads) {
  const auto n = static_cast<std::size_t>(points.rows());
  const int chunks = resolve_threads(threads);
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(n_clusters)));
  MatrixD centroids(n_clusters, points.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  // potential after adding point idx; fills `next` with the updated distances
  auto potential_with = [&](std::size_t idx, std::vector<double>& next) {
    const auto c = points.row(static_cast<Eigen::Index>(idx));
    std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
    for_each_chunk(n, chunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      double sum = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        next[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - c).squaredNorm());
        sum += next[i];
      }
      partial[chunk] = sum;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
  };

  std::vector<double> candidate(n), best(n);
  CounterRng first(seed, 0);
  std::size_t pick = static_cast<std::size_t>(first.below(n));
  potential_with(pick, d2);
  chosen[pick] = 1;
  centroids.row(0) = points.row(static_cast<Eigen::Index>(pick));
  for (int k = 1; k < n_clusters; ++k) {
    CounterRng rng(seed, static_cast<std::uint64_t>(k));
    double total = 0.0;
    for (double v : d2) total += v;
    if (total > 0.0) {
      double best_potential = std::numeric_limits<double>::infinity();
      for (int t = 0; t < trials; ++t) {
        const std::size_t idx = sample_by_weight(d2, total, rng.uniform());
        const double pot = potential_with(idx, candidate);
        if (pot < best_potential) {
          best_potential = pot;
          pick = idx;
          best.swap(candidate);
        }
      }
      d2.swap(best);
    } else {
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
    }
    chosen[pick] = 1;
    centroids.row(k) = points.row(static_cast<Eigen::Index>(pick));
  }
  return centroids;
}

// Recomputes centroids as member means, reseeding empty clusters.
void update_centroids(MatrixD& centroids, const MatrixD& points, Assignment& a, int threads) {
  const auto n = static_cast<std::size_t>(points.rows());
  const Eigen::Index k_count = centroids.rows();
  const int chunks = resolve_threads(threads);
  std::vector<MatrixD> sums(static_cast<std::size_t>(chunks), MatrixD::Zero(k_count, points.cols()));
  std::vector<std::vector<std::size_t>> counts(static_cast<std::size_t>(chunks),
                                               std::vector<std::size_t>(static_cast<std::size_t>(k_count), 0));
  for_each_chunk(n, chunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& s = sums[chunk];
    auto& c = counts[chunk];
    for (std::size_t i = begin; i < end; ++i) {
      s.row(a.labels[i]) += points.row(static_cast<Eigen::Index>(i));
      ++c[static_cast<std::size_t>(a.labels[i])];
    }
  });
  MatrixD total = sums[0];
  std::vector<std::size_t> count = counts[0];
  for (std::size_t c = 1; c < sums.size(); ++c) {
    total += sums[c];
    for (Eigen::Index k = 0; k < k_count; ++k) count[static_cast<std::size_t>(k)] += counts[c][static_cast<std::size_t>(k)];
  }

  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (count[static_cast<std::size_t>(k)] != 0) continue;
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (a.sq_dist[i] > a.sq_dist[far]) far = i;
    }
    if (a.sq_dist[far] == 0.0) continue;  // every point sits on its centroid
    const int from = a.labels[far];
    total.row(from) -= points.row(static_cast<Eigen::Index>(far));
    --count[static_cast<std::size_t>(from)];
    total.row(k) = points.row(static_cast<Eigen::Index>(far));
    count[static_cast<std::size_t>(k)] = 1;
    a.labels[far] = static_cast<int>(k);
    a.sq_dist[far] = 0.0;
  }

  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto c = count[static_cast<std::size_t>(k)];
    if (c > 0) centroids.row(k) = total.row(k) / static_cast<double>(c);
  }
}

}  // namespace

KMeansResult kmeans_fit(const MatrixD& points, int n_clusters, std::uint64_t seed, int max_iters, double tol,
                        int threads) {
  const auto n = points.rows();
  if (n_clusters < 2) throw Error(Errc::invalid_argument, "k-means needs at least 2 clusters");
  if (n < n_clusters) {
    throw Error(Errc::too_few_points, "k-means needs at least " + std::to_string(n_clusters) + " points, got " +
                                          std::to_string(n));
  }
  if (!points.allFinite()) throw Error(Errc::non_finite, "k-means input has non-finite values");
  if (max_iters < 1) throw Error(Errc::bad_kmeans_max_iters, "max_iters must be >= 1");
  if (!(tol >= 0.0)) throw Error(Errc::bad_kmeans_tol, "tol must be >= 0");

  const auto order = canonical_order(points);
  MatrixD sorted(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) sorted.row(i) = points.row(order[static_cast<std::size_t>(i)]);

  KMeansResult res;
  res.centroids = seed_plus_plus(sorted, n_clusters, seed, threads);
  Assignment current = assign_points(res.centroids, sorted, threads);
  res.inertia_history.push_back(current.inertia);
  while (res.iterations < max_iters) {
    const double previous = current.inertia;
    update_centroids(res.centroids, sorted, current, threads);
    current = assign_points(res.centroids, sorted, threads);
    ++res.iterations;
    res.inertia_history.push_back(current.inertia);
    if (current.inertia == 0.0 || previous - current.inertia <= tol * previous) break;
  }

  res.inertia = current.inertia;
  res.labels.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    res.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = current.labels[static_cast<std::size_t>(i)];
  }
  return res;
}

std::vector<int> assign(const MatrixD& centroids, const MatrixD& vectors, int threads) {
  if (centroids.cols() != vectors.cols()) {
    throw Error(Errc::dimension_mismatch, "assign: vectors have dimension " + std::to_string(vectors.cols()) +
                                              ", centroids " + std::to_string(centroids.cols()));
  }
  if (centroids.rows() < 1) throw Error(Errc::invalid_argument, "assign needs at least one centroid");
  return assign_points(centroids, vectors, threads).labels;
}

}  // namespace cipipe
