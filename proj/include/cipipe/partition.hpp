#pragma once

#include "cipipe/types.hpp"

#include <cstdint>
#include <vector>

namespace cipipe {

struct KMeansResult {
  MatrixD centroids;        // N x r, row k is leaf k (initialization order)
  std::vector<int> labels;  // per input row
  double inertia = 0.0;     // sum of squared distances to the assigned centroid
  int iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step
};

/// Greedy k-means++ seeding (best of 2 + ln N candidates per center)
/// followed by Lloyd iterations.
///
/// Points are processed in a canonical (lexicographic) order, so the result
/// does not depend on the order of the input rows. Seeding draws come from a
/// counter-based stream keyed by (seed, center index). Iteration stops when
/// the relative inertia improvement drops to `tol` or below, or after
/// `max_iters` updates. Clusters that empty out are reseeded with the point
/// farthest from its centroid. Returned labels are the nearest-centroid
/// assignment of the returned centroids.
KMeansResult kmeans_fit(const MatrixD& points, int n_clusters, std::uint64_t seed, int max_iters, double tol,
                        int threads = 1);

/// Nearest centroid per row (Euclidean), ties to the lowest centroid index.
std::vector<int> assign(const MatrixD& centroids, const MatrixD& vectors, int threads = 1);

}  // namespace cipipe
