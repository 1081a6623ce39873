#pragma once

#include "cipipe/types.hpp"

#include <cmath>
#include <iterator>
#include <set>
#include <span>

namespace cipipe {

using UserSet = std::set<std::string>;

/// Users with at least `min_likes` liked images among `members`.
/// min_likes = 1 is the plain "liked at least one image" definition.
UserSet unique_users(std::span<const std::string> members, const LikesIndex& likes, int min_likes = 1);

/// |unique_users| / total users.
double ci_score(std::span<const std::string> members, const LikesIndex& likes, int min_likes = 1);

/// Jaccard overlap of two sorted, duplicate-free ranges; 0 when both are empty.
template <typename RangeA, typename RangeB>
double user_iou(const RangeA& a, const RangeB& b) {
  auto ia = std::begin(a);
  auto ib = std::begin(b);
  std::size_t common = 0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  while (ia != std::end(a) && ib != std::end(b)) {
    if (*ia < *ib) {
      ++ia;
      ++size_a;
    } else if (*ib < *ia) {
      ++ib;
      ++size_b;
    } else {
      ++common;
      ++ia;
      ++ib;
      ++size_a;
      ++size_b;
    }
  }
  size_a += static_cast<std::size_t>(std::distance(ia, std::end(a)));
  size_b += static_cast<std::size_t>(std::distance(ib, std::end(b)));
  const std::size_t uni = size_a + size_b - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

/// Ward linkage in distance units: sqrt(2|A||B| / (|A|+|B|)) * |mu_A - mu_B|.
template <typename DerivedA, typename DerivedB>
double ward_distance(std::size_t size_a, const Eigen::MatrixBase<DerivedA>& centroid_a, std::size_t size_b,
                     const Eigen::MatrixBase<DerivedB>& centroid_b) {
  if (centroid_a.size() != centroid_b.size()) throw Error(Errc::dimension_mismatch, "ward_distance: dimension mismatch");
  const double na = static_cast<double>(size_a);
  const double nb = static_cast<double>(size_b);
  return std::sqrt(2.0 * na * nb / (na + nb)) * (centroid_a - centroid_b).template cast<double>().norm();
}

inline double ward_distance(const Partition& a, const Partition& b) {
  return ward_distance(a.size(), a.centroid_reduced, b.size(), b.centroid_reduced);
}

struct MergeResult {
  std::vector<MergeEvent> merge_log;
  std::map<int, int> leaf_to_final;
  std::map<int, double> ci_scores;  // per final partition
  std::vector<Partition> finals;    // sorted by id
};

/// Greedy dual-criterion agglomeration. Repeatedly merges the pair with the
/// smallest Ward distance among pairs with distance < theta_image and user
/// IoU > theta_ci (ties: lowest id pair), until no pair qualifies. Merged
/// partitions get fresh ids counting up from the largest leaf id.
MergeResult merge_partitions(const std::vector<Partition>& leaves, const LikesIndex& likes,
                             const PipelineConfig& config);

/// CI of each partition at a given min_likes, using one pass over the likes.
std::map<int, double> ci_scores(const std::vector<Partition>& partitions, const LikesIndex& likes, int min_likes);

}  // namespace cipipe
