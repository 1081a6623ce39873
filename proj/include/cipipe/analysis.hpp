#pragma once

#include "cipipe/types.hpp"

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cipipe {

/// Sorts partitions by CI (descending, ties to the lower id) and cuts the
/// running image count into thirds: Comm, then Inter, then Subj. A partition
/// that straddles a cut stays in the earlier group only if that leaves the
/// running count strictly closer to the cut.
GroupAssignment group_partitions(const std::map<int, double>& ci_scores,
                                 const std::map<int, std::size_t>& partition_image_counts);

/// Grouping of a fitted model by its own image counts.
GroupAssignment group_partitions(const PartitionModel& model);

/// Linear-interpolation quantile of unsorted values, q in [0,1].
double quantile(std::vector<double> values, double q);

/// Per-group label percentages over images that appear in `attributes`, and
/// per-group quartiles of numeric attributes. Images outside `image_partition`
/// are ignored. Throws empty_group when a group has no labeled image.
AttributeTable attribute_table(const AttributeMap& attributes, const GroupAssignment& groups,
                               const std::map<std::string, int>& image_partition);

struct ExternalAssignment {
  std::vector<Group> labels;          // per input row
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> shares{};     // sums to exactly 1
};

/// reduce -> nearest leaf -> final partition -> group.
ExternalAssignment assign_external(const PartitionModel& model, const GroupAssignment& groups,
                                   const MatrixF& embeddings, int threads = 1);

/// Shares whose floating-point sum is exactly 1 for any non-zero total.
std::array<double, 3> exact_shares(const std::array<std::size_t, 3>& counts);

/// (id, score) sorted by score descending, ties by id ascending.
std::vector<std::pair<std::string, double>> rank_images(const CiRegressor& model, const EmbeddingSet& embeddings,
                                                        bool clamp = false);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace cipipe
