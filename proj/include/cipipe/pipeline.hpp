#pragma once

#include "cipipe/regress.hpp"
#include "cipipe/types.hpp"

#include <optional>

namespace cipipe {

/// Reduce, k-means, dual-criterion merge, CI. With the identity reducer the
/// stored config's reduced_dim is set to the embedding dimension.
PartitionModel fit_partition_model(const EmbeddingSet& embeddings, const LikesIndex& likes, PipelineConfig config,
                                   ReducerKind reducer_kind, int threads = 1);

/// Leaf partitions of a fit, with centroids computed as member means in the
/// reduced space.
std::vector<Partition> leaf_partitions(const std::vector<std::string>& ids, const MatrixD& reduced,
                                       const std::vector<int>& labels, int n_leaves);

/// Final partitions of a model (members only; centroids are left empty).
std::vector<Partition> final_partitions(const PartitionModel& model);

struct TrainingSet {
  std::vector<std::string> ids;
  MatrixF x;
  VectorD targets;
};

/// Images of `embeddings` that the model assigned, each with the normalized
/// CI of its final partition.
TrainingSet training_set(const PartitionModel& model, const EmbeddingSet& embeddings,
                         const NormalizedTargets& targets);

struct TrainReport {
  CiRegressor regressor;
  double train_r2 = 0.0;
  double test_r2 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Fits CI_R on a seeded train split and scores R^2 on both sides. Without an
/// explicit ridge_lambda, 1e-4 * trace(Xc^T Xc) / d of the training rows is used.
TrainReport train_regressor(const PartitionModel& model, const EmbeddingSet& embeddings,
                            std::optional<double> ridge_lambda, double train_fraction, std::uint64_t seed,
                            int threads = 1);

}  // namespace cipipe
