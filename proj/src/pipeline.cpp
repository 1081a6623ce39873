#include "cipipe/pipeline.hpp"

#include "cipipe/ci.hpp"
#include "cipipe/partition.hpp"
#include "cipipe/reduce.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

namespace cipipe {

std::vector<Partition> leaf_partitions(const std::vector<std::string>& ids, const MatrixD& reduced,
                                       const std::vector<int>& labels, int n_leaves) {
  std::vector<Partition> leaves(static_cast<std::size_t>(n_leaves));
  for (int k = 0; k < n_leaves; ++k) {
    leaves[static_cast<std::size_t>(k)].id = k;
    leaves[static_cast<std::size_t>(k)].centroid_reduced = VectorD::Zero(reduced.cols());
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto& leaf = leaves[static_cast<std::size_t>(labels[i])];
    leaf.member_image_ids.push_back(ids[i]);
    leaf.centroid_reduced += reduced.row(static_cast<Eigen::Index>(i)).transpose();
  }
  for (auto& leaf : leaves) {
    if (leaf.member_image_ids.empty()) {
      throw Error(Errc::too_few_points, "leaf " + std::to_string(leaf.id) +
                                            " is empty; the data has fewer distinct points than partitions");
    }
    leaf.centroid_reduced /= static_cast<double>(leaf.size());
    std::sort(leaf.member_image_ids.begin(), leaf.member_image_ids.end());
  }
  return leaves;
}

PartitionModel fit_partition_model(const EmbeddingSet& embeddings, const LikesIndex& likes, PipelineConfig config,
                                   ReducerKind reducer_kind, int threads) {
  embeddings.validate();
  const int d = static_cast<int>(embeddings.dim);
  if (reducer_kind == ReducerKind::identity) config.reduced_dim = d;
  config.validate();
  if (config.reduced_dim > d) {
    throw Error(Errc::bad_reduced_dim, "reduced_dim " + std::to_string(config.reduced_dim) +
                                           " exceeds the embedding dimension " + std::to_string(d));
  }

  const MatrixF x = embeddings.matrix();
  PartitionModel model;
  model.config = config;
  model.reducer = reducer_kind == ReducerKind::identity ? Reducer::identity(d) : fit_pca(x, config.reduced_dim, config.seed);
  const MatrixD reduced = transform(model.reducer, x, threads);

  const auto km = kmeans_fit(reduced, config.n_partitions, config.seed, config.kmeans_max_iters, config.kmeans_tol, threads);
  model.centroids = km.centroids;
  const auto ids = embeddings.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) model.assignment.emplace(ids[i], km.labels[i]);

  const auto leaves = leaf_partitions(ids, reduced, km.labels, config.n_partitions);
  auto merged = merge_partitions(leaves, likes, config);
  model.merge_log = std::move(merged.merge_log);
  model.leaf_to_final = std::move(merged.leaf_to_final);
  model.ci_scores = std::move(merged.ci_scores);
  model.validate();
  return model;
}

std::vector<Partition> final_partitions(const PartitionModel& model) {
  std::map<int, Partition> by_id;
  for (const auto& [id, ci] : model.ci_scores) by_id[id].id = id;
  for (const auto& [image, leaf] : model.assignment) {
    by_id[model.leaf_to_final.at(leaf)].member_image_ids.push_back(image);
  }
  std::vector<Partition> out;
  out.reserve(by_id.size());
  for (auto& [id, part] : by_id) out.push_back(std::move(part));
  return out;  // assignment is a sorted map, so members are already sorted
}

TrainingSet training_set(const PartitionModel& model, const EmbeddingSet& embeddings,
                         const NormalizedTargets& targets) {
  if (embeddings.dim != static_cast<std::uint32_t>(model.reducer.input_dim)) {
    throw Error(Errc::dimension_mismatch, "embeddings do not match the model dimension");
  }
  std::vector<std::size_t> rows;
  std::vector<double> values;
  for (std::size_t i = 0; i < embeddings.records.size(); ++i) {
    const auto it = model.assignment.find(embeddings.records[i].image_id);
    if (it == model.assignment.end()) continue;
    rows.push_back(i);
    values.push_back(targets.targets.at(model.leaf_to_final.at(it->second)));
  }
  TrainingSet out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), embeddings.dim);
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.ids.push_back(embeddings.records[rows[k]].image_id);
    out.x.row(static_cast<Eigen::Index>(k)) = embeddings.records[rows[k]].vector.transpose();
    out.targets(static_cast<Eigen::Index>(k)) = values[k];
  }
  return out;
}

TrainReport train_regressor(const PartitionModel& model, const EmbeddingSet& embeddings,
                            std::optional<double> ridge_lambda, double train_fraction, std::uint64_t seed,
                            int threads) {
  const auto normalized = normalize_targets(model.ci_scores);
  const auto all = training_set(model, embeddings, normalized);
  if (all.ids.size() < 3) throw Error(Errc::too_few_points, "too few assigned images to train on");
  const auto split = split_train_test(all.ids, train_fraction, seed);

  std::unordered_map<std::string_view, Eigen::Index> row_of;
  for (std::size_t i = 0; i < all.ids.size(); ++i) row_of.emplace(all.ids[i], static_cast<Eigen::Index>(i));
  auto gather = [&](const std::vector<std::string>& ids, MatrixF& x, VectorD& t) {
    // keep the original row order so results do not depend on the shuffle
    std::vector<Eigen::Index> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) rows.push_back(row_of.at(id));
    std::sort(rows.begin(), rows.end());
    x.resize(static_cast<Eigen::Index>(rows.size()), all.x.cols());
    t.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k)) = all.x.row(rows[k]);
      t(static_cast<Eigen::Index>(k)) = all.targets(rows[k]);
    }
  };
  MatrixF x_train, x_test;
  VectorD t_train, t_test;
  gather(split.train, x_train, t_train);
  gather(split.test, x_test, t_test);

  const double lambda = ridge_lambda ? *ridge_lambda : default_ridge_lambda(x_train);
  TrainReport report;
  report.regressor = fit(x_train, t_train, lambda, threads);
  report.regressor.target_min = normalized.target_min;
  report.regressor.target_max = normalized.target_max;
  report.n_train = split.train.size();
  report.n_test = split.test.size();
  report.train_r2 = r_squared(predict(report.regressor, x_train), t_train);
  // a held-out side with fewer than two rows or constant targets has no R^2
  const bool scorable = t_test.size() >= 2 && t_test.maxCoeff() > t_test.minCoeff();
  report.test_r2 = scorable ? r_squared(predict(report.regressor, x_test), t_test)
                            : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace cipipe
