#include "cipipe/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cipipe {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::bad_n_partitions: return "bad_n_partitions";
    case Errc::bad_theta_image: return "bad_theta_image";
    case Errc::bad_theta_ci: return "bad_theta_ci";
    case Errc::bad_reduced_dim: return "bad_reduced_dim";
    case Errc::bad_min_likes: return "bad_min_likes";
    case Errc::bad_kmeans_max_iters: return "bad_kmeans_max_iters";
    case Errc::bad_kmeans_tol: return "bad_kmeans_tol";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::empty_id: return "empty_id";
    case Errc::non_finite: return "non_finite";
    case Errc::bad_magic: return "bad_magic";
    case Errc::unsupported_version: return "unsupported_version";
    case Errc::truncated: return "truncated";
    case Errc::trailing_data: return "trailing_data";
    case Errc::io_failure: return "io_failure";
    case Errc::missing_header: return "missing_header";
    case Errc::empty_field: return "empty_field";
    case Errc::malformed_row: return "malformed_row";
    case Errc::zero_rows: return "zero_rows";
    case Errc::malformed_numeric: return "malformed_numeric";
    case Errc::schema_version: return "schema_version";
    case Errc::invariant_violation: return "invariant_violation";
    case Errc::infeasible: return "infeasible";
    case Errc::too_few_points: return "too_few_points";
    case Errc::degenerate_rank: return "degenerate_rank";
    case Errc::degenerate_targets: return "degenerate_targets";
    case Errc::singular_system: return "singular_system";
    case Errc::not_converged: return "not_converged";
    case Errc::too_few_partitions: return "too_few_partitions";
    case Errc::empty_group: return "empty_group";
    case Errc::bad_fraction: return "bad_fraction";
    case Errc::empty_split: return "empty_split";
    case Errc::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

std::string_view to_string(Group g) {
  switch (g) {
    case Group::comm: return "Comm";
    case Group::inter: return "Inter";
    case Group::subj: return "Subj";
  }
  return "unknown";
}

void EmbeddingSet::validate() const {
  std::unordered_set<std::string_view> seen;
  seen.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.image_id.empty()) throw Error(Errc::empty_id, "record " + std::to_string(i) + " has an empty id");
    if (static_cast<std::size_t>(r.vector.size()) != dim) {
      throw Error(Errc::dimension_mismatch, "record '" + r.image_id + "' has dimension " +
                                                std::to_string(r.vector.size()) + ", expected " +
                                                std::to_string(dim));
    }
    if (!r.vector.allFinite()) throw Error(Errc::non_finite, "record '" + r.image_id + "' has a non-finite component");
    if (!seen.insert(r.image_id).second) throw Error(Errc::duplicate_id, "duplicate image id '" + r.image_id + "'");
  }
}

MatrixF EmbeddingSet::matrix() const {
  MatrixF m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < records.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = records[i].vector.transpose();
  }
  return m;
}

std::vector<std::string> EmbeddingSet::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.image_id);
  return out;
}

LikesIndex LikesIndex::from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw Error(Errc::zero_rows, "likes relation is empty");
  std::map<std::string, std::set<std::string>> by_user;
  for (const auto& [user, image] : pairs) {
    if (user.empty() || image.empty()) throw Error(Errc::empty_field, "likes pair with an empty field");
    by_user[user].insert(image);
  }
  LikesIndex out;
  out.users_.reserve(by_user.size());
  out.liked_.reserve(by_user.size());
  for (auto& [user, images] : by_user) {
    out.users_.push_back(user);
    out.liked_.emplace_back(images.begin(), images.end());
  }
  return out;
}

const std::vector<std::string>& LikesIndex::liked(std::string_view user_id) const {
  auto it = std::lower_bound(users_.begin(), users_.end(), user_id);
  if (it == users_.end() || *it != user_id) {
    throw Error(Errc::invalid_argument, "unknown user '" + std::string(user_id) + "'");
  }
  return liked_[static_cast<std::size_t>(it - users_.begin())];
}

std::size_t LikesIndex::total_likes() const noexcept {
  std::size_t n = 0;
  for (const auto& l : liked_) n += l.size();
  return n;
}

void PipelineConfig::validate() const {
  if (n_partitions < 2) throw Error(Errc::bad_n_partitions, "n_partitions must be >= 2");
  if (!(theta_image > 0.0) || !std::isfinite(theta_image)) {
    throw Error(Errc::bad_theta_image, "theta_image must be a finite value > 0");
  }
  if (!(theta_ci > 0.0 && theta_ci < 1.0)) throw Error(Errc::bad_theta_ci, "theta_ci must lie in (0,1)");
  if (reduced_dim < 1) throw Error(Errc::bad_reduced_dim, "reduced_dim must be >= 1");
  if (min_likes < 1) throw Error(Errc::bad_min_likes, "min_likes must be >= 1");
  if (kmeans_max_iters < 1) throw Error(Errc::bad_kmeans_max_iters, "kmeans_max_iters must be >= 1");
  if (!(kmeans_tol >= 0.0) || !std::isfinite(kmeans_tol)) {
    throw Error(Errc::bad_kmeans_tol, "kmeans_tol must be a finite value >= 0");
  }
}

Reducer Reducer::identity(int dim) {
  Reducer r;
  r.kind = ReducerKind::identity;
  r.input_dim = dim;
  r.output_dim = dim;
  return r;
}

void Reducer::validate() const {
  if (input_dim < 1 || output_dim < 1 || output_dim > input_dim) {
    throw Error(Errc::invariant_violation, "reducer dimensions out of range");
  }
  if (kind == ReducerKind::identity) {
    if (input_dim != output_dim) throw Error(Errc::invariant_violation, "identity reducer requires r = d");
    return;
  }
  if (mean.size() != input_dim || components.rows() != output_dim || components.cols() != input_dim) {
    throw Error(Errc::invariant_violation, "pca reducer has inconsistent shapes");
  }
  if (!mean.allFinite() || !components.allFinite()) throw Error(Errc::invariant_violation, "pca reducer is not finite");
  const MatrixD gram = components * components.transpose();
  const double err = (gram - MatrixD::Identity(output_dim, output_dim)).cwiseAbs().maxCoeff();
  if (!(err < 1e-5)) throw Error(Errc::invariant_violation, "pca components are not orthonormal");
}

std::map<int, int> replay_merges(int n_leaves, const std::vector<MergeEvent>& merge_log) {
  // parent pointers over leaf and merged ids
  std::map<int, int> parent;
  for (int i = 0; i < n_leaves; ++i) parent[i] = i;
  for (const auto& ev : merge_log) {
    if (!parent.contains(ev.left_id) || !parent.contains(ev.right_id) || ev.left_id == ev.right_id) {
      throw Error(Errc::invariant_violation, "merge log references an unknown partition");
    }
    if (parent.at(ev.left_id) != ev.left_id || parent.at(ev.right_id) != ev.right_id) {
      throw Error(Errc::invariant_violation, "merge log merges an already merged partition");
    }
    if (parent.contains(ev.new_id)) throw Error(Errc::invariant_violation, "merge log reuses an id");
    parent[ev.new_id] = ev.new_id;
    parent[ev.left_id] = ev.new_id;
    parent[ev.right_id] = ev.new_id;
  }
  std::map<int, int> out;
  for (int i = 0; i < n_leaves; ++i) {
    int cur = i;
    while (parent.at(cur) != cur) cur = parent.at(cur);
    out[i] = cur;
  }
  return out;
}

std::map<int, std::size_t> PartitionModel::final_partition_sizes() const {
  std::map<int, std::size_t> sizes;
  for (const auto& [id, ci] : ci_scores) sizes[id] = 0;
  for (const auto& [image, leaf] : assignment) ++sizes[leaf_to_final.at(leaf)];
  return sizes;
}

std::map<std::string, int> PartitionModel::final_assignment() const {
  std::map<std::string, int> out;
  for (const auto& [image, leaf] : assignment) out.emplace(image, leaf_to_final.at(leaf));
  return out;
}

void PartitionModel::validate() const {
  config.validate();
  reducer.validate();
  if (centroids.rows() < 1 || centroids.cols() != reducer.output_dim) {
    throw Error(Errc::invariant_violation, "centroid matrix does not match the reducer output dimension");
  }
  if (!centroids.allFinite()) throw Error(Errc::invariant_violation, "centroids are not finite");
  for (const auto& [image, leaf] : assignment) {
    if (leaf < 0 || leaf >= n_leaves()) throw Error(Errc::invariant_violation, "image '" + image + "' has an unknown leaf");
  }
  for (const auto& ev : merge_log) {
    if (!(ev.ward_distance >= 0.0 && ev.ward_distance < config.theta_image) ||
        !(ev.user_iou > config.theta_ci && ev.user_iou <= 1.0)) {
      throw Error(Errc::invariant_violation, "merge event violates the merge thresholds");
    }
  }
  if (replay_merges(n_leaves(), merge_log) != leaf_to_final) {
    throw Error(Errc::invariant_violation, "leaf_to_final does not match the merge log");
  }
  std::set<int> finals;
  for (const auto& [leaf, fin] : leaf_to_final) finals.insert(fin);
  std::set<int> scored;
  for (const auto& [id, ci] : ci_scores) {
    if (!(ci >= 0.0 && ci <= 1.0)) throw Error(Errc::invariant_violation, "ci score outside [0,1]");
    scored.insert(id);
  }
  if (scored != finals) throw Error(Errc::invariant_violation, "ci_scores keys differ from the final partitions");
}

void CiRegressor::validate() const {
  if (weights.size() < 1) throw Error(Errc::invariant_violation, "regressor has no weights");
  if (!weights.allFinite() || !std::isfinite(bias)) throw Error(Errc::invariant_violation, "regressor is not finite");
  if (!(ridge_lambda >= 0.0)) throw Error(Errc::invariant_violation, "ridge_lambda must be >= 0");
  if (!(target_min < target_max)) throw Error(Errc::invariant_violation, "target_min must be < target_max");
}

}  // namespace cipipe
