#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cipipe {

// Row-major so that one data point is one contiguous row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;
using VectorF = Vector<float>;
using VectorD = Vector<double>;

/// Error categories. Every failure raised by the library carries one of these.
enum class Errc {
  // configuration
  bad_n_partitions,
  bad_theta_image,
  bad_theta_ci,
  bad_reduced_dim,
  bad_min_likes,
  bad_kmeans_max_iters,
  bad_kmeans_tol,
  // data
  dimension_mismatch,
  duplicate_id,
  empty_id,
  non_finite,
  bad_magic,
  unsupported_version,
  truncated,
  trailing_data,
  io_failure,
  missing_header,
  empty_field,
  malformed_row,
  zero_rows,
  malformed_numeric,
  schema_version,
  invariant_violation,
  infeasible,
  // algorithms
  too_few_points,
  degenerate_rank,
  degenerate_targets,
  singular_system,
  not_converged,
  too_few_partitions,
  empty_group,
  bad_fraction,
  empty_split,
  invalid_argument,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct EmbeddingRecord {
  std::string image_id;
  VectorF vector;

  friend bool operator==(const EmbeddingRecord& a, const EmbeddingRecord& b) {
    return a.image_id == b.image_id && a.vector.size() == b.vector.size() &&
           a.vector == b.vector;
  }
};

/// A dataset of embeddings sharing one dimension.
struct EmbeddingSet {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;

  /// Throws on dimension mismatch, non-finite components, empty or duplicate ids.
  void validate() const;
  /// n x d matrix, rows in record order.
  MatrixF matrix() const;
  std::vector<std::string> ids() const;
};

/// user -> liked images. Users are kept in sorted order; a user's index is its
/// position in that order.
class LikesIndex {
 public:
  LikesIndex() = default;
  /// Duplicate pairs collapse. Throws on empty ids or when no pair is given.
  static LikesIndex from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

  std::size_t total_users() const noexcept { return users_.size(); }
  const std::vector<std::string>& users() const noexcept { return users_; }
  /// Sorted, duplicate-free liked images of the i-th user.
  const std::vector<std::string>& liked(std::size_t user_index) const { return liked_[user_index]; }
  const std::vector<std::string>& liked(std::string_view user_id) const;
  std::size_t total_likes() const noexcept;

 private:
  std::vector<std::string> users_;
  std::vector<std::vector<std::string>> liked_;
};

struct PipelineConfig {
  int n_partitions = 200;
  double theta_image = 3.0;
  double theta_ci = 0.25;
  int reduced_dim = 7;
  int min_likes = 1;
  std::uint64_t seed = 0;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;

  /// Throws Error with a field-specific code for the first out-of-range field.
  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct Partition {
  int id = 0;
  std::vector<std::string> member_image_ids;  // sorted, unique
  VectorD centroid_reduced;

  std::size_t size() const noexcept { return member_image_ids.size(); }
};

struct MergeEvent {
  int left_id = 0;
  int right_id = 0;
  int new_id = 0;
  double ward_distance = 0.0;
  double user_iou = 0.0;

  friend bool operator==(const MergeEvent&, const MergeEvent&) = default;
};

enum class ReducerKind { identity, pca };

struct Reducer {
  ReducerKind kind = ReducerKind::identity;
  int input_dim = 0;
  int output_dim = 0;
  VectorD mean;         // pca only
  MatrixD components;   // r x d, orthonormal rows; pca only
  double explained_variance_ratio = 1.0;

  static Reducer identity(int dim);
  void validate() const;
};

struct PartitionModel {
  PipelineConfig config;
  Reducer reducer;
  MatrixD centroids;  // N x r, leaf k-means centroids
  std::map<std::string, int> assignment;  // image -> leaf id
  std::vector<MergeEvent> merge_log;
  std::map<int, int> leaf_to_final;
  std::map<int, double> ci_scores;  // final id -> CI

  int n_leaves() const noexcept { return static_cast<int>(centroids.rows()); }
  /// Image count per final partition (every final partition appears).
  std::map<int, std::size_t> final_partition_sizes() const;
  /// image -> final partition id.
  std::map<std::string, int> final_assignment() const;
  void validate() const;
};

/// Replays a merge log over leaves 0..n_leaves-1.
std::map<int, int> replay_merges(int n_leaves, const std::vector<MergeEvent>& merge_log);

struct CiRegressor {
  VectorD weights;
  double bias = 0.0;
  double ridge_lambda = 0.0;
  double target_min = 0.0;
  double target_max = 1.0;

  int dim() const noexcept { return static_cast<int>(weights.size()); }
  void validate() const;
};

enum class Group { comm = 0, inter = 1, subj = 2 };
std::string_view to_string(Group g);

struct GroupAssignment {
  std::map<int, Group> group_of;
  /// Cumulative image counts at the end of Comm and at the end of Inter.
  std::array<std::size_t, 2> boundaries{};
};

struct Quartiles {
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

struct AttributeRow {
  std::string attribute;
  double percent_comm = 0.0;
  double percent_inter = 0.0;
  double percent_subj = 0.0;
  double delta = 0.0;
};

struct NumericRow {
  std::string attribute;
  std::array<std::optional<Quartiles>, 3> per_group;  // indexed by Group
};

struct AttributeTable {
  std::vector<AttributeRow> rows;  // sorted by delta descending
  std::vector<NumericRow> numeric_rows;  // sorted by name
};

/// Labels of one image from an attributes file.
struct ImageAttributes {
  std::set<std::string> labels;
  std::map<std::string, double> numeric;
};

using AttributeMap = std::map<std::string, ImageAttributes>;

}  // namespace cipipe
