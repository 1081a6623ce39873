#pragma once

#include "cipipe/types.hpp"

#include <json.hpp>

namespace cipipe {

/// Planted structure: the first `common_topic_count` topics are liked by every
/// user independently with `common_like_prob`; each remaining (niche) topic is
/// liked by its own disjoint block of `niche_users_per_topic` users. A user who
/// likes a topic likes between 1 and `max_likes_per_topic` of its images.
struct SyntheticSpec {
  int n_topics = 20;
  int topic_dim = 32;
  int n_users = 100;
  int common_topic_count = 5;
  double common_like_prob = 0.95;
  int niche_users_per_topic = 5;
  int images_per_topic = 200;
  double cluster_std = 0.5;
  int max_likes_per_topic = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::vector<int> topic_of_image;  // aligned with the embedding records
  std::vector<double> popularity;   // planted fraction of users liking each topic
  MatrixD topic_centers;            // n_topics x d
};

struct SyntheticData {
  EmbeddingSet embeddings;
  LikesIndex likes;
  GroundTruth truth;
};

/// Deterministic for a given spec (including seed).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

nlohmann::json to_json(const GroundTruth& truth, const EmbeddingSet& embeddings);

}  // namespace cipipe
