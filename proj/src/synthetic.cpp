#include "cipipe/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace cipipe {
namespace {

std::string padded(const char* prefix, int width, std::size_t value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, value);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_topics < 2) throw Error(Errc::invalid_argument, "n_topics must be >= 2");
  if (topic_dim < 1) throw Error(Errc::invalid_argument, "topic_dim must be >= 1");
  if (n_users < 1) throw Error(Errc::invalid_argument, "n_users must be >= 1");
  if (common_topic_count < 0 || common_topic_count >= n_topics) {
    throw Error(Errc::invalid_argument, "common_topic_count must lie in [0, n_topics)");
  }
  if (!(common_like_prob >= 0.0 && common_like_prob <= 1.0)) {
    throw Error(Errc::invalid_argument, "common_like_prob must lie in [0,1]");
  }
  if (niche_users_per_topic < 1 || niche_users_per_topic > n_users) {
    throw Error(Errc::invalid_argument, "niche_users_per_topic must lie in [1, n_users]");
  }
  if (images_per_topic < 1) throw Error(Errc::invalid_argument, "images_per_topic must be >= 1");
  if (!(cluster_std > 0.0) || !std::isfinite(cluster_std)) throw Error(Errc::invalid_argument, "cluster_std must be > 0");
  if (max_likes_per_topic < 1) throw Error(Errc::invalid_argument, "max_likes_per_topic must be >= 1");
  const long long niche_topics = n_topics - common_topic_count;
  if (niche_topics * niche_users_per_topic > n_users) {
    throw Error(Errc::infeasible, "disjoint niche blocks need " + std::to_string(niche_topics * niche_users_per_topic) +
                                      " users but only " + std::to_string(n_users) + " exist");
  }
  const bool common_possible = common_topic_count > 0 && common_like_prob > 0.0;
  if (!common_possible && niche_topics * niche_users_per_topic < n_users) {
    throw Error(Errc::infeasible, "users outside every niche block can never like an image");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int d = spec.topic_dim;
  const auto n_topics = static_cast<std::size_t>(spec.n_topics);
  const auto per_topic = static_cast<std::size_t>(spec.images_per_topic);

  SyntheticData data;
  auto& truth = data.truth;

  // topic centers, rejection-sampled for separation
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  const double min_sep = 8.0 * spec.cluster_std;
  truth.topic_centers.resize(spec.n_topics, d);
  for (std::size_t t = 0; t < n_topics; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      for (int c = 0; c < d; ++c) truth.topic_centers(row, c) = box(rng);
      placed = true;
      for (Eigen::Index prev = 0; prev < row && placed; ++prev) {
        placed = (truth.topic_centers.row(prev) - truth.topic_centers.row(row)).norm() >= min_sep;
      }
    }
    if (!placed) throw Error(Errc::infeasible, "cannot place topic centers with the requested separation");
  }

  // images
  std::normal_distribution<double> noise(0.0, spec.cluster_std);
  data.embeddings.dim = static_cast<std::uint32_t>(d);
  data.embeddings.records.reserve(n_topics * per_topic);
  for (std::size_t t = 0; t < n_topics; ++t) {
    for (std::size_t i = 0; i < per_topic; ++i) {
      EmbeddingRecord rec;
      rec.image_id = padded("img", 6, t * per_topic + i);
      rec.vector.resize(d);
      for (int c = 0; c < d; ++c) {
        rec.vector(c) = static_cast<float>(truth.topic_centers(static_cast<Eigen::Index>(t), c) + noise(rng));
      }
      data.embeddings.records.push_back(std::move(rec));
      truth.topic_of_image.push_back(static_cast<int>(t));
    }
  }

  // likes
  const int max_likes = std::min(spec.max_likes_per_topic, spec.images_per_topic);
  std::uniform_int_distribution<int> like_count(1, max_likes);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::size_t> scratch(per_topic);
  auto like_topic = [&](std::size_t topic, std::vector<std::pair<std::string, std::string>>& out,
                        const std::string& user) {
    std::iota(scratch.begin(), scratch.end(), std::size_t{0});
    const int m = like_count(rng);
    for (int k = 0; k < m; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), per_topic - 1);
      std::swap(scratch[static_cast<std::size_t>(k)], scratch[pick(rng)]);
      out.emplace_back(user, data.embeddings.records[topic * per_topic + scratch[static_cast<std::size_t>(k)]].image_id);
    }
  };

  std::vector<std::pair<std::string, std::string>> pairs;
  const auto common = static_cast<std::size_t>(spec.common_topic_count);
  const auto block = static_cast<std::size_t>(spec.niche_users_per_topic);
  for (std::size_t u = 0; u < static_cast<std::size_t>(spec.n_users); ++u) {
    const std::string user = padded("user", 5, u);
    std::vector<std::pair<std::string, std::string>> mine;
    const std::size_t niche_topic = common + u / block;
    const bool in_block = niche_topic < n_topics;
    for (int attempt = 0; mine.empty(); ++attempt) {
      if (attempt == 10000) throw Error(Errc::infeasible, "user " + user + " never likes an image");
      for (std::size_t t = 0; t < common; ++t) {
        if (coin(rng) < spec.common_like_prob) like_topic(t, mine, user);
      }
      if (in_block) like_topic(niche_topic, mine, user);
    }
    pairs.insert(pairs.end(), mine.begin(), mine.end());
  }
  data.likes = LikesIndex::from_pairs(pairs);

  truth.popularity.resize(n_topics);
  for (std::size_t t = 0; t < n_topics; ++t) {
    truth.popularity[t] = t < common ? spec.common_like_prob
                                     : static_cast<double>(block) / static_cast<double>(spec.n_users);
  }
  return data;
}

nlohmann::json to_json(const GroundTruth& truth, const EmbeddingSet& embeddings) {
  nlohmann::json topics = nlohmann::json::object();
  for (std::size_t i = 0; i < embeddings.records.size(); ++i) {
    topics[embeddings.records[i].image_id] = truth.topic_of_image.at(i);
  }
  return nlohmann::json{{"topic_of_image", std::move(topics)}, {"popularity", truth.popularity}};
}

}  // namespace cipipe
