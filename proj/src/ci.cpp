#include "cipipe/ci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace cipipe {
namespace {

// (user index, liked images inside the partition), sorted by user index.
using UserCounts = std::vector<std::pair<int, int>>;

std::vector<UserCounts> count_likes(const std::vector<Partition>& partitions, const LikesIndex& likes) {
  std::unordered_map<std::string_view, int> slot_of;
  for (std::size_t s = 0; s < partitions.size(); ++s) {
    for (const auto& image : partitions[s].member_image_ids) {
      if (!slot_of.emplace(image, static_cast<int>(s)).second) {
        throw Error(Errc::invalid_argument, "image '" + image + "' belongs to more than one partition");
      }
    }
  }
  std::vector<UserCounts> counts(partitions.size());
  std::vector<int> hits;
  for (std::size_t u = 0; u < likes.total_users(); ++u) {
    hits.clear();
    for (const auto& image : likes.liked(u)) {
      if (auto it = slot_of.find(image); it != slot_of.end()) hits.push_back(it->second);
    }
    std::sort(hits.begin(), hits.end());
    for (std::size_t i = 0; i < hits.size();) {
      std::size_t j = i;
      while (j < hits.size() && hits[j] == hits[i]) ++j;
      counts[static_cast<std::size_t>(hits[i])].emplace_back(static_cast<int>(u), static_cast<int>(j - i));
      i = j;
    }
  }
  return counts;
}

UserCounts merge_counts(const UserCounts& a, const UserCounts& b) {
  UserCounts out;
  out.reserve(a.size() + b.size());
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      out.push_back(*ia++);
    } else if (ia == a.end() || ib->first < ia->first) {
      out.push_back(*ib++);
    } else {
      out.emplace_back(ia->first, ia->second + ib->second);
      ++ia;
      ++ib;
    }
  }
  return out;
}

std::vector<int> users_with(const UserCounts& counts, int min_likes) {
  std::vector<int> out;
  for (const auto& [user, n] : counts) {
    if (n >= min_likes) out.push_back(user);
  }
  return out;
}

std::vector<std::string> merged_members(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

void check_leaves(const std::vector<Partition>& leaves) {
  if (leaves.empty()) throw Error(Errc::invalid_argument, "merge_partitions needs at least one leaf");
  std::unordered_set<int> ids;
  const auto dim = leaves.front().centroid_reduced.size();
  for (const auto& leaf : leaves) {
    if (leaf.size() == 0) throw Error(Errc::invalid_argument, "leaf " + std::to_string(leaf.id) + " is empty");
    if (leaf.id < 0 || !ids.insert(leaf.id).second) throw Error(Errc::invalid_argument, "leaf ids must be unique and >= 0");
    if (leaf.centroid_reduced.size() != dim) throw Error(Errc::dimension_mismatch, "leaf centroids differ in dimension");
    if (!std::is_sorted(leaf.member_image_ids.begin(), leaf.member_image_ids.end())) {
      throw Error(Errc::invalid_argument, "leaf members must be sorted");
    }
  }
}

}  // namespace

UserSet unique_users(std::span<const std::string> members, const LikesIndex& likes, int min_likes) {
  if (min_likes < 1) throw Error(Errc::bad_min_likes, "min_likes must be >= 1");
  const std::unordered_set<std::string_view> inside(members.begin(), members.end());
  UserSet out;
  for (std::size_t u = 0; u < likes.total_users(); ++u) {
    int hits = 0;
    for (const auto& image : likes.liked(u)) {
      if (inside.contains(image) && ++hits >= min_likes) {
        out.insert(likes.users()[u]);
        break;
      }
    }
  }
  return out;
}

double ci_score(std::span<const std::string> members, const LikesIndex& likes, int min_likes) {
  if (likes.total_users() == 0) throw Error(Errc::invalid_argument, "likes index has no users");
  return static_cast<double>(unique_users(members, likes, min_likes).size()) /
         static_cast<double>(likes.total_users());
}

std::map<int, double> ci_scores(const std::vector<Partition>& partitions, const LikesIndex& likes, int min_likes) {
  if (min_likes < 1) throw Error(Errc::bad_min_likes, "min_likes must be >= 1");
  if (likes.total_users() == 0) throw Error(Errc::invalid_argument, "likes index has no users");
  const auto counts = count_likes(partitions, likes);
  const double m = static_cast<double>(likes.total_users());
  std::map<int, double> out;
  for (std::size_t s = 0; s < partitions.size(); ++s) {
    out[partitions[s].id] = static_cast<double>(users_with(counts[s], min_likes).size()) / m;
  }
  return out;
}

MergeResult merge_partitions(const std::vector<Partition>& leaves, const LikesIndex& likes,
                             const PipelineConfig& config) {
  config.validate();
  check_leaves(leaves);
  if (likes.total_users() == 0) throw Error(Errc::invalid_argument, "likes index has no users");

  struct Node {
    Partition part;
    UserCounts counts;
    std::vector<int> users;  // counts filtered by min_likes
  };

  // Nodes are indexed by slot; leaves occupy slots in input order, merged
  // partitions are appended. `active` lists live slots in ascending id order.
  std::vector<Node> nodes;
  nodes.reserve(2 * leaves.size());
  {
    auto counts = count_likes(leaves, likes);
    for (std::size_t s = 0; s < leaves.size(); ++s) {
      Node node{leaves[s], std::move(counts[s]), {}};
      node.users = users_with(node.counts, config.min_likes);
      nodes.push_back(std::move(node));
    }
  }
  std::vector<std::size_t> active(leaves.size());
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) { return nodes[a].part.id < nodes[b].part.id; });

  const std::size_t max_nodes = 2 * leaves.size();
  std::vector<double> d2(max_nodes * max_nodes, 0.0);
  std::vector<double> iou(max_nodes * max_nodes, 0.0);
  auto at = [&](std::vector<double>& table, std::size_t a, std::size_t b) -> double& {
    return table[a * max_nodes + b];
  };
  auto set_pair = [&](std::vector<double>& table, std::size_t a, std::size_t b, double value) {
    at(table, a, b) = value;
    at(table, b, a) = value;
  };
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      const double d = ward_distance(nodes[i].part, nodes[j].part);
      set_pair(d2, i, j, d * d);
      set_pair(iou, i, j, user_iou(nodes[i].users, nodes[j].users));
    }
  }

  int next_id = 0;
  for (const auto& leaf : leaves) next_id = std::max(next_id, leaf.id + 1);

  MergeResult result;
  std::map<int, int> parent;
  for (const auto& leaf : leaves) parent[leaf.id] = leaf.id;

  while (true) {
    std::size_t best_a = 0, best_b = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const std::size_t a = active[i], b = active[j];
        const double d = std::sqrt(std::max(0.0, at(d2, a, b)));
        if (d < config.theta_image && at(iou, a, b) > config.theta_ci && d < best_d) {
          best_d = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (!std::isfinite(best_d)) break;

    const Node& na = nodes[best_a];
    const Node& nb = nodes[best_b];
    const double size_a = static_cast<double>(na.part.size());
    const double size_b = static_cast<double>(nb.part.size());

    Node merged;
    merged.part.id = next_id++;
    merged.part.member_image_ids = merged_members(na.part.member_image_ids, nb.part.member_image_ids);
    merged.part.centroid_reduced = (size_a * na.part.centroid_reduced + size_b * nb.part.centroid_reduced) / (size_a + size_b);
    merged.counts = merge_counts(na.counts, nb.counts);
    merged.users = users_with(merged.counts, config.min_likes);

    result.merge_log.push_back({na.part.id, nb.part.id, merged.part.id, best_d, at(iou, best_a, best_b)});
    parent[na.part.id] = merged.part.id;
    parent[nb.part.id] = merged.part.id;
    parent[merged.part.id] = merged.part.id;

    const std::size_t slot = nodes.size();
    nodes.push_back(std::move(merged));
    std::erase_if(active, [&](std::size_t s) { return s == best_a || s == best_b; });
    // Lance-Williams update for the Ward linkage on squared distances
    const double d2_ab = at(d2, best_a, best_b);
    for (const std::size_t k : active) {
      const double size_k = static_cast<double>(nodes[k].part.size());
      const double value = ((size_a + size_k) * at(d2, best_a, k) + (size_b + size_k) * at(d2, best_b, k) -
                            size_k * d2_ab) /
                           (size_a + size_b + size_k);
      set_pair(d2, slot, k, std::max(0.0, value));
      set_pair(iou, slot, k, user_iou(nodes[slot].users, nodes[k].users));
    }
    active.push_back(slot);
  }

  for (const auto& leaf : leaves) {
    int cur = leaf.id;
    while (parent.at(cur) != cur) cur = parent.at(cur);
    result.leaf_to_final[leaf.id] = cur;
  }
  const double m = static_cast<double>(likes.total_users());
  for (const std::size_t s : active) {
    result.ci_scores[nodes[s].part.id] = static_cast<double>(nodes[s].users.size()) / m;
    result.finals.push_back(std::move(nodes[s].part));
  }
  return result;
}

}  // namespace cipipe
