#include "cipipe/analysis.hpp"

#include "cipipe/partition.hpp"
#include "cipipe/reduce.hpp"
#include "cipipe/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cipipe {

GroupAssignment group_partitions(const std::map<int, double>& ci_scores,
                                 const std::map<int, std::size_t>& partition_image_counts) {
  if (ci_scores.size() < 3) throw Error(Errc::too_few_partitions, "grouping needs at least 3 partitions");
  std::vector<std::pair<int, double>> order(ci_scores.begin(), ci_scores.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::size_t total = 0;
  for (const auto& [id, ci] : order) {
    const auto it = partition_image_counts.find(id);
    if (it == partition_image_counts.end() || it->second < 1) {
      throw Error(Errc::invalid_argument, "partition " + std::to_string(id) + " has no image count");
    }
    total += it->second;
  }

  GroupAssignment out;
  int group = 0;
  std::size_t cum = 0;
  for (const auto& [id, ci] : order) {
    const std::size_t count = partition_image_counts.at(id);
    bool closes_group = false;
    while (group < 2) {
      const double target = static_cast<double>(total) * (group + 1) / 3.0;
      const double before = static_cast<double>(cum);
      const double after = static_cast<double>(cum + count);
      if (after <= target) break;
      if (std::abs(after - target) < std::abs(before - target)) {
        closes_group = true;
        break;
      }
      out.boundaries[static_cast<std::size_t>(group)] = cum;
      ++group;
    }
    out.group_of[id] = static_cast<Group>(group);
    cum += count;
    if (closes_group) {
      out.boundaries[static_cast<std::size_t>(group)] = cum;
      ++group;
    }
  }
  for (int g = group; g < 2; ++g) out.boundaries[static_cast<std::size_t>(g)] = cum;
  return out;
}

GroupAssignment group_partitions(const PartitionModel& model) {
  return group_partitions(model.ci_scores, model.final_partition_sizes());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::invalid_argument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AttributeTable attribute_table(const AttributeMap& attributes, const GroupAssignment& groups,
                               const std::map<std::string, int>& image_partition) {
  std::array<std::size_t, 3> labeled{};
  std::map<std::string, std::array<std::size_t, 3>> label_counts;
  std::map<std::string, std::array<std::vector<double>, 3>> numeric_values;
  for (const auto& [image, attrs] : attributes) {
    for (const auto& label : attrs.labels) label_counts.try_emplace(label);
    for (const auto& [name, value] : attrs.numeric) numeric_values.try_emplace(name);
    const auto part = image_partition.find(image);
    if (part == image_partition.end()) continue;
    const auto grp = groups.group_of.find(part->second);
    if (grp == groups.group_of.end()) continue;
    const auto g = static_cast<std::size_t>(grp->second);
    ++labeled[g];
    for (const auto& label : attrs.labels) ++label_counts[label][g];
    for (const auto& [name, value] : attrs.numeric) numeric_values[name][g].push_back(value);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    if (labeled[g] == 0) {
      throw Error(Errc::empty_group, "group " + std::string(to_string(static_cast<Group>(g))) + " has no labeled images");
    }
  }

  AttributeTable table;
  for (const auto& [label, counts] : label_counts) {
    AttributeRow row;
    row.attribute = label;
    row.percent_comm = 100.0 * static_cast<double>(counts[0]) / static_cast<double>(labeled[0]);
    row.percent_inter = 100.0 * static_cast<double>(counts[1]) / static_cast<double>(labeled[1]);
    row.percent_subj = 100.0 * static_cast<double>(counts[2]) / static_cast<double>(labeled[2]);
    row.delta = row.percent_comm - row.percent_subj;
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const AttributeRow& a, const AttributeRow& b) { return a.delta > b.delta; });

  for (auto& [name, per_group] : numeric_values) {
    NumericRow row;
    row.attribute = name;
    for (std::size_t g = 0; g < 3; ++g) {
      if (per_group[g].empty()) continue;
      row.per_group[g] = Quartiles{quantile(per_group[g], 0.25), quantile(per_group[g], 0.5), quantile(per_group[g], 0.75)};
    }
    table.numeric_rows.push_back(std::move(row));
  }
  return table;
}

std::array<double, 3> exact_shares(const std::array<std::size_t, 3>& counts) {
  std::array<double, 3> shares{};
  const std::size_t total = counts[0] + counts[1] + counts[2];
  if (total == 0) return shares;
  const double n = static_cast<double>(total);
  std::size_t last = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    if (counts[g] > 0) last = g;
  }
  // The last non-empty group takes 1 minus the running sum, which makes the
  // left-to-right sum round to exactly 1.
  double running = 0.0;
  for (std::size_t g = 0; g < last; ++g) {
    shares[g] = static_cast<double>(counts[g]) / n;
    running += shares[g];
  }
  shares[last] = 1.0 - running;
  return shares;
}

ExternalAssignment assign_external(const PartitionModel& model, const GroupAssignment& groups,
                                   const MatrixF& embeddings, int threads) {
  if (embeddings.cols() != model.reducer.input_dim) {
    throw Error(Errc::dimension_mismatch, "embeddings have dimension " + std::to_string(embeddings.cols()) +
                                              ", model expects " + std::to_string(model.reducer.input_dim));
  }
  const MatrixD reduced = transform(model.reducer, embeddings, threads);
  const auto leaves = assign(model.centroids, reduced, threads);
  ExternalAssignment out;
  out.labels.reserve(leaves.size());
  for (const int leaf : leaves) {
    const Group g = groups.group_of.at(model.leaf_to_final.at(leaf));
    out.labels.push_back(g);
    ++out.counts[static_cast<std::size_t>(g)];
  }
  out.shares = exact_shares(out.counts);
  return out;
}

std::vector<std::pair<std::string, double>> rank_images(const CiRegressor& model, const EmbeddingSet& embeddings,
                                                        bool clamp) {
  const VectorD scores = predict(model, embeddings.matrix(), clamp);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(embeddings.records.size());
  for (std::size_t i = 0; i < embeddings.records.size(); ++i) {
    out.emplace_back(embeddings.records[i].image_id, scores(static_cast<Eigen::Index>(i)));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i + j - 1)) / 2.0 + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(Errc::invalid_argument, "spearman needs two equal-length samples");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const Eigen::Map<const VectorD> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const VectorD> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const VectorD xc = x.array() - x.mean();
  const VectorD yc = y.array() - y.mean();
  const double denom = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  if (denom == 0.0) throw Error(Errc::degenerate_targets, "spearman: a sample is constant");
  return xc.dot(yc) / denom;
}

}  // namespace cipipe
