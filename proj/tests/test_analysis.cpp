#include "cipipe/analysis.hpp"
#include "cipipe/regress.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cipipe;
using cipipe::testing::vec;

namespace {

PartitionModel three_cluster_model() {
  // identity reducer in 1-D, leaves at 0, 10, 20, no merges
  PartitionModel m;
  m.config.n_partitions = 3;
  m.config.reduced_dim = 1;
  m.reducer = Reducer::identity(1);
  m.centroids = MatrixD(3, 1);
  m.centroids << 0.0, 10.0, 20.0;
  m.assignment = {{"a", 0}, {"b", 1}, {"c", 2}};
  m.leaf_to_final = {{0, 0}, {1, 1}, {2, 2}};
  m.ci_scores = {{0, 0.9}, {1, 0.5}, {2, 0.1}};
  m.validate();
  return m;
}

}  // namespace

TEST(GroupPartitions, ImageCountTertiles) {
  // CI order 0,1,2 with 40/35/25 images: cuts at 33.3 and 66.7
  const auto g = group_partitions({{0, 0.9}, {1, 0.5}, {2, 0.1}}, {{0, 40}, {1, 35}, {2, 25}});
  EXPECT_EQ(g.group_of.at(0), Group::comm);
  EXPECT_EQ(g.group_of.at(1), Group::inter);
  EXPECT_EQ(g.group_of.at(2), Group::subj);
  EXPECT_EQ(g.boundaries, (std::array<std::size_t, 2>{40, 75}));
}

TEST(GroupPartitions, EqualCountsSplitEvenly) {
  std::map<int, double> ci;
  std::map<int, std::size_t> counts;
  for (int i = 0; i < 9; ++i) {
    ci[i] = 1.0 - 0.1 * i;
    counts[i] = 10;
  }
  const auto g = group_partitions(ci, counts);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(static_cast<int>(g.group_of.at(i)), i / 3) << i;
  EXPECT_EQ(g.boundaries, (std::array<std::size_t, 2>{30, 60}));
}

TEST(GroupPartitions, TiesGoToLowerId) {
  const auto g = group_partitions({{5, 0.5}, {2, 0.5}, {9, 0.5}}, {{5, 1}, {2, 1}, {9, 1}});
  EXPECT_EQ(g.group_of.at(2), Group::comm);
  EXPECT_EQ(g.group_of.at(5), Group::inter);
  EXPECT_EQ(g.group_of.at(9), Group::subj);
}

TEST(GroupPartitions, StraddlingPartitionJoinsCloserSide) {
  // total 100, first cut 33.3: 30 + 10 = 40 overshoots by 6.7, staying at 30 undershoots by 3.3
  const auto g = group_partitions({{0, 0.9}, {1, 0.8}, {2, 0.7}, {3, 0.1}}, {{0, 30}, {1, 10}, {2, 30}, {3, 30}});
  EXPECT_EQ(g.group_of.at(0), Group::comm);
  EXPECT_EQ(g.group_of.at(1), Group::inter);
  EXPECT_EQ(g.group_of.at(2), Group::inter);
  EXPECT_EQ(g.group_of.at(3), Group::subj);
}

TEST(GroupPartitions, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 40);
    std::map<int, double> ci;
    std::map<int, std::size_t> counts;
    for (int i = 0; i < n; ++i) {
      ci[i] = static_cast<double>(rng() % 1000) / 1000.0;
      counts[i] = 1 + rng() % 50;
    }
    const auto g = group_partitions(ci, counts);
    ASSERT_EQ(g.group_of.size(), ci.size());
    // CI-consistent: a higher-CI partition never sits in a later group
    for (const auto& [a, ga] : g.group_of) {
      for (const auto& [b, gb] : g.group_of) {
        if (ci[a] > ci[b]) EXPECT_LE(static_cast<int>(ga), static_cast<int>(gb));
      }
    }
    std::array<std::size_t, 3> sizes{};
    for (const auto& [id, grp] : g.group_of) sizes[static_cast<std::size_t>(grp)] += counts[id];
    EXPECT_EQ(g.boundaries[0], sizes[0]);
    EXPECT_EQ(g.boundaries[1], sizes[0] + sizes[1]);
  }
}

TEST(GroupPartitions, Errors) {
  EXPECT_THROW(group_partitions({{0, 0.5}, {1, 0.4}}, {{0, 1}, {1, 1}}), Error);
  EXPECT_THROW(group_partitions({{0, 0.5}, {1, 0.4}, {2, 0.3}}, {{0, 1}, {1, 1}}), Error);
}

TEST(Quantile, Examples) {
  EXPECT_EQ(quantile({38, 47, 55, 64}, 0.5), 51.0);
  EXPECT_EQ(quantile({64, 38, 55, 47}, 0.25), 44.75);
  EXPECT_EQ(quantile({3}, 0.75), 3.0);
  EXPECT_EQ(quantile({1, 2, 3, 4, 5}, 1.0), 5.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(AttributeTable, PercentagesAndDelta) {
  // Comm: 10 images, 5 smiling; Subj: 10 images, 2 smiling; Inter: 4 images, 1 smiling
  GroupAssignment groups;
  groups.group_of = {{0, Group::comm}, {1, Group::inter}, {2, Group::subj}};
  AttributeMap attrs;
  std::map<std::string, int> part;
  auto add = [&](const std::string& id, int p, bool smiling) {
    part[id] = p;
    auto& a = attrs[id];
    if (smiling) a.labels.insert("smiling");
  };
  for (int i = 0; i < 10; ++i) add("c" + std::to_string(i), 0, i < 5);
  for (int i = 0; i < 4; ++i) add("i" + std::to_string(i), 1, i < 1);
  for (int i = 0; i < 10; ++i) add("s" + std::to_string(i), 2, i < 2);
  attrs["elsewhere"].labels.insert("never");  // labeled image outside every partition
  attrs["c0"].numeric["age"] = 38;
  attrs["c1"].numeric["age"] = 47;
  attrs["c2"].numeric["age"] = 55;
  attrs["c3"].numeric["age"] = 64;

  const auto table = attribute_table(attrs, groups, part);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].attribute, "smiling");
  EXPECT_DOUBLE_EQ(table.rows[0].percent_comm, 50.0);
  EXPECT_DOUBLE_EQ(table.rows[0].percent_inter, 25.0);
  EXPECT_DOUBLE_EQ(table.rows[0].percent_subj, 20.0);
  EXPECT_DOUBLE_EQ(table.rows[0].delta, 30.0);
  EXPECT_EQ(table.rows[1].attribute, "never");
  EXPECT_EQ(table.rows[1].percent_comm, 0.0);
  EXPECT_EQ(table.rows[1].delta, 0.0);

  ASSERT_EQ(table.numeric_rows.size(), 1u);
  const auto& age = table.numeric_rows[0];
  ASSERT_TRUE(age.per_group[0].has_value());
  EXPECT_EQ(age.per_group[0]->q50, 51.0);
  EXPECT_FALSE(age.per_group[1].has_value());
}

TEST(AttributeTable, EqualDeltaSortsByName) {
  GroupAssignment groups;
  groups.group_of = {{0, Group::comm}, {1, Group::inter}, {2, Group::subj}};
  AttributeMap attrs;
  attrs["a"].labels = {"zeta", "alpha"};
  attrs["b"];
  attrs["c"];
  const auto table = attribute_table(attrs, groups, {{"a", 0}, {"b", 1}, {"c", 2}});
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].attribute, "alpha");
  EXPECT_EQ(table.rows[1].attribute, "zeta");
}

TEST(AttributeTable, EmptyGroupIsAnError) {
  GroupAssignment groups;
  groups.group_of = {{0, Group::comm}, {1, Group::inter}, {2, Group::subj}};
  AttributeMap attrs;
  attrs["a"].labels = {"x"};
  attrs["b"].labels = {"x"};
  try {
    attribute_table(attrs, groups, {{"a", 0}, {"b", 1}, {"z", 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_group);
  }
}

TEST(AssignExternal, CentroidsMapToTheirGroups) {
  const auto model = three_cluster_model();
  const auto groups = group_partitions(model);
  MatrixF at_comm(4, 1);
  at_comm << 0.0f, 0.1f, -3.0f, 4.9f;
  const auto a = assign_external(model, groups, at_comm);
  EXPECT_EQ(a.counts, (std::array<std::size_t, 3>{4, 0, 0}));
  EXPECT_EQ(a.shares, (std::array<double, 3>{1.0, 0.0, 0.0}));

  MatrixF spread(3, 1);
  spread << 20.0f, 0.0f, 10.0f;
  const auto b = assign_external(model, groups, spread);
  EXPECT_EQ(b.labels, (std::vector<Group>{Group::subj, Group::comm, Group::inter}));
  EXPECT_DOUBLE_EQ(b.shares[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.shares[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.shares[2], 1.0 / 3.0);
  EXPECT_EQ(b.shares[0] + b.shares[1] + b.shares[2], 1.0);
  EXPECT_THROW(assign_external(model, groups, MatrixF::Zero(1, 2)), Error);
}

TEST(ExactShares, SumIsExactlyOne) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<std::size_t, 3> c{rng() % 1000, rng() % 1000, rng() % 1000};
    if (trial % 7 == 0) c[2] = 0;
    if (c[0] + c[1] + c[2] == 0) continue;
    const auto s = exact_shares(c);
    EXPECT_EQ(s[0] + s[1] + s[2], 1.0);
    for (std::size_t g = 0; g < 3; ++g) {
      EXPECT_NEAR(s[g], static_cast<double>(c[g]) / static_cast<double>(c[0] + c[1] + c[2]), 1e-15);
    }
  }
  EXPECT_EQ(exact_shares({0, 0, 0}), (std::array<double, 3>{0.0, 0.0, 0.0}));
}

TEST(RankImages, OrderAndTies) {
  CiRegressor model{vec({1.0}), 0.0, 0.0, 0.0, 1.0};
  EmbeddingSet set{1, {}};
  auto add = [&](const std::string& id, float v) {
    EmbeddingRecord r{id, VectorF(1)};
    r.vector(0) = v;
    set.records.push_back(r);
  };
  add("c", 0.1f);
  add("b", 0.9f);
  add("a", 0.1f);
  const auto ranked = rank_images(model, set);
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].first, "b");
  EXPECT_EQ(ranked[1].first, "a");
  EXPECT_EQ(ranked[2].first, "c");

  EmbeddingSet single{1, {}};
  single.records.push_back({"only", VectorF::Constant(1, 2.0f)});
  const auto clamped = rank_images(model, single, true);
  ASSERT_EQ(clamped.size(), 1u);
  EXPECT_EQ(clamped[0].second, 1.0);
}

TEST(Spearman, Examples) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> up{10, 20, 30, 40, 50};
  const std::vector<double> down{5, 4, 3, 2, 1};
  const std::vector<double> square{1, 4, 9, 16, 25};
  EXPECT_DOUBLE_EQ(spearman(a, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, down), -1.0);
  EXPECT_DOUBLE_EQ(spearman(a, square), 1.0);
  // ties: ranks (1.5, 1.5, 3) vs (1, 2, 3) -> 0.866...
  const std::vector<double> tied{1, 1, 2};
  const std::vector<double> plain{1, 2, 3};
  EXPECT_NEAR(spearman(tied, plain), std::sqrt(3.0) / 2.0, 1e-15);
  const std::vector<double> constant{2, 2, 2};
  EXPECT_THROW(spearman(constant, plain), Error);
}
