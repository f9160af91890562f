#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "hdot/dataset.hpp"

using hdot::GenConfig;

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Ranks with ties sharing their average rank.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(FullTree, NamesAndShape) {
  const auto t = hdot::full_tree(3, 2);
  EXPECT_EQ(t.size(), 1u + 3 + 9);
  EXPECT_EQ(t.num_levels(), 2u);
  EXPECT_EQ(t.parent(t.id("n2_1")), t.id("n2"));
  EXPECT_THROW(hdot::full_tree(0, 2), hdot::InvalidArgument);
}

TEST(Generate, ShapeAndLabels) {
  auto cfg = GenConfig::benchmark(3);
  cfg.samples_per_leaf = 5;
  const auto g = hdot::generate(cfg);
  EXPECT_EQ(g.taxonomy.leaves().size(), 27u);
  EXPECT_EQ(g.data.size(), 27u * 5);
  EXPECT_EQ(g.data.dim, 16u);
  EXPECT_EQ(g.data.labels.front(), "n0_0_0");
  EXPECT_EQ(g.data.labels.back(), "n2_2_2");
  for (double v : g.node_means[g.taxonomy.root()]) EXPECT_EQ(v, 0.0);
}

TEST(Generate, NoiseFreeLimitSitsOnLeafMeans) {
  GenConfig cfg;
  cfg.branching = 2;
  cfg.depth = 3;
  cfg.dim = 4;
  cfg.sigma_x = 1e-12;
  cfg.samples_per_leaf = 3;
  cfg.seed = 21;
  const auto g = hdot::generate(cfg);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const auto& mu = g.node_means[g.taxonomy.id(g.data.labels[i])];
    const auto row = g.data.row(i);
    for (std::size_t k = 0; k < cfg.dim; ++k) ASSERT_NEAR(row[k], mu[k], 1e-10);
  }
}

TEST(Generate, SiblingsCloserThanCousins) {
  // Expected squared distances: siblings at depth 2 differ by two depth-2
  // offsets; leaves under different depth-1 nodes also differ by two depth-1
  // offsets.
  GenConfig cfg;
  cfg.branching = 2;
  cfg.depth = 2;
  cfg.dim = 8;
  cfg.samples_per_leaf = 1;
  double sibling = 0.0, cousin = 0.0;
  const int reps = 400;
  for (int s = 0; s < reps; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto g = hdot::generate(cfg);
    const auto& t = g.taxonomy;
    sibling += sq_dist(g.node_means[t.id("n0_0")], g.node_means[t.id("n0_1")]);
    cousin += sq_dist(g.node_means[t.id("n0_0")], g.node_means[t.id("n1_0")]);
  }
  sibling /= reps;
  cousin /= reps;
  const double s1 = cfg.level_scale(1), s2 = cfg.level_scale(2);
  EXPECT_NEAR(sibling, 2.0 * cfg.dim * s2 * s2, 0.15 * 2.0 * cfg.dim * s2 * s2);
  EXPECT_NEAR(cousin, 2.0 * cfg.dim * (s1 * s1 + s2 * s2), 0.15 * 2.0 * cfg.dim * (s1 * s1 + s2 * s2));
  EXPECT_LT(sibling, cousin);
}

TEST(Generate, MeanDistanceTracksTreeDistance) {
  double total = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto g = hdot::generate(GenConfig::benchmark(static_cast<std::uint64_t>(s)));
    const auto& t = g.taxonomy;
    const auto leaves = t.leaves();
    std::vector<double> tie, euclid;
    for (std::size_t a = 0; a < leaves.size(); ++a) {
      for (std::size_t b = a + 1; b < leaves.size(); ++b) {
        tie.push_back(static_cast<double>(t.tie_distance(leaves[a], leaves[b])));
        euclid.push_back(std::sqrt(sq_dist(g.node_means[leaves[a]], g.node_means[leaves[b]])));
      }
    }
    total += pearson(ranks(tie), ranks(euclid));
  }
  EXPECT_GT(total / seeds, 0.3);
}

TEST(Generate, DeterministicPerSeed) {
  auto cfg = GenConfig::benchmark(77);
  cfg.samples_per_leaf = 4;
  const auto a = hdot::generate(cfg);
  const auto b = hdot::generate(cfg);
  EXPECT_EQ(a.data.features, b.data.features);
  EXPECT_EQ(a.data.to_csv(), b.data.to_csv());
  cfg.seed = 78;
  EXPECT_NE(hdot::generate(cfg).data.features, a.data.features);
}

TEST(Generate, UsesGivenTaxonomy) {
  GenConfig cfg;
  cfg.taxonomy = hdot::Taxonomy::parse("root\tA\nA\ta1\nA\ta2\nroot\tb\n");
  cfg.samples_per_leaf = 2;
  const auto g = hdot::generate(cfg);
  EXPECT_EQ(g.data.size(), 6u);
  EXPECT_EQ((std::set<std::string>(g.data.labels.begin(), g.data.labels.end())),
            (std::set<std::string>{"a1", "a2", "b"}));
}

TEST(Generate, ValidatesConfig) {
  GenConfig cfg;
  cfg.sigma_x = 0.0;
  EXPECT_THROW(hdot::generate(cfg), hdot::InvalidArgument);
  cfg = GenConfig{};
  cfg.dim = 1;
  EXPECT_THROW(hdot::generate(cfg), hdot::InvalidArgument);
}

TEST(Dataset, CsvRoundTrip) {
  auto cfg = GenConfig::benchmark(5);
  cfg.samples_per_leaf = 3;
  const auto g = hdot::generate(cfg);
  const auto again = hdot::Dataset::from_csv(g.data.to_csv());
  EXPECT_EQ(again.dim, g.data.dim);
  EXPECT_EQ(again.labels, g.data.labels);
  EXPECT_EQ(again.features, g.data.features);
}

TEST(Dataset, CsvErrorsCarryLine) {
  try {
    hdot::Dataset::from_csv("label,f0,f1\na,1,2\nb,1\n");
    FAIL();
  } catch (const hdot::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    hdot::Dataset::from_csv("label,f0\na,zz\n");
    FAIL();
  } catch (const hdot::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(hdot::Dataset::from_csv(""), hdot::ParseError);
}

TEST(Split, ProportionsAndDisjointness) {
  const auto s = hdot::split_50_30_20(101, 9);
  EXPECT_EQ(s.train.size(), 50u);
  EXPECT_EQ(s.val.size(), 30u);
  EXPECT_EQ(s.test.size(), 21u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 101u);
  EXPECT_EQ(hdot::split_50_30_20(101, 9).hash(), s.hash());
  EXPECT_NE(hdot::split_50_30_20(101, 10).hash(), s.hash());
  EXPECT_THROW(hdot::split_50_30_20(3, 0), hdot::DataError);
}
