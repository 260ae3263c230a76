#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "generators.hpp"
#include "tailcut/errors.hpp"
#include "tailcut/kmeans.hpp"

using namespace tailcut;
using tailcut::gen::pick;
using tailcut::gen::random_dataset;

namespace {

Dataset points(std::initializer_list<std::vector<double>> rows) {
  Dataset ds;
  ds.id = "inline";
  for (const auto& r : rows) ds.points.append_row(r);
  return ds;
}

Dataset six_points() { return points({{0, 0}, {0, 1}, {1, 0}, {5, 5}, {5, 6}, {6, 5}}); }

}  // namespace

TEST(InitCenters, KEqualsNIsAPermutation) {
  Rng rng(1);
  const auto ds = random_dataset(rng, 12, 3);
  KMeansConfig cfg;
  cfg.k = 12;
  cfg.seed = 5;
  const auto centers = init_centers(ds, cfg);
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < 12; ++i) {
    a.emplace_back(ds.point(i).begin(), ds.point(i).end());
    b.emplace_back(centers.row(i).begin(), centers.row(i).end());
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(InitCenters, DeterministicAndDistinct) {
  Rng rng(2);
  const auto ds = random_dataset(rng, 30, 2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    KMeansConfig cfg;
    cfg.k = 8;
    cfg.seed = seed;
    const auto c = init_centers(ds, cfg);
    EXPECT_EQ(c, init_centers(ds, cfg));
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < c.rows(); ++i) rows.emplace(c.row(i).begin(), c.row(i).end());
    EXPECT_EQ(rows.size(), 8u) << "seed " << seed;
  }
}

TEST(InitCenters, TooManyClusters) {
  KMeansConfig cfg;
  cfg.k = 7;
  EXPECT_THROW(init_centers(six_points(), cfg), ArgumentError);
}

TEST(Assign, ZeroDistanceAndTieBreak) {
  const Matrix centers(3, 2, {0, 0, 2, 0, 5, 5});
  const auto labels = assign(points({{5, 5}, {1, 0}, {2.1, 0}}), centers);
  EXPECT_EQ(labels, (Labels{2, 0, 1}));
}

TEST(Assign, MatchesBruteForceNearestCenter) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = pick(rng, 1, 5);
    const auto ds = random_dataset(rng, pick(rng, 1, 60), d);
    const auto c = random_dataset(rng, pick(rng, 1, 8), d);
    const auto labels = assign(ds, c.points);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t j = 0; j < c.size(); ++j) {
        double s = 0;
        for (std::size_t a = 0; a < d; ++a) s += std::pow(ds.points(i, a) - c.points(j, a), 2);
        if (s < best_d) {
          best_d = s;
          best = j;
        }
      }
      ASSERT_EQ(labels[i], best) << "trial " << trial << " point " << i;
    }
  }
}

TEST(Assign, DimensionMismatch) {
  EXPECT_THROW(assign(six_points(), Matrix(2, 3)), ArgumentError);
}

TEST(RecomputeCenters, SingleClusterIsGlobalMean) {
  const auto up = recompute_centers(six_points(), Labels(6, 0), 1);
  EXPECT_DOUBLE_EQ(up.centers(0, 0), 17.0 / 6);
  EXPECT_DOUBLE_EQ(up.centers(0, 1), 17.0 / 6);
  EXPECT_TRUE(up.repaired.empty());
}

TEST(RecomputeCenters, TwoPointMean) {
  const auto up = recompute_centers(points({{0, 0}, {2, 2}}), Labels{0, 0}, 1);
  EXPECT_EQ(up.centers(0, 0), 1.0);
  EXPECT_EQ(up.centers(0, 1), 1.0);
}

TEST(RecomputeCenters, AgreesWithReversedSummation) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = pick(rng, 1, 6);
    const std::size_t n = pick(rng, k, 80);
    const auto ds = random_dataset(rng, n, pick(rng, 1, 4), 100.0);
    auto labels = gen::random_labels(rng, n, k);
    for (std::size_t c = 0; c < k; ++c) labels[c] = static_cast<Label>(c);  // no empty cluster
    const auto up = recompute_centers(ds, labels, k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t a = 0; a < ds.dim(); ++a) {
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t i = n; i-- > 0;) {
          if (labels[i] != c) continue;
          sum += ds.points(i, a);
          ++count;
        }
        const double ref = sum / static_cast<double>(count);
        EXPECT_NEAR(up.centers(c, a), ref, 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST(RecomputeCenters, EmptyClusterReseededAtFarthestPoint) {
  const auto ds = points({{0, 0}, {1, 0}, {2, 0}, {9, 0}});
  const auto up = recompute_centers(ds, Labels{0, 0, 0, 0}, 2);
  EXPECT_EQ(up.repaired, (std::vector<std::size_t>{1}));
  EXPECT_EQ(up.centers(1, 0), 9.0);
  EXPECT_EQ(up.centers(0, 0), 3.0);
}

TEST(RunKMeans, HandSimulatedSixPoints) {
  // Find a seed whose initial centers are rows 0 and 1, in that order, so
  // the trace below can be worked out by hand.
  const auto ds = six_points();
  KMeansConfig cfg;
  cfg.k = 2;
  for (cfg.seed = 0;; ++cfg.seed) {
    const auto c = init_centers(ds, cfg);
    if (c == Matrix(2, 2, {0, 0, 0, 1})) break;
    ASSERT_LT(cfg.seed, 10000u);
  }
  const auto result = run_kmeans(ds, cfg);
  const auto& r = result.trace.records;
  ASSERT_EQ(r.size(), 3u);
  // 1: (0,1) joins the far cluster; centers (0.5,0) and (4,4.25).
  EXPECT_EQ(r[0].labels, (Labels{0, 1, 0, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(r[0].objective, 37.25);
  EXPECT_FALSE(r[0].change_rate.has_value());
  // 2: planted split; centers (1/3,1/3) and (16/3,16/3), J = 4/3 + 4/3.
  EXPECT_EQ(r[1].labels, (Labels{0, 0, 0, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(r[1].objective, 8.0 / 3);
  EXPECT_DOUBLE_EQ(*r[1].change_rate, (37.25 - 8.0 / 3) / 37.25);
  // 3: labels unchanged, confirms convergence.
  EXPECT_EQ(r[2].labels, r[1].labels);
  EXPECT_TRUE(r[2].converged);
  EXPECT_EQ(*r[2].change_rate, 0.0);
  EXPECT_TRUE(result.trace.converged());
}

TEST(RunKMeans, TwoPointsConvergeToZero) {
  const auto result = run_kmeans(points({{0, 0}, {3, 4}}), KMeansConfig{});
  EXPECT_TRUE(result.trace.converged());
  EXPECT_LE(result.trace.iterations(), 2u);
  EXPECT_EQ(result.trace.final_record().objective, 0.0);
}

TEST(RunKMeans, TraceInvariantsOnPlantedMixtures) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ds = generate_synthetic(gen::planted_spec(400, 3, 4, 2.0), seed);
    KMeansConfig cfg;
    cfg.k = 4;
    cfg.seed = seed;
    const auto result = run_kmeans(ds, cfg);
    const auto& recs = result.trace.records;
    for (std::size_t i = 1; i < recs.size(); ++i) {
      EXPECT_LE(recs[i].objective, recs[i - 1].objective + 1e-9 * std::abs(recs[i - 1].objective));
      EXPECT_EQ(recs[i].iteration, i + 1);
    }
    const auto& st = result.state;
    for (auto l : st.labels) EXPECT_LT(l, 4u);
    EXPECT_NEAR(kmeans_objective(ds, st.centers, st.labels), st.objective, 1e-9 * st.objective);
    ASSERT_TRUE(result.trace.converged());
    EXPECT_EQ(assign(ds, st.centers), st.labels);
    EXPECT_EQ(result.trace.final_record().labels, st.labels);
  }
}

TEST(RunKMeans, Deterministic) {
  const auto ds = generate_synthetic(gen::planted_spec(300, 2, 3, 1.5), 8);
  KMeansConfig cfg;
  cfg.k = 3;
  cfg.seed = 77;
  const auto a = run_kmeans(ds, cfg);
  const auto b = run_kmeans(ds, cfg);
  ASSERT_EQ(a.trace.iterations(), b.trace.iterations());
  for (std::size_t i = 0; i < a.trace.iterations(); ++i) {
    EXPECT_EQ(a.trace.records[i].objective, b.trace.records[i].objective);
    EXPECT_EQ(a.trace.records[i].labels, b.trace.records[i].labels);
  }
}

TEST(RunKMeans, MaxIterationsTruncates) {
  const auto ds = generate_synthetic(gen::planted_spec(500, 2, 4, 1.0), 3);
  KMeansConfig cfg;
  cfg.k = 4;
  cfg.max_iterations = 2;
  const auto result = run_kmeans(ds, cfg);
  EXPECT_EQ(result.trace.iterations(), 2u);
  EXPECT_EQ(result.trace.termination, Termination::MaxIterations);
}

TEST(RunKMeans, ObserverSeesEveryIterationAndCanStop) {
  const auto ds = generate_synthetic(gen::planted_spec(500, 2, 4, 1.0), 3);
  KMeansConfig cfg;
  cfg.k = 4;
  std::vector<std::size_t> seen;
  const auto result = run_kmeans(ds, cfg, [&](const IterationRecord& r) {
    seen.push_back(r.iteration);
    return r.iteration == 3 ? IterationControl::Stop : IterationControl::Continue;
  });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(result.trace.termination, Termination::StoppedByObserver);
}

TEST(RunKMeans, EmptyClusterRepairIsRecorded) {
  // Duplicate points make an initial center pair coincide; the second
  // cluster starts empty and must be reseeded.
  const auto ds = points({{0, 0}, {0, 0}, {0, 0}, {10, 0}, {11, 0}});
  KMeansConfig cfg;
  cfg.k = 2;
  bool repaired = false;
  for (cfg.seed = 0; cfg.seed < 200 && !repaired; ++cfg.seed) {
    const auto result = run_kmeans(ds, cfg);
    for (const auto& e : result.trace.events) repaired |= e.kind == "empty_cluster_repair";
    EXPECT_TRUE(result.trace.converged());
    std::set<Label> used(result.state.labels.begin(), result.state.labels.end());
    EXPECT_EQ(used.size(), 2u);
  }
  EXPECT_TRUE(repaired);
}
