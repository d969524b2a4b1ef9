#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "grad_suite.h"
#include "tramp/errors.h"
#include "tramp/partition.h"

using namespace tramp;

TEST(Scheme, SegmentCount) {
  EXPECT_EQ(PartitionScheme(128, 8, 7, 9).segments(), 16u);
  EXPECT_EQ(PartitionScheme(8, 8, 7, 9).segments(), 1u);
}

TEST(Scheme, LocalAndGlobalAxes) {
  PartitionScheme s(16, 8, 1, 1);
  // 0-based frames: segment 0 is 0..7, segment 1 is 8..15.
  EXPECT_EQ(s.local_axis(0), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(s.local_axis(1), (std::vector<std::size_t>{8, 9, 10, 11, 12, 13, 14, 15}));
  EXPECT_EQ(s.global_axis(0), (std::vector<std::size_t>{0, 8}));
}

TEST(Scheme, SingleSegmentHasSingletonGlobalAxes) {
  PartitionScheme s(8, 8, 2, 2);
  for (std::size_t l = 0; l < 8; ++l) EXPECT_EQ(s.global_axis(l).size(), 1u);
  EXPECT_EQ(s.grouped_shape(PartitionKind::kNeighborGlobal), (GroupedShape{16, 1, 2}));
}

TEST(Scheme, InvalidCountsAreConfigErrors) {
  EXPECT_THROW(PartitionScheme(12, 8, 2, 2), ConfigError);
  EXPECT_THROW(PartitionScheme(8, 0, 2, 2), ConfigError);
  EXPECT_THROW(PartitionScheme(8, 8, 0, 2), ConfigError);
  EXPECT_THROW(PartitionScheme(8, 8, 2, 0), ConfigError);
}

TEST(IndexMap, NeighborLocalEnumeratedCell) {
  // T_p=4, L=2, M=2, N=2. One-based cell (t=3, p=1) is 0-based (2, 0):
  // segment 1, region 0, row 0, col 0.
  PartitionScheme s(4, 2, 2, 2);
  const auto& m = s.map(PartitionKind::kNeighborLocal);
  EXPECT_EQ(m.coord(2 * 4 + 0), (CellCoord{1 * 2 + 0, 0, 0}));
  // And the last cell (t=3, p=3) sits in segment 1, region 1, row 1, col 1.
  EXPECT_EQ(m.coord(3 * 4 + 3), (CellCoord{1 * 2 + 1, 1, 1}));
}

TEST(IndexMap, ClosedFormsForEveryKind) {
  const std::size_t G = 3, L = 2, M = 2, N = 3;
  PartitionScheme s(G * L, L, M, N);
  for (std::size_t t = 0; t < G * L; ++t) {
    for (std::size_t p = 0; p < M * N; ++p) {
      const std::size_t g = t / L, l = t % L, m = p / N, n = p % N;
      const std::size_t cell = t * M * N + p;
      EXPECT_EQ(s.map(PartitionKind::kNeighborLocal).coord(cell), (CellCoord{g * M + m, l, n}));
      EXPECT_EQ(s.map(PartitionKind::kDistantLocal).coord(cell), (CellCoord{g * N + n, l, m}));
      EXPECT_EQ(s.map(PartitionKind::kNeighborGlobal).coord(cell), (CellCoord{l * M + m, g, n}));
      EXPECT_EQ(s.map(PartitionKind::kDistantGlobal).coord(cell), (CellCoord{l * N + n, g, m}));
    }
  }
}

TEST(IndexMap, EveryKindIsABijection) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> d(1, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t G = d(rng), L = d(rng), M = d(rng), N = d(rng);
    PartitionScheme s(G * L, L, M, N);
    for (auto kind : kAllPartitionKinds) {
      const auto& m = s.map(kind);
      std::vector<int> hits(m.cells(), 0);
      for (std::size_t pos : m.forward()) ++hits.at(pos);
      for (int h : hits) EXPECT_EQ(h, 1);
      for (std::size_t c = 0; c < m.cells(); ++c) EXPECT_EQ(m.inverse()[m.forward()[c]], c);
    }
  }
}

TEST(IndexMap, NonBijectiveForwardIsRejected) {
  EXPECT_THROW(IndexMap(PartitionKind::kNeighborLocal, GroupedShape{1, 1, 3}, {1, 1, 2}), Error);
}

TEST(IndexMap, NeighborGlobalWithOneSegmentMatchesNeighborLocalRows) {
  // G = 1: each neighbor-global group is one row of N cells, and it holds
  // exactly the cells of one neighbor-local row.
  PartitionScheme s(4, 4, 3, 2);
  const auto& nl = s.map(PartitionKind::kNeighborLocal);
  const auto& ng = s.map(PartitionKind::kNeighborGlobal);
  std::map<std::pair<std::size_t, std::size_t>, std::set<std::size_t>> rows;
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t cell = 0; cell < nl.cells(); ++cell) {
    const auto a = nl.coord(cell);
    rows[{a.group, a.row}].insert(cell);
    groups[ng.coord(cell).group].insert(cell);
  }
  ASSERT_EQ(rows.size(), groups.size());
  std::set<std::set<std::size_t>> row_sets, group_sets;
  for (auto& [k, v] : rows) row_sets.insert(v);
  for (auto& [k, v] : groups) group_sets.insert(v);
  EXPECT_EQ(row_sets, group_sets);
}

TEST(GatherScatter, RoundTripIsBitwise) {
  PartitionScheme s(8, 4, 3, 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> v(8 * 6 * 5);
  for (auto& x : v) x = g(rng);
  auto x = DiffTensor::constant({8, 6, 5}, v);
  for (auto kind : kAllPartitionKinds) {
    auto y = gather_partition(x, s.map(kind));
    const auto gs = s.grouped_shape(kind);
    EXPECT_EQ(y.shape(), (Shape{gs.groups, gs.rows, gs.cols, 5}));
    auto back = scatter_partition(y, s.map(kind), 8, 6);
    EXPECT_EQ(std::vector<double>(back.values().begin(), back.values().end()), v);
    double a = 0, b = 0;
    for (double e : x.values()) a += e;
    for (double e : y.values()) b += e;
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(GatherScatter, SumOfSquaresGradient) {
  PartitionScheme s(4, 2, 2, 2);
  for (auto kind : kAllPartitionKinds) {
    const double err = suite::check_fn(
        {{4, 4, 3}},
        [&](const std::vector<DiffTensor>& x) {
          return sum_squares(gather_partition(x[0], s.map(kind)));
        },
        31);
    EXPECT_LT(err, 1e-6) << to_string(kind);
  }
}

TEST(Dump, LabelsMatchGroups) {
  PartitionScheme s(4, 2, 2, 2);
  const std::string d = dump_partition(s, PartitionKind::kNeighborLocal);
  EXPECT_EQ(d, "0 0 1 1\n0 0 1 1\n2 2 3 3\n2 2 3 3\n");
  EXPECT_EQ(parse_partition_kind("distant_global"), PartitionKind::kDistantGlobal);
  EXPECT_THROW(parse_partition_kind("nope"), ConfigError);
}
