#pragma once

// Landmark-temporal partitions of the T x P grid.
//
// Frames split into G segments of L (t = g*L + l) and landmarks into M regions
// of N (p = m*N + n). All indices here are 0-based. Each partition kind maps
// a cell (t, p) to (group, row, col):
//
//   NeighborLocal   [G*M, L, N]  group = g*M + m, row = l, col = n
//   DistantLocal    [G*N, L, M]  group = g*N + n, row = l, col = m
//   NeighborGlobal  [L*M, G, N]  group = l*M + m, row = g, col = n
//   DistantGlobal   [L*N, G, M]  group = l*N + n, row = g, col = m

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "tramp/tensor.h"

namespace tramp {

enum class PartitionKind { kNeighborLocal, kDistantLocal, kNeighborGlobal, kDistantGlobal };

inline constexpr std::array<PartitionKind, 4> kAllPartitionKinds = {
    PartitionKind::kNeighborLocal, PartitionKind::kDistantLocal,
    PartitionKind::kNeighborGlobal, PartitionKind::kDistantGlobal};

std::string to_string(PartitionKind kind);
PartitionKind parse_partition_kind(const std::string& s);

struct GroupedShape {
  std::size_t groups = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t cells_per_group() const { return rows * cols; }
  bool operator==(const GroupedShape&) const = default;
};

struct CellCoord {
  std::size_t group = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const CellCoord&) const = default;
};

// Bijection between grid cells t*P + p and grouped cells
// (group*rows + row)*cols + col.
class IndexMap {
 public:
  IndexMap(PartitionKind kind, GroupedShape shape, std::vector<std::size_t> forward);

  PartitionKind kind() const { return kind_; }
  const GroupedShape& shape() const { return shape_; }
  std::size_t cells() const { return forward_.size(); }

  // grid cell -> grouped position
  const std::vector<std::size_t>& forward() const { return forward_; }
  // grouped position -> grid cell
  const std::vector<std::size_t>& inverse() const { return inverse_; }

  CellCoord coord(std::size_t grid_cell) const;

 private:
  PartitionKind kind_;
  GroupedShape shape_;
  std::vector<std::size_t> forward_;
  std::vector<std::size_t> inverse_;
};

class PartitionScheme {
 public:
  // Throws ConfigError unless all counts are positive and L divides T_p.
  PartitionScheme(std::size_t frames, std::size_t segment_length,
                  std::size_t regions, std::size_t per_region);

  std::size_t segments() const { return segments_; }         // G
  std::size_t segment_length() const { return segment_; }    // L
  std::size_t regions() const { return regions_; }           // M
  std::size_t per_region() const { return per_region_; }     // N
  std::size_t frames() const { return segments_ * segment_; }  // T_p
  std::size_t points() const { return regions_ * per_region_; }  // P

  // Frame indices of local segment g: [g*L, (g+1)*L).
  std::vector<std::size_t> local_axis(std::size_t g) const;
  // Frame indices l, l+L, ..., l+(G-1)L.
  std::vector<std::size_t> global_axis(std::size_t l) const;

  GroupedShape grouped_shape(PartitionKind kind) const;
  // Maps are built once at construction.
  const IndexMap& map(PartitionKind kind) const;

  bool operator==(const PartitionScheme& o) const {
    return segments_ == o.segments_ && segment_ == o.segment_ &&
           regions_ == o.regions_ && per_region_ == o.per_region_;
  }

 private:
  IndexMap build(PartitionKind kind) const;

  std::size_t segments_;
  std::size_t segment_;
  std::size_t regions_;
  std::size_t per_region_;
  std::vector<IndexMap> maps_;
};

PartitionScheme build_scheme(std::size_t frames, std::size_t segment_length,
                             std::size_t regions, std::size_t per_region);

// [T_p, P, D] (or [T_p*P, D]) -> [groups, rows, cols, D].
DiffTensor gather_partition(const DiffTensor& x, const IndexMap& map);
// [groups, rows, cols, D] (or [groups, rows*cols, D]) -> [T_p, P, D].
DiffTensor scatter_partition(const DiffTensor& y, const IndexMap& map,
                             std::size_t frames, std::size_t points);

// T_p lines of P space-separated group labels.
std::string dump_partition(const PartitionScheme& scheme, PartitionKind kind);

}  // namespace tramp
