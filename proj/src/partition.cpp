#include "tramp/partition.h"

#include <iomanip>
#include <limits>
#include <sstream>

#include "tramp/errors.h"

namespace tramp {

std::string to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::kNeighborLocal: return "neighbor_local";
    case PartitionKind::kDistantLocal: return "distant_local";
    case PartitionKind::kNeighborGlobal: return "neighbor_global";
    case PartitionKind::kDistantGlobal: return "distant_global";
  }
  return "?";
}

PartitionKind parse_partition_kind(const std::string& s) {
  for (PartitionKind k : kAllPartitionKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown partition kind: " + s);
}

IndexMap::IndexMap(PartitionKind kind, GroupedShape shape,
                   std::vector<std::size_t> forward)
    : kind_(kind), shape_(shape), forward_(std::move(forward)) {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  inverse_.assign(forward_.size(), kUnset);
  for (std::size_t c = 0; c < forward_.size(); ++c) {
    const std::size_t dst = forward_[c];
    if (dst >= inverse_.size() || inverse_[dst] != kUnset) {
      throw ShapeError("partition map is not a bijection");
    }
    inverse_[dst] = c;
  }
}

CellCoord IndexMap::coord(std::size_t grid_cell) const {
  const std::size_t flat = forward_.at(grid_cell);
  return {flat / shape_.cells_per_group(), (flat / shape_.cols) % shape_.rows,
          flat % shape_.cols};
}

PartitionScheme::PartitionScheme(std::size_t frames, std::size_t segment_length,
                                 std::size_t regions, std::size_t per_region)
    : segment_(segment_length), regions_(regions), per_region_(per_region) {
  if (frames == 0 || segment_length == 0 || regions == 0 || per_region == 0) {
    throw ConfigError("partition scheme counts must be positive");
  }
  if (frames % segment_length != 0) {
    throw ConfigError("segment length " + std::to_string(segment_length) +
                      " does not divide trajectory length " + std::to_string(frames));
  }
  segments_ = frames / segment_length;
  for (PartitionKind k : kAllPartitionKinds) maps_.push_back(build(k));
}

std::vector<std::size_t> PartitionScheme::local_axis(std::size_t g) const {
  std::vector<std::size_t> axis(segment_);
  for (std::size_t l = 0; l < segment_; ++l) axis[l] = g * segment_ + l;
  return axis;
}

std::vector<std::size_t> PartitionScheme::global_axis(std::size_t l) const {
  std::vector<std::size_t> axis(segments_);
  for (std::size_t g = 0; g < segments_; ++g) axis[g] = l + g * segment_;
  return axis;
}

GroupedShape PartitionScheme::grouped_shape(PartitionKind kind) const {
  const std::size_t G = segments_, L = segment_, M = regions_, N = per_region_;
  switch (kind) {
    case PartitionKind::kNeighborLocal: return {G * M, L, N};
    case PartitionKind::kDistantLocal: return {G * N, L, M};
    case PartitionKind::kNeighborGlobal: return {L * M, G, N};
    case PartitionKind::kDistantGlobal: return {L * N, G, M};
  }
  return {};
}

const IndexMap& PartitionScheme::map(PartitionKind kind) const {
  return maps_[static_cast<std::size_t>(kind)];
}

IndexMap PartitionScheme::build(PartitionKind kind) const {
  const std::size_t L = segment_, M = regions_, N = per_region_;
  const GroupedShape shape = grouped_shape(kind);
  std::vector<std::size_t> fwd(frames() * points());
  for (std::size_t t = 0; t < frames(); ++t) {
    const std::size_t g = t / L, l = t % L;
    for (std::size_t p = 0; p < points(); ++p) {
      const std::size_t m = p / N, n = p % N;
      std::size_t group = 0, row = 0, col = 0;
      switch (kind) {
        case PartitionKind::kNeighborLocal: group = g * M + m; row = l; col = n; break;
        case PartitionKind::kDistantLocal: group = g * N + n; row = l; col = m; break;
        case PartitionKind::kNeighborGlobal: group = l * M + m; row = g; col = n; break;
        case PartitionKind::kDistantGlobal: group = l * N + n; row = g; col = m; break;
      }
      fwd[t * points() + p] = (group * shape.rows + row) * shape.cols + col;
    }
  }
  return IndexMap(kind, shape, std::move(fwd));
}

PartitionScheme build_scheme(std::size_t frames, std::size_t segment_length,
                             std::size_t regions, std::size_t per_region) {
  return PartitionScheme(frames, segment_length, regions, per_region);
}

DiffTensor gather_partition(const DiffTensor& x, const IndexMap& map) {
  const std::size_t cells = map.cells();
  if (x.rank() < 2 || x.size() % cells != 0 ||
      x.size() / cells != x.shape().back()) {
    throw ShapeError("gather_partition: tensor " + shape_str(x.shape()) +
                     " does not hold " + std::to_string(cells) + " cells");
  }
  const std::size_t d = x.shape().back();
  const auto& s = map.shape();
  return gather_rows(x, d, map.inverse(), {s.groups, s.rows, s.cols, d});
}

DiffTensor scatter_partition(const DiffTensor& y, const IndexMap& map,
                             std::size_t frames, std::size_t points) {
  const std::size_t cells = map.cells();
  if (frames * points != cells || y.rank() < 2 || y.size() % cells != 0 ||
      y.size() / cells != y.shape().back()) {
    throw ShapeError("scatter_partition: tensor " + shape_str(y.shape()) +
                     " does not match the partition map");
  }
  const std::size_t d = y.shape().back();
  return gather_rows(y, d, map.forward(), {frames, points, d});
}

std::string dump_partition(const PartitionScheme& scheme, PartitionKind kind) {
  const IndexMap& m = scheme.map(kind);
  const std::size_t width = std::to_string(m.shape().groups - 1).size();
  std::ostringstream os;
  for (std::size_t t = 0; t < scheme.frames(); ++t) {
    for (std::size_t p = 0; p < scheme.points(); ++p) {
      if (p) os << ' ';
      os << std::setw(static_cast<int>(width)) << m.coord(t * scheme.points() + p).group;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace tramp
