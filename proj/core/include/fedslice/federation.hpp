#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedslice/errors.hpp"

namespace fedslice {

class Agent;

// Serialized view of one agent's online network. Parameters are 32-bit
// floats in the canonical flattening (layer-major, row-major weights then
// biases per layer); this is also the on-disk format's payload.
struct ModelSnapshot {
  int cell_id = 0;   // 0xFFFF marks a federation aggregate
  int slice_id = 0;
  std::vector<int> layer_dims;
  std::vector<float> params;
  std::uint64_t sample_count = 0;  // transitions collected since last round

  bool operator==(const ModelSnapshot&) const = default;
};

constexpr int kAggregateCellId = 0xFFFF;

enum class WeightRule { SampleCount, Equal };

// Componentwise weighted mean, weights sample_count_k / sum(sample_count);
// equal weights when every count is zero or the rule says so. Accumulates
// integer-weighted sums in double, so averaging N identical snapshots
// reproduces the common vector exactly.
std::vector<double> fedavg(const std::vector<ModelSnapshot>& snapshots,
                           WeightRule rule = WeightRule::SampleCount);

// One per-slice group of agents across cells.
struct FederationGroup {
  int slice_id = 0;
  std::vector<std::pair<int, int>> members;  // (cell_id, slice_id)
  long round = 0;
  long period_steps = 2000;
};

// Synchronous aggregation round: snapshot every member, average, write the
// aggregate back into every member's online and target networks, reset
// optimizer moments and sample counters, bump the round counter. Dimension
// mismatch aborts before any member is touched. When every snapshot is
// bit-identical (single member included) the members already hold the
// consensus and the write-back is skipped, so the round is an exact no-op
// on parameters and optimizer state. Returns the aggregate.
ModelSnapshot run_round(FederationGroup& group, std::span<Agent* const> members,
                        WeightRule rule = WeightRule::SampleCount);

// Little-endian container: magic "FDRL", version u16 = 1, cell_id u16,
// slice_id u16, layer count u16, dims u32 each, sample_count u64, then the
// flat parameters as f32. Round-trips bit-exactly.
std::vector<std::uint8_t> serialize_model(const ModelSnapshot& snapshot);
ModelSnapshot deserialize_model(std::span<const std::uint8_t> bytes);

}  // namespace fedslice
