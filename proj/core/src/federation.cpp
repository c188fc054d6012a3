#include "fedslice/federation.hpp"

#include <algorithm>
#include <cstring>

#include "fedslice/agent.hpp"
#include "fedslice/neural.hpp"

namespace fedslice {

namespace {

void check_compatible(const std::vector<ModelSnapshot>& snapshots) {
  if (snapshots.empty()) {
    throw std::invalid_argument("fedavg: no snapshots");
  }
  const ModelSnapshot& head = snapshots.front();
  const std::size_t expected = param_count(head.layer_dims);
  for (const ModelSnapshot& snap : snapshots) {
    if (snap.layer_dims != head.layer_dims) {
      throw std::invalid_argument("fedavg: mismatched layer dimensions");
    }
    if (snap.params.size() != expected) {
      throw std::invalid_argument("fedavg: parameter count does not match dims");
    }
  }
}

}  // namespace

std::vector<double> fedavg(const std::vector<ModelSnapshot>& snapshots,
                           WeightRule rule) {
  check_compatible(snapshots);

  std::vector<std::uint64_t> counts(snapshots.size(), 1);
  if (rule == WeightRule::SampleCount) {
    bool any = false;
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
      counts[k] = snapshots[k].sample_count;
      any = any || counts[k] != 0;
    }
    if (!any) counts.assign(snapshots.size(), 1);  // equal-weight fallback
  }

  std::uint64_t total = 0;
  for (std::uint64_t c : counts) total += c;

  const std::size_t n = snapshots.front().params.size();
  std::vector<double> mean(n, 0.0);
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    if (counts[k] == 0) continue;
    const double w = double(counts[k]);
    const std::vector<float>& p = snapshots[k].params;
    for (std::size_t i = 0; i < n; ++i) mean[i] += w * double(p[i]);
  }
  const double inv_total = double(total);
  for (double& v : mean) v /= inv_total;
  return mean;
}

ModelSnapshot run_round(FederationGroup& group, std::span<Agent* const> members,
                        WeightRule rule) {
  if (members.empty() || members.size() != group.members.size()) {
    throw std::invalid_argument("run_round: member list does not match group");
  }

  std::vector<ModelSnapshot> snapshots;
  snapshots.reserve(members.size());
  for (const Agent* agent : members) snapshots.push_back(agent->snapshot());
  check_compatible(snapshots);  // aborts before any member is touched

  const std::vector<double> mean = fedavg(snapshots, rule);

  const bool consensus = std::all_of(
      snapshots.begin() + 1, snapshots.end(),
      [&](const ModelSnapshot& s) { return s.params == snapshots.front().params; });
  if (!consensus) {
    for (Agent* agent : members) agent->apply_aggregate(mean);
  }
  for (Agent* agent : members) agent->reset_round_counter();
  ++group.round;

  ModelSnapshot aggregate;
  aggregate.cell_id = kAggregateCellId;
  aggregate.slice_id = group.slice_id;
  aggregate.layer_dims = snapshots.front().layer_dims;
  aggregate.params.assign(mean.begin(), mean.end());
  for (const ModelSnapshot& s : snapshots) aggregate.sample_count += s.sample_count;
  return aggregate;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(std::uint8_t(std::uint64_t(value) >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) {
    throw DeserializeError(DeserializeError::Kind::Truncated,
                           "model payload ends mid-field");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= std::uint64_t(bytes[pos + i]) << (8 * i);
  }
  pos += sizeof(T);
  return T(v);
}

constexpr std::uint8_t kMagic[4] = {'F', 'D', 'R', 'L'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelSnapshot& snapshot) {
  if (snapshot.layer_dims.size() < 2 ||
      snapshot.layer_dims.size() > 0xFFFF) {
    throw std::invalid_argument("serialize_model: need at least two layer dims");
  }
  for (int d : snapshot.layer_dims) {
    if (d < 1) throw std::invalid_argument("serialize_model: layer dims must be >= 1");
  }
  if (snapshot.params.size() != param_count(snapshot.layer_dims)) {
    throw std::invalid_argument("serialize_model: parameter count does not match dims");
  }
  if (snapshot.cell_id < 0 || snapshot.cell_id > 0xFFFF || snapshot.slice_id < 0 ||
      snapshot.slice_id > 0xFFFF) {
    throw std::invalid_argument("serialize_model: ids must fit in 16 bits");
  }

  std::vector<std::uint8_t> out;
  out.reserve(20 + 4 * snapshot.layer_dims.size() + 4 * snapshot.params.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint16_t>(out, std::uint16_t(snapshot.cell_id));
  put_le<std::uint16_t>(out, std::uint16_t(snapshot.slice_id));
  put_le<std::uint16_t>(out, std::uint16_t(snapshot.layer_dims.size()));
  for (int d : snapshot.layer_dims) put_le<std::uint32_t>(out, std::uint32_t(d));
  put_le<std::uint64_t>(out, snapshot.sample_count);
  for (float p : snapshot.params) {
    std::uint32_t bits;
    std::memcpy(&bits, &p, sizeof bits);
    put_le<std::uint32_t>(out, bits);
  }
  return out;
}

ModelSnapshot deserialize_model(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DeserializeError(DeserializeError::Kind::BadMagic,
                           "payload does not start with FDRL");
  }
  pos = 4;
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kVersion) {
    throw DeserializeError(DeserializeError::Kind::BadVersion,
                           "unsupported model format version");
  }

  ModelSnapshot snap;
  snap.cell_id = get_le<std::uint16_t>(bytes, pos);
  snap.slice_id = get_le<std::uint16_t>(bytes, pos);
  const auto layer_count = get_le<std::uint16_t>(bytes, pos);
  if (layer_count < 2) {
    throw DeserializeError(DeserializeError::Kind::Inconsistent,
                           "layer count must be at least 2");
  }
  // Sizes are checked against the remaining bytes before any allocation, so
  // a hostile header cannot request an absurd buffer.
  if ((bytes.size() - pos) / 4 < layer_count) {
    throw DeserializeError(DeserializeError::Kind::Truncated,
                           "dims exceed payload size");
  }
  snap.layer_dims.reserve(layer_count);
  for (int i = 0; i < int(layer_count); ++i) {
    const auto d = get_le<std::uint32_t>(bytes, pos);
    if (d == 0 || d > 0x7FFFFFFF) {
      throw DeserializeError(DeserializeError::Kind::Inconsistent,
                             "layer dim out of range");
    }
    snap.layer_dims.push_back(int(d));
  }
  snap.sample_count = get_le<std::uint64_t>(bytes, pos);

  const std::size_t expected = param_count(snap.layer_dims);
  if ((bytes.size() - pos) / 4 < expected) {
    throw DeserializeError(DeserializeError::Kind::Truncated,
                           "parameter block shorter than dims imply");
  }
  if (bytes.size() - pos != expected * 4) {
    throw DeserializeError(DeserializeError::Kind::Inconsistent,
                           "trailing bytes after parameter block");
  }
  snap.params.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const auto bits = get_le<std::uint32_t>(bytes, pos);
    float p;
    std::memcpy(&p, &bits, sizeof p);
    snap.params.push_back(p);
  }
  return snap;
}

}  // namespace fedslice
