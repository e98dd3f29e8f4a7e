#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pianofinger/errors.hpp"
#include "pianofinger/params.hpp"
#include "pianofinger/rng.hpp"

namespace pianofinger {

// Self-describing binary container: magic+version, config echo, RNG state,
// step counters, reward-baseline ring buffer, then every named parameter with
// shape, values and Adam moments as raw little-endian scalars. Everything a
// resumed run needs to continue bit-identically.
inline constexpr char kCheckpointMagic[8] = {'P', 'F', 'C', 'K', '0', '0', '0', '1'};

struct RngSnapshot {
  std::uint64_t seed = 0;
  std::uint64_t position = 0;
  std::uint64_t words[4] = {};
};

inline RngSnapshot snapshot_rng(const RngState& rng) {
  RngSnapshot s;
  s.seed = rng.seed();
  s.position = rng.position();
  for (int i = 0; i < 4; ++i) s.words[i] = rng.words()[i];
  return s;
}

inline void restore_rng(RngState& rng, const RngSnapshot& s) {
  rng.restore(s.seed, s.position, s.words);
}

struct TrainerState {
  RngSnapshot rng;
  std::int64_t global_step = 0;
  std::int32_t next_epoch = 0;
  double best_mgen = -1.0;
  double best_fourgram = -1.0;
  std::uint32_t baseline_cap = 50;
  std::vector<double> baseline_entries;  // oldest first
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

template <typename V>
inline void write_pod(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
inline V read_pod(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw NumericError("checkpoint truncated");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw NumericError("checkpoint truncated");
  return s;
}

template <typename T>
inline void write_scalars(std::ostream& out, const Tensor<T>& t) {
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(T)));
}

template <typename T>
inline void read_scalars(std::istream& in, Tensor<T>& t) {
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  if (!in) throw NumericError("checkpoint truncated");
}

}  // namespace detail

template <typename T>
inline void save_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                            const ParamStore<T>& params, const TrainerState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NumericError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_string(out, config_text);
  detail::write_pod(out, state.rng.seed);
  detail::write_pod(out, state.rng.position);
  for (auto w : state.rng.words) detail::write_pod(out, w);
  detail::write_pod<std::int64_t>(out, params.step());
  detail::write_pod(out, state.global_step);
  detail::write_pod(out, state.next_epoch);
  detail::write_pod(out, state.best_mgen);
  detail::write_pod(out, state.best_fourgram);
  detail::write_pod(out, state.baseline_cap);
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(state.baseline_entries.size()));
  for (double r : state.baseline_entries) detail::write_pod(out, r);
  detail::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(sizeof(T)));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.count()));
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Param<T>& p = params[i];
    detail::write_string(out, p.name);
    detail::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(p.value.shape.size()));
    for (int d : p.value.shape) detail::write_pod<std::int32_t>(out, d);
    detail::write_scalars(out, p.value);
    detail::write_scalars(out, p.m);
    detail::write_scalars(out, p.v);
  }
  if (!out) throw NumericError("short write for checkpoint " + path.string());
}

template <typename T>
struct Checkpoint {
  std::string config_text;
  TrainerState state;
  std::int64_t adam_step = 0;
  struct Entry {
    std::string name;
    Tensor<T> value, m, v;
  };
  std::vector<Entry> entries;
};

template <typename T>
inline Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw NumericError(path.string() + ": not a checkpoint (bad magic)");
  }
  Checkpoint<T> ck;
  ck.config_text = detail::read_string(in);
  ck.state.rng.seed = detail::read_pod<std::uint64_t>(in);
  ck.state.rng.position = detail::read_pod<std::uint64_t>(in);
  for (auto& w : ck.state.rng.words) w = detail::read_pod<std::uint64_t>(in);
  ck.adam_step = detail::read_pod<std::int64_t>(in);
  ck.state.global_step = detail::read_pod<std::int64_t>(in);
  ck.state.next_epoch = detail::read_pod<std::int32_t>(in);
  ck.state.best_mgen = detail::read_pod<double>(in);
  ck.state.best_fourgram = detail::read_pod<double>(in);
  ck.state.baseline_cap = detail::read_pod<std::uint32_t>(in);
  auto n_baseline = detail::read_pod<std::uint32_t>(in);
  ck.state.baseline_entries.resize(n_baseline);
  for (auto& r : ck.state.baseline_entries) r = detail::read_pod<double>(in);
  auto scalar_size = detail::read_pod<std::uint8_t>(in);
  if (scalar_size != sizeof(T)) {
    throw NumericError(path.string() + ": scalar width " + std::to_string(scalar_size) +
                       " does not match this build's " + std::to_string(sizeof(T)));
  }
  auto n_params = detail::read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    typename Checkpoint<T>::Entry e;
    e.name = detail::read_string(in);
    auto ndim = detail::read_pod<std::uint8_t>(in);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = detail::read_pod<std::int32_t>(in);
    e.value = Tensor<T>::zeros(shape);
    e.m = Tensor<T>::zeros(shape);
    e.v = Tensor<T>::zeros(shape);
    detail::read_scalars(in, e.value);
    detail::read_scalars(in, e.m);
    detail::read_scalars(in, e.v);
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

// Copy checkpointed tensors into a freshly built store. Name/shape sets must
// match exactly: a mismatch means the config used to rebuild the model does
// not describe the checkpointed architecture.
template <typename T>
inline void apply_checkpoint(const Checkpoint<T>& ck, ParamStore<T>& params) {
  if (ck.entries.size() != params.count()) {
    throw NumericError("checkpoint has " + std::to_string(ck.entries.size()) +
                       " parameters, model has " + std::to_string(params.count()));
  }
  for (const auto& entry : ck.entries) {
    if (!params.contains(entry.name)) {
      throw NumericError("checkpoint parameter " + entry.name + " unknown to this model");
    }
    Param<T>& p = params.at(entry.name);
    if (p.value.shape != entry.value.shape) {
      throw NumericError("checkpoint parameter " + entry.name + " has mismatched shape");
    }
    p.value = entry.value;
    p.m = entry.m;
    p.v = entry.v;
  }
  params.step() = ck.adam_step;
}

}  // namespace pianofinger
