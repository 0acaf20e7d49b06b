#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "laifo/replay/buffer.hpp"

namespace laifo::replay {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observations are stored row-major, one frame per row.
struct ExpertEpisode {
  std::vector<float> observations;  ///< n × obs_size
  std::vector<float> actions;       ///< (n−1) × act_size, or empty
  std::vector<float> rewards;       ///< n−1, or empty

  bool operator==(const ExpertEpisode&) const = default;
};

struct ExpertDataset {
  std::string env;
  std::vector<std::int64_t> obs_shape;
  std::vector<std::int64_t> act_shape;
  bool has_actions = false;
  bool has_rewards = false;
  std::vector<ExpertEpisode> episodes;

  std::int64_t obs_size() const {
    std::int64_t n = 1;
    for (auto s : obs_shape) n *= s;
    return n;
  }
  std::int64_t act_size() const {
    std::int64_t n = 1;
    for (auto s : act_shape) n *= s;
    return act_shape.empty() ? 0 : n;
  }
  std::int64_t count() const { return static_cast<std::int64_t>(episodes.size()); }
  std::int64_t length(std::size_t e) const {
    return static_cast<std::int64_t>(episodes[e].observations.size()) / obs_size();
  }

  /// Mean undiscounted episode return from stored rewards.
  double mean_return() const {
    if (!has_rewards || episodes.empty()) throw DatasetError("dataset has no rewards");
    double total = 0.0;
    for (const auto& ep : episodes) {
      for (float r : ep.rewards) total += r;
    }
    return total / static_cast<double>(episodes.size());
  }

  /// Checks the per-episode length relations against the header fields.
  void validate() const {
    const std::int64_t os = obs_size();
    if (os <= 0) throw DatasetError("dataset: observation shape must be non-empty");
    for (std::size_t e = 0; e < episodes.size(); ++e) {
      const auto& ep = episodes[e];
      if (ep.observations.size() % static_cast<std::size_t>(os) != 0) {
        throw DatasetError("dataset: episode " + std::to_string(e) + " observations disagree with obs_shape");
      }
      const std::int64_t n = length(e);
      if (n < 1) throw DatasetError("dataset: episode " + std::to_string(e) + " is empty");
      const auto expect_act = has_actions ? static_cast<std::size_t>((n - 1) * act_size()) : 0;
      const auto expect_rew = has_rewards ? static_cast<std::size_t>(n - 1) : 0;
      if (ep.actions.size() != expect_act) {
        throw DatasetError("dataset: episode " + std::to_string(e) + " action count must be n-1");
      }
      if (ep.rewards.size() != expect_rew) {
        throw DatasetError("dataset: episode " + std::to_string(e) + " reward count must be n-1");
      }
    }
  }

  bool operator==(const ExpertDataset&) const = default;
};

inline constexpr char kDatasetMagic[] = "LAIFO1";
inline constexpr std::size_t kDatasetMagicLen = 6;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DatasetError(std::string("truncated payload reading ") + what);
  return v;
}

inline void write_floats(std::ostream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline std::vector<float> read_floats(std::istream& in, std::size_t n, const char* what) {
  std::vector<float> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw DatasetError(std::string("truncated payload reading ") + what);
  }
  return v;
}

}  // namespace detail

inline nlohmann::json dataset_header(const ExpertDataset& ds) {
  return {{"env", ds.env},
          {"obs_shape", ds.obs_shape},
          {"act_shape", ds.act_shape},
          {"episodes", ds.count()},
          {"dtype", "f32le"},
          {"has_actions", ds.has_actions},
          {"has_rewards", ds.has_rewards}};
}

inline void save_dataset(const ExpertDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open '" + path + "' for writing");
  const std::string header = dataset_header(ds).dump();
  out.write(kDatasetMagic, kDatasetMagicLen);
  detail::write_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    const auto& ep = ds.episodes[e];
    detail::write_u32(out, static_cast<std::uint32_t>(ds.length(e)));
    detail::write_floats(out, ep.observations);
    if (ds.has_actions) detail::write_floats(out, ep.actions);
    if (ds.has_rewards) detail::write_floats(out, ep.rewards);
  }
  if (!out) throw DatasetError("write failed for '" + path + "'");
}

inline ExpertDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  char magic[kDatasetMagicLen];
  if (!in.read(magic, kDatasetMagicLen) || std::memcmp(magic, kDatasetMagic, kDatasetMagicLen) != 0) {
    throw DatasetError("'" + path + "' is not a LAIFO1 dataset (magic/version mismatch)");
  }
  const std::uint32_t hlen = detail::read_u32(in, "header length");
  std::string text(hlen, '\0');
  if (!in.read(text.data(), hlen)) throw DatasetError("truncated payload reading header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed dataset header: ") + e.what());
  }
  ExpertDataset ds;
  std::int64_t declared = 0;
  try {
    if (h.at("dtype").get<std::string>() != "f32le") throw DatasetError("unsupported dtype in dataset header");
    ds.env = h.at("env").get<std::string>();
    ds.obs_shape = h.at("obs_shape").get<std::vector<std::int64_t>>();
    ds.act_shape = h.at("act_shape").get<std::vector<std::int64_t>>();
    ds.has_actions = h.at("has_actions").get<bool>();
    ds.has_rewards = h.at("has_rewards").get<bool>();
    declared = h.at("episodes").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("dataset header is missing a field: ") + e.what());
  }
  const std::int64_t os = ds.obs_size();
  const std::int64_t as = ds.act_size();
  if (os <= 0) throw DatasetError("dataset header: obs_shape must be positive");
  if (ds.has_actions && as <= 0) throw DatasetError("dataset header: has_actions set but act_shape is empty");
  ds.episodes.reserve(static_cast<std::size_t>(std::max<std::int64_t>(declared, 0)));
  for (std::int64_t e = 0; e < declared; ++e) {
    std::uint32_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&n), 4)) {
      throw DatasetError("header declares " + std::to_string(declared) + " episodes but only " + std::to_string(e) +
                         " are stored");
    }
    if (n < 1) throw DatasetError("dataset: episode " + std::to_string(e) + " is empty");
    ExpertEpisode ep;
    ep.observations = detail::read_floats(in, static_cast<std::size_t>(n) * os, "observations");
    if (ds.has_actions) ep.actions = detail::read_floats(in, static_cast<std::size_t>(n - 1) * as, "actions");
    if (ds.has_rewards) ep.rewards = detail::read_floats(in, static_cast<std::size_t>(n - 1), "rewards");
    ds.episodes.push_back(std::move(ep));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DatasetError("dataset has trailing bytes after the declared episodes");
  }
  return ds;
}

/// Read-only expert buffer with every recorded transition. Actions are
/// included only when the dataset carries them.
template <class T>
ReplayBuffer<T> expert_buffer(const ExpertDataset& ds, Index max_depth, bool with_actions) {
  if (with_actions && !ds.has_actions) throw DatasetError("expert actions required");
  std::int64_t transitions = 0;
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) transitions += ds.length(e) - 1;
  if (transitions < 1) throw DatasetError("dataset holds no transitions");
  const Index os = ds.obs_size();
  const Index as = with_actions ? ds.act_size() : 0;
  ReplayBuffer<T> buf(os, as, transitions, max_depth);
  std::vector<T> frame(os);
  std::vector<T> act(as);
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    const auto& ep = ds.episodes[e];
    const std::int64_t n = ds.length(e);
    if (n < 2) continue;
    for (Index i = 0; i < os; ++i) frame[i] = static_cast<T>(ep.observations[i]);
    buf.start(frame);
    for (std::int64_t t = 1; t < n; ++t) {
      for (Index i = 0; i < os; ++i) frame[i] = static_cast<T>(ep.observations[t * os + i]);
      for (Index i = 0; i < as; ++i) act[i] = static_cast<T>(ep.actions[(t - 1) * as + i]);
      const T r = ds.has_rewards ? static_cast<T>(ep.rewards[t - 1]) : T(0);
      buf.push(frame, act, r, t == n - 1);
    }
  }
  buf.freeze();
  return buf;
}

}  // namespace laifo::replay
