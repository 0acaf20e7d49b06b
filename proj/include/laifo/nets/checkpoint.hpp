#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "laifo/grad/tape.hpp"

namespace laifo::nets {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[] = "LAIFO-CKPT1";
inline constexpr std::size_t kCheckpointMagicLen = 11;

struct Checkpoint {
  nlohmann::json meta;  ///< free-form run description stored next to the tensor list
  std::vector<std::pair<std::string, grad::Matrix<double>>> tensors;

  const grad::Matrix<double>* find(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
      if (n == name) return &m;
    }
    return nullptr;
  }
};

/// Layout: magic, u32 manifest length, JSON manifest {meta, tensors:[{name, shape}]},
/// then every tensor as little-endian f64 in manifest order (row-major).
template <class T>
void save_checkpoint(const std::string& path, const std::vector<std::pair<std::string, grad::Parameter<T>*>>& params,
                     const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json manifest;
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, p] : params) {
    manifest["tensors"].push_back({{"name", name}, {"shape", {p->rows(), p->cols()}}});
  }
  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, kCheckpointMagicLen);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, p] : params) {
    const grad::Matrix<double> v = p->value().template cast<double>();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[kCheckpointMagicLen];
  if (!in.read(magic, kCheckpointMagicLen) || std::memcmp(magic, kCheckpointMagic, kCheckpointMagicLen) != 0) {
    throw CheckpointError("'" + path + "' is not a LAIFO-CKPT1 checkpoint");
  }
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), 4)) throw CheckpointError("truncated checkpoint manifest");
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw CheckpointError("truncated checkpoint manifest");
  Checkpoint ck;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
    ck.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& t : manifest.at("tensors")) {
      const auto shape = t.at("shape").get<std::vector<grad::Index>>();
      if (shape.size() != 2) throw CheckpointError("checkpoint tensors must be 2-D");
      grad::Matrix<double> m(shape[0], shape[1]);
      if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
        throw CheckpointError("truncated checkpoint payload");
      }
      ck.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  return ck;
}

/// Copies every named tensor into the matching parameter; names and shapes must agree.
template <class T>
void restore(const Checkpoint& ck, const std::vector<std::pair<std::string, grad::Parameter<T>*>>& params) {
  for (const auto& [name, p] : params) {
    const auto* m = ck.find(name);
    if (!m) throw CheckpointError("checkpoint has no tensor '" + name + "'");
    if (m->rows() != p->rows() || m->cols() != p->cols()) {
      throw CheckpointError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    p->value() = m->template cast<T>();
  }
}

}  // namespace laifo::nets
