// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "rvseg/config.hpp"

namespace rvseg {

namespace {

using Kind = CheckpointError::Kind;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    bytes(&v, sizeof v);
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  template <typename U>
  static U byteswap(U v) {
    U r{};
    auto* src = reinterpret_cast<std::uint8_t*>(&v);
    auto* dst = reinterpret_cast<std::uint8_t*>(&r);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return r;
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    if (n > in_.size() - pos_) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename U>
  U le() {
    std::uint8_t b[sizeof(U)];
    bytes(b, sizeof b);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string str() {
    const auto n = le<std::uint32_t>();
    if (n > remaining()) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string metadata_json(const TrainingMetadata& m) {
  nlohmann::json j{{"epochs_completed", m.epochs_completed}, {"seed", m.seed}, {"loss_history", m.loss_history}};
  return j.dump();
}

TrainingMetadata metadata_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TrainingMetadata m;
    m.epochs_completed = j.at("epochs_completed").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::malformed, std::string("checkpoint metadata: ") + e.what());
  }
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

Model<float> Checkpoint::make_model() const {
  auto model = Model<float>::uninitialized(model_config);
  auto& dst = model.params();
  if (dst.size() != params.size()) {
    throw CheckpointError(Kind::shape_mismatch, "checkpoint has " + std::to_string(params.size()) +
                                                    " parameters, model expects " + std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || dst[i].shape != params[i].shape) {
      throw CheckpointError(Kind::shape_mismatch,
                            "parameter " + std::to_string(i) + ": checkpoint has '" + params[i].name + "' " +
                                shape_string(params[i].shape) + ", model expects '" + dst[i].name + "' " +
                                shape_string(dst[i].shape));
    }
    dst[i].value = params[i].value;
  }
  return model;
}

Checkpoint make_checkpoint(const Model<float>& model, const ProjectionConfig& projection,
                           const InputStats& stats, const TrainingMetadata& metadata) {
  Checkpoint c;
  c.model_config = model.config();
  c.projection = projection;
  c.input_stats = stats;
  c.metadata = metadata;
  c.params = model.params();
  c.params.zero_grads();
  return c;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.le(kCheckpointVersion);
  w.str(model_section_to_json(ckpt.model_config, ckpt.projection));
  for (float v : ckpt.input_stats.mean) w.f32(v);
  for (float v : ckpt.input_stats.std) w.f32(v);
  w.str(metadata_json(ckpt.metadata));
  w.le(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    w.str(p.name);
    w.le(static_cast<std::uint8_t>(p.role));
    w.le(static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) w.le(static_cast<std::uint32_t>(d));
    for (float v : p.value) w.f32(v);
  }
  const std::uint32_t crc = crc32_of(w.buffer());
  w.le(crc);
  return std::move(w.buffer());
}

namespace {

// Structural parse after the version field; the trailing checksum is not
// consulted here.
Checkpoint parse_checkpoint(Reader& r) {
  Checkpoint c;
  try {
    model_section_from_json(r.str(), c.model_config, c.projection);
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::malformed, e.what());
  }
  for (float& v : c.input_stats.mean) v = r.f32();
  for (float& v : c.input_stats.std) v = r.f32();
  c.metadata = metadata_from_json(r.str());

  const auto expected = Model<float>::uninitialized(c.model_config);
  const auto count = r.le<std::uint32_t>();
  if (count != expected.params().size()) {
    throw CheckpointError(Kind::shape_mismatch, "checkpoint stores " + std::to_string(count) +
                                                    " parameters, its model config has " +
                                                    std::to_string(expected.params().size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto& want = expected.params()[i];
    std::string name = r.str();
    const auto role = r.le<std::uint8_t>();
    const auto rank = r.le<std::uint32_t>();
    if (rank > 8) throw CheckpointError(Kind::malformed, "parameter '" + name + "' has rank " + std::to_string(rank));
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.le<std::uint32_t>());
    if (name != want.name || shape != want.shape || role != static_cast<std::uint8_t>(want.role)) {
      throw CheckpointError(Kind::shape_mismatch, "parameter " + std::to_string(i) + ": stored '" + name + "' " +
                                                      shape_string(shape) + ", expected '" + want.name + "' " +
                                                      shape_string(want.shape));
    }
    const auto idx = c.params.add(name, want.role, shape);
    for (float& v : c.params[idx].value) v = r.f32();
  }
  if (r.remaining() < 4) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  if (r.remaining() != 4) throw CheckpointError(Kind::malformed, "trailing bytes after parameters");
  return c;
}

}  // namespace

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CheckpointError(Kind::bad_magic, "not an rvseg checkpoint (bad magic)");
  }
  if (bytes.size() < sizeof kCheckpointMagic + 8) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, "checkpoint format version " + std::to_string(version) +
                                                      " is not supported (expected " +
                                                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  const auto stored = tail.le<std::uint32_t>();
  const auto actual = crc32_of(body);
  if (stored != actual) {
    // A short file also fails the checksum; report it as truncated when the
    // structure runs out of bytes.
    try {
      Reader probe = r;
      parse_checkpoint(probe);
    } catch (const CheckpointError& e) {
      if (e.kind() == Kind::truncated) throw;
    } catch (const std::exception&) {
    }
    throw CheckpointError(Kind::checksum_mismatch, "checkpoint checksum mismatch (stored " +
                                                       std::to_string(stored) + ", computed " +
                                                       std::to_string(actual) + ")");
  }
  return parse_checkpoint(r);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace rvseg
