#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/nn/params.hpp"

namespace pointscan {

// Checkpoint container layout (all integers little-endian):
//   magic "PTRB" | u32 version | u32 config length | config JSON bytes |
//   repeated records: u32 name length | name bytes | u8 dtype (0=f32, 1=f64)
//                     | u8 rank | u32 dims[rank] | raw values
// Records run until end of file. f32 storage halves the file at the cost of
// rounding; f64 round-trips parameters bit-exactly.

enum class CheckpointDtype : std::uint8_t { f32 = 0, f64 = 1 };

inline CheckpointDtype parse_checkpoint_dtype(const std::string& name) {
  if (name == "f32") return CheckpointDtype::f32;
  if (name == "f64") return CheckpointDtype::f64;
  throw ConfigError("unknown checkpoint dtype '" + name + "'");
}

struct CheckpointEntry {
  std::string name;
  CheckpointDtype dtype = CheckpointDtype::f32;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_json;
  std::vector<CheckpointEntry> entries;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
      (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  return true;
}

inline bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return true;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const std::string& config_json,
                            const ParamStore& ps,
                            CheckpointDtype dtype = CheckpointDtype::f32) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint '" + path + "' for writing");
  out.write("PTRB", 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, std::uint32_t(config_json.size()));
  out.write(config_json.data(), std::streamsize(config_json.size()));
  for (const auto& name : ps.names()) {
    const TensorPtr& t = ps.entry(name).value;
    detail::put_u32(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    out.put(char(static_cast<std::uint8_t>(dtype)));
    out.put(char(static_cast<std::uint8_t>(t->shape.size())));
    for (std::size_t d : t->shape) detail::put_u32(out, std::uint32_t(d));
    if (dtype == CheckpointDtype::f32) {
      for (double v : t->data) {
        const float f = float(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(out, bits);
      }
    } else {
      for (double v : t->data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        detail::put_u64(out, bits);
      }
    }
  }
  if (!out) throw DataError("write failure on checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PTRB", 4) != 0)
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  Checkpoint ck;
  if (!detail::get_u32(in, ck.version))
    throw DataError("checkpoint '" + path + "' truncated in header");
  if (ck.version != 1)
    throw DataError("checkpoint '" + path + "' has unsupported version " +
                    std::to_string(ck.version));
  std::uint32_t cfg_len = 0;
  if (!detail::get_u32(in, cfg_len))
    throw DataError("checkpoint '" + path + "' truncated in header");
  ck.config_json.resize(cfg_len);
  if (cfg_len && !in.read(ck.config_json.data(), cfg_len))
    throw DataError("checkpoint '" + path + "' truncated in config");
  for (;;) {
    std::uint32_t name_len = 0;
    if (!detail::get_u32(in, name_len)) break;  // clean end of file
    CheckpointEntry e;
    e.name.resize(name_len);
    if (name_len && !in.read(e.name.data(), name_len))
      throw DataError("checkpoint '" + path + "' truncated in record name");
    int dt = in.get();
    int rank = in.get();
    if (dt == EOF || rank == EOF)
      throw DataError("checkpoint '" + path + "' truncated in record header");
    if (dt != 0 && dt != 1)
      throw DataError("checkpoint '" + path + "' has unknown dtype tag " +
                      std::to_string(dt));
    e.dtype = static_cast<CheckpointDtype>(dt);
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      std::uint32_t dim = 0;
      if (!detail::get_u32(in, dim))
        throw DataError("checkpoint '" + path + "' truncated in dims");
      e.shape.push_back(dim);
      n *= dim;
    }
    e.values.resize(n);
    if (e.dtype == CheckpointDtype::f32) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        if (!detail::get_u32(in, bits))
          throw DataError("checkpoint '" + path + "' truncated in values of '" +
                          e.name + "'");
        float f;
        std::memcpy(&f, &bits, 4);
        e.values[i] = double(f);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        if (!detail::get_u64(in, bits))
          throw DataError("checkpoint '" + path + "' truncated in values of '" +
                          e.name + "'");
        double v;
        std::memcpy(&v, &bits, 8);
        e.values[i] = v;
      }
    }
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

// Copies checkpoint values into an already-built store. The parameter sets
// must match exactly, name by name and shape by shape.
inline void load_into_store(const Checkpoint& ck, ParamStore& ps) {
  std::size_t seen = 0;
  for (const auto& e : ck.entries) {
    if (!ps.has(e.name))
      throw DataError("checkpoint entry '" + e.name +
                      "' does not exist in the model");
    TensorPtr t = ps.get(e.name);
    if (t->shape != e.shape)
      throw DataError("checkpoint entry '" + e.name + "' has shape " +
                      shape_str(e.shape) + " but the model expects " +
                      shape_str(t->shape));
    t->data = e.values;
    seen += 1;
  }
  if (seen != ps.names().size())
    throw DataError("checkpoint provides " + std::to_string(seen) +
                    " tensors but the model has " +
                    std::to_string(ps.names().size()));
}

}  // namespace pointscan
