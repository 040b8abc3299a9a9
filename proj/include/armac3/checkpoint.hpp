#pragma once

// Binary checkpoint container.
//
//   bytes 0..5   "ARMAC3"
//   u32          format version
//   u64 + bytes  config echo (UTF-8 key = value text)
//   u64          tensor count
//   per tensor:  u64 + bytes name, u32 ndim, u64 dims[ndim],
//                f64 values[prod(dims)] row-major
//
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "armac3/errors.hpp"
#include "armac3/tensor.hpp"

namespace armac3 {

inline constexpr char kCheckpointMagic[6] = {'A', 'R', 'M', 'A', 'C', '3'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  Matrix to_matrix() const {
    if (shape.size() != 2) throw FormatError("checkpoint tensor " + name + " is not 2-D");
    if (shape[0] * shape[1] != values.size()) throw FormatError("checkpoint tensor " + name + " size mismatch");
    Matrix m(static_cast<Index>(shape[0]), static_cast<Index>(shape[1]));
    std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
    return m;
  }

  static CheckpointTensor from_matrix(std::string name, const Matrix& m) {
    CheckpointTensor t;
    t.name = std::move(name);
    t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.values.assign(m.data(), m.data() + m.size());
    return t;
  }
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor& find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t;
    }
    throw FormatError("checkpoint has no tensor named " + name);
  }
};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::string get_string(std::istream& is, std::uint64_t limit) {
  const std::uint64_t len = get_u64(is);
  if (len > limit) throw FormatError("checkpoint string length out of range");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint truncated");
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(os, ck.version);
  detail::put_u64(os, ck.config_text.size());
  os.write(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
  detail::put_u64(os, ck.tensors.size());
  for (const auto& t : ck.tensors) {
    detail::put_u64(os, t.name.size());
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    std::uint64_t count = 1;
    for (auto d : t.shape) {
      detail::put_u64(os, d);
      count *= d;
    }
    if (count != t.values.size()) throw ContractError("checkpoint tensor " + t.name + " shape/data mismatch");
    for (double v : t.values) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw FormatError("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[sizeof kCheckpointMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError("not an ARMAC3 checkpoint (bad magic bytes)");
  }
  Checkpoint ck;
  ck.version = detail::get_u32(is);
  if (ck.version != kCheckpointVersion) {
    throw FormatError("checkpoint format version " + std::to_string(ck.version) +
                      " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  ck.config_text = detail::get_string(is, 1u << 24);
  const std::uint64_t count = detail::get_u64(is);
  if (count > (1u << 20)) throw FormatError("checkpoint tensor count out of range");
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointTensor t;
    t.name = detail::get_string(is, 4096);
    const std::uint32_t ndim = detail::get_u32(is);
    if (ndim > 8) throw FormatError("checkpoint tensor rank out of range");
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(detail::get_u64(is));
      total *= t.shape.back();
      if (total > (std::uint64_t{1} << 32)) throw FormatError("checkpoint tensor too large");
    }
    t.values.resize(total);
    for (auto& v : t.values) v = std::bit_cast<double>(detail::get_u64(is));
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write checkpoint " + path.string());
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace armac3
