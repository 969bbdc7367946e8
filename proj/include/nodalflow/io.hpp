#ifndef NODALFLOW_IO_HPP
#define NODALFLOW_IO_HPP

#include "nodalflow/core_types.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nodalflow {

enum class FormatErrorKind { BadMagic, VersionMismatch, Truncated, ShapeMismatch, Io };

class FormatError : public std::runtime_error {
public:
  FormatError(FormatErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

private:
  FormatErrorKind kind_;
};

const char* to_string(FormatErrorKind kind);

inline constexpr std::uint32_t kNtdfVersion = 1;

// NTDF, little-endian:
//   "NTDF" u32 version u32 d u32 N u32 L u32 n_L f64 dt u64 M
//   N*d f64 node coordinates (node-major)
//   N u64 permutation entries
//   M * (n_L+1) * N * L f64 values (time-major, component-major per state)
// Pde name, seed and oracle sub-steps live in the optional JSON sidecar, not
// the binary. The domain is implied by d: periodic [0, 2pi) for 1D, [-1,1]^2
// for 2D; writing a grid on any other domain is rejected.
void write_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path);
TrajectoryDataset read_dataset(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_dataset(const TrajectoryDataset& dataset);
TrajectoryDataset decode_dataset(const std::vector<std::uint8_t>& bytes);

struct NtdfHeader {
  std::uint32_t version = 0;
  std::uint32_t dim = 0;
  std::uint32_t nodes = 0;
  std::uint32_t components = 0;
  std::uint32_t steps = 0;
  double dt = 0.0;
  std::uint64_t sequences = 0;
};

NtdfHeader read_ntdf_header(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

namespace binary {

// Little-endian encoders; the host is assumed little-endian (checked at
// compile time in io.cpp).
class Writer {
public:
  void bytes(const void* data, std::size_t n);
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  std::vector<std::uint8_t>& buffer() { return buffer_; }

private:
  std::vector<std::uint8_t> buffer_;
};

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& data) : data_(data) {}
  void bytes(void* out, std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

private:
  const std::vector<std::uint8_t>& data_;
  std::size_t pos_ = 0;
};

}  // namespace binary

}  // namespace nodalflow

#endif
