#include "nodalflow/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numbers>

namespace nodalflow {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kNtdfMagic[4] = {'N', 'T', 'D', 'F'};

Domain standard_domain(std::uint32_t dim) {
  if (dim == 1) return Domain::periodic(2.0 * std::numbers::pi);
  return Domain::box(-1.0, 1.0, 2);
}

}  // namespace

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::BadMagic: return "bad_magic";
    case FormatErrorKind::VersionMismatch: return "version_mismatch";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::ShapeMismatch: return "shape_mismatch";
    case FormatErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace binary {

void Writer::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buffer_.insert(buffer_.end(), p, p + n);
}

void Reader::bytes(void* out, std::size_t n) {
  if (remaining() < n) throw FormatError(FormatErrorKind::Truncated, "unexpected end of payload");
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::uint32_t Reader::u32() {
  std::uint32_t v;
  bytes(&v, sizeof v);
  return v;
}

std::uint64_t Reader::u64() {
  std::uint64_t v;
  bytes(&v, sizeof v);
  return v;
}

double Reader::f64() {
  double v;
  bytes(&v, sizeof v);
  return v;
}

}  // namespace binary

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorKind::Io, "write failed for " + path.string());
}

std::vector<std::uint8_t> encode_dataset(const TrajectoryDataset& dataset) {
  dataset.validate();
  const auto& grid = dataset.grid;
  if (!(grid.domain() == standard_domain(static_cast<std::uint32_t>(grid.dim())))) {
    throw std::invalid_argument("NTDF stores only the standard domains ([0,2pi) or [-1,1]^2)");
  }
  binary::Writer w;
  w.bytes(kNtdfMagic, 4);
  w.u32(kNtdfVersion);
  w.u32(static_cast<std::uint32_t>(grid.dim()));
  w.u32(static_cast<std::uint32_t>(grid.size()));
  w.u32(static_cast<std::uint32_t>(dataset.layout.components));
  w.u32(static_cast<std::uint32_t>(dataset.steps));
  w.f64(dataset.dt);
  w.u64(dataset.sequences.size());
  for (Index i = 0; i < grid.size(); ++i) {
    for (int k = 0; k < grid.dim(); ++k) w.f64(grid.nodes()(i, k));
  }
  for (std::size_t p : grid.permutation().indices()) w.u64(p);
  for (const auto& seq : dataset.sequences) {
    for (const auto& s : seq.states) w.bytes(s.values.data(), sizeof(double) * static_cast<std::size_t>(s.values.size()));
  }
  return std::move(w.buffer());
}

NtdfHeader read_ntdf_header(const std::vector<std::uint8_t>& bytes) {
  binary::Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kNtdfMagic, 4) != 0) throw FormatError(FormatErrorKind::BadMagic, "not an NTDF file");
  NtdfHeader h;
  h.version = r.u32();
  if (h.version != kNtdfVersion) {
    throw FormatError(FormatErrorKind::VersionMismatch, "unsupported NTDF version " + std::to_string(h.version));
  }
  h.dim = r.u32();
  h.nodes = r.u32();
  h.components = r.u32();
  h.steps = r.u32();
  h.dt = r.f64();
  h.sequences = r.u64();
  if (h.dim < 1 || h.dim > 2 || h.nodes < 2 || h.components < 1 || h.sequences < 1) {
    throw FormatError(FormatErrorKind::ShapeMismatch, "NTDF header carries invalid dimensions");
  }
  return h;
}

TrajectoryDataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  const NtdfHeader h = read_ntdf_header(bytes);
  constexpr std::size_t kHeaderBytes = 4 + 5 * 4 + 8 + 8;
  const std::size_t n = h.nodes;
  const std::size_t state_len = n * h.components;
  const std::size_t payload =
      n * h.dim * 8 + n * 8 + static_cast<std::size_t>(h.sequences) * (h.steps + 1ULL) * state_len * 8;
  if (bytes.size() - kHeaderBytes < payload) throw FormatError(FormatErrorKind::Truncated, "NTDF payload truncated");
  if (bytes.size() - kHeaderBytes > payload) throw FormatError(FormatErrorKind::ShapeMismatch, "NTDF has trailing bytes");

  binary::Reader r(bytes);
  std::uint8_t skip[kHeaderBytes];
  r.bytes(skip, kHeaderBytes);

  Matrix nodes(static_cast<Index>(n), static_cast<Index>(h.dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t k = 0; k < h.dim; ++k) nodes(static_cast<Index>(i), k) = r.f64();
  }
  std::vector<std::size_t> perm(n);
  for (auto& p : perm) p = static_cast<std::size_t>(r.u64());

  TrajectoryDataset ds;
  try {
    ds.grid = GridSet(std::move(nodes), Permutation(std::move(perm)), standard_domain(h.dim));
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrorKind::ShapeMismatch, std::string("NTDF grid invalid: ") + e.what());
  }
  ds.steps = h.steps;
  ds.dt = h.dt;
  ds.layout = StateLayout{static_cast<Index>(n), static_cast<Index>(h.components)};
  ds.sequences.resize(static_cast<std::size_t>(h.sequences));
  for (auto& seq : ds.sequences) {
    seq.dt = h.dt;
    seq.states.reserve(h.steps + 1);
    for (std::uint32_t k = 0; k <= h.steps; ++k) {
      Vector v(static_cast<Index>(state_len));
      r.bytes(v.data(), state_len * 8);
      try {
        seq.states.emplace_back(std::move(v), static_cast<double>(k) * h.dt, ds.layout);
      } catch (const std::invalid_argument& e) {
        throw FormatError(FormatErrorKind::ShapeMismatch, std::string("NTDF state invalid: ") + e.what());
      }
    }
  }
  return ds;
}

void write_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dataset(dataset));
}

TrajectoryDataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace nodalflow
