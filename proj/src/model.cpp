#include "nodalflow/model.hpp"

#include "nodalflow/io.hpp"
#include "nodalflow/rng.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <tuple>

namespace nodalflow {

namespace {

constexpr char kNpmcMagic[4] = {'N', 'P', 'M', 'C'};
constexpr std::size_t kNpmcHeaderBytes = 4 + 4 + 7 * 4 + 8;

DenseLayer zero_layer(Index out, Index in) { return {Matrix::Zero(out, in), Vector::Zero(out)}; }

Matrix tanh_of(const Matrix& x) { return x.array().tanh().matrix(); }

using MapPtr = std::shared_ptr<const std::vector<ad::GatherEntry>>;

// (J x width*B) stacking of J (width x B) blocks: entry (i, r + width*b)
// comes from block i at (r, b).
MapPtr stack_map(Index thickness, Index width, Index batch) {
  static std::mutex lock;
  static std::map<std::tuple<Index, Index, Index>, MapPtr> cache;
  const std::lock_guard guard(lock);
  auto& slot = cache[{thickness, width, batch}];
  if (!slot) {
    std::vector<ad::GatherEntry> map(static_cast<std::size_t>(thickness * width * batch));
    for (Index col = 0; col < width * batch; ++col) {
      for (Index i = 0; i < thickness; ++i) {
        map[static_cast<std::size_t>(i + thickness * col)] = {static_cast<std::uint32_t>(i), col};
      }
    }
    slot = std::make_shared<const std::vector<ad::GatherEntry>>(std::move(map));
  }
  return slot;
}

MapPtr identity_map(Index size) {
  static std::mutex lock;
  static std::map<Index, MapPtr> cache;
  const std::lock_guard guard(lock);
  auto& slot = cache[size];
  if (!slot) {
    std::vector<ad::GatherEntry> map(static_cast<std::size_t>(size));
    for (Index k = 0; k < size; ++k) map[static_cast<std::size_t>(k)] = {0, k};
    slot = std::make_shared<const std::vector<ad::GatherEntry>>(std::move(map));
  }
  return slot;
}

void check_layer(const DenseLayer& layer, Index out, Index in, const char* what) {
  if (layer.weight.rows() != out || layer.weight.cols() != in || layer.bias.size() != out) {
    throw std::invalid_argument(std::string("network parameters: bad shape in ") + what);
  }
}

void check_shapes(const NetworkParams& p) {
  const auto& d = p.dims;
  d.validate();
  if (static_cast<Index>(p.disassembly.size()) != d.thickness) throw std::invalid_argument("network parameters: wrong J");
  for (const auto& net : p.disassembly) {
    if (static_cast<Index>(net.size()) != d.depth) throw std::invalid_argument("network parameters: wrong n_d");
    for (Index l = 0; l < d.depth; ++l) check_layer(net[l], d.width, l == 0 ? d.input : d.width, "disassembly");
  }
  if (static_cast<Index>(p.assembly.size()) != d.assembly_depth) throw std::invalid_argument("network parameters: wrong n_a");
  for (Index l = 0; l < d.assembly_depth; ++l) {
    check_layer(p.assembly[l], l + 1 == d.assembly_depth ? 1 : d.thickness, d.thickness, "assembly");
  }
  if ((d.lift == LiftKind::Affine) != p.lift.has_value()) throw std::invalid_argument("network parameters: lift mismatch");
  if (p.lift) check_layer(*p.lift, d.input, d.width, "lift");
}

}  // namespace

NetworkDims NetworkDims::standard(Index input, Index width, Index depth, Index thickness, Index assembly_depth) {
  NetworkDims d;
  d.input = input;
  d.width = width;
  d.depth = depth;
  d.thickness = thickness;
  d.assembly_depth = assembly_depth;
  d.lift = width == input ? LiftKind::Identity : LiftKind::Affine;
  return d;
}

void NetworkDims::validate() const {
  if (input < 1 || width < 1 || depth < 1 || thickness < 1 || assembly_depth < 1) {
    throw std::invalid_argument("network dimensions must all be >= 1");
  }
  if (lift == LiftKind::Identity && width != input) throw std::invalid_argument("identity lift requires n_w = N");
  if (activation != Activation::Tanh) throw std::invalid_argument("only tanh activation is supported");
}

Index NetworkDims::parameter_count() const {
  const Index n = input, w = width, j = thickness;
  const Index disassembly = j * (n * w + w + (depth - 1) * (w * w + w));
  const Index assembly = (assembly_depth - 1) * (j * j + j) + (j + 1);
  const Index lifting = lift == LiftKind::Affine ? n * w + n : 0;
  return disassembly + assembly + lifting;
}

NetworkParams NetworkParams::zeros(const NetworkDims& dims) {
  dims.validate();
  NetworkParams p;
  p.dims = dims;
  p.disassembly.resize(static_cast<std::size_t>(dims.thickness));
  for (auto& net : p.disassembly) {
    for (Index l = 0; l < dims.depth; ++l) net.push_back(zero_layer(dims.width, l == 0 ? dims.input : dims.width));
  }
  for (Index l = 0; l < dims.assembly_depth; ++l) {
    p.assembly.push_back(zero_layer(l + 1 == dims.assembly_depth ? 1 : dims.thickness, dims.thickness));
  }
  if (dims.lift == LiftKind::Affine) p.lift = zero_layer(dims.input, dims.width);
  return p;
}

std::vector<const DenseLayer*> NetworkParams::layers() const {
  std::vector<const DenseLayer*> out;
  for (const auto& net : disassembly) {
    for (const auto& layer : net) out.push_back(&layer);
  }
  for (const auto& layer : assembly) out.push_back(&layer);
  if (lift) out.push_back(&*lift);
  return out;
}

std::vector<DenseLayer*> NetworkParams::layers() {
  std::vector<DenseLayer*> out;
  for (const DenseLayer* layer : std::as_const(*this).layers()) out.push_back(const_cast<DenseLayer*>(layer));
  return out;
}

Index NetworkParams::parameter_count() const {
  Index count = 0;
  for (const DenseLayer* layer : layers()) count += layer->weight.size() + layer->bias.size();
  return count;
}

Vector NetworkParams::flatten() const {
  Vector flat(parameter_count());
  Index k = 0;
  for (const DenseLayer* layer : layers()) {
    for (Index r = 0; r < layer->weight.rows(); ++r) {
      for (Index c = 0; c < layer->weight.cols(); ++c) flat[k++] = layer->weight(r, c);
    }
    for (Index r = 0; r < layer->bias.size(); ++r) flat[k++] = layer->bias[r];
  }
  return flat;
}

void NetworkParams::unflatten(const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("flat parameter vector has the wrong length");
  Index k = 0;
  for (DenseLayer* layer : layers()) {
    for (Index r = 0; r < layer->weight.rows(); ++r) {
      for (Index c = 0; c < layer->weight.cols(); ++c) layer->weight(r, c) = flat[k++];
    }
    for (Index r = 0; r < layer->bias.size(); ++r) layer->bias[r] = flat[k++];
  }
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (!(a.dims == b.dims) || a.init_seed != b.init_seed) return false;
  const auto la = a.layers(), lb = b.layers();
  if (la.size() != lb.size()) return false;
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i]->weight.rows() != lb[i]->weight.rows() || la[i]->weight.cols() != lb[i]->weight.cols()) return false;
    if (la[i]->weight != lb[i]->weight || la[i]->bias != lb[i]->bias) return false;
  }
  return true;
}

NetworkParams init_params(const NetworkDims& dims, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(dims);
  p.init_seed = seed;
  Rng rng(seed);
  for (DenseLayer* layer : p.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer->weight.rows() + layer->weight.cols()));
    for (Index r = 0; r < layer->weight.rows(); ++r) {
      for (Index c = 0; c < layer->weight.cols(); ++c) layer->weight(r, c) = rng.uniform(-limit, limit);
    }
  }
  return p;
}

TapeParams register_params(ad::Tape& tape, const NetworkParams& params) {
  check_shapes(params);
  TapeParams out;
  std::size_t id = 0;
  for (const DenseLayer* layer : params.layers()) {
    const ad::Node w = tape.parameter(id++, layer->weight);
    const ad::Node b = tape.parameter(id++, Matrix(layer->bias));
    out.layers.emplace_back(w, b);
  }
  return out;
}

Vector flatten_gradient(const NetworkParams& params, const ad::GradientStore& grads) {
  Vector flat(params.parameter_count());
  Index k = 0;
  std::size_t id = 0;
  for (const DenseLayer* layer : params.layers()) {
    const Matrix& gw = grads.at(id++);
    const Matrix& gb = grads.at(id++);
    if (gw.rows() != layer->weight.rows() || gw.cols() != layer->weight.cols() || gb.size() != layer->bias.size()) {
      throw std::invalid_argument("gradient store does not match the parameters");
    }
    for (Index r = 0; r < gw.rows(); ++r) {
      for (Index c = 0; c < gw.cols(); ++c) flat[k++] = gw(r, c);
    }
    for (Index r = 0; r < gb.size(); ++r) flat[k++] = gb(r, 0);
  }
  return flat;
}

std::vector<ad::Node> disassembly_forward(const NetworkParams& params, const TapeParams& nodes, ad::Node x,
                                          ad::Tape& tape) {
  const auto& d = params.dims;
  if (tape.value(x).rows() != d.input) throw std::invalid_argument("state length does not match the network input");
  std::vector<ad::Node> columns;
  std::size_t layer = 0;
  for (Index i = 0; i < d.thickness; ++i) {
    ad::Node h = x;
    for (Index l = 0; l < d.depth; ++l, ++layer) {
      const auto& [w, b] = nodes.layers[layer];
      h = tape.tanh(tape.affine(w, b, h));
    }
    columns.push_back(h);
  }
  return columns;
}

ad::Node assembly_forward(const NetworkParams& params, const TapeParams& nodes, std::span<const ad::Node> columns,
                          ad::Tape& tape) {
  const auto& d = params.dims;
  if (static_cast<Index>(columns.size()) != d.thickness) throw std::invalid_argument("assembly needs J inputs");
  const Index batch = tape.value(columns[0]).cols();
  ad::Node h = tape.gather(columns, d.thickness, d.width * batch, stack_map(d.thickness, d.width, batch));
  std::size_t layer = static_cast<std::size_t>(d.thickness * d.depth);
  for (Index l = 0; l < d.assembly_depth; ++l, ++layer) {
    const auto& [w, b] = nodes.layers[layer];
    h = tape.affine(w, b, h);
    if (l + 1 < d.assembly_depth) h = tape.tanh(h);
  }
  const ad::Node rows[] = {h};
  return tape.gather(rows, d.width, batch, identity_map(d.width * batch));
}

ad::Node model_forward(const NetworkParams& params, const TapeParams& nodes, ad::Node x, ad::Tape& tape) {
  const auto columns = disassembly_forward(params, nodes, x, tape);
  ad::Node y = assembly_forward(params, nodes, columns, tape);
  if (params.lift) {
    const auto& [w, b] = nodes.layers.back();
    y = tape.affine(w, b, y);
  }
  return tape.add(y, x);
}

namespace {

std::vector<Matrix> disassembly_batch(const NetworkParams& params, const Matrix& x) {
  const auto& d = params.dims;
  if (x.rows() != d.input) throw std::invalid_argument("state length does not match the network input");
  std::vector<Matrix> columns;
  for (const auto& net : params.disassembly) {
    Matrix h = x;
    for (const auto& layer : net) h = tanh_of(ad::affine_forward(layer.weight, layer.bias, h));
    columns.push_back(std::move(h));
  }
  return columns;
}

Matrix assembly_batch(const NetworkParams& params, const std::vector<Matrix>& columns) {
  const auto& d = params.dims;
  const Index batch = columns.at(0).cols();
  Matrix h(d.thickness, d.width * batch);
  for (Index col = 0; col < d.width * batch; ++col) {
    for (Index i = 0; i < d.thickness; ++i) h(i, col) = columns[static_cast<std::size_t>(i)].data()[col];
  }
  for (Index l = 0; l < d.assembly_depth; ++l) {
    h = ad::affine_forward(params.assembly[l].weight, params.assembly[l].bias, h);
    if (l + 1 < d.assembly_depth) h = tanh_of(h);
  }
  return h.reshaped(d.width, batch);
}

}  // namespace

Matrix model_apply(const NetworkParams& params, const Matrix& x) {
  check_shapes(params);
  Matrix y = assembly_batch(params, disassembly_batch(params, x));
  if (params.lift) y = ad::affine_forward(params.lift->weight, params.lift->bias, y);
  return y + x;
}

Vector model_apply(const NetworkParams& params, const Vector& w) {
  return model_apply(params, Matrix(w)).col(0);
}

Matrix disassembly_apply(const NetworkParams& params, const Vector& w) {
  check_shapes(params);
  const auto columns = disassembly_batch(params, Matrix(w));
  Matrix out(params.dims.width, params.dims.thickness);
  for (Index i = 0; i < params.dims.thickness; ++i) out.col(i) = columns[static_cast<std::size_t>(i)].col(0);
  return out;
}

Vector assembly_apply(const NetworkParams& params, const Matrix& d) {
  check_shapes(params);
  if (d.rows() != params.dims.width || d.cols() != params.dims.thickness) {
    throw std::invalid_argument("assembly input must be width x J");
  }
  std::vector<Matrix> columns;
  for (Index i = 0; i < d.cols(); ++i) columns.emplace_back(d.col(i));
  return assembly_batch(params, columns).col(0);
}

NetworkParams conjugate_params_by_permutation(const NetworkParams& params, const Permutation& perm) {
  check_shapes(params);
  const auto& d = params.dims;
  if (d.lift != LiftKind::Identity) throw std::invalid_argument("conjugation requires the identity lift");
  if (static_cast<Index>(perm.size()) != d.input) throw std::invalid_argument("permutation length must equal N");
  NetworkParams out = params;
  for (auto& net : out.disassembly) {
    for (auto& layer : net) {
      const Matrix w = layer.weight;
      const Vector b = layer.bias;
      for (Index i = 0; i < w.rows(); ++i) {
        const auto pi = static_cast<Index>(perm[static_cast<std::size_t>(i)]);
        layer.bias[i] = b[pi];
        for (Index j = 0; j < w.cols(); ++j) layer.weight(i, j) = w(pi, static_cast<Index>(perm[static_cast<std::size_t>(j)]));
      }
    }
  }
  return out;
}

std::uint64_t model_hash(const NetworkParams& params) {
  const Vector flat = params.flatten();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(flat.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(flat.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  const NetworkParams& p = checkpoint.params;
  check_shapes(p);
  const auto& d = p.dims;
  binary::Writer w;
  w.bytes(kNpmcMagic, 4);
  w.u32(kNpmcVersion);
  for (Index v : {d.input, d.width, d.depth, d.thickness, d.assembly_depth}) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(d.activation));
  w.u32(static_cast<std::uint32_t>(d.lift));
  const Vector flat = p.flatten();
  w.u64(static_cast<std::uint64_t>(flat.size()));
  w.bytes(flat.data(), static_cast<std::size_t>(flat.size()) * sizeof(double));

  nlohmann::json trailer;
  trailer["init_seed"] = p.init_seed;
  trailer["history"] = {{"loss", checkpoint.history.loss}, {"lr", checkpoint.history.lr}};
  trailer["config"] = checkpoint.history.config;
  if (checkpoint.adam) {
    const auto& a = *checkpoint.adam;
    if (a.m.size() != flat.size() || a.v.size() != flat.size()) throw std::invalid_argument("Adam state does not match parameters");
    trailer["adam"] = {{"step", a.step},
                       {"m", std::vector<double>(a.m.data(), a.m.data() + a.m.size())},
                       {"v", std::vector<double>(a.v.data(), a.v.data() + a.v.size())}};
  } else {
    trailer["adam"] = nullptr;
  }
  const std::string text = trailer.dump();
  w.u64(text.size());
  w.bytes(text.data(), text.size());
  return std::move(w.buffer());
}

NpmcHeader read_npmc_header(const std::vector<std::uint8_t>& bytes) {
  binary::Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kNpmcMagic, 4) != 0) throw FormatError(FormatErrorKind::BadMagic, "not an NPMC file");
  NpmcHeader h;
  h.version = r.u32();
  if (h.version != kNpmcVersion) {
    throw FormatError(FormatErrorKind::VersionMismatch, "unsupported NPMC version " + std::to_string(h.version));
  }
  h.dims.input = r.u32();
  h.dims.width = r.u32();
  h.dims.depth = r.u32();
  h.dims.thickness = r.u32();
  h.dims.assembly_depth = r.u32();
  const std::uint32_t act = r.u32();
  const std::uint32_t lift = r.u32();
  if (act != 0) throw FormatError(FormatErrorKind::ShapeMismatch, "unknown activation tag");
  if (lift > 1) throw FormatError(FormatErrorKind::ShapeMismatch, "unknown lift tag");
  h.dims.lift = static_cast<LiftKind>(lift);
  try {
    h.dims.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrorKind::ShapeMismatch, e.what());
  }
  h.parameters = r.u64();
  if (h.parameters != static_cast<std::uint64_t>(h.dims.parameter_count())) {
    throw FormatError(FormatErrorKind::ShapeMismatch, "parameter count does not match the dims record");
  }
  return h;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const NpmcHeader h = read_npmc_header(bytes);
  binary::Reader r(bytes);
  std::uint8_t skip[kNpmcHeaderBytes];
  r.bytes(skip, kNpmcHeaderBytes);
  if (r.remaining() / sizeof(double) < h.parameters) throw FormatError(FormatErrorKind::Truncated, "parameter block truncated");
  Vector flat(static_cast<Index>(h.parameters));
  r.bytes(flat.data(), h.parameters * sizeof(double));
  const std::uint64_t length = r.u64();
  if (r.remaining() < length) throw FormatError(FormatErrorKind::Truncated, "trailer truncated");
  if (r.remaining() > length) throw FormatError(FormatErrorKind::ShapeMismatch, "trailing bytes after trailer");
  std::string text(length, '\0');
  r.bytes(text.data(), length);

  Checkpoint out;
  out.params = NetworkParams::zeros(h.dims);
  out.params.unflatten(flat);
  try {
    const auto trailer = nlohmann::json::parse(text);
    out.params.init_seed = trailer.at("init_seed").get<std::uint64_t>();
    out.history.loss = trailer.at("history").at("loss").get<std::vector<double>>();
    out.history.lr = trailer.at("history").at("lr").get<std::vector<double>>();
    out.history.config = trailer.at("config").get<std::string>();
    if (out.history.loss.size() != out.history.lr.size()) {
      throw FormatError(FormatErrorKind::ShapeMismatch, "history series lengths differ");
    }
    const auto& adam = trailer.at("adam");
    if (!adam.is_null()) {
      const auto m = adam.at("m").get<std::vector<double>>();
      const auto v = adam.at("v").get<std::vector<double>>();
      if (m.size() != h.parameters || v.size() != h.parameters) {
        throw FormatError(FormatErrorKind::ShapeMismatch, "Adam state length does not match parameters");
      }
      AdamState a;
      a.step = adam.at("step").get<std::uint64_t>();
      a.m = Eigen::Map<const Vector>(m.data(), static_cast<Index>(m.size()));
      a.v = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
      out.adam = std::move(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::ShapeMismatch, std::string("bad checkpoint trailer: ") + e.what());
  }
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkDims& expected) {
  const auto bytes = read_file_bytes(path);
  const NpmcHeader h = read_npmc_header(bytes);
  if (!(h.dims == expected)) throw FormatError(FormatErrorKind::ShapeMismatch, "checkpoint dims differ from the configured network");
  return decode_checkpoint(bytes);
}

}  // namespace nodalflow
