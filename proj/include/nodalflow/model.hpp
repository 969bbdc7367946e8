#ifndef NODALFLOW_MODEL_HPP
#define NODALFLOW_MODEL_HPP

#include "nodalflow/autodiff.hpp"
#include "nodalflow/core_types.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nodalflow {

enum class LiftKind : std::uint32_t { Identity = 0, Affine = 1 };
enum class Activation : std::uint32_t { Tanh = 0 };

/// Sizes of the flow-map network. `input` is the full state length (nodes
/// times components for systems).
struct NetworkDims {
  Index input = 0;      // N
  Index width = 0;      // n_w
  Index depth = 1;      // n_d: affine+tanh layers per disassembly net
  Index thickness = 1;  // J
  Index assembly_depth = 1;  // n_a
  LiftKind lift = LiftKind::Identity;
  Activation activation = Activation::Tanh;

  /// Identity lift when width == input, affine otherwise.
  static NetworkDims standard(Index input, Index width, Index depth, Index thickness, Index assembly_depth);

  void validate() const;
  /// Closed-form count.
  Index parameter_count() const;

  friend bool operator==(const NetworkDims&, const NetworkDims&) = default;
};

struct DenseLayer {
  Matrix weight;
  Vector bias;
};

struct NetworkParams {
  NetworkDims dims;
  std::vector<std::vector<DenseLayer>> disassembly;  // [J][n_d]
  std::vector<DenseLayer> assembly;                  // n_a layers, last is J -> 1
  std::optional<DenseLayer> lift;                    // width -> input
  std::uint64_t init_seed = 0;

  static NetworkParams zeros(const NetworkDims& dims);

  /// Number of stored scalars, by enumeration.
  Index parameter_count() const;
  /// Tensors in storage order: each disassembly net layer by layer, then the
  /// assembly, then the lift; weight before bias.
  std::vector<const DenseLayer*> layers() const;
  std::vector<DenseLayer*> layers();

  /// Weights row-major then bias, layers in storage order.
  Vector flatten() const;
  void unflatten(const Eigen::Ref<const Vector>& flat);

  friend bool operator==(const NetworkParams& a, const NetworkParams& b);
};

/// Glorot-uniform weights, zero biases.
NetworkParams init_params(const NetworkDims& dims, std::uint64_t seed);

/// Parameters registered on a tape; ids are 2*layer (weight), 2*layer+1 (bias).
struct TapeParams {
  std::vector<std::pair<ad::Node, ad::Node>> layers;
};

TapeParams register_params(ad::Tape& tape, const NetworkParams& params);
/// Converts a gradient store keyed by TapeParams ids into flatten() order.
Vector flatten_gradient(const NetworkParams& params, const ad::GradientStore& grads);

/// Batched forward on the tape: x is (input x B).
ad::Node model_forward(const NetworkParams& params, const TapeParams& nodes, ad::Node x, ad::Tape& tape);
/// Disassembly output for one batch column layout: J nodes of (width x B).
std::vector<ad::Node> disassembly_forward(const NetworkParams& params, const TapeParams& nodes, ad::Node x,
                                          ad::Tape& tape);
/// Row-wise shared assembly over J nodes of (width x B); returns (width x B).
ad::Node assembly_forward(const NetworkParams& params, const TapeParams& nodes, std::span<const ad::Node> columns,
                          ad::Tape& tape);

/// Tape-free forward with the same arithmetic as model_forward; x is
/// (input x B). Bit-identical to the tape value.
Matrix model_apply(const NetworkParams& params, const Matrix& x);
Vector model_apply(const NetworkParams& params, const Vector& w);
/// Tape-free pieces for a single state: (width x J) and length-width.
Matrix disassembly_apply(const NetworkParams& params, const Vector& w);
Vector assembly_apply(const NetworkParams& params, const Matrix& d);

/// Relabels the nodes: returns params whose forward on p.w equals p applied to
/// the forward on w. Requires the identity lift.
NetworkParams conjugate_params_by_permutation(const NetworkParams& params, const Permutation& perm);

/// FNV-1a over the raw parameter bytes in flatten() order.
std::uint64_t model_hash(const NetworkParams& params);

// ---------------------------------------------------------------------------
// Training state carried by checkpoints.

struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t step = 0;

  static AdamState zeros(Index n) { return {Vector::Zero(n), Vector::Zero(n), 0}; }
  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.step == b.step && a.m.size() == b.m.size() && a.v.size() == b.v.size() && a.m == b.m && a.v == b.v;
  }
};

struct TrainHistory {
  std::vector<double> loss;  // mean batch loss per epoch
  std::vector<double> lr;    // learning rate at the last step of each epoch
  std::vector<double> seconds;  // wall-clock per epoch; never serialized
  std::string config;        // JSON echo of the training configuration

  std::size_t epochs() const { return loss.size(); }
};

struct Checkpoint {
  NetworkParams params;
  TrainHistory history;
  std::optional<AdamState> adam;
};

inline constexpr std::uint32_t kNpmcVersion = 1;

// NPMC, little-endian:
//   "NPMC" u32 version
//   u32 N u32 n_w u32 n_d u32 J u32 n_a u32 activation u32 lift
//   u64 parameter count, f64 parameters in flatten() order
//   u64 trailer length, JSON trailer {history, adam, init_seed}
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Rejects a checkpoint whose dims differ from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkDims& expected);

struct NpmcHeader {
  std::uint32_t version = 0;
  NetworkDims dims;
  std::uint64_t parameters = 0;
};
NpmcHeader read_npmc_header(const std::vector<std::uint8_t>& bytes);

}  // namespace nodalflow

#endif
