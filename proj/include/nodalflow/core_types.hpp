#ifndef NODALFLOW_CORE_TYPES_HPP
#define NODALFLOW_CORE_TYPES_HPP

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nodalflow {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Storage index -> original generation index. `p[i] = j` means slot i of a
/// permuted vector holds entry j of the unpermuted one.
class Permutation {
public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> map);

  static Permutation identity(std::size_t n);
  /// Lifts a node permutation to a component-major vector of `components`
  /// blocks, permuting inside each block.
  Permutation blocked(std::size_t components) const;

  Permutation inverse() const;
  bool is_identity() const;

  std::size_t size() const { return map_.size(); }
  std::size_t operator[](std::size_t i) const { return map_[i]; }
  const std::vector<std::size_t>& indices() const { return map_; }

  friend bool operator==(const Permutation&, const Permutation&) = default;

private:
  std::vector<std::size_t> map_;
};

enum class DomainKind : std::uint32_t { PeriodicInterval = 0, Box = 1 };

struct Domain {
  DomainKind kind = DomainKind::PeriodicInterval;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Domain periodic(double length);
  static Domain box(double lo, double hi, int dim);
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& point) const;
  friend bool operator==(const Domain& a, const Domain& b) {
    return a.kind == b.kind && a.lower == b.lower && a.upper == b.upper;
  }
};

/// Node coordinates of a grid; no connectivity. Rows are nodes in storage
/// order. Learning code never reads coordinates.
class GridSet {
public:
  GridSet() = default;
  GridSet(Matrix nodes, Permutation permutation, Domain domain);

  int dim() const { return static_cast<int>(nodes_.cols()); }
  Index size() const { return nodes_.rows(); }
  const Matrix& nodes() const { return nodes_; }
  const Permutation& permutation() const { return permutation_; }
  const Domain& domain() const { return domain_; }

  /// Period of a 1D periodic grid.
  double period() const;
  /// True for the output of make_uniform_periodic_grid (bit-exact check).
  bool is_uniform_periodic() const;

  friend bool operator==(const GridSet&, const GridSet&) = default;

private:
  Matrix nodes_;
  Permutation permutation_;
  Domain domain_;
};

struct StateLayout {
  Index nodes = 0;
  Index components = 1;
  Index size() const { return nodes * components; }
  friend bool operator==(const StateLayout&, const StateLayout&) = default;
};

/// Solution values at one instant, component-major: all of u1, then u2, ...
struct NodalState {
  Vector values;
  double time = 0.0;
  StateLayout layout;

  NodalState() = default;
  NodalState(Vector v, double t, StateLayout l);
  static NodalState scalar(Vector v, double t = 0.0);

  auto component(Index c) const { return values.segment(c * layout.nodes, layout.nodes); }
  auto component(Index c) { return values.segment(c * layout.nodes, layout.nodes); }

  friend bool operator==(const NodalState&, const NodalState&);
};

struct TrajectorySequence {
  std::vector<NodalState> states;
  double dt = 0.0;

  Index steps() const { return static_cast<Index>(states.size()) - 1; }
};

struct TrajectoryDataset {
  GridSet grid;
  std::vector<TrajectorySequence> sequences;
  Index steps = 0;  // n_L
  double dt = 0.0;
  StateLayout layout;
  std::string pde_name;
  std::uint64_t seed = 0;
  int oracle_substeps = 1;

  /// Checks the dataset invariants; throws std::invalid_argument.
  void validate() const;
};

GridSet make_uniform_periodic_grid(Index n, double domain_length);

/// Jitters every node by U[-fraction*h, fraction*h] and shuffles storage order.
GridSet perturb_and_permute_grid(const GridSet& grid, double fraction, std::uint64_t seed);

NodalState apply_permutation(const NodalState& state, const Permutation& perm);
Vector apply_permutation(const Eigen::Ref<const Vector>& values, const Permutation& perm);

NodalState concat_components(std::span<const NodalState> states);
/// Inverse of concat_components given the original component counts.
std::vector<NodalState> split_components(const NodalState& state, std::span<const Index> components);

}  // namespace nodalflow

#endif
