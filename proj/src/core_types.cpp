#include "nodalflow/core_types.hpp"

#include "nodalflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace nodalflow {

Permutation::Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
  std::vector<bool> seen(map_.size(), false);
  for (std::size_t j : map_) {
    if (j >= map_.size() || seen[j]) {
      throw std::invalid_argument("permutation is not a bijection");
    }
    seen[j] = true;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> map(n);
  std::iota(map.begin(), map.end(), std::size_t{0});
  return Permutation(std::move(map));
}

Permutation Permutation::blocked(std::size_t components) const {
  const std::size_t n = map_.size();
  std::vector<std::size_t> map(n * components);
  for (std::size_t c = 0; c < components; ++c) {
    for (std::size_t i = 0; i < n; ++i) map[c * n + i] = c * n + map_[i];
  }
  return Permutation(std::move(map));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
  return Permutation(std::move(inv));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < map_.size(); ++i) {
    if (map_[i] != i) return false;
  }
  return true;
}

Domain Domain::periodic(double length) {
  Domain d;
  d.kind = DomainKind::PeriodicInterval;
  d.lower = Eigen::VectorXd::Zero(1);
  d.upper = Eigen::VectorXd::Constant(1, length);
  return d;
}

Domain Domain::box(double lo, double hi, int dim) {
  Domain d;
  d.kind = DomainKind::Box;
  d.lower = Eigen::VectorXd::Constant(dim, lo);
  d.upper = Eigen::VectorXd::Constant(dim, hi);
  return d;
}

bool Domain::contains(const Eigen::Ref<const Eigen::VectorXd>& point) const {
  if (point.size() != lower.size()) return false;
  for (Index k = 0; k < point.size(); ++k) {
    if (!(point[k] >= lower[k])) return false;
    // Periodic intervals are half-open.
    if (kind == DomainKind::PeriodicInterval ? !(point[k] < upper[k]) : !(point[k] <= upper[k])) {
      return false;
    }
  }
  return true;
}

GridSet::GridSet(Matrix nodes, Permutation permutation, Domain domain)
    : nodes_(std::move(nodes)), permutation_(std::move(permutation)), domain_(std::move(domain)) {
  if (nodes_.rows() < 2) throw std::invalid_argument("grid needs at least 2 nodes");
  if (nodes_.cols() < 1 || nodes_.cols() > 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (static_cast<Index>(permutation_.size()) != nodes_.rows()) {
    throw std::invalid_argument("grid permutation length does not match node count");
  }
  if (domain_.lower.size() != nodes_.cols()) throw std::invalid_argument("domain dimension mismatch");
  for (Index i = 0; i < nodes_.rows(); ++i) {
    if (!domain_.contains(nodes_.row(i).transpose())) {
      throw std::invalid_argument("grid node " + std::to_string(i) + " lies outside the domain");
    }
  }
}

double GridSet::period() const {
  if (domain_.kind != DomainKind::PeriodicInterval) throw std::invalid_argument("grid is not periodic");
  return domain_.upper[0] - domain_.lower[0];
}

bool GridSet::is_uniform_periodic() const {
  if (dim() != 1 || domain_.kind != DomainKind::PeriodicInterval || domain_.lower[0] != 0.0) return false;
  if (!permutation_.is_identity()) return false;
  const double length = period();
  const Index n = size();
  for (Index i = 0; i < n; ++i) {
    if (nodes_(i, 0) != static_cast<double>(i) * length / static_cast<double>(n)) return false;
  }
  return true;
}

NodalState::NodalState(Vector v, double t, StateLayout l) : values(std::move(v)), time(t), layout(l) {
  if (values.size() != layout.size()) throw std::invalid_argument("state length does not match layout");
  if (!values.allFinite()) throw std::invalid_argument("state has non-finite entries");
  if (!(time >= 0.0)) throw std::invalid_argument("state time must be non-negative");
}

NodalState NodalState::scalar(Vector v, double t) {
  const Index n = v.size();
  return NodalState(std::move(v), t, StateLayout{n, 1});
}

bool operator==(const NodalState& a, const NodalState& b) {
  return a.layout == b.layout && a.time == b.time && a.values.size() == b.values.size() &&
         a.values == b.values;
}

void TrajectoryDataset::validate() const {
  if (sequences.empty()) throw std::invalid_argument("dataset has no sequences");
  if (layout.nodes != grid.size()) throw std::invalid_argument("dataset layout does not match grid");
  for (const auto& seq : sequences) {
    if (seq.steps() != steps) throw std::invalid_argument("sequence length differs from dataset n_L");
    if (seq.dt != dt) throw std::invalid_argument("sequence dt differs from dataset dt");
    for (std::size_t k = 0; k < seq.states.size(); ++k) {
      const auto& s = seq.states[k];
      if (!(s.layout == layout)) throw std::invalid_argument("sequence state layout mismatch");
      const double expected = dt * static_cast<double>(k);
      if (std::abs(s.time - expected) > 1e-9 * std::max(1.0, expected)) {
        throw std::invalid_argument("sequence state time is not k * dt");
      }
    }
  }
}

GridSet make_uniform_periodic_grid(Index n, double domain_length) {
  if (n < 2) throw std::invalid_argument("uniform grid needs N >= 2");
  if (!(domain_length > 0.0)) throw std::invalid_argument("domain length must be positive");
  Matrix nodes(n, 1);
  for (Index i = 0; i < n; ++i) nodes(i, 0) = static_cast<double>(i) * domain_length / static_cast<double>(n);
  return GridSet(std::move(nodes), Permutation::identity(static_cast<std::size_t>(n)),
                 Domain::periodic(domain_length));
}

GridSet perturb_and_permute_grid(const GridSet& grid, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0) || fraction >= 0.5) {
    throw std::invalid_argument("perturbation fraction must lie in [0, 0.5)");
  }
  if (grid.dim() != 1) throw std::invalid_argument("perturb_and_permute_grid expects a 1D grid");
  const Index n = grid.size();
  const double length = grid.period();
  const double h = length / static_cast<double>(n);

  Rng rng(seed);
  Vector moved(n);
  for (Index i = 0; i < n; ++i) {
    double x = grid.nodes()(i, 0) + rng.uniform(-fraction, fraction) * h;
    // Wrap into [0, L); fraction < 0.5 keeps neighbours from crossing.
    if (x < 0.0) x += length;
    if (x >= length) x -= length;
    moved[i] = x;
  }

  // Fisher-Yates on the composite map so the recorded permutation stays
  // relative to the original generation index.
  std::vector<std::size_t> order = grid.permutation().indices();
  std::vector<std::size_t> storage(static_cast<std::size_t>(n));
  std::iota(storage.begin(), storage.end(), std::size_t{0});
  for (std::size_t i = storage.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(storage[i], storage[j]);
  }
  Matrix nodes(n, 1);
  std::vector<std::size_t> map(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::size_t src = storage[static_cast<std::size_t>(i)];
    nodes(i, 0) = moved[static_cast<Index>(src)];
    map[static_cast<std::size_t>(i)] = order[src];
  }
  return GridSet(std::move(nodes), Permutation(std::move(map)), grid.domain());
}

Vector apply_permutation(const Eigen::Ref<const Vector>& values, const Permutation& perm) {
  if (static_cast<Index>(perm.size()) != values.size()) {
    throw std::invalid_argument("permutation length does not match vector length");
  }
  Vector out(values.size());
  for (Index i = 0; i < values.size(); ++i) out[i] = values[static_cast<Index>(perm[static_cast<std::size_t>(i)])];
  return out;
}

NodalState apply_permutation(const NodalState& state, const Permutation& perm) {
  if (static_cast<Index>(perm.size()) != state.layout.nodes) {
    throw std::invalid_argument("permutation length does not match node count");
  }
  const auto lifted = perm.blocked(static_cast<std::size_t>(state.layout.components));
  return NodalState(apply_permutation(state.values, lifted), state.time, state.layout);
}

NodalState concat_components(std::span<const NodalState> states) {
  if (states.empty()) throw std::invalid_argument("concat_components needs at least one state");
  const Index n = states.front().layout.nodes;
  const double t = states.front().time;
  Index total = 0;
  for (const auto& s : states) {
    if (s.layout.nodes != n) throw std::invalid_argument("concat_components: node counts differ");
    if (s.time != t) throw std::invalid_argument("concat_components: times differ");
    total += s.layout.components;
  }
  Vector values(n * total);
  Index offset = 0;
  for (const auto& s : states) {
    values.segment(offset, s.values.size()) = s.values;
    offset += s.values.size();
  }
  return NodalState(std::move(values), t, StateLayout{n, total});
}

std::vector<NodalState> split_components(const NodalState& state, std::span<const Index> components) {
  Index total = 0;
  for (Index c : components) {
    if (c < 1) throw std::invalid_argument("split_components: component counts must be positive");
    total += c;
  }
  if (total != state.layout.components) throw std::invalid_argument("split_components: counts do not sum to L");
  std::vector<NodalState> out;
  const Index n = state.layout.nodes;
  Index offset = 0;
  for (Index c : components) {
    out.emplace_back(state.values.segment(offset, n * c), state.time, StateLayout{n, c});
    offset += n * c;
  }
  return out;
}

}  // namespace nodalflow
