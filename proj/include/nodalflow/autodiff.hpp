#ifndef NODALFLOW_AUTODIFF_HPP
#define NODALFLOW_AUTODIFF_HPP

#include "nodalflow/core_types.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace nodalflow::ad {

/// Handle to a value recorded on a Tape.
struct Node {
  std::uint32_t id = 0;
};

/// Source of one gather output entry: flat (column-major) index into one of
/// the gather inputs.
struct GatherEntry {
  std::uint32_t source = 0;
  Index flat = 0;
};

/// Reverse-mode gradients keyed by parameter id. Every parameter registered on
/// the tape has an entry, zero if the loss does not depend on it.
class GradientStore {
public:
  const Matrix& at(std::size_t param) const { return grads_.at(param); }
  Matrix& operator[](std::size_t param) { return grads_[param]; }
  bool contains(std::size_t param) const { return grads_.count(param) != 0; }
  std::size_t size() const { return grads_.size(); }
  const std::map<std::size_t, Matrix>& entries() const { return grads_; }

  GradientStore& operator+=(const GradientStore& other);

private:
  std::map<std::size_t, Matrix> grads_;
};

/// Append-only record of primitive operations over dense matrices. Batches are
/// columns: an affine layer maps (in x B) to (out x B).
class Tape {
public:
  Node constant(Matrix value);
  /// Registers parameter `param` as a leaf; at most once per tape.
  Node parameter(std::size_t param, const Matrix& value);

  /// W x + b 1^T
  Node affine(Node weight, Node bias, Node x);
  Node tanh(Node x);
  Node add(Node a, Node b);
  Node scale(Node a, double s);
  /// Output entry k (column-major, shape rows x cols) = inputs[map[k].source]
  /// at flat index map[k].flat. Row gathers, reshapes and stacking are all
  /// special cases.
  Node gather(std::span<const Node> inputs, Index rows, Index cols, std::shared_ptr<const std::vector<GatherEntry>> map);
  Node gather(std::span<const Node> inputs, Index rows, Index cols, std::vector<GatherEntry> map);
  /// Scalar (1x1) sum of squared entries.
  Node sum_of_squares(Node x);

  const Matrix& value(Node n) const { return values_[n.id]; }
  std::size_t size() const { return records_.size(); }

  /// Gradients of the scalar node `loss` with respect to every registered
  /// parameter. The tape is left intact; call reset() before a new forward.
  GradientStore backward(Node loss) const;
  void reset();

private:
  enum class Op : std::uint8_t { Constant, Parameter, Affine, Tanh, Add, Scale, Gather, SumOfSquares };

  struct Record {
    Op op = Op::Constant;
    std::array<std::uint32_t, 3> in{};
    double scalar = 0.0;
    std::size_t param = 0;
    std::vector<std::uint32_t> gather_inputs;
    std::shared_ptr<const std::vector<GatherEntry>> gather_map;
  };

  Node push(Record r, Matrix value);

  std::vector<Record> records_;
  std::vector<Matrix> values_;
  std::map<std::size_t, std::uint32_t> params_;
};

/// y = W x + b 1^T, the forward rule of Tape::affine.
Matrix affine_forward(const Matrix& weight, const Matrix& bias, const Matrix& x);

/// Max over `coordinates` of |analytic - central difference| / max(1, |central|)
/// using step h * (1 + |theta_i|).
double grad_check(const std::function<double(const Vector&)>& f, const Vector& analytic, const Vector& params,
                  double h, std::span<const Index> coordinates);
/// All coordinates.
double grad_check(const std::function<double(const Vector&)>& f, const Vector& analytic, const Vector& params,
                  double h);

}  // namespace nodalflow::ad

#endif
