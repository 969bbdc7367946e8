#include "nodalflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nodalflow::ad {

GradientStore& GradientStore::operator+=(const GradientStore& other) {
  for (const auto& [id, g] : other.grads_) {
    auto it = grads_.find(id);
    if (it == grads_.end()) {
      grads_.emplace(id, g);
    } else {
      it->second += g;
    }
  }
  return *this;
}

Node Tape::push(Record r, Matrix value) {
  if (!value.allFinite()) throw std::domain_error("tape operation produced non-finite values");
  records_.push_back(std::move(r));
  values_.push_back(std::move(value));
  return Node{static_cast<std::uint32_t>(records_.size() - 1)};
}

Node Tape::constant(Matrix value) {
  Record r;
  r.op = Op::Constant;
  return push(std::move(r), std::move(value));
}

Node Tape::parameter(std::size_t param, const Matrix& value) {
  if (params_.count(param)) throw std::invalid_argument("parameter registered twice on one tape");
  Record r;
  r.op = Op::Parameter;
  r.param = param;
  const Node n = push(std::move(r), value);
  params_.emplace(param, n.id);
  return n;
}

Node Tape::affine(Node weight, Node bias, Node x) {
  const Matrix& w = value(weight);
  const Matrix& b = value(bias);
  const Matrix& xv = value(x);
  if (w.cols() != xv.rows() || b.rows() != w.rows() || b.cols() != 1) {
    throw std::invalid_argument("affine: shapes do not conform");
  }
  Matrix y = affine_forward(w, b, xv);
  Record r;
  r.op = Op::Affine;
  r.in = {weight.id, bias.id, x.id};
  return push(std::move(r), std::move(y));
}

Node Tape::tanh(Node x) {
  Record r;
  r.op = Op::Tanh;
  r.in[0] = x.id;
  return push(std::move(r), value(x).array().tanh().matrix());
}

Node Tape::add(Node a, Node b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw std::invalid_argument("add: shapes differ");
  }
  Record r;
  r.op = Op::Add;
  r.in = {a.id, b.id, 0};
  return push(std::move(r), value(a) + value(b));
}

Node Tape::scale(Node a, double s) {
  Record r;
  r.op = Op::Scale;
  r.in[0] = a.id;
  r.scalar = s;
  return push(std::move(r), s * value(a));
}

Matrix affine_forward(const Matrix& weight, const Matrix& bias, const Matrix& x) {
  Matrix y = weight * x;
  y.colwise() += bias.col(0);
  return y;
}

Node Tape::gather(std::span<const Node> inputs, Index rows, Index cols, std::vector<GatherEntry> map) {
  return gather(inputs, rows, cols, std::make_shared<const std::vector<GatherEntry>>(std::move(map)));
}

Node Tape::gather(std::span<const Node> inputs, Index rows, Index cols,
                  std::shared_ptr<const std::vector<GatherEntry>> shared) {
  if (!shared) throw std::invalid_argument("gather: null map");
  const auto& map = *shared;
  if (static_cast<Index>(map.size()) != rows * cols) throw std::invalid_argument("gather: map size != rows*cols");
  Matrix out(rows, cols);
  double* dst = out.data();
  for (std::size_t k = 0; k < map.size(); ++k) {
    const auto& e = map[k];
    if (e.source >= inputs.size()) throw std::invalid_argument("gather: source out of range");
    const Matrix& src = value(inputs[e.source]);
    if (e.flat < 0 || e.flat >= src.size()) throw std::invalid_argument("gather: index out of range");
    dst[k] = src.data()[e.flat];
  }
  Record r;
  r.op = Op::Gather;
  r.gather_inputs.reserve(inputs.size());
  for (const Node& n : inputs) r.gather_inputs.push_back(n.id);
  r.gather_map = std::move(shared);
  return push(std::move(r), std::move(out));
}

Node Tape::sum_of_squares(Node x) {
  Record r;
  r.op = Op::SumOfSquares;
  r.in[0] = x.id;
  return push(std::move(r), Matrix::Constant(1, 1, value(x).squaredNorm()));
}

GradientStore Tape::backward(Node loss) const {
  if (value(loss).size() != 1) throw std::invalid_argument("backward needs a scalar loss");
  std::vector<Matrix> adj(records_.size());
  std::vector<bool> live(records_.size(), false);
  auto accumulate = [&](std::uint32_t id, const auto& g) {
    if (!live[id]) {
      adj[id] = g;
      live[id] = true;
    } else {
      adj[id] += g;
    }
  };
  adj[loss.id] = Matrix::Ones(1, 1);
  live[loss.id] = true;

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    if (!live[idx]) continue;
    const Record& r = records_[idx];
    const Matrix& g = adj[idx];
    switch (r.op) {
      case Op::Constant:
      case Op::Parameter:
        break;
      case Op::Affine: {
        const Matrix& w = values_[r.in[0]];
        const Matrix& x = values_[r.in[2]];
        accumulate(r.in[0], g * x.transpose());
        accumulate(r.in[1], g.rowwise().sum());
        accumulate(r.in[2], w.transpose() * g);
        break;
      }
      case Op::Tanh: {
        const Matrix& y = values_[idx];
        accumulate(r.in[0], (g.array() * (1.0 - y.array().square())).matrix());
        break;
      }
      case Op::Add:
        accumulate(r.in[0], g);
        accumulate(r.in[1], g);
        break;
      case Op::Scale:
        accumulate(r.in[0], r.scalar * g);
        break;
      case Op::Gather: {
        std::vector<Matrix*> targets;
        for (std::uint32_t id : r.gather_inputs) {
          if (!live[id]) {
            adj[id] = Matrix::Zero(values_[id].rows(), values_[id].cols());
            live[id] = true;
          }
          targets.push_back(&adj[id]);
        }
        const double* src = g.data();
        const auto& map = *r.gather_map;
        for (std::size_t k = 0; k < map.size(); ++k) {
          const auto& e = map[k];
          targets[e.source]->data()[e.flat] += src[k];
        }
        break;
      }
      case Op::SumOfSquares:
        accumulate(r.in[0], (2.0 * g(0, 0)) * values_[r.in[0]]);
        break;
    }
  }

  GradientStore out;
  for (const auto& [param, id] : params_) {
    if (live[id]) {
      out[param] = adj[id];
    } else {
      out[param] = Matrix::Zero(values_[id].rows(), values_[id].cols());
    }
  }
  return out;
}

void Tape::reset() {
  records_.clear();
  values_.clear();
  params_.clear();
}

double grad_check(const std::function<double(const Vector&)>& f, const Vector& analytic, const Vector& params,
                  double h, std::span<const Index> coordinates) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check step must be positive");
  if (analytic.size() != params.size()) throw std::invalid_argument("grad_check: gradient length mismatch");
  double worst = 0.0;
  Vector probe = params;
  for (Index i : coordinates) {
    const double step = h * (1.0 + std::abs(params[i]));
    probe[i] = params[i] + step;
    const double up = f(probe);
    probe[i] = params[i] - step;
    const double down = f(probe);
    probe[i] = params[i];
    const double central = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - central) / std::max(1.0, std::abs(central)));
  }
  return worst;
}

double grad_check(const std::function<double(const Vector&)>& f, const Vector& analytic, const Vector& params,
                  double h) {
  std::vector<Index> all(static_cast<std::size_t>(params.size()));
  std::iota(all.begin(), all.end(), Index{0});
  return grad_check(f, analytic, params, h, all);
}

}  // namespace nodalflow::ad
