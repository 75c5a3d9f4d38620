// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/ad.hpp"

#include <cmath>

namespace mrpo::ad {

namespace detail {

struct Node {
  std::int64_t parents[2] = {-1, -1};
  double partials[2] = {0.0, 0.0};
  std::int32_t pullback = -1;
};

struct TapeState {
  explicit TapeState(Eigen::Index n) : gradient_size(n) {}

  std::int64_t push(const Node &node) {
    nodes.push_back(node);
    return static_cast<std::int64_t>(nodes.size()) - 1;
  }

  Eigen::Index gradient_size;
  std::vector<Node> nodes;
  std::vector<Tape::Pullback> pullbacks;
  bool consumed = false;
};

} // namespace detail

Tape::Tape(Eigen::Index gradient_size)
    : state_(std::make_unique<detail::TapeState>(gradient_size)) {
  require(gradient_size >= 0, ErrorKind::InvalidArgument, "negative gradient size");
}

Tape::~Tape() = default;
Tape::Tape(Tape &&) noexcept = default;
Tape &Tape::operator=(Tape &&) noexcept = default;

Var Tape::leaf(double value, Pullback pullback) {
  require(!state_->consumed, ErrorKind::State, "tape already consumed");
  detail::Node node;
  node.pullback = static_cast<std::int32_t>(state_->pullbacks.size());
  state_->pullbacks.push_back(std::move(pullback));
  return Var(state_.get(), state_->push(node), value);
}

Eigen::VectorXd Tape::backward(const Var &output) {
  require(!state_->consumed, ErrorKind::State, "tape already consumed");
  state_->consumed = true;
  Eigen::VectorXd gradient = Eigen::VectorXd::Zero(state_->gradient_size);
  if (output.is_constant()) {
    return gradient;
  }
  require(output.state_ == state_.get(), ErrorKind::InvalidArgument,
          "output was not recorded on this tape");

  const auto &nodes = state_->nodes;
  std::vector<double> adjoint(nodes.size(), 0.0);
  adjoint[static_cast<std::size_t>(output.index_)] = 1.0;
  for (std::int64_t i = output.index_; i >= 0; --i) {
    const double a = adjoint[static_cast<std::size_t>(i)];
    if (a == 0.0) {
      continue;
    }
    const auto &node = nodes[static_cast<std::size_t>(i)];
    if (node.pullback >= 0) {
      state_->pullbacks[static_cast<std::size_t>(node.pullback)](a, gradient);
    }
    for (int p = 0; p < 2; ++p) {
      if (node.parents[p] >= 0) {
        adjoint[static_cast<std::size_t>(node.parents[p])] += a * node.partials[p];
      }
    }
  }
  return gradient;
}

Eigen::VectorXd Tape::backward() {
  if (state_->nodes.empty()) {
    return backward(Var(0.0));
  }
  const auto last = static_cast<std::int64_t>(state_->nodes.size()) - 1;
  return backward(Var(state_.get(), last, 0.0));
}

bool Tape::consumed() const { return state_->consumed; }
Eigen::Index Tape::gradient_size() const { return state_->gradient_size; }
std::size_t Tape::node_count() const { return state_->nodes.size(); }

Var record_unary(const Var &a, double value, double da) {
  if (a.is_constant()) {
    return Var(value);
  }
  require(!a.state_->consumed, ErrorKind::State, "tape already consumed");
  detail::Node node;
  node.parents[0] = a.index_;
  node.partials[0] = da;
  return Var(a.state_, a.state_->push(node), value);
}

Var record_binary(const Var &a, const Var &b, double value, double da, double db) {
  if (a.is_constant()) {
    return record_unary(b, value, db);
  }
  if (b.is_constant()) {
    return record_unary(a, value, da);
  }
  require(a.state_ == b.state_, ErrorKind::InvalidArgument,
          "operands recorded on different tapes");
  require(!a.state_->consumed, ErrorKind::State, "tape already consumed");
  detail::Node node;
  node.parents[0] = a.index_;
  node.parents[1] = b.index_;
  node.partials[0] = da;
  node.partials[1] = db;
  return Var(a.state_, a.state_->push(node), value);
}

Var exp(const Var &a) {
  const double e = std::exp(a.value());
  return record_unary(a, e, e);
}

Var log(const Var &a) { return record_unary(a, std::log(a.value()), 1.0 / a.value()); }

Var softplus(const Var &a) {
  const double z = a.value();
  const double value = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  // d/dz softplus(z) = sigmoid(z)
  const double slope = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                 : std::exp(z) / (1.0 + std::exp(z));
  return record_unary(a, value, slope);
}

} // namespace mrpo::ad
