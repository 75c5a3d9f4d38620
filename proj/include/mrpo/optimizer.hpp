// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <cmath>

#include <Eigen/Core>

#include "mrpo/errors.hpp"

namespace mrpo {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerConfig {
  enum class Kind { sgd, adam };
  Kind kind = Kind::adam;
  AdamSettings adam{};
};

/// First-order update on a flat parameter vector (gradient descent on a loss).
class Optimizer {
public:
  Optimizer(OptimizerConfig config, double learning_rate, Eigen::Index size)
      : config_(config), lr_(learning_rate), m_(Eigen::VectorXd::Zero(size)),
        v_(Eigen::VectorXd::Zero(size)) {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::InvalidConfig,
            "learning rate must be > 0");
  }

  template <typename Derived>
  void step(Eigen::VectorXd &params, const Eigen::MatrixBase<Derived> &grad) {
    require(grad.size() == params.size() && params.size() == m_.size(),
            ErrorKind::InvalidArgument, "optimizer size mismatch");
    if (config_.kind == OptimizerConfig::Kind::sgd) {
      params.noalias() -= lr_ * grad;
      return;
    }
    const AdamSettings &a = config_.adam;
    ++t_;
    m_ = a.beta1 * m_ + (1.0 - a.beta1) * grad;
    v_ = a.beta2 * v_ + (1.0 - a.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + a.epsilon);
  }

  long steps() const { return t_; }

private:
  OptimizerConfig config_;
  double lr_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

} // namespace mrpo
