// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/losses.hpp"

#include <charconv>
#include <sstream>

namespace mrpo {

std::string_view to_string(LossKind kind) {
  switch (kind) {
  case LossKind::dpo:
    return "dpo";
  case LossKind::multi_dpo:
    return "multi-dpo";
  case LossKind::mrpo:
    return "mrpo";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "dpo") {
    return LossKind::dpo;
  }
  if (text == "multi-dpo" || text == "multi_dpo") {
    return LossKind::multi_dpo;
  }
  if (text == "mrpo") {
    return LossKind::mrpo;
  }
  fail(ErrorKind::InvalidConfig, "unknown loss kind '" + std::string(text) + "'");
}

std::string_view to_string(ClipMode mode) {
  switch (mode) {
  case ClipMode::none:
    return "none";
  case ClipMode::fixed:
    return "fixed";
  case ClipMode::adaptive:
    return "adaptive";
  }
  return "unknown";
}

ClipMode parse_clip_mode(std::string_view text) {
  if (text == "none") {
    return ClipMode::none;
  }
  if (text == "fixed") {
    return ClipMode::fixed;
  }
  if (text == "adaptive") {
    return ClipMode::adaptive;
  }
  fail(ErrorKind::InvalidConfig, "unknown clip mode '" + std::string(text) + "'");
}

WeightMode WeightMode::parse(std::string_view text) {
  if (text == "uniform") {
    return uniform();
  }
  if (text == "arwc") {
    return arwc();
  }
  constexpr std::string_view prefix = "fixed=";
  require(text.starts_with(prefix), ErrorKind::InvalidConfig,
          "unknown alpha mode '" + std::string(text) + "'");
  std::vector<double> values;
  std::string_view rest = text.substr(prefix.size());
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string token(rest.substr(0, comma));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    require(ec == std::errc() && ptr == token.data() + token.size(), ErrorKind::InvalidConfig,
            "bad fixed weight '" + token + "'");
    values.push_back(v);
    if (comma == std::string_view::npos) {
      break;
    }
    rest = rest.substr(comma + 1);
  }
  require(!values.empty(), ErrorKind::InvalidConfig, "fixed= needs at least one weight");
  return fixed_weights(std::move(values));
}

std::string WeightMode::to_string() const {
  switch (kind) {
  case Kind::uniform:
    return "uniform";
  case Kind::arwc:
    return "arwc";
  case Kind::fixed: {
    std::ostringstream os;
    os.precision(17);
    os << "fixed=";
    for (std::size_t i = 0; i < fixed.size(); ++i) {
      os << (i ? "," : "") << fixed[i];
    }
    return os.str();
  }
  }
  return "unknown";
}

void LossConfig::validate() const {
  require(std::isfinite(beta) && beta > 0.0, ErrorKind::InvalidConfig, "beta must be > 0");
  clip.validate();
  if (weights.kind == WeightMode::Kind::fixed) {
    require(!weights.fixed.empty(), ErrorKind::InvalidConfig, "fixed weights are empty");
    for (double w : weights.fixed) {
      require(std::isfinite(w) && w >= 0.0 && w <= 1.0, ErrorKind::InvalidConfig,
              "fixed weights must lie in [0, 1]");
    }
  }
}

ReferenceWeights<double> resolve_weights(const PairRefLogProbs<double> &refs,
                                         const WeightMode &mode) {
  const Eigen::Index k = refs.size();
  switch (mode.kind) {
  case WeightMode::Kind::uniform:
    return uniform_weights(k);
  case WeightMode::Kind::arwc:
    return reference_weights_arwc(refs);
  case WeightMode::Kind::fixed: {
    if (k == 1) {
      return uniform_weights(1);
    }
    if (mode.fixed.size() == 1) {
      Vector<double> alphas(k);
      alphas[0] = mode.fixed[0];
      alphas.tail(k - 1).setConstant((1.0 - mode.fixed[0]) / static_cast<double>(k - 1));
      return ReferenceWeights<double>(std::move(alphas));
    }
    require(static_cast<Eigen::Index>(mode.fixed.size()) == k, ErrorKind::InvalidWeights,
            "fixed weights do not match the number of references");
    return ReferenceWeights<double>(
        Eigen::Map<const Vector<double>>(mode.fixed.data(), k));
  }
  }
  fail(ErrorKind::InvalidConfig, "unknown weight mode");
}

PreparedReferences prepare_references(const PairRefLogProbs<double> &refs,
                                      const LossConfig &config) {
  PreparedReferences prep;
  prep.weights = resolve_weights(refs, config.weights);
  prep.eps = clip_radii(refs, config.clip);
  if (config.clip.mode == ClipMode::none) {
    prep.clipped_chosen = refs.chosen();
    prep.clipped_rejected = refs.rejected();
  } else {
    prep.clipped_chosen = clip_references(refs.chosen(), prep.eps.chosen);
    prep.clipped_rejected = clip_references(refs.rejected(), prep.eps.rejected);
  }
  prep.virtual_chosen = log_virtual_reference(prep.clipped_chosen, prep.weights);
  prep.virtual_rejected = log_virtual_reference(prep.clipped_rejected, prep.weights);
  return prep;
}

EvalRewards evaluation_rewards(const PolicyPair<double> &log_policy,
                               const PairRefLogProbs<double> &refs, const LossConfig &config) {
  if (config.kind == LossKind::mrpo) {
    const PreparedReferences prep = prepare_references(refs, config);
    return {implicit_reward(log_policy.chosen, prep.virtual_chosen, config.beta),
            implicit_reward(log_policy.rejected, prep.virtual_rejected, config.beta)};
  }
  return {implicit_reward(log_policy.chosen, refs.chosen()[0], config.beta),
          implicit_reward(log_policy.rejected, refs.rejected()[0], config.beta)};
}

} // namespace mrpo
