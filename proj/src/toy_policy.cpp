// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/toy_policy.hpp"

#include <cmath>
#include <memory>
#include <random>

#include <json.hpp>

#include "mrpo/errors.hpp"
#include "mrpo/io_util.hpp"

namespace mrpo {

// --------------------------------------------------------------------------
// Vocab
// --------------------------------------------------------------------------

Vocab::Vocab(std::string symbols) : symbols_(std::move(symbols)) {
  index_.fill(-1);
  require(!symbols_.empty(), ErrorKind::InvalidArgument, "vocab needs at least one symbol");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    require(index_[c] < 0, ErrorKind::InvalidArgument,
            std::string("duplicate vocab symbol '") + symbols_[i] + "'");
    index_[c] = static_cast<int>(i) + 2;
  }
}

Vocab Vocab::printable() {
  std::string s;
  for (char c = ' '; c <= '~'; ++c) {
    s.push_back(c);
  }
  return Vocab(std::move(s));
}

std::vector<Token> Vocab::encode(std::string_view text) const {
  std::vector<Token> out;
  out.reserve(text.size());
  for (char c : text) {
    const int id = index_[static_cast<unsigned char>(c)];
    if (id < 0) {
      fail(ErrorKind::Encoding, std::string("character '") + c + "' is not in the vocabulary");
    }
    out.push_back(id);
  }
  return out;
}

std::string Vocab::decode(std::span<const Token> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (t == bos || t == eos) {
      continue;
    }
    require(is_symbol(t), ErrorKind::Encoding, "token id out of range");
    out.push_back(symbols_[static_cast<std::size_t>(t - 2)]);
  }
  return out;
}

std::string Vocab::hash() const { return sha256_hex(symbols_); }

// --------------------------------------------------------------------------
// Parameter layout
// --------------------------------------------------------------------------

Eigen::Index parameter_count(int vocab_size, const PolicyDims &dims) {
  const Eigen::Index v = vocab_size;
  const Eigen::Index d = dims.embedding;
  const Eigen::Index h = dims.hidden;
  const Eigen::Index w = dims.context_width;
  return d * v + h * (w * d) + h + v * h + v;
}

struct ToyPolicy::Layout {
  using Mat = Eigen::Map<Eigen::MatrixXd>;
  using Vec = Eigen::Map<Eigen::VectorXd>;
  using CMat = Eigen::Map<const Eigen::MatrixXd>;
  using CVec = Eigen::Map<const Eigen::VectorXd>;

  Eigen::Index v, d, h, w;
  Eigen::Index off_embed, off_w1, off_b1, off_w2, off_b2;

  Layout(int vocab_size, const PolicyDims &dims)
      : v(vocab_size), d(dims.embedding), h(dims.hidden), w(dims.context_width) {
    off_embed = 0;
    off_w1 = off_embed + d * v;
    off_b1 = off_w1 + h * w * d;
    off_w2 = off_b1 + h;
    off_b2 = off_w2 + v * h;
  }

  // Embedding columns are per token (d x v).
  CMat embed(const double *p) const { return CMat(p + off_embed, d, v); }
  CMat w1(const double *p) const { return CMat(p + off_w1, h, w * d); }
  CVec b1(const double *p) const { return CVec(p + off_b1, h); }
  CMat w2(const double *p) const { return CMat(p + off_w2, v, h); }
  CVec b2(const double *p) const { return CVec(p + off_b2, v); }

  Mat embed(double *p) const { return Mat(p + off_embed, d, v); }
  Mat w1(double *p) const { return Mat(p + off_w1, h, w * d); }
  Vec b1(double *p) const { return Vec(p + off_b1, h); }
  Mat w2(double *p) const { return Mat(p + off_w2, v, h); }
  Vec b2(double *p) const { return Vec(p + off_b2, v); }
};

namespace {

struct PositionCache {
  std::vector<Token> window;
  Eigen::VectorXd hidden;
  Eigen::VectorXd probs;
  Token target = 0;
};

} // namespace

ToyPolicy::ToyPolicy(Vocab vocab, PolicyDims dims, std::uint64_t seed, Eigen::VectorXd params)
    : vocab_(std::move(vocab)), dims_(dims), seed_(seed), params_(std::move(params)) {
  require(dims_.embedding >= 1 && dims_.hidden >= 1 && dims_.context_width >= 1,
          ErrorKind::InvalidArgument, "policy dims must be positive");
  require(params_.size() == mrpo::parameter_count(vocab_.size(), dims_),
          ErrorKind::InvalidArgument, "parameter vector has the wrong length");
}

ToyPolicy ToyPolicy::zeros(Vocab vocab, PolicyDims dims, std::uint64_t seed) {
  const Eigen::Index n = mrpo::parameter_count(vocab.size(), dims);
  return ToyPolicy(std::move(vocab), dims, seed, Eigen::VectorXd::Zero(n));
}

ToyPolicy ToyPolicy::random(Vocab vocab, PolicyDims dims, std::uint64_t seed, double init_scale) {
  ToyPolicy policy = zeros(std::move(vocab), dims, seed);
  const Layout layout(policy.vocab_.size(), dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init_scale);
  double *p = policy.params_.data();
  auto fill = [&](auto block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      block.data()[i] = normal(rng);
    }
  };
  fill(layout.embed(p));
  fill(layout.w1(p));
  fill(layout.w2(p));
  return policy;
}

void ToyPolicy::validate_sequence(std::span<const Token> prompt,
                                  std::span<const Token> output) const {
  for (Token t : prompt) {
    require(vocab_.is_symbol(t), ErrorKind::Encoding, "prompt token outside the vocabulary");
  }
  require(!output.empty(), ErrorKind::InvalidArgument, "output is empty");
  require(output.back() == Vocab::eos, ErrorKind::InvalidArgument,
          "output must be eos-terminated");
  for (std::size_t i = 0; i + 1 < output.size(); ++i) {
    require(vocab_.is_symbol(output[i]), ErrorKind::Encoding,
            "output token outside the vocabulary");
  }
}

std::vector<Token> ToyPolicy::stream(std::span<const Token> prompt,
                                     std::span<const Token> output) const {
  std::vector<Token> s(static_cast<std::size_t>(dims_.context_width), Vocab::bos);
  s.insert(s.end(), prompt.begin(), prompt.end());
  s.push_back(Vocab::bos);
  s.insert(s.end(), output.begin(), output.end());
  return s;
}

Eigen::VectorXd ToyPolicy::next_token_log_probs(std::span<const Token> window) const {
  require(static_cast<int>(window.size()) == dims_.context_width, ErrorKind::InvalidArgument,
          "window length must equal context_width");
  const Layout L(vocab_.size(), dims_);
  const double *p = params_.data();
  const auto E = L.embed(p);
  Eigen::VectorXd x(L.w * L.d);
  for (Eigen::Index j = 0; j < L.w; ++j) {
    const Token t = window[static_cast<std::size_t>(j)];
    require(t >= 0 && t < vocab_.size(), ErrorKind::Encoding, "token id out of range");
    x.segment(j * L.d, L.d) = E.col(t);
  }
  const Eigen::VectorXd h = (L.w1(p) * x + L.b1(p)).array().tanh().matrix();
  Eigen::VectorXd logits = L.w2(p) * h + L.b2(p);
  const double shift = logits.maxCoeff();
  const double lse = shift + std::log((logits.array() - shift).exp().sum());
  logits.array() -= lse;
  return logits;
}

Eigen::VectorXd ToyPolicy::position_logprobs(std::span<const Token> prompt,
                                             std::span<const Token> output) const {
  validate_sequence(prompt, output);
  const std::vector<Token> s = stream(prompt, output);
  const std::size_t first = s.size() - output.size();
  const auto w = static_cast<std::size_t>(dims_.context_width);
  Eigen::VectorXd out(static_cast<Eigen::Index>(output.size()));
  for (std::size_t i = 0; i < output.size(); ++i) {
    const std::size_t pos = first + i;
    const std::span<const Token> window(s.data() + pos - w, w);
    out[static_cast<Eigen::Index>(i)] = next_token_log_probs(window)[s[pos]];
  }
  return out;
}

double ToyPolicy::sequence_logprob(std::span<const Token> prompt,
                                   std::span<const Token> output) const {
  return position_logprobs(prompt, output).sum();
}

ad::Var ToyPolicy::sequence_logprob(ad::Tape &tape, std::span<const Token> prompt,
                                    std::span<const Token> output) const {
  validate_sequence(prompt, output);
  require(tape.gradient_size() == params_.size(), ErrorKind::InvalidArgument,
          "tape gradient size does not match the policy");
  const Layout L(vocab_.size(), dims_);
  const double *p = params_.data();
  const auto E = L.embed(p);
  const auto W1 = L.w1(p);
  const auto W2 = L.w2(p);

  const std::vector<Token> s = stream(prompt, output);
  const std::size_t first = s.size() - output.size();
  const auto w = static_cast<std::size_t>(L.w);

  auto caches = std::make_shared<std::vector<PositionCache>>(output.size());
  double total = 0.0;
  Eigen::VectorXd x(L.w * L.d);
  for (std::size_t i = 0; i < output.size(); ++i) {
    PositionCache &c = (*caches)[i];
    const std::size_t pos = first + i;
    c.window.assign(s.begin() + static_cast<std::ptrdiff_t>(pos - w),
                    s.begin() + static_cast<std::ptrdiff_t>(pos));
    c.target = s[pos];
    for (Eigen::Index j = 0; j < L.w; ++j) {
      x.segment(j * L.d, L.d) = E.col(c.window[static_cast<std::size_t>(j)]);
    }
    c.hidden = (W1 * x + L.b1(p)).array().tanh().matrix();
    Eigen::VectorXd logits = W2 * c.hidden + L.b2(p);
    const double shift = logits.maxCoeff();
    c.probs = (logits.array() - shift).exp().matrix();
    const double z = c.probs.sum();
    c.probs /= z;
    total += logits[c.target] - shift - std::log(z);
  }

  const ToyPolicy *self = this;
  return tape.leaf(total, [self, caches](double adjoint, Eigen::Ref<Eigen::VectorXd> grad) {
    const Layout L(self->vocab_.size(), self->dims_);
    const double *p = self->params_.data();
    const auto E = L.embed(p);
    const auto W1 = L.w1(p);
    const auto W2 = L.w2(p);
    double *g = grad.data();
    auto gE = L.embed(g);
    auto gW1 = L.w1(g);
    auto gb1 = L.b1(g);
    auto gW2 = L.w2(g);
    auto gb2 = L.b2(g);
    Eigen::VectorXd x(L.w * L.d);
    for (const PositionCache &c : *caches) {
      // d log softmax(logits)[target] / d logits = onehot(target) - probs
      Eigen::VectorXd dlogits = -adjoint * c.probs;
      dlogits[c.target] += adjoint;
      gW2.noalias() += dlogits * c.hidden.transpose();
      gb2 += dlogits;
      const Eigen::VectorXd dpre =
          ((W2.transpose() * dlogits).array() * (1.0 - c.hidden.array().square())).matrix();
      for (Eigen::Index j = 0; j < L.w; ++j) {
        x.segment(j * L.d, L.d) = E.col(c.window[static_cast<std::size_t>(j)]);
      }
      gW1.noalias() += dpre * x.transpose();
      gb1 += dpre;
      const Eigen::VectorXd dx = W1.transpose() * dpre;
      for (Eigen::Index j = 0; j < L.w; ++j) {
        gE.col(c.window[static_cast<std::size_t>(j)]) += dx.segment(j * L.d, L.d);
      }
    }
  });
}

std::vector<Token> encode_output(const Vocab &vocab, std::string_view output) {
  std::vector<Token> tokens = vocab.encode(output);
  tokens.push_back(Vocab::eos);
  return tokens;
}

double ToyPolicy::score_text(std::string_view prompt, std::string_view output) const {
  return sequence_logprob(vocab_.encode(prompt), encode_output(vocab_, output));
}

ad::Var ToyPolicy::score_text(ad::Tape &tape, std::string_view prompt,
                              std::string_view output) const {
  return sequence_logprob(tape, vocab_.encode(prompt), encode_output(vocab_, output));
}

std::pair<double, ad::Tape> sequence_logprob_with_tape(const ToyPolicy &policy,
                                                       std::span<const Token> prompt,
                                                       std::span<const Token> output) {
  ad::Tape tape(policy.parameter_count());
  const ad::Var lp = policy.sequence_logprob(tape, prompt, output);
  return {lp.value(), std::move(tape)};
}

// --------------------------------------------------------------------------
// Checkpoints
// --------------------------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointMagic = "MRPO-CHECKPOINT\n";
constexpr int kCheckpointVersion = 1;

} // namespace

std::string serialize_checkpoint(const ToyPolicy &policy) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["vocab_symbols"] = policy.vocab().symbols();
  header["vocab_hash"] = policy.vocab().hash();
  header["embedding"] = policy.dims().embedding;
  header["hidden"] = policy.dims().hidden;
  header["context_width"] = policy.dims().context_width;
  header["seed"] = policy.seed();
  header["parameter_count"] = policy.parameter_count();
  header["byte_order"] = "little";
  header["dtype"] = "float64";
  std::string out(kCheckpointMagic);
  out += header.dump();
  out += '\n';
  append_le_doubles(out, std::span<const double>(policy.parameters().data(),
                                                 static_cast<std::size_t>(policy.parameter_count())));
  return out;
}

ToyPolicy deserialize_checkpoint(std::string_view bytes) {
  require(bytes.starts_with(kCheckpointMagic), ErrorKind::Parse, "not a policy checkpoint");
  const std::size_t start = kCheckpointMagic.size();
  const std::size_t eol = bytes.find('\n', start);
  require(eol != std::string_view::npos, ErrorKind::Parse, "checkpoint header is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(start, eol - start));
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::Parse, std::string("checkpoint header: ") + e.what());
  }
  try {
    const int version = header.at("format_version").get<int>();
    require(version == kCheckpointVersion, ErrorKind::Parse,
            "unsupported checkpoint format version " + std::to_string(version));
    require(header.at("byte_order").get<std::string>() == "little", ErrorKind::Parse,
            "unsupported checkpoint byte order");
    Vocab vocab(header.at("vocab_symbols").get<std::string>());
    require(vocab.hash() == header.at("vocab_hash").get<std::string>(), ErrorKind::Integrity,
            "checkpoint vocab hash mismatch");
    PolicyDims dims{header.at("embedding").get<int>(), header.at("hidden").get<int>(),
                    header.at("context_width").get<int>()};
    const auto count = header.at("parameter_count").get<std::size_t>();
    require(bytes.size() - (eol + 1) == 8 * count, ErrorKind::Parse,
            "checkpoint payload length does not match parameter_count");
    const std::vector<double> values = read_le_doubles(bytes, eol + 1, count);
    Eigen::VectorXd params = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                               static_cast<Eigen::Index>(count));
    return ToyPolicy(std::move(vocab), dims, header.at("seed").get<std::uint64_t>(),
                     std::move(params));
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::Parse, std::string("checkpoint header: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path &path, const ToyPolicy &policy) {
  write_file_atomic(path, serialize_checkpoint(policy));
}

ToyPolicy read_checkpoint(const std::filesystem::path &path) {
  return deserialize_checkpoint(read_file(path));
}

} // namespace mrpo
