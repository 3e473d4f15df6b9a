#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "spo/core/math.hpp"
#include "spo/core/policy.hpp"
#include "spo/models/tabular_policy.hpp"

namespace spo {

struct NeuralPolicyConfig {
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t layers = 1;
  std::size_t context_length = 16;  // prompt + response tokens
  double init_scale = 1.0;
  std::uint64_t init_seed = 0;

  void check() const {
    require(embed_dim > 0 && hidden_dim > 0, "neural config: widths must be positive");
    require(context_length >= 2, "neural config: context length too small");
    require(init_scale > 0.0, "neural config: init_scale must be positive");
  }

  nlohmann::json to_json() const {
    return {{"embed_dim", embed_dim}, {"hidden_dim", hidden_dim}, {"layers", layers},
            {"context_length", context_length}, {"init_scale", init_scale}, {"init_seed", init_seed}};
  }
  static NeuralPolicyConfig from_json(const nlohmann::json& j) {
    NeuralPolicyConfig c;
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.context_length = j.at("context_length").get<std::size_t>();
    c.init_scale = j.value("init_scale", 1.0);
    c.init_seed = j.value("init_seed", std::uint64_t{0});
    return c;
  }
};

// Small causal sequence model. The input at response position t is
//   emb[y_{t-1}] + pos[t] + mean(prompt_emb[x]) + sum_{s<t}(bag_emb[y_s])
// followed by residual tanh feed-forward blocks and a linear vocabulary head.
// Position t = 0 reads a dedicated begin-of-response embedding.
class NeuralPolicy final : public Policy {
 public:
  NeuralPolicy(Vocab vocab, NeuralPolicyConfig config) : vocab_(std::move(vocab)), cfg_(config) {
    vocab_.check();
    cfg_.check();
    build_layout();
    params_.assign(layout_.total, 0.0);
    initialize();
  }

  NeuralPolicy(Vocab vocab, NeuralPolicyConfig config, std::vector<double> params)
      : vocab_(std::move(vocab)), cfg_(config) {
    vocab_.check();
    cfg_.check();
    build_layout();
    require(params.size() == layout_.total, "neural policy: parameter count does not match config");
    params_ = std::move(params);
  }

  PolicyKind kind() const override { return PolicyKind::Neural; }
  const Vocab& vocab() const override { return vocab_; }
  const NeuralPolicyConfig& config() const { return cfg_; }
  std::span<const double> parameters() const override { return params_; }
  std::span<double> mutable_parameters() override { return params_; }

  double log_prob(const TokenSeq& prompt, const TokenSeq& response) const override {
    return run(prompt, response, 0.0, nullptr);
  }

  double log_prob_and_grad(const TokenSeq& prompt, const TokenSeq& response, double scale,
                           std::span<double> grad) const override {
    require(grad.size() == params_.size(), "neural policy: gradient buffer has wrong size");
    return run(prompt, response, scale, grad.data());
  }

  // p(. | prompt, prefix) over the whole vocabulary.
  std::vector<double> next_token_probs(const TokenSeq& prompt, const TokenSeq& prefix) const {
    check_lengths(prompt, prefix.size() + 1);
    Context ctx(*this, prompt);
    for (TokenId t : prefix) ctx.push(t);
    std::vector<double> logits(vocab_.size);
    ctx.logits(logits);
    return math::softmax(logits);
  }

  TokenSeq sample(const TokenSeq& prompt, std::size_t max_len, SampleMode mode, Rng& rng) const override {
    note_forward();
    require(prompt.size() < cfg_.context_length, "neural policy: prompt fills the context");
    const std::size_t limit = std::min(max_len, cfg_.context_length - prompt.size());
    check_tokens(prompt);
    Context ctx(*this, prompt);
    std::vector<double> logits(vocab_.size);
    TokenSeq out;
    while (out.size() < limit) {
      ctx.logits(logits);
      TokenId next = 0;
      if (mode == SampleMode::Greedy) {
        for (std::size_t j = 1; j < logits.size(); ++j) {
          if (logits[j] > logits[next]) next = static_cast<TokenId>(j);
        }
      } else {
        next = static_cast<TokenId>(rng.categorical(math::softmax(logits)));
      }
      out.push_back(next);
      if (next == vocab_.eos) break;
      ctx.push(next);
    }
    return out;
  }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<NeuralPolicy>(*this); }

  nlohmann::json architecture() const override {
    return {{"kind", "neural"}, {"vocab", detail::vocab_to_json(vocab_)}, {"config", cfg_.to_json()}};
  }

 private:
  struct Layout {
    std::size_t tok_emb = 0, pos_emb = 0, prompt_emb = 0, bag_emb = 0;
    std::vector<std::size_t> w1, b1, w2, b2;
    std::size_t out_w = 0, out_b = 0, total = 0;
  };

  // Running state of one generation / scoring pass.
  class Context {
   public:
    Context(const NeuralPolicy& net, const TokenSeq& prompt)
        : net_(net), prompt_mean_(net.cfg_.embed_dim, 0.0), bag_sum_(net.cfg_.embed_dim, 0.0) {
      const std::size_t d = net.cfg_.embed_dim;
      for (TokenId tok : prompt) {
        const double* row = net.at(net.layout_.prompt_emb + tok * d);
        for (std::size_t k = 0; k < d; ++k) prompt_mean_[k] += row[k];
      }
      const double inv = 1.0 / static_cast<double>(prompt.size());
      for (double& v : prompt_mean_) v *= inv;
      hidden_.assign((net.cfg_.layers + 1) * d, 0.0);
      act_.assign(net.cfg_.layers * net.cfg_.hidden_dim, 0.0);
    }

    void push(TokenId tok) {
      const std::size_t d = net_.cfg_.embed_dim;
      const double* row = net_.at(net_.layout_.bag_emb + tok * d);
      for (std::size_t k = 0; k < d; ++k) bag_sum_[k] += row[k];
      prev_ = tok;
      ++t_;
    }

    std::size_t position() const { return t_; }
    TokenId prev_index() const { return t_ == 0 ? static_cast<TokenId>(net_.vocab_.size) : prev_; }

    // Forward pass at the current position; keeps activations for backward.
    void logits(std::span<double> out) {
      const auto& L = net_.layout_;
      const std::size_t d = net_.cfg_.embed_dim, h = net_.cfg_.hidden_dim;
      double* x = hidden_.data();
      const double* emb = net_.at(L.tok_emb + prev_index() * d);
      const double* pos = net_.at(L.pos_emb + t_ * d);
      for (std::size_t k = 0; k < d; ++k) x[k] = emb[k] + pos[k] + prompt_mean_[k] + bag_sum_[k];
      for (std::size_t l = 0; l < net_.cfg_.layers; ++l) {
        const double* in = hidden_.data() + l * d;
        double* next = hidden_.data() + (l + 1) * d;
        double* u = act_.data() + l * h;
        const double* w1 = net_.at(L.w1[l]);
        const double* b1 = net_.at(L.b1[l]);
        for (std::size_t i = 0; i < h; ++i) {
          double a = b1[i];
          const double* wr = w1 + i * d;
          for (std::size_t k = 0; k < d; ++k) a += wr[k] * in[k];
          u[i] = std::tanh(a);
        }
        const double* w2 = net_.at(L.w2[l]);
        const double* b2 = net_.at(L.b2[l]);
        for (std::size_t k = 0; k < d; ++k) {
          double a = in[k] + b2[k];
          const double* wr = w2 + k * h;
          for (std::size_t i = 0; i < h; ++i) a += wr[i] * u[i];
          next[k] = a;
        }
      }
      const double* top = hidden_.data() + net_.cfg_.layers * d;
      const double* ow = net_.at(L.out_w);
      const double* ob = net_.at(L.out_b);
      for (std::size_t j = 0; j < out.size(); ++j) {
        double a = ob[j];
        const double* wr = ow + j * d;
        for (std::size_t k = 0; k < d; ++k) a += wr[k] * top[k];
        out[j] = a;
      }
    }

    // Backpropagates dlogits through the last forward pass. Returns d loss / d input vector.
    void backward(std::span<const double> dlogits, double* grad, std::vector<double>& dx) const {
      const auto& L = net_.layout_;
      const std::size_t d = net_.cfg_.embed_dim, h = net_.cfg_.hidden_dim;
      std::vector<double> dh(d, 0.0), du(h);
      const double* top = hidden_.data() + net_.cfg_.layers * d;
      const double* ow = net_.at(L.out_w);
      for (std::size_t j = 0; j < dlogits.size(); ++j) {
        const double g = dlogits[j];
        if (g == 0.0) continue;
        grad[L.out_b + j] += g;
        double* gw = grad + L.out_w + j * d;
        const double* wr = ow + j * d;
        for (std::size_t k = 0; k < d; ++k) {
          gw[k] += g * top[k];
          dh[k] += g * wr[k];
        }
      }
      for (std::size_t l = net_.cfg_.layers; l-- > 0;) {
        const double* in = hidden_.data() + l * d;
        const double* u = act_.data() + l * h;
        const double* w2 = net_.at(L.w2[l]);
        double* gw2 = grad + L.w2[l];
        for (std::size_t i = 0; i < h; ++i) du[i] = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double g = dh[k];
          grad[L.b2[l] + k] += g;
          const double* wr = w2 + k * h;
          double* gr = gw2 + k * h;
          for (std::size_t i = 0; i < h; ++i) {
            gr[i] += g * u[i];
            du[i] += g * wr[i];
          }
        }
        const double* w1 = net_.at(L.w1[l]);
        double* gw1 = grad + L.w1[l];
        for (std::size_t i = 0; i < h; ++i) {
          const double da = du[i] * (1.0 - u[i] * u[i]);
          if (da == 0.0) continue;
          grad[L.b1[l] + i] += da;
          const double* wr = w1 + i * d;
          double* gr = gw1 + i * d;
          for (std::size_t k = 0; k < d; ++k) {
            gr[k] += da * in[k];
            dh[k] += da * wr[k];
          }
        }
      }
      dx = std::move(dh);
    }

   private:
    const NeuralPolicy& net_;
    std::vector<double> prompt_mean_;
    std::vector<double> bag_sum_;
    std::vector<double> hidden_;
    std::vector<double> act_;
    std::size_t t_ = 0;
    TokenId prev_ = 0;
  };

  const double* at(std::size_t offset) const { return params_.data() + offset; }

  void build_layout() {
    const std::size_t v = vocab_.size, d = cfg_.embed_dim, h = cfg_.hidden_dim;
    std::size_t off = 0;
    auto take = [&](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    layout_.tok_emb = take((v + 1) * d);
    layout_.pos_emb = take(cfg_.context_length * d);
    layout_.prompt_emb = take(v * d);
    layout_.bag_emb = take(v * d);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      layout_.w1.push_back(take(h * d));
      layout_.b1.push_back(take(h));
      layout_.w2.push_back(take(d * h));
      layout_.b2.push_back(take(d));
    }
    layout_.out_w = take(v * d);
    layout_.out_b = take(v);
    layout_.total = off;
  }

  void initialize() {
    Rng rng(cfg_.init_seed, "neural-init");
    const std::size_t v = vocab_.size, d = cfg_.embed_dim, h = cfg_.hidden_dim;
    const double s = cfg_.init_scale;
    auto fill = [&](std::size_t off, std::size_t n, double stddev) {
      for (std::size_t i = 0; i < n; ++i) params_[off + i] = stddev * rng.normal();
    };
    fill(layout_.tok_emb, (v + 1) * d, 0.3 * s);
    fill(layout_.pos_emb, cfg_.context_length * d, 0.3 * s);
    fill(layout_.prompt_emb, v * d, 0.3 * s);
    fill(layout_.bag_emb, v * d, 0.3 * s);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      fill(layout_.w1[l], h * d, s / std::sqrt(static_cast<double>(d)));
      fill(layout_.w2[l], d * h, 0.5 * s / std::sqrt(static_cast<double>(h)));
    }
    fill(layout_.out_w, v * d, 0.5 * s / std::sqrt(static_cast<double>(d)));
  }

  void check_tokens(const TokenSeq& seq) const {
    for (TokenId t : seq) require(vocab_.contains(t), "neural policy: token outside vocab");
  }

  void check_lengths(const TokenSeq& prompt, std::size_t response_len) const {
    require(!prompt.empty(), "neural policy: empty prompt");
    require(prompt.size() + response_len <= cfg_.context_length, "neural policy: response exceeds context length");
  }

  double run(const TokenSeq& prompt, const TokenSeq& response, double scale, double* grad) const {
    note_forward();
    check_lengths(prompt, response.size());
    check_tokens(prompt);
    check_tokens(response);
    const std::size_t d = cfg_.embed_dim, v = vocab_.size, n = response.size();
    Context ctx(*this, prompt);
    std::vector<double> logits(v), dlogits(v), dx;
    std::vector<double> dprompt(grad ? d : 0, 0.0);
    std::vector<double> dbag(grad ? n * d : 0, 0.0);  // dx_t per position
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      ctx.logits(logits);
      const double lse = math::log_sum_exp(logits);
      const TokenId y = response[t];
      total += logits[y] - lse;
      if (grad) {
        for (std::size_t j = 0; j < v; ++j) dlogits[j] = -scale * std::exp(logits[j] - lse);
        dlogits[y] += scale;
        ctx.backward(dlogits, grad, dx);
        double* ge = grad + layout_.tok_emb + ctx.prev_index() * d;
        double* gp = grad + layout_.pos_emb + t * d;
        for (std::size_t k = 0; k < d; ++k) {
          ge[k] += dx[k];
          gp[k] += dx[k];
          dprompt[k] += dx[k];
        }
        if (t > 0) std::copy(dx.begin(), dx.begin() + d, dbag.begin() + t * d);
      }
      ctx.push(y);
    }
    if (grad) {
      const double inv_p = 1.0 / static_cast<double>(prompt.size());
      for (TokenId tok : prompt) {
        double* g = grad + layout_.prompt_emb + tok * d;
        for (std::size_t k = 0; k < d; ++k) g[k] += dprompt[k] * inv_p;
      }
      // Token y_s feeds the bag at every later position t > s.
      std::vector<double> suffix(d, 0.0);
      for (std::size_t s = n; s-- > 1;) {
        for (std::size_t k = 0; k < d; ++k) suffix[k] += dbag[s * d + k];
        double* g = grad + layout_.bag_emb + response[s - 1] * d;
        for (std::size_t k = 0; k < d; ++k) g[k] += suffix[k];
      }
    }
    return total;
  }

  Vocab vocab_;
  NeuralPolicyConfig cfg_;
  Layout layout_;
  std::vector<double> params_;
};

}  // namespace spo
