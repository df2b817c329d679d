#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sutat/corpus.hpp"
#include "sutat/errors.hpp"
#include "sutat/tape.hpp"

namespace sutat::seq {

using ad::Mat;

enum class Arch { recurrent, selfattentive };

inline Arch parse_arch(const std::string& s) {
  if (s == "recurrent") return Arch::recurrent;
  if (s == "selfattentive") return Arch::selfattentive;
  throw UsageError("unknown architecture: " + s);
}

inline const char* arch_name(Arch a) {
  return a == Arch::recurrent ? "recurrent" : "selfattentive";
}

struct ModelConfig {
  Arch arch = Arch::recurrent;
  int embed_dim = 300;
  int hidden_dim = 600;
  int latent_dim = 300;
  int num_heads = 10;
  int num_layers = 1;
  int prior_hidden = 600;
  int customer_vocab = 0;
  int agent_vocab = 0;
  bool positional_encoding = true;

  int encoder_dim() const {
    return arch == Arch::recurrent ? 2 * hidden_dim : embed_dim;
  }
  int decoder_out_dim() const {
    return arch == Arch::recurrent ? hidden_dim : embed_dim;
  }
  int vocab_size(Role r) const {
    return r == Role::customer ? customer_vocab : agent_vocab;
  }
  // Conditioning fed to each decoder: the agent sees its latent, the customer
  // sees its latent concatenated with the pooled agent decode.
  int cond_dim(Role r) const {
    return r == Role::customer ? latent_dim + embed_dim : latent_dim;
  }

  void validate() const {
    if (embed_dim < 1 || hidden_dim < 1 || latent_dim < 1 || prior_hidden < 1)
      throw UsageError("model dimensions must be positive");
    if (num_heads < 1) throw UsageError("head count must be positive");
    if (num_layers != 1)
      throw UsageError("only single-layer encoders/decoders are supported");
    if (customer_vocab <= kNumSpecials || agent_vocab <= kNumSpecials)
      throw UsageError("vocabularies must contain at least one regular token");
    if (embed_dim % num_heads != 0 || encoder_dim() % num_heads != 0)
      throw UsageError("embed and encoder dims must be divisible by head count");
  }
};

enum class Init { uniform, fan_in, zeros, ones };

// Named parameter registry. Creation order is fixed by the model constructor,
// which makes seeded initialization and checkpoint layout deterministic.
template <typename S>
class ParamStore {
 public:
  Mat<S>& add(const std::string& name, int rows, int cols, Init init,
              std::mt19937_64& rng) {
    if (params_.count(name))
      throw std::logic_error("duplicate parameter: " + name);
    Mat<S> m(rows, cols);
    switch (init) {
      case Init::uniform: {
        std::uniform_real_distribution<double> d(-0.1, 0.1);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) m(r, c) = static_cast<S>(d(rng));
        break;
      }
      case Init::fan_in: {
        std::normal_distribution<double> d(0.0, 1.0 / std::sqrt(double(rows)));
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) m(r, c) = static_cast<S>(d(rng));
        break;
      }
      case Init::zeros:
        m.setZero();
        break;
      case Init::ones:
        m.setOnes();
        break;
    }
    order_.push_back(name);
    return params_.emplace(name, std::move(m)).first->second;
  }

  Mat<S>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end())
      throw std::logic_error("unknown parameter: " + name);
    return it->second;
  }
  const Mat<S>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Mat<S>> params_;
};

// A tape plus a per-graph cache of bound parameter nodes, so each parameter
// appears as exactly one node and its gradient accumulates in one place.
template <typename S>
class Graph {
 public:
  explicit Graph(const ParamStore<S>& store) : store_(&store) {}

  ad::Tape<S> tape;

  int p(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    int id = tape.param(&store_->at(name));
    bound_.emplace(name, id);
    return id;
  }

  bool bound(const std::string& name) const { return bound_.count(name) != 0; }

  // Gradient of a named parameter after backward(); zeros when the parameter
  // did not participate in the graph.
  Mat<S> grad(const std::string& name) {
    auto it = bound_.find(name);
    if (it == bound_.end() || !tape.has_grad(it->second)) {
      const Mat<S>& m = store_->at(name);
      return Mat<S>::Zero(m.rows(), m.cols());
    }
    return tape.grad(it->second);
  }

  const std::unordered_map<std::string, int>& bound_params() const {
    return bound_;
  }

 private:
  const ParamStore<S>* store_;
  std::unordered_map<std::string, int> bound_;
};

template <typename S>
class Model {
 public:
  static constexpr S kLayerNormEps = S(1e-5);

  Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    register_params(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // Supervised-classification head over [s_X; s_Y]; absent by default.
  void add_classifier(int n_labels, uint64_t seed) {
    if (n_labels < 2) throw UsageError("classifier needs at least two labels");
    std::mt19937_64 rng(seed);
    params_.add("classifier/w", 2 * cfg_.latent_dim, n_labels, Init::fan_in, rng);
    params_.add("classifier/b", 1, n_labels, Init::zeros, rng);
  }
  bool has_classifier() const { return params_.has("classifier/w"); }

  // ---- graph builders ----

  int embed_hard(Graph<S>& g, Role role, const std::vector<int>& ids) const {
    if (ids.empty()) throw UsageError("cannot embed an empty sequence");
    for (int id : ids)
      if (id < 0 || id >= cfg_.vocab_size(role))
        throw DataError("token id out of vocabulary range");
    return g.tape.gather_rows(g.p(emb_name(role)), ids);
  }

  // probs: (len x vocab) rows of distributions; output (len x embed).
  int embed_soft(Graph<S>& g, Role role, int probs) const {
    return g.tape.matmul(probs, g.p(emb_name(role)));
  }

  int embed_row(Graph<S>& g, Role role, int id) const {
    return embed_hard(g, role, std::vector<int>{id});
  }

  // embedded: (len x embed) -> (len x encoder_dim). Only valid positions are
  // ever passed in, so no mask argument is needed here.
  int encode(Graph<S>& g, Role role, int embedded) const {
    std::string prefix = std::string(role_name(role)) + "_encoder";
    if (cfg_.arch == Arch::recurrent) {
      auto& t = g.tape;
      int T = static_cast<int>(t.val(embedded).rows());
      std::vector<int> xs(T);
      for (int i = 0; i < T; ++i) xs[i] = t.slice_rows(embedded, i, 1);
      std::vector<int> fw(T), bw(T);
      int h = zero_row(g, cfg_.hidden_dim), c = zero_row(g, cfg_.hidden_dim);
      for (int i = 0; i < T; ++i) {
        std::tie(h, c) = lstm_step(g, prefix + "/lstm_fw", xs[i], h, c);
        fw[i] = h;
      }
      h = zero_row(g, cfg_.hidden_dim);
      c = zero_row(g, cfg_.hidden_dim);
      for (int i = T - 1; i >= 0; --i) {
        std::tie(h, c) = lstm_step(g, prefix + "/lstm_bw", xs[i], h, c);
        bw[i] = h;
      }
      std::vector<int> rows(T);
      for (int i = 0; i < T; ++i) rows[i] = t.concat_cols(fw[i], bw[i]);
      return T == 1 ? rows[0] : t.vstack(rows);
    }
    int x = with_positions(g, embedded);
    return transformer_block(g, prefix, x, /*causal=*/false);
  }

  int encode_tokens(Graph<S>& g, Role role, const std::vector<int>& ids) const {
    return encode(g, role, embed_hard(g, role, ids));
  }

  int pool_mean(Graph<S>& g, int seq) const { return g.tape.mean_rows(seq); }

  struct AttentionOut {
    int out;
    std::vector<int> head_weights;
  };

  // Multi-head scaled dot-product attention; projections live under `prefix`.
  AttentionOut attention(Graph<S>& g, const std::string& prefix, int q, int k,
                         int v, bool causal) const {
    auto& t = g.tape;
    int Q = t.matmul(q, g.p(prefix + "/wq"));
    int K = t.matmul(k, g.p(prefix + "/wk"));
    int V = t.matmul(v, g.p(prefix + "/wv"));
    int d_model = static_cast<int>(t.val(Q).cols());
    int h = cfg_.num_heads;
    if (d_model % h != 0)
      throw UsageError("attention dim not divisible by head count");
    int dh = d_model / h;
    S scale = S(1) / static_cast<S>(std::sqrt(double(dh)));
    AttentionOut res;
    int cat = -1;
    for (int head = 0; head < h; ++head) {
      int Qh = t.slice_cols(Q, head * dh, dh);
      int Kh = t.slice_cols(K, head * dh, dh);
      int Vh = t.slice_cols(V, head * dh, dh);
      int scores = t.scale(t.matmul_nt(Qh, Kh), scale);
      int P = causal ? t.softmax_rows_causal(scores) : t.softmax_rows(scores);
      res.head_weights.push_back(P);
      int oh = t.matmul(P, Vh);
      cat = head == 0 ? oh : t.concat_cols(cat, oh);
    }
    res.out = t.matmul(cat, g.p(prefix + "/wo"));
    return res;
  }

  // ---- decoding ----

  struct RecState {
    int h;
    int c;
  };

  RecState decoder_init(Graph<S>& g) const {
    return {zero_row(g, cfg_.hidden_dim), zero_row(g, cfg_.hidden_dim)};
  }

  // One recurrent decoder step; the conditioning vector rides along with the
  // input embedding at every step.
  std::pair<int, RecState> decode_step_recurrent(Graph<S>& g, Role role,
                                                 int prev_embed, int cond,
                                                 RecState st) const {
    check_cond(g, role, cond);
    std::string prefix = std::string(role_name(role)) + "_decoder/lstm";
    int x = g.tape.concat_cols(prev_embed, cond);
    auto [h, c] = lstm_step(g, prefix, x, st.h, st.c);
    return {h, RecState{h, c}};
  }

  // Teacher-forced decode of a whole input prefix: (T x embed) -> (T x out).
  int decode_all(Graph<S>& g, Role role, int inputs_embedded, int cond) const {
    check_cond(g, role, cond);
    auto& t = g.tape;
    int T = static_cast<int>(t.val(inputs_embedded).rows());
    if (cfg_.arch == Arch::recurrent) {
      RecState st = decoder_init(g);
      std::vector<int> vs(T);
      for (int i = 0; i < T; ++i) {
        int x = t.slice_rows(inputs_embedded, i, 1);
        std::tie(vs[i], st) = decode_step_recurrent(g, role, x, cond, st);
      }
      return T == 1 ? vs[0] : t.vstack(vs);
    }
    std::string prefix = std::string(role_name(role)) + "_decoder";
    int proj = t.add_rowwise(t.matmul(cond, g.p(prefix + "/cond/w")),
                             g.p(prefix + "/cond/b"));
    int x = with_positions(g, inputs_embedded);
    x = T == 1 ? t.add(x, proj) : t.add(x, t.repeat_rows(proj, T));
    return transformer_block(g, prefix, x, /*causal=*/true);
  }

  // (T x out) -> (T x vocab) logits.
  int vocab_logits(Graph<S>& g, Role role, int v) const {
    std::string prefix = std::string(role_name(role)) + "_decoder/out";
    return g.tape.add_rowwise(g.tape.matmul_nt(v, g.p(prefix + "/w")),
                              g.p(prefix + "/b"));
  }

 private:
  ModelConfig cfg_;
  ParamStore<S> params_;

  static std::string emb_name(Role role) {
    return std::string(role_name(role)) + "_encoder/embedding";
  }

  int zero_row(Graph<S>& g, int d) const {
    return g.tape.leaf(Mat<S>::Zero(1, d));
  }

  void check_cond(Graph<S>& g, Role role, int cond) const {
    if (g.tape.val(cond).rows() != 1 ||
        g.tape.val(cond).cols() != cfg_.cond_dim(role))
      throw UsageError("conditioning vector has wrong dimension");
  }

  // Gate layout in the fused weight matrix: input, forget, cell, output.
  std::pair<int, int> lstm_step(Graph<S>& g, const std::string& prefix, int x,
                                int h_prev, int c_prev) const {
    auto& t = g.tape;
    int in = t.concat_cols(x, h_prev);
    int gates = t.add_rowwise(t.matmul(in, g.p(prefix + "/w")),
                              g.p(prefix + "/b"));
    int H = cfg_.hidden_dim;
    int i = t.sigmoid_(t.slice_cols(gates, 0, H));
    int f = t.sigmoid_(t.slice_cols(gates, H, H));
    int gg = t.tanh_(t.slice_cols(gates, 2 * H, H));
    int o = t.sigmoid_(t.slice_cols(gates, 3 * H, H));
    int c = t.add(t.mul(f, c_prev), t.mul(i, gg));
    int h = t.mul(o, t.tanh_(c));
    return {h, c};
  }

  int with_positions(Graph<S>& g, int embedded) const {
    if (!cfg_.positional_encoding) return embedded;
    auto& t = g.tape;
    int T = static_cast<int>(t.val(embedded).rows());
    int d = static_cast<int>(t.val(embedded).cols());
    Mat<S> pe(T, d);
    for (int pos = 0; pos < T; ++pos)
      for (int c = 0; c < d; ++c) {
        double angle =
            pos * std::exp(-std::log(10000.0) * (2.0 * (c / 2) / double(d)));
        pe(pos, c) = static_cast<S>(c % 2 ? std::cos(angle) : std::sin(angle));
      }
    return t.add(embedded, t.leaf(std::move(pe)));
  }

  int transformer_block(Graph<S>& g, const std::string& prefix, int x,
                        bool causal) const {
    auto& t = g.tape;
    AttentionOut att = attention(g, prefix + "/attn", x, x, x, causal);
    int h1 = t.layer_norm_rows(t.add(x, att.out), g.p(prefix + "/ln1/gain"),
                               g.p(prefix + "/ln1/bias"), kLayerNormEps);
    int f1 = t.relu_(t.add_rowwise(t.matmul(h1, g.p(prefix + "/ffn/w1")),
                                   g.p(prefix + "/ffn/b1")));
    int f2 = t.add_rowwise(t.matmul(f1, g.p(prefix + "/ffn/w2")),
                           g.p(prefix + "/ffn/b2"));
    return t.layer_norm_rows(t.add(h1, f2), g.p(prefix + "/ln2/gain"),
                             g.p(prefix + "/ln2/bias"), kLayerNormEps);
  }

  void add_attention_params(const std::string& prefix, int d,
                            std::mt19937_64& rng) {
    params_.add(prefix + "/wq", d, d, Init::fan_in, rng);
    params_.add(prefix + "/wk", d, d, Init::fan_in, rng);
    params_.add(prefix + "/wv", d, d, Init::fan_in, rng);
    params_.add(prefix + "/wo", d, d, Init::fan_in, rng);
  }

  void add_transformer_params(const std::string& prefix, std::mt19937_64& rng) {
    int d = cfg_.embed_dim;
    add_attention_params(prefix + "/attn", d, rng);
    params_.add(prefix + "/ln1/gain", 1, d, Init::ones, rng);
    params_.add(prefix + "/ln1/bias", 1, d, Init::zeros, rng);
    params_.add(prefix + "/ffn/w1", d, cfg_.hidden_dim, Init::fan_in, rng);
    params_.add(prefix + "/ffn/b1", 1, cfg_.hidden_dim, Init::zeros, rng);
    params_.add(prefix + "/ffn/w2", cfg_.hidden_dim, d, Init::fan_in, rng);
    params_.add(prefix + "/ffn/b2", 1, d, Init::zeros, rng);
    params_.add(prefix + "/ln2/gain", 1, d, Init::ones, rng);
    params_.add(prefix + "/ln2/bias", 1, d, Init::zeros, rng);
  }

  void add_affine(const std::string& prefix, int in, int out,
                  std::mt19937_64& rng) {
    params_.add(prefix + "/w", in, out, Init::fan_in, rng);
    params_.add(prefix + "/b", 1, out, Init::zeros, rng);
  }

  void register_params(std::mt19937_64& rng) {
    int E = cfg_.embed_dim, H = cfg_.hidden_dim, L = cfg_.latent_dim;
    for (Role role : {Role::customer, Role::agent}) {
      std::string enc = std::string(role_name(role)) + "_encoder";
      params_.add(enc + "/embedding", cfg_.vocab_size(role), E, Init::uniform,
                  rng);
      if (cfg_.arch == Arch::recurrent) {
        for (const char* dir : {"/lstm_fw", "/lstm_bw"}) {
          params_.add(enc + dir + "/w", E + H, 4 * H, Init::uniform, rng);
          params_.add(enc + dir + "/b", 1, 4 * H, Init::zeros, rng);
        }
      } else {
        add_transformer_params(enc, rng);
      }
    }
    for (Role role : {Role::customer, Role::agent}) {
      std::string dec = std::string(role_name(role)) + "_decoder";
      int cond = cfg_.cond_dim(role);
      if (cfg_.arch == Arch::recurrent) {
        params_.add(dec + "/lstm/w", E + cond + H, 4 * H, Init::uniform, rng);
        params_.add(dec + "/lstm/b", 1, 4 * H, Init::zeros, rng);
      } else {
        add_affine(dec + "/cond", cond, E, rng);
        add_transformer_params(dec, rng);
      }
      params_.add(dec + "/out/w", cfg_.vocab_size(role), cfg_.decoder_out_dim(),
                  Init::fan_in, rng);
      params_.add(dec + "/out/b", 1, cfg_.vocab_size(role), Init::zeros, rng);
    }
    int enc_dim = cfg_.encoder_dim();
    add_affine("latent/customer_mean", enc_dim, L, rng);
    add_affine("latent/customer_logvar", enc_dim, L, rng);
    add_affine("latent/agent_mean", enc_dim + L, L, rng);
    add_affine("latent/agent_logvar", enc_dim + L, L, rng);
    for (const char* head : {"latent/prior_mean", "latent/prior_logvar"}) {
      params_.add(std::string(head) + "/w1", L, cfg_.prior_hidden, Init::fan_in,
                  rng);
      params_.add(std::string(head) + "/b1", 1, cfg_.prior_hidden, Init::zeros,
                  rng);
      params_.add(std::string(head) + "/w2", cfg_.prior_hidden, L, Init::fan_in,
                  rng);
      params_.add(std::string(head) + "/b2", 1, L, Init::zeros, rng);
    }
    for (Role role : {Role::customer, Role::agent})
      add_attention_params(
          "summary_attention/" + std::string(role_name(role)), enc_dim, rng);
  }
};

}  // namespace sutat::seq
