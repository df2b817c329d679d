#include "sutat/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace sutat::ckpt {
namespace {

constexpr char kMagic[8] = {'S', 'U', 'T', 'A', 'T', 'C', 'K', 'P'};

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError("truncated checkpoint");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw DataError("truncated checkpoint");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

nlohmann::json train_config_json(const train::TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"tau", c.tau},
          {"kl_threshold", c.kl_threshold},
          {"kl_anneal_fraction", c.kl_anneal_fraction},
          {"word_dropout", c.word_dropout},
          {"lambda", c.lambda},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"max_steps", c.max_steps},
          {"grad_clip", c.grad_clip},
          {"arch", c.arch},
          {"embed_dim", c.embed_dim},
          {"hidden", c.hidden},
          {"latent_dim", c.latent_dim},
          {"heads", c.heads},
          {"layers", c.layers},
          {"prior_hidden", c.prior_hidden},
          {"summary_max_len", c.summary_max_len},
          {"seed", c.seed}};
}

train::TrainConfig train_config_from_json(const nlohmann::json& j) {
  train::TrainConfig c;
  for (const auto& [key, val] : j.items()) {
    std::string s = val.is_string() ? val.get<std::string>() : val.dump();
    c.apply(key, s);
  }
  return c;
}

std::vector<std::string> vocab_tokens(const Vocabulary& v) {
  std::vector<std::string> out;
  out.reserve(std::max(0, v.size() - kNumSpecials));
  for (int id = kNumSpecials; id < v.size(); ++id) out.push_back(v.decode(id));
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const seq::Model<float>& m,
                     const Vocabulary& customer_vocab,
                     const Vocabulary& agent_vocab,
                     const std::vector<std::string>& labels,
                     const train::TrainConfig& train_config) {
  if (m.has_classifier() != !labels.empty())
    throw UsageError("label list must match the model's classifier head");
  const auto& cfg = m.config();
  nlohmann::json header = {
      {"model",
       {{"arch", seq::arch_name(cfg.arch)},
        {"embed_dim", cfg.embed_dim},
        {"hidden_dim", cfg.hidden_dim},
        {"latent_dim", cfg.latent_dim},
        {"num_heads", cfg.num_heads},
        {"num_layers", cfg.num_layers},
        {"prior_hidden", cfg.prior_hidden},
        {"positional_encoding", cfg.positional_encoding}}},
      {"customer_tokens", vocab_tokens(customer_vocab)},
      {"agent_tokens", vocab_tokens(agent_vocab)},
      {"labels", labels},
      {"train", train_config_json(train_config)}};
  std::string header_bytes = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kFormatVersion);
  write_u64(out, header_bytes.size());
  out.write(header_bytes.data(), std::streamsize(header_bytes.size()));

  const auto& names = m.params().names();
  write_u64(out, names.size());
  for (const auto& name : names) {
    const ad::Mat<float>& p = m.params().at(name);
    write_u32(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_u32(out, uint32_t(p.rows()));
    write_u32(out, uint32_t(p.cols()));
    for (int r = 0; r < p.rows(); ++r)
      for (int c = 0; c < p.cols(); ++c) {
        float f = p(r, c);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(out, bits);
      }
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path);
  uint32_t version = read_u32(in);
  if (version != kFormatVersion)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  uint64_t header_len = read_u64(in);
  std::string header_bytes(header_len, '\0');
  if (!in.read(header_bytes.data(), std::streamsize(header_len)))
    throw DataError("truncated checkpoint");
  nlohmann::json header = nlohmann::json::parse(header_bytes, nullptr, false);
  if (header.is_discarded()) throw DataError("corrupt checkpoint header");

  std::vector<std::string> ctoks =
      header.at("customer_tokens").get<std::vector<std::string>>();
  std::vector<std::string> atoks =
      header.at("agent_tokens").get<std::vector<std::string>>();
  std::vector<std::string> labels =
      header.at("labels").get<std::vector<std::string>>();
  const auto& mj = header.at("model");
  seq::ModelConfig mc;
  mc.arch = seq::parse_arch(mj.at("arch").get<std::string>());
  mc.embed_dim = mj.at("embed_dim").get<int>();
  mc.hidden_dim = mj.at("hidden_dim").get<int>();
  mc.latent_dim = mj.at("latent_dim").get<int>();
  mc.num_heads = mj.at("num_heads").get<int>();
  mc.num_layers = mj.at("num_layers").get<int>();
  mc.prior_hidden = mj.at("prior_hidden").get<int>();
  mc.positional_encoding = mj.at("positional_encoding").get<bool>();
  mc.customer_vocab = int(ctoks.size()) + kNumSpecials;
  mc.agent_vocab = int(atoks.size()) + kNumSpecials;

  LoadedModel out{seq::Model<float>(mc, 0),
                  Vocabulary(Role::customer, std::move(ctoks)),
                  Vocabulary(Role::agent, std::move(atoks)),
                  std::move(labels), train_config_from_json(header.at("train"))};
  if (!out.labels.empty())
    out.model.add_classifier(int(out.labels.size()), 0);

  uint64_t count = read_u64(in);
  if (count != out.model.params().names().size())
    throw DataError("checkpoint parameter count mismatch");
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint");
    if (!out.model.params().has(name))
      throw DataError("checkpoint has unknown parameter: " + name);
    ad::Mat<float>& p = out.model.params().at(name);
    uint32_t rows = read_u32(in), cols = read_u32(in);
    if (int(rows) != p.rows() || int(cols) != p.cols())
      throw DataError("checkpoint shape mismatch for " + name);
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) {
        uint32_t bits = read_u32(in);
        float f;
        std::memcpy(&f, &bits, 4);
        p(int(r), int(c)) = f;
      }
  }
  return out;
}

}  // namespace sutat::ckpt
