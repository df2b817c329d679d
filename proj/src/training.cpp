#include "sutat/training.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sutat::train {

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("alpha must be in [0, 1]");
  if (!(tau > 0.0) || tau > 1.0) throw UsageError("tau must be in (0, 1]");
  if (kl_threshold < 0.0) throw UsageError("kl_threshold must be nonnegative");
  if (kl_anneal_fraction < 0.0 || kl_anneal_fraction > 1.0)
    throw UsageError("kl_anneal_fraction must be in [0, 1]");
  if (word_dropout < 0.0 || word_dropout > 1.0)
    throw UsageError("word_dropout must be in [0, 1]");
  if (lambda < 0.0) throw UsageError("lambda must be nonnegative");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (max_epochs < 1 && max_steps < 1)
    throw UsageError("either max_epochs or max_steps must be positive");
  if (max_steps < 0) throw UsageError("max_steps must be nonnegative");
  if (grad_clip < 0.0) throw UsageError("grad_clip must be nonnegative");
  if (embed_dim < 1 || hidden < 1 || latent_dim < 1 || prior_hidden < 1 ||
      heads < 1 || layers < 1)
    throw UsageError("model dimensions must be positive");
  if (summary_max_len < 1) throw UsageError("summary_max_len must be positive");
  seq::parse_arch(arch);
}

seq::ModelConfig TrainConfig::model_config(int customer_vocab,
                                           int agent_vocab) const {
  seq::ModelConfig mc;
  mc.arch = seq::parse_arch(arch);
  mc.embed_dim = embed_dim;
  mc.hidden_dim = hidden;
  mc.latent_dim = latent_dim;
  mc.num_heads = heads;
  mc.num_layers = layers;
  mc.prior_hidden = prior_hidden;
  mc.customer_vocab = customer_vocab;
  mc.agent_vocab = agent_vocab;
  return mc;
}

void TrainConfig::apply(const std::string& key, const std::string& value) {
  auto as_double = [&](double& field) {
    size_t pos = 0;
    field = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
  };
  auto as_int = [&](int& field) {
    size_t pos = 0;
    field = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
  };
  try {
    if (key == "alpha") as_double(alpha);
    else if (key == "tau") as_double(tau);
    else if (key == "kl_threshold") as_double(kl_threshold);
    else if (key == "kl_anneal_fraction") as_double(kl_anneal_fraction);
    else if (key == "word_dropout") as_double(word_dropout);
    else if (key == "lambda") as_double(lambda);
    else if (key == "learning_rate") as_double(learning_rate);
    else if (key == "batch_size") as_int(batch_size);
    else if (key == "max_epochs") as_int(max_epochs);
    else if (key == "max_steps") as_int(max_steps);
    else if (key == "grad_clip") as_double(grad_clip);
    else if (key == "arch") arch = value;
    else if (key == "embed_dim") as_int(embed_dim);
    else if (key == "hidden") as_int(hidden);
    else if (key == "latent_dim") as_int(latent_dim);
    else if (key == "heads") as_int(heads);
    else if (key == "layers") as_int(layers);
    else if (key == "prior_hidden") as_int(prior_hidden);
    else if (key == "summary_max_len") as_int(summary_max_len);
    else if (key == "seed") seed = std::stoull(value);
    else throw UsageError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw UsageError("bad value for config key " + key + ": " + value);
  } catch (const std::out_of_range&) {
    throw UsageError("value out of range for config key " + key);
  }
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  TrainConfig cfg;
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("config file is not a valid JSON object: " + path);
    for (const auto& [key, val] : j.items()) {
      std::string s = val.is_string() ? val.get<std::string>() : val.dump();
      cfg.apply(key, s);
    }
    return cfg;
  }
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(lineno) +
                      " is not key=value");
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace sutat::train
