#pragma once

#include <string>
#include <vector>

#include "sutat/model.hpp"
#include "sutat/training.hpp"

namespace sutat::ckpt {

// Single-file archive: fixed magic, format version, JSON header carrying the
// model configuration, vocabularies, label set and training settings, then
// shape-tagged float32 tensors keyed by canonical parameter names.
constexpr uint32_t kFormatVersion = 1;

struct LoadedModel {
  seq::Model<float> model;
  Vocabulary customer_vocab;
  Vocabulary agent_vocab;
  std::vector<std::string> labels;  // classifier columns; empty when absent
  train::TrainConfig train_config;
};

void save_checkpoint(const std::string& path, const seq::Model<float>& m,
                     const Vocabulary& customer_vocab,
                     const Vocabulary& agent_vocab,
                     const std::vector<std::string>& labels,
                     const train::TrainConfig& train_config);

LoadedModel load_checkpoint(const std::string& path);

}  // namespace sutat::ckpt
