#include "sutat/summarizer.hpp"

namespace sutat::summ {

namespace {

// Lexicon tokens appearing in the source turns of one role, ordered by first
// occurrence.
std::vector<std::string> source_candidates(const Dialogue& source, Role role,
                                           const FactualLexicon& lexicon) {
  std::vector<std::string> out;
  for (const auto& turn : source.turns) {
    if (turn.speaker != role) continue;
    for (const auto& tok : turn.tokens)
      if (lexicon.contains(tok) &&
          std::find(out.begin(), out.end(), tok) == out.end())
        out.push_back(tok);
  }
  return out;
}

}  // namespace

CopyResult partial_copy(const std::vector<std::string>& decoded,
                        const std::vector<std::vector<double>>& probs,
                        Role role, const FactualLexicon& lexicon,
                        const Dialogue& source, const Vocabulary& vocab) {
  if (probs.size() != decoded.size())
    throw UsageError("copy needs one probability row per decoded token");
  Role other = role == Role::customer ? Role::agent : Role::customer;
  std::vector<std::string> same = source_candidates(source, role, lexicon);
  std::vector<std::string> cross = source_candidates(source, other, lexicon);

  CopyResult res;
  res.tokens = decoded;
  for (size_t i = 0; i < decoded.size(); ++i) {
    if (!lexicon.contains(decoded[i])) continue;
    const std::vector<std::string>& pool = same.empty() ? cross : same;
    if (pool.empty()) continue;
    const std::string* best = nullptr;
    double best_p = 0.0;
    for (const auto& cand : pool) {
      int id = vocab.encode(cand);
      double p = id < static_cast<int>(probs[i].size()) ? probs[i][id] : 0.0;
      if (!best || p > best_p) {  // strict: ties keep the earliest occurrence
        best = &cand;
        best_p = p;
      }
    }
    res.log.push_back(
        {role, static_cast<int>(i), decoded[i], *best});
    res.tokens[i] = *best;
  }
  return res;
}

}  // namespace sutat::summ
