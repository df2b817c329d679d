#include "sutat/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace sutat::eval {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, int> ngram_counts(const std::vector<std::string>& tokens,
                                  int n) {
  std::map<Ngram, int> counts;
  for (int i = 0; i + n <= int(tokens.size()); ++i)
    ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

RougeScore from_counts(double overlap, double cand_total, double ref_total) {
  RougeScore s;
  s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  s.f1 = (s.precision + s.recall) > 0
             ? 2 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
  if (n < 1) throw UsageError("n-gram order must be positive");
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  double cand_total = std::max(0, int(candidate.size()) - n + 1);
  double ref_total = std::max(0, int(reference.size()) - n + 1);
  if (cand_total == 0 || ref_total == 0) {
    RougeScore s;
    s.degenerate = true;
    return s;
  }
  double overlap = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return from_counts(overlap, cand_total, ref_total);
}

int lcs_length(const std::vector<std::string>& a,
               const std::vector<std::string>& b) {
  int n = int(a.size()), m = int(b.size());
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[m];
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) {
    RougeScore s;
    s.degenerate = true;
    return s;
  }
  double lcs = lcs_length(candidate, reference);
  return from_counts(lcs, double(candidate.size()), double(reference.size()));
}

namespace {

std::vector<std::string> summary_tokens(const nlohmann::json& v,
                                        const std::string& key, int line) {
  if (v.is_string()) return tokenize(v.get<std::string>());
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& t : v) {
      if (!t.is_string())
        throw DataError("reference line " + std::to_string(line) + ": " + key +
                        " array must hold strings");
      out.push_back(t.get<std::string>());
    }
    return out;
  }
  throw DataError("reference line " + std::to_string(line) + ": " + key +
                  " must be a string or token array");
}

}  // namespace

ReferenceMap load_references(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open reference file: " + path);
  ReferenceMap refs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("reference line " + std::to_string(lineno) +
                      " is not a JSON object");
    for (const char* key : {"id", "customer_summary", "agent_summary"})
      if (!j.contains(key))
        throw DataError("reference line " + std::to_string(lineno) +
                        " lacks \"" + key + "\"");
    std::string id = j.at("id").get<std::string>();
    if (refs.count(id))
      throw DataError("duplicate reference id: " + id);
    refs[id] = {summary_tokens(j.at("customer_summary"), "customer_summary",
                               lineno),
                summary_tokens(j.at("agent_summary"), "agent_summary", lineno)};
  }
  if (refs.empty()) throw DataError("reference file has no records: " + path);
  return refs;
}

RougeTable score_summaries(const std::vector<summ::SummaryResult>& summaries,
                           const ReferenceMap& references) {
  if (summaries.empty()) throw DataError("no summaries to score");
  if (references.empty()) throw DataError("no reference summaries");
  RougeTable table;
  for (Role role : {Role::customer, Role::agent})
    for (const char* metric : {"rouge1", "rouge2", "rougeL"})
      table.scores[role][metric] = RougeScore{};
  auto accumulate = [&](Role role, const std::vector<std::string>& cand,
                        const std::vector<std::string>& ref) {
    auto& row = table.scores[role];
    for (auto [name, score] :
         {std::pair{"rouge1", rouge_n(cand, ref, 1)},
          std::pair{"rouge2", rouge_n(cand, ref, 2)},
          std::pair{"rougeL", rouge_l(cand, ref)}}) {
      row[name].precision += score.precision;
      row[name].recall += score.recall;
      row[name].f1 += score.f1;
      row[name].degenerate = row[name].degenerate || score.degenerate;
    }
  };
  for (const auto& s : summaries) {
    auto it = references.find(s.id);
    if (it == references.end()) {
      ++table.skipped;
      continue;
    }
    accumulate(Role::customer, s.customer_summary, it->second.customer);
    accumulate(Role::agent, s.agent_summary, it->second.agent);
    ++table.scored;
  }
  if (table.scored == 0)
    throw DataError("no summary matched a reference id");
  for (auto& [role, row] : table.scores)
    for (auto& [name, score] : row) {
      score.precision /= table.scored;
      score.recall /= table.scored;
      score.f1 /= table.scored;
    }
  return table;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw UsageError("roc_auc: scores and labels differ in length");
  if (scores.empty()) throw UsageError("roc_auc: empty input");
  double pos = 0, neg = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw UsageError("roc_auc: labels must be 0 or 1");
    (l ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw DataError("roc_auc: needs both positive and negative examples");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] > scores[b]; });
  double area = 0, cum_tp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    double tp_inc = 0, fp_inc = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp_inc : fp_inc) += 1;
      ++j;
    }
    area += fp_inc * (cum_tp + 0.5 * tp_inc);
    cum_tp += tp_inc;
    i = j;
  }
  return area / (pos * neg);
}

std::vector<std::set<int>> label_targets(const std::vector<Dialogue>& dialogues,
                                         const train::LabelMap& labels) {
  std::vector<std::set<int>> out;
  out.reserve(dialogues.size());
  for (const auto& d : dialogues) {
    std::set<int> ids;
    for (const auto& dom : d.domains) {
      auto it = labels.index.find(dom);
      if (it == labels.index.end())
        throw DataError("label absent from the training split: " + dom);
      ids.insert(it->second);
    }
    if (ids.empty())
      throw DataError("dialogue has no domain label: " + d.id);
    out.push_back(std::move(ids));
  }
  return out;
}

LinearClassifier train_linear_classifier(
    const Eigen::MatrixXd& features, const std::vector<std::set<int>>& targets,
    const train::LabelMap& labels, int epochs, double lr) {
  if (features.rows() != Eigen::Index(targets.size()))
    throw UsageError("one target set per feature row required");
  if (features.rows() == 0) throw UsageError("empty training set");
  if (epochs < 1) throw UsageError("epochs must be positive");
  int d = int(features.cols()), k = labels.size();

  seq::ParamStore<double> store;
  std::mt19937_64 unused_rng(0);
  store.add("w", d, k, seq::Init::zeros, unused_rng);
  store.add("b", 1, k, seq::Init::zeros, unused_rng);

  std::vector<int> hard;
  Eigen::MatrixXd multi;
  if (labels.multi_label) {
    multi = Eigen::MatrixXd::Zero(features.rows(), k);
    for (size_t r = 0; r < targets.size(); ++r)
      for (int id : targets[r]) multi(Eigen::Index(r), id) = 1.0;
  } else {
    for (const auto& t : targets) hard.push_back(*t.begin());
  }

  train::Adam<double> opt({lr, 0.9, 0.999, 1e-8});
  for (int epoch = 0; epoch < epochs; ++epoch) {
    seq::Graph<double> g(store);
    int x = g.tape.leaf(features);
    int logits = g.tape.add_rowwise(g.tape.matmul(x, g.p("w")), g.p("b"));
    int loss = labels.multi_label
                   ? g.tape.sigmoid_cross_entropy(logits, multi)
                   : g.tape.cross_entropy_rows(logits, hard);
    g.tape.backward(loss);
    opt.step(store, train::collect_grads(store, g));
  }

  LinearClassifier clf;
  clf.w = store.at("w");
  clf.b = store.at("b").row(0);
  clf.multi_label = labels.multi_label;
  clf.labels = labels.names();
  return clf;
}

AucReport macro_auc(const Eigen::MatrixXd& scores,
                    const std::vector<std::set<int>>& targets,
                    const train::LabelMap& labels) {
  if (scores.rows() != Eigen::Index(targets.size()))
    throw UsageError("one target set per score row required");
  if (scores.cols() != labels.size())
    throw UsageError("one score column per label required");
  AucReport rep;
  rep.multi_label = labels.multi_label;
  auto names = labels.names();
  double total = 0;
  for (int j = 0; j < labels.size(); ++j) {
    std::vector<double> col(scores.rows());
    std::vector<int> bin(scores.rows());
    int pos = 0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      col[r] = scores(r, j);
      bin[r] = targets[r].count(j) ? 1 : 0;
      pos += bin[r];
    }
    if (pos == 0 || pos == int(scores.rows())) continue;
    double auc = roc_auc(col, bin);
    rep.per_label[names[j]] = auc;
    total += auc;
  }
  if (rep.per_label.empty())
    throw DataError("no label has both classes in the evaluation split");
  rep.macro_auc = total / double(rep.per_label.size());
  return rep;
}

}  // namespace sutat::eval
