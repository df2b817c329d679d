#include "sutat/training.hpp"

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "sutat/checkpoint.hpp"
#include "testutil.hpp"

using namespace sutat;
using seq::Arch;
using seq::Graph;
using seq::Model;
using testutil::DMat;

namespace {

seq::ModelConfig tiny_cfg(Arch arch = Arch::recurrent) {
  seq::ModelConfig cfg;
  cfg.arch = arch;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 6;
  cfg.latent_dim = 4;
  cfg.num_heads = 2;
  cfg.prior_hidden = 5;
  cfg.customer_vocab = 12;
  cfg.agent_vocab = 11;
  return cfg;
}

BatchDialogue fixture_batch_dialogue(const Dialogue* d = nullptr) {
  static Dialogue dlg = [] {
    Dialogue x;
    x.id = "fix";
    x.domains = {"alpha"};
    return x;
  }();
  BatchDialogue bd;
  bd.dialogue = d ? d : &dlg;
  bd.encoded.push_back({{5, 7, 4}, {6, 8}, 3, 2});
  bd.encoded.push_back({{9, 6}, {4, 5, 7}, 2, 3});
  return bd;
}

// Tiny corpus: two clearly separated domains with distinct token sets.
std::vector<Dialogue> fixture_corpus(int n = 6) {
  std::vector<Dialogue> out;
  for (int i = 0; i < n; ++i) {
    Dialogue d;
    d.id = "d" + std::to_string(i);
    if (i % 2 == 0) {
      d.domains = {"alpha"};
      d.turns.push_back({Role::customer, tokenize("book a hotel room please")});
      d.turns.push_back({Role::agent, tokenize("the hotel room is booked")});
      d.turns.push_back({Role::customer, tokenize("thanks for the hotel")});
      d.turns.push_back({Role::agent, tokenize("enjoy the hotel stay")});
    } else {
      d.domains = {"beta"};
      d.turns.push_back({Role::customer, tokenize("call me a taxi now")});
      d.turns.push_back({Role::agent, tokenize("your taxi is on the way")});
    }
    out.push_back(std::move(d));
  }
  return out;
}

struct Prepared {
  std::vector<Dialogue> dialogues;
  Vocabulary cv{Role::customer, {}};
  Vocabulary av{Role::agent, {}};
};

Prepared prepare_fixture(int n = 6) {
  Prepared p;
  p.dialogues = fixture_corpus(n);
  std::vector<UtterancePair> pairs;
  for (const auto& d : p.dialogues) {
    auto dp = pair_utterances(d);
    pairs.insert(pairs.end(), dp.begin(), dp.end());
  }
  p.cv = build_vocabulary(pairs, Role::customer, 1, 100);
  p.av = build_vocabulary(pairs, Role::agent, 1, 100);
  return p;
}

train::TrainConfig small_train_cfg() {
  train::TrainConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden = 6;
  cfg.latent_dim = 4;
  cfg.heads = 2;
  cfg.prior_hidden = 5;
  cfg.batch_size = 3;
  cfg.max_steps = 8;
  cfg.summary_max_len = 3;
  cfg.learning_rate = 0.01;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("kl weight schedule") {
  SUBCASE("linear ramp to the threshold at the anneal fraction") {
    CHECK(train::kl_weight_schedule(0, 300, 0.8, 0.5) == 0.0);
    CHECK(train::kl_weight_schedule(75, 300, 0.8, 0.5) ==
          doctest::Approx(0.4).epsilon(1e-12));
    CHECK(train::kl_weight_schedule(150, 300, 0.8, 0.5) == 0.8);
    CHECK(train::kl_weight_schedule(300, 300, 0.8, 0.5) == 0.8);
  }
  SUBCASE("non-decreasing and bounded") {
    double prev = -1.0;
    for (int s = 0; s <= 100; ++s) {
      double w = train::kl_weight_schedule(s, 100, 0.8, 0.5);
      CHECK(w >= prev);
      CHECK(w <= 0.8);
      prev = w;
    }
  }
  SUBCASE("zero fraction starts at the threshold") {
    CHECK(train::kl_weight_schedule(0, 10, 0.8, 0.0) == 0.8);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(train::kl_weight_schedule(0, 0, 0.8, 0.5), UsageError);
    CHECK_THROWS_AS(train::kl_weight_schedule(5, 4, 0.8, 0.5), UsageError);
  }
}

TEST_CASE("adam update matches a hand rollout") {
  // 1-d parameter, three steps, arithmetic done independently here.
  train::AdamConfig cfg;
  cfg.lr = 0.1;
  double theta = 1.0, m = 0.0, v = 0.0;
  double grads[3] = {2.0, -1.0, 0.5};
  for (int t = 1; t <= 3; ++t) {
    double gr = grads[t - 1];
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    double mh = m / (1.0 - std::pow(0.9, t));
    double vh = v / (1.0 - std::pow(0.999, t));
    theta -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }

  DMat p(1, 1), mm = DMat::Zero(1, 1), vv = DMat::Zero(1, 1), g(1, 1);
  p(0, 0) = 1.0;
  for (int t = 1; t <= 3; ++t) {
    g(0, 0) = grads[t - 1];
    train::adam_update(p, mm, vv, g, t, cfg);
  }
  CHECK(p(0, 0) == doctest::Approx(theta).epsilon(1e-12));

  SUBCASE("first step moves by roughly -lr * sign(g)") {
    DMat q(1, 1), qm = DMat::Zero(1, 1), qv = DMat::Zero(1, 1);
    q(0, 0) = 0.0;
    g(0, 0) = 3.0;
    train::adam_update(q, qm, qv, g, 1, cfg);
    CHECK(q(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("shape mismatch is rejected") {
    DMat bad(2, 1);
    CHECK_THROWS_AS(train::adam_update(p, mm, vv, bad, 4, cfg), UsageError);
  }
}

TEST_CASE("adam optimizer over named gradients") {
  train::Adam<double> opt(train::AdamConfig{0.1});
  seq::ModelConfig cfg = tiny_cfg();
  Model<double> m(cfg, 3);
  DMat before_emb = m.params().at("customer_encoder/embedding");
  DMat before_out = m.params().at("agent_decoder/out/b");

  train::NamedGradsT<double> grads;
  grads.emplace_back("customer_encoder/embedding",
                     DMat::Ones(cfg.customer_vocab, cfg.embed_dim));
  grads.emplace_back("agent_decoder/out/b",
                     DMat::Zero(1, cfg.agent_vocab));
  opt.step(m.params(), grads);

  CHECK((m.params().at("customer_encoder/embedding") - before_emb)
            .cwiseAbs()
            .maxCoeff() > 0.0);
  // Zero gradient: first and second moments stay zero, update is exactly 0.
  CHECK(m.params().at("agent_decoder/out/b") == before_out);
  // A parameter with no gradient entry at all is untouched.
  CHECK(m.params().at("customer_decoder/out/b") ==
        DMat::Zero(1, cfg.customer_vocab));
  CHECK(opt.steps() == 1);
}

TEST_CASE("global norm clipping") {
  train::NamedGradsT<double> grads;
  grads.emplace_back("a", DMat::Constant(1, 9, 1.0));  // norm 3
  grads.emplace_back("b", DMat::Constant(1, 16, 1.0));
  double norm = train::global_grad_norm(grads);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));

  SUBCASE("below the limit nothing changes") {
    auto copy = grads;
    CHECK(train::clip_global_norm(copy, 10.0) == doctest::Approx(5.0));
    CHECK(copy[0].second == grads[0].second);
  }
  SUBCASE("above the limit all tensors scale together") {
    auto copy = grads;
    train::clip_global_norm(copy, 2.5);
    CHECK(train::global_grad_norm(copy) == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(copy[0].second(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(copy[1].second(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("combined objective weighting") {
  Model<double> m(tiny_cfg(), 1);
  Graph<double> g(m.params());
  auto scalar = [&](double v) {
    DMat x(1, 1);
    x(0, 0) = v;
    return g.tape.leaf(x);
  };
  int gen = scalar(-10.0), sum = scalar(0.5);
  CHECK(g.tape.val(train::combined_objective(g, gen, sum, 1.0))(0, 0) == -10.0);
  CHECK(g.tape.val(train::combined_objective(g, gen, sum, 0.0))(0, 0) == 0.5);
  CHECK(g.tape.val(train::combined_objective(g, gen, sum, 0.4))(0, 0) ==
        doctest::Approx(-3.7).epsilon(1e-12));
  CHECK_THROWS_AS(train::combined_objective(g, gen, sum, 1.5), UsageError);
}

TEST_CASE("dialogue objective") {
  Model<double> m(tiny_cfg(), 11);
  BatchDialogue bd = fixture_batch_dialogue();

  auto eval_obj = [&](double alpha, uint64_t rng_seed) {
    Graph<double> g(m.params());
    train::ObjectiveOpts opts;
    opts.mode = gen::Mode::eval;
    opts.alpha = alpha;
    opts.kl_weight = 0.5;
    opts.summary_max_len = 3;
    std::mt19937_64 rng(rng_seed);
    train::ObjectiveStats stats;
    int obj = dialogue_objective(g, m, bd, opts, rng, &stats);
    return std::make_pair(double(g.tape.val(obj)(0, 0)), stats);
  };

  SUBCASE("finite, deterministic, stats populated") {
    auto [v1, s1] = eval_obj(0.4, 9);
    auto [v2, s2] = eval_obj(0.4, 9);
    CHECK(v1 == v2);
    CHECK(std::isfinite(v1));
    CHECK(s1.pairs == 2);
    CHECK(s1.nll_x > 0.0);
    CHECK(s1.nll_y > 0.0);
    CHECK(s1.kl_x >= 0.0);
  }

  SUBCASE("alpha endpoints reduce to the component objectives") {
    auto [v_gen, s_gen] = eval_obj(1.0, 9);
    auto [v_sum, s_sum] = eval_obj(0.0, 9);
    auto [v_mix, s_mix] = eval_obj(0.4, 9);
    CHECK(v_gen == doctest::Approx(s_gen.gen).epsilon(1e-12));
    CHECK(v_sum == doctest::Approx(s_sum.sum).epsilon(1e-12));
    CHECK(v_mix ==
          doctest::Approx(0.4 * s_mix.gen + 0.6 * s_mix.sum).epsilon(1e-10));
  }

  SUBCASE("empty dialogue is rejected") {
    BatchDialogue empty;
    empty.dialogue = bd.dialogue;
    Graph<double> g(m.params());
    train::ObjectiveOpts opts;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(train::dialogue_objective(g, m, empty, opts, rng),
                    DataError);
  }
}

TEST_CASE("dialogue objective gradients match finite differences") {
  for (Arch arch : {Arch::recurrent, Arch::selfattentive}) {
    CAPTURE(arch_name(arch));
    Model<double> m(tiny_cfg(arch), 21);
    BatchDialogue bd = fixture_batch_dialogue();
    // tau well above the near-argmax regime: finite differences need a
    // smooth objective, and the gradient code path is tau-independent.
    auto build = [&](Graph<double>& g) {
      train::ObjectiveOpts opts;
      opts.mode = gen::Mode::train;
      opts.alpha = 0.4;
      opts.tau = 0.5;
      opts.word_dropout = 0.4;
      opts.kl_weight = 0.7;
      opts.summary_max_len = 3;
      std::mt19937_64 rng(17);
      return g.tape.neg(train::dialogue_objective(g, m, bd, opts, rng));
    };
    std::vector<std::string> names = {
        "customer_encoder/embedding", "latent/agent_mean/w",
        "latent/prior_logvar/w1", "summary_attention/customer/wq"};
    if (arch == Arch::recurrent) {
      names.push_back("agent_encoder/lstm_bw/w");
      names.push_back("customer_decoder/lstm/w");
    } else {
      names.push_back("agent_encoder/attn/wv");
      names.push_back("customer_decoder/cond/w");
    }
    auto rep = testutil::fd_check_params(m, names, build);
    CHECK(rep.max_rel_err < 1e-4);
    CHECK(rep.max_abs_err < 1e-6);
  }
}

TEST_CASE("classification term in the objective") {
  Dialogue multi;
  multi.id = "m";
  multi.domains = {"alpha", "beta"};
  std::vector<Dialogue> ds = fixture_corpus(4);
  ds.push_back(multi);
  train::LabelMap lm = train::LabelMap::build(ds);
  CHECK(lm.size() == 2);
  CHECK(lm.multi_label);
  CHECK(lm.names() == std::vector<std::string>{"alpha", "beta"});
  train::LabelMap single = train::LabelMap::build(fixture_corpus(4));
  CHECK_FALSE(single.multi_label);

  Model<double> m(tiny_cfg(), 11);
  m.add_classifier(2, 77);
  BatchDialogue bd = fixture_batch_dialogue();

  auto value = [&](const train::LabelMap* labels, double lambda) {
    Graph<double> g(m.params());
    train::ObjectiveOpts opts;
    opts.mode = gen::Mode::eval;
    opts.summary_max_len = 3;
    opts.labels = labels;
    opts.lambda = lambda;
    std::mt19937_64 rng(9);
    int obj = train::dialogue_objective(g, m, bd, opts, rng);
    return double(g.tape.val(obj)(0, 0));
  };

  double without = value(nullptr, 1.0);
  double zero_lambda = value(&single, 0.0);
  double with = value(&single, 1.0);
  CHECK(without == zero_lambda);  // lambda 0 adds exactly nothing
  CHECK(with < without);          // cross-entropy subtracts likelihood
  CHECK(std::isfinite(value(&lm, 1.0)));  // multi-label path
}

TEST_CASE("training loop") {
  Prepared p = prepare_fixture();
  train::TrainConfig cfg = small_train_cfg();

  SUBCASE("record count, schedule trace, finiteness") {
    Model<float> m(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
    auto res = train::train(m, p.dialogues, p.cv, p.av, cfg);
    REQUIRE(res.records.size() == 8);
    CHECK(res.total_steps == 8);
    for (size_t i = 0; i < res.records.size(); ++i) {
      const auto& r = res.records[i];
      CHECK(r.step == int64_t(i) + 1);
      CHECK(std::isfinite(r.loss));
      CHECK(r.kl_weight ==
            train::kl_weight_schedule(int64_t(i), 8, cfg.kl_threshold,
                                      cfg.kl_anneal_fraction));
      CHECK(r.grad_norm >= 0.0);
    }
    CHECK(res.records.front().kl_weight == 0.0);
    CHECK(res.records.back().kl_weight == cfg.kl_threshold);
  }

  SUBCASE("bitwise determinism across fresh runs") {
    Model<float> m1(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
    Model<float> m2(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
    auto r1 = train::train(m1, p.dialogues, p.cv, p.av, cfg);
    auto r2 = train::train(m2, p.dialogues, p.cv, p.av, cfg);
    REQUIRE(r1.records.size() == r2.records.size());
    CHECK(r1.records[0].loss == r2.records[0].loss);
    for (size_t i = 0; i < r1.records.size(); ++i)
      CHECK(r1.records[i].loss == r2.records[i].loss);
    for (const auto& name : m1.params().names())
      CHECK(m1.params().at(name) == m2.params().at(name));
  }

  SUBCASE("one step changes parameters") {
    train::TrainConfig one = cfg;
    one.max_steps = 1;
    Model<float> m(one.model_config(p.cv.size(), p.av.size()), one.seed);
    std::map<std::string, ad::Mat<float>> before;
    for (const auto& name : m.params().names())
      before[name] = m.params().at(name);
    train::train(m, p.dialogues, p.cv, p.av, one);
    int changed = 0;
    for (const auto& name : m.params().names())
      if (m.params().at(name) != before[name]) ++changed;
    CHECK(changed > 0);
  }

  SUBCASE("loss trends down over a short run") {
    train::TrainConfig longer = cfg;
    longer.max_steps = 40;
    longer.batch_size = 6;
    Model<float> m(longer.model_config(p.cv.size(), p.av.size()), longer.seed);
    auto res = train::train(m, p.dialogues, p.cv, p.av, longer);
    auto mean = [&](size_t a, size_t b) {
      double s = 0;
      for (size_t i = a; i < b; ++i) s += res.records[i].loss;
      return s / double(b - a);
    };
    CHECK(mean(35, 40) < mean(0, 5));
  }

  SUBCASE("non-finite loss aborts with the offending step") {
    Model<float> m(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
    m.params().at("agent_decoder/out/b")(0, 5) =
        std::numeric_limits<float>::infinity();
    CHECK_THROWS_WITH_AS(train::train(m, p.dialogues, p.cv, p.av, cfg),
                         "non-finite loss or gradient at step 1",
                         TrainingError);
  }

  SUBCASE("epoch counting without max_steps") {
    train::TrainConfig ep = cfg;
    ep.max_steps = 0;
    ep.max_epochs = 2;  // 6 dialogues / batch 3 = 2 batches per epoch
    Model<float> m(ep.model_config(p.cv.size(), p.av.size()), ep.seed);
    int epoch_calls = 0;
    auto res = train::train(m, p.dialogues, p.cv, p.av, ep, nullptr, {},
                            [&](int) { ++epoch_calls; });
    CHECK(res.records.size() == 4);
    CHECK(res.epochs_run == 2);
    CHECK(epoch_calls == 2);
  }
}

TEST_CASE("supervised head with zero weight matches unsupervised training") {
  Prepared p = prepare_fixture();
  train::TrainConfig cfg = small_train_cfg();
  cfg.max_steps = 4;
  train::LabelMap lm = train::LabelMap::build(p.dialogues);

  Model<float> unsup(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
  auto ru = train::train(unsup, p.dialogues, p.cv, p.av, cfg);

  train::TrainConfig zero = cfg;
  zero.lambda = 0.0;
  Model<float> sup0(zero.model_config(p.cv.size(), p.av.size()), zero.seed);
  sup0.add_classifier(lm.size(), 123);
  auto r0 = train::train(sup0, p.dialogues, p.cv, p.av, zero, &lm);

  for (size_t i = 0; i < ru.records.size(); ++i)
    CHECK(ru.records[i].loss == r0.records[i].loss);
  for (const auto& name : unsup.params().names())
    CHECK(unsup.params().at(name) == sup0.params().at(name));

  // With a real weight the shared parameters take a different trajectory.
  Model<float> sup1(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
  sup1.add_classifier(lm.size(), 123);
  train::train(sup1, p.dialogues, p.cv, p.av, cfg, &lm);
  bool diverged = false;
  for (const auto& name : unsup.params().names())
    if (unsup.params().at(name) != sup1.params().at(name)) diverged = true;
  CHECK(diverged);
  CHECK(sup1.params().at("classifier/w") != sup0.params().at("classifier/w"));
}

TEST_CASE("train config files") {
  auto write_tmp = [](const char* name, const std::string& body) {
    std::string path = std::string("/tmp/") + name;
    std::ofstream out(path);
    out << body;
    return path;
  };

  SUBCASE("key=value form") {
    auto path = write_tmp("sutat_cfg.txt",
                          "# comment\nalpha = 0.25\nhidden=32\narch = "
                          "selfattentive\nseed=42\n\n");
    auto cfg = train::TrainConfig::from_file(path);
    CHECK(cfg.alpha == 0.25);
    CHECK(cfg.hidden == 32);
    CHECK(cfg.arch == "selfattentive");
    CHECK(cfg.seed == 42);
    CHECK(cfg.tau == 0.01);  // untouched defaults survive
  }

  SUBCASE("json form") {
    auto path = write_tmp("sutat_cfg.json",
                          R"({"alpha": 0.3, "batch_size": 4, "arch": "recurrent"})");
    auto cfg = train::TrainConfig::from_file(path);
    CHECK(cfg.alpha == 0.3);
    CHECK(cfg.batch_size == 4);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(train::TrainConfig::from_file("/tmp/absent_cfg_xyz"),
                    DataError);
    auto bad_key = write_tmp("sutat_cfg_bad1.txt", "not_a_key=1\n");
    CHECK_THROWS_AS(train::TrainConfig::from_file(bad_key), UsageError);
    auto bad_val = write_tmp("sutat_cfg_bad2.txt", "alpha=purple\n");
    CHECK_THROWS_AS(train::TrainConfig::from_file(bad_val), UsageError);
    auto no_eq = write_tmp("sutat_cfg_bad3.txt", "alpha 0.5\n");
    CHECK_THROWS_AS(train::TrainConfig::from_file(no_eq), DataError);
  }

  SUBCASE("validation") {
    train::TrainConfig cfg;
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.arch = "gru";
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());
  }
}

TEST_CASE("checkpoint round trip") {
  Prepared p = prepare_fixture(4);
  train::TrainConfig cfg = small_train_cfg();
  cfg.max_steps = 2;
  Model<float> m(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
  train::train(m, p.dialogues, p.cv, p.av, cfg);

  const char* path = "/tmp/sutat_test.ckpt";
  ckpt::save_checkpoint(path, m, p.cv, p.av, {}, cfg);
  auto loaded = ckpt::load_checkpoint(path);

  SUBCASE("parameters and configuration survive bitwise") {
    REQUIRE(loaded.model.params().names() == m.params().names());
    for (const auto& name : m.params().names())
      CHECK(loaded.model.params().at(name) == m.params().at(name));
    CHECK(loaded.model.config().embed_dim == 8);
    CHECK(loaded.model.config().arch == Arch::recurrent);
    CHECK(loaded.customer_vocab.size() == p.cv.size());
    for (int id = 0; id < p.cv.size(); ++id)
      CHECK(loaded.customer_vocab.decode(id) == p.cv.decode(id));
    CHECK(loaded.labels.empty());
    CHECK(loaded.train_config.max_steps == 2);
    CHECK(loaded.train_config.seed == cfg.seed);
  }

  SUBCASE("evaluation loss reproduces bitwise after reload") {
    auto eval_loss = [&](Model<float>& model) {
      Graph<float> g(model.params());
      train::ObjectiveOpts opts;
      opts.mode = gen::Mode::eval;
      opts.summary_max_len = 3;
      std::mt19937_64 rng(3);
      BatchIterator it(p.dialogues, p.cv, p.av, 4, 1);
      Batch b;
      REQUIRE(it.next(b));
      double total = 0;
      for (const auto& bd : b.dialogues) {
        int obj = train::dialogue_objective(g, model, bd, opts, rng);
        total += double(g.tape.val(obj)(0, 0));
      }
      return total;
    };
    CHECK(eval_loss(m) == eval_loss(loaded.model));
  }

  SUBCASE("classifier labels persist") {
    Model<float> mc(cfg.model_config(p.cv.size(), p.av.size()), cfg.seed);
    mc.add_classifier(2, 9);
    ckpt::save_checkpoint("/tmp/sutat_test_cls.ckpt", mc, p.cv, p.av,
                          {"alpha", "beta"}, cfg);
    auto lc = ckpt::load_checkpoint("/tmp/sutat_test_cls.ckpt");
    CHECK(lc.labels == std::vector<std::string>{"alpha", "beta"});
    CHECK(lc.model.has_classifier());
    CHECK(lc.model.params().at("classifier/w") ==
          mc.params().at("classifier/w"));
  }

  SUBCASE("label list must match the head") {
    CHECK_THROWS_AS(
        ckpt::save_checkpoint("/tmp/x.ckpt", m, p.cv, p.av, {"a"}, cfg),
        UsageError);
  }

  SUBCASE("corrupt files are rejected") {
    CHECK_THROWS_AS(ckpt::load_checkpoint("/tmp/absent.ckpt"), DataError);
    std::ofstream bad("/tmp/sutat_bad.ckpt", std::ios::binary);
    bad << "not a checkpoint at all";
    bad.close();
    CHECK_THROWS_AS(ckpt::load_checkpoint("/tmp/sutat_bad.ckpt"), DataError);
    // Truncate a valid checkpoint.
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream trunc("/tmp/sutat_trunc.ckpt", std::ios::binary);
    trunc.write(bytes.data(), std::streamsize(bytes.size() / 2));
    trunc.close();
    CHECK_THROWS_AS(ckpt::load_checkpoint("/tmp/sutat_trunc.ckpt"), DataError);
  }
}
