#include <catch2/catch_amalgamated.hpp>

#include "clpl/experiment.hpp"
#include "clpl/pl.hpp"

using namespace clpl;

namespace {

LanguageConfig lang_cfg(uint64_t seed) {
  LanguageConfig cfg;
  cfg.seed = seed;
  cfg.alphabet_size = 6;
  cfg.feat_dim = 8;
  cfg.vocab_size = 14;
  cfg.word_len_min = 2;
  cfg.word_len_max = 4;
  cfg.sent_len_min = 2;
  cfg.sent_len_max = 3;
  cfg.noise = 0.2;
  cfg.accent_strength = 0.25;
  return cfg;
}

BenchmarkConfig micro_benchmark(uint64_t seed) {
  BenchmarkConfig cfg;
  cfg.seed = seed;
  cfg.source = lang_cfg(0);
  cfg.target = lang_cfg(0);
  cfg.target.relatedness = 0.8;
  cfg.source_train_utts = 60;
  cfg.source_dev_utts = 12;
  cfg.target_train_utts = 40;
  cfg.target_dev_utts = 12;
  cfg.target_test_utts = 12;
  cfg.lm_lines = 400;
  cfg.speakers = 4;
  return cfg;
}

ExperimentSetup micro_setup() {
  ExperimentSetup s;
  s.hidden = 24;
  s.blocks = 1;
  s.am_train.lr = 0.1;
  s.am_train.warmup = 20;
  s.am_train.max_iterations = 150;
  s.am_train.batch_frames = 600;
  s.am_train.dropout = 0.0;
  s.am_train.specaug_enabled = false;
  s.am_train.eval_interval = 50;
  s.am_train.seed = 11;
  s.lm_opts.order = 3;
  s.eval_decode.beam_size = 8;
  s.phase1.refresh_interval = 40;
  s.phase1.max_iterations = 120;
  s.phase1.pl_beam = 6;
  s.phase1.train = s.am_train;
  s.phase1.train.specaug_start = 20;
  s.phase2.bootstrap_beam = 12;
  s.phase2.pl_beam = 6;
  s.phase2.finetune_iterations = 40;
  s.phase2.max_iterations = 100;
  s.phase2.snapshot_interval = 20;
  s.phase2.cache_capacity = 16;
  s.phase2.reuse_prob = 0.5;
  s.phase2.reuse_count = 3;
  s.phase2.train = s.am_train;
  s.workers = 2;
  return s;
}

struct MicroWorld {
  Benchmark bench;
  NGramModel lm;
  Lexicon lexicon;
  AcousticModel source;
  EvalSet dev;
  std::vector<FeatureSequence> unlabeled;

  explicit MicroWorld(uint64_t seed, const ExperimentSetup& setup) {
    bench = make_benchmark(micro_benchmark(seed));
    lm = train_ngram(bench.lm_corpus, setup.lm_opts);
    lexicon = lexicon_from_words(bench.lexicon_words, bench.target_lang.ts);
    source = train_am(bench.source_train, bench.source_dev, bench.target_lang.ts, setup);
    dev = to_eval_set(bench.target_dev);
    unlabeled = to_features(bench.target_train);
  }
};

}  // namespace

TEST_CASE("pl cache bounds, fifo eviction and reuse counts") {
  auto entry = [](int version) {
    PLCache::Entry e;
    e.utt.feats.id = "u" + std::to_string(version);
    e.remaining = 2;
    e.version = version;
    return e;
  };
  PLCache cache(3);
  for (int i = 0; i < 5; ++i) cache.push(entry(i));
  CHECK(cache.size() == 3);
  CHECK(cache.max_size() == 3);
  CHECK(cache.evictions() == 2);
  // FIFO: the two oldest records left first.
  CHECK(cache.entries()[0].version == 2);
  CHECK(cache.entries()[1].version == 3);
  CHECK(cache.entries()[2].version == 4);
  // Reuse exhaustion removes records.
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    if (cache.empty()) break;
    cache.draw(rng);
  }
  CHECK(cache.empty());
  CHECK_THROWS_AS(cache.draw(rng), InvalidArgument);
  CHECK_THROWS_AS(PLCache(0), InvalidArgument);
}

TEST_CASE("phase config invariants") {
  PhaseConfig cfg;
  cfg.phase = 2;
  cfg.pl_beam = 20;
  cfg.bootstrap_beam = 10;  // must be >= pl_beam
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.bootstrap_beam = 100;
  CHECK_NOTHROW(cfg.validate());
  cfg.phase = 3;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("phase 1 bootstrap uses exactly the source model and refreshes on schedule") {
  ExperimentSetup setup = micro_setup();
  MicroWorld w(7, setup);
  PhaseResult res = phase1_ipl(w.source, w.unlabeled, w.lm, w.lexicon, w.bench.target_lang.ts,
                               setup.phase1, w.dev, setup.workers);
  // 120 iterations at refresh 40: versions 0 (bootstrap), 1, 2.
  REQUIRE(res.refreshes.size() == 3);
  CHECK(res.refreshes[0].version == 0);
  CHECK(res.refreshes[1].step == 40);
  CHECK(res.teacher_hashes[0] == w.source.param_hash());
  CHECK(res.teacher_hashes[1] != w.source.param_hash());
  // Every pseudo-label is tagged with its teacher.
  for (size_t k = 0; k < res.refreshes.size(); ++k)
    for (const auto& r : res.refreshes[k].records) CHECK(r.teacher_version == int(k));
  CHECK(std::isfinite(res.best_dev_wer));
}

TEST_CASE("refresh interval equal to max iterations trains once on bootstrap labels") {
  ExperimentSetup setup = micro_setup();
  setup.phase1.refresh_interval = setup.phase1.max_iterations;
  MicroWorld w(7, setup);
  PhaseResult res = phase1_ipl(w.source, w.unlabeled, w.lm, w.lexicon, w.bench.target_lang.ts,
                               setup.phase1, w.dev, setup.workers);
  CHECK(res.refreshes.size() == 1);  // teacher never refreshed
}

TEST_CASE("pseudo-label generation is deterministic") {
  ExperimentSetup setup = micro_setup();
  MicroWorld w(9, setup);
  auto run = [&] {
    return phase1_ipl(w.source, w.unlabeled, w.lm, w.lexicon, w.bench.target_lang.ts,
                      setup.phase1, w.dev, setup.workers);
  };
  PhaseResult a = run();
  PhaseResult b = run();
  REQUIRE(a.refreshes.size() == b.refreshes.size());
  for (size_t k = 0; k < a.refreshes.size(); ++k) {
    REQUIRE(a.refreshes[k].records.size() == b.refreshes[k].records.size());
    for (size_t i = 0; i < a.refreshes[k].records.size(); ++i) {
      CHECK(a.refreshes[k].records[i].utt_id == b.refreshes[k].records[i].utt_id);
      CHECK(a.refreshes[k].records[i].words == b.refreshes[k].records[i].words);
    }
  }
  CHECK(a.model.param_hash() == b.model.param_hash());
}

TEST_CASE("all-empty bootstrap aborts with a diagnostic") {
  ExperimentSetup setup = micro_setup();
  MicroWorld w(11, setup);
  // Single-frame utterances can only decode to the empty transcript.
  std::vector<FeatureSequence> stubs;
  for (int i = 0; i < 4; ++i) {
    FeatureSequence fs;
    fs.id = "stub" + std::to_string(i);
    fs.feats = Matrix(1, w.bench.target_lang.cfg.feat_dim, 0.1);
    stubs.push_back(fs);
  }
  CHECK_THROWS_AS(phase1_ipl(w.source, stubs, w.lm, w.lexicon, w.bench.target_lang.ts,
                             setup.phase1, w.dev, setup.workers),
                  NoPseudoLabels);
}

TEST_CASE("phase 2 policy degenerate cases") {
  ExperimentSetup setup = micro_setup();
  MicroWorld w(13, setup);
  PhaseResult p1 = phase1_ipl(w.source, w.unlabeled, w.lm, w.lexicon, w.bench.target_lang.ts,
                              setup.phase1, w.dev, setup.workers);

  SECTION("reuse probability zero trains only on fresh labels") {
    PhaseConfig cfg = setup.phase2;
    cfg.reuse_prob = 0.0;
    cfg.cache_capacity = 1;
    PhaseResult res = phase2_slimipl(w.source, p1.model, w.unlabeled, w.lm, w.lexicon,
                                     w.bench.target_lang.ts, cfg, w.dev, setup.workers);
    CHECK(res.cached_batches == 0);
    CHECK(res.fresh_batches > 0);
    CHECK(res.cache_max_size <= 1);
  }

  SECTION("reuse probability one falls back once, then lives off the cache") {
    PhaseConfig cfg = setup.phase2;
    cfg.reuse_prob = 1.0;
    cfg.reuse_count = 100;  // keep records alive
    PhaseResult res = phase2_slimipl(w.source, p1.model, w.unlabeled, w.lm, w.lexicon,
                                     w.bench.target_lang.ts, cfg, w.dev, setup.workers);
    CHECK(res.cache_fallbacks >= 1);  // empty cache at the first reuse attempt
    CHECK(res.cached_batches > 0);
    CHECK(std::isfinite(res.best_dev_wer));
    CHECK(res.best_dev_wer <= 2.0);  // bounded, no divergence
    CHECK(res.cache_max_size <= size_t(cfg.cache_capacity));
  }
}

TEST_CASE("zero-shot evaluation reports all four rates") {
  ExperimentSetup setup = micro_setup();
  MicroWorld w(15, setup);
  EvalSet test = to_eval_set(w.bench.target_test);
  ZeroShotReport rep = zero_shot_eval(w.source, w.lm, w.lexicon, w.bench.target_lang.ts, test,
                                      setup.eval_decode, setup.workers);
  CHECK(rep.greedy_wer >= 0.0);
  CHECK(rep.beam_wer >= 0.0);
  CHECK(rep.greedy_cer >= 0.0);
  CHECK(rep.beam_cer >= 0.0);
  // Degenerate transfer: evaluating the source model on its own language
  // matches the supervised dev performance regime.
  EvalSet source_dev = to_eval_set(w.bench.source_dev);
  double self_wer = greedy_eval_wer(w.source, source_dev, w.bench.target_lang.ts, setup.workers);
  CHECK(self_wer < 0.3);
}

TEST_CASE("disjoint emission distributions make greedy transfer useless") {
  ExperimentSetup setup = micro_setup();
  MicroWorld w(17, setup);
  // A fresh language with zero overlap and its own seed.
  LanguageConfig other_cfg = lang_cfg(991);
  other_cfg.relatedness = 0.0;
  SyntheticLanguage other = make_language(other_cfg);
  Rng rng(18);
  EvalSet eval;
  for (int i = 0; i < 10; ++i) {
    auto words = sample_sentence(other, rng);
    FeatureSequence fs = synthesize(other, words, 500 + uint64_t(i));
    fs.id = "alien" + std::to_string(i);
    eval.feats.push_back(fs);
    eval.refs.push_back(words);
  }
  double wer = greedy_eval_wer(w.source, eval, w.bench.target_lang.ts, setup.workers);
  CHECK(wer > 0.8);
}

TEST_CASE("scaling with fraction one equals a direct phase-1 run") {
  ExperimentSetup setup = micro_setup();
  Benchmark bench = make_benchmark(micro_benchmark(19));
  ScalingResult res =
      data_scaling_experiment(bench, setup, ScalingAxis::TargetUnlabeled, {1.0});
  REQUIRE(res.rows.size() == 1);

  MicroWorld w(19, setup);
  PhaseResult p1 = phase1_ipl(w.source, w.unlabeled, w.lm, w.lexicon, w.bench.target_lang.ts,
                              setup.phase1, w.dev, setup.workers);
  EvalSet test = to_eval_set(w.bench.target_test);
  double direct = greedy_eval_wer(p1.model, test, w.bench.target_lang.ts, setup.workers);
  CHECK(res.rows[0].test_wer == Catch::Approx(direct).margin(1e-12));
  CHECK(res.monotone_ok);  // single fraction compares with itself

  CHECK_THROWS_AS(data_scaling_experiment(bench, setup, ScalingAxis::SourceLabeled, {}),
                  InvalidArgument);
  CHECK_THROWS_AS(data_scaling_experiment(bench, setup, ScalingAxis::SourceLabeled, {1.5}),
                  InvalidArgument);
}
