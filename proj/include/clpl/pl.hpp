#pragma once

// Cross-lingual pseudo-labeling orchestration.
//
// Phase 1: the target model starts from the source model; a teacher snapshot
// decodes the whole unlabeled set with the target-LM-constrained beam search
// and is replaced by the student every refresh interval.
// Phase 2: the model is re-initialized from the source model, fine-tuned on
// pseudo-labels produced by the phase-1 model at a larger beam, then trained
// with LM-free continuous self-labeling: fresh batches are greedy-decoded by
// a delayed snapshot and cached, cached labels are reused with a configured
// probability, eviction is FIFO.
//
// Teacher versions count snapshots; the in-training student is always
// strictly newer than any snapshot, so every consumed pseudo-label carries
// a version older than the current model.

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "clpl/am.hpp"
#include "clpl/common.hpp"
#include "clpl/decoder.hpp"
#include "clpl/lm.hpp"
#include "clpl/metrics.hpp"
#include "clpl/synthdata.hpp"
#include "clpl/textnorm.hpp"

namespace clpl {

struct PLRecord {
  std::string utt_id;
  std::vector<std::string> words;
  int teacher_version = 0;
  double score = 0.0;  // total decode score of the kept hypothesis
};

struct RefreshDump {
  int version = 0;
  int64_t step = 0;
  int64_t n_empty = 0;
  int64_t n_infeasible = 0;
  std::vector<PLRecord> records;  // usable pseudo-labels only
};

struct PhaseConfig {
  int phase = 1;
  int refresh_interval = 200;  // R, steps between teacher refreshes
  int max_iterations = 600;
  int pl_beam = 20;
  double pl_alpha = 1.0;
  double pl_beta = 0.0;
  // Phase 2 only.
  int bootstrap_beam = 100;     // "larger beam" for the phase-1 labels
  int finetune_iterations = 200;
  int cache_capacity = 64;
  double reuse_prob = 0.75;
  int reuse_count = 8;
  int snapshot_interval = 200;
  TrainConfig train;

  void validate() const {
    require(phase == 1 || phase == 2, "PhaseConfig: phase must be 1 or 2");
    require(refresh_interval >= 1, "PhaseConfig: refresh interval >= 1");
    require(max_iterations >= 1, "PhaseConfig: max iterations >= 1");
    require(pl_beam >= 1, "PhaseConfig: pl beam >= 1");
    if (phase == 2) {
      require(bootstrap_beam >= pl_beam, "PhaseConfig: bootstrap beam must be >= the PL beam");
      require(cache_capacity >= 1, "PhaseConfig: cache capacity >= 1");
      require(reuse_prob >= 0 && reuse_prob <= 1, "PhaseConfig: reuse probability in [0,1]");
      require(reuse_count >= 1, "PhaseConfig: reuse count >= 1");
      require(snapshot_interval >= 1, "PhaseConfig: snapshot interval >= 1");
    }
    train.validate();
  }
};

// ---------------------------------------------------------------------------
// Pseudo-label generation and filtering

inline std::vector<PLRecord> generate_pls_beam(const AcousticModel& teacher,
                                               const std::vector<FeatureSequence>& utts,
                                               const Lexicon& lexicon, const NGramModel& lm,
                                               const TokenSet& ts, const DecodeParams& params,
                                               int version, int workers) {
  std::vector<PLRecord> records(utts.size());
  parallel_for(int(utts.size()), workers, [&](int i) {
    LogitsMatrix lg = teacher.forward(utts[size_t(i)].feats);
    auto results = beam_decode(lg, lexicon, lm, ts, params);
    PLRecord r;
    r.utt_id = utts[size_t(i)].id;
    r.words = results.front().words;
    r.teacher_version = version;
    r.score = results.front().total;
    records[size_t(i)] = std::move(r);
  });
  return records;
}

inline std::vector<PLRecord> generate_pls_greedy(const AcousticModel& teacher,
                                                 const std::vector<FeatureSequence>& utts,
                                                 const TokenSet& ts, int version, int workers) {
  std::vector<PLRecord> records(utts.size());
  parallel_for(int(utts.size()), workers, [&](int i) {
    LogitsMatrix lg = teacher.forward(utts[size_t(i)].feats);
    PLRecord r;
    r.utt_id = utts[size_t(i)].id;
    r.words = words_from_tokens(greedy_decode(lg, ts.blank_id), ts);
    r.teacher_version = version;
    records[size_t(i)] = std::move(r);
  });
  return records;
}

inline std::vector<int> encode_words(const std::vector<std::string>& words, const TokenSet& ts) {
  std::vector<int> out;
  for (size_t w = 0; w < words.size(); ++w) {
    if (w) out.push_back(ts.wb_id);
    for (char32_t cp : utf8_decode(words[w])) {
      int id = ts.char_id(cp);
      require(id >= 0, "encode_words: character outside token set");
      out.push_back(id);
    }
  }
  return out;
}

// CTC training targets carry leading/trailing boundary tokens so that edge
// silence and inter-word silence receive the same supervision.
inline std::vector<int> training_target(const std::vector<std::string>& words,
                                        const TokenSet& ts) {
  std::vector<int> out;
  if (words.empty()) return out;
  out.push_back(ts.wb_id);
  for (int id : encode_words(words, ts)) out.push_back(id);
  out.push_back(ts.wb_id);
  return out;
}

// Empty and infeasible pseudo-labels are dropped: an unalignable target
// would poison the CTC gradients.
inline std::vector<LabeledUtterance> filter_pls(
    const std::vector<PLRecord>& records,
    const std::unordered_map<std::string, const FeatureSequence*>& feats_by_id,
    const TokenSet& ts, const AcousticModel& model, int64_t* n_empty, int64_t* n_infeasible) {
  std::vector<LabeledUtterance> out;
  for (const auto& r : records) {
    if (r.words.empty()) {
      if (n_empty) ++*n_empty;
      continue;
    }
    const FeatureSequence* fs = feats_by_id.at(r.utt_id);
    std::vector<int> target = training_target(r.words, ts);
    if (!ctc_feasible(target, model.out_frames(fs->feats.rows))) {
      if (n_infeasible) ++*n_infeasible;
      continue;
    }
    LabeledUtterance u;
    u.feats = *fs;
    u.target = std::move(target);
    u.ref_words = r.words;
    out.push_back(std::move(u));
  }
  return out;
}

// Bounded FIFO store of reusable pseudo-labels. push() evicts the oldest
// record past capacity; draw() picks uniformly, spends one use, and drops
// records whose uses are exhausted.
class PLCache {
 public:
  struct Entry {
    LabeledUtterance utt;
    int remaining = 0;
    int version = 0;
  };

  explicit PLCache(int capacity) : capacity_(capacity) {
    require(capacity >= 1, "PLCache: capacity >= 1");
  }

  void push(Entry e) {
    entries_.push_back(std::move(e));
    while (int(entries_.size()) > capacity_) {
      entries_.pop_front();
      ++evictions_;
    }
    max_size_ = std::max(max_size_, entries_.size());
  }

  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  size_t max_size() const { return max_size_; }
  int64_t evictions() const { return evictions_; }
  const std::deque<Entry>& entries() const { return entries_; }

  Entry draw(Rng& rng) {
    require(!entries_.empty(), "PLCache: draw from empty cache");
    size_t pick = size_t(rng.below(entries_.size()));
    Entry out = entries_[pick];
    if (--entries_[pick].remaining <= 0) entries_.erase(entries_.begin() + long(pick));
    return out;
  }

 private:
  int capacity_;
  std::deque<Entry> entries_;
  size_t max_size_ = 0;
  int64_t evictions_ = 0;
};

// ---------------------------------------------------------------------------
// Zero-shot evaluation

struct ZeroShotReport {
  double greedy_wer = 0.0, greedy_cer = 0.0;
  double beam_wer = 0.0, beam_cer = 0.0;
};

inline ZeroShotReport zero_shot_eval(const AcousticModel& source_model, const NGramModel& lm,
                                     const Lexicon& lexicon, const TokenSet& ts,
                                     const EvalSet& eval, const DecodeParams& params,
                                     int workers = 1) {
  require(source_model.spec().n_tokens == ts.n_tokens(),
          "zero_shot_eval: token set mismatch between model and lexicon");
  require(!eval.feats.empty(), "zero_shot_eval: empty eval set");
  std::vector<ErrorRateReport> gw(eval.size()), gc(eval.size()), bw(eval.size()), bc(eval.size());
  parallel_for(int(eval.size()), workers, [&](int i) {
    LogitsMatrix lg = source_model.forward(eval.feats[size_t(i)].feats);
    auto greedy_words = words_from_tokens(greedy_decode(lg, ts.blank_id), ts);
    auto beam = beam_decode(lg, lexicon, lm, ts, params);
    const auto& ref = eval.refs[size_t(i)];
    gw[size_t(i)] = wer(greedy_words, ref);
    gc[size_t(i)] = cer(greedy_words, ref);
    bw[size_t(i)] = wer(beam.front().words, ref);
    bc[size_t(i)] = cer(beam.front().words, ref);
  });
  auto total = [](const std::vector<ErrorRateReport>& rs) {
    ErrorRateReport t;
    for (auto& r : rs) t.accumulate(r);
    return t.rate();
  };
  return {total(gw), total(gc), total(bw), total(bc)};
}

// ---------------------------------------------------------------------------
// Phase 1: cross-lingual IPL

struct PhaseResult {
  AcousticModel model;
  double best_dev_wer = kInf;
  std::vector<RefreshDump> refreshes;
  std::vector<uint64_t> teacher_hashes;  // parameter hash per refresh teacher
  std::vector<std::pair<int64_t, double>> dev_history;
  int64_t cache_fallbacks = 0;  // phase 2 only
  int64_t fresh_batches = 0;    // phase 2 stage B
  int64_t cached_batches = 0;   // phase 2 stage B
  size_t cache_max_size = 0;    // phase 2 stage B
  int64_t cache_evictions = 0;  // phase 2 stage B
};

namespace pldetail {

struct BatchCursor {
  std::vector<size_t> order;
  size_t pos = 0;
  uint64_t epoch = 0;
  uint64_t seed = 0;

  void reset(size_t n, uint64_t s) {
    order.resize(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    pos = n;  // force shuffle on first use
    seed = s;
  }
  size_t next() {
    if (pos >= order.size()) {
      Rng rng = substream(seed, "data", epoch++);
      rng.shuffle(order);
      pos = 0;
    }
    return order[pos++];
  }
};

}  // namespace pldetail

inline PhaseResult phase1_ipl(const AcousticModel& source_model,
                              const std::vector<FeatureSequence>& unlabeled,
                              const NGramModel& lm, const Lexicon& lexicon, const TokenSet& ts,
                              const PhaseConfig& cfg, const EvalSet& dev, int workers = 1) {
  require(cfg.phase == 1, "phase1_ipl: config must have phase == 1");
  cfg.validate();
  require(!unlabeled.empty(), "phase1_ipl: no unlabeled audio");

  std::unordered_map<std::string, const FeatureSequence*> by_id;
  for (const auto& f : unlabeled) by_id.emplace(f.id, &f);

  DecodeParams pl_params;
  pl_params.alpha = cfg.pl_alpha;
  pl_params.beta = cfg.pl_beta;
  pl_params.beam_size = cfg.pl_beam;

  PhaseResult res;
  AcousticModel student = source_model;
  Adagrad opt(student, cfg.train.lr, cfg.train.warmup);
  AcousticModel best = student;

  int version = 0;
  std::vector<LabeledUtterance> dataset;
  auto regenerate = [&](const AcousticModel& teacher, int64_t step) {
    RefreshDump dump;
    dump.version = version;
    dump.step = step;
    dump.records =
        generate_pls_beam(teacher, unlabeled, lexicon, lm, ts, pl_params, version, workers);
    dataset = filter_pls(dump.records, by_id, ts, student, &dump.n_empty, &dump.n_infeasible);
    // Keep only usable records in the dump.
    std::vector<PLRecord> usable;
    for (const auto& r : dump.records)
      if (!r.words.empty()) usable.push_back(r);
    dump.records = std::move(usable);
    res.refreshes.push_back(dump);
    res.teacher_hashes.push_back(teacher.param_hash());
  };

  regenerate(source_model, 0);  // the source model bootstraps the labels
  if (dataset.empty())
    throw NoPseudoLabels("phase1_ipl: no usable pseudo-labels at bootstrap");

  pldetail::BatchCursor cursor;
  cursor.reset(dataset.size(), cfg.train.seed);

  auto evaluate = [&](int64_t step) {
    if (dev.feats.empty()) return;
    double w = greedy_eval_wer(student, dev, ts, workers);
    res.dev_history.emplace_back(step, w);
    if (w < res.best_dev_wer) {
      res.best_dev_wer = w;
      best = student;
    }
  };

  for (int64_t step = 0; step < cfg.max_iterations; ++step) {
    if (step > 0 && step % cfg.refresh_interval == 0) {
      ++version;
      AcousticModel teacher = student;
      regenerate(teacher, step);
      if (!dataset.empty()) cursor.reset(dataset.size(), cfg.train.seed + uint64_t(version));
    }
    if (dataset.empty()) continue;  // teacher collapsed this refresh; wait for the next
    std::vector<const LabeledUtterance*> batch;
    int64_t frames = 0;
    while (frames < cfg.train.batch_frames && batch.size() < dataset.size()) {
      const LabeledUtterance* u = &dataset[cursor.next()];
      batch.push_back(u);
      frames += u->feats.feats.rows;
    }
    Rng rng = substream(cfg.train.seed, "augment", uint64_t(step));
    bool augment = step >= cfg.train.specaug_start;
    train_step(student, opt, batch, cfg.train, augment, rng, ts.blank_id);
    if (cfg.train.eval_interval > 0 && (step + 1) % cfg.train.eval_interval == 0)
      evaluate(step + 1);
  }
  if (res.dev_history.empty() || res.dev_history.back().first != cfg.max_iterations)
    evaluate(cfg.max_iterations);
  res.model = dev.feats.empty() ? student : best;
  return res;
}

// ---------------------------------------------------------------------------
// Phase 2: fine-tune on phase-1 labels, then LM-free continuous slimIPL.

inline PhaseResult phase2_slimipl(const AcousticModel& source_model,
                                  const AcousticModel& phase1_model,
                                  const std::vector<FeatureSequence>& unlabeled,
                                  const NGramModel& lm, const Lexicon& lexicon,
                                  const TokenSet& ts, const PhaseConfig& cfg, const EvalSet& dev,
                                  int workers = 1) {
  require(cfg.phase == 2, "phase2_slimipl: config must have phase == 2");
  cfg.validate();
  require(!unlabeled.empty(), "phase2_slimipl: no unlabeled audio");

  std::unordered_map<std::string, const FeatureSequence*> by_id;
  for (const auto& f : unlabeled) by_id.emplace(f.id, &f);

  PhaseResult res;
  AcousticModel student = source_model;  // re-initialized from the source
  Adagrad opt(student, cfg.train.lr, cfg.train.warmup);
  AcousticModel best = student;

  auto evaluate = [&](int64_t step) {
    if (dev.feats.empty()) return;
    double w = greedy_eval_wer(student, dev, ts, workers);
    res.dev_history.emplace_back(step, w);
    if (w < res.best_dev_wer) {
      res.best_dev_wer = w;
      best = student;
    }
  };

  // Stage A: labels from the phase-1 model at the larger beam.
  int version = 0;
  {
    DecodeParams boot;
    boot.alpha = cfg.pl_alpha;
    boot.beta = cfg.pl_beta;
    boot.beam_size = cfg.bootstrap_beam;
    RefreshDump dump;
    dump.version = version;
    dump.step = 0;
    dump.records =
        generate_pls_beam(phase1_model, unlabeled, lexicon, lm, ts, boot, version, workers);
    auto dataset = filter_pls(dump.records, by_id, ts, student, &dump.n_empty, &dump.n_infeasible);
    std::vector<PLRecord> usable;
    for (const auto& r : dump.records)
      if (!r.words.empty()) usable.push_back(r);
    dump.records = std::move(usable);
    res.refreshes.push_back(dump);
    res.teacher_hashes.push_back(phase1_model.param_hash());
    if (dataset.empty()) throw NoPseudoLabels("phase2_slimipl: no usable phase-1 labels");

    pldetail::BatchCursor cursor;
    cursor.reset(dataset.size(), cfg.train.seed);
    for (int64_t step = 0; step < cfg.finetune_iterations; ++step) {
      std::vector<const LabeledUtterance*> batch;
      int64_t frames = 0;
      while (frames < cfg.train.batch_frames && batch.size() < dataset.size()) {
        const LabeledUtterance* u = &dataset[cursor.next()];
        batch.push_back(u);
        frames += u->feats.feats.rows;
      }
      Rng rng = substream(cfg.train.seed, "augment", uint64_t(step));
      bool augment = step >= cfg.train.specaug_start;
      train_step(student, opt, batch, cfg.train, augment, rng, ts.blank_id);
      if (cfg.train.eval_interval > 0 && (step + 1) % cfg.train.eval_interval == 0)
        evaluate(step + 1);
    }
  }

  // Stage B: continuous LM-free self-labeling with a FIFO cache.
  PLCache cache(cfg.cache_capacity);
  AcousticModel snapshot = student;  // delayed by one snapshot interval
  ++version;                         // snapshot 1: the stage-A model

  pldetail::BatchCursor fresh_cursor;
  fresh_cursor.reset(unlabeled.size(), substream_seed(cfg.train.seed, "plcycle"));
  Rng policy_rng = substream(cfg.train.seed, "reuse");

  for (int64_t step = cfg.finetune_iterations; step < cfg.max_iterations; ++step) {
    int64_t rel = step - cfg.finetune_iterations;
    if (rel > 0 && rel % cfg.snapshot_interval == 0) {
      snapshot = student;
      ++version;
    }
    std::vector<LabeledUtterance> batch_storage;
    bool want_cache = policy_rng.bernoulli(cfg.reuse_prob);
    if (want_cache && cache.empty()) {
      ++res.cache_fallbacks;  // fall back to fresh labels
      want_cache = false;
    }
    if (want_cache) {
      ++res.cached_batches;
      int64_t frames = 0;
      while (frames < cfg.train.batch_frames && !cache.empty()) {
        PLCache::Entry e = cache.draw(policy_rng);
        require(e.version < version, "phase2: cached label newer than the student");
        frames += e.utt.feats.feats.rows;
        batch_storage.push_back(std::move(e.utt));
      }
    } else {
      ++res.fresh_batches;
      int64_t frames = 0;
      size_t guard = 0;
      while (frames < cfg.train.batch_frames && guard < unlabeled.size()) {
        const FeatureSequence& fs = unlabeled[fresh_cursor.next()];
        ++guard;
        LogitsMatrix lg = snapshot.forward(fs.feats);
        auto words = words_from_tokens(greedy_decode(lg, ts.blank_id), ts);
        if (words.empty()) continue;
        std::vector<int> target = training_target(words, ts);
        if (!ctc_feasible(target, student.out_frames(fs.feats.rows))) continue;
        LabeledUtterance u;
        u.feats = fs;
        u.target = std::move(target);
        u.ref_words = words;
        frames += fs.feats.rows;
        cache.push(PLCache::Entry{u, cfg.reuse_count, version - 1});
        batch_storage.push_back(std::move(u));
      }
    }
    if (batch_storage.empty()) continue;
    std::vector<const LabeledUtterance*> batch;
    for (auto& u : batch_storage) batch.push_back(&u);
    Rng rng = substream(cfg.train.seed, "augment", uint64_t(step));
    bool augment = step >= cfg.train.specaug_start;
    train_step(student, opt, batch, cfg.train, augment, rng, ts.blank_id);
    if (cfg.train.eval_interval > 0 && (step + 1) % cfg.train.eval_interval == 0)
      evaluate(step + 1);
  }
  if (res.dev_history.empty() || res.dev_history.back().first != cfg.max_iterations)
    evaluate(cfg.max_iterations);
  res.cache_max_size = cache.max_size();
  res.cache_evictions = cache.evictions();
  res.model = dev.feats.empty() ? student : best;
  return res;
}

}  // namespace clpl
