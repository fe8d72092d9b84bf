#pragma once

// End-to-end pipeline over an in-memory benchmark: source model training,
// zero-shot evaluation, both transfer phases, the supervised-target
// reference baseline, and the data-scaling sweep.

#include <string>
#include <vector>

#include "clpl/am.hpp"
#include "clpl/common.hpp"
#include "clpl/decoder.hpp"
#include "clpl/lm.hpp"
#include "clpl/pl.hpp"
#include "clpl/synthdata.hpp"

namespace clpl {

struct ExperimentSetup {
  int hidden = 32;
  int blocks = 2;
  int kernel = 7;
  int stride = 3;
  TrainConfig am_train;        // supervised source / target baseline
  NgramOptions lm_opts;
  DecodeParams eval_decode;    // zero-shot beam evaluation
  PhaseConfig phase1;
  PhaseConfig phase2;
  int workers = 1;

  ExperimentSetup() {
    phase1.phase = 1;
    phase2.phase = 2;
  }
};

inline LabeledUtterance utterance_to_labeled(const Utterance& u, const TokenSet& ts) {
  LabeledUtterance out;
  out.feats = u.feats;
  out.target = training_target(u.words, ts);
  out.ref_words = u.words;
  return out;
}

inline std::vector<LabeledUtterance> to_labeled(const std::vector<Utterance>& utts,
                                                const TokenSet& ts) {
  std::vector<LabeledUtterance> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(utterance_to_labeled(u, ts));
  return out;
}

inline EvalSet to_eval_set(const std::vector<Utterance>& utts) {
  EvalSet s;
  for (const auto& u : utts) {
    s.feats.push_back(u.feats);
    s.refs.push_back(u.words);
  }
  return s;
}

inline std::vector<FeatureSequence> to_features(const std::vector<Utterance>& utts) {
  std::vector<FeatureSequence> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(u.feats);
  return out;
}

inline ArchSpec arch_for(const ExperimentSetup& setup, const TokenSet& ts, int feat_dim) {
  ArchSpec a;
  a.feat_dim = feat_dim;
  a.hidden = setup.hidden;
  a.blocks = setup.blocks;
  a.kernel = setup.kernel;
  a.stride = setup.stride;
  a.n_tokens = ts.n_tokens();
  return a;
}

inline AcousticModel train_am(const std::vector<Utterance>& train,
                              const std::vector<Utterance>& dev, const TokenSet& ts,
                              const ExperimentSetup& setup, TrainStats* stats = nullptr) {
  require(!train.empty(), "train_am: empty training set");
  ArchSpec arch = arch_for(setup, ts, train.front().feats.feats.cols);
  AcousticModel init = AcousticModel::init(arch, setup.am_train.seed);
  return train_supervised(init, to_labeled(train, ts), to_eval_set(dev), setup.am_train, ts,
                          stats, setup.workers);
}

// ---------------------------------------------------------------------------
// Full transfer pipeline (one benchmark, one seed)

struct TransferOutcome {
  double source_dev_wer = kInf;
  ZeroShotReport zero_shot;        // on the target test set
  double phase1_test_wer = kInf;   // greedy
  double phase2_test_wer = kInf;   // greedy
  double supervised_test_wer = kInf;
  std::vector<std::pair<int, double>> pl_wer_by_refresh;  // phase 1, vs sealed refs
  PhaseResult phase1;
  PhaseResult phase2;
};

inline double pl_wer_against_refs(const RefreshDump& dump,
                                  const std::vector<Utterance>& refs_split) {
  std::unordered_map<std::string, const std::vector<std::string>*> refs;
  for (const auto& u : refs_split) refs.emplace(u.id, &u.words);
  ErrorRateReport total;
  for (const auto& r : dump.records) {
    auto it = refs.find(r.utt_id);
    if (it == refs.end()) continue;
    total.accumulate(wer(r.words, *it->second));
  }
  return total.ref_len > 0 ? total.rate() : 1.0;
}

struct TransferFlags {
  bool run_phase2 = true;
  bool run_supervised_baseline = true;
};

inline TransferOutcome run_transfer_pipeline(const Benchmark& bench,
                                             const ExperimentSetup& setup,
                                             const TransferFlags& flags = {}) {
  const TokenSet& ts = bench.target_lang.ts;
  TransferOutcome out;

  NGramModel lm = train_ngram(bench.lm_corpus, setup.lm_opts);
  Lexicon lexicon = lexicon_from_words(bench.lexicon_words, ts);

  TrainStats src_stats;
  AcousticModel source = train_am(bench.source_train, bench.source_dev, ts, setup, &src_stats);
  out.source_dev_wer = src_stats.best_dev_wer;

  EvalSet test = to_eval_set(bench.target_test);
  EvalSet dev = to_eval_set(bench.target_dev);
  out.zero_shot = zero_shot_eval(source, lm, lexicon, ts, test, setup.eval_decode, setup.workers);

  auto unlabeled = to_features(bench.target_train);
  out.phase1 = phase1_ipl(source, unlabeled, lm, lexicon, ts, setup.phase1, dev, setup.workers);
  out.phase1_test_wer = greedy_eval_wer(out.phase1.model, test, ts, setup.workers);
  for (const auto& dump : out.phase1.refreshes)
    out.pl_wer_by_refresh.emplace_back(dump.version, pl_wer_against_refs(dump, bench.target_train));

  if (flags.run_phase2) {
    out.phase2 = phase2_slimipl(source, out.phase1.model, unlabeled, lm, lexicon, ts,
                                setup.phase2, dev, setup.workers);
    out.phase2_test_wer = greedy_eval_wer(out.phase2.model, test, ts, setup.workers);
  }

  if (flags.run_supervised_baseline) {
    AcousticModel sup = train_am(bench.target_train, bench.target_dev, ts, setup);
    out.supervised_test_wer = greedy_eval_wer(sup, test, ts, setup.workers);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data scaling sweep (one axis, nested fractions)

enum class ScalingAxis { SourceLabeled, TargetUnlabeled };

struct ScalingRow {
  double fraction = 0.0;
  double test_wer = 0.0;
};

struct ScalingResult {
  ScalingAxis axis;
  std::vector<ScalingRow> rows;   // in the order of the requested fractions
  bool monotone_ok = false;       // WER(largest) <= WER(smallest)
};

inline ScalingResult data_scaling_experiment(const Benchmark& bench,
                                             const ExperimentSetup& setup, ScalingAxis axis,
                                             const std::vector<double>& fractions) {
  require(!fractions.empty(), "data_scaling_experiment: no fractions");
  for (double f : fractions)
    require(f > 0.0 && f <= 1.0, "data_scaling_experiment: fractions in (0,1]");
  const TokenSet& ts = bench.target_lang.ts;

  NGramModel lm = train_ngram(bench.lm_corpus, setup.lm_opts);
  Lexicon lexicon = lexicon_from_words(bench.lexicon_words, ts);
  EvalSet test = to_eval_set(bench.target_test);
  EvalSet dev = to_eval_set(bench.target_dev);

  AcousticModel full_source;
  bool have_full_source = false;
  if (axis == ScalingAxis::TargetUnlabeled) {
    full_source = train_am(bench.source_train, bench.source_dev, ts, setup);
    have_full_source = true;
  }

  ScalingResult res;
  res.axis = axis;
  for (double f : fractions) {
    AcousticModel source;
    std::vector<FeatureSequence> unlabeled;
    if (axis == ScalingAxis::SourceLabeled) {
      auto subset = subset_utterances(bench.source_train, f);
      source = train_am(subset, bench.source_dev, ts, setup);
      unlabeled = to_features(bench.target_train);
    } else {
      require(have_full_source, "scaling: source model missing");
      source = full_source;
      unlabeled = to_features(subset_utterances(bench.target_train, f));
    }
    PhaseResult p1 = phase1_ipl(source, unlabeled, lm, lexicon, ts, setup.phase1, dev,
                                setup.workers);
    res.rows.push_back({f, greedy_eval_wer(p1.model, test, ts, setup.workers)});
  }

  double wer_at_min = 0, wer_at_max = 0, fmin = 2.0, fmax = -1.0;
  for (const auto& r : res.rows) {
    if (r.fraction < fmin) {
      fmin = r.fraction;
      wer_at_min = r.test_wer;
    }
    if (r.fraction > fmax) {
      fmax = r.fraction;
      wer_at_max = r.test_wer;
    }
  }
  res.monotone_ok = wer_at_max <= wer_at_min;
  return res;
}

}  // namespace clpl
