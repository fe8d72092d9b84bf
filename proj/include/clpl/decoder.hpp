#pragma once

// Lexicon-constrained CTC beam search with word-level n-gram LM fusion.
//
// Hypotheses live on collapsed emission strings: a word is completed only
// when the word-boundary token is emitted while the trie sits on a word
// terminal, so emissions follow wb* (spelling wb+)*. Hypotheses that end
// mid-trie are dropped at finalization. The ranking score is
//   am + alpha * lm + beta * word_count     (natural logs)
// with the LM term covering the full sentence including end-of-sentence.
// Hypotheses identical in (trie node, LM state, last token, blank flag) are
// merged: acoustic scores combine by log-sum-exp (the acoustic score is a
// marginal over alignments), word history and LM terms keep the
// best-scoring branch. Ties break lexicographically on the transcript.

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "clpl/common.hpp"
#include "clpl/ctc.hpp"
#include "clpl/io.hpp"
#include "clpl/lm.hpp"
#include "clpl/metrics.hpp"
#include "clpl/textnorm.hpp"

namespace clpl {

constexpr double kLn10 = 2.302585092994045684;

struct Lexicon {
  std::vector<std::string> words;                 // sorted, ids follow this order
  std::vector<std::vector<int>> spellings;        // token ids per word

  struct Node {
    std::map<int, int> children;  // token id -> node index (ordered for determinism)
    std::vector<int> word_ids;    // words terminating here
  };
  std::vector<Node> nodes;  // nodes[0] is the root

  size_t size() const { return words.size(); }

  int child(int node, int token) const {
    const auto& c = nodes[size_t(node)].children;
    auto it = c.find(token);
    return it == c.end() ? -1 : it->second;
  }
};

inline Lexicon build_lexicon(std::vector<std::pair<std::string, std::vector<int>>> entries,
                             const TokenSet& ts) {
  std::sort(entries.begin(), entries.end());
  for (size_t i = 1; i < entries.size(); ++i) {
    if (entries[i] == entries[i - 1])
      throw InvalidArgument("lexicon: duplicate entry for word '" + entries[i].first + "'");
  }
  Lexicon lex;
  lex.nodes.emplace_back();
  for (auto& [word, spelling] : entries) {
    require(!spelling.empty(), "lexicon: empty spelling for word '" + word + "'");
    for (int id : spelling)
      require(ts.is_char(id), "lexicon: non-character token in spelling of '" + word + "'");
    int wid = int(lex.words.size());
    lex.words.push_back(word);
    lex.spellings.push_back(spelling);
    int node = 0;
    for (int id : spelling) {
      int next = lex.child(node, id);
      if (next < 0) {
        next = int(lex.nodes.size());
        lex.nodes.emplace_back();
        lex.nodes[size_t(node)].children[id] = next;
      }
      node = next;
    }
    lex.nodes[size_t(node)].word_ids.push_back(wid);
  }
  return lex;
}

// Spellings are the words' own characters.
inline Lexicon lexicon_from_words(const std::vector<std::string>& words, const TokenSet& ts) {
  std::vector<std::pair<std::string, std::vector<int>>> entries;
  for (const auto& w : words) {
    std::vector<int> spelling;
    for (char32_t cp : utf8_decode(w)) {
      int id = ts.char_id(cp);
      require(id >= 0, "lexicon: word '" + w + "' not spellable in token set");
      spelling.push_back(id);
    }
    entries.emplace_back(w, spelling);
  }
  return build_lexicon(std::move(entries), ts);
}

// File format: one `word TAB space-separated-tokens` per line.
inline Lexicon load_lexicon(const std::string& path, const TokenSet& ts) {
  std::vector<std::pair<std::string, std::vector<int>>> entries;
  auto lines = read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("lexicon line missing TAB", int(i) + 1);
    std::string word = line.substr(0, tab);
    std::vector<int> spelling;
    std::string tok;
    for (size_t p = tab + 1; p <= line.size(); ++p) {
      if (p == line.size() || line[p] == ' ') {
        if (!tok.empty()) {
          auto cps = utf8_decode(tok);
          if (cps.size() != 1) throw ParseError("lexicon token must be one character", int(i) + 1);
          int id = ts.char_id(cps[0]);
          if (id < 0) throw ParseError("lexicon token outside token set", int(i) + 1);
          spelling.push_back(id);
          tok.clear();
        }
      } else {
        tok.push_back(line[p]);
      }
    }
    entries.emplace_back(std::move(word), std::move(spelling));
  }
  return build_lexicon(std::move(entries), ts);
}

inline std::string save_lexicon_string(const Lexicon& lex, const TokenSet& ts) {
  std::string out;
  for (size_t i = 0; i < lex.words.size(); ++i) {
    out += lex.words[i];
    out += '\t';
    for (size_t j = 0; j < lex.spellings[i].size(); ++j) {
      if (j) out += ' ';
      out += utf8_encode(ts.char_at(lex.spellings[i][j]));
    }
    out += '\n';
  }
  return out;
}

struct DecodeParams {
  double alpha = 1.0;             // LM weight
  double beta = 0.0;              // per-word insertion score
  int beam_size = 20;
  double beam_score_threshold = kInf;  // prune hyps below best - threshold
  double unk_log_score = kNegInf;      // natural log; -inf rejects unknown words

  void validate() const { require(beam_size >= 1, "DecodeParams: beam_size >= 1"); }
};

struct DecodeResult {
  std::vector<int> word_ids;
  std::vector<std::string> words;
  double am_score = 0.0;     // ln marginal over alignments
  double lm_score = 0.0;     // ln p_LM(sentence), eos included
  int word_count = 0;
  double total = 0.0;
};

namespace decdetail {

struct Hyp {
  int node = 0;
  std::vector<int> lm_hist;
  std::vector<int> words;
  double am = kNegInf;
  double lm = 0.0;
  int wc = 0;
  int last = -1;     // last emitted token, -1 at start
  bool blank = true;  // blank seen since last emission

  double total(const DecodeParams& p) const { return am + p.alpha * lm + p.beta * wc; }
};

struct Key {
  int node;
  int last;
  bool blank;
  std::vector<int> lm_hist;

  bool operator==(const Key& o) const {
    return node == o.node && last == o.last && blank == o.blank && lm_hist == o.lm_hist;
  }
};

struct KeyHash {
  size_t operator()(const Key& k) const {
    uint64_t h = fnv1a64_u64(uint64_t(k.node));
    h = fnv1a64_u64(uint64_t(k.last) + 7, h);
    h = fnv1a64_u64(k.blank ? 1 : 2, h);
    for (int id : k.lm_hist) h = fnv1a64_u64(uint64_t(id) + 11, h);
    return size_t(h);
  }
};

inline bool words_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Deterministic ordering: score desc, transcript asc, then state fields.
inline bool hyp_before(const Hyp& a, const Hyp& b, const DecodeParams& p) {
  double ta = a.total(p), tb = b.total(p);
  if (ta != tb) return ta > tb;
  if (a.words != b.words) return words_less(a.words, b.words);
  if (a.node != b.node) return a.node < b.node;
  if (a.last != b.last) return a.last < b.last;
  return a.blank && !b.blank;
}

}  // namespace decdetail

// Exact marginal of the empty transcript: paths over blank and root-level
// word-boundary emissions only.
inline double empty_transcript_am(const Matrix& lp, int blank_id, int wb_id) {
  // Two states: last emission none/wb with blank flag irrelevant for score.
  double s_blank = lp(0, blank_id);
  double s_wb = lp(0, wb_id);
  for (int t = 1; t < lp.rows; ++t) {
    double nb = log_sum_exp(s_blank, s_wb) + lp(t, blank_id);
    // wb after blank is a fresh emission; wb after wb is a repeat.
    double nw = log_sum_exp(s_blank, s_wb) + lp(t, wb_id);
    s_blank = nb;
    s_wb = nw;
  }
  return log_sum_exp(s_blank, s_wb);
}

inline std::vector<DecodeResult> beam_decode(const LogitsMatrix& logits, const Lexicon& lexicon,
                                             const NGramModel& lm, const TokenSet& ts,
                                             const DecodeParams& params) {
  params.validate();
  require(!lexicon.words.empty(), "beam_decode: empty lexicon");
  require(logits.n_tokens() == ts.n_tokens(), "beam_decode: token set mismatch");
  using decdetail::Hyp;
  using decdetail::Key;

  const Matrix& u = logits.values;
  const int T = u.rows;
  const int K = u.cols;
  Matrix lp(T, K);
  for (int t = 0; t < T; ++t) {
    double z = log_sum_exp(u.row(t));
    for (int k = 0; k < K; ++k) lp(t, k) = u(t, k) - z;
  }

  // LM ids per lexicon word; -1 marks words unknown to the LM.
  std::vector<int> lm_id(lexicon.words.size());
  for (size_t i = 0; i < lexicon.words.size(); ++i) lm_id[size_t(i)] = lm.word_id(lexicon.words[i]);

  std::vector<Hyp> beam(1);
  beam[0].node = 0;
  beam[0].lm_hist = lm.initial_state().history;
  beam[0].am = 0.0;
  beam[0].blank = true;
  beam[0].last = -1;

  std::vector<Hyp> merged;
  for (int t = 0; t < T; ++t) {
    std::unordered_map<Key, size_t, decdetail::KeyHash> index;
    merged.clear();
    auto emit = [&](Hyp&& h) {
      Key key{h.node, h.last, h.blank, h.lm_hist};
      auto [it, fresh] = index.emplace(std::move(key), merged.size());
      if (fresh) {
        merged.push_back(std::move(h));
        return;
      }
      Hyp& dst = merged[it->second];
      // Acoustic mass always merges; the surviving branch decides words/LM.
      double am = log_sum_exp(dst.am, h.am);
      bool replace;
      double td = dst.total(params), th = h.total(params);
      if (th != td) {
        replace = th > td;
      } else {
        replace = decdetail::words_less(h.words, dst.words);
      }
      if (replace) {
        dst.words = std::move(h.words);
        dst.lm = h.lm;
        dst.wc = h.wc;
      }
      dst.am = am;
    };

    for (const Hyp& h : beam) {
      for (int tok = 0; tok < K; ++tok) {
        double step_lp = lp(t, tok);
        if (tok == ts.blank_id) {
          Hyp n = h;
          n.am = h.am + step_lp;
          n.blank = true;
          emit(std::move(n));
          continue;
        }
        if (tok == h.last && !h.blank) {  // alignment repeat, same emission string
          Hyp n = h;
          n.am = h.am + step_lp;
          emit(std::move(n));
          continue;
        }
        if (ts.is_char(tok)) {
          int child = lexicon.child(h.node, tok);
          if (child < 0) continue;
          Hyp n = h;
          n.node = child;
          n.am = h.am + step_lp;
          n.last = tok;
          n.blank = false;
          emit(std::move(n));
          continue;
        }
        // Word boundary.
        if (h.node == 0) {  // silence at the root
          Hyp n = h;
          n.am = h.am + step_lp;
          n.last = tok;
          n.blank = false;
          emit(std::move(n));
          continue;
        }
        const auto& terminal = lexicon.nodes[size_t(h.node)].word_ids;
        for (int wid : terminal) {
          double word_lm;
          LMState next_state;
          if (lm_id[size_t(wid)] < 0) {
            if (params.unk_log_score == kNegInf) continue;
            word_lm = params.unk_log_score;
            next_state = lm.score_id(LMState{h.lm_hist}, kLmUnk).second;
          } else {
            auto [lp10, ns] = lm.score_id(LMState{h.lm_hist}, lm_id[size_t(wid)]);
            word_lm = kLn10 * lp10;
            next_state = ns;
          }
          Hyp n = h;
          n.node = 0;
          n.lm_hist = next_state.history;
          n.words.push_back(wid);
          n.am = h.am + step_lp;
          n.lm = h.lm + word_lm;
          n.wc = h.wc + 1;
          n.last = tok;
          n.blank = false;
          emit(std::move(n));
        }
      }
    }

    std::sort(merged.begin(), merged.end(),
              [&](const Hyp& a, const Hyp& b) { return decdetail::hyp_before(a, b, params); });
    if (int(merged.size()) > params.beam_size) merged.resize(size_t(params.beam_size));
    if (params.beam_score_threshold != kInf && !merged.empty()) {
      double floor = merged[0].total(params) - params.beam_score_threshold;
      while (!merged.empty() && merged.back().total(params) < floor) merged.pop_back();
    }
    beam = merged;
  }

  // Finalize: only closed hypotheses (at the root) survive; add the
  // end-of-sentence LM term; merge identical transcripts. The empty
  // transcript has a closed-form marginal, so it is always reported at its
  // exact score even if pruning dropped it (this also covers the
  // no-surviving-hypothesis case).
  std::map<std::vector<int>, Hyp> finals;
  for (const Hyp& h : beam) {
    if (h.node != 0) continue;
    Hyp f = h;
    f.lm += kLn10 * lm.score_eos(LMState{h.lm_hist});
    auto it = finals.find(f.words);
    if (it == finals.end()) {
      finals.emplace(f.words, std::move(f));
    } else {
      it->second.am = log_sum_exp(it->second.am, f.am);
    }
  }
  {
    Hyp e;
    e.am = empty_transcript_am(lp, ts.blank_id, ts.wb_id);
    e.lm = kLn10 * lm.score_eos(lm.initial_state());
    auto it = finals.find({});
    if (it == finals.end()) {
      finals.emplace(std::vector<int>{}, std::move(e));
    } else {
      it->second.am = e.am;
      it->second.lm = e.lm;
    }
  }

  std::vector<Hyp> out;
  out.reserve(finals.size());
  for (auto& [w, h] : finals) out.push_back(std::move(h));
  std::sort(out.begin(), out.end(),
            [&](const Hyp& a, const Hyp& b) { return decdetail::hyp_before(a, b, params); });

  std::vector<DecodeResult> results;
  results.reserve(out.size());
  for (const Hyp& h : out) {
    DecodeResult r;
    r.word_ids = h.words;
    for (int wid : h.words) r.words.push_back(lexicon.words[size_t(wid)]);
    r.am_score = h.am;
    r.lm_score = h.lm;
    r.word_count = h.wc;
    r.total = h.total(params);
    results.push_back(std::move(r));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Random search over (alpha, beta)

struct TuneBox {
  double alpha_min = 0.3, alpha_max = 5.0;
  double beta_min = -10.0, beta_max = 10.0;
};

struct TuneResult {
  DecodeParams params;
  double wer = kInf;
  int trial = -1;
  std::vector<std::pair<double, double>> tried;  // (alpha, beta) per trial
};

// Uniform draws from the box; returns the argmin dev WER with ties going to
// the earliest trial. Deterministic given the seed; utterance-level
// parallelism does not affect results.
template <typename LogitsProvider>
TuneResult tune_decode_params(LogitsProvider&& logits_of, size_t n_utts,
                              const std::vector<std::vector<std::string>>& refs,
                              const Lexicon& lexicon, const NGramModel& lm, const TokenSet& ts,
                              const DecodeParams& base, const TuneBox& box, int trials,
                              uint64_t seed, int workers = 1) {
  require(trials >= 1, "tune_decode_params: zero trials");
  require(n_utts > 0 && refs.size() == n_utts, "tune_decode_params: dev set mismatch");
  Rng rng = substream(seed, "decode-tune");
  TuneResult best;
  for (int trial = 0; trial < trials; ++trial) {
    DecodeParams p = base;
    p.alpha = rng.uniform(box.alpha_min, box.alpha_max);
    p.beta = rng.uniform(box.beta_min, box.beta_max);
    best.tried.emplace_back(p.alpha, p.beta);
    std::vector<ErrorRateReport> reports(n_utts);
    parallel_for(int(n_utts), workers, [&](int i) {
      auto results = beam_decode(logits_of(size_t(i)), lexicon, lm, ts, p);
      reports[size_t(i)] = wer(results.front().words, refs[size_t(i)]);
    });
    ErrorRateReport total;
    for (auto& r : reports) total.accumulate(r);
    double w = total.rate();
    if (w < best.wer) {
      best.wer = w;
      best.params = p;
      best.trial = trial;
    }
  }
  return best;
}

}  // namespace clpl
