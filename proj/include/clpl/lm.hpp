#pragma once

// Word-level backoff n-gram language models.
//
// Estimation is interpolated Kneser-Ney with a fixed discount D applied at
// every order: lower orders use continuation counts (raw counts for n-grams
// starting with <s>), the unigram level interpolates with a uniform
// distribution over vocabulary + </s> + <unk>, and out-of-vocabulary
// positions in the training text break counting windows so <unk> receives
// exactly its uniform share of the discounted unigram mass. With survivor
// sets S(h)/T(h) the backoff weight of a context equals D*T(h)/S(h), which
// keeps every conditional distribution normalized by construction.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "clpl/common.hpp"
#include "clpl/io.hpp"

namespace clpl {

constexpr int kLmBos = 0;  // <s>
constexpr int kLmEos = 1;  // </s>
constexpr int kLmUnk = 2;  // <unk>
constexpr int kLmFirstWord = 3;

struct LMState {
  std::vector<int> history;  // most recent last, length < order

  bool operator==(const LMState& o) const { return history == o.history; }
};

struct NgramOptions {
  int order = 4;
  int64_t vocab_limit = 100000;           // top-K words by frequency
  std::vector<int64_t> prune_min_count;   // 1-indexed by order; empty = no pruning
  double discount = 0.75;
};

class NGramModel {
 public:
  int order() const { return order_; }
  double unk_log_prob() const { return unk_log10_; }
  size_t vocab_size() const { return words_.size() - kLmFirstWord; }
  const std::vector<std::string>& id_to_word() const { return words_; }

  int word_id(const std::string& w) const {
    auto it = word_ids_.find(w);
    return it == word_ids_.end() ? -1 : it->second;
  }
  bool in_vocab(const std::string& w) const { return word_id(w) >= 0; }

  LMState initial_state() const { return LMState{{kLmBos}}; }
  LMState null_state() const { return LMState{{}}; }

  // Backoff-resolved conditional log10 probability plus the advanced state.
  // OOV words score through <unk> and advance the history with the unk id.
  std::pair<double, LMState> score(const LMState& state, const std::string& word) const {
    int wid = word_id(word);
    if (wid < 0) wid = kLmUnk;
    return score_id(state, wid);
  }

  std::pair<double, LMState> score_id(const LMState& state, int wid) const {
    double lp = resolve(state.history, wid);
    LMState next;
    next.history = state.history;
    next.history.push_back(wid);
    int keep = order_ - 1;
    if (int(next.history.size()) > keep) {
      next.history.erase(next.history.begin(),
                         next.history.end() - (keep > 0 ? keep : 0));
    }
    return {lp, next};
  }

  double score_eos(const LMState& state) const { return resolve(state.history, kLmEos); }

  // --- construction/introspection (used by the trainer and ARPA IO) ---

  struct Entry {
    double logp = 0.0;
    double logbow = 0.0;
    bool has_bow = false;
  };

  int order_ = 0;
  double unk_log10_ = kNegInf;
  std::vector<std::string> words_;  // id -> string, markers first
  std::unordered_map<std::string, int> word_ids_;
  // Packed gram key (int32 LE ids) -> entry, one map per order (index 0 = unigram).
  std::vector<std::unordered_map<std::string, Entry>> grams_;

  int intern(const std::string& w) {
    auto it = word_ids_.find(w);
    if (it != word_ids_.end()) return it->second;
    int id = int(words_.size());
    words_.push_back(w);
    word_ids_.emplace(w, id);
    return id;
  }

  static std::string pack(const int* ids, size_t n) {
    std::string key;
    key.resize(n * 4);
    std::memcpy(key.data(), ids, n * 4);
    return key;
  }
  static std::string pack(const std::vector<int>& ids) { return pack(ids.data(), ids.size()); }

  const Entry* find(const std::vector<int>& gram) const {
    size_t k = gram.size();
    if (k == 0 || k > grams_.size()) return nullptr;
    auto& m = grams_[k - 1];
    auto it = m.find(pack(gram));
    return it == m.end() ? nullptr : &it->second;
  }

 private:
  // p(w | hist) = stored(hist,w) if present, else bow(hist) + p(w | hist[1:]).
  double resolve(const std::vector<int>& history, int wid) const {
    int maxlen = std::min<int>(int(history.size()), order_ - 1);
    double acc = 0.0;
    for (int len = maxlen; len >= 0; --len) {
      std::vector<int> gram(history.end() - len, history.end());
      gram.push_back(wid);
      if (const Entry* e = find(gram)) return acc + e->logp;
      gram.pop_back();
      if (len > 0) {
        if (const Entry* ctx = find(gram); ctx && ctx->has_bow) acc += ctx->logbow;
      }
    }
    // Unigram missing entirely: route to <unk>.
    std::vector<int> unk{kLmUnk};
    const Entry* e = find(unk);
    return e ? acc + e->logp : kNegInf;
  }
};

// ---------------------------------------------------------------------------
// Training

namespace lmdetail {

struct GramKey {
  std::string bytes;
  bool operator==(const GramKey& o) const { return bytes == o.bytes; }
};

inline std::vector<int> unpack(const std::string& key) {
  std::vector<int> ids(key.size() / 4);
  std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

}  // namespace lmdetail

// corpus: one sentence per element, already normalized into words.
inline NGramModel train_ngram(const std::vector<std::vector<std::string>>& corpus,
                              const NgramOptions& opts) {
  if (opts.order < 1) throw InvalidArgument("train_ngram: order must be >= 1");
  if (opts.vocab_limit < 1) throw InvalidArgument("train_ngram: vocab_limit must be >= 1");
  bool has_words = false;
  for (const auto& s : corpus)
    if (!s.empty()) has_words = true;
  if (!has_words) throw InvalidArgument("train_ngram: empty corpus");

  const int n = opts.order;
  const double D = opts.discount;

  // Vocabulary: top-K by frequency, ties broken lexicographically.
  std::map<std::string, int64_t> freq;
  for (const auto& sent : corpus)
    for (const auto& w : sent) ++freq[w];
  std::vector<std::pair<std::string, int64_t>> by_freq(freq.begin(), freq.end());
  std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (int64_t(by_freq.size()) > opts.vocab_limit) by_freq.resize(size_t(opts.vocab_limit));

  NGramModel model;
  model.order_ = n;
  model.intern("<s>");
  model.intern("</s>");
  model.intern("<unk>");
  for (auto& [w, c] : by_freq) model.intern(w);

  // Raw counts per order. OOV positions break counting windows; the <s>
  // unigram is never counted.
  std::vector<std::unordered_map<std::string, int64_t>> raw(static_cast<size_t>(n));
  for (const auto& sent : corpus) {
    std::vector<int> ids;
    ids.push_back(kLmBos);
    for (const auto& w : sent) ids.push_back(model.word_id(w));  // -1 marks OOV
    ids.push_back(kLmEos);
    for (int k = 1; k <= n; ++k) {
      for (size_t i = 0; i + k <= ids.size(); ++i) {
        bool ok = true;
        for (size_t j = i; j < i + k; ++j)
          if (ids[j] < 0) ok = false;
        if (!ok) continue;
        if (k == 1 && ids[i] == kLmBos) continue;
        ++raw[size_t(k) - 1][NGramModel::pack(&ids[i], size_t(k))];
      }
    }
  }

  // Survivor sets: prune on raw counts, then close prefixes downwards so
  // every stored gram has its context available.
  auto prune_min = [&](int k) -> int64_t {
    if (k - 1 < int(opts.prune_min_count.size())) {
      int64_t v = opts.prune_min_count[size_t(k) - 1];
      return k == 1 ? 1 : std::max<int64_t>(1, v);  // unigrams are never pruned
    }
    return 1;
  };
  std::vector<std::unordered_map<std::string, int64_t>> surv(static_cast<size_t>(n));
  for (int k = 1; k <= n; ++k) {
    int64_t min_count = prune_min(k);
    for (auto& [key, c] : raw[size_t(k) - 1])
      if (c >= min_count) surv[size_t(k) - 1].emplace(key, c);
  }
  for (int k = n; k >= 2; --k) {
    for (auto& [key, c] : surv[size_t(k) - 1]) {
      std::string prefix = key.substr(0, key.size() - 4);
      auto& lower = surv[size_t(k) - 2];
      if (!lower.count(prefix)) {
        auto it = raw[size_t(k) - 2].find(prefix);
        // A prefix always has a raw count (it occurred wherever the longer
        // gram did), except the bare <s> unigram which is added elsewhere.
        if (it != raw[size_t(k) - 2].end()) lower.emplace(prefix, it->second);
      }
    }
  }

  // Adjusted counts: raw at the top order and for grams starting with <s>;
  // continuation counts (over raw higher-order grams) elsewhere, floored at
  // one because a gram can occur with every predecessor out of vocabulary.
  std::vector<std::unordered_map<std::string, int64_t>> adj(static_cast<size_t>(n));
  if (n >= 2) {
    std::vector<std::unordered_map<std::string, int64_t>> cont(size_t(n) - 1);
    for (int k = 2; k <= n; ++k) {
      for (auto& [key, c] : raw[size_t(k) - 1]) {
        cont[size_t(k) - 2][key.substr(4)] += 1;
      }
    }
    for (int k = 1; k < n; ++k) {
      for (auto& [key, c] : surv[size_t(k) - 1]) {
        auto ids = lmdetail::unpack(key);
        if (ids[0] == kLmBos) {
          adj[size_t(k) - 1][key] = c;
        } else {
          auto it = cont[size_t(k) - 1].find(key);
          int64_t a = it == cont[size_t(k) - 1].end() ? 0 : it->second;
          adj[size_t(k) - 1][key] = std::max<int64_t>(1, a);
        }
      }
    }
  }
  for (auto& [key, c] : surv[size_t(n) - 1]) adj[size_t(n) - 1][key] = c;

  // Context sums over survivors.
  struct Ctx {
    int64_t sum = 0;
    int64_t types = 0;
  };
  std::vector<std::unordered_map<std::string, Ctx>> ctx(static_cast<size_t>(n));
  for (int k = 1; k <= n; ++k) {
    for (auto& [key, a] : adj[size_t(k) - 1]) {
      auto ids = lmdetail::unpack(key);
      if (k == 1 && ids[0] == kLmBos) continue;
      std::string hist = key.substr(0, key.size() - 4);
      auto& c = ctx[size_t(k) - 1][hist];
      c.sum += a;
      c.types += 1;
    }
  }

  const double uniform_atoms = double(model.words_.size() - kLmFirstWord) + 2.0;  // + </s>, <unk>

  // Probabilities bottom-up; resolve() on the partially built model serves
  // the lower-order term of the interpolation.
  auto ctx_of = [&](int k, const std::string& hist) -> const Ctx* {
    auto& m = ctx[size_t(k) - 1];
    auto it = m.find(hist);
    return it == m.end() ? nullptr : &it->second;
  };

  model.grams_.assign(size_t(n), {});
  // Estimate order by order; backoff weights for order-k contexts are set
  // before order k+1 interpolates through them. The backoff weight of a
  // context equals its interpolation weight D*T/S exactly, pruning included.
  for (int k = 1; k <= n; ++k) {
    if (k == 1) {
      const Ctx* c = ctx_of(1, "");
      require(c && c->sum > 0, "train_ngram: no unigram mass");
      double lambda = D * double(c->types) / double(c->sum);
      std::vector<std::pair<std::string, int64_t>> items(adj[0].begin(), adj[0].end());
      std::sort(items.begin(), items.end());
      for (auto& [key, a] : items) {
        auto ids = lmdetail::unpack(key);
        if (ids[0] == kLmBos) continue;
        double p = (double(a) - D) / double(c->sum) + lambda / uniform_atoms;
        NGramModel::Entry e;
        e.logp = std::log10(p);
        model.grams_[0][key] = e;
      }
      NGramModel::Entry unk;
      unk.logp = std::log10(lambda / uniform_atoms);
      model.grams_[0][NGramModel::pack(std::vector<int>{kLmUnk})] = unk;
      model.unk_log10_ = unk.logp;
      NGramModel::Entry bos;
      bos.logp = -99.0;  // placeholder, <s> is never predicted
      model.grams_[0][NGramModel::pack(std::vector<int>{kLmBos})] = bos;
    } else {
      std::vector<std::pair<std::string, int64_t>> items(adj[size_t(k) - 1].begin(),
                                                         adj[size_t(k) - 1].end());
      std::sort(items.begin(), items.end());
      for (auto& [key, a] : items) {
        auto ids = lmdetail::unpack(key);
        std::string hist = key.substr(0, key.size() - 4);
        const Ctx* c = ctx_of(k, hist);
        require(c != nullptr, "train_ngram: missing context");
        double lambda = D * double(c->types) / double(c->sum);
        std::vector<int> lower_hist(ids.begin() + 1, ids.end() - 1);
        LMState st{lower_hist};
        double lower = std::pow(10.0, model.score_id(st, ids.back()).first);
        double p = (double(a) - D) / double(c->sum) + lambda * lower;
        NGramModel::Entry e;
        e.logp = std::log10(p);
        model.grams_[size_t(k) - 1][key] = e;
      }
    }
    if (k < n) {
      for (auto& [hist, c] : ctx[size_t(k)]) {  // contexts of (k+1)-grams, length k
        auto it = model.grams_[size_t(k) - 1].find(hist);
        require(it != model.grams_[size_t(k) - 1].end(), "train_ngram: context without entry");
        it->second.has_bow = true;
        it->second.logbow = std::log10(D * double(c.types) / double(c.sum));
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Perplexity

struct PerplexityReport {
  double ppl = 0.0;
  int64_t scored_tokens = 0;
  int64_t oov_tokens = 0;
  double total_log10 = 0.0;
};

// include_oov=false: OOV tokens are skipped and reset the history.
// include_oov=true: OOV tokens score through <unk> and count.
// End-of-sentence is always scored.
inline PerplexityReport perplexity(const NGramModel& model,
                                   const std::vector<std::vector<std::string>>& eval,
                                   bool include_oov) {
  PerplexityReport rep;
  for (const auto& sent : eval) {
    LMState state = model.initial_state();
    for (const auto& w : sent) {
      if (!model.in_vocab(w)) {
        ++rep.oov_tokens;
        if (include_oov) {
          auto [lp, next] = model.score(state, w);
          rep.total_log10 += lp;
          ++rep.scored_tokens;
          state = next;
        } else {
          state = model.null_state();
        }
        continue;
      }
      auto [lp, next] = model.score(state, w);
      rep.total_log10 += lp;
      ++rep.scored_tokens;
      state = next;
    }
    rep.total_log10 += model.score_eos(state);
    ++rep.scored_tokens;
  }
  if (rep.scored_tokens == 0) throw UndefinedPerplexity("perplexity: zero scored tokens");
  rep.ppl = std::pow(10.0, -rep.total_log10 / double(rep.scored_tokens));
  return rep;
}

// ---------------------------------------------------------------------------
// ARPA text format

inline std::string write_arpa_string(const NGramModel& model) {
  std::string out = "\\data\\\n";
  for (int k = 1; k <= model.order_; ++k) {
    out += "ngram " + std::to_string(k) + "=" +
           std::to_string(model.grams_[size_t(k) - 1].size()) + "\n";
  }
  for (int k = 1; k <= model.order_; ++k) {
    out += "\n\\" + std::to_string(k) + "-grams:\n";
    // Deterministic order: sort by word strings.
    std::vector<std::pair<std::string, const NGramModel::Entry*>> items;
    items.reserve(model.grams_[size_t(k) - 1].size());
    for (auto& [key, e] : model.grams_[size_t(k) - 1]) {
      auto ids = lmdetail::unpack(key);
      std::string text;
      for (size_t i = 0; i < ids.size(); ++i) {
        if (i) text += ' ';
        text += model.words_[size_t(ids[i])];
      }
      items.emplace_back(std::move(text), &e);
    }
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [text, e] : items) {
      out += format_double(e->logp, "%.7g");
      out += '\t';
      out += text;
      if (e->has_bow) {
        out += '\t';
        out += format_double(e->logbow, "%.7g");
      }
      out += '\n';
    }
  }
  out += "\n\\end\\\n";
  return out;
}

inline void write_arpa(const NGramModel& model, const std::string& path) {
  write_text_file(path, write_arpa_string(model));
}

inline NGramModel parse_arpa(const std::vector<std::string>& lines) {
  NGramModel model;
  model.intern("<s>");
  model.intern("</s>");
  model.intern("<unk>");

  size_t i = 0;
  auto skip_blank = [&] {
    while (i < lines.size() && lines[i].empty()) ++i;
  };
  skip_blank();
  if (i >= lines.size() || lines[i] != "\\data\\")
    throw ParseError("expected \\data\\ header", int(i) + 1);
  ++i;
  std::vector<int64_t> counts;
  while (i < lines.size() && lines[i].rfind("ngram ", 0) == 0) {
    const std::string& l = lines[i];
    auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError("malformed ngram count", int(i) + 1);
    int ord = std::atoi(l.c_str() + 6);
    if (ord != int(counts.size()) + 1) throw ParseError("non-consecutive ngram order", int(i) + 1);
    counts.push_back(std::atoll(l.c_str() + eq + 1));
    ++i;
  }
  if (counts.empty()) throw ParseError("no ngram counts", int(i) + 1);
  model.order_ = int(counts.size());
  model.grams_.assign(counts.size(), {});

  for (int k = 1; k <= model.order_; ++k) {
    skip_blank();
    std::string header = "\\" + std::to_string(k) + "-grams:";
    if (i >= lines.size() || lines[i] != header)
      throw ParseError("expected section header " + header, int(i) + 1);
    ++i;
    int64_t seen = 0;
    while (i < lines.size() && !lines[i].empty() && lines[i][0] != '\\') {
      const std::string& l = lines[i];
      // logp <TAB or space> w1 .. wk [<TAB or space> logbow]
      std::vector<std::string> fields;
      std::string cur;
      for (char c : l) {
        if (c == '\t' || c == ' ') {
          if (!cur.empty()) fields.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
      if (!cur.empty()) fields.push_back(cur);
      if (int(fields.size()) != k + 1 && int(fields.size()) != k + 2)
        throw ParseError("wrong field count in " + std::to_string(k) + "-gram line", int(i) + 1);
      NGramModel::Entry e;
      char* end = nullptr;
      e.logp = std::strtod(fields[0].c_str(), &end);
      std::vector<int> ids;
      for (int j = 0; j < k; ++j) ids.push_back(model.intern(fields[size_t(j) + 1]));
      if (int(fields.size()) == k + 2) {
        e.has_bow = true;
        e.logbow = std::strtod(fields[size_t(k) + 1].c_str(), &end);
      }
      model.grams_[size_t(k) - 1][NGramModel::pack(ids)] = e;
      ++seen;
      ++i;
    }
    if (seen != counts[size_t(k) - 1])
      throw ParseError("section count mismatch for order " + std::to_string(k) +
                           ": header says " + std::to_string(counts[size_t(k) - 1]) +
                           ", found " + std::to_string(seen),
                       int(i) + 1);
  }
  skip_blank();
  if (i >= lines.size() || lines[i] != "\\end\\")
    throw ParseError("missing \\end\\ terminator", int(i) + 1);

  auto unk = model.find(std::vector<int>{kLmUnk});
  model.unk_log10_ = unk ? unk->logp : kNegInf;
  return model;
}

inline NGramModel read_arpa(const std::string& path) {
  return parse_arpa(read_lines(path));
}

}  // namespace clpl
