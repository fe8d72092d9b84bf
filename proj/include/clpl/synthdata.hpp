#pragma once

// Synthetic "languages" for desk-scale cross-lingual experiments: a lexicon
// over a shared alphabet, a word-bigram sentence generator, per-character
// emission prototypes, and an accent transform (orthogonal-ish linear map)
// relating a child language to its parent. Features are prototype streams
// with Gaussian noise, not audio.

#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "clpl/am.hpp"
#include "clpl/common.hpp"
#include "clpl/io.hpp"
#include "clpl/textnorm.hpp"

namespace clpl {

struct LanguageConfig {
  uint64_t seed = 1;
  int alphabet_size = 10;
  int feat_dim = 8;
  int vocab_size = 60;
  int word_len_min = 2;
  int word_len_max = 5;
  int sent_len_min = 2;
  int sent_len_max = 5;
  int dur_min = 3;  // frames per character
  int dur_max = 5;
  double noise = 0.25;
  double accent_strength = 0.35;  // deviation of the accent map from identity
  double relatedness = 0.0;       // fraction of prototypes shared with the parent
  double bigram_sharpness = 1.8;  // concentration of the sentence generator
};

struct SyntheticLanguage {
  LanguageConfig cfg;
  TokenSet ts;
  std::vector<std::string> lexicon_words;            // sorted
  std::vector<std::vector<double>> bigram_cum;       // cumulative rows, vocab x vocab
  std::vector<double> initial_cum;
  std::vector<std::vector<double>> prototypes;       // per token id (chars + wb), F-dim
};

namespace synthdetail {

inline std::vector<double> random_unit_profile(Rng& rng, int dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  for (auto& x : v) x = rng.normal();
  return v;
}

// Orthogonalize I + s*G by Gram-Schmidt; continuous in s around identity.
inline std::vector<std::vector<double>> accent_map(uint64_t seed, int dim, double s) {
  Rng rng(substream_seed(seed, "accent"));
  std::vector<std::vector<double>> a(size_t(dim), std::vector<double>(size_t(dim), 0.0));
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a[size_t(i)][size_t(j)] = (i == j ? 1.0 : 0.0) + s * rng.normal();
  }
  for (int i = 0; i < dim; ++i) {
    for (int k = 0; k < i; ++k) {
      double dot = 0;
      for (int j = 0; j < dim; ++j) dot += a[size_t(i)][size_t(j)] * a[size_t(k)][size_t(j)];
      for (int j = 0; j < dim; ++j) a[size_t(i)][size_t(j)] -= dot * a[size_t(k)][size_t(j)];
    }
    double nrm = 0;
    for (int j = 0; j < dim; ++j) nrm += a[size_t(i)][size_t(j)] * a[size_t(i)][size_t(j)];
    nrm = std::sqrt(nrm);
    require(nrm > 1e-9, "accent_map: degenerate basis");
    for (int j = 0; j < dim; ++j) a[size_t(i)][size_t(j)] /= nrm;
  }
  return a;
}

inline std::vector<double> apply_map(const std::vector<std::vector<double>>& m,
                                     const std::vector<double>& v) {
  std::vector<double> out(m.size(), 0.0);
  for (size_t i = 0; i < m.size(); ++i) {
    double s = 0;
    for (size_t j = 0; j < v.size(); ++j) s += m[i][j] * v[j];
    out[i] = s;
  }
  return out;
}

inline std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> cum(weights.size());
  double total = 0;
  for (double w : weights) total += w;
  double acc = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i] / total;
    cum[i] = acc;
  }
  cum.back() = 1.0;
  return cum;
}

inline int sample_cum(const std::vector<double>& cum, Rng& rng) {
  double r = rng.real();
  auto it = std::lower_bound(cum.begin(), cum.end(), r);
  return int(std::min(size_t(it - cum.begin()), cum.size() - 1));
}

}  // namespace synthdetail

// overlap > 0 copies that fraction of the parent's character prototypes
// (after the accent transform); remaining prototypes are freshly sampled.
// Lexicons are disjoint from the parent by construction of the word sampler
// seed, not by filtering.
inline SyntheticLanguage make_language(const LanguageConfig& cfg,
                                       const SyntheticLanguage* parent = nullptr) {
  require(cfg.relatedness >= 0.0 && cfg.relatedness <= 1.0, "make_language: overlap in [0,1]");
  require(cfg.relatedness == 0.0 || parent != nullptr,
          "make_language: overlap > 0 needs a parent language");
  require(cfg.word_len_min >= 1 && cfg.word_len_max >= cfg.word_len_min,
          "make_language: bad word length range");
  if (parent) {
    require(parent->cfg.alphabet_size == cfg.alphabet_size &&
                parent->cfg.feat_dim == cfg.feat_dim,
            "make_language: parent alphabet/feature dims differ");
  }
  // Reject configs that cannot spell the requested vocabulary.
  double combos = 0;
  for (int len = cfg.word_len_min; len <= cfg.word_len_max; ++len)
    combos += std::pow(double(cfg.alphabet_size), len);
  require(double(cfg.vocab_size) <= combos, "make_language: vocab exceeds spellable words");

  SyntheticLanguage lang;
  lang.cfg = cfg;
  lang.ts = alphabet_tokenset(cfg.alphabet_size);

  // Lexicon: unique random words.
  Rng wrng = substream(cfg.seed, "lexicon");
  std::set<std::string> seen;
  while (int(seen.size()) < cfg.vocab_size) {
    int len = wrng.range(cfg.word_len_min, cfg.word_len_max);
    std::string w;
    for (int i = 0; i < len; ++i) w.push_back(char('a' + wrng.range(0, cfg.alphabet_size - 1)));
    seen.insert(w);
  }
  lang.lexicon_words.assign(seen.begin(), seen.end());

  // Word-bigram sentence generator.
  const int V = cfg.vocab_size;
  lang.bigram_cum.resize(size_t(V));
  for (int i = 0; i < V; ++i) {
    Rng brng = substream(cfg.seed, "bigram", uint64_t(i));
    std::vector<double> w(static_cast<size_t>(V));
    for (auto& x : w) x = std::exp(cfg.bigram_sharpness * brng.normal());
    lang.bigram_cum[size_t(i)] = synthdetail::cumulative(w);
  }
  {
    Rng irng = substream(cfg.seed, "bigram-init");
    std::vector<double> w(static_cast<size_t>(V));
    for (auto& x : w) x = std::exp(cfg.bigram_sharpness * irng.normal());
    lang.initial_cum = synthdetail::cumulative(w);
  }

  // Emission prototypes, one per token (characters + word boundary). The
  // overlap fraction applies to the character prototypes; inter-word silence
  // is language-independent, so the boundary prototype always carries over
  // from the parent (accent included).
  int n_chars = lang.ts.n_chars();
  lang.prototypes.resize(size_t(n_chars) + 1);
  auto accent = synthdetail::accent_map(cfg.seed, cfg.feat_dim, cfg.accent_strength);
  int shared = parent ? int(std::lround(cfg.relatedness * n_chars)) : 0;
  for (int c = 0; c <= n_chars; ++c) {
    bool from_parent = parent && (c < shared || c == n_chars);
    if (from_parent) {
      lang.prototypes[size_t(c)] = synthdetail::apply_map(accent, parent->prototypes[size_t(c)]);
    } else {
      Rng prng = substream(cfg.seed, "proto", uint64_t(c));
      lang.prototypes[size_t(c)] = synthdetail::random_unit_profile(prng, cfg.feat_dim);
    }
  }
  return lang;
}

inline std::vector<std::string> sample_sentence(const SyntheticLanguage& lang, Rng& rng) {
  int len = rng.range(lang.cfg.sent_len_min, lang.cfg.sent_len_max);
  std::vector<std::string> words;
  int cur = synthdetail::sample_cum(lang.initial_cum, rng);
  words.push_back(lang.lexicon_words[size_t(cur)]);
  for (int i = 1; i < len; ++i) {
    cur = synthdetail::sample_cum(lang.bigram_cum[size_t(cur)], rng);
    words.push_back(lang.lexicon_words[size_t(cur)]);
  }
  return words;
}

// Prototype frames repeated for a sampled duration plus Gaussian noise;
// word boundaries (and the utterance edges) emit the silence prototype.
inline FeatureSequence synthesize(const SyntheticLanguage& lang,
                                  const std::vector<std::string>& words, uint64_t seed) {
  Rng rng{seed};
  const int F = lang.cfg.feat_dim;
  const int wb_proto = lang.ts.n_chars();
  std::vector<int> proto_seq;
  proto_seq.push_back(wb_proto);
  for (size_t w = 0; w < words.size(); ++w) {
    if (w) proto_seq.push_back(wb_proto);
    for (char32_t cp : utf8_decode(words[w])) {
      int id = lang.ts.char_id(cp);
      require(id >= 0, "synthesize: word not spellable: " + words[w]);
      proto_seq.push_back(id);
    }
  }
  proto_seq.push_back(wb_proto);

  std::vector<int> durs(proto_seq.size(), 0);
  int total = 0;
  for (size_t i = 0; i < proto_seq.size(); ++i) {
    durs[i] = rng.range(lang.cfg.dur_min, lang.cfg.dur_max);
    total += durs[i];
  }
  FeatureSequence fs;
  fs.feats = Matrix(total, F);
  int row = 0;
  for (size_t i = 0; i < proto_seq.size(); ++i) {
    const auto& p = lang.prototypes[size_t(proto_seq[i])];
    for (int d = 0; d < durs[i]; ++d, ++row) {
      for (int f = 0; f < F; ++f) fs.feats(row, f) = p[size_t(f)] + lang.cfg.noise * rng.normal();
    }
  }
  fs.duration_sec = double(total) / 100.0;  // nominal 100 frames/sec
  return fs;
}

// ---------------------------------------------------------------------------
// Feature files: magic, int32 T, int32 F (little endian), float32 row-major.

inline void save_features(const Matrix& m, const std::string& path) {
  std::string out = "CLPLFEA1";
  put_le<int32_t>(out, m.rows);
  put_le<int32_t>(out, m.cols);
  for (double v : m.data) put_le<float>(out, float(v));
  write_binary_file(path, out.data(), out.size());
}

inline Matrix load_features(const std::string& path) {
  auto bytes = read_binary_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "CLPLFEA1", 8) != 0)
    throw ParseError("bad feature file: " + path, 1);
  int32_t rows = get_le<int32_t>(&bytes[8]);
  int32_t cols = get_le<int32_t>(&bytes[12]);
  if (bytes.size() != 16 + size_t(rows) * size_t(cols) * 4)
    throw ParseError("feature file size mismatch: " + path, 1);
  Matrix m(rows, cols);
  for (size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = double(get_le<float>(&bytes[16 + i * 4]));
  return m;
}

// ---------------------------------------------------------------------------
// Manifests: JSON-lines, one utterance per line.

struct ManifestRecord {
  std::string id;
  std::string features;  // path relative to the manifest
  std::string transcript;  // empty when unlabeled
  bool has_transcript = false;
  std::string speaker;
  double duration = 0.0;
};

inline std::string manifest_to_string(const std::vector<ManifestRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["features"] = r.features;
    if (r.has_transcript) j["transcript"] = r.transcript;
    j["speaker"] = r.speaker;
    j["duration"] = r.duration;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
  write_text_file(path, manifest_to_string(records));
}

inline std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::vector<ManifestRecord> out;
  auto lines = read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) throw ParseError("bad manifest JSON", int(i) + 1);
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.features = j.at("features").get<std::string>();
    if (j.contains("transcript")) {
      r.transcript = j.at("transcript").get<std::string>();
      r.has_transcript = true;
    }
    r.speaker = j.value("speaker", "");
    r.duration = j.value("duration", 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

// Nested speaker-preserving subsets: per speaker, the first ceil-free
// floor(fraction * n) utterances in manifest order; any larger fraction
// contains every smaller one.
inline std::vector<ManifestRecord> subset_manifest(const std::vector<ManifestRecord>& records,
                                                   double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "subset_manifest: fraction in (0,1]");
  std::unordered_map<std::string, int64_t> counts, taken;
  for (const auto& r : records) ++counts[r.speaker];
  std::vector<ManifestRecord> out;
  for (const auto& r : records) {
    int64_t quota = int64_t(fraction * double(counts[r.speaker]) + 1e-9);
    if (taken[r.speaker] < quota) {
      out.push_back(r);
      ++taken[r.speaker];
    }
  }
  if (out.empty()) throw InvalidArgument("subset_manifest: fraction yields zero utterances");
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark assembly

struct BenchmarkConfig {
  uint64_t seed = 1;
  LanguageConfig source;
  LanguageConfig target;
  int source_train_utts = 2000;
  int source_dev_utts = 200;
  int target_train_utts = 1000;
  int target_dev_utts = 200;
  int target_test_utts = 200;
  int lm_lines = 20000;
  int speakers = 20;

  BenchmarkConfig() {
    source.relatedness = 0.0;
    target.relatedness = 0.7;
  }
};

struct Utterance {
  std::string id;
  std::string speaker;
  std::vector<std::string> words;
  FeatureSequence feats;
};

struct Benchmark {
  BenchmarkConfig cfg;
  SyntheticLanguage source_lang;
  SyntheticLanguage target_lang;
  std::vector<Utterance> source_train, source_dev;
  std::vector<Utterance> target_train, target_dev, target_test;  // target_train refs are sealed
  std::vector<std::vector<std::string>> lm_corpus;
  std::vector<std::string> lexicon_words;  // unique words of the LM corpus
};

// Same nesting rule as subset_manifest, over in-memory utterances.
inline std::vector<Utterance> subset_utterances(const std::vector<Utterance>& utts,
                                                double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "subset_utterances: fraction in (0,1]");
  std::unordered_map<std::string, int64_t> counts, taken;
  for (const auto& u : utts) ++counts[u.speaker];
  std::vector<Utterance> out;
  for (const auto& u : utts) {
    int64_t quota = int64_t(fraction * double(counts[u.speaker]) + 1e-9);
    if (taken[u.speaker] < quota) {
      out.push_back(u);
      ++taken[u.speaker];
    }
  }
  if (out.empty()) throw InvalidArgument("subset_utterances: fraction yields zero utterances");
  return out;
}

inline std::vector<Utterance> make_split(const SyntheticLanguage& lang, uint64_t root,
                                         const std::string& name, int count, int speakers,
                                         const std::set<std::string>* avoid) {
  std::vector<Utterance> out;
  out.reserve(size_t(count));
  Rng srng = substream(root, name + "-sentences");
  for (int i = 0; i < count; ++i) {
    std::vector<std::string> words;
    for (int tries = 0;; ++tries) {
      words = sample_sentence(lang, srng);
      if (!avoid) break;
      std::string joined;
      for (size_t w = 0; w < words.size(); ++w) {
        if (w) joined += ' ';
        joined += words[w];
      }
      if (!avoid->count(joined)) break;
      require(tries < 1000, "make_split: cannot sample sentence disjoint from LM corpus");
    }
    Utterance u;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05d", name.c_str(), i);
    u.id = buf;
    u.speaker = "spk" + std::to_string(i % speakers);
    u.words = words;
    u.feats = synthesize(lang, words, substream_seed(root, name + "-audio", uint64_t(i)));
    u.feats.id = u.id;
    out.push_back(std::move(u));
  }
  return out;
}

inline Benchmark make_benchmark(const BenchmarkConfig& cfg) {
  require(cfg.source_train_utts > 0 && cfg.target_train_utts > 0 && cfg.target_dev_utts > 0 &&
              cfg.target_test_utts > 0 && cfg.lm_lines > 0,
          "make_benchmark: sizes must be positive");
  Benchmark b;
  b.cfg = cfg;
  LanguageConfig src_cfg = cfg.source;
  src_cfg.seed = substream_seed(cfg.seed, "lang-src");
  src_cfg.relatedness = 0.0;
  b.source_lang = make_language(src_cfg);
  LanguageConfig tgt_cfg = cfg.target;
  tgt_cfg.seed = substream_seed(cfg.seed, "lang-tgt");
  b.target_lang = make_language(tgt_cfg, &b.source_lang);

  // LM corpus first; audio sentences are kept disjoint from it.
  std::set<std::string> lm_sentences;
  Rng lrng = substream(cfg.seed, "lmtext");
  b.lm_corpus.reserve(size_t(cfg.lm_lines));
  for (int i = 0; i < cfg.lm_lines; ++i) {
    auto words = sample_sentence(b.target_lang, lrng);
    std::string joined;
    for (size_t w = 0; w < words.size(); ++w) {
      if (w) joined += ' ';
      joined += words[w];
    }
    lm_sentences.insert(joined);
    b.lm_corpus.push_back(std::move(words));
  }
  std::set<std::string> lex;
  for (const auto& sent : b.lm_corpus)
    for (const auto& w : sent) lex.insert(w);
  b.lexicon_words.assign(lex.begin(), lex.end());

  b.source_train = make_split(b.source_lang, cfg.seed, "src-train", cfg.source_train_utts,
                              cfg.speakers, nullptr);
  b.source_dev =
      make_split(b.source_lang, cfg.seed, "src-dev", cfg.source_dev_utts, cfg.speakers, nullptr);
  b.target_train = make_split(b.target_lang, cfg.seed, "tgt-train", cfg.target_train_utts,
                              cfg.speakers, &lm_sentences);
  b.target_dev = make_split(b.target_lang, cfg.seed, "tgt-dev", cfg.target_dev_utts, cfg.speakers,
                            &lm_sentences);
  b.target_test = make_split(b.target_lang, cfg.seed, "tgt-test", cfg.target_test_utts,
                             cfg.speakers, &lm_sentences);
  return b;
}

// On-disk layout: manifests + features/ + lm_corpus.txt + lexicon.txt +
// tokens.txt + sealed reference side-file for the unlabeled split.
inline void save_benchmark(const Benchmark& b, const std::string& dir) {
  ensure_dir(dir);
  ensure_dir(dir + "/features");
  auto dump_split = [&](const std::vector<Utterance>& utts, const std::string& manifest,
                        bool with_refs) {
    std::vector<ManifestRecord> records;
    for (const auto& u : utts) {
      ManifestRecord r;
      r.id = u.id;
      r.features = "features/" + u.id + ".fea";
      if (with_refs) {
        std::string joined;
        for (size_t w = 0; w < u.words.size(); ++w) {
          if (w) joined += ' ';
          joined += u.words[w];
        }
        r.transcript = joined;
        r.has_transcript = true;
      }
      r.speaker = u.speaker;
      r.duration = u.feats.duration_sec;
      records.push_back(std::move(r));
      save_features(u.feats.feats, dir + "/features/" + u.id + ".fea");
    }
    save_manifest(records, dir + "/" + manifest);
  };
  dump_split(b.source_train, "source_train.jsonl", true);
  dump_split(b.source_dev, "source_dev.jsonl", true);
  dump_split(b.target_train, "target_train.jsonl", false);
  dump_split(b.target_dev, "target_dev.jsonl", true);
  dump_split(b.target_test, "target_test.jsonl", true);

  // Sealed references: evaluation-only side file, never read by training.
  {
    std::string out;
    for (const auto& u : b.target_train) {
      nlohmann::json j;
      j["id"] = u.id;
      std::string joined;
      for (size_t w = 0; w < u.words.size(); ++w) {
        if (w) joined += ' ';
        joined += u.words[w];
      }
      j["transcript"] = joined;
      out += j.dump();
      out += '\n';
    }
    write_text_file(dir + "/target_train_refs.sealed.jsonl", out);
  }
  {
    std::string out;
    for (const auto& sent : b.lm_corpus) {
      for (size_t w = 0; w < sent.size(); ++w) {
        if (w) out += ' ';
        out += sent[w];
      }
      out += '\n';
    }
    write_text_file(dir + "/lm_corpus.txt", out);
  }
  {
    std::string out;
    for (const auto& w : b.lexicon_words) {
      out += w;
      out += '\t';
      for (size_t i = 0; i < w.size(); ++i) {
        if (i) out += ' ';
        out += w[i];
      }
      out += '\n';
    }
    write_text_file(dir + "/lexicon.txt", out);
  }
  save_tokenset(b.target_lang.ts, dir + "/tokens.txt");
}

}  // namespace clpl
