#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "clpl/ctc.hpp"
#include "clpl/decoder.hpp"
#include "support/oracles.hpp"

using namespace clpl;

namespace {

// Three one-letter words over a three-character alphabet; order-4 LM so
// every short word sequence owns a distinct LM state.
struct TinyWorld {
  TokenSet ts = alphabet_tokenset(3);
  Lexicon lexicon;
  NGramModel lm;

  TinyWorld() {
    lexicon = lexicon_from_words({"a", "b", "c"}, ts);
    NgramOptions opts;
    opts.order = 4;
    lm = train_ngram({{"a", "b"}, {"b", "c"}, {"a"}, {"c", "a", "b"}, {"b", "b"}}, opts);
  }
};

Matrix random_logits(Rng& rng, int T, int K, double scale = 1.4) {
  Matrix m(T, K);
  for (auto& v : m.data) v = scale * rng.normal();
  return m;
}

void check_against_oracle(const TinyWorld& w, const Matrix& logits, double alpha, double beta) {
  DecodeParams params;
  params.alpha = alpha;
  params.beta = beta;
  params.beam_size = 100000;  // saturating
  auto results = beam_decode(LogitsMatrix{logits, 1}, w.lexicon, w.lm, w.ts, params);
  auto oracle = oracles::brute_force_decode(logits, w.ts, w.lexicon.words, w.lm, alpha, beta);
  REQUIRE(!results.empty());
  CHECK(results.front().words == oracle.best_words);
  CHECK(results.front().total ==
        Catch::Approx(oracle.best_score).epsilon(1e-9).margin(1e-12));
  // Every reported hypothesis carries the exact per-sequence score.
  for (const auto& r : results) {
    auto it = oracle.scores.find(r.words);
    REQUIRE(it != oracle.scores.end());
    CHECK(r.total == Catch::Approx(it->second).epsilon(1e-9).margin(1e-12));
  }
}

}  // namespace

TEST_CASE("beam search equals the brute-force maximizer without LM") {
  TinyWorld w;
  Rng rng(1001);
  for (int iter = 0; iter < 30; ++iter) {
    int T = rng.range(1, 4);
    Matrix logits = random_logits(rng, T, w.ts.n_tokens());
    check_against_oracle(w, logits, 0.0, 0.0);
  }
}

TEST_CASE("beam search equals the brute-force maximizer with the LM term") {
  TinyWorld w;
  Rng rng(1002);
  for (int iter = 0; iter < 30; ++iter) {
    int T = rng.range(1, 4);
    Matrix logits = random_logits(rng, T, w.ts.n_tokens());
    double alpha = rng.uniform(0.3, 2.0);
    double beta = rng.uniform(-1.0, 1.0);
    check_against_oracle(w, logits, alpha, beta);
  }
}

TEST_CASE("blank-saturated logits decode to the empty transcript") {
  TinyWorld w;
  Matrix logits(4, w.ts.n_tokens(), -8.0);
  for (int t = 0; t < 4; ++t) logits(t, w.ts.blank_id) = 8.0;
  DecodeParams params;
  auto results = beam_decode(LogitsMatrix{logits, 1}, w.lexicon, w.lm, w.ts, params);
  CHECK(results.front().words.empty());
}

TEST_CASE("acoustically tied words follow the LM at high alpha") {
  TokenSet ts = alphabet_tokenset(3);
  Lexicon lexicon = lexicon_from_words({"a", "b"}, ts);
  NgramOptions opts;
  opts.order = 4;
  // "b" dominates the text.
  NGramModel lm = train_ngram({{"b"}, {"b"}, {"b"}, {"b"}, {"b"}, {"b"}, {"a"}}, opts);
  Matrix logits(2, ts.n_tokens(), -6.0);
  logits(0, ts.char_id(U'a')) = 3.0;
  logits(0, ts.char_id(U'b')) = 3.0;  // tie
  logits(1, ts.wb_id) = 6.0;
  DecodeParams params;
  params.alpha = 5.0;
  auto results = beam_decode(LogitsMatrix{logits, 1}, lexicon, lm, ts, params);
  REQUIRE(!results.front().words.empty());
  CHECK(results.front().words[0] == "b");
  // The oracle agrees.
  auto oracle = oracles::brute_force_decode(logits, ts, lexicon.words, lm, 5.0, 0.0);
  CHECK(results.front().words == oracle.best_words);
}

TEST_CASE("best score is monotone in beam size") {
  TinyWorld w;
  Rng rng(1003);
  for (int iter = 0; iter < 10; ++iter) {
    Matrix logits = random_logits(rng, 4, w.ts.n_tokens());
    DecodeParams params;
    params.alpha = 1.0;
    double prev = kNegInf;
    for (int beam : {1, 2, 4, 8, 16, 64, 1024}) {
      params.beam_size = beam;
      auto results = beam_decode(LogitsMatrix{logits, 1}, w.lexicon, w.lm, w.ts, params);
      CHECK(results.front().total >= prev - 1e-12);
      prev = std::max(prev, results.front().total);
    }
  }
}

TEST_CASE("beam one follows the greedy path when it is in the lexicon") {
  TinyWorld w;
  Rng rng(1004);
  int tested = 0;
  while (tested < 20) {
    // Peaked logits so the argmax path dominates every frame.
    int T = rng.range(2, 6);
    Matrix logits(T, w.ts.n_tokens());
    for (auto& v : logits.data) v = -6.0 + 0.01 * rng.normal();
    for (int t = 0; t < T; ++t) logits(t, rng.range(0, w.ts.n_tokens() - 1)) = 6.0;
    auto greedy_words = words_from_tokens(
        greedy_decode(LogitsMatrix{logits, 1}, w.ts.blank_id), w.ts);
    // Premise: greedy output must be a closed in-lexicon word sequence.
    bool in_lex = true;
    for (auto& word : greedy_words) {
      bool found = false;
      for (auto& lw : w.lexicon.words) found |= (lw == word);
      in_lex &= found;
    }
    auto greedy_tokens = greedy_decode(LogitsMatrix{logits, 1}, w.ts.blank_id);
    bool closed = greedy_tokens.empty() || greedy_tokens.back() == w.ts.wb_id;
    if (!in_lex || !closed) continue;
    DecodeParams params;
    params.alpha = 0.0;
    params.beta = 0.0;
    params.beam_size = 1;
    auto results = beam_decode(LogitsMatrix{logits, 1}, w.lexicon, w.lm, w.ts, params);
    CHECK(results.front().words == greedy_words);
    ++tested;
  }
}

TEST_CASE("shifting every word LM score is equivalent to adjusting beta") {
  TinyWorld w;
  Rng rng(1005);
  const double c10 = 0.35;                 // shift in log10
  const double c_ln = c10 * 2.302585092994045684;
  NGramModel shifted = w.lm;
  for (auto& order_map : shifted.grams_)
    for (auto& [key, e] : order_map) e.logp += c10;
  for (int iter = 0; iter < 10; ++iter) {
    Matrix logits = random_logits(rng, 4, w.ts.n_tokens());
    DecodeParams base;
    base.alpha = 1.3;
    base.beta = 0.4;
    base.beam_size = 100000;
    DecodeParams adjusted = base;
    adjusted.beta = base.beta - base.alpha * c_ln;
    auto r1 = beam_decode(LogitsMatrix{logits, 1}, w.lexicon, w.lm, w.ts, base);
    auto r2 = beam_decode(LogitsMatrix{logits, 1}, w.lexicon, shifted, w.ts, adjusted);
    REQUIRE(r1.size() == r2.size());
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i].words == r2[i].words);
  }
}

TEST_CASE("unknown words are rejected at the default unk score") {
  TokenSet ts = alphabet_tokenset(3);
  Lexicon lexicon = lexicon_from_words({"a", "c"}, ts);
  NgramOptions opts;
  opts.order = 2;
  NGramModel lm = train_ngram({{"a"}, {"a"}}, opts);  // "c" is OOV to the LM
  Matrix logits(2, ts.n_tokens(), -6.0);
  logits(0, ts.char_id(U'c')) = 6.0;
  logits(1, ts.wb_id) = 6.0;
  DecodeParams params;
  params.alpha = 1.0;
  auto rejected = beam_decode(LogitsMatrix{logits, 1}, lexicon, lm, ts, params);
  for (const auto& r : rejected)
    for (const auto& word : r.words) CHECK(word != "c");  // never hypothesized
  params.unk_log_score = -2.0;  // finite score admits it
  auto admitted = beam_decode(LogitsMatrix{logits, 1}, lexicon, lm, ts, params);
  REQUIRE(!admitted.front().words.empty());
  CHECK(admitted.front().words[0] == "c");
}

TEST_CASE("empty lexicon is an error") {
  TinyWorld w;
  Lexicon empty;
  empty.nodes.emplace_back();
  Matrix logits(2, w.ts.n_tokens(), 0.0);
  DecodeParams params;
  CHECK_THROWS_AS(beam_decode(LogitsMatrix{logits, 1}, empty, w.lm, w.ts, params),
                  InvalidArgument);
}

TEST_CASE("lexicon construction and file round-trip") {
  TokenSet ts = latin_tokenset();
  Lexicon lex = lexicon_from_words({"cab", "ab", "a"}, ts);
  CHECK(lex.words == std::vector<std::string>{"a", "ab", "cab"});  // sorted
  CHECK(lex.child(0, ts.char_id(U'a')) > 0);

  std::string path = std::filesystem::temp_directory_path() / "clpl_test_lex.txt";
  write_text_file(path, save_lexicon_string(lex, ts));
  Lexicon back = load_lexicon(path, ts);
  CHECK(back.words == lex.words);
  CHECK(back.spellings == lex.spellings);
  std::remove(path.c_str());

  CHECK_THROWS_AS(lexicon_from_words({"a", "a"}, ts), InvalidArgument);  // duplicate
  CHECK_THROWS_AS(lexicon_from_words({"x9"}, ts), InvalidArgument);      // unspellable
}

TEST_CASE("lexicon file parse errors carry line numbers") {
  TokenSet ts = latin_tokenset();
  std::string path = std::filesystem::temp_directory_path() / "clpl_test_badlex.txt";
  write_text_file(path, "word with no tab\n");
  CHECK_THROWS_AS(load_lexicon(path, ts), ParseError);
  write_text_file(path, "ok\to k\nbad\tq 9\n");
  CHECK_THROWS_AS(load_lexicon(path, ts), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("tune: single trial returns that trial") {
  TinyWorld w;
  Rng rng(1006);
  std::vector<Matrix> logits;
  std::vector<std::vector<std::string>> refs;
  for (int i = 0; i < 4; ++i) {
    logits.push_back(random_logits(rng, 3, w.ts.n_tokens()));
    refs.push_back({"a"});
  }
  auto provider = [&](size_t i) { return LogitsMatrix{logits[i], 1}; };
  DecodeParams base;
  TuneBox box;
  auto res = tune_decode_params(provider, logits.size(), refs, w.lexicon, w.lm, w.ts, base, box,
                                1, 99);
  CHECK(res.trial == 0);
  CHECK(res.tried.size() == 1);
  CHECK(res.params.alpha == Catch::Approx(res.tried[0].first));

  CHECK_THROWS_AS(tune_decode_params(provider, logits.size(), refs, w.lexicon, w.lm, w.ts, base,
                                     box, 0, 99),
                  InvalidArgument);
}

TEST_CASE("tune: constant WER surface keeps the first trial") {
  TinyWorld w;
  // All-blank logits decode to the empty transcript for any (alpha, beta),
  // so the WER surface is flat at 1.0.
  Matrix logits(3, w.ts.n_tokens(), -6.0);
  for (int t = 0; t < 3; ++t) logits(t, w.ts.blank_id) = 6.0;
  std::vector<std::vector<std::string>> refs{{"a"}, {"b"}};
  auto provider = [&](size_t) { return LogitsMatrix{logits, 1}; };
  DecodeParams base;
  TuneBox box;
  auto res = tune_decode_params(provider, 2, refs, w.lexicon, w.lm, w.ts, base, box, 16, 7);
  CHECK(res.trial == 0);
  CHECK(res.wer == Catch::Approx(1.0));
  CHECK(res.params.alpha == Catch::Approx(res.tried[0].first));
  CHECK(res.params.beta == Catch::Approx(res.tried[0].second));
}

TEST_CASE("tune is deterministic given the seed") {
  TinyWorld w;
  Rng rng(1007);
  std::vector<Matrix> logits;
  std::vector<std::vector<std::string>> refs;
  for (int i = 0; i < 3; ++i) {
    logits.push_back(random_logits(rng, 4, w.ts.n_tokens()));
    refs.push_back({"b"});
  }
  auto provider = [&](size_t i) { return LogitsMatrix{logits[i], 1}; };
  DecodeParams base;
  TuneBox box;
  auto r1 = tune_decode_params(provider, 3, refs, w.lexicon, w.lm, w.ts, base, box, 8, 42);
  auto r2 = tune_decode_params(provider, 3, refs, w.lexicon, w.lm, w.ts, base, box, 8, 42, 4);
  CHECK(r1.tried == r2.tried);
  CHECK(r1.trial == r2.trial);
  CHECK(r1.wer == r2.wer);
}
