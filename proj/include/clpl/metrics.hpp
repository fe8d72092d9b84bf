#pragma once

// Word and character error rates via Levenshtein alignment with unit costs.
// Tie-breaking during backtrace prefers substitution over insertion over
// deletion, so the S/I/D split is deterministic.

#include <string>
#include <vector>

#include "clpl/common.hpp"
#include "clpl/textnorm.hpp"

namespace clpl {

struct ErrorRateReport {
  int64_t substitutions = 0;
  int64_t insertions = 0;
  int64_t deletions = 0;
  int64_t ref_len = 0;

  int64_t edits() const { return substitutions + insertions + deletions; }
  double rate() const {
    require(ref_len > 0, "error rate undefined: empty reference");
    return double(edits()) / double(ref_len);
  }
  void accumulate(const ErrorRateReport& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_len += o.ref_len;
  }
};

// hyp along rows, ref along columns. Insertion = extra hyp symbol,
// deletion = missing ref symbol.
template <typename T>
ErrorRateReport edit_distance(const std::vector<T>& hyp, const std::vector<T>& ref) {
  if (ref.empty()) throw InvalidArgument("edit_distance: empty reference");
  const size_t m = hyp.size(), n = ref.size();
  std::vector<std::vector<int>> d(m + 1, std::vector<int>(n + 1, 0));
  for (size_t i = 0; i <= m; ++i) d[i][0] = int(i);
  for (size_t j = 0; j <= n; ++j) d[0][j] = int(j);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      int sub = d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      int ins = d[i - 1][j] + 1;
      int del = d[i][j - 1] + 1;
      d[i][j] = std::min(sub, std::min(ins, del));
    }
  }
  ErrorRateReport rep;
  rep.ref_len = int64_t(n);
  size_t i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] && hyp[i - 1] == ref[j - 1]) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      ++rep.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++rep.insertions;
      --i;
    } else {
      ++rep.deletions;
      --j;
    }
  }
  return rep;
}

inline ErrorRateReport wer(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref) {
  return edit_distance(hyp, ref);
}

// Characters with the word boundary counted as a symbol of its own.
inline ErrorRateReport cer(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref) {
  auto expand = [](const std::vector<std::string>& words) {
    std::vector<char32_t> out;
    for (size_t i = 0; i < words.size(); ++i) {
      if (i) out.push_back(0);  // boundary symbol
      for (char32_t cp : utf8_decode(words[i])) out.push_back(cp);
    }
    return out;
  };
  auto h = expand(hyp);
  auto r = expand(ref);
  if (r.empty()) throw InvalidArgument("cer: empty reference");
  return edit_distance(h, r);
}

}  // namespace clpl
