#pragma once

// Exact CTC loss via log-space forward-backward, its gradient with respect
// to the unnormalized logits, and greedy decoding.

#include <vector>

#include "clpl/common.hpp"

namespace clpl {

struct LogitsMatrix {
  Matrix values;          // T x n_tokens
  int frame_subsample = 1;  // input frames per logit frame

  int frames() const { return values.rows; }
  int n_tokens() const { return values.cols; }
};

struct CtcResult {
  double loss = 0.0;
  Matrix grad;  // dloss/dlogits, same shape as the logits
};

// Minimum number of frames needed to emit `target` (blanks are forced
// between repeated labels).
inline int ctc_min_frames(const std::vector<int>& target) {
  int need = int(target.size());
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;
  return need;
}

inline bool ctc_feasible(const std::vector<int>& target, int frames) {
  return frames >= ctc_min_frames(target);
}

inline CtcResult ctc_loss(const LogitsMatrix& logits, const std::vector<int>& target,
                          int blank_id) {
  const Matrix& u = logits.values;
  const int T = u.rows;
  const int K = u.cols;
  require(T >= 1, "ctc_loss: empty logits");
  require(u.all_finite(), "ctc_loss: non-finite logits");
  require(blank_id >= 0 && blank_id < K, "ctc_loss: blank id out of range");
  for (int t : target)
    require(t >= 0 && t < K && t != blank_id, "ctc_loss: bad target token");
  if (!ctc_feasible(target, T)) {
    throw InfeasibleTarget("ctc_loss: target needs " + std::to_string(ctc_min_frames(target)) +
                           " frames, have " + std::to_string(T));
  }

  // Log-softmax per frame.
  Matrix lp(T, K);
  for (int t = 0; t < T; ++t) {
    double z = log_sum_exp(u.row(t));
    for (int k = 0; k < K; ++k) lp(t, k) = u(t, k) - z;
  }

  const int L = int(target.size());
  const int S = 2 * L + 1;
  auto label = [&](int s) { return (s % 2 == 0) ? blank_id : target[size_t(s / 2)]; };
  auto can_skip = [&](int s) {
    // A diagonal skip into state s is allowed when s is a label state whose
    // previous label differs.
    return s >= 2 && s % 2 == 1 && target[size_t(s / 2)] != target[size_t(s / 2) - 1];
  };

  Matrix alpha(T, S, kNegInf), beta(T, S, kNegInf);
  alpha(0, 0) = lp(0, blank_id);
  if (S > 1) alpha(0, 1) = lp(0, label(1));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_sum_exp(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_sum_exp(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, label(s));
    }
  }
  double log_z = alpha(T - 1, S - 1);
  if (S > 1) log_z = log_sum_exp(log_z, alpha(T - 1, S - 2));

  beta(T - 1, S - 1) = lp(T - 1, label(S - 1));
  if (S > 1) beta(T - 1, S - 2) = lp(T - 1, label(S - 2));
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double b = beta(t + 1, s);
      if (s + 1 < S) b = log_sum_exp(b, beta(t + 1, s + 1));
      if (s + 2 < S && can_skip(s + 2)) b = log_sum_exp(b, beta(t + 1, s + 2));
      beta(t, s) = b == kNegInf ? kNegInf : b + lp(t, label(s));
    }
  }

  CtcResult res;
  res.loss = -log_z;
  res.grad = Matrix(T, K);
  // Posterior over states: alpha*beta double-counts the frame emission.
  for (int t = 0; t < T; ++t) {
    std::vector<double> occ(size_t(K), kNegInf);
    for (int s = 0; s < S; ++s) {
      double g = alpha(t, s) + beta(t, s) - lp(t, label(s)) - log_z;
      if (g != kNegInf) occ[size_t(label(s))] = log_sum_exp(occ[size_t(label(s))], g);
    }
    for (int k = 0; k < K; ++k) {
      double post = occ[size_t(k)] == kNegInf ? 0.0 : std::exp(occ[size_t(k)]);
      res.grad(t, k) = std::exp(lp(t, k)) - post;
    }
  }
  return res;
}

// Per-frame argmax (ties to the lowest token id), collapse runs, drop blanks.
inline std::vector<int> greedy_decode(const LogitsMatrix& logits, int blank_id) {
  const Matrix& u = logits.values;
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < u.rows; ++t) {
    int best = 0;
    for (int k = 1; k < u.cols; ++k)
      if (u(t, k) > u(t, best)) best = k;
    if (best != prev && best != blank_id) out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace clpl
