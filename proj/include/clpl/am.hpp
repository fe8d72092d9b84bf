#pragma once

// Compact trainable acoustic model: strided temporal convolution, a stack of
// per-frame feed-forward residual blocks, and a linear head over the token
// set. Reverse-mode gradients are hand-written for this fixed architecture
// and checked against finite differences in the tests. Training uses Adagrad
// with linear learning-rate warmup.

#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "clpl/common.hpp"
#include "clpl/ctc.hpp"
#include "clpl/io.hpp"
#include "clpl/metrics.hpp"
#include "clpl/textnorm.hpp"

namespace clpl {

struct FeatureSequence {
  std::string id;
  Matrix feats;  // T x F
  double duration_sec = 0.0;
};

struct ArchSpec {
  int feat_dim = 8;
  int hidden = 40;
  int blocks = 2;
  int n_tokens = 0;
  int kernel = 7;
  int stride = 3;

  bool operator==(const ArchSpec& o) const {
    return feat_dim == o.feat_dim && hidden == o.hidden && blocks == o.blocks &&
           n_tokens == o.n_tokens && kernel == o.kernel && stride == o.stride;
  }
};

struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::string n, int r, int c) : name(std::move(n)), rows(r), cols(c), v(size_t(r) * c, 0.0) {}
  double& at(int r, int c) { return v[size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[size_t(r) * cols + c]; }
  size_t size() const { return v.size(); }
};

struct SpecAugmentConfig {
  int freq_masks = 1;
  int freq_mask_size = 2;
  int time_masks = 2;
  int time_mask_size = 8;
  double probability = 0.1;
};

struct TrainConfig {
  double lr = 0.03;
  int warmup = 100;
  int max_iterations = 600;
  int batch_frames = 2000;  // summed input frames per step
  double dropout = 0.1;
  SpecAugmentConfig specaug;
  bool specaug_enabled = true;
  int specaug_start = 0;  // step at which masking activates
  int eval_interval = 50;
  uint64_t seed = 1;

  void validate() const {
    require(lr >= 0 && warmup >= 0 && max_iterations >= 0 && batch_frames > 0,
            "TrainConfig: negative field");
    require(dropout >= 0 && dropout < 1, "TrainConfig: dropout in [0,1)");
    require(specaug.probability >= 0 && specaug.probability <= 1,
            "TrainConfig: mask probability in [0,1]");
  }
};

class AcousticModel {
 public:
  AcousticModel() = default;

  static AcousticModel init(const ArchSpec& spec, uint64_t seed) {
    require(spec.n_tokens >= 2, "AcousticModel: need at least two tokens");
    require(spec.kernel >= 1 && spec.stride >= 1, "AcousticModel: bad conv spec");
    AcousticModel m;
    m.spec_ = spec;
    m.params_.emplace_back("conv.w", spec.hidden, spec.kernel * spec.feat_dim);
    m.params_.emplace_back("conv.b", 1, spec.hidden);
    for (int b = 0; b < spec.blocks; ++b) {
      std::string p = "block" + std::to_string(b) + ".";
      m.params_.emplace_back(p + "w1", spec.hidden, spec.hidden);
      m.params_.emplace_back(p + "b1", 1, spec.hidden);
      m.params_.emplace_back(p + "w2", spec.hidden, spec.hidden);
      m.params_.emplace_back(p + "b2", 1, spec.hidden);
    }
    m.params_.emplace_back("head.w", spec.n_tokens, spec.hidden);
    m.params_.emplace_back("head.b", 1, spec.n_tokens);
    Rng rng(substream_seed(seed, "init"));
    for (auto& t : m.params_) {
      if (t.name.ends_with(".b") || t.name.ends_with(".b1") || t.name.ends_with(".b2")) continue;
      double scale = std::sqrt(2.0 / double(t.cols));
      for (auto& x : t.v) x = scale * rng.normal();
    }
    return m;
  }

  const ArchSpec& spec() const { return spec_; }
  int64_t step() const { return step_; }
  void set_step(int64_t s) { step_ = s; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  Tensor& param(const std::string& name) {
    for (auto& t : params_)
      if (t.name == name) return t;
    throw InvalidArgument("no parameter named " + name);
  }

  size_t n_params() const {
    size_t n = 0;
    for (auto& t : params_) n += t.size();
    return n;
  }

  int out_frames(int in_frames) const { return (in_frames + spec_.stride - 1) / spec_.stride; }

  struct Cache {
    int T = 0, To = 0;
    Matrix input;               // T x F (post-augmentation view)
    Matrix conv_pre;            // To x H, pre-activation
    std::vector<Matrix> block_in;   // To x H per block
    std::vector<Matrix> ff_pre;     // pre-relu
    std::vector<Matrix> ff_act;     // post-relu
    std::vector<Matrix> drop_mask;  // inverted dropout scaling, empty if unused
    Matrix head_in;             // To x H
  };

  // Deterministic given (params, input, rng state, train_mode); dropout only
  // fires in train_mode and draws from `rng`.
  LogitsMatrix forward(const Matrix& feats, bool train_mode = false, Rng* rng = nullptr,
                       double dropout = 0.0, Cache* cache = nullptr) const {
    require(feats.cols == spec_.feat_dim,
            "forward: feature width " + std::to_string(feats.cols) + " != model feat_dim " +
                std::to_string(spec_.feat_dim));
    require(feats.rows >= 1, "forward: empty features");
    const int T = feats.rows;
    const int To = out_frames(T);
    const int H = spec_.hidden;
    const int F = spec_.feat_dim;
    const int Kn = spec_.kernel;
    const int pad = (Kn - 1) / 2;

    const Tensor& cw = params_[0];
    const Tensor& cb = params_[1];
    Matrix act(To, H);
    Matrix conv_pre(To, H);
    for (int i = 0; i < To; ++i) {
      for (int h = 0; h < H; ++h) {
        double s = cb.at(0, h);
        for (int k = 0; k < Kn; ++k) {
          int j = i * spec_.stride - pad + k;
          if (j < 0 || j >= T) continue;
          const double* wrow = &cw.v[size_t(h) * cw.cols + size_t(k) * F];
          const double* xrow = &feats.data[size_t(j) * F];
          for (int f = 0; f < F; ++f) s += wrow[f] * xrow[f];
        }
        conv_pre(i, h) = s;
        act(i, h) = s > 0 ? s : 0;
      }
    }
    if (cache) {
      cache->T = T;
      cache->To = To;
      cache->input = feats;
      cache->conv_pre = conv_pre;
      cache->block_in.clear();
      cache->ff_pre.clear();
      cache->ff_act.clear();
      cache->drop_mask.clear();
    }

    for (int b = 0; b < spec_.blocks; ++b) {
      const Tensor& w1 = params_[size_t(2 + 4 * b)];
      const Tensor& b1 = params_[size_t(3 + 4 * b)];
      const Tensor& w2 = params_[size_t(4 + 4 * b)];
      const Tensor& b2 = params_[size_t(5 + 4 * b)];
      Matrix pre(To, H), hid(To, H), out(To, H);
      for (int i = 0; i < To; ++i) {
        for (int h = 0; h < H; ++h) {
          double s = b1.at(0, h);
          const double* wrow = &w1.v[size_t(h) * H];
          const double* arow = &act.data[size_t(i) * H];
          for (int j = 0; j < H; ++j) s += wrow[j] * arow[j];
          pre(i, h) = s;
          hid(i, h) = s > 0 ? s : 0;
        }
      }
      Matrix mask;
      bool use_dropout = train_mode && dropout > 0.0 && rng != nullptr;
      if (use_dropout) {
        mask = Matrix(To, H);
        for (auto& v : mask.data) v = rng->bernoulli(dropout) ? 0.0 : 1.0 / (1.0 - dropout);
      }
      for (int i = 0; i < To; ++i) {
        for (int h = 0; h < H; ++h) {
          double s = b2.at(0, h);
          const double* wrow = &w2.v[size_t(h) * H];
          const double* hrow = &hid.data[size_t(i) * H];
          for (int j = 0; j < H; ++j) s += wrow[j] * hrow[j];
          if (use_dropout) s *= mask(i, h);
          out(i, h) = act(i, h) + s;  // residual
        }
      }
      if (cache) {
        cache->block_in.push_back(act);
        cache->ff_pre.push_back(pre);
        cache->ff_act.push_back(hid);
        cache->drop_mask.push_back(use_dropout ? mask : Matrix());
      }
      act = std::move(out);
    }

    const Tensor& hw = params_[params_.size() - 2];
    const Tensor& hb = params_.back();
    LogitsMatrix lg;
    lg.values = Matrix(To, spec_.n_tokens);
    lg.frame_subsample = spec_.stride;
    for (int i = 0; i < To; ++i) {
      for (int k = 0; k < spec_.n_tokens; ++k) {
        double s = hb.at(0, k);
        const double* wrow = &hw.v[size_t(k) * H];
        const double* arow = &act.data[size_t(i) * H];
        for (int j = 0; j < H; ++j) s += wrow[j] * arow[j];
        lg.values(i, k) = s;
      }
    }
    if (cache) cache->head_in = act;
    return lg;
  }

  // Gradients with respect to every parameter, accumulated into `grads`
  // (same tensor layout as params()).
  void backward(const Cache& cache, const Matrix& grad_logits,
                std::vector<Tensor>& grads) const {
    const int To = cache.To;
    const int H = spec_.hidden;
    const int F = spec_.feat_dim;
    const int Kn = spec_.kernel;
    const int pad = (Kn - 1) / 2;

    const Tensor& hw = params_[params_.size() - 2];
    Tensor& ghw = grads[grads.size() - 2];
    Tensor& ghb = grads.back();
    Matrix dact(To, H);
    for (int i = 0; i < To; ++i) {
      for (int k = 0; k < spec_.n_tokens; ++k) {
        double g = grad_logits(i, k);
        if (g == 0.0) continue;
        ghb.at(0, k) += g;
        for (int j = 0; j < H; ++j) {
          ghw.v[size_t(k) * H + j] += g * cache.head_in(i, j);
          dact(i, j) += g * hw.v[size_t(k) * H + j];
        }
      }
    }

    for (int b = spec_.blocks - 1; b >= 0; --b) {
      const Tensor& w1 = params_[size_t(2 + 4 * b)];
      const Tensor& w2 = params_[size_t(4 + 4 * b)];
      Tensor& gw1 = grads[size_t(2 + 4 * b)];
      Tensor& gb1 = grads[size_t(3 + 4 * b)];
      Tensor& gw2 = grads[size_t(4 + 4 * b)];
      Tensor& gb2 = grads[size_t(5 + 4 * b)];
      const Matrix& a_in = cache.block_in[size_t(b)];
      const Matrix& pre = cache.ff_pre[size_t(b)];
      const Matrix& hid = cache.ff_act[size_t(b)];
      const Matrix& mask = cache.drop_mask[size_t(b)];
      bool has_mask = mask.rows > 0;

      Matrix din(To, H);
      for (int i = 0; i < To; ++i) {
        // Residual: gradient reaches both the block input and its output.
        std::vector<double> dout(static_cast<size_t>(H));
        for (int h = 0; h < H; ++h) {
          double g = dact(i, h);
          din(i, h) += g;
          dout[size_t(h)] = has_mask ? g * mask(i, h) : g;
        }
        std::vector<double> dhid(static_cast<size_t>(H), 0.0);
        for (int h = 0; h < H; ++h) {
          double g = dout[size_t(h)];
          if (g == 0.0) continue;
          gb2.at(0, h) += g;
          for (int j = 0; j < H; ++j) {
            gw2.v[size_t(h) * H + j] += g * hid(i, j);
            dhid[size_t(j)] += g * w2.v[size_t(h) * H + j];
          }
        }
        for (int h = 0; h < H; ++h) {
          double g = pre(i, h) > 0 ? dhid[size_t(h)] : 0.0;
          if (g == 0.0) continue;
          gb1.at(0, h) += g;
          for (int j = 0; j < H; ++j) {
            gw1.v[size_t(h) * H + j] += g * a_in(i, j);
            din(i, j) += g * w1.v[size_t(h) * H + j];
          }
        }
      }
      dact = std::move(din);
    }

    Tensor& gcw = grads[0];
    Tensor& gcb = grads[1];
    for (int i = 0; i < To; ++i) {
      for (int h = 0; h < H; ++h) {
        double g = cache.conv_pre(i, h) > 0 ? dact(i, h) : 0.0;
        if (g == 0.0) continue;
        gcb.at(0, h) += g;
        for (int k = 0; k < Kn; ++k) {
          int j = i * spec_.stride - pad + k;
          if (j < 0 || j >= cache.T) continue;
          double* wrow = &gcw.v[size_t(h) * gcw.cols + size_t(k) * F];
          const double* xrow = &cache.input.data[size_t(j) * F];
          for (int f = 0; f < F; ++f) wrow[f] += g * xrow[f];
        }
      }
    }
  }

  std::vector<Tensor> zero_grads() const {
    std::vector<Tensor> g;
    g.reserve(params_.size());
    for (auto& t : params_) g.emplace_back(t.name, t.rows, t.cols);
    return g;
  }

  uint64_t param_hash() const {
    uint64_t h = kFnvOffset;
    for (auto& t : params_) {
      h = fnv1a64(t.name, h);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.v.data()),
                                   t.v.size() * sizeof(double)),
                  h);
    }
    return h;
  }

 private:
  ArchSpec spec_;
  int64_t step_ = 0;
  std::vector<Tensor> params_;

  friend AcousticModel load_checkpoint(const std::string&);
};

// ---------------------------------------------------------------------------
// Adagrad

class Adagrad {
 public:
  Adagrad(const AcousticModel& model, double lr, int warmup, double eps = 1e-8)
      : lr_(lr), warmup_(warmup), eps_(eps), accum_(model.zero_grads()) {}

  // Accumulate squared gradients, then step scaled by the warmed-up rate.
  void step(AcousticModel& model, const std::vector<Tensor>& grads) {
    int64_t t = model.step() + 1;
    double rate = lr_;
    if (warmup_ > 0 && t < warmup_) rate = lr_ * double(t) / double(warmup_);
    auto& params = model.params();
    for (size_t p = 0; p < params.size(); ++p) {
      auto& acc = accum_[p].v;
      auto& w = params[p].v;
      const auto& g = grads[p].v;
      for (size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(g[i])) throw DivergedError("Adagrad: non-finite gradient");
        acc[i] += g[i] * g[i];
        if (g[i] != 0.0) w[i] -= rate * g[i] / (std::sqrt(acc[i]) + eps_);
      }
    }
    model.set_step(t);
  }

 private:
  double lr_;
  int warmup_;
  double eps_;
  std::vector<Tensor> accum_;
};

// ---------------------------------------------------------------------------
// SpecAugment

// Each mask fires with config probability; its width is uniform in
// [0, mask_size] and its start uniform over the valid range.
inline FeatureSequence spec_augment(const FeatureSequence& in, const SpecAugmentConfig& cfg,
                                    Rng& rng) {
  FeatureSequence out = in;
  const int T = out.feats.rows;
  const int F = out.feats.cols;
  const int fsize = std::min(cfg.freq_mask_size, F);
  const int tsize = std::min(cfg.time_mask_size, T);
  for (int m = 0; m < cfg.freq_masks; ++m) {
    bool fire = rng.bernoulli(cfg.probability);
    int w = rng.range(0, fsize);
    int start = rng.range(0, F - w);
    if (!fire || w == 0) continue;
    for (int t = 0; t < T; ++t)
      for (int f = start; f < start + w; ++f) out.feats(t, f) = 0.0;
  }
  for (int m = 0; m < cfg.time_masks; ++m) {
    bool fire = rng.bernoulli(cfg.probability);
    int w = rng.range(0, tsize);
    int start = rng.range(0, T - w);
    if (!fire || w == 0) continue;
    for (int t = start; t < start + w; ++t)
      for (int f = 0; f < F; ++f) out.feats(t, f) = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned header plus named little-endian float64 tensors.

inline std::string checkpoint_bytes(const AcousticModel& model) {
  std::string out = "CLPLAM1\n";
  const ArchSpec& s = model.spec();
  out += "feat_dim " + std::to_string(s.feat_dim) + "\n";
  out += "hidden " + std::to_string(s.hidden) + "\n";
  out += "blocks " + std::to_string(s.blocks) + "\n";
  out += "n_tokens " + std::to_string(s.n_tokens) + "\n";
  out += "kernel " + std::to_string(s.kernel) + "\n";
  out += "stride " + std::to_string(s.stride) + "\n";
  out += "step " + std::to_string(model.step()) + "\n";
  out += "tensors " + std::to_string(model.params().size()) + "\n";
  for (const auto& t : model.params()) {
    out += t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) + "\n";
    for (double v : t.v) put_le(out, v);
  }
  return out;
}

inline void save_checkpoint(const AcousticModel& model, const std::string& path) {
  std::string bytes = checkpoint_bytes(model);
  write_binary_file(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Supervised training

struct LabeledUtterance {
  FeatureSequence feats;
  std::vector<int> target;               // token ids, word boundaries included
  std::vector<std::string> ref_words;    // for WER evaluation
};

struct EvalSet {
  std::vector<FeatureSequence> feats;
  std::vector<std::vector<std::string>> refs;

  size_t size() const { return feats.size(); }
};

inline double greedy_eval_wer(const AcousticModel& model, const EvalSet& dev,
                              const TokenSet& ts, int workers = 1) {
  require(!dev.feats.empty(), "greedy_eval_wer: empty eval set");
  std::vector<ErrorRateReport> reports(dev.size());
  parallel_for(int(dev.size()), workers, [&](int i) {
    LogitsMatrix lg = model.forward(dev.feats[size_t(i)].feats);
    auto words = words_from_tokens(greedy_decode(lg, ts.blank_id), ts);
    reports[size_t(i)] = wer(words, dev.refs[size_t(i)]);
  });
  ErrorRateReport total;
  for (auto& r : reports) total.accumulate(r);
  return total.rate();
}

struct TrainStats {
  int64_t steps = 0;
  int64_t skipped_infeasible = 0;
  double best_dev_wer = kInf;
  int64_t best_step = 0;
  std::vector<std::pair<int64_t, double>> dev_history;   // (step, wer)
  std::vector<double> loss_history;                      // mean loss per step
};

// One gradient step over a batch of utterances. Returns the mean loss.
// Gradients are averaged over the batch; a non-finite gradient aborts with
// the offending utterance id.
inline double train_step(AcousticModel& model, Adagrad& opt,
                         const std::vector<const LabeledUtterance*>& batch,
                         const TrainConfig& cfg, bool augment, Rng& rng, int blank_id) {
  auto grads = model.zero_grads();
  double loss_sum = 0.0;
  const double inv = 1.0 / double(batch.size());
  for (const LabeledUtterance* utt : batch) {
    const Matrix* input = &utt->feats.feats;
    FeatureSequence masked;
    if (augment && cfg.specaug_enabled) {
      masked = spec_augment(utt->feats, cfg.specaug, rng);
      input = &masked.feats;
    }
    AcousticModel::Cache cache;
    LogitsMatrix lg = model.forward(*input, true, &rng, cfg.dropout, &cache);
    if (!lg.values.all_finite())
      throw DivergedError("non-finite logits at utterance " + utt->feats.id);
    CtcResult ctc = ctc_loss(lg, utt->target, blank_id);
    if (!std::isfinite(ctc.loss) || !ctc.grad.all_finite()) {
      throw DivergedError("non-finite CTC gradient at utterance " + utt->feats.id);
    }
    loss_sum += ctc.loss;
    for (auto& v : ctc.grad.data) v *= inv;
    model.backward(cache, ctc.grad, grads);
  }
  for (auto& t : grads)
    for (double v : t.v)
      if (!std::isfinite(v)) throw DivergedError("non-finite parameter gradient in batch");
  opt.step(model, grads);
  return loss_sum * inv;
}

// Batches are assembled by summed input frames in epoch-shuffled order.
// Returns the checkpoint with the best greedy dev WER.
inline AcousticModel train_supervised(const AcousticModel& init,
                                      const std::vector<LabeledUtterance>& data,
                                      const EvalSet& dev, const TrainConfig& cfg,
                                      const TokenSet& ts, TrainStats* stats = nullptr,
                                      int workers = 1) {
  cfg.validate();
  require(!data.empty(), "train_supervised: empty dataset");

  std::vector<const LabeledUtterance*> usable;
  int64_t skipped = 0;
  for (const auto& u : data) {
    int to = init.out_frames(u.feats.feats.rows);
    if (u.target.empty() || !ctc_feasible(u.target, to)) {
      ++skipped;
      continue;
    }
    usable.push_back(&u);
  }
  require(!usable.empty(), "train_supervised: no feasible utterances");

  AcousticModel model = init;
  Adagrad opt(model, cfg.lr, cfg.warmup);
  TrainStats st;
  st.skipped_infeasible = skipped;
  AcousticModel best = model;

  auto evaluate = [&](int64_t step) {
    if (dev.feats.empty()) return;
    double w = greedy_eval_wer(model, dev, ts, workers);
    st.dev_history.emplace_back(step, w);
    if (w < st.best_dev_wer) {
      st.best_dev_wer = w;
      st.best_step = step;
      best = model;
    }
  };

  std::vector<size_t> order(usable.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();  // force shuffle at first use
  int64_t epoch = 0;
  for (int64_t step = 0; step < cfg.max_iterations; ++step) {
    std::vector<const LabeledUtterance*> batch;
    int64_t frames = 0;
    while (frames < cfg.batch_frames) {
      if (cursor >= order.size()) {
        Rng shuffle_rng = substream(cfg.seed, "data", uint64_t(epoch++));
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const LabeledUtterance* u = usable[order[cursor++]];
      batch.push_back(u);
      frames += u->feats.feats.rows;
    }
    Rng rng = substream(cfg.seed, "augment", uint64_t(step));
    bool augment = step >= cfg.specaug_start;
    double loss = train_step(model, opt, batch, cfg, augment, rng, ts.blank_id);
    st.loss_history.push_back(loss);
    if (cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0) evaluate(step + 1);
  }
  if (st.dev_history.empty() || st.dev_history.back().first != cfg.max_iterations)
    evaluate(cfg.max_iterations);
  st.steps = cfg.max_iterations;
  if (stats) *stats = st;
  return dev.feats.empty() ? model : best;
}

inline AcousticModel load_checkpoint(const std::string& path) {
  auto bytes = read_binary_file(path);
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw ParseError("checkpoint truncated", 0);
    std::string line(reinterpret_cast<const char*>(&bytes[start]), pos - start);
    ++pos;
    return line;
  };
  if (next_line() != "CLPLAM1") throw ParseError("bad checkpoint magic", 1);
  auto field = [&](const std::string& key) -> int64_t {
    std::string line = next_line();
    if (line.rfind(key + " ", 0) != 0) throw ParseError("expected checkpoint field " + key, 0);
    return std::atoll(line.c_str() + key.size() + 1);
  };
  AcousticModel m;
  m.spec_.feat_dim = int(field("feat_dim"));
  m.spec_.hidden = int(field("hidden"));
  m.spec_.blocks = int(field("blocks"));
  m.spec_.n_tokens = int(field("n_tokens"));
  m.spec_.kernel = int(field("kernel"));
  m.spec_.stride = int(field("stride"));
  m.step_ = field("step");
  int64_t n_tensors = field("tensors");
  for (int64_t i = 0; i < n_tensors; ++i) {
    std::string line = next_line();
    size_t a = line.find(' ');
    size_t b = line.find(' ', a + 1);
    if (a == std::string::npos || b == std::string::npos)
      throw ParseError("bad tensor header in checkpoint", 0);
    Tensor t(line.substr(0, a), std::atoi(line.c_str() + a + 1), std::atoi(line.c_str() + b + 1));
    size_t need = t.size() * sizeof(double);
    if (pos + need > bytes.size()) throw ParseError("checkpoint truncated in tensor data", 0);
    std::memcpy(t.v.data(), &bytes[pos], need);
    pos += need;
    m.params_.push_back(std::move(t));
  }
  return m;
}

}  // namespace clpl
