// SPDX-License-Identifier: Apache-2.0
#include "dynasc/codec_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "codec_internal.hpp"
#include "dynasc/errors.hpp"

namespace dynasc {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct StageOffsets {
  std::size_t enc_w, enc_b, pred_w1, pred_b1, pred_w2, pred_b2;
};

struct ParamOffsets {
  std::size_t embed_w, embed_b, mask;
  std::vector<StageOffsets> stage;
  std::size_t dec_w1, dec_b1, dec_w2, dec_b2, out_w, out_b;
};

ParamOffsets collect_offsets(const CodecParams& params) {
  ParamOffsets off;
  off.embed_w = params.view("embed.w").offset;
  off.embed_b = params.view("embed.b").offset;
  off.mask = params.view("mask").offset;
  for (int m = 1; m <= params.dims().stages; ++m) {
    const std::string tag = std::to_string(m);
    off.stage.push_back({params.view("enc" + tag + ".w").offset,
                         params.view("enc" + tag + ".b").offset,
                         params.view("pred" + tag + ".w1").offset,
                         params.view("pred" + tag + ".b1").offset,
                         params.view("pred" + tag + ".w2").offset,
                         params.view("pred" + tag + ".b2").offset});
  }
  off.dec_w1 = params.view("dec1.w").offset;
  off.dec_b1 = params.view("dec1.b").offset;
  off.dec_w2 = params.view("dec2.w").offset;
  off.dec_b2 = params.view("dec2.b").offset;
  off.out_w = params.view("out.w").offset;
  off.out_b = params.view("out.b").offset;
  return off;
}

void softmax_inplace(const double* v, int d, std::vector<double>& p) {
  const double hi = *std::max_element(v, v + d);
  double z = 0.0;
  for (int i = 0; i < d; ++i) {
    p[i] = std::exp(v[i] - hi);
    z += p[i];
  }
  for (int i = 0; i < d; ++i) p[i] /= z;
}

// log(1 + e^{-|s|}) + max(s, 0) - s * target, the overflow-safe logistic
// cross entropy in the logit.
double bce_from_logit(double logit, double target) {
  return std::log1p(std::exp(-std::abs(logit))) + std::max(logit, 0.0) - logit * target;
}

// Squared distance of a patch from a flat frame-mean fill: the
// reconstruction cost of discarding it outright, used as the predictor's
// parameter-free ranking target.
std::vector<double> drop_costs(const PatchGrid& patches) {
  const int n = patches.count();
  const int d = patches.patch_dim();
  double mean = 0.0;
  for (int k = 0; k < n; ++k) {
    const double* p = patches.patch(k);
    for (int i = 0; i < d; ++i) mean += p[i];
  }
  mean /= static_cast<double>(n) * d;
  std::vector<double> cost(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    const double* p = patches.patch(k);
    for (int i = 0; i < d; ++i) {
      const double diff = p[i] - mean;
      cost[k] += diff * diff;
    }
  }
  return cost;
}

}  // namespace

StepPlan draw_step_plan(int images, int patches, double mask_ratio, Rng& rng) {
  if (images <= 0 || patches <= 0) throw std::invalid_argument("empty step plan");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw std::invalid_argument("mask ratio must lie in [0, 1)");
  }
  const int masked = static_cast<int>(std::lround(mask_ratio * patches));
  StepPlan plan;
  plan.masked.assign(static_cast<std::size_t>(images),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(patches), 0));
  std::vector<int> order(static_cast<std::size_t>(patches));
  for (std::vector<std::uint8_t>& flags : plan.masked) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < masked; ++i) {
      const int j = i + rng.uniform_int(0, patches - 1 - i);
      std::swap(order[i], order[j]);
      flags[order[i]] = 1;
    }
  }
  return plan;
}

double codec_objective(const CodecParams& params, const CodecParams* teacher,
                       const std::vector<PatchGrid>& batch, const StepPlan& plan,
                       const TrainConfig& cfg, std::vector<double>* grad) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (plan.masked.size() != batch.size()) {
    throw std::invalid_argument("plan does not cover the batch");
  }
  if (teacher && !(teacher->dims() == params.dims())) {
    throw std::invalid_argument("teacher and student dims disagree");
  }

  const CodecDims& dims = params.dims();
  const int l = dims.token_len;
  const int h = dims.pred_hidden;
  const int d = dims.patch_dim();
  const int stages = dims.stages;
  const double delta = teacher ? cfg.delta_train : 1.0;
  const double t_count = static_cast<double>(batch.size());
  const bool use_kl = teacher && cfg.lambda_kl > 0;
  const bool use_distill = teacher && cfg.lambda_distill > 0;
  const bool use_pred = teacher && cfg.lambda_pred > 0;

  // Forward everything first: the distillation and predictor terms
  // normalize by batch-global counts.
  std::vector<detail::ForwardTrace> student;
  std::vector<detail::ForwardTrace> teacher_trace;
  student.reserve(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    student.push_back(detail::forward_codec(batch[t], params, delta, &plan.masked[t]));
    if (teacher) {
      teacher_trace.push_back(detail::forward_codec(batch[t], *teacher, 1.0, &plan.masked[t]));
    }
  }

  // Predictor ranking targets: per stage, membership of the active set's
  // top ceil(delta * active) positions under the drop-cost ordering.
  std::vector<std::vector<KeepMask>> targets(batch.size());
  double active_total = 0.0;
  if (use_pred) {
    for (std::size_t t = 0; t < batch.size(); ++t) {
      ImportanceScores cost{drop_costs(batch[t])};
      targets[t].resize(static_cast<std::size_t>(stages));
      for (int m = 0; m < stages; ++m) {
        const KeepMask& active = student[t].stages[m].active_in;
        targets[t][m] = select_tokens(cost, delta, &active);
        for (const std::uint8_t a : active) active_total += a ? 1.0 : 0.0;
      }
    }
  }

  // Loss value. The reconstruction part reuses the public loss so the two
  // can never drift apart.
  double objective = 0.0;
  double distill_den = 0.0;
  if (teacher) {
    std::vector<BatchSample> samples;
    samples.reserve(batch.size());
    for (std::size_t t = 0; t < batch.size(); ++t) {
      BatchSample s;
      s.target = batch[t];
      s.student_out.patch_side = dims.patch_side;
      s.student_out.grid_w = batch[t].grid_w;
      s.student_out.grid_h = batch[t].grid_h;
      s.student_out.data = student[t].out;
      s.teacher_out = s.student_out;
      s.teacher_out.data = teacher_trace[t].out;
      for (const detail::StageTrace& st : student[t].stages) s.stage_masks.push_back(st.keep);
      s.student_tokens = student[t].stages.back().x;
      s.teacher_tokens = teacher_trace[t].stages.back().x;
      samples.push_back(std::move(s));
    }
    objective = loss_total(samples, cfg);
    for (const BatchSample& s : samples) {
      for (const std::uint8_t kflag : s.stage_masks.back()) distill_den += kflag ? 1.0 : 0.0;
    }
    if (use_pred) {
      double aux = 0.0;
      for (std::size_t t = 0; t < batch.size(); ++t) {
        for (int m = 0; m < stages; ++m) {
          const detail::StageTrace& st = student[t].stages[m];
          for (std::size_t k = 0; k < st.active_in.size(); ++k) {
            if (!st.active_in[k]) continue;
            aux += bce_from_logit(st.logit[k], targets[t][m][k] ? 1.0 : 0.0);
          }
        }
      }
      objective += cfg.lambda_pred * aux / active_total;
    }
  } else {
    for (std::size_t t = 0; t < batch.size(); ++t) {
      PatchGrid out;
      out.patch_side = dims.patch_side;
      out.grid_w = batch[t].grid_w;
      out.grid_h = batch[t].grid_h;
      out.data = student[t].out;
      objective += loss_mse(batch[t], out) / t_count;
    }
  }

  if (!grad) return objective;
  grad->assign(params.size(), 0.0);
  const ParamOffsets off = collect_offsets(params);
  double* g = grad->data();
  const double* theta = params.values().data();

  std::vector<double> soft_s(static_cast<std::size_t>(d)), soft_t(static_cast<std::size_t>(d));
  std::vector<double> dout(static_cast<std::size_t>(d));
  std::vector<double> dz2(static_cast<std::size_t>(l)), dz1(static_cast<std::size_t>(l));
  std::vector<double> dvec(static_cast<std::size_t>(l)), dy(static_cast<std::size_t>(l));
  std::vector<double> dq(static_cast<std::size_t>(h)), dzq(static_cast<std::size_t>(h));
  std::vector<double> dz(static_cast<std::size_t>(l));

  for (std::size_t t = 0; t < batch.size(); ++t) {
    const detail::ForwardTrace& tr = student[t];
    const int n = tr.count;
    const double inv_tn = 1.0 / (t_count * static_cast<double>(n));
    const KeepMask& kept = tr.stages.back().keep;

    std::vector<double> dx(static_cast<std::size_t>(n) * l, 0.0);
    std::vector<double> dprev(static_cast<std::size_t>(n) * l, 0.0);

    for (int k = 0; k < n; ++k) {
      const std::size_t kd = static_cast<std::size_t>(k) * d;
      const std::size_t kl = static_cast<std::size_t>(k) * l;
      const double* o = tr.out.data() + kd;
      const double* p = batch[t].patch(k);

      for (int i = 0; i < d; ++i) dout[i] = 2.0 * inv_tn * (o[i] - p[i]);
      if (use_kl) {
        softmax_inplace(o, d, soft_s);
        softmax_inplace(teacher_trace[t].out.data() + kd, d, soft_t);
        double kl_k = 0.0;
        for (int i = 0; i < d; ++i) {
          kl_k += soft_s[i] * (std::log(soft_s[i]) - std::log(soft_t[i]));
        }
        for (int i = 0; i < d; ++i) {
          dout[i] += cfg.lambda_kl * inv_tn * soft_s[i] *
                     (std::log(soft_s[i]) - std::log(soft_t[i]) - kl_k);
        }
      }

      // output projection
      const double* u2 = tr.u2.data() + kl;
      const double* u1 = tr.u1.data() + kl;
      const double* y = tr.y.data() + kl;
      for (int r = 0; r < d; ++r) {
        g[off.out_b + r] += dout[r];
        double* gw = g + off.out_w + static_cast<std::size_t>(r) * l;
        for (int c = 0; c < l; ++c) gw[c] += dout[r] * u2[c];
      }
      for (int c = 0; c < l; ++c) {
        double acc = 0.0;
        for (int r = 0; r < d; ++r) acc += theta[off.out_w + static_cast<std::size_t>(r) * l + c] * dout[r];
        dvec[c] = acc;  // dL/du2
      }
      // decoder block 2
      for (int i = 0; i < l; ++i) {
        dz2[i] = dvec[i] * (1.0 - u2[i] * u2[i]);
        g[off.dec_b2 + i] += dz2[i];
        double* gw = g + off.dec_w2 + static_cast<std::size_t>(i) * l;
        for (int c = 0; c < l; ++c) gw[c] += dz2[i] * u1[c];
      }
      for (int c = 0; c < l; ++c) {
        double acc = 0.0;
        for (int i = 0; i < l; ++i) acc += theta[off.dec_w2 + static_cast<std::size_t>(i) * l + c] * dz2[i];
        dvec[c] = acc;  // dL/du1
      }
      // decoder block 1
      for (int i = 0; i < l; ++i) {
        dz1[i] = dvec[i] * (1.0 - u1[i] * u1[i]);
        g[off.dec_b1 + i] += dz1[i];
        double* gw = g + off.dec_w1 + static_cast<std::size_t>(i) * l;
        for (int c = 0; c < l; ++c) gw[c] += dz1[i] * y[c];
      }
      for (int c = 0; c < l; ++c) {
        double acc = 0.0;
        for (int i = 0; i < l; ++i) acc += theta[off.dec_w1 + static_cast<std::size_t>(i) * l + c] * dz1[i];
        dy[c] = acc;
      }

      if (kept[k]) {
        const double* tok = tr.stages.back().x.data() + kl;
        const double* ref = use_distill ? teacher_trace[t].stages.back().x.data() + kl : nullptr;
        for (int i = 0; i < l; ++i) {
          double acc = dy[i];
          if (use_distill) {
            acc += cfg.lambda_distill * 2.0 * (tok[i] - ref[i]) / distill_den;
          }
          dx[kl + i] = acc;
        }
      } else {
        for (int i = 0; i < l; ++i) g[off.mask + i] += dy[i];
      }
    }

    // encoder stages, last to first
    for (int m = stages - 1; m >= 0; --m) {
      const detail::StageTrace& st = tr.stages[m];
      const StageOffsets& so = off.stage[m];
      const double* prev = m == 0 ? tr.x0.data() : tr.stages[m - 1].x.data();
      std::fill(dprev.begin(), dprev.end(), 0.0);
      for (int k = 0; k < n; ++k) {
        if (!st.active_in[k]) continue;
        const std::size_t kl = static_cast<std::size_t>(k) * l;
        const std::size_t kh = static_cast<std::size_t>(k) * h;
        const double* xk = st.x.data() + kl;
        double* dxk = dx.data() + kl;

        if (use_pred) {
          const double target = targets[t][m][k] ? 1.0 : 0.0;
          const double ds = cfg.lambda_pred * (st.zeta[k] - target) / active_total;
          const double* q = st.ph.data() + kh;
          g[so.pred_b2] += ds;
          for (int c = 0; c < h; ++c) {
            g[so.pred_w2 + c] += ds * q[c];
            dq[c] = theta[so.pred_w2 + c] * ds;
          }
          for (int j = 0; j < h; ++j) {
            dzq[j] = dq[j] * (1.0 - q[j] * q[j]);
            g[so.pred_b1 + j] += dzq[j];
            double* gw = g + so.pred_w1 + static_cast<std::size_t>(j) * l;
            for (int c = 0; c < l; ++c) gw[c] += dzq[j] * xk[c];
          }
          for (int c = 0; c < l; ++c) {
            double acc = 0.0;
            for (int j = 0; j < h; ++j) acc += theta[so.pred_w1 + static_cast<std::size_t>(j) * l + c] * dzq[j];
            dxk[c] += acc;
          }
        }

        for (int i = 0; i < l; ++i) {
          dz[i] = dxk[i] * (1.0 - xk[i] * xk[i]);
          g[so.enc_b + i] += dz[i];
          double* gw = g + so.enc_w + static_cast<std::size_t>(i) * l;
          for (int c = 0; c < l; ++c) gw[c] += dz[i] * prev[kl + c];
        }
        for (int c = 0; c < l; ++c) {
          double acc = 0.0;
          for (int i = 0; i < l; ++i) acc += theta[so.enc_w + static_cast<std::size_t>(i) * l + c] * dz[i];
          dprev[kl + c] = acc;
        }
      }
      dx.swap(dprev);
    }

    // embedding / mask token
    for (int k = 0; k < n; ++k) {
      const std::size_t kl = static_cast<std::size_t>(k) * l;
      if (tr.masked[k]) {
        for (int i = 0; i < l; ++i) g[off.mask + i] += dx[kl + i];
        continue;
      }
      const double* p = batch[t].patch(k);
      for (int i = 0; i < l; ++i) {
        const double di = dx[kl + i];
        if (di == 0.0) continue;
        g[off.embed_b + i] += di;
        double* gw = g + off.embed_w + static_cast<std::size_t>(i) * d;
        for (int c = 0; c < d; ++c) gw[c] += di * p[c];
      }
    }
  }
  return objective;
}

Trainer::Trainer(CodecParams params, const CodecParams* teacher, TrainConfig cfg)
    : params_(std::move(params)), teacher_(teacher), cfg_(cfg) {
  cfg_.validate();
  if (teacher_ && !(teacher_->dims() == params_.dims())) {
    throw std::invalid_argument("teacher and student dims disagree");
  }
  adam_m_.assign(params_.size(), 0.0);
  adam_v_.assign(params_.size(), 0.0);
}

double Trainer::train_step(const std::vector<PatchGrid>& batch, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const StepPlan plan =
      draw_step_plan(static_cast<int>(batch.size()), batch.front().count(), cfg_.mask_ratio, rng);
  const double objective = codec_objective(params_, teacher_, batch, plan, cfg_, &grad_);
  if (!std::isfinite(objective)) {
    throw NumericError("training objective diverged to a non-finite value at step " +
                       std::to_string(step_ + 1));
  }

  ++step_;
  const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step_));
  std::vector<double>& theta = params_.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    adam_m_[i] = kAdamBeta1 * adam_m_[i] + (1.0 - kAdamBeta1) * grad_[i];
    adam_v_[i] = kAdamBeta2 * adam_v_[i] + (1.0 - kAdamBeta2) * grad_[i] * grad_[i];
    const double m_hat = adam_m_[i] / bias1;
    const double v_hat = adam_v_[i] / bias2;
    theta[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
  return objective;
}

namespace {

CodecParams run_training(CodecParams init, const CodecParams* teacher,
                         const std::vector<PatchGrid>& corpus, const TrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("empty training corpus");
  Trainer trainer(std::move(init), teacher, cfg);
  Rng rng(Rng::derive(cfg.seed, 0x7261696e));
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PatchGrid> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = corpus.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < corpus.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      const std::size_t stop =
          std::min(corpus.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(corpus[order[i]]);
      trainer.train_step(batch, rng);
    }
  }
  return trainer.take_params();
}

}  // namespace

CodecParams train_teacher(const std::vector<PatchGrid>& corpus, const CodecDims& dims,
                          const TrainConfig& cfg) {
  Rng init_rng(Rng::derive(cfg.seed, 0x696e6974));
  return run_training(CodecParams::random_init(dims, init_rng), nullptr, corpus, cfg);
}

CodecParams train_student(const std::vector<PatchGrid>& corpus, const CodecParams& teacher,
                          const TrainConfig& cfg) {
  return run_training(teacher, &teacher, corpus, cfg);
}

}  // namespace dynasc
