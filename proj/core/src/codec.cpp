// SPDX-License-Identifier: Apache-2.0
#include "dynasc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>

#include "codec_internal.hpp"
#include "dynasc/errors.hpp"

namespace dynasc {
namespace {

void check_dims(const CodecDims& d) {
  if (d.patch_side <= 0 || d.token_len <= 0 || d.stages <= 0 || d.pred_hidden <= 0) {
    throw std::invalid_argument("codec dims must be positive");
  }
}

}  // namespace

std::string CodecParams::stage_name(const char* prefix, int index, const char* suffix) {
  return std::string(prefix) + std::to_string(index) + suffix;
}

CodecParams::CodecParams(const CodecDims& dims) : dims_(dims) {
  check_dims(dims);
  const int d = dims.patch_dim();
  const int l = dims.token_len;
  const int h = dims.pred_hidden;
  layout_.push_back({"embed.w", l, d, 0});
  layout_.push_back({"embed.b", l, 1, 0});
  layout_.push_back({"mask", l, 1, 0});
  for (int m = 1; m <= dims.stages; ++m) {
    layout_.push_back({stage_name("enc", m, ".w"), l, l, 0});
    layout_.push_back({stage_name("enc", m, ".b"), l, 1, 0});
    layout_.push_back({stage_name("pred", m, ".w1"), h, l, 0});
    layout_.push_back({stage_name("pred", m, ".b1"), h, 1, 0});
    layout_.push_back({stage_name("pred", m, ".w2"), 1, h, 0});
    layout_.push_back({stage_name("pred", m, ".b2"), 1, 1, 0});
  }
  for (int block = 1; block <= 2; ++block) {
    layout_.push_back({stage_name("dec", block, ".w"), l, l, 0});
    layout_.push_back({stage_name("dec", block, ".b"), l, 1, 0});
  }
  layout_.push_back({"out.w", d, l, 0});
  layout_.push_back({"out.b", d, 1, 0});

  std::size_t offset = 0;
  for (TensorView& view : layout_) {
    view.offset = offset;
    offset += view.size();
  }
  values_.assign(offset, 0.0);
}

const CodecParams::TensorView& CodecParams::view(const std::string& name) const {
  for (const TensorView& v : layout_) {
    if (v.name == name) return v;
  }
  throw std::invalid_argument("unknown codec tensor: " + name);
}

double* CodecParams::at(const std::string& name) { return values_.data() + view(name).offset; }
const double* CodecParams::at(const std::string& name) const {
  return values_.data() + view(name).offset;
}

CodecParams CodecParams::random_init(const CodecDims& dims, Rng& rng) {
  CodecParams params(dims);
  for (const TensorView& v : params.layout_) {
    double* data = params.values_.data() + v.offset;
    const bool bias = v.cols == 1 && v.name != "mask";
    if (bias) continue;  // already zero
    const double scale = 1.0 / std::sqrt(static_cast<double>(v.cols));
    for (std::size_t i = 0; i < v.size(); ++i) data[i] = rng.uniform(-scale, scale);
  }
  return params;
}

void TrainConfig::validate() const {
  if (lambda_kl < 0 || lambda_distill < 0 || lambda_delta < 0 || lambda_pred < 0) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
  if (!(lr >= 0)) throw std::invalid_argument("learning rate must be nonnegative");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw std::invalid_argument("mask ratio must lie in [0, 1)");
  }
  if (epochs < 0) throw std::invalid_argument("epoch count must be nonnegative");
  if (!(delta_train > 0.0 && delta_train <= 1.0)) {
    throw std::invalid_argument("training keep ratio must lie in (0, 1]");
  }
}

namespace detail {

void dense(const double* w, const double* b, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    double acc = b ? b[r] : 0.0;
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

ForwardTrace forward_codec(const PatchGrid& patches, const CodecParams& params, double delta,
                           const std::vector<std::uint8_t>* masked) {
  const CodecDims& dims = params.dims();
  if (patches.patch_dim() != dims.patch_dim()) {
    throw std::invalid_argument("patch size does not match codec input width");
  }
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("keep ratio must lie in (0, 1]");
  }
  const int n = patches.count();
  const int l = dims.token_len;
  const int h = dims.pred_hidden;
  const int d = dims.patch_dim();

  ForwardTrace trace;
  trace.count = n;
  trace.masked.assign(static_cast<std::size_t>(n), 0);
  if (masked) {
    if (static_cast<int>(masked->size()) != n) {
      throw std::invalid_argument("mask plan length does not match patch count");
    }
    trace.masked = *masked;
  }

  trace.embed.resize(static_cast<std::size_t>(n) * l);
  trace.x0.resize(static_cast<std::size_t>(n) * l);
  const double* g = params.mask_token();
  for (int k = 0; k < n; ++k) {
    double* e = trace.embed.data() + static_cast<std::size_t>(k) * l;
    dense(params.embed_w(), params.embed_b(), patches.patch(k), l, d, e);
    double* x = trace.x0.data() + static_cast<std::size_t>(k) * l;
    const double* src = trace.masked[k] ? g : e;
    std::copy(src, src + l, x);
  }

  const double* prev = trace.x0.data();
  KeepMask active(static_cast<std::size_t>(n), 1);
  trace.stages.resize(dims.stages);
  for (int m = 0; m < dims.stages; ++m) {
    StageTrace& st = trace.stages[m];
    st.active_in = active;
    st.x.assign(static_cast<std::size_t>(n) * l, 0.0);
    st.ph.assign(static_cast<std::size_t>(n) * h, 0.0);
    st.logit.assign(static_cast<std::size_t>(n), 0.0);
    st.zeta.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
      if (!active[k]) continue;
      double* x = st.x.data() + static_cast<std::size_t>(k) * l;
      dense(params.enc_w(m + 1), params.enc_b(m + 1), prev + static_cast<std::size_t>(k) * l,
            l, l, x);
      for (int i = 0; i < l; ++i) x[i] = std::tanh(x[i]);
      double* ph = st.ph.data() + static_cast<std::size_t>(k) * h;
      dense(params.pred_w1(m + 1), params.pred_b1(m + 1), x, h, l, ph);
      for (int i = 0; i < h; ++i) ph[i] = std::tanh(ph[i]);
      double logit = 0.0;
      dense(params.pred_w2(m + 1), params.pred_b2(m + 1), ph, 1, h, &logit);
      st.logit[k] = logit;
      st.zeta[k] = sigmoid(logit);
    }

    ImportanceScores scores{st.zeta};
    st.keep = select_tokens(scores, delta, &active);
    active = st.keep;
    prev = st.x.data();
  }

  const KeepMask& kept = trace.stages.back().keep;
  const std::vector<double>& final_x = trace.stages.back().x;
  trace.y.resize(static_cast<std::size_t>(n) * l);
  for (int k = 0; k < n; ++k) {
    double* y = trace.y.data() + static_cast<std::size_t>(k) * l;
    const double* src = kept[k] ? final_x.data() + static_cast<std::size_t>(k) * l : g;
    std::copy(src, src + l, y);
  }

  trace.u1.resize(static_cast<std::size_t>(n) * l);
  trace.u2.resize(static_cast<std::size_t>(n) * l);
  trace.out.resize(static_cast<std::size_t>(n) * d);
  for (int k = 0; k < n; ++k) {
    const std::size_t kl = static_cast<std::size_t>(k) * l;
    dense(params.dec_w(1), params.dec_b(1), trace.y.data() + kl, l, l, trace.u1.data() + kl);
    for (int i = 0; i < l; ++i) trace.u1[kl + i] = std::tanh(trace.u1[kl + i]);
    dense(params.dec_w(2), params.dec_b(2), trace.u1.data() + kl, l, l, trace.u2.data() + kl);
    for (int i = 0; i < l; ++i) trace.u2[kl + i] = std::tanh(trace.u2[kl + i]);
    dense(params.out_w(), params.out_b(), trace.u2.data() + kl, d, l,
          trace.out.data() + static_cast<std::size_t>(k) * d);
  }
  return trace;
}

}  // namespace detail

TokenSequence patch_embed(const PatchGrid& patches, const CodecParams& params) {
  const CodecDims& dims = params.dims();
  if (patches.patch_dim() != dims.patch_dim()) {
    throw std::invalid_argument("patch size does not match codec input width");
  }
  TokenSequence seq;
  seq.token_len = dims.token_len;
  seq.count = patches.count();
  seq.tokens.resize(static_cast<std::size_t>(seq.count) * seq.token_len);
  for (int k = 0; k < seq.count; ++k) {
    detail::dense(params.embed_w(), params.embed_b(), patches.patch(k), dims.token_len,
                  dims.patch_dim(), seq.token(k));
  }
  return seq;
}

ImportanceScores predict_importance(const TokenSequence& tokens, const CodecParams& params,
                                    int stage) {
  const CodecDims& dims = params.dims();
  if (stage < 1 || stage > dims.stages) throw std::invalid_argument("predictor stage out of range");
  if (tokens.token_len != dims.token_len) {
    throw std::invalid_argument("token length does not match codec");
  }
  const int n = tokens.count;
  KeepMask active(static_cast<std::size_t>(n), 1);
  if (stage > 1) {
    const std::size_t prior = static_cast<std::size_t>(stage) - 2;
    if (prior >= tokens.stage_masks.size() ||
        tokens.stage_masks[prior].size() != static_cast<std::size_t>(n)) {
      throw std::invalid_argument("missing retention mask for predictor stage");
    }
    active = tokens.stage_masks[prior];
  }

  ImportanceScores scores;
  scores.zeta.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> ph(static_cast<std::size_t>(dims.pred_hidden));
  for (int k = 0; k < n; ++k) {
    if (!active[k]) continue;
    detail::dense(params.pred_w1(stage), params.pred_b1(stage), tokens.token(k),
                  dims.pred_hidden, dims.token_len, ph.data());
    for (double& v : ph) v = std::tanh(v);
    double logit = 0.0;
    detail::dense(params.pred_w2(stage), params.pred_b2(stage), ph.data(), 1, dims.pred_hidden,
                  &logit);
    scores.zeta[k] = detail::sigmoid(logit);
  }
  return scores;
}

KeepMask select_tokens(const ImportanceScores& scores, double delta, const KeepMask* active,
                       SelectRule rule) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("keep ratio must lie in (0, 1]");
  }
  const int n = static_cast<int>(scores.zeta.size());
  if (active && static_cast<int>(active->size()) != n) {
    throw std::invalid_argument("active mask length does not match scores");
  }
  KeepMask keep(static_cast<std::size_t>(n), 0);
  if (rule == SelectRule::kThreshold) {
    for (int k = 0; k < n; ++k) {
      if ((!active || (*active)[k]) && scores.zeta[k] <= delta) keep[k] = 1;
    }
    return keep;
  }

  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    if (!active || (*active)[k]) candidates.push_back(k);
  }
  if (candidates.empty()) return keep;

  // ceil with a guard against representation error pushing an exact
  // product just above an integer.
  const int kept = static_cast<int>(
      std::ceil(delta * static_cast<double>(candidates.size()) - 1e-12));
  const int take = std::max(1, std::min<int>(kept, static_cast<int>(candidates.size())));
  // Ties keep the lower token index; candidates are already index-sorted so
  // a stable sort on descending score preserves that order.
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return scores.zeta[a] > scores.zeta[b];
  });
  for (int i = 0; i < take; ++i) keep[candidates[i]] = 1;
  return keep;
}

EncodeResult encode(const CameraImage& image, double delta, const CodecParams& params,
                    bool quantize) {
  const PatchGrid patches = split_patches(image, params.dims().patch_side);
  const detail::ForwardTrace trace = detail::forward_codec(patches, params, delta, nullptr);
  const int n = trace.count;
  const int l = params.dims().token_len;

  EncodeResult result;
  result.tokens.token_len = l;
  result.tokens.count = n;
  result.tokens.tokens.resize(static_cast<std::size_t>(n) * l);
  // Each position reports its representation at the last stage that
  // computed one (the drop stage, or the final stage when retained).
  for (int k = 0; k < n; ++k) {
    const double* src = nullptr;
    for (const detail::StageTrace& st : trace.stages) {
      if (st.active_in[k]) src = st.x.data() + static_cast<std::size_t>(k) * l;
    }
    std::copy(src, src + l, result.tokens.token(k));
  }
  result.tokens.stage_masks.reserve(trace.stages.size());
  for (const detail::StageTrace& st : trace.stages) result.tokens.stage_masks.push_back(st.keep);

  QuantizedPayload& payload = result.payload;
  payload.token_len = l;
  payload.keep_mask = trace.stages.back().keep;
  payload.quantized = quantize;
  const std::vector<double>& final_x = trace.stages.back().x;
  for (int k = 0; k < n; ++k) {
    if (!payload.keep_mask[k]) continue;
    const double* t = final_x.data() + static_cast<std::size_t>(k) * l;
    if (quantize) {
      for (int i = 0; i < l; ++i) payload.codes.push_back(quantize_value(t[i]));
    } else {
      payload.raw.insert(payload.raw.end(), t, t + l);
    }
  }
  return result;
}

CameraImage decode(const QuantizedPayload& payload, const CodecParams& params) {
  const CodecDims& dims = params.dims();
  const int n = static_cast<int>(payload.keep_mask.size());
  const int l = dims.token_len;
  const int d = dims.patch_dim();
  if (n == 0) throw CorruptPayload("payload carries no token positions");
  if (payload.token_len != l) throw CorruptPayload("payload token length does not match codec");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) throw CorruptPayload("token count does not form a square frame");
  const std::size_t expect = static_cast<std::size_t>(payload.kept_count()) * l;
  if (payload.quantized ? payload.codes.size() != expect : payload.raw.size() != expect) {
    throw CorruptPayload("token payload length does not match keep mask");
  }

  PatchGrid grid;
  grid.patch_side = dims.patch_side;
  grid.grid_w = side;
  grid.grid_h = side;
  grid.data.resize(static_cast<std::size_t>(n) * d);

  std::vector<double> y(static_cast<std::size_t>(l));
  std::vector<double> u1(static_cast<std::size_t>(l)), u2(static_cast<std::size_t>(l));
  std::size_t cursor = 0;
  for (int k = 0; k < n; ++k) {
    if (payload.keep_mask[k]) {
      for (int i = 0; i < l; ++i) {
        y[i] = payload.quantized ? dequantize_value(payload.codes[cursor + i])
                                 : payload.raw[cursor + i];
      }
      cursor += static_cast<std::size_t>(l);
    } else {
      std::copy(params.mask_token(), params.mask_token() + l, y.begin());
    }
    detail::dense(params.dec_w(1), params.dec_b(1), y.data(), l, l, u1.data());
    for (double& v : u1) v = std::tanh(v);
    detail::dense(params.dec_w(2), params.dec_b(2), u1.data(), l, l, u2.data());
    for (double& v : u2) v = std::tanh(v);
    detail::dense(params.out_w(), params.out_b(), u2.data(), d, l, grid.patch(k));
    double* p = grid.patch(k);
    for (int i = 0; i < d; ++i) p[i] = std::clamp(p[i], 0.0, 1.0);
  }
  return merge_patches(grid);
}

double loss_mse(const PatchGrid& reference, const PatchGrid& reconstruction) {
  if (reference.patch_side != reconstruction.patch_side ||
      reference.count() != reconstruction.count()) {
    throw std::invalid_argument("patch grids disagree in shape");
  }
  const int n = reference.count();
  const int d = reference.patch_dim();
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const double* a = reference.patch(k);
    const double* b = reconstruction.patch(k);
    for (int i = 0; i < d; ++i) {
      const double diff = b[i] - a[i];
      total += diff * diff;
    }
  }
  return total / static_cast<double>(n);
}

double loss_sparsity(const std::vector<KeepMask>& stage_masks, double delta) {
  if (stage_masks.empty()) throw std::invalid_argument("no retention masks supplied");
  double total = 0.0;
  for (const KeepMask& mask : stage_masks) {
    if (mask.empty()) throw std::invalid_argument("empty retention mask");
    double kept = 0.0;
    for (const std::uint8_t v : mask) kept += v ? 1.0 : 0.0;
    const double dev = delta - kept / static_cast<double>(mask.size());
    total += dev * dev;
  }
  return total / static_cast<double>(stage_masks.size());
}

double kl_patch_softmax(const PatchGrid& student, const PatchGrid& reference) {
  if (student.patch_side != reference.patch_side || student.count() != reference.count()) {
    throw std::invalid_argument("patch grids disagree in shape");
  }
  const int n = student.count();
  const int d = student.patch_dim();
  std::vector<double> pa(static_cast<std::size_t>(d)), pb(static_cast<std::size_t>(d));
  auto softmax = [d](const double* v, std::vector<double>& p) {
    const double hi = *std::max_element(v, v + d);
    double z = 0.0;
    for (int i = 0; i < d; ++i) {
      p[i] = std::exp(v[i] - hi);
      z += p[i];
    }
    for (int i = 0; i < d; ++i) p[i] /= z;
  };
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    softmax(student.patch(k), pa);
    softmax(reference.patch(k), pb);
    for (int i = 0; i < d; ++i) total += pa[i] * (std::log(pa[i]) - std::log(pb[i]));
  }
  return total / static_cast<double>(n);
}

double loss_total(const std::vector<BatchSample>& batch, const TrainConfig& cfg) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double t_count = static_cast<double>(batch.size());

  double mse = 0.0, kl = 0.0, sparse = 0.0;
  double distill_num = 0.0, distill_den = 0.0;
  for (const BatchSample& sample : batch) {
    mse += loss_mse(sample.target, sample.student_out);
    if (cfg.lambda_kl > 0) kl += kl_patch_softmax(sample.student_out, sample.teacher_out);
    sparse += loss_sparsity(sample.stage_masks, cfg.delta_train);
    const KeepMask& final_mask = sample.stage_masks.back();
    for (std::size_t k = 0; k < final_mask.size(); ++k) {
      if (!final_mask[k]) continue;
      distill_den += 1.0;
      if (sample.student_tokens.empty()) continue;
      const int l = static_cast<int>(sample.student_tokens.size() / final_mask.size());
      const double* s = sample.student_tokens.data() + k * static_cast<std::size_t>(l);
      const double* t = sample.teacher_tokens.data() + k * static_cast<std::size_t>(l);
      for (int i = 0; i < l; ++i) {
        const double diff = s[i] - t[i];
        distill_num += diff * diff;
      }
    }
  }
  const double distill = distill_den > 0.0 ? distill_num / distill_den : 0.0;
  return mse / t_count + cfg.lambda_kl * kl / t_count + cfg.lambda_delta * sparse / t_count +
         cfg.lambda_distill * distill;
}

}  // namespace dynasc
