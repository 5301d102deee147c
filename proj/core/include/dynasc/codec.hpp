// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynasc/image.hpp"
#include "dynasc/payload.hpp"
#include "dynasc/rng.hpp"

namespace dynasc {

// Network shape. The desk-scale default is 8x8 patches embedded into
// 16-dim tokens through 2 encoder stages, each with its own importance
// predictor head.
struct CodecDims {
  int patch_side = 8;    // b
  int token_len = 16;    // L_s
  int stages = 2;        // M
  int pred_hidden = 16;  // predictor MLP width

  int patch_dim() const { return patch_side * patch_side; }
  friend bool operator==(const CodecDims&, const CodecDims&) = default;
};

// Flat parameter store with named tensor views, in declaration order:
// embed (W, b), mask token, per stage {dense W, b; predictor W1, b1, w2, b2},
// decoder blocks 1-2 (W, b), output projection (W, b). The mask token both
// replaces masked inputs during training and fills dropped token positions
// at the decoder.
class CodecParams {
 public:
  struct TensorView {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };

  CodecParams() = default;
  explicit CodecParams(const CodecDims& dims);  // zero-initialized

  // Uniform init scaled by 1/sqrt(fan_in) per tensor; biases zero, mask
  // token small. Deterministic for a given rng state.
  static CodecParams random_init(const CodecDims& dims, Rng& rng);

  const CodecDims& dims() const { return dims_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<TensorView>& layout() const { return layout_; }

  double* embed_w() { return at("embed.w"); }
  double* embed_b() { return at("embed.b"); }
  double* mask_token() { return at("mask"); }
  double* enc_w(int m) { return at(stage_name("enc", m, ".w")); }
  double* enc_b(int m) { return at(stage_name("enc", m, ".b")); }
  double* pred_w1(int m) { return at(stage_name("pred", m, ".w1")); }
  double* pred_b1(int m) { return at(stage_name("pred", m, ".b1")); }
  double* pred_w2(int m) { return at(stage_name("pred", m, ".w2")); }
  double* pred_b2(int m) { return at(stage_name("pred", m, ".b2")); }
  double* dec_w(int block) { return at(stage_name("dec", block, ".w")); }
  double* dec_b(int block) { return at(stage_name("dec", block, ".b")); }
  double* out_w() { return at("out.w"); }
  double* out_b() { return at("out.b"); }

  const double* embed_w() const { return at("embed.w"); }
  const double* embed_b() const { return at("embed.b"); }
  const double* mask_token() const { return at("mask"); }
  const double* enc_w(int m) const { return at(stage_name("enc", m, ".w")); }
  const double* enc_b(int m) const { return at(stage_name("enc", m, ".b")); }
  const double* pred_w1(int m) const { return at(stage_name("pred", m, ".w1")); }
  const double* pred_b1(int m) const { return at(stage_name("pred", m, ".b1")); }
  const double* pred_w2(int m) const { return at(stage_name("pred", m, ".w2")); }
  const double* pred_b2(int m) const { return at(stage_name("pred", m, ".b2")); }
  const double* dec_w(int block) const { return at(stage_name("dec", block, ".w")); }
  const double* dec_b(int block) const { return at(stage_name("dec", block, ".b")); }
  const double* out_w() const { return at("out.w"); }
  const double* out_b() const { return at("out.b"); }

  const TensorView& view(const std::string& name) const;

 private:
  static std::string stage_name(const char* prefix, int index, const char* suffix);
  double* at(const std::string& name);
  const double* at(const std::string& name) const;

  CodecDims dims_;
  std::vector<TensorView> layout_;
  std::vector<double> values_;
};

// Encoder state for one frame: per-position representations at the last
// stage where the position was active, plus the retention mask produced at
// every stage. Masks are monotone: once dropped, always dropped.
struct TokenSequence {
  int token_len = 0;
  int count = 0;                      // N
  std::vector<double> tokens;         // count * token_len
  std::vector<KeepMask> stage_masks;  // M masks of length count

  double* token(int k) { return tokens.data() + static_cast<std::size_t>(k) * token_len; }
  const double* token(int k) const {
    return tokens.data() + static_cast<std::size_t>(k) * token_len;
  }
};

// Predictor outputs in [0, 1]; positions inactive at the queried stage
// hold zero.
struct ImportanceScores {
  std::vector<double> zeta;
};

struct TrainConfig {
  double lambda_kl = 0.0;
  double lambda_distill = 0.0;
  double lambda_delta = 0.0;
  double lambda_pred = 0.0;  // auxiliary predictor ranking loss weight
  double lr = 1e-4;
  int batch_size = 16;
  double mask_ratio = 0.15;
  int epochs = 60;
  double delta_train = 0.7;
  std::uint64_t seed = 1;

  void validate() const;  // invalid_argument on out-of-range fields
};

// token_k = W patch_k + bias. Throws std::invalid_argument on a patch
// length mismatch.
TokenSequence patch_embed(const PatchGrid& patches, const CodecParams& params);

// Runs predictor head `stage` (1-based) on the tokens active entering that
// stage (all positions for stage 1, the previous stage's keep mask after).
ImportanceScores predict_importance(const TokenSequence& tokens, const CodecParams& params,
                                    int stage);

// kRatioTopK keeps the ceil(delta * N_active) highest-scoring active
// positions (the production rule); kThreshold keeps an active position iff
// its score is <= delta, the literal indicator the timing model's expected
// keep fraction is defined over.
enum class SelectRule { kRatioTopK, kThreshold };

// `active` restricts the candidate set (null means all positions). Ties
// under kRatioTopK prefer the lower index. Throws std::invalid_argument
// when delta is not in (0, 1].
KeepMask select_tokens(const ImportanceScores& scores, double delta,
                       const KeepMask* active = nullptr,
                       SelectRule rule = SelectRule::kRatioTopK);

struct EncodeResult {
  TokenSequence tokens;
  QuantizedPayload payload;
};

// Full transmitter path: embed, M stages of dense block + importance
// prediction + retention, then payload assembly from the surviving tokens
// (8-bit quantized unless quantize = false).
EncodeResult encode(const CameraImage& image, double delta, const CodecParams& params,
                    bool quantize = true);

// Receiver path: dequantize surviving tokens, fill dropped positions with
// the mask token, run the decoder stack, clamp pixels to [0, 1]. Throws
// CorruptPayload when payload lengths are inconsistent.
CameraImage decode(const QuantizedPayload& payload, const CodecParams& params);

// (1/N) sum_k ||patch_k - reference_k||^2 (sum over pixels inside a patch,
// mean over patches).
double loss_mse(const PatchGrid& reference, const PatchGrid& reconstruction);

// Mean over the supplied masks of (delta - keep_ratio)^2.
double loss_sparsity(const std::vector<KeepMask>& stage_masks, double delta);

// Mean per-patch KL(softmax(student patch) || softmax(reference patch)).
double kl_patch_softmax(const PatchGrid& student, const PatchGrid& reference);

// One sample's contribution to the four-term training loss.
struct BatchSample {
  PatchGrid target;                   // original patches w
  PatchGrid student_out;              // reconstruction
  PatchGrid teacher_out;              // teacher reconstruction
  std::vector<KeepMask> stage_masks;  // student masks, M entries
  std::vector<double> student_tokens; // N * L_s final-stage representations
  std::vector<double> teacher_tokens; // N * L_s teacher tokens
};

// L = L_MSE + lambda_kl KL + lambda_delta L_delta + lambda_distill
// (sum_t sum_k D_k ||t - t'||^2) / (sum D); the distillation ratio is 0
// when no token survived anywhere in the batch.
double loss_total(const std::vector<BatchSample>& batch, const TrainConfig& cfg);

inline constexpr double kQuantStep = 1.0 / 255.0;

}  // namespace dynasc
