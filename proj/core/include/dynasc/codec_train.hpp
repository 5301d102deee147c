// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dynasc/codec.hpp"
#include "dynasc/image.hpp"
#include "dynasc/rng.hpp"

namespace dynasc {

// Stochastic choices frozen for one optimization step: which input patches
// were replaced by the mask token, per image. Separating these from the
// objective keeps J(params) deterministic and finite-difference checkable.
struct StepPlan {
  std::vector<std::vector<std::uint8_t>> masked;  // [image][patch]
};

StepPlan draw_step_plan(int images, int patches, double mask_ratio, Rng& rng);

// Objective for one batch at fixed plan: the four-term reconstruction loss
// plus lambda_pred times an auxiliary ranking loss that trains the
// predictor heads toward a parameter-free importance target (cross-entropy
// against top-k membership under the patch's fill-in error, i.e. its
// squared distance from a flat frame-mean patch). Retention counts and the
// distillation weights are hard quantities and contribute no gradient.
// teacher == nullptr selects the dense pretraining objective: delta forced
// to 1 and only the masked-reconstruction term active. When grad is
// non-null it is resized and filled with dJ/dparams.
double codec_objective(const CodecParams& params, const CodecParams* teacher,
                       const std::vector<PatchGrid>& batch, const StepPlan& plan,
                       const TrainConfig& cfg, std::vector<double>* grad);

// Adam optimizer over the flat parameter vector (beta1 0.9, beta2 0.999,
// eps 1e-8, bias-corrected).
class Trainer {
 public:
  // teacher, when provided, must outlive the trainer and share dims.
  Trainer(CodecParams params, const CodecParams* teacher, TrainConfig cfg);

  // Draws mask positions, evaluates the objective and applies one Adam
  // update. Returns the objective value before the update. lr = 0 leaves
  // the parameters bit-identical.
  double train_step(const std::vector<PatchGrid>& batch, Rng& rng);

  const CodecParams& params() const { return params_; }
  CodecParams take_params() { return std::move(params_); }

 private:
  CodecParams params_;
  const CodecParams* teacher_;
  TrainConfig cfg_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  std::vector<double> grad_;
  long step_ = 0;
};

// Dense masked-autoencoder pretraining: random init, delta = 1, MSE-only
// objective over `epochs` passes of shuffled mini-batches. Deterministic
// for a given config seed.
CodecParams train_teacher(const std::vector<PatchGrid>& corpus, const CodecDims& dims,
                          const TrainConfig& cfg);

// Sparse fine-tuning: starts from a copy of the teacher and trains the full
// objective against it at cfg.delta_train.
CodecParams train_student(const std::vector<PatchGrid>& corpus, const CodecParams& teacher,
                          const TrainConfig& cfg);

}  // namespace dynasc
