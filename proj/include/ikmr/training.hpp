// Copyright 2026 The IKMR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>

#include "ikmr/net.hpp"

namespace ikmr {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int steps = 1;
  int batch_size = 4;
  double lambda_align = 1.0;
  double lambda_consis = 0.1;
  double lambda_ee = 1.0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int workers = 1;

  void validate() const;
};

struct PairedDataset {
  std::string skeleton_a, skeleton_b;
  double fps = 30.0;
  int window = 64;
  std::string provenance = "synthetic";  // or "filtered"
  std::vector<std::pair<MotionClip, MotionClip>> pairs;

  std::size_t size() const { return pairs.size(); }
};

// Losses ----------------------------------------------------------------------

/// Mean squared difference between two latent grids.
Tensor loss_align(const Tensor& z_a, const Tensor& z_b);
Tensor loss_align(const LatentCode& z_a, const LatentCode& z_b);

/// All pretraining terms built over one shared graph: self- and
/// cross-reconstruction on both sides, latent alignment, and the latent
/// consistency regularizer.
struct PretrainTerms {
  Tensor recon, align, consis, total;
};
PretrainTerms pretrain_loss_terms(const RetargetModel& model,
                                  const MotionClip& clip_a,
                                  const MotionClip& clip_b,
                                  const TrainConfig& config);

Tensor loss_recon(const RetargetModel& model, const MotionClip& clip_a,
                  const MotionClip& clip_b);
Tensor loss_consistency(const RetargetModel& model, const MotionClip& clip_a,
                        const MotionClip& clip_b);
Tensor loss_pretrain(const RetargetModel& model, const MotionClip& clip_a,
                     const MotionClip& clip_b, const TrainConfig& config);

/// Fine-tuning terms. Encoders run outside the tape (frozen); gradients flow
/// only into decoder B.
struct FinetuneTerms {
  Tensor recon_b, ee, total;
};
FinetuneTerms finetune_loss_terms(const RetargetModel& model,
                                  const MotionClip& clip_a,
                                  const MotionClip& feasible_b,
                                  const TrainConfig& config);

/// End-effector FK loss between the retargeted clip and the feasible target.
Tensor loss_ee(const RetargetModel& model, const MotionClip& clip_a,
               const MotionClip& feasible_b);
/// B-side reconstruction terms of the fine-tune objective.
Tensor loss_recon_b(const RetargetModel& model, const MotionClip& clip_a,
                    const MotionClip& feasible_b);

// Optimizer --------------------------------------------------------------------

/// Per-parameter first/second moment state for the adaptive optimizer;
/// serialized alongside the parameters so training can resume.
struct OptimizerState {
  std::vector<ArrayXd> m, v;
  std::int64_t t = 0;
};

class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, OptimizerKind kind,
            double learning_rate, OptimizerState state = {});

  void step();
  void zero_grad();
  const OptimizerState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  std::vector<Tensor> params_;
  OptimizerKind kind_;
  double lr_;
  OptimizerState state_;
};

// Training loops ----------------------------------------------------------------

struct PretrainStep {
  int step;
  double total, recon, align, consis;
};
struct FinetuneStep {
  int step;
  double recon_b, ee;
};

/// Seeded mini-batch pretraining of all four components. Loss history is
/// deterministic given (seed, workers). When `state` is supplied the
/// optimizer resumes from it and updates it in place; steps are numbered
/// from start_step + 1.
std::vector<PretrainStep> pretrain(RetargetModel& model,
                                   const PairedDataset& dataset,
                                   const TrainConfig& config,
                                   OptimizerState* state = nullptr,
                                   int start_step = 0);

/// Decoder-B-only fine-tuning on (human clip, feasible clip) pairs. Encoders
/// and decoder A are bit-unchanged.
std::vector<FinetuneStep> finetune(RetargetModel& model,
                                   const std::vector<MotionClip>& human_clips,
                                   const std::vector<MotionClip>& feasible_clips,
                                   const TrainConfig& config,
                                   OptimizerState* state = nullptr,
                                   int start_step = 0);

// Synthetic data -----------------------------------------------------------------

/// For every B joint, the A joint whose trajectory drives it: limbs are
/// matched by end-effector declaration order, chain positions
/// proportionally. Throws TopologyMismatchError when the skeletons are not
/// homeomorphic.
std::vector<int> joint_correspondence(const SkeletonTopology& skel_a,
                                      const SkeletonTopology& skel_b);

/// Deterministic per-joint retarget gain in [0.75, 0.95), hashed from the
/// skeleton and joint names.
double synthetic_gain(const SkeletonTopology& skel_b, int joint_b);

/// Root-translation scale between the skeletons (leg-length ratio; 1 when no
/// leg chain is identifiable).
double synthetic_root_scale(const SkeletonTopology& skel_a,
                            const SkeletonTopology& skel_b);

struct SyntheticOptions {
  int window = 64;
  double fps = 30.0;
  double amplitude_scale = 1.0;
};

/// Band-limited sinusoidal source clips on A with analytically retargeted
/// ground-truth clips on B. Deterministic per seed.
PairedDataset generate_synthetic_pairs(const SkeletonTopology& skel_a,
                                       const SkeletonTopology& skel_b,
                                       int count, std::uint64_t seed,
                                       const SyntheticOptions& options = {});

}  // namespace ikmr
