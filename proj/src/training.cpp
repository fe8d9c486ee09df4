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

#include "ikmr/training.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "ikmr/fkdiff.hpp"
#include "ikmr/kinematics.hpp"
#include "ikmr/rng.hpp"

namespace ikmr {

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lambda_align < 0.0 || lambda_consis < 0.0 || lambda_ee < 0.0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor loss_align(const Tensor& z_a, const Tensor& z_b) {
  if (z_a.shape() != z_b.shape()) {
    throw ShapeMismatchError("loss_align: latent shapes differ");
  }
  return mse(z_a, z_b);
}

Tensor loss_align(const LatentCode& z_a, const LatentCode& z_b) {
  if (z_a.t != z_b.t || z_a.j != z_b.j || z_a.c != z_b.c) {
    throw ShapeMismatchError("loss_align: latent shapes differ");
  }
  return loss_align(Tensor::from_array({z_a.t, z_a.j, z_a.c}, z_a.v),
                    Tensor::from_array({z_b.t, z_b.j, z_b.c}, z_b.v));
}

namespace {

// MSE of raw rotations against canonical targets plus root translation MSE.
Tensor clip_term(const DecodeTaped& decoded, const Tensor& rot_target,
                 const Tensor& root_target) {
  return add(mse(decoded.rot_raw, rot_target), mse(decoded.root, root_target));
}

}  // namespace

PretrainTerms pretrain_loss_terms(const RetargetModel& model,
                                  const MotionClip& clip_a,
                                  const MotionClip& clip_b,
                                  const TrainConfig& config) {
  const Tensor dyn_a = clip_dyn_tensor(model.skel_a, clip_a);
  const Tensor dyn_b = clip_dyn_tensor(model.skel_b, clip_b);
  const Tensor rot_a = clip_rot_tensor(clip_a);
  const Tensor rot_b = clip_rot_tensor(clip_b);
  const Tensor root_a = clip_root_tensor(clip_a);
  const Tensor root_b = clip_root_tensor(clip_b);

  const Tensor z_a = encode_taped(model, Side::A, dyn_a);
  const Tensor z_b = encode_taped(model, Side::B, dyn_b);

  const DecodeTaped rec_aa = decode_taped(model, Side::A, z_a);
  const DecodeTaped rec_ba = decode_taped(model, Side::A, z_b);
  const DecodeTaped rec_bb = decode_taped(model, Side::B, z_b);
  const DecodeTaped rec_ab = decode_taped(model, Side::B, z_a);

  PretrainTerms terms;
  terms.recon = add(add(clip_term(rec_aa, rot_a, root_a),
                        clip_term(rec_ba, rot_a, root_a)),
                    add(clip_term(rec_bb, rot_b, root_b),
                        clip_term(rec_ab, rot_b, root_b)));
  terms.align = loss_align(z_a, z_b);

  const Tensor re_a =
      encode_taped(model, Side::A, dyn_from_decode(model, Side::A, rec_aa));
  const Tensor re_b =
      encode_taped(model, Side::B, dyn_from_decode(model, Side::B, rec_bb));
  terms.consis = add(mse(re_a, z_a), mse(re_b, z_b));

  terms.total = add(terms.recon, add(scale(terms.align, config.lambda_align),
                                     scale(terms.consis, config.lambda_consis)));
  return terms;
}

Tensor loss_recon(const RetargetModel& model, const MotionClip& clip_a,
                  const MotionClip& clip_b) {
  TrainConfig cfg;
  return pretrain_loss_terms(model, clip_a, clip_b, cfg).recon;
}

Tensor loss_consistency(const RetargetModel& model, const MotionClip& clip_a,
                        const MotionClip& clip_b) {
  TrainConfig cfg;
  return pretrain_loss_terms(model, clip_a, clip_b, cfg).consis;
}

Tensor loss_pretrain(const RetargetModel& model, const MotionClip& clip_a,
                     const MotionClip& clip_b, const TrainConfig& config) {
  return pretrain_loss_terms(model, clip_a, clip_b, config).total;
}

FinetuneTerms finetune_loss_terms(const RetargetModel& model,
                                  const MotionClip& clip_a,
                                  const MotionClip& feasible_b,
                                  const TrainConfig& config) {
  feasible_b.validate(&model.skel_b);
  // Frozen encoders: plain-path latents enter the graph as constants.
  Tensor z_a_leaf, z_b_leaf;
  {
    NoGradScope ng;
    const LatentCode z_a = encode(model, Side::A, clip_a);
    const LatentCode z_b = encode(model, Side::B, feasible_b);
    z_a_leaf = Tensor::from_array({z_a.t, z_a.j, z_a.c}, z_a.v);
    z_b_leaf = Tensor::from_array({z_b.t, z_b.j, z_b.c}, z_b.v);
  }
  const DecodeTaped rec_bb = decode_taped(model, Side::B, z_b_leaf);
  const DecodeTaped rec_ab = decode_taped(model, Side::B, z_a_leaf);

  const Tensor rot_b = clip_rot_tensor(feasible_b);
  const Tensor root_b = clip_root_tensor(feasible_b);

  FinetuneTerms terms;
  terms.recon_b = add(clip_term(rec_bb, rot_b, root_b),
                      clip_term(rec_ab, rot_b, root_b));

  const JointPositions ee_ref = end_effector_positions(model.skel_b, feasible_b);
  ArrayXd ref(static_cast<Eigen::Index>(ee_ref.frames) * ee_ref.joints * 3);
  for (int t = 0; t < ee_ref.frames; ++t) {
    for (int e = 0; e < ee_ref.joints; ++e) {
      const Eigen::Index base =
          (static_cast<Eigen::Index>(t) * ee_ref.joints + e) * 3;
      ref(base + 0) = ee_ref.at(t, e).x();
      ref(base + 1) = ee_ref.at(t, e).y();
      ref(base + 2) = ee_ref.at(t, e).z();
    }
  }
  const Tensor ee_target = Tensor::from_array(
      {ee_ref.frames, ee_ref.joints, 3}, std::move(ref));
  const Tensor ee_pred =
      fk_differentiable_ee(model.skel_b, rec_ab.rot_raw, rec_ab.root);
  terms.ee = mse(ee_pred, ee_target);

  terms.total = add(terms.recon_b, scale(terms.ee, config.lambda_ee));
  return terms;
}

Tensor loss_ee(const RetargetModel& model, const MotionClip& clip_a,
               const MotionClip& feasible_b) {
  TrainConfig cfg;
  return finetune_loss_terms(model, clip_a, feasible_b, cfg).ee;
}

Tensor loss_recon_b(const RetargetModel& model, const MotionClip& clip_a,
                    const MotionClip& feasible_b) {
  TrainConfig cfg;
  return finetune_loss_terms(model, clip_a, feasible_b, cfg).recon_b;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

Optimizer::Optimizer(std::vector<Tensor> params, OptimizerKind kind,
                     double learning_rate, OptimizerState state)
    : params_(std::move(params)), kind_(kind), lr_(learning_rate),
      state_(std::move(state)) {
  if (state_.m.empty()) {
    state_.m.resize(params_.size());
    state_.v.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      state_.m[i] = ArrayXd::Zero(params_[i].numel());
      state_.v[i] = ArrayXd::Zero(params_[i].numel());
    }
    state_.t = 0;
  } else if (state_.m.size() != params_.size() ||
             state_.v.size() != params_.size()) {
    throw ConfigError("optimizer state does not match parameter count");
  }
}

void Optimizer::step() {
  ++state_.t;
  if (kind_ == OptimizerKind::Sgd) {
    for (auto& p : params_) {
      p.mutable_values() -= lr_ * p.grad();
    }
    return;
  }
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state_.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state_.t));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ArrayXd& g = params_[i].grad();
    ArrayXd& m = state_.m[i];
    ArrayXd& v = state_.v[i];
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.square();
    params_[i].mutable_values() -=
        lr_ * (m / bc1) / ((v / bc2).sqrt() + kEps);
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

// Evaluates per-item losses across workers, each backward pass accumulating
// into a private sink; gradients are merged into the shared parameters at a
// single point, in (parameter, worker) order, so results do not depend on
// thread scheduling.
template <typename ItemLoss>
void fan_out_step(std::vector<Tensor> params, int batch, int workers,
                  const ItemLoss& item_loss) {
  workers = std::max(1, std::min(workers, batch));
  std::vector<GradAccumulator> sinks(workers);

  auto run = [&](int w) {
    for (int i = w; i < batch; i += workers) {
      Tensor loss = item_loss(i);
      backward(loss, sinks[w]);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& th : pool) th.join();
  }

  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (Tensor& p : params) {
    for (int w = 0; w < workers; ++w) {
      if (const ArrayXd* g = sinks[w].find(p.node())) {
        p.add_grad(*g);
      }
    }
    p.mutable_grad() *= inv_batch;
  }
}

}  // namespace

std::vector<PretrainStep> pretrain(RetargetModel& model,
                                   const PairedDataset& dataset,
                                   const TrainConfig& config,
                                   OptimizerState* state, int start_step) {
  config.validate();
  if (dataset.pairs.empty()) {
    throw EmptyDatasetError("pretrain: dataset is empty");
  }
  std::vector<PretrainStep> history;
  if (config.steps == 0) return history;

  const std::vector<Tensor> params = all_parameters(model);
  Optimizer opt(params, config.optimizer, config.learning_rate,
                state ? *state : OptimizerState{});

  Rng rng(config.seed);
  std::vector<int> order(dataset.pairs.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;

  const int batch =
      std::min<int>(config.batch_size, static_cast<int>(dataset.pairs.size()));
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<int> items(batch);
    for (int k = 0; k < batch; ++k) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      items[k] = order[cursor++];
    }

    opt.zero_grad();
    std::vector<PretrainTerms> per_item(batch);
    fan_out_step(params, batch, config.workers, [&](int k) {
      per_item[k] = pretrain_loss_terms(model, dataset.pairs[items[k]].first,
                                        dataset.pairs[items[k]].second,
                                        config);
      return per_item[k].total;
    });
    opt.step();

    PretrainStep log{start_step + step, 0.0, 0.0, 0.0, 0.0};
    for (const auto& terms : per_item) {
      log.total += terms.total.item();
      log.recon += terms.recon.item();
      log.align += terms.align.item();
      log.consis += terms.consis.item();
    }
    const double inv = 1.0 / batch;
    log.total *= inv;
    log.recon *= inv;
    log.align *= inv;
    log.consis *= inv;
    history.push_back(log);
  }
  if (state) *state = opt.state();
  return history;
}

std::vector<FinetuneStep> finetune(RetargetModel& model,
                                   const std::vector<MotionClip>& human_clips,
                                   const std::vector<MotionClip>& feasible_clips,
                                   const TrainConfig& config,
                                   OptimizerState* state, int start_step) {
  config.validate();
  if (human_clips.size() != feasible_clips.size()) {
    throw LengthMismatchError(
        "finetune: human and feasible clip lists differ in length");
  }
  if (human_clips.empty()) throw EmptyDatasetError("finetune: no clips");

  std::vector<FinetuneStep> history;
  if (config.steps == 0) return history;

  const std::vector<Tensor> params =
      component_parameters(model, Component::DecB);
  Optimizer opt(params, config.optimizer, config.learning_rate,
                state ? *state : OptimizerState{});

  Rng rng(config.seed);
  std::vector<int> order(human_clips.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;

  const int batch =
      std::min<int>(config.batch_size, static_cast<int>(human_clips.size()));
  for (int step = 1; step <= config.steps; ++step) {
    std::vector<int> items(batch);
    for (int k = 0; k < batch; ++k) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      items[k] = order[cursor++];
    }

    opt.zero_grad();
    std::vector<FinetuneTerms> per_item(batch);
    fan_out_step(params, batch, config.workers, [&](int k) {
      per_item[k] = finetune_loss_terms(model, human_clips[items[k]],
                                        feasible_clips[items[k]], config);
      return per_item[k].total;
    });
    opt.step();

    FinetuneStep log{start_step + step, 0.0, 0.0};
    for (const auto& terms : per_item) {
      log.recon_b += terms.recon_b.item();
      log.ee += terms.ee.item();
    }
    log.recon_b /= batch;
    log.ee /= batch;
    history.push_back(log);
  }
  if (state) *state = opt.state();
  return history;
}

// ---------------------------------------------------------------------------
// Synthetic paired data
// ---------------------------------------------------------------------------

std::vector<int> joint_correspondence(const SkeletonTopology& skel_a,
                                      const SkeletonTopology& skel_b) {
  if (skel_a.end_effectors.size() != skel_b.end_effectors.size()) {
    throw TopologyMismatchError(
        "skeletons declare different end-effector counts (" +
        std::to_string(skel_a.end_effectors.size()) + " vs " +
        std::to_string(skel_b.end_effectors.size()) + ")");
  }
  const LimbStructure la = classify_limbs(skel_a);
  const LimbStructure lb = classify_limbs(skel_b);

  std::vector<int> corr(skel_b.joint_count(), -1);
  for (std::size_t chain = 0; chain < lb.chains.size(); ++chain) {
    const std::vector<int>& cb = lb.chains[chain];
    const std::vector<int>& ca = la.chains[chain];
    if (cb.empty()) continue;
    if (ca.empty()) {
      throw TopologyMismatchError("chain " + std::to_string(chain) +
                                  " exists only on the target skeleton");
    }
    const int na = static_cast<int>(ca.size());
    const int nb = static_cast<int>(cb.size());
    for (int p = 0; p < nb; ++p) {
      int ap;
      if (nb == 1) {
        ap = na - 1;  // single joint drives from the chain tip
      } else {
        const double f = static_cast<double>(p) / (nb - 1);
        ap = static_cast<int>(std::lround(f * (na - 1)));
      }
      corr[cb[p]] = ca[ap];
    }
  }
  return corr;
}

double synthetic_gain(const SkeletonTopology& skel_b, int joint_b) {
  const std::uint64_t h =
      fnv1a(skel_b.name + "/" + skel_b.joint_names[joint_b]);
  const double frac = static_cast<double>(h >> 11) * 0x1.0p-53;
  return 0.75 + 0.2 * frac;
}

namespace {

double leg_chain_length(const SkeletonTopology& skel) {
  const LimbStructure limbs = classify_limbs(skel);
  for (std::size_t e = 0; e < skel.end_effectors.size(); ++e) {
    const std::string& name = skel.joint_names[skel.end_effectors[e]];
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower.find("foot") == std::string::npos &&
        lower.find("ankle") == std::string::npos) {
      continue;
    }
    double len = 0.0;
    for (int cur = skel.end_effectors[e]; skel.parent[cur] != kNoParent;
         cur = skel.parent[cur]) {
      len += skel.offset[cur].norm();
    }
    if (len > 0.0) return len;
  }
  return 0.0;
}

}  // namespace

double synthetic_root_scale(const SkeletonTopology& skel_a,
                            const SkeletonTopology& skel_b) {
  const double la = leg_chain_length(skel_a);
  const double lb = leg_chain_length(skel_b);
  if (la <= 0.0 || lb <= 0.0) return 1.0;
  return lb / la;
}

PairedDataset generate_synthetic_pairs(const SkeletonTopology& skel_a,
                                       const SkeletonTopology& skel_b,
                                       int count, std::uint64_t seed,
                                       const SyntheticOptions& options) {
  if (count < 0) throw ConfigError("count must be >= 0");
  const std::vector<int> corr = joint_correspondence(skel_a, skel_b);
  const double root_scale = synthetic_root_scale(skel_a, skel_b);
  const int ja = skel_a.joint_count();
  const int jb = skel_b.joint_count();
  const int window = options.window;
  const double fps = options.fps;

  PairedDataset ds;
  ds.skeleton_a = skel_a.name;
  ds.skeleton_b = skel_b.name;
  ds.fps = fps;
  ds.window = window;
  ds.provenance = "synthetic";

  Rng rng(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (int n = 0; n < count; ++n) {
    // Per-joint band-limited angle trajectories; component amplitudes are
    // capped so the total stays within +-pi/2.
    std::vector<std::vector<double>> theta(
        ja, std::vector<double>(window, 0.0));
    for (int j = 0; j < ja; ++j) {
      const int comps = rng.uniform_int(1, 3);
      for (int k = 0; k < comps; ++k) {
        const double amp = options.amplitude_scale * rng.uniform(0.2, 0.48);
        const double freq = rng.uniform(0.15, 1.25);
        const double phase = rng.uniform(0.0, kTwoPi);
        for (int t = 0; t < window; ++t) {
          theta[j][t] += amp * std::sin(kTwoPi * freq * (t / fps) + phase);
        }
      }
    }
    std::vector<Vec3d> root(window, Vec3d::Zero());
    for (int axis = 0; axis < 3; ++axis) {
      const double amp = options.amplitude_scale * rng.uniform(0.05, 0.35);
      const double freq = rng.uniform(0.2, 0.8);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (int t = 0; t < window; ++t) {
        root[t](axis) = amp * std::sin(kTwoPi * freq * (t / fps) + phase);
      }
    }

    MotionClip a = make_rest_clip(skel_a, window, fps);
    for (int t = 0; t < window; ++t) {
      a.root_translation[t] = root[t];
      for (int j = 0; j < ja; ++j) {
        a.rot(t, j) = quat_from_axis_angle(skel_a.axes[j], theta[j][t]);
      }
    }
    MotionClip b = make_rest_clip(skel_b, window, fps);
    for (int t = 0; t < window; ++t) {
      b.root_translation[t] = root_scale * root[t];
      for (int j = 0; j < jb; ++j) {
        const double angle = synthetic_gain(skel_b, j) * theta[corr[j]][t];
        b.rot(t, j) = quat_from_axis_angle(skel_b.axes[j], angle);
      }
    }
    ds.pairs.emplace_back(std::move(a), std::move(b));
  }
  return ds;
}

}  // namespace ikmr
