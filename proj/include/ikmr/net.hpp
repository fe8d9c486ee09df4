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

#include <memory>
#include <string>
#include <vector>

#include "ikmr/motion.hpp"
#include "ikmr/ops.hpp"

namespace ikmr {

/// Surjective fine-joint -> super-joint assignment for one pooling level.
/// Every super-joint's preimage must be a connected subtree.
struct PoolingMap {
  std::vector<int> assign;
  int coarse = 0;
};

/// Dense time x joints x channels grid, the inference-path counterpart of
/// rank-3 Tensors. Templated on scalar for the reduced-precision benchmark
/// mode.
template <typename S>
struct Grid3 {
  Eigen::Index t = 0, j = 0, c = 0;
  Eigen::Array<S, Eigen::Dynamic, 1> v;

  static Grid3 zeros(Eigen::Index t_, Eigen::Index j_, Eigen::Index c_) {
    Grid3 g;
    g.t = t_;
    g.j = j_;
    g.c = c_;
    g.v = Eigen::Array<S, Eigen::Dynamic, 1>::Zero(t_ * j_ * c_);
    return g;
  }
  S& at(Eigen::Index tt, Eigen::Index jj, Eigen::Index cc) {
    return v((tt * j + jj) * c + cc);
  }
  S at(Eigen::Index tt, Eigen::Index jj, Eigen::Index cc) const {
    return v((tt * j + jj) * c + cc);
  }
};

/// Pooled spatio-temporal feature grid z emitted by an encoder.
using LatentCode = Grid3<double>;

/// One skeleton-aware convolution layer: per joint, a stack of kernel blocks
/// (one per neighbor) plus a bias applied after neighbor averaging.
struct SkeletalConvLayer {
  int kernel = 1;
  int c_in = 0;
  int c_out = 0;
  std::vector<std::vector<int>> neighbors;  // adjacency captured at build
  std::vector<Tensor> weights;  // [joint]: [|N_i| x C_out x C_in x K]
  std::vector<Tensor> bias;     // [joint]: [C_out]
};

struct ModelConfig {
  int window = 64;
  int conv_channels1 = 32;
  int conv_channels2 = 64;  // latent channel count
  int static_channels = 16;
  int kernel = 5;
  std::uint64_t init_seed = 1234;
};

inline constexpr int kDynChannels = 7;  // quaternion (4) + root translation (3)

enum class Side { A, B };
enum class Component { EncA, EncB, DecA, DecB };

/// Encoder or decoder of one side: a static branch embedding the offsets and
/// a dynamic branch convolving rotations concatenated with static features.
struct ComponentParams {
  SkeletalConvLayer static1, static2, dyn1, dyn2;
};

/// Both encoder/decoder pairs plus the pooling maps of both skeletons.
/// Parameters are frozen during inference and shareable across workers.
struct RetargetModel {
  ModelConfig config;
  SkeletonTopology skel_a, skel_b;
  std::vector<PoolingMap> pool_a, pool_b;  // two levels per side
  ComponentParams enc_a, enc_b, dec_a, dec_b;

  const SkeletonTopology& skeleton(Side s) const {
    return s == Side::A ? skel_a : skel_b;
  }
  const std::vector<PoolingMap>& pooling(Side s) const {
    return s == Side::A ? pool_a : pool_b;
  }
  int latent_joints() const { return pool_a[1].coarse; }
  int latent_frames() const { return config.window / 4; }
};

// Pooling-map machinery -----------------------------------------------------

/// Parent array of the contracted tree induced by a pooling map; throws
/// IncompleteMapError when any preimage is not a connected subtree.
std::vector<int> contracted_parents(const std::vector<int>& parent,
                                    const PoolingMap& map);

/// Neighborhoods within `distance` hops on an arbitrary parent array.
std::vector<std::vector<int>> neighborhoods_from_parents(
    const std::vector<int>& parent, int distance);

/// Chain decomposition of a skeleton: joints on at least two end-effector
/// paths (and the root) form the torso; joints on exactly one path belong to
/// that end-effector's limb. chains[0] is the torso, chains[1 + e] follows
/// end-effector declaration order; each chain is sorted root-to-tip.
struct LimbStructure {
  std::vector<int> limb;  // per joint: -1 torso, otherwise end-effector index
  std::vector<std::vector<int>> chains;
};
LimbStructure classify_limbs(const SkeletonTopology& skel);

/// Two pooling levels derived by collapsing chain joints toward the limb
/// prototypes (torso plus one prototype per non-head limb; head limbs merge
/// into the torso).
std::vector<PoolingMap> derive_pooling_maps(const SkeletonTopology& skel);

// Spec-level layer operations -----------------------------------------------

/// Eq.-style skeleton-aware convolution: per joint, the neighbor convolutions
/// are averaged and a per-joint bias is added. `adjacency` must match the
/// layer's captured neighbor lists (AdjacencyMismatchError otherwise).
Tensor skeletal_conv(const SkeletalConvLayer& layer, const Tensor& features,
                     const std::vector<std::vector<int>>& adjacency);

Tensor skeletal_pool(const Tensor& features, const PoolingMap& map,
                     int temporal_stride);
Tensor skeletal_unpool(const Tensor& features, const PoolingMap& map,
                       Eigen::Index fine_joints, int temporal_stride);

// Model construction and parameter access ------------------------------------

/// Builds a randomly initialized model. Pooling maps may be supplied
/// explicitly; by default they are derived from each skeleton. Both sides
/// must reach the same prototype count (TopologyMismatchError otherwise).
RetargetModel make_model(const SkeletonTopology& skel_a,
                         const SkeletonTopology& skel_b,
                         const ModelConfig& config,
                         std::vector<PoolingMap> pool_a = {},
                         std::vector<PoolingMap> pool_b = {});

std::vector<std::pair<std::string, Tensor>> named_parameters(
    const RetargetModel& model);
std::vector<Tensor> component_parameters(const RetargetModel& model,
                                         Component component);
std::vector<Tensor> all_parameters(const RetargetModel& model);

/// Re-points every parameter slot at the given tensors, in
/// named_parameters order. Shapes must match.
void set_parameters(RetargetModel& model, const std::vector<Tensor>& params);

/// Deep copy: fresh parameter tensors with copied values. A plain struct
/// copy shares the underlying tensors, so training the copy would mutate
/// the original.
RetargetModel clone_model(const RetargetModel& model);

// Taped forward passes (training path) ----------------------------------------

/// Clip as a dynamic-branch input grid [T x J x 7]: quaternion channels for
/// every joint, root translation on the root joint's extra channels.
Tensor clip_dyn_tensor(const SkeletonTopology& skel, const MotionClip& clip);
/// Canonical rotation targets [T x J x 4].
Tensor clip_rot_tensor(const MotionClip& clip);
/// Root translation targets [T x 3].
Tensor clip_root_tensor(const MotionClip& clip);
/// Rest offsets as the static branch input [1 x J x 3].
Tensor skeleton_static_tensor(const SkeletonTopology& skel);

Tensor encode_taped(const RetargetModel& model, Side side, const Tensor& dyn);

struct DecodeTaped {
  Tensor raw;      // [T x J x 7]
  Tensor rot_raw;  // [T x J x 4]
  Tensor root;     // [T x 3]
};
DecodeTaped decode_taped(const RetargetModel& model, Side side,
                         const Tensor& z);

/// Reassembles a dynamic-branch input from a decoder's raw output
/// (normalized rotations; translation channels zero except the root).
Tensor dyn_from_decode(const RetargetModel& model, Side side,
                       const DecodeTaped& decoded);

// Inference (plain path, no tape) ---------------------------------------------

LatentCode encode(const RetargetModel& model, Side side,
                  const MotionClip& clip);

struct DecodeResult {
  MotionClip clip;
  Grid3<double> raw;  // pre-normalization decoder output [T x J x 7]
};
DecodeResult decode_full(const RetargetModel& model, Side side,
                         const LatentCode& z);
MotionClip decode(const RetargetModel& model, Side side, const LatentCode& z);

/// decode(B, encode(A, clip)) on the shared inference path.
MotionClip retarget(const RetargetModel& model, const MotionClip& clip_a);

/// Per-clip failure collected by retarget_batch.
struct BatchItemError {
  int index;
  std::string message;
};
class BatchError : public Error {
 public:
  BatchError(std::string msg, std::vector<BatchItemError> items)
      : Error(std::move(msg)), items_(std::move(items)) {}
  const std::vector<BatchItemError>& items() const { return items_; }

 private:
  std::vector<BatchItemError> items_;
};

/// Batched retargeting over a worker pool. Outputs are bit-identical to a
/// sequential loop and keep input order.
std::vector<MotionClip> retarget_batch(const RetargetModel& model,
                                       const std::vector<MotionClip>& clips,
                                       int workers);

/// Reduced-precision inference mirror used only by the throughput benchmark.
std::vector<MotionClip> retarget_batch_f32(const RetargetModel& model,
                                           const std::vector<MotionClip>& clips,
                                           int workers);

}  // namespace ikmr
