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

#include <doctest.h>

#include <numeric>

#include "ikmr/net.hpp"
#include "ikmr/rng.hpp"

using namespace ikmr;

namespace {

// Small humanoid: root, spine, head, two hands off the spine, two feet.
SkeletonTopology mini_human() {
  return make_skeleton(
      "mini_human", {"hips", "spine", "head", "l_hand", "r_hand", "l_foot",
                     "r_foot"},
      {kNoParent, 0, 1, 1, 1, 0, 0},
      {Vec3d::Zero(), Vec3d(0, 0, 0.3), Vec3d(0, 0, 0.25),
       Vec3d(0.35, 0, 0.05), Vec3d(-0.35, 0, 0.05), Vec3d(0.1, 0, -0.6),
       Vec3d(-0.1, 0, -0.6)},
      {2, 3, 4, 5, 6});
}

SkeletonTopology mini_robot() {
  return make_skeleton(
      "mini_robot", {"base", "torso", "head", "l_grip", "r_grip", "l_foot",
                     "r_foot"},
      {kNoParent, 0, 1, 1, 1, 0, 0},
      {Vec3d::Zero(), Vec3d(0, 0, 0.2), Vec3d(0, 0, 0.2),
       Vec3d(0.25, 0, 0.0), Vec3d(-0.25, 0, 0.0), Vec3d(0.08, 0, -0.4),
       Vec3d(-0.08, 0, -0.4)},
      {2, 3, 4, 5, 6});
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.window = 8;
  cfg.conv_channels1 = 6;
  cfg.conv_channels2 = 8;
  cfg.static_channels = 4;
  cfg.kernel = 3;
  cfg.init_seed = 77;
  return cfg;
}

MotionClip random_clip(const SkeletonTopology& s, int frames, unsigned seed) {
  Rng rng(seed);
  MotionClip c = make_rest_clip(s, frames);
  for (int t = 0; t < frames; ++t) {
    c.root_translation[t] =
        Vec3d(0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal());
    for (int j = 0; j < s.joint_count(); ++j) {
      c.rot(t, j) = quat_from_axis_angle(s.axes[j], rng.uniform(-1.2, 1.2));
    }
  }
  return c;
}

Tensor random_grid(Rng& rng, Eigen::Index t, Eigen::Index j, Eigen::Index c) {
  ArrayXd v(t * j * c);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return Tensor::from_array({t, j, c}, std::move(v));
}

SkeletalConvLayer identity_layer(const std::vector<std::vector<int>>& nbrs,
                                 int channels) {
  SkeletalConvLayer layer;
  layer.kernel = 1;
  layer.c_in = channels;
  layer.c_out = channels;
  layer.neighbors = nbrs;
  layer.weights.resize(nbrs.size());
  layer.bias.resize(nbrs.size());
  for (std::size_t j = 0; j < nbrs.size(); ++j) {
    const Eigen::Index blocks = static_cast<Eigen::Index>(nbrs[j].size());
    ArrayXd w = ArrayXd::Zero(blocks * channels * channels);
    for (Eigen::Index n = 0; n < blocks; ++n) {
      for (int i = 0; i < channels; ++i) {
        w(n * channels * channels + i * channels + i) = 1.0;
      }
    }
    layer.weights[j] = Tensor::from_array({blocks, channels, channels, 1}, w);
    layer.bias[j] = Tensor::zeros({channels});
  }
  return layer;
}

SkeletalConvLayer random_layer(const std::vector<std::vector<int>>& nbrs,
                               int c_in, int c_out, int kernel, Rng& rng) {
  SkeletalConvLayer layer;
  layer.kernel = kernel;
  layer.c_in = c_in;
  layer.c_out = c_out;
  layer.neighbors = nbrs;
  layer.weights.resize(nbrs.size());
  layer.bias.resize(nbrs.size());
  for (std::size_t j = 0; j < nbrs.size(); ++j) {
    const Eigen::Index blocks = static_cast<Eigen::Index>(nbrs[j].size());
    ArrayXd w(blocks * c_out * c_in * kernel);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    layer.weights[j] = Tensor::from_array({blocks, c_out, c_in, kernel}, w);
    ArrayXd b(c_out);
    for (int i = 0; i < c_out; ++i) b(i) = rng.normal();
    layer.bias[j] = Tensor::from_array({c_out}, b);
  }
  return layer;
}

}  // namespace

TEST_CASE("derived pooling maps collapse the mini humanoid to 5 prototypes") {
  const SkeletonTopology s = mini_human();
  const auto pools = derive_pooling_maps(s);
  REQUIRE(pools.size() == 2);
  // Torso {hips, spine} pairs into one group; head/hands/feet are singleton
  // limbs.
  CHECK(pools[0].coarse == 6);
  CHECK(pools[0].assign[0] == pools[0].assign[1]);
  CHECK(pools[1].coarse == 5);
  // Head limb folds into the torso prototype.
  CHECK(pools[1].assign[pools[0].assign[2]] ==
        pools[1].assign[pools[0].assign[0]]);
  // Validation: both levels are connected (throws otherwise).
  const auto parents1 = contracted_parents(s.parent, pools[0]);
  CHECK_NOTHROW(contracted_parents(parents1, pools[1]));
}

TEST_CASE("degenerate single-joint skeleton pools to one prototype") {
  SkeletonTopology dot =
      make_skeleton("dot", {"only"}, {kNoParent}, {Vec3d::Zero()}, {0});
  const auto pools = derive_pooling_maps(dot);
  REQUIRE(pools.size() == 2);
  CHECK(pools[0].coarse == 1);
  CHECK(pools[1].coarse == 1);
  CHECK(pools[0].assign == std::vector<int>{0});
}

TEST_CASE("contracted_parents rejects disconnected preimages") {
  const SkeletonTopology s = mini_human();
  PoolingMap bad;
  bad.coarse = 6;
  // l_hand and l_foot are not adjacent; grouping them breaks connectivity.
  bad.assign = {0, 1, 2, 3, 4, 3, 5};
  CHECK_THROWS_AS(contracted_parents(s.parent, bad), IncompleteMapError);
}

TEST_CASE("skeletal_conv with J=1, K=1 identity weights is the identity") {
  Rng rng(1);
  const std::vector<std::vector<int>> nbrs{{0}};
  const SkeletalConvLayer layer = identity_layer(nbrs, 3);
  Tensor x = random_grid(rng, 5, 1, 3);
  Tensor y = skeletal_conv(layer, x, nbrs);
  CHECK((y.values() - x.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("skeletal_conv on a 2-joint chain averages the neighborhood") {
  Rng rng(2);
  const std::vector<std::vector<int>> nbrs{{0, 1}, {0, 1}};
  const SkeletalConvLayer layer = identity_layer(nbrs, 2);
  Tensor x = random_grid(rng, 4, 2, 2);
  Tensor y = skeletal_conv(layer, x, nbrs);
  for (Eigen::Index t = 0; t < 4; ++t) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double mean_tc =
          0.5 * (x.values()((t * 2 + 0) * 2 + c) +
                 x.values()((t * 2 + 1) * 2 + c));
      CHECK(y.values()((t * 2 + 0) * 2 + c) == doctest::Approx(mean_tc));
      CHECK(y.values()((t * 2 + 1) * 2 + c) == doctest::Approx(mean_tc));
    }
  }
}

TEST_CASE("skeletal_conv matches a direct summation oracle") {
  Rng rng(3);
  const SkeletonTopology s = mini_human();
  const auto nbrs = s.neighborhoods();
  // Random K=1 layer so the oracle stays a per-frame matrix product.
  Rng wrng(5);
  const SkeletalConvLayer layer = random_layer(nbrs, 3, 2, 1, wrng);
  Tensor x = random_grid(rng, 3, s.joint_count(), 3);
  Tensor y = skeletal_conv(layer, x, nbrs);

  for (Eigen::Index t = 0; t < 3; ++t) {
    for (int i = 0; i < s.joint_count(); ++i) {
      for (int co = 0; co < 2; ++co) {
        double acc = 0.0;
        for (std::size_t n = 0; n < nbrs[i].size(); ++n) {
          const int j = nbrs[i][n];
          const ArrayXd& w = layer.weights[i].values();
          for (int ci = 0; ci < 3; ++ci) {
            acc += w(n * 6 + co * 3 + ci) *
                   x.values()((t * s.joint_count() + j) * 3 + ci);
          }
        }
        acc = acc / nbrs[i].size() + layer.bias[i].values()(co);
        CHECK(y.values()((t * s.joint_count() + i) * 2 + co) ==
              doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("skeletal_conv weight-stack gradient passes finite differences") {
  Rng rng(4);
  const std::vector<std::vector<int>> nbrs{{0, 1}, {0, 1}};
  Tensor x = random_grid(rng, 6, 2, 3);
  Tensor w_probe = Tensor::from_array(
      {2, 2, 3, 3}, [&] {
        ArrayXd w(36);
        for (int i = 0; i < 36; ++i) w(i) = rng.normal();
        return w;
      }());

  const double err = grad_check(
      [&](const Tensor& wt) {
        SkeletalConvLayer layer;
        layer.kernel = 3;
        layer.c_in = 3;
        layer.c_out = 2;
        layer.neighbors = nbrs;
        layer.weights.resize(2);
        layer.bias.resize(2);
        Rng wrng(9);
        for (int j = 0; j < 2; ++j) {
          if (j == 0) {
            layer.weights[j] = wt;  // stack under test
          } else {
            ArrayXd w(36);
            for (int i = 0; i < 36; ++i) w(i) = wrng.normal();
            layer.weights[j] = Tensor::from_array({2, 2, 3, 3}, w);
          }
          layer.bias[j] = Tensor::zeros({2});
        }
        return sum(skeletal_conv(layer, x, nbrs));
      },
      w_probe, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("skeletal_conv rejects mismatched adjacency") {
  Rng rng(5);
  const std::vector<std::vector<int>> nbrs{{0, 1}, {0, 1}};
  const SkeletalConvLayer layer = identity_layer(nbrs, 2);
  Tensor x = random_grid(rng, 4, 2, 2);
  const std::vector<std::vector<int>> other{{0}, {1}};
  CHECK_THROWS_AS(skeletal_conv(layer, x, other), AdjacencyMismatchError);
}

TEST_CASE("identity pooling with stride 1 is a no-op") {
  Rng rng(6);
  Tensor x = random_grid(rng, 4, 3, 2);
  PoolingMap id{{0, 1, 2}, 3};
  Tensor y = skeletal_pool(x, id, 1);
  CHECK((y.values() - x.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("pooling two joints averages their features") {
  Tensor x = Tensor::from_array({1, 2, 1}, (ArrayXd(2) << 3.0, 5.0).finished());
  PoolingMap both{{0, 0}, 1};
  Tensor y = skeletal_pool(x, both, 1);
  CHECK(y.values()(0) == doctest::Approx(4.0));
}

TEST_CASE("pooling matches a per-group mean oracle, including time") {
  Rng rng(7);
  Tensor x = random_grid(rng, 6, 5, 3);
  PoolingMap map{{0, 0, 1, 2, 2}, 3};
  Tensor y = skeletal_pool(x, map, 2);
  CHECK(y.shape() == Shape{3, 3, 3});
  for (Eigen::Index to = 0; to < 3; ++to) {
    for (int g = 0; g < 3; ++g) {
      std::vector<int> members;
      for (int j = 0; j < 5; ++j) {
        if (map.assign[j] == g) members.push_back(j);
      }
      for (Eigen::Index c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int s = 0; s < 2; ++s) {
          for (const int j : members) {
            acc += x.values()(((to * 2 + s) * 5 + j) * 3 + c);
          }
        }
        acc /= 2.0 * members.size();
        CHECK(y.values()((to * 3 + g) * 3 + c) ==
              doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("unpool broadcasts a single super-joint to all fine joints") {
  Tensor z = Tensor::from_array({1, 1, 2}, (ArrayXd(2) << 1.5, -2.0).finished());
  PoolingMap map{{0, 0, 0}, 1};
  Tensor y = skeletal_unpool(z, map, 3, 2);
  CHECK(y.shape() == Shape{2, 3, 2});
  for (Eigen::Index i = 0; i < y.numel(); i += 2) {
    CHECK(y.values()(i) == 1.5);
    CHECK(y.values()(i + 1) == -2.0);
  }
}

TEST_CASE("pool(unpool(x)) recovers x (mean of copies)") {
  Rng rng(8);
  Tensor z = random_grid(rng, 2, 3, 4);
  PoolingMap map{{0, 0, 1, 2, 2, 2}, 3};
  Tensor up = skeletal_unpool(z, map, 6, 2);
  Tensor back = skeletal_pool(up, map, 2);
  CHECK((back.values() - z.values()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("pool then unpool of constant input is the identity") {
  Tensor x = Tensor::full({4, 3, 2}, 0.75);
  PoolingMap map{{0, 0, 1}, 2};
  Tensor y = skeletal_unpool(skeletal_pool(x, map, 2), map, 3, 2);
  CHECK((y.values() - x.values()).abs().maxCoeff() == 0.0);
}

TEST_CASE("pooling errors: incomplete maps") {
  Rng rng(9);
  Tensor x = random_grid(rng, 2, 3, 1);
  CHECK_THROWS_AS(skeletal_pool(x, PoolingMap{{0, 0}, 1}, 1),
                  IncompleteMapError);
  CHECK_THROWS_AS(skeletal_pool(x, PoolingMap{{0, 0, 2}, 3}, 1),
                  IncompleteMapError);
}

TEST_CASE("encode emits the contracted latent shape, deterministically") {
  const SkeletonTopology ha = mini_human();
  const SkeletonTopology rb = mini_robot();
  const RetargetModel model = make_model(ha, rb, small_config());
  const MotionClip clip = random_clip(ha, 8, 31);

  const LatentCode z = encode(model, Side::A, clip);
  CHECK(z.t == 2);   // window / 4
  CHECK(z.j == 5);   // prototypes
  CHECK(z.c == 8);   // latent channels

  const LatentCode z2 = encode(model, Side::A, clip);
  CHECK((z.v - z2.v).abs().maxCoeff() == 0.0);

  // Latent-shape symmetry across sides.
  const MotionClip clip_b = random_clip(rb, 8, 32);
  const LatentCode zb = encode(model, Side::B, clip_b);
  CHECK(zb.t == z.t);
  CHECK(zb.j == z.j);
  CHECK(zb.c == z.c);
}

TEST_CASE("encode validates window length and skeleton") {
  const RetargetModel model = make_model(mini_human(), mini_robot(),
                                         small_config());
  const MotionClip wrong_len = random_clip(mini_human(), 12, 33);
  CHECK_THROWS_AS(encode(model, Side::A, wrong_len),
                  WindowLengthMismatchError);
  const MotionClip wrong_skel = random_clip(mini_robot(), 8, 34);
  CHECK_THROWS_AS(encode(model, Side::A, wrong_skel), SkeletonMismatchError);
}

TEST_CASE("taped and plain encoders agree") {
  const SkeletonTopology ha = mini_human();
  const RetargetModel model = make_model(ha, mini_robot(), small_config());
  const MotionClip clip = random_clip(ha, 8, 35);

  const LatentCode z_plain = encode(model, Side::A, clip);
  NoGradScope ng;
  const Tensor z_taped =
      encode_taped(model, Side::A, clip_dyn_tensor(ha, clip));
  CHECK((z_taped.values() - z_plain.v).abs().maxCoeff() < 1e-12);
}

TEST_CASE("decode output satisfies clip invariants for random latents") {
  const SkeletonTopology rb = mini_robot();
  const RetargetModel model = make_model(mini_human(), rb, small_config());
  Rng rng(10);
  for (int rep = 0; rep < 5; ++rep) {
    LatentCode z = LatentCode::zeros(2, 5, 8);
    for (Eigen::Index i = 0; i < z.v.size(); ++i) z.v(i) = 2.0 * rng.normal();
    const MotionClip out = decode(model, Side::B, z);
    CHECK_NOTHROW(out.validate(&rb));
  }
}

TEST_CASE("decode normalization oracle: clip = raw row / row norm") {
  const SkeletonTopology rb = mini_robot();
  const RetargetModel model = make_model(mini_human(), rb, small_config());
  Rng rng(11);
  LatentCode z = LatentCode::zeros(2, 5, 8);
  for (Eigen::Index i = 0; i < z.v.size(); ++i) z.v(i) = rng.normal();
  const DecodeResult res = decode_full(model, Side::B, z);
  for (int t = 0; t < 8; ++t) {
    for (int j = 0; j < rb.joint_count(); ++j) {
      const double w = res.raw.at(t, j, 0), x = res.raw.at(t, j, 1),
                   y = res.raw.at(t, j, 2), zz = res.raw.at(t, j, 3);
      const double n = std::sqrt(w * w + x * x + y * y + zz * zz);
      const Quatd expect = quat_canonical(Quatd(w / n, x / n, y / n, zz / n));
      const Quatd& got = res.clip.rot(t, j);
      CHECK(got.w() == expect.w());
      CHECK(got.x() == expect.x());
      CHECK(got.y() == expect.y());
      CHECK(got.z() == expect.z());
    }
  }
}

TEST_CASE("retarget equals decode(encode(.)) bit-exactly") {
  const SkeletonTopology ha = mini_human();
  const RetargetModel model = make_model(ha, mini_robot(), small_config());
  const MotionClip clip = random_clip(ha, 8, 36);

  const MotionClip direct = retarget(model, clip);
  const MotionClip composed = decode(model, Side::B, encode(model, Side::A, clip));
  REQUIRE(direct.frames() == composed.frames());
  for (int t = 0; t < direct.frames(); ++t) {
    CHECK(direct.root_translation[t] == composed.root_translation[t]);
    for (int j = 0; j < direct.joints(); ++j) {
      CHECK(direct.rot(t, j).coeffs() == composed.rot(t, j).coeffs());
    }
  }
}

TEST_CASE("retarget_batch is bit-identical to the sequential loop") {
  const SkeletonTopology ha = mini_human();
  const RetargetModel model = make_model(ha, mini_robot(), small_config());
  std::vector<MotionClip> clips;
  for (unsigned s = 0; s < 9; ++s) clips.push_back(random_clip(ha, 8, 50 + s));

  const std::vector<MotionClip> batched = retarget_batch(model, clips, 4);
  REQUIRE(batched.size() == clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const MotionClip seq = retarget(model, clips[i]);
    for (int t = 0; t < seq.frames(); ++t) {
      CHECK(batched[i].root_translation[t] == seq.root_translation[t]);
      for (int j = 0; j < seq.joints(); ++j) {
        CHECK(batched[i].rot(t, j).coeffs() == seq.rot(t, j).coeffs());
      }
    }
  }

  CHECK(retarget_batch(model, {}, 4).empty());

  // Identical inputs give identical outputs.
  std::vector<MotionClip> same(5, clips[0]);
  const auto outs = retarget_batch(model, same, 3);
  for (const auto& o : outs) {
    CHECK(o.rot(3, 2).coeffs() == outs[0].rot(3, 2).coeffs());
  }
}

TEST_CASE("retarget_batch collects per-clip errors with indices") {
  const SkeletonTopology ha = mini_human();
  const RetargetModel model = make_model(ha, mini_robot(), small_config());
  std::vector<MotionClip> clips;
  clips.push_back(random_clip(ha, 8, 60));
  clips.push_back(random_clip(ha, 12, 61));  // wrong window
  clips.push_back(random_clip(ha, 8, 62));
  try {
    retarget_batch(model, clips, 2);
    FAIL("expected BatchError");
  } catch (const BatchError& e) {
    REQUIRE(e.items().size() == 1);
    CHECK(e.items()[0].index == 1);
  }
}

TEST_CASE("f32 inference mirrors the double path to float precision") {
  const SkeletonTopology ha = mini_human();
  const RetargetModel model = make_model(ha, mini_robot(), small_config());
  std::vector<MotionClip> clips{random_clip(ha, 8, 70)};
  const MotionClip d = retarget_batch(model, clips, 1)[0];
  const MotionClip f = retarget_batch_f32(model, clips, 1)[0];
  for (int t = 0; t < d.frames(); ++t) {
    for (int j = 0; j < d.joints(); ++j) {
      CHECK(quat_geodesic_angle(d.rot(t, j), f.rot(t, j)) < 1e-3);
    }
  }
}

TEST_CASE("mismatched prototype counts are rejected") {
  // A two-joint chain with one end-effector reduces to a single prototype,
  // which cannot pair with the 5-prototype humanoid.
  SkeletonTopology stub = make_skeleton(
      "stub", {"a", "b"}, {kNoParent, 0}, {Vec3d::Zero(), Vec3d(0, 0, 1)},
      {1});
  CHECK_THROWS_AS(make_model(mini_human(), stub, small_config()),
                  TopologyMismatchError);
}

TEST_CASE("permuted joints with permuted parameters give the same latent") {
  const SkeletonTopology ha = mini_human();
  const SkeletonTopology rb = mini_robot();
  const RetargetModel model = make_model(ha, rb, small_config());
  const MotionClip clip = random_clip(ha, 8, 80);

  // Permutation of A-side joints (root stays at 0 is not required).
  const std::vector<int> perm{3, 0, 5, 1, 6, 2, 4};  // new index of old j
  const int n = ha.joint_count();

  SkeletonTopology pa;
  pa.name = ha.name;
  pa.joint_names.resize(n);
  pa.parent.resize(n);
  pa.offset.resize(n);
  pa.axes.resize(n);
  for (int j = 0; j < n; ++j) {
    pa.joint_names[perm[j]] = ha.joint_names[j];
    pa.parent[perm[j]] = ha.parent[j] == kNoParent ? kNoParent : perm[ha.parent[j]];
    pa.offset[perm[j]] = ha.offset[j];
    pa.axes[perm[j]] = ha.axes[j];
  }
  for (const int e : ha.end_effectors) pa.end_effectors.push_back(perm[e]);
  pa.neighbor_distance = ha.neighbor_distance;
  pa.validate();

  std::vector<PoolingMap> pool_pa = model.pool_a;
  for (int j = 0; j < n; ++j) {
    pool_pa[0].assign[perm[j]] = model.pool_a[0].assign[j];
  }

  RetargetModel pm = model;
  pm.skel_a = pa;
  pm.pool_a = pool_pa;
  const auto permute_layer = [&](SkeletalConvLayer& dst,
                                 const SkeletalConvLayer& src) {
    const auto new_nbrs = pa.neighborhoods();
    const Eigen::Index block =
        static_cast<Eigen::Index>(src.c_out) * src.c_in * src.kernel;
    dst.neighbors = new_nbrs;
    dst.weights.assign(n, Tensor());
    dst.bias.assign(n, Tensor());
    for (int i = 0; i < n; ++i) {
      dst.bias[perm[i]] = src.bias[i];
      const Eigen::Index blocks =
          static_cast<Eigen::Index>(src.neighbors[i].size());
      ArrayXd w(blocks * block);
      for (std::size_t k = 0; k < src.neighbors[i].size(); ++k) {
        const int pj = perm[src.neighbors[i][k]];
        const auto& lst = new_nbrs[perm[i]];
        const Eigen::Index pos =
            std::find(lst.begin(), lst.end(), pj) - lst.begin();
        w.segment(pos * block, block) =
            src.weights[i].values().segment(
                static_cast<Eigen::Index>(k) * block, block);
      }
      dst.weights[perm[i]] = Tensor::from_array(
          {blocks, src.c_out, src.c_in, src.kernel}, std::move(w));
    }
  };
  permute_layer(pm.enc_a.static1, model.enc_a.static1);
  permute_layer(pm.enc_a.dyn1, model.enc_a.dyn1);
  // Coarse-level layers keep super-joint ids, nothing to permute.

  MotionClip pclip = make_rest_clip(pa, 8);
  for (int t = 0; t < 8; ++t) {
    pclip.root_translation[t] = clip.root_translation[t];
    for (int j = 0; j < n; ++j) pclip.rot(t, perm[j]) = clip.rot(t, j);
  }

  const LatentCode z = encode(model, Side::A, clip);
  const LatentCode zp = encode(pm, Side::A, pclip);
  CHECK((z.v - zp.v).abs().maxCoeff() < 1e-12);
}

TEST_CASE("every encoder/decoder parameter gets gradient through the model") {
  const SkeletonTopology ha = mini_human();
  const SkeletonTopology rb = mini_robot();
  const RetargetModel model = make_model(ha, rb, small_config());
  const MotionClip clip_a = random_clip(ha, 8, 90);
  const MotionClip clip_b = random_clip(rb, 8, 91);

  // Autoencode both sides plus both cross paths so all four components join
  // the graph.
  const Tensor za = encode_taped(model, Side::A, clip_dyn_tensor(ha, clip_a));
  const Tensor zb = encode_taped(model, Side::B, clip_dyn_tensor(rb, clip_b));
  Tensor loss = mean(decode_taped(model, Side::A, za).raw);
  loss = add(loss, mean(decode_taped(model, Side::B, zb).raw));
  loss = add(loss, mean(decode_taped(model, Side::A, zb).raw));
  loss = add(loss, mean(decode_taped(model, Side::B, za).raw));
  backward(loss);

  for (const auto& [name, p] : named_parameters(model)) {
    INFO(name);
    CHECK(p.grad().abs().maxCoeff() > 0.0);
  }
}
