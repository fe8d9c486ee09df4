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

#include "ikmr/net.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <queue>
#include <thread>

#include "ikmr/rng.hpp"

namespace ikmr {

// ---------------------------------------------------------------------------
// Pooling machinery
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> neighborhoods_from_parents(
    const std::vector<int>& parent, int distance) {
  const int n = static_cast<int>(parent.size());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    if (parent[i] != kNoParent) {
      adj[i].push_back(parent[i]);
      adj[parent[i]].push_back(i);
    }
  }
  std::vector<std::vector<int>> out(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> dist(n, -1);
    std::queue<int> q;
    dist[i] = 0;
    q.push(i);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      out[i].push_back(u);
      if (dist[u] == distance) continue;
      for (const int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    std::sort(out[i].begin(), out[i].end());
  }
  return out;
}

std::vector<int> contracted_parents(const std::vector<int>& parent,
                                    const PoolingMap& map) {
  const int n = static_cast<int>(parent.size());
  if (static_cast<int>(map.assign.size()) != n) {
    throw IncompleteMapError("pooling map does not cover all joints");
  }
  std::vector<int> group_size(map.coarse, 0);
  std::vector<int> inner_edges(map.coarse, 0);
  std::vector<int> coarse_parent(map.coarse, kNoParent);
  std::vector<char> has_parent(map.coarse, 0);
  for (int i = 0; i < n; ++i) {
    const int g = map.assign[i];
    if (g < 0 || g >= map.coarse) {
      throw IncompleteMapError("pooling map target out of range");
    }
    ++group_size[g];
    const int p = parent[i];
    if (p == kNoParent) continue;
    const int gp = map.assign[p];
    if (gp == g) {
      ++inner_edges[g];
    } else {
      if (has_parent[g] && coarse_parent[g] != gp) {
        throw IncompleteMapError(
            "pooling preimage of super-joint " + std::to_string(g) +
            " is not a connected subtree");
      }
      coarse_parent[g] = gp;
      has_parent[g] = 1;
    }
  }
  for (int g = 0; g < map.coarse; ++g) {
    if (group_size[g] == 0) {
      throw IncompleteMapError("pooling map leaves super-joint " +
                               std::to_string(g) + " empty");
    }
    // A connected subtree with k nodes has exactly k-1 internal edges.
    if (inner_edges[g] != group_size[g] - 1) {
      throw IncompleteMapError("pooling preimage of super-joint " +
                               std::to_string(g) +
                               " is not a connected subtree");
    }
  }
  return coarse_parent;
}

namespace {

bool name_contains(const std::string& name, const char* needle) {
  std::string lower;
  lower.reserve(name.size());
  for (const char ch : name) {
    lower.push_back(static_cast<char>(std::tolower(ch)));
  }
  return lower.find(needle) != std::string::npos;
}

std::vector<int> joint_depths(const SkeletonTopology& skel) {
  std::vector<int> depth(skel.joint_count(), 0);
  for (int i = 0; i < skel.joint_count(); ++i) {
    int d = 0;
    for (int cur = i; skel.parent[cur] != kNoParent; cur = skel.parent[cur]) {
      ++d;
    }
    depth[i] = d;
  }
  return depth;
}

}  // namespace

LimbStructure classify_limbs(const SkeletonTopology& skel) {
  const int n = skel.joint_count();
  const int ee_count = static_cast<int>(skel.end_effectors.size());

  // Joints on >= 2 end-effector paths (or the root) form the torso; joints
  // on exactly one path form that end-effector's limb chain.
  std::vector<int> path_count(n, 0);
  LimbStructure out;
  out.limb.assign(n, -1);
  for (int e = 0; e < ee_count; ++e) {
    for (int cur = skel.end_effectors[e]; cur != kNoParent;
         cur = skel.parent[cur]) {
      ++path_count[cur];
      out.limb[cur] = e;
    }
  }
  const int root = skel.root();
  for (int i = 0; i < n; ++i) {
    if (path_count[i] != 1 || i == root) out.limb[i] = -1;
  }
  // Joints off every end-effector path inherit the nearest classified
  // ancestor's chain.
  for (int i = 0; i < n; ++i) {
    if (path_count[i] == 0 && i != root) {
      int cur = skel.parent[i];
      while (cur != kNoParent && path_count[cur] == 0 && cur != root) {
        cur = skel.parent[cur];
      }
      out.limb[i] = cur == kNoParent ? -1 : out.limb[cur];
    }
  }

  const std::vector<int> depth = joint_depths(skel);
  out.chains.resize(1 + ee_count);
  for (int id = -1; id < ee_count; ++id) {
    std::vector<int>& chain = out.chains[id + 1];
    for (int i = 0; i < n; ++i) {
      if (out.limb[i] == id) chain.push_back(i);
    }
    std::sort(chain.begin(), chain.end(), [&](int a, int b) {
      return depth[a] != depth[b] ? depth[a] < depth[b] : a < b;
    });
  }
  return out;
}

std::vector<PoolingMap> derive_pooling_maps(const SkeletonTopology& skel) {
  const int n = skel.joint_count();
  const int ee_count = static_cast<int>(skel.end_effectors.size());
  const LimbStructure limbs = classify_limbs(skel);

  // Level 1: collapse consecutive pairs along every chain.
  PoolingMap level1;
  level1.assign.assign(n, -1);
  std::vector<int> group_limb;  // level-1 group -> limb id (-1 torso)
  auto pair_chain = [&](const std::vector<int>& chain, int limb_id) {
    for (std::size_t k = 0; k < chain.size(); k += 2) {
      const int g = level1.coarse++;
      group_limb.push_back(limb_id);
      level1.assign[chain[k]] = g;
      if (k + 1 < chain.size()) level1.assign[chain[k + 1]] = g;
    }
  };
  for (int id = -1; id < ee_count; ++id) {
    pair_chain(limbs.chains[id + 1], id);
  }

  // Level 2: one prototype per non-head limb; torso and head limbs share
  // prototype 0. Limbs with no joints of their own (the end-effector sits on
  // the torso chain, e.g. a single-joint skeleton) get no prototype.
  PoolingMap level2;
  level2.assign.assign(level1.coarse, 0);
  std::vector<int> limb_proto(ee_count, 0);
  int next_proto = 1;
  for (int e = 0; e < ee_count; ++e) {
    const bool is_head =
        name_contains(skel.joint_names[skel.end_effectors[e]], "head");
    const bool empty_chain = limbs.chains[1 + e].empty();
    limb_proto[e] = (is_head || empty_chain) ? 0 : next_proto++;
  }
  level2.coarse = next_proto;
  for (int g = 0; g < level1.coarse; ++g) {
    level2.assign[g] = group_limb[g] < 0 ? 0 : limb_proto[group_limb[g]];
  }

  // Validate connectivity of both levels; throws on malformed trees.
  const std::vector<int> parents1 = contracted_parents(skel.parent, level1);
  contracted_parents(parents1, level2);
  return {level1, level2};
}

// ---------------------------------------------------------------------------
// Layers (taped path)
// ---------------------------------------------------------------------------

namespace {

SkeletalConvLayer make_layer(const std::vector<std::vector<int>>& neighbors,
                             int c_in, int c_out, int kernel, Rng& rng) {
  SkeletalConvLayer layer;
  layer.kernel = kernel;
  layer.c_in = c_in;
  layer.c_out = c_out;
  layer.neighbors = neighbors;
  const double bound = std::sqrt(1.0 / (c_in * kernel));
  layer.weights.resize(neighbors.size());
  layer.bias.resize(neighbors.size());
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    const Eigen::Index blocks = static_cast<Eigen::Index>(neighbors[j].size());
    ArrayXd w(blocks * c_out * c_in * kernel);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w(i) = rng.uniform(-bound, bound);
    }
    layer.weights[j] = Tensor::from_array({blocks, c_out, c_in, kernel},
                                          std::move(w), true);
    layer.bias[j] = Tensor::zeros({c_out}, true);
  }
  return layer;
}

}  // namespace

Tensor skeletal_conv(const SkeletalConvLayer& layer, const Tensor& features,
                     const std::vector<std::vector<int>>& adjacency) {
  if (adjacency != layer.neighbors) {
    throw AdjacencyMismatchError(
        "adjacency does not match the layer's neighbor structure");
  }
  if (features.rank() != 3 ||
      features.dim(1) != static_cast<Eigen::Index>(layer.neighbors.size()) ||
      features.dim(2) != layer.c_in) {
    throw ShapeMismatchError("skeletal_conv: features must be [T x J x C_in]");
  }
  const Eigen::Index j_count = features.dim(1);
  const int padding = (layer.kernel - 1) / 2;

  std::vector<Tensor> per_joint(j_count);
  for (Eigen::Index j = 0; j < j_count; ++j) {
    per_joint[j] = select_joint(features, j);
  }
  std::vector<Tensor> out;
  out.reserve(j_count);
  for (Eigen::Index i = 0; i < j_count; ++i) {
    const auto& nbrs = layer.neighbors[i];
    if (layer.weights[i].dim(0) != static_cast<Eigen::Index>(nbrs.size())) {
      throw AdjacencyMismatchError(
          "weight block count does not match |N_i| for joint " +
          std::to_string(i));
    }
    Tensor acc;
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      Tensor block = reshape(
          slice_first(layer.weights[i], static_cast<Eigen::Index>(k),
                      static_cast<Eigen::Index>(k) + 1),
          {layer.c_out, layer.c_in, layer.kernel});
      Tensor c = temporal_conv1d(per_joint[nbrs[k]], block, Tensor(), 1,
                                 padding);
      acc = k == 0 ? c : add(acc, c);
    }
    acc = scale(acc, 1.0 / static_cast<double>(nbrs.size()));
    out.push_back(add_channel_bias(acc, layer.bias[i]));
  }
  return stack_joints(out);
}

Tensor skeletal_pool(const Tensor& features, const PoolingMap& map,
                     int temporal_stride) {
  return grid_pool(features, map.assign, map.coarse, temporal_stride);
}

Tensor skeletal_unpool(const Tensor& features, const PoolingMap& map,
                       Eigen::Index fine_joints, int temporal_stride) {
  return grid_unpool(features, map.assign, fine_joints, temporal_stride);
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

namespace {

struct SideStructure {
  std::vector<std::vector<int>> adj0, adj1;
};

SideStructure side_structure(const SkeletonTopology& skel,
                             const std::vector<PoolingMap>& pools) {
  SideStructure s;
  s.adj0 = skel.neighborhoods();
  const std::vector<int> parents1 = contracted_parents(skel.parent, pools[0]);
  s.adj1 = neighborhoods_from_parents(parents1, skel.neighbor_distance);
  return s;
}

ComponentParams make_component(const SideStructure& st,
                               const ModelConfig& cfg, bool decoder,
                               Rng& rng) {
  ComponentParams p;
  const int cs = cfg.static_channels;
  p.static1 = make_layer(st.adj0, 3, cs, 1, rng);
  p.static2 = make_layer(st.adj1, cs, cs, 1, rng);
  if (!decoder) {
    p.dyn1 = make_layer(st.adj0, kDynChannels + cs, cfg.conv_channels1,
                        cfg.kernel, rng);
    p.dyn2 = make_layer(st.adj1, cfg.conv_channels1 + cs, cfg.conv_channels2,
                        cfg.kernel, rng);
  } else {
    p.dyn1 = make_layer(st.adj1, cfg.conv_channels2 + cs, cfg.conv_channels1,
                        cfg.kernel, rng);
    p.dyn2 = make_layer(st.adj0, cfg.conv_channels1 + cs, kDynChannels,
                        cfg.kernel, rng);
  }
  return p;
}

}  // namespace

RetargetModel make_model(const SkeletonTopology& skel_a,
                         const SkeletonTopology& skel_b,
                         const ModelConfig& config,
                         std::vector<PoolingMap> pool_a,
                         std::vector<PoolingMap> pool_b) {
  if (config.window < 4 || config.window % 4 != 0) {
    throw ConfigError("model window must be a positive multiple of 4");
  }
  RetargetModel m;
  m.config = config;
  m.skel_a = skel_a;
  m.skel_b = skel_b;
  m.pool_a = pool_a.empty() ? derive_pooling_maps(skel_a) : std::move(pool_a);
  m.pool_b = pool_b.empty() ? derive_pooling_maps(skel_b) : std::move(pool_b);
  if (m.pool_a.size() != 2 || m.pool_b.size() != 2) {
    throw ConfigError("expected exactly two pooling levels per side");
  }
  if (m.pool_a[1].coarse != m.pool_b[1].coarse) {
    throw TopologyMismatchError(
        "skeletons reduce to different prototype counts: " +
        std::to_string(m.pool_a[1].coarse) + " vs " +
        std::to_string(m.pool_b[1].coarse));
  }

  const SideStructure sa = side_structure(skel_a, m.pool_a);
  const SideStructure sb = side_structure(skel_b, m.pool_b);
  Rng rng(config.init_seed);
  m.enc_a = make_component(sa, config, false, rng);
  m.enc_b = make_component(sb, config, false, rng);
  m.dec_a = make_component(sa, config, true, rng);
  m.dec_b = make_component(sb, config, true, rng);
  return m;
}

namespace {

void collect_layer(const std::string& prefix, const SkeletalConvLayer& layer,
                   std::vector<std::pair<std::string, Tensor>>& out) {
  for (std::size_t j = 0; j < layer.weights.size(); ++j) {
    out.emplace_back(prefix + ".j" + std::to_string(j) + ".w",
                     layer.weights[j]);
    out.emplace_back(prefix + ".j" + std::to_string(j) + ".b", layer.bias[j]);
  }
}

void collect_component(const std::string& prefix, const ComponentParams& p,
                       std::vector<std::pair<std::string, Tensor>>& out) {
  collect_layer(prefix + ".static1", p.static1, out);
  collect_layer(prefix + ".static2", p.static2, out);
  collect_layer(prefix + ".dyn1", p.dyn1, out);
  collect_layer(prefix + ".dyn2", p.dyn2, out);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> named_parameters(
    const RetargetModel& model) {
  std::vector<std::pair<std::string, Tensor>> out;
  collect_component("enc_a", model.enc_a, out);
  collect_component("enc_b", model.enc_b, out);
  collect_component("dec_a", model.dec_a, out);
  collect_component("dec_b", model.dec_b, out);
  return out;
}

std::vector<Tensor> component_parameters(const RetargetModel& model,
                                         Component component) {
  const ComponentParams* p = nullptr;
  std::string prefix;
  switch (component) {
    case Component::EncA: p = &model.enc_a; prefix = "enc_a"; break;
    case Component::EncB: p = &model.enc_b; prefix = "enc_b"; break;
    case Component::DecA: p = &model.dec_a; prefix = "dec_a"; break;
    case Component::DecB: p = &model.dec_b; prefix = "dec_b"; break;
  }
  std::vector<std::pair<std::string, Tensor>> named;
  collect_component(prefix, *p, named);
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<Tensor> all_parameters(const RetargetModel& model) {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters(model)) out.push_back(t);
  return out;
}

namespace {

void assign_layer(SkeletalConvLayer& layer, const std::vector<Tensor>& params,
                  std::size_t& cursor) {
  for (std::size_t j = 0; j < layer.weights.size(); ++j) {
    const Tensor& w = params[cursor++];
    const Tensor& b = params[cursor++];
    if (w.shape() != layer.weights[j].shape() ||
        b.shape() != layer.bias[j].shape()) {
      throw ShapeMismatchError("set_parameters: shape mismatch");
    }
    layer.weights[j] = w;
    layer.bias[j] = b;
  }
}

void assign_component(ComponentParams& p, const std::vector<Tensor>& params,
                      std::size_t& cursor) {
  assign_layer(p.static1, params, cursor);
  assign_layer(p.static2, params, cursor);
  assign_layer(p.dyn1, params, cursor);
  assign_layer(p.dyn2, params, cursor);
}

}  // namespace

void set_parameters(RetargetModel& model, const std::vector<Tensor>& params) {
  if (params.size() != all_parameters(model).size()) {
    throw ShapeMismatchError("set_parameters: wrong parameter count");
  }
  std::size_t cursor = 0;
  assign_component(model.enc_a, params, cursor);
  assign_component(model.enc_b, params, cursor);
  assign_component(model.dec_a, params, cursor);
  assign_component(model.dec_b, params, cursor);
}

RetargetModel clone_model(const RetargetModel& model) {
  RetargetModel out = model;
  std::vector<Tensor> fresh;
  for (const Tensor& p : all_parameters(model)) {
    fresh.push_back(Tensor::from_array(p.shape(), p.values(), true));
  }
  set_parameters(out, fresh);
  return out;
}

// ---------------------------------------------------------------------------
// Clip <-> tensor conversion
// ---------------------------------------------------------------------------

Tensor clip_dyn_tensor(const SkeletonTopology& skel, const MotionClip& clip) {
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  const int root = skel.root();
  ArrayXd v = ArrayXd::Zero(static_cast<Eigen::Index>(t_count) * j_count *
                            kDynChannels);
  for (int t = 0; t < t_count; ++t) {
    for (int j = 0; j < j_count; ++j) {
      const Quatd& q = clip.rot(t, j);
      const Eigen::Index base =
          (static_cast<Eigen::Index>(t) * j_count + j) * kDynChannels;
      v(base + 0) = q.w();
      v(base + 1) = q.x();
      v(base + 2) = q.y();
      v(base + 3) = q.z();
      if (j == root) {
        v(base + 4) = clip.root_translation[t].x();
        v(base + 5) = clip.root_translation[t].y();
        v(base + 6) = clip.root_translation[t].z();
      }
    }
  }
  return Tensor::from_array({t_count, j_count, kDynChannels}, std::move(v));
}

Tensor clip_rot_tensor(const MotionClip& clip) {
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  ArrayXd v(static_cast<Eigen::Index>(t_count) * j_count * 4);
  for (int t = 0; t < t_count; ++t) {
    for (int j = 0; j < j_count; ++j) {
      const Quatd& q = clip.rot(t, j);
      const Eigen::Index base =
          (static_cast<Eigen::Index>(t) * j_count + j) * 4;
      v(base + 0) = q.w();
      v(base + 1) = q.x();
      v(base + 2) = q.y();
      v(base + 3) = q.z();
    }
  }
  return Tensor::from_array({t_count, j_count, 4}, std::move(v));
}

Tensor clip_root_tensor(const MotionClip& clip) {
  const int t_count = clip.frames();
  ArrayXd v(static_cast<Eigen::Index>(t_count) * 3);
  for (int t = 0; t < t_count; ++t) {
    v(3 * t + 0) = clip.root_translation[t].x();
    v(3 * t + 1) = clip.root_translation[t].y();
    v(3 * t + 2) = clip.root_translation[t].z();
  }
  return Tensor::from_array({t_count, 3}, std::move(v));
}

Tensor skeleton_static_tensor(const SkeletonTopology& skel) {
  const int j_count = skel.joint_count();
  ArrayXd v(static_cast<Eigen::Index>(j_count) * 3);
  for (int j = 0; j < j_count; ++j) {
    v(3 * j + 0) = skel.offset[j].x();
    v(3 * j + 1) = skel.offset[j].y();
    v(3 * j + 2) = skel.offset[j].z();
  }
  return Tensor::from_array({1, j_count, 3}, std::move(v));
}

// ---------------------------------------------------------------------------
// Taped forward passes
// ---------------------------------------------------------------------------

namespace {

struct TapedStatics {
  Tensor s1;  // [1 x J  x Cs]
  Tensor s2;  // [1 x J1 x Cs]
};

TapedStatics static_branch(const ComponentParams& p,
                           const SkeletonTopology& skel,
                           const std::vector<PoolingMap>& pools) {
  TapedStatics st;
  const Tensor input = skeleton_static_tensor(skel);
  st.s1 = tanh_op(skeletal_conv(p.static1, input, p.static1.neighbors));
  const Tensor pooled = skeletal_pool(st.s1, pools[0], 1);
  st.s2 = tanh_op(skeletal_conv(p.static2, pooled, p.static2.neighbors));
  return st;
}

const ComponentParams& encoder_of(const RetargetModel& m, Side s) {
  return s == Side::A ? m.enc_a : m.enc_b;
}
const ComponentParams& decoder_of(const RetargetModel& m, Side s) {
  return s == Side::A ? m.dec_a : m.dec_b;
}

}  // namespace

Tensor encode_taped(const RetargetModel& model, Side side, const Tensor& dyn) {
  const ComponentParams& p = encoder_of(model, side);
  const SkeletonTopology& skel = model.skeleton(side);
  const auto& pools = model.pooling(side);
  const Eigen::Index t = dyn.dim(0);
  const TapedStatics st = static_branch(p, skel, pools);

  Tensor d0 = concat_last({dyn, tile_time(st.s1, t)});
  Tensor h1 = skeletal_pool(
      tanh_op(skeletal_conv(p.dyn1, d0, p.dyn1.neighbors)), pools[0], 2);
  Tensor d1 = concat_last({h1, tile_time(st.s2, t / 2)});
  return skeletal_pool(
      tanh_op(skeletal_conv(p.dyn2, d1, p.dyn2.neighbors)), pools[1], 2);
}

DecodeTaped decode_taped(const RetargetModel& model, Side side,
                         const Tensor& z) {
  const ComponentParams& p = decoder_of(model, side);
  const SkeletonTopology& skel = model.skeleton(side);
  const auto& pools = model.pooling(side);
  const Eigen::Index j1 = pools[0].coarse;
  const Eigen::Index j0 = skel.joint_count();
  if (z.rank() != 3 || z.dim(1) != pools[1].coarse ||
      z.dim(2) != model.config.conv_channels2) {
    throw ShapeMismatchError("decode: latent shape does not match the model");
  }
  const Eigen::Index t_half = z.dim(0) * 2;
  const TapedStatics st = static_branch(p, skel, pools);

  Tensor u1 = skeletal_unpool(z, pools[1], j1, 2);
  Tensor g1 = tanh_op(skeletal_conv(
      p.dyn1, concat_last({u1, tile_time(st.s2, t_half)}), p.dyn1.neighbors));
  Tensor u2 = skeletal_unpool(g1, pools[0], j0, 2);
  Tensor raw = skeletal_conv(
      p.dyn2, concat_last({u2, tile_time(st.s1, t_half * 2)}),
      p.dyn2.neighbors);

  DecodeTaped out;
  out.raw = raw;
  out.rot_raw = slice_last(raw, 0, 4);
  out.root = slice_last(select_joint(raw, skel.root()), 4, kDynChannels);
  return out;
}

Tensor dyn_from_decode(const RetargetModel& model, Side side,
                       const DecodeTaped& decoded) {
  const SkeletonTopology& skel = model.skeleton(side);
  const Eigen::Index t = decoded.raw.dim(0);
  const Eigen::Index j = decoded.raw.dim(1);
  Tensor rot_n = row_l2_normalize(decoded.rot_raw);
  // Translation channels: zero everywhere except the root joint.
  std::vector<Tensor> cols(j);
  const int root = skel.root();
  for (Eigen::Index jj = 0; jj < j; ++jj) {
    cols[jj] = jj == root ? decoded.root : Tensor::zeros({t, 3});
  }
  Tensor trans = stack_joints(cols);
  return concat_last({rot_n, trans});
}

// ---------------------------------------------------------------------------
// Plain inference path, templated on scalar
// ---------------------------------------------------------------------------

namespace {

template <typename S>
using RowMatT =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct PlainLayer {
  int kernel, c_in, c_out;
  std::vector<std::vector<int>> neighbors;
  std::vector<std::vector<RowMatT<S>>> wm;  // [(K*Cin) x Cout] per block
  std::vector<VecT<S>> bias;
};

template <typename S>
PlainLayer<S> plain_layer(const SkeletalConvLayer& layer) {
  PlainLayer<S> out;
  out.kernel = layer.kernel;
  out.c_in = layer.c_in;
  out.c_out = layer.c_out;
  out.neighbors = layer.neighbors;
  out.wm.resize(layer.weights.size());
  out.bias.resize(layer.bias.size());
  const Eigen::Index block_size =
      static_cast<Eigen::Index>(layer.c_out) * layer.c_in * layer.kernel;
  for (std::size_t j = 0; j < layer.weights.size(); ++j) {
    const Eigen::Index blocks = layer.weights[j].dim(0);
    out.wm[j].reserve(blocks);
    for (Eigen::Index n = 0; n < blocks; ++n) {
      const double* src = layer.weights[j].values().data() + n * block_size;
      RowMatT<S> m(layer.kernel * layer.c_in, layer.c_out);
      for (int co = 0; co < layer.c_out; ++co) {
        for (int ci = 0; ci < layer.c_in; ++ci) {
          for (int kk = 0; kk < layer.kernel; ++kk) {
            m(kk * layer.c_in + ci, co) =
                static_cast<S>(src[(co * layer.c_in + ci) * layer.kernel + kk]);
          }
        }
      }
      out.wm[j].push_back(std::move(m));
    }
    out.bias[j] = VecT<S>(layer.c_out);
    for (int c = 0; c < layer.c_out; ++c) {
      out.bias[j](c) = static_cast<S>(layer.bias[j].values()(c));
    }
  }
  return out;
}

template <typename S>
struct PlainComponent {
  PlainLayer<S> static1, static2, dyn1, dyn2;
};

template <typename S>
struct PlainModel {
  ModelConfig config;
  const SkeletonTopology* skel_a;
  const SkeletonTopology* skel_b;
  const std::vector<PoolingMap>* pool_a;
  const std::vector<PoolingMap>* pool_b;
  PlainComponent<S> enc_a, enc_b, dec_a, dec_b;

  const SkeletonTopology& skeleton(Side s) const {
    return s == Side::A ? *skel_a : *skel_b;
  }
  const std::vector<PoolingMap>& pooling(Side s) const {
    return s == Side::A ? *pool_a : *pool_b;
  }
  const PlainComponent<S>& encoder(Side s) const {
    return s == Side::A ? enc_a : enc_b;
  }
  const PlainComponent<S>& decoder(Side s) const {
    return s == Side::A ? dec_a : dec_b;
  }
};

template <typename S>
PlainComponent<S> plain_component(const ComponentParams& p) {
  return {plain_layer<S>(p.static1), plain_layer<S>(p.static2),
          plain_layer<S>(p.dyn1), plain_layer<S>(p.dyn2)};
}

template <typename S>
PlainModel<S> make_plain_model(const RetargetModel& m) {
  PlainModel<S> out;
  out.config = m.config;
  out.skel_a = &m.skel_a;
  out.skel_b = &m.skel_b;
  out.pool_a = &m.pool_a;
  out.pool_b = &m.pool_b;
  out.enc_a = plain_component<S>(m.enc_a);
  out.enc_b = plain_component<S>(m.enc_b);
  out.dec_a = plain_component<S>(m.dec_a);
  out.dec_b = plain_component<S>(m.dec_b);
  return out;
}

// im2col with stride 1 and same padding, matching the taped conv layout.
template <typename S>
RowMatT<S> im2col_same(const Eigen::Ref<const RowMatT<S>>& in, int k) {
  const Eigen::Index t = in.rows(), c = in.cols();
  const int pad = (k - 1) / 2;
  RowMatT<S> x = RowMatT<S>::Zero(t, k * c);
  for (Eigen::Index to = 0; to < t; ++to) {
    for (int kk = 0; kk < k; ++kk) {
      const Eigen::Index tt = to - pad + kk;
      if (tt >= 0 && tt < t) x.block(to, kk * c, 1, c) = in.row(tt);
    }
  }
  return x;
}

template <typename S>
Grid3<S> plain_skeletal_conv(const PlainLayer<S>& layer, const Grid3<S>& in) {
  const Eigen::Index t = in.t, j = in.j;
  // Per-source-joint im2col, shared across all destinations.
  std::vector<RowMatT<S>> cols(j);
  {
    RowMatT<S> joint(t, in.c);
    for (Eigen::Index jj = 0; jj < j; ++jj) {
      for (Eigen::Index tt = 0; tt < t; ++tt) {
        for (Eigen::Index cc = 0; cc < in.c; ++cc) {
          joint(tt, cc) = in.at(tt, jj, cc);
        }
      }
      cols[jj] = im2col_same<S>(joint, layer.kernel);
    }
  }
  Grid3<S> out = Grid3<S>::zeros(t, j, layer.c_out);
  RowMatT<S> acc(t, layer.c_out);
  for (Eigen::Index i = 0; i < j; ++i) {
    const auto& nbrs = layer.neighbors[i];
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (k == 0) {
        acc.noalias() = cols[nbrs[k]] * layer.wm[i][k];
      } else {
        acc.noalias() += cols[nbrs[k]] * layer.wm[i][k];
      }
    }
    acc *= S(1) / static_cast<S>(nbrs.size());
    acc.rowwise() += layer.bias[i].transpose();
    for (Eigen::Index tt = 0; tt < t; ++tt) {
      for (int cc = 0; cc < layer.c_out; ++cc) {
        out.at(tt, i, cc) = acc(tt, cc);
      }
    }
  }
  return out;
}

template <typename S>
Grid3<S> plain_tanh(Grid3<S> g) {
  g.v = g.v.tanh();
  return g;
}

template <typename S>
Grid3<S> plain_pool(const Grid3<S>& in, const PoolingMap& map, int ts) {
  const Eigen::Index t_out = in.t / ts;
  std::vector<int> group_size(map.coarse, 0);
  for (const int g : map.assign) ++group_size[g];
  Grid3<S> out = Grid3<S>::zeros(t_out, map.coarse, in.c);
  for (Eigen::Index to = 0; to < t_out; ++to) {
    for (int s = 0; s < ts; ++s) {
      const Eigen::Index tt = to * ts + s;
      for (Eigen::Index jj = 0; jj < in.j; ++jj) {
        const int g = map.assign[jj];
        for (Eigen::Index cc = 0; cc < in.c; ++cc) {
          out.at(to, g, cc) += in.at(tt, jj, cc);
        }
      }
    }
  }
  for (Eigen::Index to = 0; to < t_out; ++to) {
    for (int g = 0; g < map.coarse; ++g) {
      const S inv = S(1) / static_cast<S>(group_size[g] * ts);
      for (Eigen::Index cc = 0; cc < in.c; ++cc) out.at(to, g, cc) *= inv;
    }
  }
  return out;
}

template <typename S>
Grid3<S> plain_unpool(const Grid3<S>& in, const PoolingMap& map,
                      Eigen::Index fine, int ts) {
  Grid3<S> out = Grid3<S>::zeros(in.t * ts, fine, in.c);
  for (Eigen::Index to = 0; to < out.t; ++to) {
    const Eigen::Index ti = to / ts;
    for (Eigen::Index jj = 0; jj < fine; ++jj) {
      for (Eigen::Index cc = 0; cc < in.c; ++cc) {
        out.at(to, jj, cc) = in.at(ti, map.assign[jj], cc);
      }
    }
  }
  return out;
}

template <typename S>
Grid3<S> plain_concat(const Grid3<S>& a, const Grid3<S>& b) {
  Grid3<S> out = Grid3<S>::zeros(a.t, a.j, a.c + b.c);
  for (Eigen::Index tt = 0; tt < a.t; ++tt) {
    for (Eigen::Index jj = 0; jj < a.j; ++jj) {
      for (Eigen::Index cc = 0; cc < a.c; ++cc) {
        out.at(tt, jj, cc) = a.at(tt, jj, cc);
      }
      for (Eigen::Index cc = 0; cc < b.c; ++cc) {
        out.at(tt, jj, a.c + cc) = b.at(tt, jj, cc);
      }
    }
  }
  return out;
}

template <typename S>
Grid3<S> plain_tile(const Grid3<S>& x, Eigen::Index t) {
  Grid3<S> out = Grid3<S>::zeros(t, x.j, x.c);
  for (Eigen::Index tt = 0; tt < t; ++tt) {
    for (Eigen::Index jj = 0; jj < x.j; ++jj) {
      for (Eigen::Index cc = 0; cc < x.c; ++cc) {
        out.at(tt, jj, cc) = x.at(0, jj, cc);
      }
    }
  }
  return out;
}

template <typename S>
struct PlainStatics {
  Grid3<S> s1, s2;
};

template <typename S>
PlainStatics<S> plain_static_branch(const PlainComponent<S>& p,
                                    const SkeletonTopology& skel,
                                    const std::vector<PoolingMap>& pools) {
  Grid3<S> input = Grid3<S>::zeros(1, skel.joint_count(), 3);
  for (int j = 0; j < skel.joint_count(); ++j) {
    input.at(0, j, 0) = static_cast<S>(skel.offset[j].x());
    input.at(0, j, 1) = static_cast<S>(skel.offset[j].y());
    input.at(0, j, 2) = static_cast<S>(skel.offset[j].z());
  }
  PlainStatics<S> st;
  st.s1 = plain_tanh(plain_skeletal_conv(p.static1, input));
  st.s2 = plain_tanh(plain_skeletal_conv(p.static2, plain_pool(st.s1, pools[0], 1)));
  return st;
}

template <typename S>
Grid3<S> plain_dyn_grid(const SkeletonTopology& skel, const MotionClip& clip) {
  const int t = clip.frames(), j = clip.joints();
  const int root = skel.root();
  Grid3<S> g = Grid3<S>::zeros(t, j, kDynChannels);
  for (int tt = 0; tt < t; ++tt) {
    for (int jj = 0; jj < j; ++jj) {
      const Quatd& q = clip.rot(tt, jj);
      g.at(tt, jj, 0) = static_cast<S>(q.w());
      g.at(tt, jj, 1) = static_cast<S>(q.x());
      g.at(tt, jj, 2) = static_cast<S>(q.y());
      g.at(tt, jj, 3) = static_cast<S>(q.z());
      if (jj == root) {
        g.at(tt, jj, 4) = static_cast<S>(clip.root_translation[tt].x());
        g.at(tt, jj, 5) = static_cast<S>(clip.root_translation[tt].y());
        g.at(tt, jj, 6) = static_cast<S>(clip.root_translation[tt].z());
      }
    }
  }
  return g;
}

template <typename S>
Grid3<S> plain_encode_impl(const PlainModel<S>& m, Side side,
                           const MotionClip& clip) {
  const SkeletonTopology& skel = m.skeleton(side);
  const auto& pools = m.pooling(side);
  const PlainComponent<S>& p = m.encoder(side);
  const Eigen::Index t = clip.frames();

  const PlainStatics<S> st = plain_static_branch(p, skel, pools);
  Grid3<S> d0 = plain_concat(plain_dyn_grid<S>(skel, clip), plain_tile(st.s1, t));
  Grid3<S> h1 =
      plain_pool(plain_tanh(plain_skeletal_conv(p.dyn1, d0)), pools[0], 2);
  Grid3<S> d1 = plain_concat(h1, plain_tile(st.s2, t / 2));
  return plain_pool(plain_tanh(plain_skeletal_conv(p.dyn2, d1)), pools[1], 2);
}

template <typename S>
Grid3<S> plain_decode_raw(const PlainModel<S>& m, Side side,
                          const Grid3<S>& z) {
  const SkeletonTopology& skel = m.skeleton(side);
  const auto& pools = m.pooling(side);
  const PlainComponent<S>& p = m.decoder(side);
  const Eigen::Index j1 = pools[0].coarse;
  const Eigen::Index j0 = skel.joint_count();
  const Eigen::Index t_half = z.t * 2;

  const PlainStatics<S> st = plain_static_branch(p, skel, pools);
  Grid3<S> u1 = plain_unpool(z, pools[1], j1, 2);
  Grid3<S> g1 = plain_tanh(plain_skeletal_conv(
      p.dyn1, plain_concat(u1, plain_tile(st.s2, t_half))));
  Grid3<S> u2 = plain_unpool(g1, pools[0], j0, 2);
  return plain_skeletal_conv(
      p.dyn2, plain_concat(u2, plain_tile(st.s1, t_half * 2)));
}

// Raw decoder output to a valid MotionClip: rows normalized by their L2 norm
// and flipped to the canonical hemisphere; degenerate rows become identity.
template <typename S>
MotionClip clip_from_raw(const SkeletonTopology& skel, const Grid3<S>& raw,
                         double fps) {
  MotionClip clip;
  clip.skeleton = skel.name;
  clip.fps = fps;
  const Eigen::Index t = raw.t, j = raw.j;
  clip.root_translation.resize(t);
  clip.rotations.resize(t * j);
  const int root = skel.root();
  for (Eigen::Index tt = 0; tt < t; ++tt) {
    clip.root_translation[tt] =
        Vec3d(static_cast<double>(raw.at(tt, root, 4)),
              static_cast<double>(raw.at(tt, root, 5)),
              static_cast<double>(raw.at(tt, root, 6)));
    for (Eigen::Index jj = 0; jj < j; ++jj) {
      const double w = static_cast<double>(raw.at(tt, jj, 0));
      const double x = static_cast<double>(raw.at(tt, jj, 1));
      const double y = static_cast<double>(raw.at(tt, jj, 2));
      const double z = static_cast<double>(raw.at(tt, jj, 3));
      const double sq = w * w + x * x + y * y + z * z;
      Quatd q;
      if (sq < 1e-30) {
        q = Quatd::Identity();
      } else {
        const double n = std::sqrt(sq);
        q = quat_canonical(Quatd(w / n, x / n, y / n, z / n));
      }
      clip.rot(static_cast<int>(tt), static_cast<int>(jj)) = q;
    }
  }
  return clip;
}

void check_encode_input(const RetargetModel& model, Side side,
                        const MotionClip& clip) {
  const SkeletonTopology& skel = model.skeleton(side);
  if (clip.frames() != model.config.window) {
    throw WindowLengthMismatchError(
        "clip has " + std::to_string(clip.frames()) + " frames, model window is " +
        std::to_string(model.config.window));
  }
  clip.validate(&skel);
}

}  // namespace

LatentCode encode(const RetargetModel& model, Side side,
                  const MotionClip& clip) {
  check_encode_input(model, side, clip);
  const PlainModel<double> pm = make_plain_model<double>(model);
  return plain_encode_impl(pm, side, clip);
}

DecodeResult decode_full(const RetargetModel& model, Side side,
                         const LatentCode& z) {
  if (z.t != model.latent_frames() || z.j != model.pooling(side)[1].coarse ||
      z.c != model.config.conv_channels2) {
    throw ShapeMismatchError("decode: latent shape does not match the model");
  }
  const PlainModel<double> pm = make_plain_model<double>(model);
  DecodeResult out;
  out.raw = plain_decode_raw(pm, side, z);
  out.clip = clip_from_raw(model.skeleton(side), out.raw, 30.0);
  return out;
}

MotionClip decode(const RetargetModel& model, Side side, const LatentCode& z) {
  return decode_full(model, side, z).clip;
}

MotionClip retarget(const RetargetModel& model, const MotionClip& clip_a) {
  check_encode_input(model, Side::A, clip_a);
  const PlainModel<double> pm = make_plain_model<double>(model);
  const Grid3<double> z = plain_encode_impl(pm, Side::A, clip_a);
  const Grid3<double> raw = plain_decode_raw(pm, Side::B, z);
  MotionClip out = clip_from_raw(model.skel_b, raw, clip_a.fps);
  return out;
}

namespace {

template <typename S>
std::vector<MotionClip> batch_impl(const RetargetModel& model,
                                   const std::vector<MotionClip>& clips,
                                   int workers) {
  if (clips.empty()) return {};
  const PlainModel<S> pm = make_plain_model<S>(model);
  const int n = static_cast<int>(clips.size());
  workers = std::max(1, std::min(workers, n));

  std::vector<MotionClip> out(n);
  std::vector<BatchItemError> errors;
  std::mutex error_mu;
  std::atomic<int> next{0};

  auto run = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        check_encode_input(model, Side::A, clips[i]);
        const Grid3<S> z = plain_encode_impl(pm, Side::A, clips[i]);
        const Grid3<S> raw = plain_decode_raw(pm, Side::B, z);
        out[i] = clip_from_raw(model.skel_b, raw, clips[i].fps);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mu);
        errors.push_back({i, e.what()});
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }

  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end(),
              [](const BatchItemError& a, const BatchItemError& b) {
                return a.index < b.index;
              });
    throw BatchError("retarget_batch: " + std::to_string(errors.size()) +
                         " clip(s) failed; first at index " +
                         std::to_string(errors[0].index) + ": " +
                         errors[0].message,
                     errors);
  }
  return out;
}

}  // namespace

std::vector<MotionClip> retarget_batch(const RetargetModel& model,
                                       const std::vector<MotionClip>& clips,
                                       int workers) {
  return batch_impl<double>(model, clips, workers);
}

std::vector<MotionClip> retarget_batch_f32(const RetargetModel& model,
                                           const std::vector<MotionClip>& clips,
                                           int workers) {
  return batch_impl<float>(model, clips, workers);
}

}  // namespace ikmr
