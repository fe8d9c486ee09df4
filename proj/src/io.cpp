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

#include "ikmr/io.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

namespace ikmr {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return j;
}

void check_version(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw FormatError("'" + path + "': missing format_version");
  }
  if (j["format_version"] != kFormatVersion) {
    throw FormatError("'" + path + "': unsupported format_version " +
                      j["format_version"].dump());
  }
}

void dump_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

json vec3_json(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d vec3_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError(what + " must be a 3-element array");
  }
  return Vec3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json motion_json(const MotionClip& clip) {
  json root = json::array();
  for (const auto& rt : clip.root_translation) root.push_back(vec3_json(rt));
  json rots = json::array();
  for (int t = 0; t < clip.frames(); ++t) {
    json frame = json::array();
    for (int j = 0; j < clip.joints(); ++j) {
      const Quatd& q = clip.rot(t, j);
      frame.push_back(json::array({q.w(), q.x(), q.y(), q.z()}));
    }
    rots.push_back(std::move(frame));
  }
  return json{{"format_version", kFormatVersion},
              {"skeleton", clip.skeleton},
              {"fps", clip.fps},
              {"root_translation", std::move(root)},
              {"rotations", std::move(rots)}};
}

MotionClip motion_from(const json& j, const std::string& path) {
  check_version(j, path);
  MotionClip clip;
  try {
    clip.skeleton = j.at("skeleton").get<std::string>();
    clip.fps = j.at("fps").get<double>();
    const json& root = j.at("root_translation");
    const json& rots = j.at("rotations");
    if (!root.is_array() || !rots.is_array() || root.size() != rots.size() ||
        root.empty()) {
      throw FormatError("root_translation/rotations must be equal-length "
                        "non-empty arrays");
    }
    const std::size_t t_count = root.size();
    const std::size_t j_count = rots[0].size();
    clip.root_translation.reserve(t_count);
    clip.rotations.reserve(t_count * j_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      clip.root_translation.push_back(
          vec3_from(root[t], "root_translation[" + std::to_string(t) + "]"));
      if (rots[t].size() != j_count) {
        throw FormatError("ragged rotations array at frame " +
                          std::to_string(t));
      }
      for (std::size_t jj = 0; jj < j_count; ++jj) {
        const json& q = rots[t][jj];
        if (!q.is_array() || q.size() != 4) {
          throw FormatError("rotation at frame " + std::to_string(t) +
                            " joint " + std::to_string(jj) +
                            " must be [w,x,y,z]");
        }
        clip.rotations.emplace_back(q[0].get<double>(), q[1].get<double>(),
                                    q[2].get<double>(), q[3].get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  try {
    clip.validate();
  } catch (const Error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return clip;
}

}  // namespace

SkeletonTopology load_skeleton(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  SkeletonTopology skel;
  try {
    skel.name = j.at("name").get<std::string>();
    bool any_axis = false;
    for (const json& joint : j.at("joints")) {
      skel.joint_names.push_back(joint.at("name").get<std::string>());
      skel.parent.push_back(joint.at("parent").get<int>());
      skel.offset.push_back(vec3_from(joint.at("offset"), "offset"));
      if (joint.contains("axis")) any_axis = true;
    }
    if (any_axis) {
      skel.axes.reserve(skel.joint_names.size());
      int index = 0;
      for (const json& joint : j.at("joints")) {
        skel.axes.push_back(joint.contains("axis")
                                ? vec3_from(joint["axis"], "axis")
                                : SkeletonTopology::default_axis(index));
        ++index;
      }
    }
    for (const json& e : j.at("end_effectors")) {
      skel.end_effectors.push_back(e.get<int>());
    }
    skel.neighbor_distance = j.at("neighbor_distance").get<int>();
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  try {
    skel.validate();
  } catch (const Error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return skel;
}

void save_skeleton(const std::string& path, const SkeletonTopology& skel) {
  json joints = json::array();
  for (int i = 0; i < skel.joint_count(); ++i) {
    joints.push_back(json{{"name", skel.joint_names[i]},
                          {"parent", skel.parent[i]},
                          {"offset", vec3_json(skel.offset[i])},
                          {"axis", vec3_json(skel.axes[i])}});
  }
  dump_file(path, json{{"format_version", kFormatVersion},
                       {"name", skel.name},
                       {"joints", std::move(joints)},
                       {"end_effectors", skel.end_effectors},
                       {"neighbor_distance", skel.neighbor_distance}});
}

MotionClip load_motion(const std::string& path) {
  return motion_from(parse_file(path), path);
}

void save_motion(const std::string& path, const MotionClip& clip) {
  dump_file(path, motion_json(clip));
}

DynamicsLimits load_limits(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  DynamicsLimits limits;
  try {
    limits.v_max = j.at("v_max").get<double>();
    limits.a_max = j.at("a_max").get<double>();
    limits.ground_height = j.at("ground_height").get<double>();
    for (const auto& [key, value] : j.items()) {
      if (key == "format_version" || key == "v_max" || key == "a_max" ||
          key == "ground_height") {
        continue;
      }
      if (!value.is_object() || !value.contains("lo") ||
          !value.contains("hi")) {
        throw FormatError("joint entry '" + key + "' must be {lo, hi}");
      }
      limits.joints[key] = {value["lo"].get<double>(),
                            value["hi"].get<double>()};
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  try {
    limits.validate();
  } catch (const Error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return limits;
}

void save_limits(const std::string& path, const DynamicsLimits& limits) {
  json j{{"format_version", kFormatVersion},
         {"v_max", limits.v_max},
         {"a_max", limits.a_max},
         {"ground_height", limits.ground_height}};
  for (const auto& [name, lim] : limits.joints) {
    j[name] = json{{"lo", lim.lo}, {"hi", lim.hi}};
  }
  dump_file(path, j);
}

PairedDataset load_dataset(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  PairedDataset ds;
  try {
    ds.skeleton_a = j.at("skeleton_a").get<std::string>();
    ds.skeleton_b = j.at("skeleton_b").get<std::string>();
    ds.fps = j.at("fps").get<double>();
    ds.window = j.at("window").get<int>();
    ds.provenance = j.at("provenance").get<std::string>();
    for (const json& pair : j.at("pairs")) {
      ds.pairs.emplace_back(motion_from(pair.at("clip_a"), path),
                            motion_from(pair.at("clip_b"), path));
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  for (const auto& [a, b] : ds.pairs) {
    if (a.skeleton != ds.skeleton_a || b.skeleton != ds.skeleton_b ||
        a.frames() != ds.window || b.frames() != ds.window) {
      throw FormatError("'" + path + "': pair does not match dataset header");
    }
  }
  return ds;
}

void save_dataset(const std::string& path, const PairedDataset& dataset) {
  json pairs = json::array();
  for (const auto& [a, b] : dataset.pairs) {
    pairs.push_back(json{{"clip_a", motion_json(a)},
                         {"clip_b", motion_json(b)}});
  }
  dump_file(path, json{{"format_version", kFormatVersion},
                       {"skeleton_a", dataset.skeleton_a},
                       {"skeleton_b", dataset.skeleton_b},
                       {"fps", dataset.fps},
                       {"window", dataset.window},
                       {"provenance", dataset.provenance},
                       {"pairs", std::move(pairs)}});
}

// ---------------------------------------------------------------------------
// Binary checkpoint container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'K', 'M', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("'" + path + "': truncated checkpoint");
  return value;
}

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensorData>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kCkptVersion);
  write_raw(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_raw(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_raw(out, static_cast<std::uint32_t>(t.shape.size()));
    for (const auto d : t.shape) {
      write_raw(out, static_cast<std::uint64_t>(d));
    }
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!out) throw FormatError("failed writing '" + path + "'");
}

std::vector<NamedTensorData> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("'" + path + "': bad checkpoint magic");
  }
  const auto version = read_raw<std::uint32_t>(in, path);
  if (version != kCkptVersion) {
    throw FormatError("'" + path + "': unsupported checkpoint version " +
                      std::to_string(version));
  }
  const auto count = read_raw<std::uint32_t>(in, path);
  std::vector<NamedTensorData> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensorData t;
    const auto name_len = read_raw<std::uint32_t>(in, path);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const auto rank = read_raw<std::uint32_t>(in, path);
    Eigen::Index numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = read_raw<std::uint64_t>(in, path);
      t.shape.push_back(static_cast<Eigen::Index>(d));
      numel *= static_cast<Eigen::Index>(d);
    }
    t.values.resize(numel);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw FormatError("'" + path + "': truncated checkpoint");
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

namespace {

json pooling_json(const std::vector<PoolingMap>& pools) {
  json out = json::array();
  for (const auto& p : pools) {
    out.push_back(json{{"assign", p.assign}, {"coarse", p.coarse}});
  }
  return out;
}

std::vector<PoolingMap> pooling_from(const json& j) {
  std::vector<PoolingMap> out;
  for (const json& p : j) {
    PoolingMap map;
    map.coarse = p.at("coarse").get<int>();
    for (const json& a : p.at("assign")) map.assign.push_back(a.get<int>());
    out.push_back(std::move(map));
  }
  return out;
}

}  // namespace

void save_model(const std::string& stem, const RetargetModel& model,
                const ModelMeta& meta,
                const std::vector<NamedTensorData>& extras) {
  std::vector<NamedTensorData> tensors;
  for (const auto& [name, p] : named_parameters(model)) {
    tensors.push_back({name, p.shape(), p.values()});
  }
  tensors.insert(tensors.end(), extras.begin(), extras.end());
  write_checkpoint(stem + ".ckpt", tensors);

  const json sidecar{
      {"format_version", kFormatVersion},
      {"checkpoint", stem.substr(stem.find_last_of('/') + 1) + ".ckpt"},
      {"window", model.config.window},
      {"channels", json::array({model.config.conv_channels1,
                                model.config.conv_channels2})},
      {"static_channels", model.config.static_channels},
      {"kernel", model.config.kernel},
      {"init_seed", model.config.init_seed},
      {"skeleton_a", model.skel_a.name},
      {"skeleton_b", model.skel_b.name},
      {"pooling_a", pooling_json(model.pool_a)},
      {"pooling_b", pooling_json(model.pool_b)},
      {"trained_steps", meta.trained_steps},
      {"finetuned_steps", meta.finetuned_steps}};
  dump_file(stem + ".json", sidecar);
}

LoadedModel load_model(const std::string& stem, const SkeletonTopology& skel_a,
                       const SkeletonTopology& skel_b) {
  const std::string sidecar_path = stem + ".json";
  const json j = parse_file(sidecar_path);
  check_version(j, sidecar_path);

  LoadedModel out;
  try {
    if (j.at("skeleton_a").get<std::string>() != skel_a.name ||
        j.at("skeleton_b").get<std::string>() != skel_b.name) {
      throw FormatError("'" + sidecar_path +
                        "': skeleton names do not match the supplied files (" +
                        j.at("skeleton_a").get<std::string>() + "/" +
                        j.at("skeleton_b").get<std::string>() + " vs " +
                        skel_a.name + "/" + skel_b.name + ")");
    }
    ModelConfig cfg;
    cfg.window = j.at("window").get<int>();
    cfg.conv_channels1 = j.at("channels")[0].get<int>();
    cfg.conv_channels2 = j.at("channels")[1].get<int>();
    cfg.static_channels = j.at("static_channels").get<int>();
    cfg.kernel = j.at("kernel").get<int>();
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
    out.model = make_model(skel_a, skel_b, cfg, pooling_from(j.at("pooling_a")),
                           pooling_from(j.at("pooling_b")));
    out.meta.trained_steps = j.at("trained_steps").get<int>();
    out.meta.finetuned_steps = j.at("finetuned_steps").get<int>();
  } catch (const json::exception& e) {
    throw FormatError("'" + sidecar_path + "': " + e.what());
  }

  const std::vector<NamedTensorData> tensors = read_checkpoint(stem + ".ckpt");
  std::map<std::string, const NamedTensorData*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;

  for (auto& [name, p] : named_parameters(out.model)) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw FormatError("checkpoint lacks parameter '" + name + "'");
    }
    if (it->second->shape != p.shape()) {
      throw FormatError("checkpoint parameter '" + name +
                        "' has mismatched shape");
    }
    p.mutable_values() = it->second->values;
    by_name.erase(it);
  }
  for (const auto& [name, t] : by_name) out.extras.push_back(*t);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << content;
}

}  // namespace ikmr
