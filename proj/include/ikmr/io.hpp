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

#include <string>

#include "ikmr/dynamics.hpp"
#include "ikmr/training.hpp"

namespace ikmr {

inline constexpr int kFormatVersion = 1;

// All JSON writers emit two-space indentation with sorted keys, so
// write -> read -> write is byte-identical.

SkeletonTopology load_skeleton(const std::string& path);
void save_skeleton(const std::string& path, const SkeletonTopology& skel);

MotionClip load_motion(const std::string& path);
void save_motion(const std::string& path, const MotionClip& clip);

DynamicsLimits load_limits(const std::string& path);
void save_limits(const std::string& path, const DynamicsLimits& limits);

PairedDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const PairedDataset& dataset);

/// Flat binary tensor container ("IKMRCKPT"), byte-exact on round trip.
struct NamedTensorData {
  std::string name;
  Shape shape;
  ArrayXd values;
};
void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensorData>& tensors);
std::vector<NamedTensorData> read_checkpoint(const std::string& path);

/// Model persistence: <stem>.json sidecar plus <stem>.ckpt parameters.
/// Extra tensors (optimizer state) ride along in the checkpoint under their
/// own names.
struct ModelMeta {
  int trained_steps = 0;
  int finetuned_steps = 0;
};
void save_model(const std::string& stem, const RetargetModel& model,
                const ModelMeta& meta,
                const std::vector<NamedTensorData>& extras = {});

struct LoadedModel {
  RetargetModel model;
  ModelMeta meta;
  std::vector<NamedTensorData> extras;  // non-parameter tensors
};
/// Skeleton files are supplied separately; their names must match the
/// sidecar (FormatError otherwise).
LoadedModel load_model(const std::string& stem, const SkeletonTopology& skel_a,
                       const SkeletonTopology& skel_b);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ikmr
