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

#include "ikmr/skeleton.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace ikmr {

int SkeletonTopology::root() const {
  for (int i = 0; i < joint_count(); ++i) {
    if (parent[i] == kNoParent) return i;
  }
  throw InvalidSkeletonError("skeleton '" + name + "' has no root joint");
}

bool SkeletonTopology::is_leaf(int joint) const {
  for (const int p : parent) {
    if (p == joint) return false;
  }
  return true;
}

int SkeletonTopology::joint_index(const std::string& joint_name) const {
  for (int i = 0; i < joint_count(); ++i) {
    if (joint_names[i] == joint_name) return i;
  }
  return -1;
}

std::vector<std::vector<int>> SkeletonTopology::children() const {
  std::vector<std::vector<int>> out(joint_count());
  for (int i = 0; i < joint_count(); ++i) {
    if (parent[i] != kNoParent) out[parent[i]].push_back(i);
  }
  return out;
}

std::vector<std::vector<int>> SkeletonTopology::neighborhoods(
    int distance) const {
  if (distance < 1) {
    throw InvalidSkeletonError("neighbor_distance must be >= 1");
  }
  const int n = joint_count();
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    if (parent[i] != kNoParent) {
      adj[i].push_back(parent[i]);
      adj[parent[i]].push_back(i);
    }
  }
  std::vector<std::vector<int>> out(n);
  for (int i = 0; i < n; ++i) {
    // BFS limited to `distance` hops.
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

Vec3d SkeletonTopology::default_axis(int joint) {
  switch (joint % 3) {
    case 0:
      return Vec3d::UnitX();
    case 1:
      return Vec3d::UnitY();
    default:
      return Vec3d::UnitZ();
  }
}

void SkeletonTopology::validate() {
  const int n = joint_count();
  if (n < 1) throw InvalidSkeletonError("skeleton must have J >= 1 joints");
  if (static_cast<int>(joint_names.size()) != n ||
      static_cast<int>(offset.size()) != n) {
    throw InvalidSkeletonError(
        "joint_names/parent/offset lengths disagree in '" + name + "'");
  }
  if (neighbor_distance < 1) {
    throw InvalidSkeletonError("neighbor_distance must be >= 1");
  }

  int root_count = 0;
  for (int i = 0; i < n; ++i) {
    if (parent[i] == kNoParent) {
      ++root_count;
    } else if (parent[i] < 0 || parent[i] >= n) {
      throw InvalidSkeletonError("joint " + joint_names[i] +
                                 " has out-of-range parent");
    }
  }
  if (root_count != 1) {
    throw InvalidSkeletonError("skeleton '" + name + "' must have exactly " +
                               "one root, found " + std::to_string(root_count));
  }

  // Acyclic and connected: every joint must reach the root without revisits.
  for (int i = 0; i < n; ++i) {
    std::set<int> seen;
    int cur = i;
    while (cur != kNoParent) {
      if (!seen.insert(cur).second) {
        throw InvalidSkeletonError("parent array of '" + name +
                                   "' contains a cycle through joint " +
                                   joint_names[i]);
      }
      cur = parent[cur];
    }
  }

  std::set<int> ee_seen;
  for (const int e : end_effectors) {
    if (e < 0 || e >= n) {
      throw InvalidSkeletonError("end-effector index out of range");
    }
    if (!ee_seen.insert(e).second) {
      throw InvalidSkeletonError("duplicate end-effector index " +
                                 std::to_string(e));
    }
    if (!is_leaf(e)) {
      throw InvalidSkeletonError("end-effector " + joint_names[e] +
                                 " is not a leaf");
    }
  }

  if (axes.empty()) {
    axes.resize(n);
    for (int i = 0; i < n; ++i) axes[i] = default_axis(i);
  } else if (static_cast<int>(axes.size()) != n) {
    throw InvalidSkeletonError("axes length disagrees with joint count");
  } else {
    for (auto& a : axes) {
      const double norm = a.norm();
      if (norm < 1e-9) {
        throw InvalidSkeletonError("zero joint axis in '" + name + "'");
      }
      a /= norm;
    }
  }
}

SkeletonTopology make_skeleton(std::string name,
                               std::vector<std::string> joint_names,
                               std::vector<int> parent,
                               std::vector<Vec3d> offset,
                               std::vector<int> end_effectors,
                               int neighbor_distance) {
  SkeletonTopology s;
  s.name = std::move(name);
  s.joint_names = std::move(joint_names);
  s.parent = std::move(parent);
  s.offset = std::move(offset);
  s.end_effectors = std::move(end_effectors);
  s.neighbor_distance = neighbor_distance;
  s.validate();
  return s;
}

}  // namespace ikmr
