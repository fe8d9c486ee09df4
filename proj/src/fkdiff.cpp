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

#include "ikmr/fkdiff.hpp"

namespace ikmr {

namespace {

// Per-joint quaternion columns as four [T x 1] tensors.
struct QuatCols {
  Tensor w, x, y, z;
};

QuatCols split_quat(const Tensor& q) {
  return {slice_last(q, 0, 1), slice_last(q, 1, 2), slice_last(q, 2, 3),
          slice_last(q, 3, 4)};
}

// Hamilton product of per-frame quaternion columns.
QuatCols quat_mul_cols(const QuatCols& a, const QuatCols& b) {
  QuatCols out;
  out.w = sub(sub(sub(mul(a.w, b.w), mul(a.x, b.x)), mul(a.y, b.y)),
              mul(a.z, b.z));
  out.x = sub(add(add(mul(a.w, b.x), mul(a.x, b.w)), mul(a.y, b.z)),
              mul(a.z, b.y));
  out.y = add(sub(add(mul(a.w, b.y), mul(a.y, b.w)), mul(a.x, b.z)),
              mul(a.z, b.x));
  out.z = add(add(sub(mul(a.w, b.z), mul(a.y, b.x)), mul(a.x, b.y)),
              mul(a.z, b.w));
  return out;
}

// Rotation of a constant vector v by per-frame quaternion columns:
// out = v + 2*w*(q_vec x v) + 2*q_vec x (q_vec x v).
Tensor rotate_const_vec(const QuatCols& q, const Vec3d& v) {
  // c = q_vec x v (componentwise from constants).
  Tensor cx = sub(scale(q.y, v.z()), scale(q.z, v.y()));
  Tensor cy = sub(scale(q.z, v.x()), scale(q.x, v.z()));
  Tensor cz = sub(scale(q.x, v.y()), scale(q.y, v.x()));
  // d = q_vec x c.
  Tensor dx = sub(mul(q.y, cz), mul(q.z, cy));
  Tensor dy = sub(mul(q.z, cx), mul(q.x, cz));
  Tensor dz = sub(mul(q.x, cy), mul(q.y, cx));
  Tensor ox = add_const(add(scale(mul(q.w, cx), 2.0), scale(dx, 2.0)), v.x());
  Tensor oy = add_const(add(scale(mul(q.w, cy), 2.0), scale(dy, 2.0)), v.y());
  Tensor oz = add_const(add(scale(mul(q.w, cz), 2.0), scale(dz, 2.0)), v.z());
  return concat_last({ox, oy, oz});
}

std::vector<int> topo_order(const SkeletonTopology& skel) {
  std::vector<int> order{skel.root()};
  const auto kids = skel.children();
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (const int c : kids[order[head]]) order.push_back(c);
  }
  return order;
}

}  // namespace

Tensor fk_differentiable(const SkeletonTopology& skel, const Tensor& rotations,
                         const Tensor& root_translation) {
  const int j_count = skel.joint_count();
  if (rotations.rank() != 3 || rotations.dim(1) != j_count ||
      rotations.dim(2) != 4) {
    throw ShapeMismatchError("fk_differentiable: rotations must be [T x J x 4]");
  }
  const Eigen::Index t = rotations.dim(0);
  if (root_translation.rank() != 2 || root_translation.dim(0) != t ||
      root_translation.dim(1) != 3) {
    throw ShapeMismatchError(
        "fk_differentiable: root_translation must be [T x 3]");
  }

  const Tensor unit = row_l2_normalize(rotations);

  std::vector<QuatCols> global(j_count);
  std::vector<Tensor> position(j_count);
  const int root = skel.root();
  global[root] = split_quat(select_joint(unit, root));
  position[root] = root_translation;

  for (const int j : topo_order(skel)) {
    if (j == root) continue;
    const int p = skel.parent[j];
    position[j] = add(position[p], rotate_const_vec(global[p], skel.offset[j]));
    global[j] = quat_mul_cols(global[p], split_quat(select_joint(unit, j)));
  }

  std::vector<Tensor> cols(j_count);
  for (int j = 0; j < j_count; ++j) cols[j] = position[j];
  return stack_joints(cols);
}

Tensor fk_differentiable_ee(const SkeletonTopology& skel,
                            const Tensor& rotations,
                            const Tensor& root_translation) {
  if (skel.end_effectors.empty()) {
    throw EmptyEndEffectorSetError("skeleton '" + skel.name +
                                   "' declares no end-effectors");
  }
  const Tensor all = fk_differentiable(skel, rotations, root_translation);
  std::vector<Tensor> cols;
  cols.reserve(skel.end_effectors.size());
  for (const int e : skel.end_effectors) cols.push_back(select_joint(all, e));
  return stack_joints(cols);
}

}  // namespace ikmr
