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

#include "ikmr/ops.hpp"

#include <cmath>

namespace ikmr {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape();
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw ShapeMismatchError(std::string(what) + " undefined");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add lhs");
  require_defined(b, "add rhs");
  if (same_shape(a, b)) {
    return Tensor::make_op(
        a.shape(), a.values() + b.values(), {a, b},
        [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
          if (padj[0]) *padj[0] += adj;
          if (padj[1]) *padj[1] += adj;
        });
  }
  if (is_scalar(b)) {
    const double c = b.values()(0);
    return Tensor::make_op(
        a.shape(), a.values() + c, {a, b},
        [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
          if (padj[0]) *padj[0] += adj;
          if (padj[1]) (*padj[1])(0) += adj.sum();
        });
  }
  if (is_scalar(a)) return add(b, a);
  throw ShapeMismatchError("add: incompatible shapes");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub lhs");
  require_defined(b, "sub rhs");
  if (same_shape(a, b)) {
    return Tensor::make_op(
        a.shape(), a.values() - b.values(), {a, b},
        [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
          if (padj[0]) *padj[0] += adj;
          if (padj[1]) *padj[1] -= adj;
        });
  }
  if (is_scalar(b)) {
    const double c = b.values()(0);
    return Tensor::make_op(
        a.shape(), a.values() - c, {a, b},
        [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
          if (padj[0]) *padj[0] += adj;
          if (padj[1]) (*padj[1])(0) -= adj.sum();
        });
  }
  if (is_scalar(a)) {
    const double c = a.values()(0);
    return Tensor::make_op(
        b.shape(), c - b.values(), {a, b},
        [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
          if (padj[0]) (*padj[0])(0) += adj.sum();
          if (padj[1]) *padj[1] -= adj;
        });
  }
  throw ShapeMismatchError("sub: incompatible shapes");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul lhs");
  require_defined(b, "mul rhs");
  if (same_shape(a, b)) {
    return Tensor::make_op(
        a.shape(), a.values() * b.values(), {a, b},
        [av = a.values(), bv = b.values()](const ArrayXd& adj,
                                           const std::vector<ArrayXd*>& padj) {
          if (padj[0]) *padj[0] += adj * bv;
          if (padj[1]) *padj[1] += adj * av;
        });
  }
  if (is_scalar(b)) {
    const double c = b.values()(0);
    return Tensor::make_op(
        a.shape(), a.values() * c, {a, b},
        [av = a.values(), c](const ArrayXd& adj,
                             const std::vector<ArrayXd*>& padj) {
          if (padj[0]) *padj[0] += adj * c;
          if (padj[1]) (*padj[1])(0) += (adj * av).sum();
        });
  }
  if (is_scalar(a)) return mul(b, a);
  throw ShapeMismatchError("mul: incompatible shapes");
}

Tensor scale(const Tensor& a, double c) {
  require_defined(a, "scale");
  return Tensor::make_op(
      a.shape(), a.values() * c, {a},
      [c](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj * c;
      });
}

Tensor add_const(const Tensor& a, double c) {
  require_defined(a, "add_const");
  return Tensor::make_op(
      a.shape(), a.values() + c, {a},
      [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj;
      });
}

Tensor tanh_op(const Tensor& a) {
  require_defined(a, "tanh");
  ArrayXd y = a.values().tanh();
  return Tensor::make_op(
      a.shape(), y, {a},
      [y](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj * (1.0 - y.square());
      });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  return Tensor::make_op(
      Shape{}, ArrayXd::Constant(1, a.values().sum()), {a},
      [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj(0);
      });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  const double inv = 1.0 / static_cast<double>(a.numel());
  return Tensor::make_op(
      Shape{}, ArrayXd::Constant(1, a.values().sum() * inv), {a},
      [inv](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj(0) * inv;
      });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_defined(a, "mse lhs");
  require_defined(b, "mse rhs");
  if (!same_shape(a, b)) throw ShapeMismatchError("mse: shapes differ");
  ArrayXd diff = a.values() - b.values();
  const double inv = 1.0 / static_cast<double>(a.numel());
  const double value = diff.square().sum() * inv;
  return Tensor::make_op(
      Shape{}, ArrayXd::Constant(1, value), {a, b},
      [diff, inv](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        const double s = 2.0 * inv * adj(0);
        if (padj[0]) *padj[0] += s * diff;
        if (padj[1]) *padj[1] -= s * diff;
      });
}

namespace {

Eigen::Index leading_rows(const Tensor& t) {
  // Product of all dims but the last.
  Eigen::Index rows = 1;
  for (std::size_t i = 0; i + 1 < t.rank(); ++i) rows *= t.dim(i);
  return rows;
}

}  // namespace

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatchError("concat_last: no inputs");
  const std::size_t r = parts[0].rank();
  if (r == 0) throw ShapeMismatchError("concat_last: scalar input");
  Eigen::Index rows = leading_rows(parts[0]);
  Eigen::Index total_c = 0;
  for (const auto& p : parts) {
    if (p.rank() != r || leading_rows(p) != rows) {
      throw ShapeMismatchError("concat_last: leading dims differ");
    }
    for (std::size_t i = 0; i + 1 < r; ++i) {
      if (p.dim(i) != parts[0].dim(i)) {
        throw ShapeMismatchError("concat_last: leading dims differ");
      }
    }
    total_c += p.dim(r - 1);
  }
  Shape out_shape = parts[0].shape();
  out_shape[r - 1] = total_c;

  ArrayXd out(rows * total_c);
  Eigen::Index col = 0;
  for (const auto& p : parts) {
    const Eigen::Index c = p.dim(r - 1);
    ConstRowMap src(p.values().data(), rows, c);
    RowMap dst(out.data(), rows, total_c);
    dst.middleCols(col, c) = src;
    col += c;
  }

  std::vector<Eigen::Index> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.dim(r - 1));

  return Tensor::make_op(
      std::move(out_shape), std::move(out), parts,
      [rows, total_c, widths](const ArrayXd& adj,
                              const std::vector<ArrayXd*>& padj) {
        ConstRowMap a(adj.data(), rows, total_c);
        Eigen::Index col = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
          if (padj[i]) {
            RowMap dst(padj[i]->data(), rows, widths[i]);
            dst += a.middleCols(col, widths[i]);
          }
          col += widths[i];
        }
      });
}

Tensor slice_last(const Tensor& a, Eigen::Index c0, Eigen::Index c1) {
  require_defined(a, "slice_last");
  const std::size_t r = a.rank();
  if (r == 0) throw ShapeMismatchError("slice_last: scalar input");
  const Eigen::Index c = a.dim(r - 1);
  if (c0 < 0 || c1 > c || c0 >= c1) {
    throw ShapeMismatchError("slice_last: bad channel range");
  }
  const Eigen::Index rows = leading_rows(a);
  const Eigen::Index w = c1 - c0;
  Shape out_shape = a.shape();
  out_shape[r - 1] = w;
  ArrayXd out(rows * w);
  {
    ConstRowMap src(a.values().data(), rows, c);
    RowMap dst(out.data(), rows, w);
    dst = src.middleCols(c0, w);
  }
  return Tensor::make_op(
      std::move(out_shape), std::move(out), {a},
      [rows, c, c0, w](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (!padj[0]) return;
        ConstRowMap asrc(adj.data(), rows, w);
        RowMap dst(padj[0]->data(), rows, c);
        dst.middleCols(c0, w) += asrc;
      });
}

Tensor slice_first(const Tensor& a, Eigen::Index i0, Eigen::Index i1) {
  require_defined(a, "slice_first");
  if (a.rank() == 0) throw ShapeMismatchError("slice_first: scalar input");
  const Eigen::Index d0 = a.dim(0);
  if (i0 < 0 || i1 > d0 || i0 >= i1) {
    throw ShapeMismatchError("slice_first: bad row range");
  }
  const Eigen::Index row = a.numel() / d0;
  Shape out_shape = a.shape();
  out_shape[0] = i1 - i0;
  ArrayXd out = a.values().segment(i0 * row, (i1 - i0) * row);
  return Tensor::make_op(
      std::move(out_shape), std::move(out), {a},
      [i0, row](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) padj[0]->segment(i0 * row, adj.size()) += adj;
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw ShapeMismatchError("reshape: element count differs");
  }
  return Tensor::make_op(
      std::move(shape), a.values(), {a},
      [](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj;
      });
}

Tensor row_l2_normalize(const Tensor& a) {
  require_defined(a, "row_l2_normalize");
  const std::size_t r = a.rank();
  if (r == 0) throw ShapeMismatchError("row_l2_normalize: scalar input");
  const Eigen::Index c = a.dim(r - 1);
  const Eigen::Index rows = leading_rows(a);

  ArrayXd out(a.numel());
  ArrayXd inv_norm(rows);
  {
    ConstRowMap src(a.values().data(), rows, c);
    RowMap dst(out.data(), rows, c);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double sq = src.row(i).squaredNorm();
      if (sq < 1e-30) {
        dst.row(i).setZero();
        dst(i, 0) = 1.0;
        inv_norm(i) = 0.0;  // degenerate rows carry no gradient
      } else {
        const double n = std::sqrt(sq);
        dst.row(i) = src.row(i) / n;
        inv_norm(i) = 1.0 / n;
      }
    }
  }
  return Tensor::make_op(
      a.shape(), out, {a},
      [out, inv_norm, rows, c](const ArrayXd& adj,
                               const std::vector<ArrayXd*>& padj) {
        if (!padj[0]) return;
        ConstRowMap y(out.data(), rows, c);
        ConstRowMap g(adj.data(), rows, c);
        RowMap dst(padj[0]->data(), rows, c);
        for (Eigen::Index i = 0; i < rows; ++i) {
          if (inv_norm(i) == 0.0) continue;
          const double dot = y.row(i).dot(g.row(i));
          dst.row(i) += (g.row(i) - dot * y.row(i)) * inv_norm(i);
        }
      });
}

Tensor temporal_conv1d(const Tensor& input, const Tensor& weight,
                       const Tensor& bias, int stride, int padding) {
  require_defined(input, "conv input");
  require_defined(weight, "conv weight");
  if (input.rank() != 2) throw ShapeMismatchError("conv input must be [T x C]");
  if (weight.rank() != 3) {
    throw ShapeMismatchError("conv weight must be [C_out x C_in x K]");
  }
  const Eigen::Index t_in = input.dim(0);
  const Eigen::Index c_in = input.dim(1);
  const Eigen::Index c_out = weight.dim(0);
  const Eigen::Index k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw ShapeMismatchError("conv weight C_in mismatch");
  }
  if (k % 2 == 0) throw InvalidKernelError("conv kernel width must be odd");
  if (stride < 1 || padding < 0) {
    throw ShapeMismatchError("conv: bad stride/padding");
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != c_out)) {
    throw ShapeMismatchError("conv bias must be [C_out]");
  }
  const Eigen::Index t_out = (t_in + 2 * padding - k) / stride + 1;
  if (t_in + 2 * padding < k || t_out < 1) {
    throw ShapeMismatchError("conv: input shorter than kernel");
  }

  // im2col: X[t', k*C_in + ci] = input[t'*stride - padding + k, ci]
  const Eigen::Index cols = k * c_in;
  RowMat x = RowMat::Zero(t_out, cols);
  {
    ConstRowMap in(input.values().data(), t_in, c_in);
    for (Eigen::Index to = 0; to < t_out; ++to) {
      const Eigen::Index base = to * stride - padding;
      for (Eigen::Index kk = 0; kk < k; ++kk) {
        const Eigen::Index t = base + kk;
        if (t >= 0 && t < t_in) {
          x.block(to, kk * c_in, 1, c_in) = in.row(t);
        }
      }
    }
  }
  // Weight remapped to [k*C_in x C_out].
  RowMat wm(cols, c_out);
  {
    const double* w = weight.values().data();
    for (Eigen::Index co = 0; co < c_out; ++co) {
      for (Eigen::Index ci = 0; ci < c_in; ++ci) {
        for (Eigen::Index kk = 0; kk < k; ++kk) {
          wm(kk * c_in + ci, co) = w[(co * c_in + ci) * k + kk];
        }
      }
    }
  }

  ArrayXd out(t_out * c_out);
  {
    RowMap y(out.data(), t_out, c_out);
    y.noalias() = x * wm;
    if (has_bias) {
      y.rowwise() +=
          Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), c_out);
    }
  }

  std::vector<Tensor> parents{input, weight};
  if (has_bias) parents.push_back(bias);

  return Tensor::make_op(
      Shape{t_out, c_out}, std::move(out), std::move(parents),
      [x = std::move(x), wm = std::move(wm), t_in, c_in, c_out, k, t_out,
       stride, padding,
       has_bias](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        ConstRowMap dy(adj.data(), t_out, c_out);
        if (padj[1]) {  // weight
          RowMat dwm(k * c_in, c_out);
          dwm.noalias() = x.transpose() * dy;
          double* dw = padj[1]->data();
          for (Eigen::Index co = 0; co < c_out; ++co) {
            for (Eigen::Index ci = 0; ci < c_in; ++ci) {
              for (Eigen::Index kk = 0; kk < k; ++kk) {
                dw[(co * c_in + ci) * k + kk] += dwm(kk * c_in + ci, co);
              }
            }
          }
        }
        if (padj[0]) {  // input, via col2im
          RowMat dx(t_out, k * c_in);
          dx.noalias() = dy * wm.transpose();
          RowMap din(padj[0]->data(), t_in, c_in);
          for (Eigen::Index to = 0; to < t_out; ++to) {
            const Eigen::Index base = to * stride - padding;
            for (Eigen::Index kk = 0; kk < k; ++kk) {
              const Eigen::Index t = base + kk;
              if (t >= 0 && t < t_in) {
                din.row(t) += dx.block(to, kk * c_in, 1, c_in);
              }
            }
          }
        }
        if (has_bias && padj[2]) {
          Eigen::Map<Eigen::RowVectorXd> db(padj[2]->data(), c_out);
          db += dy.colwise().sum();
        }
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  require_defined(x, "add_channel_bias input");
  require_defined(b, "add_channel_bias bias");
  const std::size_t r = x.rank();
  if (r == 0 || b.rank() != 1 || b.dim(0) != x.dim(r - 1)) {
    throw ShapeMismatchError("add_channel_bias: bias must match last axis");
  }
  const Eigen::Index c = x.dim(r - 1);
  const Eigen::Index rows = leading_rows(x);
  ArrayXd out(x.numel());
  {
    ConstRowMap src(x.values().data(), rows, c);
    RowMap dst(out.data(), rows, c);
    dst = src.rowwise() +
          Eigen::Map<const Eigen::RowVectorXd>(b.values().data(), c);
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x, b},
      [rows, c](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (padj[0]) *padj[0] += adj;
        if (padj[1]) {
          ConstRowMap a(adj.data(), rows, c);
          Eigen::Map<Eigen::RowVectorXd> db(padj[1]->data(), c);
          db += a.colwise().sum();
        }
      });
}

Tensor select_joint(const Tensor& x, Eigen::Index j) {
  require_defined(x, "select_joint");
  if (x.rank() != 3) throw ShapeMismatchError("select_joint needs [T x J x C]");
  const Eigen::Index t = x.dim(0), jn = x.dim(1), c = x.dim(2);
  if (j < 0 || j >= jn) throw ShapeMismatchError("select_joint: bad index");
  ArrayXd out(t * c);
  {
    ConstRowMap src(x.values().data(), t * jn, c);
    RowMap dst(out.data(), t, c);
    for (Eigen::Index tt = 0; tt < t; ++tt) dst.row(tt) = src.row(tt * jn + j);
  }
  return Tensor::make_op(
      Shape{t, c}, std::move(out), {x},
      [t, jn, c, j](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (!padj[0]) return;
        ConstRowMap a(adj.data(), t, c);
        RowMap dst(padj[0]->data(), t * jn, c);
        for (Eigen::Index tt = 0; tt < t; ++tt) dst.row(tt * jn + j) += a.row(tt);
      });
}

Tensor stack_joints(const std::vector<Tensor>& joints) {
  if (joints.empty()) throw ShapeMismatchError("stack_joints: no inputs");
  const Eigen::Index t = joints[0].dim(0);
  const Eigen::Index c = joints[0].dim(1);
  const Eigen::Index jn = static_cast<Eigen::Index>(joints.size());
  for (const auto& j : joints) {
    if (j.rank() != 2 || j.dim(0) != t || j.dim(1) != c) {
      throw ShapeMismatchError("stack_joints: per-joint shapes differ");
    }
  }
  ArrayXd out(t * jn * c);
  {
    RowMap dst(out.data(), t * jn, c);
    for (Eigen::Index jj = 0; jj < jn; ++jj) {
      ConstRowMap src(joints[jj].values().data(), t, c);
      for (Eigen::Index tt = 0; tt < t; ++tt) dst.row(tt * jn + jj) = src.row(tt);
    }
  }
  return Tensor::make_op(
      Shape{t, jn, c}, std::move(out), joints,
      [t, jn, c](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        ConstRowMap a(adj.data(), t * jn, c);
        for (Eigen::Index jj = 0; jj < jn; ++jj) {
          if (!padj[jj]) continue;
          RowMap dst(padj[jj]->data(), t, c);
          for (Eigen::Index tt = 0; tt < t; ++tt) dst.row(tt) += a.row(tt * jn + jj);
        }
      });
}

Tensor tile_time(const Tensor& x, Eigen::Index t) {
  require_defined(x, "tile_time");
  if (x.rank() != 3 || x.dim(0) != 1) {
    throw ShapeMismatchError("tile_time needs [1 x J x C]");
  }
  const Eigen::Index jn = x.dim(1), c = x.dim(2);
  ArrayXd out(t * jn * c);
  {
    RowMap dst(out.data(), t, jn * c);
    ConstRowMap src(x.values().data(), 1, jn * c);
    dst.rowwise() = src.row(0);
  }
  return Tensor::make_op(
      Shape{t, jn, c}, std::move(out), {x},
      [t, jn, c](const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (!padj[0]) return;
        ConstRowMap a(adj.data(), t, jn * c);
        Eigen::Map<Eigen::RowVectorXd> dst(padj[0]->data(), jn * c);
        dst += a.colwise().sum();
      });
}

Tensor grid_pool(const Tensor& x, const std::vector<int>& assign, int coarse,
                 int temporal_stride) {
  require_defined(x, "grid_pool");
  if (x.rank() != 3) throw ShapeMismatchError("grid_pool needs [T x J x C]");
  const Eigen::Index t = x.dim(0), jn = x.dim(1), c = x.dim(2);
  if (static_cast<Eigen::Index>(assign.size()) != jn) {
    throw IncompleteMapError("pooling map does not cover all joints");
  }
  std::vector<int> group_size(coarse, 0);
  for (const int g : assign) {
    if (g < 0 || g >= coarse) {
      throw IncompleteMapError("pooling map target out of range");
    }
    ++group_size[g];
  }
  for (int g = 0; g < coarse; ++g) {
    if (group_size[g] == 0) {
      throw IncompleteMapError("pooling map leaves super-joint " +
                               std::to_string(g) + " empty");
    }
  }
  if (temporal_stride < 1 || t % temporal_stride != 0) {
    throw ShapeMismatchError("grid_pool: T not divisible by temporal stride");
  }
  const Eigen::Index t_out = t / temporal_stride;

  ArrayXd out = ArrayXd::Zero(t_out * coarse * c);
  {
    ConstRowMap src(x.values().data(), t * jn, c);
    RowMap dst(out.data(), t_out * coarse, c);
    for (Eigen::Index to = 0; to < t_out; ++to) {
      for (Eigen::Index s = 0; s < temporal_stride; ++s) {
        const Eigen::Index tt = to * temporal_stride + s;
        for (Eigen::Index jj = 0; jj < jn; ++jj) {
          dst.row(to * coarse + assign[jj]) += src.row(tt * jn + jj);
        }
      }
    }
    for (Eigen::Index to = 0; to < t_out; ++to) {
      for (int g = 0; g < coarse; ++g) {
        dst.row(to * coarse + g) /=
            static_cast<double>(group_size[g] * temporal_stride);
      }
    }
  }
  return Tensor::make_op(
      Shape{t_out, coarse, c}, std::move(out), {x},
      [t, jn, c, t_out, coarse, temporal_stride, assign, group_size](
          const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (!padj[0]) return;
        ConstRowMap a(adj.data(), t_out * coarse, c);
        RowMap dst(padj[0]->data(), t * jn, c);
        for (Eigen::Index to = 0; to < t_out; ++to) {
          for (Eigen::Index s = 0; s < temporal_stride; ++s) {
            const Eigen::Index tt = to * temporal_stride + s;
            for (Eigen::Index jj = 0; jj < jn; ++jj) {
              const int g = assign[jj];
              dst.row(tt * jn + jj) +=
                  a.row(to * coarse + g) /
                  static_cast<double>(group_size[g] * temporal_stride);
            }
          }
        }
      });
}

Tensor grid_unpool(const Tensor& x, const std::vector<int>& assign,
                   Eigen::Index fine, int temporal_stride) {
  require_defined(x, "grid_unpool");
  if (x.rank() != 3) throw ShapeMismatchError("grid_unpool needs [T x J x C]");
  const Eigen::Index t_in = x.dim(0), coarse = x.dim(1), c = x.dim(2);
  if (static_cast<Eigen::Index>(assign.size()) != fine) {
    throw IncompleteMapError("pooling map does not cover all joints");
  }
  for (const int g : assign) {
    if (g < 0 || g >= coarse) {
      throw IncompleteMapError("pooling map target out of range");
    }
  }
  if (temporal_stride < 1) throw ShapeMismatchError("grid_unpool: bad stride");
  const Eigen::Index t_out = t_in * temporal_stride;

  ArrayXd out(t_out * fine * c);
  {
    ConstRowMap src(x.values().data(), t_in * coarse, c);
    RowMap dst(out.data(), t_out * fine, c);
    for (Eigen::Index to = 0; to < t_out; ++to) {
      const Eigen::Index ti = to / temporal_stride;
      for (Eigen::Index jj = 0; jj < fine; ++jj) {
        dst.row(to * fine + jj) = src.row(ti * coarse + assign[jj]);
      }
    }
  }
  return Tensor::make_op(
      Shape{t_out, fine, c}, std::move(out), {x},
      [t_in, coarse, c, fine, t_out, temporal_stride, assign](
          const ArrayXd& adj, const std::vector<ArrayXd*>& padj) {
        if (!padj[0]) return;
        ConstRowMap a(adj.data(), t_out * fine, c);
        RowMap dst(padj[0]->data(), t_in * coarse, c);
        for (Eigen::Index to = 0; to < t_out; ++to) {
          const Eigen::Index ti = to / temporal_stride;
          for (Eigen::Index jj = 0; jj < fine; ++jj) {
            dst.row(ti * coarse + assign[jj]) += a.row(to * fine + jj);
          }
        }
      });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double h) {
  return grad_check_many(
      [&f](const std::vector<Tensor>& pts) { return f(pts[0]); }, {point}, h);
}

double grad_check_many(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& points, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw ConfigError("grad_check: h must lie in [1e-7, 1e-3]");
  }
  // Fresh leaves so stale gradients cannot leak in.
  std::vector<Tensor> leaves;
  leaves.reserve(points.size());
  for (const auto& p : points) {
    leaves.push_back(Tensor::from_array(p.shape(), p.values(), true));
  }
  Tensor loss = f(leaves);
  if (!loss.shape().empty()) {
    throw NotScalarError("grad_check: f must be scalar-valued");
  }
  backward(loss);

  double worst = 0.0;
  for (auto& leaf : leaves) {
    const ArrayXd analytic = leaf.grad();
    ArrayXd& vals = leaf.mutable_values();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      const double orig = vals(i);
      double fp, fm;
      {
        NoGradScope ng;
        vals(i) = orig + h;
        fp = f(leaves).item();
        vals(i) = orig - h;
        fm = f(leaves).item();
        vals(i) = orig;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic(i) - numeric) /
                         std::max(1.0, std::abs(analytic(i)));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace ikmr
