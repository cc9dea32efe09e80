#include "avwnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "avwnet/errors.hpp"

namespace avwnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_rank4(const Tensor& t, const char* op) {
  if (t.shape().size() != 4) {
    throw ShapeError(std::string(op) + " expects an NCHW tensor, got " + to_string(t.shape()));
  }
}

struct ConvGeometry {
  std::int64_t batch, c_in, h, w, c_out, k, pad, stride, h_out, w_out;

  std::int64_t patch() const { return c_in * k * k; }
  std::int64_t pixels() const { return h_out * w_out; }
  bool pointwise() const { return k == 1 && pad == 0 && stride == 1; }
};

void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const auto P = g.pixels();
  for (std::int64_t c = 0; c < g.c_in; ++c) {
    const double* plane = x + c * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((c * g.k + ky) * g.k + kx) * P;
        for (std::int64_t oy = 0; oy < g.h_out; ++oy) {
          double* dst = row + oy * g.w_out;
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.w_out, 0.0);
            continue;
          }
          const double* src = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.w_out; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_accumulate(const double* cols, const ConvGeometry& g, double* dx) {
  const auto P = g.pixels();
  for (std::int64_t c = 0; c < g.c_in; ++c) {
    double* plane = dx + c * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((c * g.k + ky) * g.k + kx) * P;
        for (std::int64_t oy = 0; oy < g.h_out; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const double* src = row + oy * g.w_out;
          double* dst = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.w_out; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Per-axis element strides of `shape` when viewed with extents `out`; zero on
// broadcast axes.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::int64_t> strides(shape.size(), 0);
  std::int64_t running = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i] = (shape[i] == out[i]) ? running : 0;
    running *= shape[i];
  }
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch " + to_string(a) + " vs " + to_string(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1) {
      throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                       to_string(b));
    }
    out[i] = std::max(a[i], b[i]);
  }
  return out;
}

// Calls fn(out_index, a_index, b_index) for every output element in order.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, Fn&& fn) {
  const std::size_t rank = out.size();
  std::vector<std::int64_t> idx(rank, 0);
  const auto total = element_count(out);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    fn(o, ia, ib);
    for (std::size_t axis = rank; axis-- > 0;) {
      ++idx[axis];
      ia += sa[axis];
      ib += sb[axis];
      if (idx[axis] < out[axis]) break;
      ia -= sa[axis] * out[axis];
      ib -= sb[axis] * out[axis];
      idx[axis] = 0;
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding,
              int stride) {
  require_rank4(input, "conv2d");
  require_rank4(weight, "conv2d weight");
  if (weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0) {
    throw ShapeError("conv2d kernel must be square with odd size, got " +
                     to_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input.shape()) +
                     ", weight " + to_string(weight.shape()));
  }
  if (bias.shape() != Shape{weight.dim(0)}) {
    throw ShapeError("conv2d bias must be [" + std::to_string(weight.dim(0)) + "], got " +
                     to_string(bias.shape()));
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d needs stride >= 1 and padding >= 0");

  ConvGeometry g{};
  g.batch = input.dim(0);
  g.c_in = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.c_out = weight.dim(0);
  g.k = weight.dim(2);
  g.pad = padding;
  g.stride = stride;
  g.h_out = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.w_out = (g.w + 2 * g.pad - g.k) / g.stride + 1;
  if (g.h + 2 * g.pad - g.k < 0 || g.w + 2 * g.pad - g.k < 0 || g.h_out <= 0 || g.w_out <= 0) {
    throw ShapeError("conv2d output extent is not positive for input " +
                     to_string(input.shape()));
  }

  const auto P = g.pixels();
  const auto in_plane = g.c_in * g.h * g.w;
  std::vector<double> out(static_cast<std::size_t>(g.batch * g.c_out * P));
  // GEMM operands and results live in Eigen-owned storage: Eigen's vector
  // kernels take a different summation path depending on the alignment of
  // the pointers they get, which would make results vary between runs.
  const RowMat w_mat = ConstMatMap(weight.values().data(), g.c_out, g.patch());
  const auto b = bias.values();
  RowMat cols(g.patch(), P);
  RowMat y(g.c_out, P);
  for (std::int64_t n = 0; n < g.batch; ++n) {
    const double* x = input.values().data() + n * in_plane;
    if (g.pointwise()) {
      cols = ConstMatMap(x, g.c_in, P);
    } else {
      im2col(x, g, cols.data());
    }
    y.noalias() = w_mat * cols;
    for (std::int64_t o = 0; o < g.c_out; ++o) y.row(o).array() += b[o];
    MatMap(out.data() + n * g.c_out * P, g.c_out, P) = y;
  }

  return make_result(
      {g.batch, g.c_out, g.h_out, g.w_out}, std::move(out), {input, weight, bias},
      [input, weight, g](std::span<const double> grad_out, const GradientSinks& sinks) {
        const auto P = g.pixels();
        const auto in_plane = g.c_in * g.h * g.w;
        const RowMat w_mat = ConstMatMap(weight.values().data(), g.c_out, g.patch());
        RowMat cols(g.patch(), P);
        RowMat dcols(g.patch(), P);
        RowMat dy(g.c_out, P);
        RowMat dw;
        if (sinks[1]) dw = RowMat::Zero(g.c_out, g.patch());
        for (std::int64_t n = 0; n < g.batch; ++n) {
          dy = ConstMatMap(grad_out.data() + n * g.c_out * P, g.c_out, P);
          const double* x = input.values().data() + n * in_plane;
          if (sinks[1]) {
            if (g.pointwise()) {
              cols = ConstMatMap(x, g.c_in, P);
            } else {
              im2col(x, g, cols.data());
            }
            dw.noalias() += dy * cols.transpose();
          }
          if (sinks[2]) {
            auto& db = *sinks[2];
            for (std::int64_t o = 0; o < g.c_out; ++o) db[o] += dy.row(o).sum();
          }
          if (sinks[0]) {
            double* dx = sinks[0]->data() + n * in_plane;
            dcols.noalias() = w_mat.transpose() * dy;
            if (g.pointwise()) {
              MatMap(dx, g.c_in, P) += dcols;
            } else {
              col2im_accumulate(dcols.data(), g, dx);
            }
          }
        }
        if (sinks[1]) MatMap(sinks[1]->data(), g.c_out, g.patch()) += dw;
      });
}

Tensor max_pool2d(const Tensor& input) {
  require_rank4(input, "max_pool2d");
  const auto N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 || W % 2) {
    throw ShapeError("max_pool2d needs even spatial extents, got " + to_string(input.shape()));
  }
  const auto Ho = H / 2, Wo = W / 2;
  const auto x = input.values();
  std::vector<double> out(static_cast<std::size_t>(N * C * Ho * Wo));
  std::vector<std::int64_t> argmax(out.size());
  for (std::int64_t p = 0; p < N * C; ++p) {
    const double* plane = x.data() + p * H * W;
    for (std::int64_t oy = 0; oy < Ho; ++oy) {
      for (std::int64_t ox = 0; ox < Wo; ++ox) {
        std::int64_t best = (2 * oy) * W + 2 * ox;
        const std::int64_t candidates[3] = {best + 1, best + W, best + W + 1};
        for (auto c : candidates) {
          if (plane[c] > plane[best]) best = c;
        }
        const auto o = (p * Ho + oy) * Wo + ox;
        out[o] = plane[best];
        argmax[o] = p * H * W + best;
      }
    }
  }
  return make_result({N, C, Ho, Wo}, std::move(out), {input},
                     [argmax = std::move(argmax)](std::span<const double> g,
                                                  const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += g[o];
                     });
}

Tensor avg_pool2d(const Tensor& input) {
  require_rank4(input, "avg_pool2d");
  const auto N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 || W % 2) {
    throw ShapeError("avg_pool2d needs even spatial extents, got " + to_string(input.shape()));
  }
  const auto Ho = H / 2, Wo = W / 2;
  const auto x = input.values();
  std::vector<double> out(static_cast<std::size_t>(N * C * Ho * Wo));
  for (std::int64_t p = 0; p < N * C; ++p) {
    const double* plane = x.data() + p * H * W;
    for (std::int64_t oy = 0; oy < Ho; ++oy) {
      for (std::int64_t ox = 0; ox < Wo; ++ox) {
        const double* tl = plane + (2 * oy) * W + 2 * ox;
        out[(p * Ho + oy) * Wo + ox] = 0.25 * (tl[0] + tl[1] + tl[W] + tl[W + 1]);
      }
    }
  }
  return make_result({N, C, Ho, Wo}, std::move(out), {input},
                     [N, C, H, W](std::span<const double> g, const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       const auto Ho = H / 2, Wo = W / 2;
                       for (std::int64_t p = 0; p < N * C; ++p) {
                         for (std::int64_t y = 0; y < H; ++y) {
                           for (std::int64_t x = 0; x < W; ++x) {
                             dx[(p * H + y) * W + x] += 0.25 * g[(p * Ho + y / 2) * Wo + x / 2];
                           }
                         }
                       }
                     });
}

Tensor upsample_nearest(const Tensor& input) {
  require_rank4(input, "upsample_nearest");
  const auto N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const auto Ho = 2 * H, Wo = 2 * W;
  const auto x = input.values();
  std::vector<double> out(static_cast<std::size_t>(N * C * Ho * Wo));
  for (std::int64_t p = 0; p < N * C; ++p) {
    for (std::int64_t y = 0; y < Ho; ++y) {
      const double* src = x.data() + (p * H + y / 2) * W;
      double* dst = out.data() + (p * Ho + y) * Wo;
      for (std::int64_t xo = 0; xo < Wo; ++xo) dst[xo] = src[xo / 2];
    }
  }
  return make_result({N, C, Ho, Wo}, std::move(out), {input},
                     [N, C, H, W](std::span<const double> g, const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       const auto Wo = 2 * W;
                       for (std::int64_t p = 0; p < N * C; ++p) {
                         for (std::int64_t y = 0; y < H; ++y) {
                           for (std::int64_t x = 0; x < W; ++x) {
                             const double* tl = g.data() + (p * 2 * H + 2 * y) * Wo + 2 * x;
                             dx[(p * H + y) * W + x] += tl[0] + tl[1] + tl[Wo] + tl[Wo + 1];
                           }
                         }
                       }
                     });
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, BatchNormMode mode, BatchNormOptions options) {
  require_rank4(input, "batch_norm");
  const auto N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
    throw ShapeError("batch_norm affine parameters must be [" + std::to_string(C) + "]");
  }
  const auto x = input.values();
  const auto gm = gamma.values();
  const auto bt = beta.values();
  const auto count = static_cast<double>(N * HW);
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(static_cast<std::size_t>(C));

  if (mode == BatchNormMode::eval) {
    if (stats.running_mean.size() != static_cast<std::size_t>(C) ||
        stats.running_var.size() != static_cast<std::size_t>(C)) {
      throw GraphError("batch_norm eval mode requires populated running statistics");
    }
  }

  for (std::int64_t c = 0; c < C; ++c) {
    double mu, var;
    if (mode == BatchNormMode::train) {
      double s = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const double* p = x.data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) s += p[i];
      }
      mu = s / count;
      double ss = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const double* p = x.data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      var = ss / count;
      if (stats.running_mean.size() != static_cast<std::size_t>(C)) stats = BatchNormStats::initial(C);
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      stats.running_mean[c] = (1 - options.momentum) * stats.running_mean[c] + options.momentum * mu;
      stats.running_var[c] =
          (1 - options.momentum) * stats.running_var[c] + options.momentum * unbiased;
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + options.epsilon);
    inv_std[c] = is;
    for (std::int64_t n = 0; n < N; ++n) {
      const auto off = (n * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) {
        const double h = (x[off + i] - mu) * is;
        xhat[off + i] = h;
        out[off + i] = gm[c] * h + bt[c];
      }
    }
  }

  const bool train = mode == BatchNormMode::train;
  return make_result(
      input.shape(), std::move(out), {input, gamma, beta},
      [gamma, N, C, HW, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          std::span<const double> g, const GradientSinks& sinks) {
        const auto gm = gamma.values();
        const double count = static_cast<double>(N * HW);
        for (std::int64_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::int64_t n = 0; n < N; ++n) {
            const auto off = (n * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat[off + i];
            }
          }
          if (sinks[1]) (*sinks[1])[c] += sum_gx;
          if (sinks[2]) (*sinks[2])[c] += sum_g;
          if (!sinks[0]) continue;
          auto& dx = *sinks[0];
          const double k = gm[c] * inv_std[c];
          for (std::int64_t n = 0; n < N; ++n) {
            const auto off = (n * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
              if (train) {
                dx[off + i] += k * (g[off + i] - sum_g / count - xhat[off + i] * sum_gx / count);
              } else {
                dx[off + i] += k * g[off + i];
              }
            }
          }
        }
      });
}

Tensor relu(const Tensor& x) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return make_result(x.shape(), std::move(out), {x},
                     [x](std::span<const double> g, const GradientSinks& sinks) {
                       const auto v = x.values();
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < v.size(); ++i) {
                         if (v[i] > 0.0) dx[i] += g[i];
                       }
                     });
}

Tensor sigmoid(const Tensor& x) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v[i]));
    } else {
      const double e = std::exp(v[i]);
      out[i] = e / (1.0 + e);
    }
  }
  std::vector<double> saved = out;
  return make_result(x.shape(), std::move(out), {x},
                     [y = std::move(saved)](std::span<const double> g, const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < y.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), "add");
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const auto va = a.values(), vb = b.values();
  std::vector<double> out(static_cast<std::size_t>(element_count(out_shape)));
  for_each_broadcast(out_shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
    out[o] = va[ia] + vb[ib];
  });
  return make_result(out_shape, std::move(out), {a, b},
                     [out_shape, sa, sb](std::span<const double> g, const GradientSinks& sinks) {
                       for_each_broadcast(out_shape, sa, sb,
                                          [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
                                            if (sinks[0]) (*sinks[0])[ia] += g[o];
                                            if (sinks[1]) (*sinks[1])[ib] += g[o];
                                          });
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), "mul");
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const auto va = a.values(), vb = b.values();
  std::vector<double> out(static_cast<std::size_t>(element_count(out_shape)));
  for_each_broadcast(out_shape, sa, sb, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
    out[o] = va[ia] * vb[ib];
  });
  return make_result(
      out_shape, std::move(out), {a, b},
      [a, b, out_shape, sa, sb](std::span<const double> g, const GradientSinks& sinks) {
        const auto va = a.values(), vb = b.values();
        for_each_broadcast(out_shape, sa, sb,
                           [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
                             if (sinks[0]) (*sinks[0])[ia] += g[o] * vb[ib];
                             if (sinks[1]) (*sinks[1])[ib] += g[o] * va[ia];
                           });
      });
}

Tensor scale(const Tensor& x, double factor) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = factor * v[i];
  return make_result(x.shape(), std::move(out), {x},
                     [factor](std::span<const double> g, const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += factor * g[i];
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  const auto N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), HW = a.dim(2) * a.dim(3);
  const auto va = a.values(), vb = b.values();
  std::vector<double> out(static_cast<std::size_t>(N * (Ca + Cb) * HW));
  for (std::int64_t n = 0; n < N; ++n) {
    std::copy_n(va.data() + n * Ca * HW, Ca * HW, out.data() + n * (Ca + Cb) * HW);
    std::copy_n(vb.data() + n * Cb * HW, Cb * HW, out.data() + (n * (Ca + Cb) + Ca) * HW);
  }
  return make_result({N, Ca + Cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                     [N, Ca, Cb, HW](std::span<const double> g, const GradientSinks& sinks) {
                       for (std::int64_t n = 0; n < N; ++n) {
                         const double* src = g.data() + n * (Ca + Cb) * HW;
                         if (sinks[0]) {
                           double* d = sinks[0]->data() + n * Ca * HW;
                           for (std::int64_t i = 0; i < Ca * HW; ++i) d[i] += src[i];
                         }
                         if (sinks[1]) {
                           double* d = sinks[1]->data() + n * Cb * HW;
                           for (std::int64_t i = 0; i < Cb * HW; ++i) d[i] += src[Ca * HW + i];
                         }
                       }
                     });
}

Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t count) {
  require_rank4(x, "slice_channels");
  const auto N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (begin < 0 || count <= 0 || begin + count > C) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + std::to_string(C) +
                     " channels");
  }
  const auto v = x.values();
  std::vector<double> out(static_cast<std::size_t>(N * count * HW));
  for (std::int64_t n = 0; n < N; ++n) {
    std::copy_n(v.data() + (n * C + begin) * HW, count * HW, out.data() + n * count * HW);
  }
  return make_result({N, count, x.dim(2), x.dim(3)}, std::move(out), {x},
                     [N, C, HW, begin, count](std::span<const double> g,
                                              const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       for (std::int64_t n = 0; n < N; ++n) {
                         for (std::int64_t i = 0; i < count * HW; ++i) {
                           dx[(n * C + begin) * HW + i] += g[n * count * HW + i];
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {x}, [](std::span<const double> g, const GradientSinks& sinks) {
    for (auto& d : *sinks[0]) d += g[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  return scale(sum(x), 1.0 / n);
}

}  // namespace avwnet
