// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace petcond::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Nchw {
  std::size_t n, c, h, w;
  std::size_t plane() const { return h * w; }
};

template <typename T>
Nchw dims(const Tensor<T>& t) {
  if (t.shape.size() != 4) throw ShapeError("expected NCHW tensor, got " + shape_string(t.shape));
  return {t.shape[0], t.shape[1], t.shape[2], t.shape[3]};
}

template <typename T>
void reshape(Tensor<T>& t, const Shape& shape) {
  if (t.shape != shape) {
    t.shape = shape;
    t.data.assign(element_count(shape), T{});
  }
}

// col is [cin * k * k, h * w] row-major.
template <typename T>
void im2col(const T* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* plane = x + ci * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((ci * k + ky) * k + kx) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t oy = 0; oy < H; ++oy) {
          T* out = row + oy * W;
          const std::ptrdiff_t sy = oy + dy;
          if (sy < 0 || sy >= H) {
            std::fill(out, out + W, T{});
            continue;
          }
          const T* src = plane + sy * W;
          std::fill(out, out + x0, T{});
          std::copy(src + x0 + dx, src + x1 + dx, out + x0);
          std::fill(out + x1, out + W, T{});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k, T* x) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* plane = x + ci * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((ci * k + ky) * k + kx) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t oy = 0; oy < H; ++oy) {
          const std::ptrdiff_t sy = oy + dy;
          if (sy < 0 || sy >= H) continue;
          const T* in = row + oy * W;
          T* dst = plane + sy * W + dx;
          for (std::ptrdiff_t ox = x0; ox < x1; ++ox) dst[ox] += in[ox];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    std::size_t cout, std::size_t kernel, Tensor<T>& y) {
  const auto d = dims(x);
  const std::size_t patch = d.c * kernel * kernel;
  if (weight.size() != cout * patch || bias.size() != cout)
    throw ShapeError("conv2d parameter shapes do not match input channels " + std::to_string(d.c));
  reshape(y, {d.n, cout, d.h, d.w});

  const std::size_t hw = d.plane();
  Eigen::Map<const RowMat<T>> wmat(weight.data(), static_cast<Eigen::Index>(cout),
                                   static_cast<Eigen::Index>(patch));
  AlignedVector<T> col(kernel == 1 ? 0 : patch * hw);
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* xn = x.data.data() + n * d.c * hw;
    const T* cols = xn;
    if (kernel != 1) {
      im2col(xn, d.c, d.h, d.w, kernel, col.data());
      cols = col.data();
    }
    Eigen::Map<const RowMat<T>> cmat(cols, static_cast<Eigen::Index>(patch),
                                     static_cast<Eigen::Index>(hw));
    Eigen::Map<RowMat<T>> ymat(y.data.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
                               static_cast<Eigen::Index>(hw));
    ymat.noalias() = wmat * cmat;
    for (std::size_t c = 0; c < cout; ++c) ymat.row(static_cast<Eigen::Index>(c)).array() += bias[c];
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, std::size_t cout,
                     std::size_t kernel, const Tensor<T>& dy, Tensor<T>* dx,
                     std::span<T> dweight, std::span<T> dbias) {
  const auto d = dims(x);
  const std::size_t patch = d.c * kernel * kernel;
  const std::size_t hw = d.plane();
  if (dy.shape != Shape{d.n, cout, d.h, d.w}) throw ShapeError("conv2d gradient shape mismatch");
  if (dx) {
    dx->shape = x.shape;
    dx->data.assign(x.size(), T{});
  }

  Eigen::Map<const RowMat<T>> wmat(weight.data(), static_cast<Eigen::Index>(cout),
                                   static_cast<Eigen::Index>(patch));
  Eigen::Map<RowMat<T>> dwmat(dweight.data(), static_cast<Eigen::Index>(cout),
                              static_cast<Eigen::Index>(patch));
  AlignedVector<T> col(kernel == 1 ? 0 : patch * hw);
  RowMat<T> dcol;
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* xn = x.data.data() + n * d.c * hw;
    const T* cols = xn;
    if (kernel != 1) {
      im2col(xn, d.c, d.h, d.w, kernel, col.data());
      cols = col.data();
    }
    Eigen::Map<const RowMat<T>> cmat(cols, static_cast<Eigen::Index>(patch),
                                     static_cast<Eigen::Index>(hw));
    Eigen::Map<const RowMat<T>> dymat(dy.data.data() + n * cout * hw,
                                      static_cast<Eigen::Index>(cout),
                                      static_cast<Eigen::Index>(hw));
    dwmat.noalias() += dymat * cmat.transpose();
    for (std::size_t c = 0; c < cout; ++c) dbias[c] += dymat.row(static_cast<Eigen::Index>(c)).sum();

    if (dx) {
      T* dxn = dx->data.data() + n * d.c * hw;
      if (kernel == 1) {
        Eigen::Map<RowMat<T>> dxmat(dxn, static_cast<Eigen::Index>(d.c),
                                    static_cast<Eigen::Index>(hw));
        dxmat.noalias() = wmat.transpose() * dymat;
      } else {
        dcol.noalias() = wmat.transpose() * dymat;
        col2im_add(dcol.data(), d.c, d.h, d.w, kernel, dxn);
      }
    }
  }
}

template <typename T>
void group_norm_forward(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                        std::size_t groups, Tensor<T>& y, std::vector<double>& mean,
                        std::vector<double>& rstd) {
  const auto d = dims(x);
  if (groups == 0 || d.c % groups != 0)
    throw ShapeError("group count must divide channel count " + std::to_string(d.c));
  if (gamma.size() != d.c || beta.size() != d.c) throw ShapeError("group norm parameter mismatch");
  reshape(y, x.shape);
  const std::size_t per_group = d.c / groups;
  const std::size_t hw = d.plane();
  const auto count = static_cast<double>(per_group * hw);
  mean.assign(d.n * groups, 0.0);
  rstd.assign(d.n * groups, 0.0);

  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      const T* src = x.data.data() + (n * d.c + g * per_group) * hw;
      double sum = 0.0;
      for (std::size_t i = 0; i < per_group * hw; ++i) sum += src[i];
      const double mu = sum / count;
      double sq = 0.0;
      for (std::size_t i = 0; i < per_group * hw; ++i) {
        const double v = src[i] - mu;
        sq += v * v;
      }
      const double r = 1.0 / std::sqrt(sq / count + kGroupNormEps);
      mean[n * groups + g] = mu;
      rstd[n * groups + g] = r;
      for (std::size_t cc = 0; cc < per_group; ++cc) {
        const std::size_t c = g * per_group + cc;
        const T* in = src + cc * hw;
        T* out = y.data.data() + (n * d.c + c) * hw;
        const double scale = r * gamma[c];
        const double shift = beta[c] - mu * scale;
        for (std::size_t i = 0; i < hw; ++i) out[i] = static_cast<T>(in[i] * scale + shift);
      }
    }
  }
}

template <typename T>
void group_norm_backward(const Tensor<T>& x, std::span<const T> gamma, std::size_t groups,
                         const std::vector<double>& mean, const std::vector<double>& rstd,
                         const Tensor<T>& dy, Tensor<T>& dx, std::span<T> dgamma,
                         std::span<T> dbeta) {
  const auto d = dims(x);
  reshape(dx, x.shape);
  const std::size_t per_group = d.c / groups;
  const std::size_t hw = d.plane();
  const auto count = static_cast<double>(per_group * hw);

  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      const double mu = mean[n * groups + g];
      const double r = rstd[n * groups + g];
      // Sums of dxhat and dxhat * xhat over the group.
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      for (std::size_t cc = 0; cc < per_group; ++cc) {
        const std::size_t c = g * per_group + cc;
        const std::size_t base = (n * d.c + c) * hw;
        double dgam = 0.0;
        double dbet = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          const double xhat = (x.data[base + i] - mu) * r;
          const double g_out = dy.data[base + i];
          dgam += g_out * xhat;
          dbet += g_out;
          const double dxhat = g_out * gamma[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        dgamma[c] += static_cast<T>(dgam);
        dbeta[c] += static_cast<T>(dbet);
      }
      for (std::size_t cc = 0; cc < per_group; ++cc) {
        const std::size_t c = g * per_group + cc;
        const std::size_t base = (n * d.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double xhat = (x.data[base + i] - mu) * r;
          const double dxhat = dy.data[base + i] * static_cast<double>(gamma[c]);
          dx.data[base + i] =
              static_cast<T>(r / count * (count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat));
        }
      }
    }
  }
}

template <typename T>
void silu_forward(const Tensor<T>& x, Tensor<T>& y) {
  reshape(y, x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x.data[i];
    y.data[i] = v / (T{1} + std::exp(-v));
  }
}

template <typename T>
void silu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  reshape(dx, x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x.data[i];
    const T s = T{1} / (T{1} + std::exp(-v));
    dx.data[i] = dy.data[i] * s * (T{1} + v * (T{1} - s));
  }
}

template <typename T>
void avg_pool2_forward(const Tensor<T>& x, Tensor<T>& y) {
  const auto d = dims(x);
  if (d.h % 2 || d.w % 2) throw ShapeError("average pooling needs even spatial dims");
  const std::size_t oh = d.h / 2, ow = d.w / 2;
  reshape(y, {d.n, d.c, oh, ow});
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const T* in = x.data.data() + p * d.h * d.w;
    T* out = y.data.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const T* a = in + 2 * i * d.w + 2 * j;
        out[i * ow + j] = (a[0] + a[1] + a[d.w] + a[d.w + 1]) * T(0.25);
      }
  }
}

template <typename T>
void avg_pool2_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  const auto d = dims(dy);
  const std::size_t ih = d.h * 2, iw = d.w * 2;
  reshape(dx, {d.n, d.c, ih, iw});
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const T* g = dy.data.data() + p * d.h * d.w;
    T* out = dx.data.data() + p * ih * iw;
    for (std::size_t i = 0; i < ih; ++i)
      for (std::size_t j = 0; j < iw; ++j) out[i * iw + j] = g[(i / 2) * d.w + j / 2] * T(0.25);
  }
}

template <typename T>
void upsample2_forward(const Tensor<T>& x, Tensor<T>& y) {
  const auto d = dims(x);
  const std::size_t oh = d.h * 2, ow = d.w * 2;
  reshape(y, {d.n, d.c, oh, ow});
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const T* in = x.data.data() + p * d.h * d.w;
    T* out = y.data.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) out[i * ow + j] = in[(i / 2) * d.w + j / 2];
  }
}

template <typename T>
void upsample2_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  const auto d = dims(dy);
  if (d.h % 2 || d.w % 2) throw ShapeError("upsample gradient needs even spatial dims");
  const std::size_t oh = d.h / 2, ow = d.w / 2;
  reshape(dx, {d.n, d.c, oh, ow});
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const T* g = dy.data.data() + p * d.h * d.w;
    T* out = dx.data.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const T* a = g + 2 * i * d.w + 2 * j;
        out[i * ow + j] = a[0] + a[1] + a[d.w] + a[d.w + 1];
      }
  }
}

template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
  const auto da = dims(a);
  const auto db = dims(b);
  if (da.n != db.n || da.h != db.h || da.w != db.w)
    throw ShapeError("cannot concatenate " + shape_string(a.shape) + " with " +
                     shape_string(b.shape));
  const std::size_t hw = da.plane();
  reshape(y, {da.n, da.c + db.c, da.h, da.w});
  for (std::size_t n = 0; n < da.n; ++n) {
    T* out = y.data.data() + n * (da.c + db.c) * hw;
    std::copy_n(a.data.data() + n * da.c * hw, da.c * hw, out);
    std::copy_n(b.data.data() + n * db.c * hw, db.c * hw, out + da.c * hw);
  }
}

template <typename T>
void split_channels(const Tensor<T>& dy, std::size_t channels_a, Tensor<T>& da, Tensor<T>& db) {
  const auto d = dims(dy);
  const std::size_t cb = d.c - channels_a;
  const std::size_t hw = d.plane();
  reshape(da, {d.n, channels_a, d.h, d.w});
  reshape(db, {d.n, cb, d.h, d.w});
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* in = dy.data.data() + n * d.c * hw;
    std::copy_n(in, channels_a * hw, da.data.data() + n * channels_a * hw);
    std::copy_n(in + channels_a * hw, cb * hw, db.data.data() + n * cb * hw);
  }
}

template <typename T>
void gate_forward(const Tensor<T>& x, const Tensor<T>& emb, std::span<const T> weight,
                  std::span<const T> bias, Tensor<T>& y, Tensor<T>& g) {
  const auto d = dims(x);
  if (emb.shape.size() != 2 || emb.shape[0] != d.n)
    throw ShapeError("gate embedding must be [batch, D], got " + shape_string(emb.shape));
  const std::size_t dim = emb.shape[1];
  if (weight.size() != d.c * dim || bias.size() != d.c)
    throw ShapeError("gate parameters do not match " + std::to_string(d.c) + " channels x " +
                     std::to_string(dim) + " embedding dims");
  reshape(y, x.shape);
  reshape(g, {d.n, d.c});
  const std::size_t hw = d.plane();
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* e = emb.data.data() + n * dim;
    for (std::size_t c = 0; c < d.c; ++c) {
      T acc = bias[c];
      const T* wrow = weight.data() + c * dim;
      for (std::size_t k = 0; k < dim; ++k) acc += wrow[k] * e[k];
      g.data[n * d.c + c] = acc;
      const T* in = x.data.data() + (n * d.c + c) * hw;
      T* out = y.data.data() + (n * d.c + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[i] = acc * in[i];
    }
  }
}

template <typename T>
void gate_backward(const Tensor<T>& x, const Tensor<T>& emb, const Tensor<T>& g,
                   const Tensor<T>& dy, Tensor<T>& dx, std::span<T> dweight, std::span<T> dbias) {
  const auto d = dims(x);
  const std::size_t dim = emb.shape[1];
  const std::size_t hw = d.plane();
  reshape(dx, x.shape);
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* e = emb.data.data() + n * dim;
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t base = (n * d.c + c) * hw;
      const T gain = g.data[n * d.c + c];
      double dg = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        dg += static_cast<double>(dy.data[base + i]) * x.data[base + i];
        dx.data[base + i] = gain * dy.data[base + i];
      }
      const T dgt = static_cast<T>(dg);
      dbias[c] += dgt;
      T* dwrow = dweight.data() + c * dim;
      for (std::size_t k = 0; k < dim; ++k) dwrow[k] += dgt * e[k];
    }
  }
}

#define PETCOND_INSTANTIATE_OPS(T)                                                              \
  template void conv2d_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,     \
                                  std::size_t, std::size_t, Tensor<T>&);                        \
  template void conv2d_backward<T>(const Tensor<T>&, std::span<const T>, std::size_t,           \
                                   std::size_t, const Tensor<T>&, Tensor<T>*, std::span<T>,     \
                                   std::span<T>);                                               \
  template void group_norm_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, \
                                      std::size_t, Tensor<T>&, std::vector<double>&,            \
                                      std::vector<double>&);                                    \
  template void group_norm_backward<T>(const Tensor<T>&, std::span<const T>, std::size_t,       \
                                       const std::vector<double>&, const std::vector<double>&,  \
                                       const Tensor<T>&, Tensor<T>&, std::span<T>,              \
                                       std::span<T>);                                           \
  template void silu_forward<T>(const Tensor<T>&, Tensor<T>&);                                  \
  template void silu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);               \
  template void avg_pool2_forward<T>(const Tensor<T>&, Tensor<T>&);                             \
  template void avg_pool2_backward<T>(const Tensor<T>&, Tensor<T>&);                            \
  template void upsample2_forward<T>(const Tensor<T>&, Tensor<T>&);                             \
  template void upsample2_backward<T>(const Tensor<T>&, Tensor<T>&);                            \
  template void concat_channels<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);             \
  template void split_channels<T>(const Tensor<T>&, std::size_t, Tensor<T>&, Tensor<T>&);      \
  template void gate_forward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>,         \
                                std::span<const T>, Tensor<T>&, Tensor<T>&);                    \
  template void gate_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                 const Tensor<T>&, Tensor<T>&, std::span<T>, std::span<T>);

PETCOND_INSTANTIATE_OPS(float)
PETCOND_INSTANTIATE_OPS(double)

#undef PETCOND_INSTANTIATE_OPS

}  // namespace petcond::nn
