#pragma once

#include <Eigen/Dense>
#include <cstring>
#include <vector>

namespace abfpe::nn {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Unfolds one CHW sample into a [c*k*k] x [oh*ow] patch matrix.
template <typename T>
void im2col(const T* data, int channels, int height, int width, int k,
            int stride, int pad, T* col) {
  const int oh = conv_out_dim(height, k, stride, pad);
  const int ow = conv_out_dim(width, k, stride, pad);
  T* out = col;
  for (int c = 0; c < channels; ++c) {
    const T* plane = data + static_cast<size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            for (int ox = 0; ox < ow; ++ox) *out++ = T(0);
            continue;
          }
          const T* row = plane + static_cast<size_t>(iy) * width;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            *out++ = (ix < 0 || ix >= width) ? T(0) : row[ix];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: folds patch gradients back onto the input gradient
/// (accumulating; caller zeroes `data` first).
template <typename T>
void col2im(const T* col, int channels, int height, int width, int k,
            int stride, int pad, T* data) {
  const int oh = conv_out_dim(height, k, stride, pad);
  const int ow = conv_out_dim(width, k, stride, pad);
  const T* in = col;
  for (int c = 0; c < channels; ++c) {
    T* plane = data + static_cast<size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            in += ow;
            continue;
          }
          T* row = plane + static_cast<size_t>(iy) * width;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) row[ix] += *in;
            ++in;
          }
        }
      }
    }
  }
}

/// One-sample convolution forward: y = W * im2col(x) + b.
/// x: in_c * h * w, weights: out_c x (in_c*k*k), y: out_c * oh * ow.
template <typename T>
void conv_forward(const T* x, int in_c, int height, int width,
                  const T* weights, const T* bias, int out_c, int k,
                  int stride, int pad, T* y, std::vector<T>& col_ws) {
  const int oh = conv_out_dim(height, k, stride, pad);
  const int ow = conv_out_dim(width, k, stride, pad);
  const int kk = in_c * k * k;
  const int ohw = oh * ow;

  const T* col = x;
  if (!(k == 1 && stride == 1 && pad == 0)) {
    col_ws.resize(static_cast<size_t>(kk) * ohw);
    im2col(x, in_c, height, width, k, stride, pad, col_ws.data());
    col = col_ws.data();
  }

  ConstMatMap<T> wm(weights, out_c, kk);
  ConstMatMap<T> cm(col, kk, ohw);
  MatMap<T> ym(y, out_c, ohw);
  ym.noalias() = wm * cm;
  if (bias)
    for (int oc = 0; oc < out_c; ++oc) ym.row(oc).array() += bias[oc];
}

/// One-sample convolution backward. Accumulates dw/db; writes dx when
/// non-null (dx is overwritten, not accumulated).
template <typename T>
void conv_backward(const T* x, int in_c, int height, int width,
                   const T* weights, int out_c, int k, int stride, int pad,
                   const T* dy, T* dx, T* dw, T* db, std::vector<T>& col_ws,
                   std::vector<T>& dcol_ws) {
  const int oh = conv_out_dim(height, k, stride, pad);
  const int ow = conv_out_dim(width, k, stride, pad);
  const int kk = in_c * k * k;
  const int ohw = oh * ow;
  const bool identity_col = (k == 1 && stride == 1 && pad == 0);

  const T* col = x;
  if (!identity_col) {
    col_ws.resize(static_cast<size_t>(kk) * ohw);
    im2col(x, in_c, height, width, k, stride, pad, col_ws.data());
    col = col_ws.data();
  }

  ConstMatMap<T> dym(dy, out_c, ohw);
  ConstMatMap<T> cm(col, kk, ohw);
  MatMap<T> dwm(dw, out_c, kk);
  dwm.noalias() += dym * cm.transpose();
  if (db) {
    for (int oc = 0; oc < out_c; ++oc) {
      T sum = T(0);
      const T* row = dy + static_cast<size_t>(oc) * ohw;
      for (int i = 0; i < ohw; ++i) sum += row[i];
      db[oc] += sum;
    }
  }

  if (!dx) return;
  ConstMatMap<T> wm(weights, out_c, kk);
  if (identity_col) {
    MatMap<T> dxm(dx, kk, ohw);
    dxm.noalias() = wm.transpose() * dym;
  } else {
    dcol_ws.resize(static_cast<size_t>(kk) * ohw);
    MatMap<T> dcm(dcol_ws.data(), kk, ohw);
    dcm.noalias() = wm.transpose() * dym;
    std::memset(dx, 0, sizeof(T) * static_cast<size_t>(in_c) * height * width);
    col2im(dcol_ws.data(), in_c, height, width, k, stride, pad, dx);
  }
}

}  // namespace abfpe::nn
