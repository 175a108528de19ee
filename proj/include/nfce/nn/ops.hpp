#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "nfce/nn/tensor.hpp"
#include "nfce/rng.hpp"

namespace nfce::nn {

namespace impl {

template <class T>
Matrix<T> im2col(const Matrix<T>& x, const Shape& s, int k, int stride, int pad, int ho, int wo) {
  const int cin = s.channels;
  Matrix<T> cols(Eigen::Index(cin) * k * k, Eigen::Index(s.batch) * ho * wo);
  for (int b = 0; b < s.batch; ++b) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const Eigen::Index col = (Eigen::Index(b) * ho + oy) * wo + ox;
        T* dst = cols.col(col).data();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            const int r0 = ky * k + kx;
            if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) {
              for (int c = 0; c < cin; ++c) dst[c * k * k + r0] = T(0);
            } else {
              const T* src = x.col((Eigen::Index(b) * s.height + iy) * s.width + ix).data();
              for (int c = 0; c < cin; ++c) dst[c * k * k + r0] = src[c];
            }
          }
        }
      }
    }
  }
  return cols;
}

template <class T>
void col2im_add(const Matrix<T>& cols, Matrix<T>& dx, const Shape& s, int k, int stride, int pad,
                int ho, int wo) {
  const int cin = s.channels;
  for (int b = 0; b < s.batch; ++b) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const T* src = cols.col((Eigen::Index(b) * ho + oy) * wo + ox).data();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= s.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= s.width) continue;
            T* dst = dx.col((Eigen::Index(b) * s.height + iy) * s.width + ix).data();
            const int r0 = ky * k + kx;
            for (int c = 0; c < cin; ++c) dst[c] += src[c * k * k + r0];
          }
        }
      }
    }
  }
}

}  // namespace impl

/// 2-D convolution. weight: C_out × (C_in·k·k) laid out as (C_out, C_in, k, k); bias: C_out × 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int kernel,
                 int stride, int pad) {
  const Shape s = x.shape();
  detail::require_shape(weight.value().cols() == Eigen::Index(s.channels) * kernel * kernel,
                        "conv2d: weight does not match input channels");
  detail::require_shape(bias.value().rows() == weight.value().rows() && bias.value().cols() == 1,
                        "conv2d: bias does not match output channels");
  const int ho = (s.height + 2 * pad - kernel) / stride + 1;
  const int wo = (s.width + 2 * pad - kernel) / stride + 1;
  Shape os{s.batch, static_cast<int>(weight.value().rows()), ho, wo};

  const bool pointwise = kernel == 1 && stride == 1 && pad == 0;
  auto cols = std::make_shared<Matrix<T>>();
  if (!pointwise) *cols = impl::im2col(x.value(), s, kernel, stride, pad, ho, wo);
  const Matrix<T>& in = pointwise ? x.value() : *cols;
  Matrix<T> out(os.channels, os.columns());
  out.noalias() = weight.value() * in;
  out.colwise() += bias.value().col(0);

  return make_result<T>(std::move(out), os, {x, weight, bias}, [=](Node<T>* self) {
    auto xn = x.node();
    auto wn = weight.node();
    auto bn = bias.node();
    return [=]() {
      const Matrix<T>& g = self->grad;
      const Matrix<T>& in = pointwise ? xn->value : *cols;
      if (wn->requires_grad) wn->grad_buffer().noalias() += g * in.transpose();
      if (bn->requires_grad) bn->grad_buffer() += g.rowwise().sum();
      if (xn->requires_grad) {
        if (pointwise) {
          xn->grad_buffer().noalias() += wn->value.transpose() * g;
        } else {
          Matrix<T> dcols = wn->value.transpose() * g;
          impl::col2im_add(dcols, xn->grad_buffer(), s, kernel, stride, pad, ho, wo);
        }
      }
    };
  });
}

/// Dense layer on per-sample vectors: x is F × B, weight O × F, bias O × 1.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::require_shape(x.shape().spatial() == 1, "linear: input must be a vector batch");
  detail::require_shape(weight.value().cols() == x.value().rows(), "linear: weight mismatch");
  Matrix<T> out = weight.value() * x.value();
  out.colwise() += bias.value().col(0);
  Shape os{x.shape().batch, static_cast<int>(weight.value().rows()), 1, 1};
  return make_result<T>(std::move(out), os, {x, weight, bias}, [=](Node<T>* self) {
    auto xn = x.node();
    auto wn = weight.node();
    auto bn = bias.node();
    return [=]() {
      const Matrix<T>& g = self->grad;
      if (wn->requires_grad) wn->grad_buffer().noalias() += g * xn->value.transpose();
      if (bn->requires_grad) bn->grad_buffer() += g.rowwise().sum();
      if (xn->requires_grad) xn->grad_buffer().noalias() += wn->value.transpose() * g;
    };
  });
}

/// x·sigmoid(x).
template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  auto sig = std::make_shared<Matrix<T>>(
      (T(1) / (T(1) + (-x.value().array()).exp())).matrix());
  Matrix<T> out = (x.value().array() * sig->array()).matrix();
  return make_result<T>(std::move(out), x.shape(), {x}, [=](Node<T>* self) {
    auto xn = x.node();
    return [=]() {
      const auto s = sig->array();
      xn->grad_buffer().array() +=
          self->grad.array() * s * (T(1) + xn->value.array() * (T(1) - s));
    };
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_shape(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() +
                                                     " vs " + b.shape().str());
  Matrix<T> out = a.value() + b.value();
  return make_result<T>(std::move(out), a.shape(), {a, b}, [=](Node<T>* self) {
    auto an = a.node();
    auto bn = b.node();
    return [=]() {
      if (an->requires_grad) an->grad_buffer() += self->grad;
      if (bn->requires_grad) bn->grad_buffer() += self->grad;
    };
  });
}

/// Adds a per-sample, per-channel bias v (C × B) to every spatial position of x.
template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& v) {
  const Shape s = x.shape();
  detail::require_shape(v.value().rows() == s.channels && v.value().cols() == s.batch,
                        "add_channel_bias: bias must be C × B");
  const int hw = s.spatial();
  Matrix<T> out = x.value();
  for (int b = 0; b < s.batch; ++b)
    out.middleCols(Eigen::Index(b) * hw, hw).colwise() += v.value().col(b);
  return make_result<T>(std::move(out), s, {x, v}, [=](Node<T>* self) {
    auto xn = x.node();
    auto vn = v.node();
    return [=]() {
      if (xn->requires_grad) xn->grad_buffer() += self->grad;
      if (vn->requires_grad) {
        auto& gv = vn->grad_buffer();
        for (int b = 0; b < s.batch; ++b)
          gv.col(b) += self->grad.middleCols(Eigen::Index(b) * hw, hw).rowwise().sum();
      }
    };
  });
}

/// Group normalization with per-channel affine gamma, beta (C × 1).
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, int groups,
                     T eps = T(1e-5)) {
  const Shape s = x.shape();
  detail::require_shape(s.channels % groups == 0, "group_norm: channels not divisible by groups");
  const int cpg = s.channels / groups;
  const int hw = s.spatial();
  const T count = T(cpg) * T(hw);

  auto xhat = std::make_shared<Matrix<T>>(s.channels, s.columns());
  auto rstd = std::make_shared<Matrix<T>>(groups, s.batch);
  for (int b = 0; b < s.batch; ++b) {
    for (int g = 0; g < groups; ++g) {
      const auto blk = x.value().block(g * cpg, Eigen::Index(b) * hw, cpg, hw);
      const T mean = blk.sum() / count;
      const T var = (blk.array() - mean).square().sum() / count;
      const T r = T(1) / std::sqrt(var + eps);
      (*rstd)(g, b) = r;
      xhat->block(g * cpg, Eigen::Index(b) * hw, cpg, hw) = (blk.array() - mean) * r;
    }
  }
  Matrix<T> out(s.channels, s.columns());
  out = (xhat->array().colwise() * gamma.value().col(0).array()).matrix();
  out.colwise() += beta.value().col(0);

  return make_result<T>(std::move(out), s, {x, gamma, beta}, [=](Node<T>* self) {
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    return [=]() {
      const Matrix<T>& dy = self->grad;
      if (gn->requires_grad)
        gn->grad_buffer() += (dy.array() * xhat->array()).rowwise().sum().matrix();
      if (bn->requires_grad) bn->grad_buffer() += dy.rowwise().sum();
      if (!xn->requires_grad) return;
      auto& dx = xn->grad_buffer();
      const Matrix<T> dxhat = (dy.array().colwise() * gn->value.col(0).array()).matrix();
      for (int b = 0; b < s.batch; ++b) {
        for (int g = 0; g < groups; ++g) {
          const Eigen::Index c0 = g * cpg;
          const Eigen::Index p0 = Eigen::Index(b) * hw;
          const auto dh = dxhat.block(c0, p0, cpg, hw).array();
          const auto xh = xhat->block(c0, p0, cpg, hw).array();
          const T sum_dh = dh.sum();
          const T sum_dh_xh = (dh * xh).sum();
          dx.block(c0, p0, cpg, hw).array() +=
              (*rstd)(g, b) / count * (count * dh - sum_dh - xh * sum_dh_xh);
        }
      }
    };
  });
}

/// Inverted dropout; identity when rate is 0.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  detail::require(rate < 1.0, "dropout rate must be below 1");
  const T keep_scale = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<Matrix<T>>(x.value().rows(), x.value().cols());
  for (Eigen::Index i = 0; i < mask->size(); ++i)
    mask->data()[i] = rng.uniform() < rate ? T(0) : keep_scale;
  Matrix<T> out = (x.value().array() * mask->array()).matrix();
  return make_result<T>(std::move(out), x.shape(), {x}, [=](Node<T>* self) {
    auto xn = x.node();
    return [=]() { xn->grad_buffer().array() += self->grad.array() * mask->array(); };
  });
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  detail::require_shape(sa.batch == sb.batch && sa.height == sb.height && sa.width == sb.width,
                        "concat_channels: spatial/batch mismatch");
  Matrix<T> out(sa.channels + sb.channels, sa.columns());
  out.topRows(sa.channels) = a.value();
  out.bottomRows(sb.channels) = b.value();
  Shape os = sa;
  os.channels = sa.channels + sb.channels;
  return make_result<T>(std::move(out), os, {a, b}, [=](Node<T>* self) {
    auto an = a.node();
    auto bn = b.node();
    return [=]() {
      if (an->requires_grad) an->grad_buffer() += self->grad.topRows(sa.channels);
      if (bn->requires_grad) bn->grad_buffer() += self->grad.bottomRows(sb.channels);
    };
  });
}

/// Nearest-neighbour ×2 upsampling.
template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  const Shape s = x.shape();
  Shape os{s.batch, s.channels, s.height * 2, s.width * 2};
  Matrix<T> out(os.channels, os.columns());
  for (int b = 0; b < s.batch; ++b)
    for (int y = 0; y < os.height; ++y)
      for (int xx = 0; xx < os.width; ++xx)
        out.col((Eigen::Index(b) * os.height + y) * os.width + xx) =
            x.value().col((Eigen::Index(b) * s.height + y / 2) * s.width + xx / 2);
  return make_result<T>(std::move(out), os, {x}, [=](Node<T>* self) {
    auto xn = x.node();
    return [=]() {
      auto& dx = xn->grad_buffer();
      for (int b = 0; b < s.batch; ++b)
        for (int y = 0; y < os.height; ++y)
          for (int xx = 0; xx < os.width; ++xx)
            dx.col((Eigen::Index(b) * s.height + y / 2) * s.width + xx / 2) +=
                self->grad.col((Eigen::Index(b) * os.height + y) * os.width + xx);
    };
  });
}

namespace impl {

template <class T>
Matrix<T> softmax_columns(Matrix<T> a) {
  for (Eigen::Index r = 0; r < a.cols(); ++r) {
    auto col = a.col(r).array();
    col = (col - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return a;
}

}  // namespace impl

/// Attention matrix of sample b: row r holds the weights query r assigns to every position.
template <class T>
Matrix<T> attention_map(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk, int b) {
  const Shape s = x.shape();
  detail::require(b >= 0 && b < s.batch, "attention_map: sample index out of range");
  const int hw = s.spatial();
  const auto xb = x.value().middleCols(Eigen::Index(b) * hw, hw);
  const T scale = T(1) / std::sqrt(T(wq.value().cols()));
  const Matrix<T> k = xb.transpose() * wk.value();
  const Matrix<T> qt = wq.value().transpose() * xb;
  return impl::softmax_columns<T>((k * qt) * scale).transpose();
}

/// Self-attention over the spatial positions of each sample:
/// Z' = softmax(Z·Wq·Wkᵀ·Zᵀ/√d_k)·Z·Wv with Z the (h·w × C) patch matrix.
/// wq, wk: C × d_k; wv: C × C.
template <class T>
Tensor<T> attention(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& wk,
                    const Tensor<T>& wv) {
  const Shape s = x.shape();
  const Eigen::Index c = s.channels;
  const Eigen::Index dk = wq.value().cols();
  detail::require_shape(wq.value().rows() == c && wk.value().rows() == c,
                        "attention: query/key maps must have C rows");
  detail::require_shape(wk.value().cols() == dk, "attention: d_k must equal d_q");
  detail::require_shape(wv.value().rows() == c && wv.value().cols() == c,
                        "attention: value map must be C × C");
  const int hw = s.spatial();
  const T scale = T(1) / std::sqrt(T(dk));
  const bool record = grad_enabled() &&
                      (x.requires_grad() || wq.requires_grad() || wk.requires_grad() ||
                       wv.requires_grad());

  struct Cache {
    std::vector<Matrix<T>> at, k, qt, vt;
  };
  auto cache = std::make_shared<Cache>();
  Matrix<T> out(c, s.columns());
  for (int b = 0; b < s.batch; ++b) {
    const auto xb = x.value().middleCols(Eigen::Index(b) * hw, hw);
    Matrix<T> k = xb.transpose() * wk.value();      // hw × dk
    Matrix<T> qt = wq.value().transpose() * xb;     // dk × hw
    Matrix<T> vt = wv.value().transpose() * xb;     // C × hw
    Matrix<T> at = impl::softmax_columns<T>((k * qt) * scale);  // column r: weights of query r
    out.middleCols(Eigen::Index(b) * hw, hw).noalias() = vt * at;
    if (record) {
      cache->at.push_back(std::move(at));
      cache->k.push_back(std::move(k));
      cache->qt.push_back(std::move(qt));
      cache->vt.push_back(std::move(vt));
    }
  }

  return make_result<T>(std::move(out), s, {x, wq, wk, wv}, [=](Node<T>* self) {
    auto xn = x.node();
    auto qn = wq.node();
    auto kn = wk.node();
    auto vn = wv.node();
    return [=]() {
      for (int b = 0; b < s.batch; ++b) {
        const auto xb = xn->value.middleCols(Eigen::Index(b) * hw, hw);
        const auto g = self->grad.middleCols(Eigen::Index(b) * hw, hw);
        const Matrix<T>& at = cache->at[b];
        const Matrix<T> dvt = g * at.transpose();                     // C × hw
        Matrix<T> dat = cache->vt[b].transpose() * g;                 // hw × hw
        for (Eigen::Index r = 0; r < dat.cols(); ++r) {
          const T dot = at.col(r).dot(dat.col(r));
          dat.col(r) = (at.col(r).array() * (dat.col(r).array() - dot)).matrix();
        }
        const Matrix<T> dk = (dat * cache->qt[b].transpose()) * scale;  // hw × dk
        const Matrix<T> dqt = (cache->k[b].transpose() * dat) * scale;  // dk × hw
        if (kn->requires_grad) kn->grad_buffer().noalias() += xb * dk;
        if (qn->requires_grad) qn->grad_buffer().noalias() += xb * dqt.transpose();
        if (vn->requires_grad) vn->grad_buffer().noalias() += xb * dvt.transpose();
        if (xn->requires_grad) {
          auto dx = xn->grad_buffer().middleCols(Eigen::Index(b) * hw, hw);
          dx.noalias() += kn->value * dk.transpose();
          dx.noalias() += qn->value * dqt;
          dx.noalias() += vn->value * dvt;
        }
      }
    };
  });
}

/// Mean of squared differences over all elements; returns a 1×1 tensor.
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Matrix<T>& target) {
  detail::require_shape(pred.value().rows() == target.rows() && pred.value().cols() == target.cols(),
                        "mse: shape mismatch");
  auto diff = std::make_shared<Matrix<T>>(pred.value() - target);
  const T n = T(diff->size());
  Matrix<T> out(1, 1);
  out(0, 0) = diff->squaredNorm() / n;
  return make_result<T>(std::move(out), Shape{1, 1, 1, 1}, {pred}, [=](Node<T>* self) {
    auto pn = pred.node();
    return [=]() { pn->grad_buffer() += (T(2) * self->grad(0, 0) / n) * *diff; };
  });
}

/// Σ of elementwise products with a fixed probe; used for directional sensitivity checks.
template <class T>
Tensor<T> probe_sum(const Tensor<T>& x, const Matrix<T>& probe) {
  detail::require_shape(x.value().rows() == probe.rows() && x.value().cols() == probe.cols(),
                        "probe_sum: shape mismatch");
  Matrix<T> out(1, 1);
  out(0, 0) = (x.value().array() * probe.array()).sum();
  return make_result<T>(std::move(out), Shape{1, 1, 1, 1}, {x}, [=](Node<T>* self) {
    auto xn = x.node();
    return [=]() { xn->grad_buffer() += self->grad(0, 0) * probe; };
  });
}

}  // namespace nfce::nn
