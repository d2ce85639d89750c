#include "zoomnet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace zoomnet {

namespace {

std::string dims(std::size_t a, std::size_t b) { return std::to_string(a) + " vs " + std::to_string(b); }

void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ContractError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                        shape_str(s));
  }
}

// Output columns [lo, hi) whose tap at offset `kx` lands inside [0, w).
inline std::pair<std::size_t, std::size_t> valid_span(std::size_t kx, std::size_t stride, std::size_t pad,
                                                      std::size_t w, std::size_t ow) {
  const long s = static_cast<long>(stride);
  const long off = static_cast<long>(kx) - static_cast<long>(pad);
  long lo = off >= 0 ? 0 : (-off + s - 1) / s;
  long hi = (static_cast<long>(w) - off + s - 1) / s;
  hi = std::clamp(hi, 0L, static_cast<long>(ow));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Unfolds one N-slice of the input into a (C*k*k) x (OH*OW) row-major matrix.
template <typename T>
void im2col(const T* src, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t oh, std::size_t ow, T* col) {
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((ci * k + ky) * k + kx) * oh * ow;
        const auto [lo, hi] = valid_span(kx, stride, pad, w, ow);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          T* out = row + oy * ow;
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(out, out + ow, T(0));
            continue;
          }
          std::fill(out, out + lo, T(0));
          std::fill(out + hi, out + ow, T(0));
          if (lo == hi) continue;
          const T* in = src + (ci * h + static_cast<std::size_t>(iy)) * w + (lo * stride + kx - pad);
          if (stride == 1) {
            std::copy(in, in + (hi - lo), out + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) out[ox] = in[(ox - lo) * stride];
          }
        }
      }
}

// Adjoint of im2col: scatters column gradients back onto the input grid.
template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t oh, std::size_t ow, T* dst) {
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((ci * k + ky) * k + kx) * oh * ow;
        const auto [lo, hi] = valid_span(kx, stride, pad, w, ow);
        if (lo == hi) continue;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          const T* in = row + oy * ow;
          T* out = dst + (ci * h + static_cast<std::size_t>(iy)) * w + (lo * stride + kx - pad);
          for (std::size_t ox = lo; ox < hi; ++ox) out[(ox - lo) * stride] += in[ox];
        }
      }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
  require_rank("conv2d input", input.shape(), 4);
  require_rank("conv2d weight", weight.shape(), 4);
  require_rank("conv2d bias", bias.shape(), 1);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oc = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c) throw ContractError("conv2d: input channels " + dims(c, weight.dim(1)));
  if (weight.dim(3) != k) throw ContractError("conv2d: kernel must be square, got " + shape_str(weight.shape()));
  if (bias.dim(0) != oc) throw ContractError("conv2d: bias length " + dims(bias.dim(0), oc));
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (h + 2 * pad < k) throw ContractError("conv2d: height " + std::to_string(h) + " too small for kernel");
  if (w + 2 * pad < k) throw ContractError("conv2d: width " + std::to_string(w) + " too small for kernel");
  const std::size_t oh = (h + 2 * pad - k) / stride + 1;
  const std::size_t ow = (w + 2 * pad - k) / stride + 1;
  const std::size_t rows = c * k * k, cols = oh * ow;

  // Column buffers are kept for the weight gradient.
  std::shared_ptr<T[]> col(std::make_unique_for_overwrite<T[]>(n * rows * cols));
  std::vector<T> out(n * oc * cols);
  ConstMapMat<T> wmat(weight.values().data(), oc, rows);
  for (std::size_t ni = 0; ni < n; ++ni) {
    T* cbuf = col.get() + ni * rows * cols;
    im2col(input.values().data() + ni * c * h * w, c, h, w, k, stride, pad, oh, ow, cbuf);
    MapMat<T> omat(out.data() + ni * oc * cols, oc, cols);
    omat.noalias() = wmat * ConstMapMat<T>(cbuf, rows, cols);
    for (std::size_t o = 0; o < oc; ++o) omat.row(o).array() += bias[o];
  }

  return Tensor<T>::from_op(
      "conv2d", Shape{n, oc, oh, ow}, std::move(out), {input, weight, bias},
      [=](TensorNode<T>& self) {
        auto& pin = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        ConstMapMat<T> wm(pw.value.data(), oc, rows);
        auto gcol = std::make_unique_for_overwrite<T[]>(pin.requires_grad ? rows * cols : 0);
        for (std::size_t ni = 0; ni < n; ++ni) {
          ConstMapMat<T> g(self.grad.data() + ni * oc * cols, oc, cols);
          if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            // Plain loop: Eigen's vectorized sum order depends on pointer alignment.
            const T* gp = self.grad.data() + ni * oc * cols;
            for (std::size_t o = 0; o < oc; ++o) {
              T acc = 0;
              for (std::size_t q = 0; q < cols; ++q) acc += gp[o * cols + q];
              gb[o] += acc;
            }
          }
          if (pw.requires_grad) {
            MapMat<T> gw(pw.ensure_grad().data(), oc, rows);
            gw.noalias() += g * ConstMapMat<T>(col.get() + ni * rows * cols, rows, cols).transpose();
          }
          if (pin.requires_grad) {
            MapMat<T> gc(gcol.get(), rows, cols);
            gc.noalias() = wm.transpose() * g;
            col2im(gcol.get(), c, h, w, k, stride, pad, oh, ow, pin.ensure_grad().data() + ni * c * h * w);
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return Tensor<T>::from_op("relu", x.shape(), std::move(out), {x}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.value[i] > T(0)) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear input", x.shape(), 2);
  require_rank("linear weight", weight.shape(), 2);
  require_rank("linear bias", bias.shape(), 1);
  const std::size_t n = x.dim(0), d = x.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d) throw ContractError("linear: inner dimension " + dims(d, weight.dim(0)));
  if (bias.dim(0) != m) throw ContractError("linear: bias length " + dims(bias.dim(0), m));
  std::vector<T> out(n * m);
  const T* xv = x.values().data();
  const T* wv = weight.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * m;
    std::copy(bias.values().begin(), bias.values().end(), row);
    for (std::size_t j = 0; j < d; ++j) {
      const T a = xv[i * d + j];
      const T* wrow = wv + j * m;
      for (std::size_t q = 0; q < m; ++q) row[q] += a * wrow[q];
    }
  }
  return Tensor<T>::from_op("linear", Shape{n, m}, std::move(out), {x, weight, bias},
                            [=](TensorNode<T>& self) {
                              auto& px = *self.parents[0];
                              auto& pw = *self.parents[1];
                              auto& pb = *self.parents[2];
                              const T* g = self.grad.data();
                              if (pb.requires_grad) {
                                auto& gb = pb.ensure_grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t q = 0; q < m; ++q) gb[q] += g[i * m + q];
                              }
                              if (pw.requires_grad) {
                                auto& gw = pw.ensure_grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < d; ++j) {
                                    const T a = px.value[i * d + j];
                                    T* grow = gw.data() + j * m;
                                    for (std::size_t q = 0; q < m; ++q) grow[q] += a * g[i * m + q];
                                  }
                              }
                              if (px.requires_grad) {
                                auto& gx = px.ensure_grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < d; ++j) {
                                    const T* wrow = pw.value.data() + j * m;
                                    T acc = 0;
                                    for (std::size_t q = 0; q < m; ++q) acc += wrow[q] * g[i * m + q];
                                    gx[i * d + j] += acc;
                                  }
                              }
                            });
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ContractError("concat_channels: no parts");
  for (const auto& p : parts) require_rank("concat_channels", p.shape(), 4);
  const std::size_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  std::size_t total = 0;
  std::vector<std::size_t> channels;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p.dim(0) != n) throw ContractError("concat_channels: batch " + dims(p.dim(0), n) + " at part " + std::to_string(i));
    if (p.dim(2) != h) throw ContractError("concat_channels: height " + dims(p.dim(2), h) + " at part " + std::to_string(i));
    if (p.dim(3) != w) throw ContractError("concat_channels: width " + dims(p.dim(3), w) + " at part " + std::to_string(i));
    channels.push_back(p.dim(1));
    total += p.dim(1);
  }
  const std::size_t plane = h * w;
  std::vector<T> out(n * total * plane);
  for (std::size_t ni = 0; ni < n; ++ni) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::size_t block = channels[i] * plane;
      const T* src = parts[i].values().data() + ni * block;
      std::copy(src, src + block, out.data() + (ni * total + offset) * plane);
      offset += channels[i];
    }
  }
  return Tensor<T>::from_op(
      "concat_channels", Shape{n, total, h, w}, std::move(out),
      std::vector<Tensor<T>>(parts.begin(), parts.end()), [=](TensorNode<T>& self) {
        for (std::size_t ni = 0; ni < n; ++ni) {
          std::size_t offset = 0;
          for (std::size_t i = 0; i < self.parents.size(); ++i) {
            auto& p = *self.parents[i];
            const std::size_t block = channels[i] * plane;
            if (p.requires_grad) {
              auto& g = p.ensure_grad();
              const T* src = self.grad.data() + (ni * total + offset) * plane;
              T* dst = g.data() + ni * block;
              for (std::size_t q = 0; q < block; ++q) dst[q] += src[q];
            }
            offset += channels[i];
          }
        }
      });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank("slice_channels", x.shape(), 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (begin >= end || end > c) {
    throw ContractError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") invalid for " + std::to_string(c) + " channels");
  }
  const std::size_t width = end - begin;
  std::vector<T> out(n * width * plane);
  for (std::size_t ni = 0; ni < n; ++ni) {
    const T* src = x.values().data() + (ni * c + begin) * plane;
    std::copy(src, src + width * plane, out.data() + ni * width * plane);
  }
  return Tensor<T>::from_op("slice_channels", Shape{n, width, x.dim(2), x.dim(3)}, std::move(out), {x},
                            [=](TensorNode<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t ni = 0; ni < n; ++ni) {
                                T* dst = g.data() + (ni * c + begin) * plane;
                                const T* src = self.grad.data() + ni * width * plane;
                                for (std::size_t q = 0; q < width * plane; ++q) dst[q] += src[q];
                              }
                            });
}

template <typename T>
Tensor<T> slice_columns(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank("slice_columns", x.shape(), 2);
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (begin >= end || end > m) {
    throw ContractError("slice_columns: range [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") invalid for " + std::to_string(m) + " columns");
  }
  const std::size_t width = end - begin;
  std::vector<T> out(n * width);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) out[i * width + j] = x[i * m + begin + j];
  return Tensor<T>::from_op("slice_columns", Shape{n, width}, std::move(out), {x},
                            [=](TensorNode<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < width; ++j)
                                  g[i * m + begin + j] += self.grad[i * width + j];
                            });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 2) throw ContractError("flatten: need at least rank 2, got " + shape_str(x.shape()));
  return x.reshape(Shape{x.dim(0), x.numel() / x.dim(0)});
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ContractError("add: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor<T>::from_op("add", a.shape(), std::move(out), {a, b}, [](TensorNode<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ContractError("mul: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor<T>::from_op("mul", a.shape(), std::move(out), {a, b}, [](TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= factor;
  return Tensor<T>::from_op("scale", x.shape(), std::move(out), {x}, [factor](TensorNode<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.values()) total += v;
  return Tensor<T>::from_op("sum", Shape{}, std::vector<T>{total}, {x}, [](TensorNode<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  require_rank("softmax_cross_entropy", logits.shape(), 2);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (targets.size() != n) throw ContractError("softmax_cross_entropy: targets " + dims(targets.size(), n));
  std::vector<T> probs(n * c);
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= c) {
      throw ContractError("softmax_cross_entropy: target " + std::to_string(targets[i]) + " out of range for " +
                          std::to_string(c) + " classes");
    }
    const T* row = logits.values().data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const T log_z = std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - mx - log_z);
    loss += log_z - (row[targets[i]] - mx);
  }
  loss /= static_cast<T>(n);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return Tensor<T>::from_op("softmax_cross_entropy", Shape{}, std::vector<T>{loss}, {logits},
                            [=, probs = std::move(probs), tgt = std::move(tgt)](TensorNode<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              const T s = self.grad[0] / static_cast<T>(n);
                              for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < c; ++j)
                                  g[i * c + j] += s * (probs[i * c + j] - (j == tgt[i] ? T(1) : T(0)));
                            });
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const T mx = *std::max_element(out.begin(), out.end());
  T z = 0;
  for (auto& v : out) z += (v = std::exp(v - mx));
  for (auto& v : out) v /= z;
  return out;
}

#define ZN_INSTANTIATE_OPS(T)                                                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> relu(const Tensor<T>&);                                                             \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                                        \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);                         \
  template Tensor<T> slice_columns(const Tensor<T>&, std::size_t, std::size_t);                          \
  template Tensor<T> flatten(const Tensor<T>&);                                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                              \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::size_t>);              \
  template std::vector<T> softmax(std::span<const T>);

ZN_INSTANTIATE_OPS(float)
ZN_INSTANTIATE_OPS(double)

}  // namespace zoomnet
