#include "zoomnet/roi.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "zoomnet/ops.hpp"

namespace zoomnet {

namespace {

std::atomic<std::size_t> g_degenerate{0};

std::pair<std::size_t, std::size_t> map_axis(double lo, double hi, std::size_t extent, bool& degenerate) {
  auto scaled = [extent](double v) {
    const double r = std::round(v * static_cast<double>(extent));
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(extent)));
  };
  std::size_t a = scaled(lo), b = scaled(hi);
  if (b <= a) {
    degenerate = true;
    a = std::min(a, extent - 1);
    b = a + 1;
  }
  return {a, b};
}

void require_nchw(const char* op, const Shape& s) {
  if (s.size() != 4) throw ContractError(std::string(op) + ": expected N×C×H×W, got " + shape_str(s));
}

}  // namespace

bool RoiBox::valid() const {
  return x0 < x1 && y0 < y1 && x0 >= 0 && y0 >= 0 && x1 <= 1 && y1 <= 1;
}

RoiBox RoiBox::relative_to(const RoiBox& frame) const {
  auto rel = [](double v, double lo, double len) { return std::clamp((v - lo) / len, 0.0, 1.0); };
  return {rel(x0, frame.x0, frame.width()), rel(y0, frame.y0, frame.height()),
          rel(x1, frame.x0, frame.width()), rel(y1, frame.y0, frame.height())};
}

std::string to_string(const RoiBox& b) {
  std::ostringstream os;
  os << '(' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << ')';
  return os.str();
}

RoiBox union_box(const RoiBox& a, const RoiBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

GridRect map_to_grid(const RoiBox& box, std::size_t grid_h, std::size_t grid_w) {
  if (grid_h == 0 || grid_w == 0) throw ContractError("map_to_grid: empty grid");
  GridRect r;
  std::tie(r.y0, r.y1) = map_axis(box.y0, box.y1, grid_h, r.degenerate);
  std::tie(r.x0, r.x1) = map_axis(box.x0, box.x1, grid_w, r.degenerate);
  if (r.degenerate) ++g_degenerate;
  return r;
}

std::pair<std::size_t, std::size_t> pool_bin(std::size_t i, std::size_t span, std::size_t bins) {
  const std::size_t start = i * span / bins;
  std::size_t end = (i + 1) * span / bins;
  if (end <= start) end = start + 1;
  return {start, end};
}

std::size_t degenerate_roi_count() { return g_degenerate.load(); }
void reset_degenerate_roi_count() { g_degenerate.store(0); }

template <typename T>
Tensor<T> roi_pool(const Tensor<T>& feature, const RoiBox& roi, std::size_t out_h, std::size_t out_w,
                   PoolRecord* record) {
  require_nchw("roi_pool", feature.shape());
  if (out_h == 0 || out_w == 0) throw ContractError("roi_pool: output size must be positive");
  const std::size_t n = feature.dim(0), c = feature.dim(1), h = feature.dim(2), w = feature.dim(3);
  const GridRect rect = map_to_grid(roi, h, w);

  std::vector<T> out(n * c * out_h * out_w);
  std::vector<std::size_t> argmax(out.size());
  const T* in = feature.values().data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto [ry0, ry1] = pool_bin(i, rect.height(), out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto [rx0, rx1] = pool_bin(j, rect.width(), out_w);
        std::size_t best = base + (rect.y0 + ry0) * w + rect.x0 + rx0;
        for (std::size_t y = rect.y0 + ry0; y < rect.y0 + ry1; ++y) {
          for (std::size_t x = rect.x0 + rx0; x < rect.x0 + rx1; ++x) {
            const std::size_t idx = base + y * w + x;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (plane * out_h + i) * out_w + j;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  if (record) {
    record->rect = rect;
    record->source = argmax;
  }
  return Tensor<T>::from_op("roi_pool", Shape{n, c, out_h, out_w}, std::move(out), {feature},
                            [argmax = std::move(argmax)](TensorNode<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
                            });
}

template <typename T>
Tensor<T> deroi_pool(const Tensor<T>& local, const RoiBox& roi_rel, std::size_t palette_h,
                     std::size_t palette_w, PoolRecord* record) {
  require_nchw("deroi_pool", local.shape());
  if (palette_h == 0 || palette_w == 0) throw ContractError("deroi_pool: palette size must be positive");
  const std::size_t n = local.dim(0), c = local.dim(1), h = local.dim(2), w = local.dim(3);
  const GridRect rect = map_to_grid(roi_rel, palette_h, palette_w);
  const std::size_t rh = rect.height(), rw = rect.width();

  // Nearest source cell: floor((k + 0.5) * src / dst), in exact integer form.
  std::vector<std::size_t> source(palette_h * palette_w, PoolRecord::kOutside);
  for (std::size_t y = rect.y0; y < rect.y1; ++y) {
    const std::size_t sy = std::min(h - 1, ((2 * (y - rect.y0) + 1) * h) / (2 * rh));
    for (std::size_t x = rect.x0; x < rect.x1; ++x) {
      const std::size_t sx = std::min(w - 1, ((2 * (x - rect.x0) + 1) * w) / (2 * rw));
      source[y * palette_w + x] = sy * w + sx;
    }
  }

  const std::size_t plane_out = palette_h * palette_w, plane_in = h * w;
  std::vector<T> out(n * c * plane_out, T(0));
  const T* in = local.values().data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t q = 0; q < plane_out; ++q) {
      if (source[q] != PoolRecord::kOutside) out[p * plane_out + q] = in[p * plane_in + source[q]];
    }
  }
  if (record) {
    record->rect = rect;
    record->source = source;
  }
  return Tensor<T>::from_op("deroi_pool", Shape{n, c, palette_h, palette_w}, std::move(out), {local},
                            [=, source = std::move(source)](TensorNode<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t p = 0; p < n * c; ++p)
                                for (std::size_t q = 0; q < plane_out; ++q)
                                  if (source[q] != PoolRecord::kOutside)
                                    g[p * plane_in + source[q]] += self.grad[p * plane_out + q];
                            });
}

namespace {

template <typename T>
void require_branch_match(const Tensor<T>& f_s, const Tensor<T>& f_o, const Tensor<T>& f_p) {
  require_nchw("contrastive_fuse subject", f_s.shape());
  require_nchw("contrastive_fuse object", f_o.shape());
  require_nchw("contrastive_fuse predicate", f_p.shape());
  if (f_s.dim(1) != f_p.dim(1) || f_o.dim(1) != f_p.dim(1)) {
    throw ContractError("contrastive_fuse: channel mismatch subject " + std::to_string(f_s.dim(1)) +
                        ", predicate " + std::to_string(f_p.dim(1)) + ", object " + std::to_string(f_o.dim(1)));
  }
}

}  // namespace

template <typename T>
Tensor<T> contrastive_fuse(const Tensor<T>& f_s, const Tensor<T>& f_o, const Tensor<T>& f_p,
                           const RoiTriple& rois) {
  require_branch_match(f_s, f_o, f_p);
  const std::size_t ph = f_p.dim(2), pw = f_p.dim(3);
  auto s_hat = deroi_pool(f_s, rois.subject_in_predicate(), ph, pw);
  auto o_hat = deroi_pool(f_o, rois.object_in_predicate(), ph, pw);
  return concat_channels({f_p, s_hat, o_hat});
}

template <typename T>
ContrastivePairs<T> contrastive_pairs(const Tensor<T>& f_s, const Tensor<T>& f_o, const Tensor<T>& f_p,
                                      const RoiTriple& rois) {
  require_branch_match(f_s, f_o, f_p);
  const std::size_t ph = f_p.dim(2), pw = f_p.dim(3);
  auto s_hat = deroi_pool(f_s, rois.subject_in_predicate(), ph, pw);
  auto o_hat = deroi_pool(f_o, rois.object_in_predicate(), ph, pw);
  return {concat_channels({s_hat, f_p}), concat_channels({s_hat, o_hat}), concat_channels({f_p, o_hat})};
}

template <typename T>
Tensor<T> pyramid_fuse(const Tensor<T>& f_local, const Tensor<T>& f_p, const RoiBox& roi_rel) {
  require_nchw("pyramid_fuse local", f_local.shape());
  require_nchw("pyramid_fuse predicate", f_p.shape());
  if (f_local.dim(1) != f_p.dim(1)) {
    throw ContractError("pyramid_fuse: channel mismatch " + std::to_string(f_local.dim(1)) + " vs " +
                        std::to_string(f_p.dim(1)));
  }
  auto pooled = roi_pool(f_p, roi_rel, f_local.dim(2), f_local.dim(3));
  return concat_channels({f_local, pooled});
}

#define ZN_INSTANTIATE_ROI(T)                                                                              \
  template Tensor<T> roi_pool(const Tensor<T>&, const RoiBox&, std::size_t, std::size_t, PoolRecord*);    \
  template Tensor<T> deroi_pool(const Tensor<T>&, const RoiBox&, std::size_t, std::size_t, PoolRecord*);  \
  template Tensor<T> contrastive_fuse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const RoiTriple&); \
  template ContrastivePairs<T> contrastive_pairs(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                                 const RoiTriple&);                                         \
  template Tensor<T> pyramid_fuse(const Tensor<T>&, const Tensor<T>&, const RoiBox&);

ZN_INSTANTIATE_ROI(float)
ZN_INSTANTIATE_ROI(double)

}  // namespace zoomnet
