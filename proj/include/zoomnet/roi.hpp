#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "zoomnet/tensor.hpp"

namespace zoomnet {

/// Axis-aligned box in normalized image coordinates.
struct RoiBox {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  /// x0 < x1, y0 < y1, everything inside [0,1].
  bool valid() const;
  /// This box expressed in the coordinate frame of `frame` (frame maps to [0,1]^2).
  RoiBox relative_to(const RoiBox& frame) const;

  friend bool operator==(const RoiBox&, const RoiBox&) = default;
  friend auto operator<=>(const RoiBox&, const RoiBox&) = default;
};

std::string to_string(const RoiBox& b);

RoiBox union_box(const RoiBox& a, const RoiBox& b);

/// Subject, union (predicate) and object regions of one candidate pair.
struct RoiTriple {
  RoiBox subject;
  RoiBox predicate;
  RoiBox object;

  static RoiTriple from_pair(const RoiBox& subject, const RoiBox& object) {
    return {subject, union_box(subject, object), object};
  }
  RoiBox subject_in_predicate() const { return subject.relative_to(predicate); }
  RoiBox object_in_predicate() const { return object.relative_to(predicate); }
};

/// Half-open cell rectangle [y0,y1) x [x0,x1) on an H x W grid.
struct GridRect {
  std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  bool degenerate = false;

  std::size_t height() const { return y1 - y0; }
  std::size_t width() const { return x1 - x0; }
};

/// Scales the box by (W, H) and rounds half away from zero. A box that
/// collapses to zero cells on an axis is widened to one cell and flagged.
GridRect map_to_grid(const RoiBox& box, std::size_t grid_h, std::size_t grid_w);

/// [start, end) of bin `i` when `span` cells are split into `bins` bins.
/// Boundaries are floor(i*span/bins); empty bins (span < bins) take one cell.
std::pair<std::size_t, std::size_t> pool_bin(std::size_t i, std::size_t span, std::size_t bins);

/// Backward-pass context of roi_pool / deroi_pool. For roi_pool, `source[i]`
/// is the flat input index holding the max of output element i. For
/// deroi_pool it is the within-plane offset of the local cell read by palette
/// cell i (one entry per palette cell), or kOutside beyond the rectangle.
struct PoolRecord {
  static constexpr std::size_t kOutside = static_cast<std::size_t>(-1);
  GridRect rect;
  std::vector<std::size_t> source;
};

/// Process-wide count of degenerate ROI mappings seen by the pooling ops.
std::size_t degenerate_roi_count();
void reset_degenerate_roi_count();

/// Max-pools the box region of an N×C×H×W feature map onto out_h×out_w bins.
/// Ties resolve to the lowest linear index.
template <typename T>
Tensor<T> roi_pool(const Tensor<T>& feature, const RoiBox& roi, std::size_t out_h, std::size_t out_w,
                   PoolRecord* record = nullptr);

/// Places an N×C×h×w local feature into the `roi_rel` rectangle of a zero
/// palette of palette_h×palette_w by nearest-neighbour resampling.
template <typename T>
Tensor<T> deroi_pool(const Tensor<T>& local, const RoiBox& roi_rel, std::size_t palette_h,
                     std::size_t palette_w, PoolRecord* record = nullptr);

/// [f_p, deroi(f_s), deroi(f_o)] stacked on channels; f_p defines the palette.
template <typename T>
Tensor<T> contrastive_fuse(const Tensor<T>& f_s, const Tensor<T>& f_o, const Tensor<T>& f_p,
                           const RoiTriple& rois);

/// The three pairwise stacks of the literal three-cell layout.
template <typename T>
struct ContrastivePairs {
  Tensor<T> subject_predicate;  // [deroi(f_s), f_p]
  Tensor<T> subject_object;     // [deroi(f_s), deroi(f_o)]
  Tensor<T> predicate_object;   // [f_p, deroi(f_o)]
};

template <typename T>
ContrastivePairs<T> contrastive_pairs(const Tensor<T>& f_s, const Tensor<T>& f_o, const Tensor<T>& f_p,
                                      const RoiTriple& rois);

/// [f_local, roi_pool(f_p, roi_rel)] with the pooled half sized like f_local.
template <typename T>
Tensor<T> pyramid_fuse(const Tensor<T>& f_local, const Tensor<T>& f_p, const RoiBox& roi_rel);

}  // namespace zoomnet
