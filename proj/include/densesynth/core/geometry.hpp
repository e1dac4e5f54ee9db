#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <span>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth {

inline constexpr int kTargetHeight = 1332;
inline constexpr int kTargetWidth = 800;
inline constexpr double kForegroundFraction = 0.02;

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  bool operator==(const Rect&) const = default;
};

/// Affine map source -> target: p' = (p - crop_offset) * scale + pad.
/// Padding sits right/bottom by default, so pad_left/pad_top are usually 0.
struct GeometryTransform {
  int crop_x = 0;
  int crop_y = 0;
  double scale = 1.0;
  int pad_left = 0;
  int pad_top = 0;
  int target_height = kTargetHeight;
  int target_width = kTargetWidth;

  [[nodiscard]] MassBox apply(const MassBox& b) const {
    return {(b.x - crop_x) * scale + pad_left, (b.y - crop_y) * scale + pad_top, b.w * scale,
            b.h * scale};
  }
  [[nodiscard]] MassBox invert(const MassBox& b) const {
    return {(b.x - pad_left) / scale + crop_x, (b.y - pad_top) / scale + crop_y, b.w / scale,
            b.h / scale};
  }
};

struct CropResult {
  Image image;
  Rect region;
  GeometryTransform transform;
};

/// Bounding rectangle of the largest 4-connected component with intensity
/// above 2% of the image maximum.
inline Rect breast_region(const Image& image) {
  if (image.empty()) throw InvalidInput("crop_to_breast: empty image");
  const float peak = image.max_value();
  if (!(peak > 0.0f)) throw InvalidInput("no breast region");
  const float threshold = static_cast<float>(kForegroundFraction) * peak;
  const int h = image.height, w = image.width;
  std::vector<int> label(image.size(), -1);
  Rect best{};
  std::size_t best_count = 0;
  int next_label = 0;
  std::queue<int> frontier;
  for (int start = 0; start < h * w; ++start) {
    if (label[start] >= 0 || !(image.pixels[start] > threshold)) continue;
    const int id = next_label++;
    label[start] = id;
    frontier.push(start);
    std::size_t count = 0;
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop();
      ++count;
      const int r = p / w, c = p % w;
      x0 = std::min(x0, c);
      x1 = std::max(x1, c);
      y0 = std::min(y0, r);
      y1 = std::max(y1, r);
      const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (label[q] < 0 && image.pixels[q] > threshold) {
          label[q] = id;
          frontier.push(q);
        }
      }
    }
    if (count > best_count) {
      best_count = count;
      best = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    }
  }
  return best;
}

inline Image crop(const Image& image, const Rect& r) {
  Image out(r.h, r.w);
  out.bit_depth = image.bit_depth;
  for (int row = 0; row < r.h; ++row) {
    std::copy_n(image.pixels.begin() + static_cast<std::ptrdiff_t>(row + r.y) * image.width + r.x,
                r.w, out.pixels.begin() + static_cast<std::ptrdiff_t>(row) * r.w);
  }
  return out;
}

inline CropResult crop_to_breast(const Image& image) {
  const Rect region = breast_region(image);
  CropResult result;
  result.region = region;
  result.image = crop(image, region);
  result.transform.crop_x = region.x;
  result.transform.crop_y = region.y;
  result.transform.scale = 1.0;
  result.transform.target_height = region.h;
  result.transform.target_width = region.w;
  return result;
}

struct ResizeResult {
  Image image;
  std::vector<MassBox> boxes;
  GeometryTransform transform;
  int content_height = 0;
  int content_width = 0;
};

/// Scales by min(target_h / h, target_w / w) and zero-pads on the right/bottom
/// so the output is exactly target_h x target_w. `prior` (normally the crop
/// transform) is folded into the returned transform so boxes expressed in the
/// original frame map straight to the output frame.
inline ResizeResult resize_keep_aspect(const Image& image, std::span<const MassBox> boxes,
                                       int target_h = kTargetHeight, int target_w = kTargetWidth,
                                       const GeometryTransform* prior = nullptr) {
  if (image.empty()) throw InvalidInput("resize_keep_aspect: empty image");
  if (target_h <= 0 || target_w <= 0) throw InvalidInput("resize target dims must be positive");
  const double scale = std::min(static_cast<double>(target_h) / image.height,
                                static_cast<double>(target_w) / image.width);
  const int ch = std::clamp(static_cast<int>(std::lround(image.height * scale)), 1, target_h);
  const int cw = std::clamp(static_cast<int>(std::lround(image.width * scale)), 1, target_w);
  Image content = resample(image, ch, cw);
  ResizeResult out;
  out.image = Image(target_h, target_w, 0.0f);
  out.image.bit_depth = image.bit_depth;
  for (int r = 0; r < ch; ++r) {
    std::copy_n(content.pixels.begin() + static_cast<std::ptrdiff_t>(r) * cw, cw,
                out.image.pixels.begin() + static_cast<std::ptrdiff_t>(r) * target_w);
  }
  out.content_height = ch;
  out.content_width = cw;
  out.transform.scale = scale;
  out.transform.target_height = target_h;
  out.transform.target_width = target_w;
  if (prior) {
    out.transform.crop_x = prior->crop_x;
    out.transform.crop_y = prior->crop_y;
    out.transform.scale = prior->scale * scale;
  }
  out.boxes.reserve(boxes.size());
  for (const auto& b : boxes) {
    MassBox t = out.transform.apply(b);
    // Clamp float spill at the content edge into the frame.
    t.w = std::min(t.w, target_w - t.x);
    t.h = std::min(t.h, target_h - t.y);
    out.boxes.push_back(t);
  }
  return out;
}

}  // namespace densesynth
