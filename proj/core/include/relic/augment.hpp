#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relic/rng.hpp"

namespace relic {

// Row-major, channel-interleaved pixels in [0, 1].
struct Image {
  std::size_t h = 0, w = 0, c = 0;
  std::vector<double> px;

  static Image zeros(std::size_t h, std::size_t w, std::size_t c);
  double& at(std::size_t y, std::size_t x, std::size_t ch) { return px[(y * w + x) * c + ch]; }
  double at(std::size_t y, std::size_t x, std::size_t ch) const { return px[(y * w + x) * c + ch]; }
  std::size_t numel() const { return px.size(); }
};

// Binary foreground map aligned with an image.
struct SaliencyMask {
  std::size_t h = 0, w = 0;
  std::vector<uint8_t> fg;  // 0 background, 1 foreground

  uint8_t at(std::size_t y, std::size_t x) const { return fg[y * w + x]; }
  double foreground_fraction() const;
};

// How solarization treats a pixel v against the 0.5 threshold:
//   paper_text: v < 0.5 -> 0, v >= 0.5 -> 1 (pure binarization)
//   standard:   v >= 0.5 -> 1 - v (the usual photographic inversion)
enum class SolarizeMode { paper_text, standard };

// Optional transforms applied to a saliency mask before use; the rectangle
// variants support mask-robustness studies.
enum class MaskTransform {
  none,
  random_pixels,       // scatter of random pixels covering `area` of the image
  random_rectangle,    // one random rectangle covering `area` of the image
  centered_rectangle,  // image-centered rectangle covering `area` of the image
  add_rectangle,       // union with a rectangle covering `area` of the mask
  remove_rectangle,    // subtract a rectangle covering `area` of the mask
  bounding_box,        // replace mask with its bounding box
};

// Photometric settings for one view parity.
struct PhotometricParams {
  double p_flip = 0.5;
  double p_jitter = 0.8;
  double jitter_brightness = 0.4;  // additive, factor in [-b, b]
  double jitter_contrast = 0.4;    // scale in [1-c, 1+c] around mean luminance
  double jitter_saturation = 0.2;  // scale in [1-s, 1+s] around per-pixel gray
  double jitter_hue = 0.1;         // hue rotation by 360 * h * u degrees, u in [-1, 1]
  double p_gray = 0.2;
  double p_blur = 1.0;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double p_solarize = 0.0;
  double crop_area_min = 0.08;  // large-crop area range for this parity
  double crop_area_max = 1.0;

  bool operator==(const PhotometricParams&) const = default;
};

PhotometricParams odd_view_defaults();   // views 1, 3, ...: blur 10%, solarize 20%, area >= 14%
PhotometricParams even_view_defaults();  // views 2, 4, ...: blur 100%, solarize 0%, area >= 8%

struct AugmentationConfig {
  std::size_t num_large = 4;
  std::size_t num_small = 2;
  std::size_t large_size = 32;
  std::size_t small_size = 16;
  PhotometricParams odd = odd_view_defaults();
  PhotometricParams even = even_view_defaults();
  double small_area_min = 0.05;
  double small_area_max = 0.14;
  double p_mask = 0.1;
  double min_foreground = 0.05;  // below this the mask is ignored
  SolarizeMode solarize_mode = SolarizeMode::paper_text;
  MaskTransform mask_transform = MaskTransform::none;
  double mask_transform_area = 0.1;
  // When false the geometric stage (crop + flip) is skipped entirely; used for
  // 1-d synthetic rows where cropping is meaningless.
  bool geometric = true;

  bool operator==(const AugmentationConfig&) const = default;
};

// Individual pipeline stages.
Image random_resized_crop(const Image& src, std::size_t out_size, double area_min,
                          double area_max, std::mt19937_64& g);
Image horizontal_flip(const Image& src);
Image color_jitter(const Image& src, const PhotometricParams& p, std::mt19937_64& g);
Image to_grayscale(const Image& src);  // 3-channel only; replicated luminance
Image gaussian_blur(const Image& src, double sigma);
Image solarize(const Image& src, SolarizeMode mode);
// Background pixels replaced with the given gray level; returns src unchanged
// when the mask's foreground fraction is below min_foreground.
Image apply_saliency_mask(const Image& src, const SaliencyMask& mask, double gray_level,
                          double min_foreground = 0.05);
// Full-image bicubic resample to a new geometry. The training harness uses
// this to re-render small crops at the encoder's input size, since an MLP
// encoder has a fixed input width (a convnet would be size-agnostic).
Image resize_image(const Image& src, std::size_t out_h, std::size_t out_w);
// Otsu threshold on deviation from the border-ring mean color, then largest
// 4-connected component.
SaliencyMask heuristic_saliency(const Image& img);
SaliencyMask transform_mask(const SaliencyMask& mask, MaskTransform kind, double area,
                            std::mt19937_64& g);

struct ViewFlags {
  bool odd_parity = false;
  bool masked = false;
  bool flipped = false;
  bool jittered = false;
  bool grayscaled = false;
  bool blurred = false;
  bool solarized = false;
  uint64_t stream = 0;
};

struct View {
  Image image;
  ViewFlags flags;
};

struct ImageViews {
  std::vector<View> large;
  std::vector<View> small;
};

using ViewBatch = std::vector<ImageViews>;

// Multi-crop view generation for one image. Draw order per image stream:
// background gray level; mask-transform draws when a transform is configured;
// then per large view: mask coin, crop geometry, flip coin, jitter coin
// (+ order shuffle and factors when it fires), gray coin, blur coin (+ sigma
// when it fires), solarize coin; then per small view the same minus the mask
// coin. Views alternate parity starting odd; small crops
// always use the small-crop area range and are always cut from the unmasked
// image. Probability coins are drawn even when p = 0 or 1 so that changing a
// probability never desynchronizes the rest of the stream.
//
// `mask` may be nullptr: with p_mask > 0 the heuristic fallback is computed
// (and a one-time warning logged); with p_mask == 0 it is ignored.
ImageViews generate_views(const Image& img, const SaliencyMask* mask,
                          const AugmentationConfig& cfg, uint64_t image_stream);

std::vector<double> flatten(const Image& img);

// Mask container: "SMSK", count u32, h u16, w u16, then per mask a row-major
// bitmap, one bit per pixel, MSB first, each row padded to a whole byte.
void save_masks(const std::string& path, const std::vector<SaliencyMask>& masks);
std::vector<SaliencyMask> load_masks(const std::string& path);

}  // namespace relic
