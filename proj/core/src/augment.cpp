#include "relic/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <queue>

#include "relic/errors.hpp"

namespace relic {

namespace {

constexpr double kGrayR = 0.2989, kGrayG = 0.5870, kGrayB = 0.1140;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double luminance(const Image& img, std::size_t y, std::size_t x) {
  if (img.c == 1) return img.at(y, x, 0);
  return kGrayR * img.at(y, x, 0) + kGrayG * img.at(y, x, 1) + kGrayB * img.at(y, x, 2);
}

}  // namespace

Image Image::zeros(std::size_t h, std::size_t w, std::size_t c) {
  Image img;
  img.h = h;
  img.w = w;
  img.c = c;
  img.px.assign(h * w * c, 0.0);
  return img;
}

double SaliencyMask::foreground_fraction() const {
  if (fg.empty()) return 0.0;
  std::size_t n = 0;
  for (auto v : fg) n += v != 0;
  return static_cast<double>(n) / static_cast<double>(fg.size());
}

PhotometricParams odd_view_defaults() {
  PhotometricParams p;
  p.p_blur = 0.1;
  p.p_solarize = 0.2;
  p.crop_area_min = 0.14;
  p.crop_area_max = 1.0;
  return p;
}

PhotometricParams even_view_defaults() {
  PhotometricParams p;
  p.p_blur = 1.0;
  p.p_solarize = 0.0;
  p.crop_area_min = 0.08;
  p.crop_area_max = 1.0;
  return p;
}

namespace {

// Catmull-Rom weights for fractional offset t, taps at -1..2.
void bicubic_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = (-t3 + 2.0 * t2 - t) / 2.0;
  w[1] = (3.0 * t3 - 5.0 * t2 + 2.0) / 2.0;
  w[2] = (-3.0 * t3 + 4.0 * t2 + t) / 2.0;
  w[3] = (t3 - t2) / 2.0;
}

// Bicubic resample of a crop rectangle to out_h x out_w, edge-clamped inside
// the rectangle, half-pixel centers, output clamped to [0, 1].
Image resize_bicubic(const Image& src, std::size_t x0, std::size_t y0, std::size_t cw,
                     std::size_t ch, std::size_t out_h, std::size_t out_w) {
  Image out = Image::zeros(out_h, out_w, src.c);
  const double sx_scale = static_cast<double>(cw) / static_cast<double>(out_w);
  const double sy_scale = static_cast<double>(ch) / static_cast<double>(out_h);
  auto clampi = [](long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (std::size_t yo = 0; yo < out_h; ++yo) {
    const double sy = (yo + 0.5) * sy_scale - 0.5;
    const long iy = static_cast<long>(std::floor(sy));
    double wy[4];
    bicubic_weights(sy - iy, wy);
    for (std::size_t xo = 0; xo < out_w; ++xo) {
      const double sx = (xo + 0.5) * sx_scale - 0.5;
      const long ix = static_cast<long>(std::floor(sx));
      double wx[4];
      bicubic_weights(sx - ix, wx);
      for (std::size_t ch_i = 0; ch_i < src.c; ++ch_i) {
        double acc = 0.0;
        for (int dy = -1; dy <= 2; ++dy) {
          const long yy = y0 + clampi(iy + dy, 0, static_cast<long>(ch) - 1);
          double row = 0.0;
          for (int dx = -1; dx <= 2; ++dx) {
            const long xx = x0 + clampi(ix + dx, 0, static_cast<long>(cw) - 1);
            row += wx[dx + 1] * src.at(yy, xx, ch_i);
          }
          acc += wy[dy + 1] * row;
        }
        out.at(yo, xo, ch_i) = clamp01(acc);
      }
    }
  }
  return out;
}

}  // namespace

Image random_resized_crop(const Image& src, std::size_t out_size, double area_min,
                          double area_max, std::mt19937_64& g) {
  if (src.h == 0 || src.w == 0) throw ContractError("random_resized_crop: empty image");
  if (!(area_min > 0.0 && area_min <= area_max && area_max <= 1.0))
    throw ConfigError("random_resized_crop: area range must satisfy 0 < min <= max <= 1");
  const double src_area = static_cast<double>(src.h * src.w);
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target_area = runif(g, area_min, area_max) * src_area;
    const double aspect = std::exp(runif(g, log_lo, log_hi));
    const auto cw = static_cast<std::size_t>(std::lround(std::sqrt(target_area * aspect)));
    const auto chh = static_cast<std::size_t>(std::lround(std::sqrt(target_area / aspect)));
    if (cw < 1 || chh < 1 || cw > src.w || chh > src.h) continue;
    const std::size_t x0 = rindex(g, 0, src.w - cw);
    const std::size_t y0 = rindex(g, 0, src.h - chh);
    return resize_bicubic(src, x0, y0, cw, chh, out_size, out_size);
  }
  // fallback: center crop of the largest square
  const std::size_t side = std::min(src.h, src.w);
  const std::size_t x0 = (src.w - side) / 2, y0 = (src.h - side) / 2;
  return resize_bicubic(src, x0, y0, side, side, out_size, out_size);
}

Image resize_image(const Image& src, std::size_t out_h, std::size_t out_w) {
  if (src.h == 0 || src.w == 0) throw ContractError("resize_image: empty image");
  if (out_h == 0 || out_w == 0) throw ConfigError("resize_image: output size must be positive");
  return resize_bicubic(src, 0, 0, src.w, src.h, out_h, out_w);
}

Image horizontal_flip(const Image& src) {
  Image out = Image::zeros(src.h, src.w, src.c);
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x)
      for (std::size_t ch = 0; ch < src.c; ++ch) out.at(y, x, ch) = src.at(y, src.w - 1 - x, ch);
  return out;
}

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx <= 0.0 ? 0.0 : d / mx;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod(60.0 * ((g - b) / d) + 360.0, 360.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d) + 120.0;
  } else {
    h = 60.0 * ((r - g) / d) + 240.0;
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) {
    r1 = c; g1 = x;
  } else if (hp < 2) {
    r1 = x; g1 = c;
  } else if (hp < 3) {
    g1 = c; b1 = x;
  } else if (hp < 4) {
    g1 = x; b1 = c;
  } else if (hp < 5) {
    r1 = x; b1 = c;
  } else {
    r1 = c; b1 = x;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

Image color_jitter(const Image& src, const PhotometricParams& p, std::mt19937_64& g) {
  Image img = src;
  // Fisher-Yates order, then one factor draw per adjustment in that order.
  // Saturation and hue are identities on single-channel images but their
  // factors are still drawn, so streams stay aligned across channel counts.
  std::vector<int> order = {0, 1, 2, 3};
  fisher_yates(order, g);
  for (int op : order) {
    switch (op) {
      case 0: {  // brightness: additive shift
        const double delta = runif(g, -p.jitter_brightness, p.jitter_brightness);
        for (auto& v : img.px) v = clamp01(v + delta);
        break;
      }
      case 1: {  // contrast: scale around mean luminance
        const double f = runif(g, std::max(0.0, 1.0 - p.jitter_contrast), 1.0 + p.jitter_contrast);
        double mean = 0.0;
        for (std::size_t y = 0; y < img.h; ++y)
          for (std::size_t x = 0; x < img.w; ++x) mean += luminance(img, y, x);
        mean /= static_cast<double>(img.h * img.w);
        for (auto& v : img.px) v = clamp01((v - mean) * f + mean);
        break;
      }
      case 2: {  // saturation: scale around per-pixel gray
        const double f =
            runif(g, std::max(0.0, 1.0 - p.jitter_saturation), 1.0 + p.jitter_saturation);
        if (img.c == 3) {
          for (std::size_t y = 0; y < img.h; ++y)
            for (std::size_t x = 0; x < img.w; ++x) {
              const double gray = luminance(img, y, x);
              for (std::size_t ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = clamp01((img.at(y, x, ch) - gray) * f + gray);
            }
        }
        break;
      }
      case 3: {  // hue rotation in HSV
        const double u = runif(g, -1.0, 1.0);
        if (img.c == 3) {
          const double shift = 360.0 * p.jitter_hue * u;
          for (std::size_t y = 0; y < img.h; ++y)
            for (std::size_t x = 0; x < img.w; ++x) {
              double h, s, v;
              rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
              h = std::fmod(std::fmod(h + shift, 360.0) + 360.0, 360.0);
              double r, gg, b;
              hsv_to_rgb(h, s, v, r, gg, b);
              img.at(y, x, 0) = clamp01(r);
              img.at(y, x, 1) = clamp01(gg);
              img.at(y, x, 2) = clamp01(b);
            }
        }
        break;
      }
    }
  }
  return img;
}

Image to_grayscale(const Image& src) {
  if (src.c != 3) throw ContractError("to_grayscale: expected a 3-channel image");
  Image out = Image::zeros(src.h, src.w, 3);
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x) {
      const double gray = kGrayR * src.at(y, x, 0) + kGrayG * src.at(y, x, 1) + kGrayB * src.at(y, x, 2);
      for (std::size_t ch = 0; ch < 3; ++ch) out.at(y, x, ch) = gray;
    }
  return out;
}

Image gaussian_blur(const Image& src, double sigma) {
  if (sigma <= 0.0) throw ConfigError("gaussian_blur: sigma must be positive");
  auto kernel_for = [&](std::size_t side) {
    std::size_t k = std::min<std::size_t>(23, side % 2 == 1 ? side : side - 1);
    if (side == 0) k = 1;
    std::vector<double> w(k);
    const long half = static_cast<long>(k / 2);
    double sum = 0.0;
    for (long i = -half; i <= half; ++i) {
      w[i + half] = std::exp(-(static_cast<double>(i * i)) / (2.0 * sigma * sigma));
      sum += w[i + half];
    }
    for (auto& v : w) v /= sum;
    return w;
  };
  auto clampi = [](long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); };

  const auto wx = kernel_for(src.w);
  const long hx = static_cast<long>(wx.size() / 2);
  Image mid = Image::zeros(src.h, src.w, src.c);
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x)
      for (std::size_t ch = 0; ch < src.c; ++ch) {
        double acc = 0.0;
        for (long i = -hx; i <= hx; ++i)
          acc += wx[i + hx] * src.at(y, clampi(static_cast<long>(x) + i, 0, src.w - 1), ch);
        mid.at(y, x, ch) = acc;
      }

  const auto wy = kernel_for(src.h);
  const long hy = static_cast<long>(wy.size() / 2);
  Image out = Image::zeros(src.h, src.w, src.c);
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x)
      for (std::size_t ch = 0; ch < src.c; ++ch) {
        double acc = 0.0;
        for (long i = -hy; i <= hy; ++i)
          acc += wy[i + hy] * mid.at(clampi(static_cast<long>(y) + i, 0, src.h - 1), x, ch);
        out.at(y, x, ch) = clamp01(acc);
      }
  return out;
}

Image solarize(const Image& src, SolarizeMode mode) {
  Image out = src;
  for (auto& v : out.px) {
    if (mode == SolarizeMode::paper_text) {
      v = v < 0.5 ? 0.0 : 1.0;
    } else if (v >= 0.5) {
      v = 1.0 - v;
    }
  }
  return out;
}

Image apply_saliency_mask(const Image& src, const SaliencyMask& mask, double gray_level,
                          double min_foreground) {
  if (mask.h != src.h || mask.w != src.w)
    throw ContractError("apply_saliency_mask: mask size does not match image");
  if (mask.foreground_fraction() < min_foreground) return src;
  Image out = src;
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x)
      if (!mask.at(y, x))
        for (std::size_t ch = 0; ch < src.c; ++ch) out.at(y, x, ch) = gray_level;
  return out;
}

namespace {

// Largest 4-connected foreground component, in place.
void keep_largest_component(SaliencyMask& m) {
  std::vector<int> label(m.h * m.w, -1);
  int next = 0;
  std::size_t best_count = 0;
  int best_label = -1;
  for (std::size_t start = 0; start < m.fg.size(); ++start) {
    if (!m.fg[start] || label[start] >= 0) continue;
    std::size_t count = 0;
    std::queue<std::size_t> q;
    q.push(start);
    label[start] = next;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      ++count;
      const std::size_t y = i / m.w, x = i % m.w;
      const std::size_t nbrs[4][2] = {{y, x > 0 ? x - 1 : x},
                                      {y, x + 1 < m.w ? x + 1 : x},
                                      {y > 0 ? y - 1 : y, x},
                                      {y + 1 < m.h ? y + 1 : y, x}};
      for (auto& nb : nbrs) {
        const std::size_t j = nb[0] * m.w + nb[1];
        if (j != i && m.fg[j] && label[j] < 0) {
          label[j] = next;
          q.push(j);
        }
      }
    }
    if (count > best_count) {
      best_count = count;
      best_label = next;
    }
    ++next;
  }
  for (std::size_t i = 0; i < m.fg.size(); ++i) m.fg[i] = label[i] == best_label && m.fg[i];
}

}  // namespace

SaliencyMask heuristic_saliency(const Image& img) {
  SaliencyMask m;
  m.h = img.h;
  m.w = img.w;
  m.fg.assign(img.h * img.w, 0);
  if (img.h == 0 || img.w == 0) return m;

  const std::size_t ring = std::max<std::size_t>(1, std::min(img.h, img.w) / 16);
  std::vector<double> border_mean(img.c, 0.0);
  std::size_t border_n = 0;
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x) {
      const bool on_ring = y < ring || y >= img.h - ring || x < ring || x >= img.w - ring;
      if (!on_ring) continue;
      ++border_n;
      for (std::size_t ch = 0; ch < img.c; ++ch) border_mean[ch] += img.at(y, x, ch);
    }
  for (auto& v : border_mean) v /= static_cast<double>(border_n);

  std::vector<double> dev(img.h * img.w, 0.0);
  double max_dev = 0.0;
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x) {
      double d = 0.0;
      for (std::size_t ch = 0; ch < img.c; ++ch) d += std::fabs(img.at(y, x, ch) - border_mean[ch]);
      d /= static_cast<double>(img.c);
      dev[y * img.w + x] = d;
      max_dev = std::max(max_dev, d);
    }
  if (max_dev <= 0.0) return m;  // featureless image: empty mask

  // Otsu threshold over a 256-bin histogram of deviations
  constexpr int kBins = 256;
  std::vector<std::size_t> hist(kBins, 0);
  for (double d : dev) {
    int b = static_cast<int>(d / max_dev * (kBins - 1));
    ++hist[b];
  }
  const double total = static_cast<double>(dev.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * static_cast<double>(hist[b]);
  double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
  int best_bin = 0;
  for (int b = 0; b < kBins; ++b) {
    w0 += static_cast<double>(hist[b]);
    if (w0 == 0.0) continue;
    const double w1 = total - w0;
    if (w1 == 0.0) break;
    sum0 += b * static_cast<double>(hist[b]);
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best_bin = b;
    }
  }
  const double thresh = (best_bin + 1.0) / (kBins - 1) * max_dev;
  for (std::size_t i = 0; i < dev.size(); ++i) m.fg[i] = dev[i] > thresh ? 1 : 0;
  keep_largest_component(m);
  return m;
}

namespace {

void paint_rect(SaliencyMask& m, std::size_t x0, std::size_t y0, std::size_t rw, std::size_t rh,
                uint8_t value) {
  for (std::size_t y = y0; y < std::min(m.h, y0 + rh); ++y)
    for (std::size_t x = x0; x < std::min(m.w, x0 + rw); ++x) m.fg[y * m.w + x] = value;
}

// Rectangle dimensions covering `area_px` pixels at a log-uniform aspect.
void rect_dims(double area_px, std::size_t max_w, std::size_t max_h, std::mt19937_64& g,
               std::size_t& rw, std::size_t& rh) {
  const double aspect = std::exp(runif(g, std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
  rw = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(std::sqrt(area_px * aspect))), 1, max_w);
  rh = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(std::sqrt(area_px / aspect))), 1, max_h);
}

}  // namespace

SaliencyMask transform_mask(const SaliencyMask& mask, MaskTransform kind, double area,
                            std::mt19937_64& g) {
  if (kind != MaskTransform::none && !(area >= 0.0 && area <= 1.0))
    throw ConfigError("transform_mask: area fraction must lie in [0, 1]");
  SaliencyMask out = mask;
  const std::size_t image_px = mask.h * mask.w;
  std::size_t fg_px = 0;
  for (auto v : mask.fg) fg_px += v != 0;

  switch (kind) {
    case MaskTransform::none:
      return out;
    case MaskTransform::random_pixels: {
      std::fill(out.fg.begin(), out.fg.end(), 0);
      const auto want = static_cast<std::size_t>(std::lround(area * image_px));
      std::vector<std::size_t> idx(image_px);
      for (std::size_t i = 0; i < image_px; ++i) idx[i] = i;
      for (std::size_t i = 0; i < want && i < image_px; ++i) {
        std::size_t j = rindex(g, i, image_px - 1);
        std::swap(idx[i], idx[j]);
        out.fg[idx[i]] = 1;
      }
      return out;
    }
    case MaskTransform::random_rectangle:
    case MaskTransform::centered_rectangle: {
      std::fill(out.fg.begin(), out.fg.end(), 0);
      std::size_t rw, rh;
      rect_dims(area * image_px, mask.w, mask.h, g, rw, rh);
      std::size_t x0, y0;
      if (kind == MaskTransform::centered_rectangle) {
        x0 = (mask.w - rw) / 2;
        y0 = (mask.h - rh) / 2;
      } else {
        x0 = rindex(g, 0, mask.w - rw);
        y0 = rindex(g, 0, mask.h - rh);
      }
      paint_rect(out, x0, y0, rw, rh, 1);
      return out;
    }
    case MaskTransform::add_rectangle:
    case MaskTransform::remove_rectangle: {
      if (fg_px == 0) return out;
      std::size_t rw, rh;
      rect_dims(area * fg_px, mask.w, mask.h, g, rw, rh);
      const std::size_t x0 = rindex(g, 0, mask.w - rw);
      const std::size_t y0 = rindex(g, 0, mask.h - rh);
      paint_rect(out, x0, y0, rw, rh, kind == MaskTransform::add_rectangle ? 1 : 0);
      return out;
    }
    case MaskTransform::bounding_box: {
      if (fg_px == 0) return out;
      std::size_t xmin = mask.w, xmax = 0, ymin = mask.h, ymax = 0;
      for (std::size_t y = 0; y < mask.h; ++y)
        for (std::size_t x = 0; x < mask.w; ++x)
          if (mask.at(y, x)) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
          }
      std::fill(out.fg.begin(), out.fg.end(), 0);
      paint_rect(out, xmin, ymin, xmax - xmin + 1, ymax - ymin + 1, 1);
      return out;
    }
  }
  throw ConfigError("transform_mask: unknown transform");
}

namespace {

std::atomic<bool> warned_missing_mask{false};

View make_view(const Image& source, const Image* masked, bool small, std::size_t view_index,
               const AugmentationConfig& cfg, std::mt19937_64& g, uint64_t stream) {
  const bool odd = view_index % 2 == 0;  // first view of each kind is "view 1"
  const PhotometricParams& p = odd ? cfg.odd : cfg.even;

  View view;
  view.flags.odd_parity = odd;
  view.flags.stream = stream;

  const Image* src = &source;
  if (!small && masked != nullptr) {
    // mask coin; drawn even when p_mask is 0 or 1 so the rest of the stream
    // never shifts when p_mask changes
    if (runif(g) < cfg.p_mask) {
      src = masked;
      view.flags.masked = true;
    }
  } else if (!small) {
    (void)runif(g);  // keep the slot when no mask is in play
  }

  Image img;
  if (cfg.geometric) {
    const double amin = small ? cfg.small_area_min : p.crop_area_min;
    const double amax = small ? cfg.small_area_max : p.crop_area_max;
    img = random_resized_crop(*src, small ? cfg.small_size : cfg.large_size, amin, amax, g);
    if (runif(g) < p.p_flip) {
      img = horizontal_flip(img);
      view.flags.flipped = true;
    }
  } else {
    img = *src;
    (void)runif(g);  // flip coin slot, kept for stream stability
  }

  if (runif(g) < p.p_jitter) {
    img = color_jitter(img, p, g);
    view.flags.jittered = true;
  }
  if (runif(g) < p.p_gray) {
    if (img.c == 3) img = to_grayscale(img);
    view.flags.grayscaled = true;
  }
  if (runif(g) < p.p_blur) {
    img = gaussian_blur(img, runif(g, p.blur_sigma_min, p.blur_sigma_max));
    view.flags.blurred = true;
  }
  if (runif(g) < p.p_solarize) {
    img = solarize(img, cfg.solarize_mode);
    view.flags.solarized = true;
  }
  view.image = std::move(img);
  return view;
}

}  // namespace

ImageViews generate_views(const Image& img, const SaliencyMask* mask,
                          const AugmentationConfig& cfg, uint64_t image_stream) {
  if (cfg.num_large == 0) throw ConfigError("generate_views: need at least one large view");
  auto g = make_stream(image_stream);

  // background gray level is drawn first, once per image, regardless of
  // whether any view ends up masked
  const double gray_level = runif(g);

  Image masked_img;
  const Image* masked = nullptr;
  if (cfg.p_mask > 0.0) {
    SaliencyMask own;
    const SaliencyMask* use = mask;
    if (use == nullptr) {
      if (!warned_missing_mask.exchange(true))
        std::cerr << "generate_views: no precomputed mask; falling back to heuristic saliency\n";
      own = heuristic_saliency(img);
      use = &own;
    }
    if (cfg.mask_transform != MaskTransform::none) {
      own = transform_mask(*use, cfg.mask_transform, cfg.mask_transform_area, g);
      use = &own;
    }
    masked_img = apply_saliency_mask(img, *use, gray_level, cfg.min_foreground);
    masked = &masked_img;
  }

  ImageViews out;
  for (std::size_t v = 0; v < cfg.num_large; ++v)
    out.large.push_back(make_view(img, masked, false, v, cfg, g, image_stream));
  for (std::size_t v = 0; v < cfg.num_small; ++v)
    out.small.push_back(make_view(img, nullptr, true, v, cfg, g, image_stream));
  return out;
}

std::vector<double> flatten(const Image& img) { return img.px; }

void save_masks(const std::string& path, const std::vector<SaliencyMask>& masks) {
  if (masks.empty()) throw ContractError("save_masks: nothing to write");
  const std::size_t h = masks[0].h, w = masks[0].w;
  for (const auto& m : masks)
    if (m.h != h || m.w != w) throw ContractError("save_masks: masks disagree in size");
  if (h > 0xffff || w > 0xffff) throw ContractError("save_masks: mask dimensions exceed u16");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("save_masks: cannot open " + path);
  f.write("SMSK", 4);
  const uint32_t count = static_cast<uint32_t>(masks.size());
  const uint16_t h16 = static_cast<uint16_t>(h), w16 = static_cast<uint16_t>(w);
  f.write(reinterpret_cast<const char*>(&count), 4);
  f.write(reinterpret_cast<const char*>(&h16), 2);
  f.write(reinterpret_cast<const char*>(&w16), 2);
  const std::size_t stride = (w + 7) / 8;
  std::vector<uint8_t> row(stride);
  for (const auto& m : masks)
    for (std::size_t y = 0; y < h; ++y) {
      std::fill(row.begin(), row.end(), 0);
      for (std::size_t x = 0; x < w; ++x)
        if (m.at(y, x)) row[x / 8] |= static_cast<uint8_t>(0x80u >> (x % 8));
      f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(stride));
    }
  if (!f) throw FormatError("save_masks: write failed for " + path);
}

std::vector<SaliencyMask> load_masks(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_masks: cannot open " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "SMSK", 4) != 0)
    throw FormatError("load_masks: bad magic in " + path);
  uint32_t count = 0;
  uint16_t h16 = 0, w16 = 0;
  if (!f.read(reinterpret_cast<char*>(&count), 4) || !f.read(reinterpret_cast<char*>(&h16), 2) ||
      !f.read(reinterpret_cast<char*>(&w16), 2))
    throw FormatError("load_masks: truncated header in " + path);
  const std::size_t h = h16, w = w16;
  const std::size_t stride = (w + 7) / 8;
  const auto here = f.tellg();
  f.seekg(0, std::ios::end);
  const auto file_end = f.tellg();
  f.seekg(here);
  const std::uint64_t expect = static_cast<std::uint64_t>(count) * h * stride;
  if (static_cast<std::uint64_t>(file_end - here) != expect)
    throw FormatError("load_masks: file size does not match header in " + path);
  std::vector<SaliencyMask> masks(count);
  std::vector<uint8_t> row(stride);
  for (auto& m : masks) {
    m.h = h;
    m.w = w;
    m.fg.assign(h * w, 0);
    for (std::size_t y = 0; y < h; ++y) {
      if (!f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride)))
        throw FormatError("load_masks: truncated bitmap in " + path);
      for (std::size_t x = 0; x < w; ++x)
        m.fg[y * w + x] = (row[x / 8] >> (7 - x % 8)) & 1u;
    }
  }
  return masks;
}

}  // namespace relic
