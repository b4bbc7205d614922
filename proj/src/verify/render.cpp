#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "anaforge/verification.hpp"

namespace anaforge {

namespace {

// 5x8 column-major bitmap font for ASCII 0x20..0x7e; bit 0 is the top row.
constexpr std::uint8_t kFont[][5] = {
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5F, 0x00, 0x00}, {0x00, 0x07, 0x00, 0x07, 0x00},
    {0x14, 0x7F, 0x14, 0x7F, 0x14}, {0x24, 0x2A, 0x7F, 0x2A, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x56, 0x20, 0x50}, {0x00, 0x08, 0x07, 0x03, 0x00}, {0x00, 0x1C, 0x22, 0x41, 0x00},
    {0x00, 0x41, 0x22, 0x1C, 0x00}, {0x2A, 0x1C, 0x7F, 0x1C, 0x2A}, {0x08, 0x08, 0x3E, 0x08, 0x08},
    {0x00, 0x80, 0x70, 0x30, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08}, {0x00, 0x00, 0x60, 0x60, 0x00},
    {0x20, 0x10, 0x08, 0x04, 0x02}, {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
    {0x72, 0x49, 0x49, 0x49, 0x46}, {0x21, 0x41, 0x49, 0x4D, 0x33}, {0x18, 0x14, 0x12, 0x7F, 0x10},
    {0x27, 0x45, 0x45, 0x45, 0x39}, {0x3C, 0x4A, 0x49, 0x49, 0x31}, {0x41, 0x21, 0x11, 0x09, 0x07},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x46, 0x49, 0x49, 0x29, 0x1E}, {0x00, 0x00, 0x14, 0x00, 0x00},
    {0x00, 0x40, 0x34, 0x00, 0x00}, {0x00, 0x08, 0x14, 0x22, 0x41}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x00, 0x41, 0x22, 0x14, 0x08}, {0x02, 0x01, 0x59, 0x09, 0x06}, {0x3E, 0x41, 0x5D, 0x59, 0x4E},
    {0x7C, 0x12, 0x11, 0x12, 0x7C}, {0x7F, 0x49, 0x49, 0x49, 0x36}, {0x3E, 0x41, 0x41, 0x41, 0x22},
    {0x7F, 0x41, 0x41, 0x41, 0x3E}, {0x7F, 0x49, 0x49, 0x49, 0x41}, {0x7F, 0x09, 0x09, 0x09, 0x01},
    {0x3E, 0x41, 0x41, 0x51, 0x73}, {0x7F, 0x08, 0x08, 0x08, 0x7F}, {0x00, 0x41, 0x7F, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3F, 0x01}, {0x7F, 0x08, 0x14, 0x22, 0x41}, {0x7F, 0x40, 0x40, 0x40, 0x40},
    {0x7F, 0x02, 0x1C, 0x02, 0x7F}, {0x7F, 0x04, 0x08, 0x10, 0x7F}, {0x3E, 0x41, 0x41, 0x41, 0x3E},
    {0x7F, 0x09, 0x09, 0x09, 0x06}, {0x3E, 0x41, 0x51, 0x21, 0x5E}, {0x7F, 0x09, 0x19, 0x29, 0x46},
    {0x26, 0x49, 0x49, 0x49, 0x32}, {0x03, 0x01, 0x7F, 0x01, 0x03}, {0x3F, 0x40, 0x40, 0x40, 0x3F},
    {0x1F, 0x20, 0x40, 0x20, 0x1F}, {0x3F, 0x40, 0x38, 0x40, 0x3F}, {0x63, 0x14, 0x08, 0x14, 0x63},
    {0x03, 0x04, 0x78, 0x04, 0x03}, {0x61, 0x59, 0x49, 0x4D, 0x43}, {0x00, 0x7F, 0x41, 0x41, 0x41},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x00, 0x41, 0x41, 0x41, 0x7F}, {0x04, 0x02, 0x01, 0x02, 0x04},
    {0x40, 0x40, 0x40, 0x40, 0x40}, {0x00, 0x03, 0x07, 0x08, 0x00}, {0x20, 0x54, 0x54, 0x78, 0x40},
    {0x7F, 0x28, 0x44, 0x44, 0x38}, {0x38, 0x44, 0x44, 0x44, 0x28}, {0x38, 0x44, 0x44, 0x28, 0x7F},
    {0x38, 0x54, 0x54, 0x54, 0x18}, {0x00, 0x08, 0x7E, 0x09, 0x02}, {0x18, 0xA4, 0xA4, 0x9C, 0x78},
    {0x7F, 0x08, 0x04, 0x04, 0x78}, {0x00, 0x44, 0x7D, 0x40, 0x00}, {0x20, 0x40, 0x40, 0x3D, 0x00},
    {0x7F, 0x10, 0x28, 0x44, 0x00}, {0x00, 0x41, 0x7F, 0x40, 0x00}, {0x7C, 0x04, 0x78, 0x04, 0x78},
    {0x7C, 0x08, 0x04, 0x04, 0x78}, {0x38, 0x44, 0x44, 0x44, 0x38}, {0xFC, 0x18, 0x24, 0x24, 0x18},
    {0x18, 0x24, 0x24, 0x18, 0xFC}, {0x7C, 0x08, 0x04, 0x04, 0x08}, {0x48, 0x54, 0x54, 0x54, 0x24},
    {0x04, 0x04, 0x3F, 0x44, 0x24}, {0x3C, 0x40, 0x40, 0x20, 0x7C}, {0x1C, 0x20, 0x40, 0x20, 0x1C},
    {0x3C, 0x40, 0x30, 0x40, 0x3C}, {0x44, 0x28, 0x10, 0x28, 0x44}, {0x4C, 0x90, 0x90, 0x90, 0x7C},
    {0x44, 0x64, 0x54, 0x4C, 0x44}, {0x00, 0x08, 0x36, 0x41, 0x00}, {0x00, 0x00, 0x77, 0x00, 0x00},
    {0x00, 0x41, 0x36, 0x08, 0x00}, {0x02, 0x01, 0x02, 0x04, 0x02},
};

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};
constexpr Rgb kPalette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h), kWhite) {}

  void set(int x, int y, Rgb c) {
    if (x >= 0 && y >= 0 && x < w_ && y < h_) px_[static_cast<std::size_t>(y * w_ + x)] = c;
  }

  void line(int x0, int y0, int x1, int y1, Rgb c) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) set(x, y, c);
  }

  // Text with 6-pixel advance; returns the width drawn.
  int text(int x, int y, const std::string& s, Rgb c) {
    int cx = x;
    for (char ch : s) {
      int code = static_cast<unsigned char>(ch);
      if (code < 0x20 || code > 0x7e) code = '?';
      const auto& glyph = kFont[code - 0x20];
      for (int col = 0; col < 5; ++col) {
        for (int row = 0; row < 8; ++row) {
          if (glyph[col] & (1u << row)) set(cx + col, y + row, c);
        }
      }
      cx += 6;
    }
    return cx - x;
  }

  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 6; }

  int width() const { return w_; }
  int height() const { return h_; }
  const std::vector<Rgb>& pixels() const { return px_; }

 private:
  int w_, h_;
  std::vector<Rgb> px_;
};

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

std::vector<std::uint8_t> encode_png(const Canvas& canvas) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: cannot create info");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(canvas.height()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encoding failed");
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(canvas.width()), static_cast<png_uint_32>(canvas.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  static_assert(sizeof(Rgb) == 3);
  auto* base = reinterpret_cast<png_bytep>(const_cast<Rgb*>(canvas.pixels().data()));
  for (int y = 0; y < canvas.height(); ++y) rows[static_cast<std::size_t>(y)] = base + y * canvas.width() * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  if (v == 0.0) return "0";
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Roughly five "nice" ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

std::string axis_title(const WaveformSeries& s, const RenderOptions& o) {
  switch (s.axis_kind) {
    case AxisKind::time: return "time (s)";
    case AxisKind::frequency: return o.log_x ? "frequency (Hz, log)" : "frequency (Hz)";
    case AxisKind::voltage: return s.axis_name.empty() ? "input (V)" : s.axis_name + " (V)";
    case AxisKind::none: break;
  }
  return s.axis_name;
}

}  // namespace

std::vector<std::size_t> decimate(const std::vector<double>& values, std::size_t max_points) {
  const std::size_t n = values.size();
  std::vector<std::size_t> keep;
  if (n <= max_points || max_points < 4) {
    keep.resize(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = i;
    return keep;
  }
  // first and last are kept; the interior is split into buckets that each
  // contribute their minimum and maximum, in index order
  const std::size_t buckets = (max_points - 2) / 2;
  keep.push_back(0);
  const std::size_t interior = n - 2;
  for (std::size_t b = 0; b < buckets; ++b) {
    std::size_t begin = 1 + b * interior / buckets, end = 1 + (b + 1) * interior / buckets;
    if (begin >= end) continue;
    std::size_t lo = begin, hi = begin;
    for (std::size_t i = begin; i < end; ++i) {
      if (values[i] < values[lo]) lo = i;
      if (values[i] > values[hi]) hi = i;
    }
    keep.push_back(std::min(lo, hi));
    if (hi != lo) keep.push_back(std::max(lo, hi));
  }
  keep.push_back(n - 1);
  return keep;
}

std::vector<std::uint8_t> render_waveform(const WaveformSeries& series, const std::vector<std::string>& signals,
                                          const std::string& title, const RenderOptions& options) {
  if (series.axis.empty()) throw EmptySeries("series has no samples");
  if (options.width < 200 || options.height < 150) throw PreconditionError("render: canvas too small");

  // Transform to plot coordinates, skipping non-finite points.
  struct Trace {
    std::string name;
    std::vector<double> x, y;
  };
  std::vector<Trace> traces;
  for (const auto& name : signals) {
    const auto* values = series.find(name);
    if (!values) continue;
    Trace t{name, {}, {}};
    for (std::size_t i = 0; i < series.axis.size() && i < values->size(); ++i) {
      double x = series.axis[i], y = (*values)[i];
      if (options.log_x) {
        if (x <= 0) continue;
        x = std::log10(x);
      }
      if (options.decibels) y = 20.0 * std::log10(std::max(std::abs(y), 1e-30));
      if (std::isfinite(x) && std::isfinite(y)) {
        t.x.push_back(x);
        t.y.push_back(y);
      }
    }
    if (!t.x.empty()) traces.push_back(std::move(t));
  }
  if (traces.empty()) throw EmptySeries("no plottable signal among the requested ones");

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& t : traces) {
    xmin = std::min(xmin, *std::min_element(t.x.begin(), t.x.end()));
    xmax = std::max(xmax, *std::max_element(t.x.begin(), t.x.end()));
    ymin = std::min(ymin, *std::min_element(t.y.begin(), t.y.end()));
    ymax = std::max(ymax, *std::max_element(t.y.begin(), t.y.end()));
  }
  if (xmax - xmin <= 0) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin <= 1e-12 * std::max(1.0, std::abs(ymax))) {
    double pad = std::max(std::abs(ymax) * 0.1, 1e-3);
    ymin -= pad;
    ymax += pad;
  } else {
    double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
  }

  Canvas c(options.width, options.height);
  const int left = 72, right = options.width - 20, top = 28, bottom = options.height - 44;
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (bottom - top))); };

  // grid and tick labels
  for (double t : nice_ticks(xmin, xmax)) {
    int x = px(t);
    c.line(x, top, x, bottom, kGrid);
    c.line(x, bottom, x, bottom + 4, kBlack);
    std::string label = options.log_x ? tick_label(std::pow(10.0, t)) : tick_label(t);
    c.text(x - Canvas::text_width(label) / 2, bottom + 8, label, kBlack);
  }
  for (double t : nice_ticks(ymin, ymax)) {
    int y = py(t);
    c.line(left, y, right, y, kGrid);
    c.line(left - 4, y, left, y, kBlack);
    std::string label = tick_label(t);
    c.text(left - 8 - Canvas::text_width(label), y - 3, label, kBlack);
  }
  c.line(left, top, left, bottom, kBlack);
  c.line(left, bottom, right, bottom, kBlack);
  c.line(right, top, right, bottom, kBlack);
  c.line(left, top, right, top, kBlack);

  // traces
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto& t = traces[k];
    const Rgb color = kPalette[k % std::size(kPalette)];
    auto idx = decimate(t.y, options.max_points);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      int x = px(t.x[idx[j]]), y = py(t.y[idx[j]]);
      if (j == 0) {
        c.set(x, y, color);
      } else {
        c.line(px(t.x[idx[j - 1]]), py(t.y[idx[j - 1]]), x, y, color);
      }
    }
  }

  // title, axis label, legend
  c.text(left, 10, title, kBlack);
  std::string xlabel = axis_title(series, options);
  c.text((left + right - Canvas::text_width(xlabel)) / 2, options.height - 18, xlabel, kBlack);
  std::string ylabel = options.decibels ? "dB" : "";
  if (!ylabel.empty()) c.text(4, top, ylabel, kBlack);
  int ly = top + 6;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const Rgb color = kPalette[k % std::size(kPalette)];
    int w = Canvas::text_width(traces[k].name);
    int lx = right - w - 26;
    c.rect(lx - 4, ly - 3, right - 4, ly + 10, kWhite);
    c.rect(lx, ly + 2, lx + 14, ly + 4, color);
    c.text(lx + 18, ly, traces[k].name, kBlack);
    ly += 14;
  }
  return encode_png(c);
}

}  // namespace anaforge
