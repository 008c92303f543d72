#include "saeda/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>

#include "saeda/errors.hpp"

namespace saeda {

namespace {

// ------------------------------------------------------------------- font
// 5×7 uppercase bitmap font; each glyph is 7 rows of 5 bits, MSB on the left.
struct Glyph {
  char ch;
  unsigned char rows[7];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
};

const unsigned char* glyph_rows(char c) {
  const char u = (char)std::toupper((unsigned char)c);
  for (const Glyph& g : kFont)
    if (g.ch == u) return g.rows;
  return nullptr;
}

// ----------------------------------------------------------------- checksums

uint32_t crc32(const unsigned char* data, size_t n) {
  static std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

uint32_t adler32(const unsigned char* data, size_t n) {
  uint32_t s1 = 1, s2 = 0;
  for (size_t i = 0; i < n; ++i) {
    s1 = (s1 + data[i]) % 65521u;
    s2 = (s2 + s1) % 65521u;
  }
  return (s2 << 16) | s1;
}

void put_u32(std::vector<unsigned char>& v, uint32_t x) {
  v.push_back((unsigned char)(x >> 24));
  v.push_back((unsigned char)(x >> 16));
  v.push_back((unsigned char)(x >> 8));
  v.push_back((unsigned char)x);
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<unsigned char>& data) {
  std::vector<unsigned char> head;
  put_u32(head, (uint32_t)data.size());
  out.write((const char*)head.data(), 4);
  std::vector<unsigned char> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.write((const char*)body.data(), (std::streamsize)body.size());
  std::vector<unsigned char> crc;
  put_u32(crc, crc32(body.data(), body.size()));
  out.write((const char*)crc.data(), 4);
}

// ------------------------------------------------------------- drawing bits

void fill_rect(Image& img, int x0, int y0, int w, int h, Rgb c) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) img.set(x, y, c);
}

Rgb lerp(Rgb a, Rgb b, double t) {
  auto mix = [t](unsigned char u, unsigned char v) {
    return (unsigned char)std::lround(u + (v - u) * t);
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{20, 20, 20};
constexpr Rgb kGrid{150, 150, 150};
constexpr Rgb kHeat{31, 119, 180}; // saturated end of the heatmap ramp
constexpr Rgb kGray{127, 127, 127};

constexpr Rgb kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},   {214, 39, 40},  {148, 103, 189},
    {140, 86, 75},  {227, 119, 194}, {188, 189, 34}, {23, 190, 207}, {94, 79, 162},
};
constexpr int kPaletteSize = (int)(sizeof(kPalette) / sizeof(kPalette[0]));

std::string fallback_name(const std::vector<std::string>& names, int k) {
  return k < (int)names.size() ? names[k] : "class_" + std::to_string(k);
}

// --------------------------------------------------------------- csv reading

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrCode::io_error, "cannot open csv: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

long long parse_count(const std::string& s) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty())
    fail(ErrCode::value_error, "csv schema: expected an integer count, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    fail(ErrCode::value_error, "csv schema: expected a number, got '" + s + "'");
  return v;
}

} // namespace

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return; // clip silently
  unsigned char* p = pixels.data() + 3 * ((size_t)y * width + x);
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

Rgb Image::get(int x, int y) const {
  const unsigned char* p = pixels.data() + 3 * ((size_t)y * width + x);
  return {p[0], p[1], p[2]};
}

Image make_image(int width, int height, Rgb background) {
  if (width < 1 || height < 1) fail(ErrCode::bad_config, "image dimensions must be positive");
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.resize((size_t)width * height * 3);
  fill_rect(img, 0, 0, width, height, background);
  return img;
}

void draw_text(Image& img, int x, int y, const std::string& text, Rgb color, int scale) {
  int cx = x;
  for (char ch : text) {
    const unsigned char* rows = glyph_rows(ch);
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 5; ++c) {
        const bool on = rows ? (rows[r] >> (4 - c)) & 1
                             : (r == 0 || r == 6 || c == 0 || c == 4); // hollow box
        if (on) fill_rect(img, cx + c * scale, y + r * scale, scale, scale, color);
      }
    }
    cx += 6 * scale;
  }
}

int text_width(const std::string& text, int scale) {
  return text.empty() ? 0 : ((int)text.size() * 6 - 1) * scale;
}

void write_png(const Image& img, const std::string& path) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != (size_t)img.width * img.height * 3)
    fail(ErrCode::shape_mismatch, "png: image buffer does not match its dimensions");

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrCode::io_error, "cannot open for writing: " + path);

  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  out.write((const char*)sig, 8);

  std::vector<unsigned char> ihdr;
  put_u32(ihdr, (uint32_t)img.width);
  put_u32(ihdr, (uint32_t)img.height);
  ihdr.push_back(8); // bit depth
  ihdr.push_back(2); // truecolor
  ihdr.push_back(0); // compression
  ihdr.push_back(0); // filter
  ihdr.push_back(0); // no interlace
  write_chunk(out, "IHDR", ihdr);

  // raw scanlines, each prefixed with filter byte 0
  std::vector<unsigned char> raw;
  raw.reserve((size_t)img.height * (1 + (size_t)img.width * 3));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const unsigned char* row = img.pixels.data() + (size_t)y * img.width * 3;
    raw.insert(raw.end(), row, row + (size_t)img.width * 3);
  }

  // zlib stream of stored blocks: valid deflate, zero compression machinery
  std::vector<unsigned char> idat;
  idat.push_back(0x78);
  idat.push_back(0x01);
  size_t off = 0;
  while (true) {
    const size_t n = std::min<size_t>(65535, raw.size() - off);
    const bool last = off + n == raw.size();
    idat.push_back(last ? 1 : 0);
    idat.push_back((unsigned char)(n & 0xFF));
    idat.push_back((unsigned char)(n >> 8));
    idat.push_back((unsigned char)(~n & 0xFF));
    idat.push_back((unsigned char)((~n >> 8) & 0xFF));
    idat.insert(idat.end(), raw.begin() + off, raw.begin() + off + n);
    off += n;
    if (last) break;
  }
  put_u32(idat, adler32(raw.data(), raw.size()));
  write_chunk(out, "IDAT", idat);
  write_chunk(out, "IEND", {});
  if (!out) fail(ErrCode::io_error, "write failed: " + path);
}

Image render_confusion(const Confusion& confusion, const std::vector<std::string>& class_names) {
  const int C = confusion.classes;
  if (C < 1) fail(ErrCode::value_error, "confusion heatmap: empty matrix");

  const int cell = 48, pad = 8;
  int left = 0;
  for (int k = 0; k < C; ++k) left = std::max(left, text_width(fallback_name(class_names, k)));
  left += 2 * pad;
  const int top = 7 + 2 * pad;
  Image img = make_image(left + C * cell + pad, top + C * cell + pad, kWhite);

  std::vector<long long> row_sum(C, 0);
  for (int t = 0; t < C; ++t)
    for (int p = 0; p < C; ++p) row_sum[t] += confusion.at(t, p);

  for (int t = 0; t < C; ++t) {
    const int y0 = top + t * cell;
    draw_text(img, pad, y0 + (cell - 7) / 2, fallback_name(class_names, t), kBlack);
    for (int p = 0; p < C; ++p) {
      const int x0 = left + p * cell;
      const double share = row_sum[t] ? (double)confusion.at(t, p) / row_sum[t] : 0.0;
      fill_rect(img, x0, y0, cell, cell, lerp(kWhite, kHeat, share));
      const std::string count = std::to_string(confusion.at(t, p));
      draw_text(img, x0 + (cell - text_width(count)) / 2, y0 + (cell - 7) / 2, count,
                share > 0.5 ? kWhite : kBlack);
    }
  }
  for (int p = 0; p < C; ++p) { // column headers, clipped to their cell
    const std::string name = fallback_name(class_names, p);
    draw_text(img, left + p * cell + std::max(0, (cell - text_width(name)) / 2), pad, name,
              kBlack);
  }
  for (int k = 0; k <= C; ++k) { // grid
    fill_rect(img, left, top + k * cell, C * cell + 1, 1, kGrid);
    fill_rect(img, left + k * cell, top, 1, C * cell + 1, kGrid);
  }
  return img;
}

Image render_scatter(const Mat& coords, const std::vector<int>& labels,
                     const std::vector<std::string>& class_names) {
  if (coords.rows < 1) fail(ErrCode::value_error, "scatter: no points");
  if (coords.cols != 2) fail(ErrCode::shape_mismatch, "scatter: coordinates must be n x 2");
  if ((int)labels.size() != coords.rows)
    fail(ErrCode::shape_mismatch, "scatter: label count disagrees with coordinates");

  float min_x = coords.at(0, 0), max_x = min_x, min_y = coords.at(0, 1), max_y = min_y;
  for (int i = 0; i < coords.rows; ++i) {
    min_x = std::min(min_x, coords.at(i, 0));
    max_x = std::max(max_x, coords.at(i, 0));
    min_y = std::min(min_y, coords.at(i, 1));
    max_y = std::max(max_y, coords.at(i, 1));
  }
  auto widen = [](float& lo, float& hi) { // degenerate/needs-margin ranges
    const float span = hi - lo;
    if (span <= 0) {
      lo -= 1;
      hi += 1;
    } else {
      lo -= 0.05f * span;
      hi += 0.05f * span;
    }
  };
  widen(min_x, max_x);
  widen(min_y, max_y);

  const int left = 14, top = 14, bottom = 24, legend = 130, plot_w = 416, plot_h = 416;
  Image img = make_image(left + plot_w + legend, top + plot_h + bottom, kWhite);

  // frame
  fill_rect(img, left, top, plot_w, 1, kGrid);
  fill_rect(img, left, top + plot_h - 1, plot_w, 1, kGrid);
  fill_rect(img, left, top, 1, plot_h, kGrid);
  fill_rect(img, left + plot_w - 1, top, 1, plot_h, kGrid);

  auto color_of = [&](int label) {
    return label < 0 ? kGray : kPalette[label % kPaletteSize];
  };
  for (int i = 0; i < coords.rows; ++i) {
    const int px = left + (int)std::lround((coords.at(i, 0) - min_x) / (max_x - min_x) * (plot_w - 1));
    const int py = top + plot_h - 1 -
                   (int)std::lround((coords.at(i, 1) - min_y) / (max_y - min_y) * (plot_h - 1));
    fill_rect(img, px - 1, py - 1, 3, 3, color_of(labels[i]));
  }

  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", (double)min_x);
  draw_text(img, left, top + plot_h + 6, buf, kBlack);
  std::snprintf(buf, sizeof buf, "%.3g", (double)max_x);
  draw_text(img, left + plot_w - text_width(buf), top + plot_h + 6, buf, kBlack);

  std::set<int> present(labels.begin(), labels.end());
  int ly = top + 4;
  for (int label : present) {
    const int lx = left + plot_w + 12;
    fill_rect(img, lx, ly, 8, 8, color_of(label));
    draw_text(img, lx + 14, ly, label < 0 ? "unlabeled" : fallback_name(class_names, label),
              kBlack);
    ly += 14;
  }
  return img;
}

PlotKind sniff_plot_kind(const std::string& csv_path) {
  const auto lines = read_lines(csv_path);
  if (lines.empty()) fail(ErrCode::value_error, "csv schema: file is empty");
  if (lines[0] == "x,y,label") return PlotKind::embedding;
  if (lines[0].rfind("label,", 0) == 0) return PlotKind::confusion;
  fail(ErrCode::value_error, "csv schema: unrecognized header '" + lines[0] + "'");
}

void plot_csv(const std::string& csv_path, const std::string& png_path,
              const std::vector<std::string>& class_names) {
  const PlotKind kind = sniff_plot_kind(csv_path);
  const auto lines = read_lines(csv_path);

  if (kind == PlotKind::embedding) {
    if (lines.size() < 2) fail(ErrCode::value_error, "csv schema: embedding has no points");
    Mat coords;
    coords.rows = (int)lines.size() - 1;
    coords.cols = 2;
    coords.data.resize((size_t)coords.rows * 2);
    std::vector<int> labels(coords.rows);
    for (int i = 0; i < coords.rows; ++i) {
      const auto f = split_fields(lines[i + 1]);
      if (f.size() != 3)
        fail(ErrCode::value_error, "csv schema: embedding row needs 3 fields, got " +
                                       std::to_string(f.size()));
      coords.at(i, 0) = (float)parse_real(f[0]);
      coords.at(i, 1) = (float)parse_real(f[1]);
      labels[i] = (int)parse_count(f[2]);
    }
    write_png(render_scatter(coords, labels, class_names), png_path);
    return;
  }

  const auto header = split_fields(lines[0]);
  const int C = (int)header.size() - 1;
  if (C < 1 || (int)lines.size() != C + 1)
    fail(ErrCode::value_error, "csv schema: confusion matrix must be square (" +
                                   std::to_string(C) + " columns, " +
                                   std::to_string(lines.size() - 1) + " rows)");
  Confusion cm(C);
  std::vector<std::string> names(header.begin() + 1, header.end());
  for (int t = 0; t < C; ++t) {
    const auto f = split_fields(lines[t + 1]);
    if ((int)f.size() != C + 1)
      fail(ErrCode::value_error, "csv schema: confusion row " + std::to_string(t) + " has " +
                                     std::to_string(f.size()) + " fields, expected " +
                                     std::to_string(C + 1));
    for (int p = 0; p < C; ++p) cm.at(t, p) = parse_count(f[p + 1]);
  }
  write_png(render_confusion(cm, class_names.empty() ? names : class_names), png_path);
}

} // namespace saeda
