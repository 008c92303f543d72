#pragma once
// plot.hpp — static result figures: a confusion-matrix heatmap and a 2-D
// embedding scatter, rendered straight to PNG with no external imaging
// dependency. The PNG encoder emits stored (uncompressed) deflate blocks —
// byte-deterministic and decodable by everything.
//
// Text uses a built-in 5×7 uppercase bitmap font; draw_text upper-cases its
// input and renders a hollow box for glyphs outside the font.

#include <string>
#include <vector>

#include "saeda/eval.hpp"
#include "saeda/tensor.hpp"

namespace saeda {

struct Rgb {
  unsigned char r = 0, g = 0, b = 0;
};

struct Image {
  int width = 0, height = 0;
  std::vector<unsigned char> pixels; // row-major RGB, 3 bytes per pixel

  void set(int x, int y, Rgb c);
  Rgb get(int x, int y) const;
};

Image make_image(int width, int height, Rgb background);

// Blocks of scale×scale pixels per font dot; (x, y) is the glyph top-left.
void draw_text(Image& img, int x, int y, const std::string& text, Rgb color, int scale = 1);
int text_width(const std::string& text, int scale = 1);

// PNG, 8-bit truecolor. Deterministic: identical images produce identical
// bytes. Throws io_error when the file cannot be written.
void write_png(const Image& img, const std::string& path);

// Row-normalized heatmap with per-cell counts, truth on rows. Falls back to
// class_<k> when names run out.
Image render_confusion(const Confusion& confusion, const std::vector<std::string>& class_names);

// Scatter of n×2 coordinates colored by label (−1 = unlabeled, gray), with a
// legend. Throws on empty input or a label/coordinate count mismatch.
Image render_scatter(const Mat& coords, const std::vector<int>& labels,
                     const std::vector<std::string>& class_names);

// What a CSV holds, decided by its header line: `x,y,label` is an embedding,
// `label,...` a confusion matrix. Anything else — including an empty file —
// is a schema error (value_error).
enum class PlotKind { confusion, embedding };
PlotKind sniff_plot_kind(const std::string& csv_path);

// Reads either CSV produced by the eval writers and renders the matching
// figure. `class_names` is optional; the embedding legend and the heatmap
// axes fall back to the names embedded in the CSV or to class_<k>.
void plot_csv(const std::string& csv_path, const std::string& png_path,
              const std::vector<std::string>& class_names = {});

} // namespace saeda
