#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "saeda/errors.hpp"
#include "saeda/eval.hpp"
#include "saeda/plot.hpp"

using namespace saeda;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- independent PNG decoder (stored-deflate only) --------------------------
// Re-implements CRC-32, Adler-32, and the stored-block inflate path from the
// format specs so the encoder is checked against something it doesn't share
// code with.

uint32_t ref_crc32(const unsigned char* d, size_t n) {
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) {
    crc ^= d[i];
    for (int k = 0; k < 8; ++k) crc = (crc & 1) ? 0xEDB88320u ^ (crc >> 1) : crc >> 1;
  }
  return crc ^ 0xFFFFFFFFu;
}

uint32_t ref_adler32(const std::vector<unsigned char>& d) {
  uint32_t s1 = 1, s2 = 0;
  for (unsigned char c : d) {
    s1 = (s1 + c) % 65521u;
    s2 = (s2 + s1) % 65521u;
  }
  return (s2 << 16) | s1;
}

uint32_t be32(const unsigned char* p) {
  return ((uint32_t)p[0] << 24) | ((uint32_t)p[1] << 16) | ((uint32_t)p[2] << 8) | p[3];
}

struct DecodedPng {
  uint32_t width = 0, height = 0;
  std::vector<unsigned char> rgb;
};

DecodedPng decode_png(const fs::path& path) {
  const auto bytes = read_bytes(path);
  REQUIRE(bytes.size() > 8);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  for (int i = 0; i < 8; ++i) REQUIRE(bytes[i] == sig[i]);

  DecodedPng out;
  std::vector<unsigned char> idat;
  bool saw_end = false;
  size_t pos = 8;
  while (pos + 12 <= bytes.size()) {
    const uint32_t len = be32(&bytes[pos]);
    REQUIRE(pos + 12 + len <= bytes.size());
    const std::string type((const char*)&bytes[pos + 4], 4);
    // chunk CRC covers type + data
    REQUIRE(ref_crc32(&bytes[pos + 4], 4 + len) == be32(&bytes[pos + 8 + len]));
    if (type == "IHDR") {
      REQUIRE(len == 13);
      out.width = be32(&bytes[pos + 8]);
      out.height = be32(&bytes[pos + 12]);
      REQUIRE(bytes[pos + 16] == 8); // bit depth
      REQUIRE(bytes[pos + 17] == 2); // truecolor
    } else if (type == "IDAT") {
      idat.insert(idat.end(), &bytes[pos + 8], &bytes[pos + 8] + len);
    } else if (type == "IEND") {
      saw_end = true;
    }
    pos += 12 + len;
  }
  REQUIRE(saw_end);
  REQUIRE(pos == bytes.size());

  // zlib wrapper
  REQUIRE(idat.size() > 6);
  REQUIRE(((idat[0] << 8) | idat[1]) % 31 == 0);
  REQUIRE((idat[0] & 0x0F) == 8); // deflate method

  std::vector<unsigned char> raw;
  size_t p = 2;
  while (true) {
    REQUIRE(p + 5 <= idat.size());
    const unsigned char head = idat[p];
    REQUIRE((head >> 1) == 0); // stored block
    const size_t n = idat[p + 1] | (idat[p + 2] << 8);
    const size_t nlen = idat[p + 3] | (idat[p + 4] << 8);
    REQUIRE((n ^ nlen) == 0xFFFF);
    REQUIRE(p + 5 + n <= idat.size());
    raw.insert(raw.end(), &idat[p + 5], &idat[p + 5] + n);
    p += 5 + n;
    if (head & 1) break;
  }
  REQUIRE(p + 4 == idat.size());
  REQUIRE(ref_adler32(raw) == be32(&idat[p]));

  const size_t stride = 1 + (size_t)out.width * 3;
  REQUIRE(raw.size() == stride * out.height);
  for (uint32_t y = 0; y < out.height; ++y) {
    REQUIRE(raw[y * stride] == 0); // filter: none
    out.rgb.insert(out.rgb.end(), raw.begin() + y * stride + 1, raw.begin() + (y + 1) * stride);
  }
  return out;
}

int count_color(const Image& img, Rgb c) {
  int n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const Rgb p = img.get(x, y);
      n += p.r == c.r && p.g == c.g && p.b == c.b;
    }
  return n;
}

void write_text_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

} // namespace

TEST_CASE("png writer round-trips pixels through an independent decoder") {
  TempDir tmp("saeda_plot_png");
  // gradient + a bright block: exercises many byte values and > 1 scanline
  Image img = make_image(90, 70, {255, 255, 255});
  for (int y = 0; y < 70; ++y)
    for (int x = 0; x < 90; ++x)
      img.set(x, y, {(unsigned char)(x * 2), (unsigned char)(y * 3), (unsigned char)((x + y) & 0xFF)});

  const auto p1 = tmp.path / "a.png", p2 = tmp.path / "b.png";
  write_png(img, p1.string());
  write_png(img, p2.string());
  CHECK(read_bytes(p1) == read_bytes(p2)); // byte-deterministic

  const DecodedPng dec = decode_png(p1);
  CHECK(dec.width == 90);
  CHECK(dec.height == 70);
  CHECK(dec.rgb == img.pixels);
}

TEST_CASE("png writer spans multiple stored blocks on large images") {
  TempDir tmp("saeda_plot_png_large");
  // raw stream 300*120*3 + filter bytes = 108120 bytes > 65535 -> 2 blocks
  Image img = make_image(300, 120, {10, 200, 60});
  const auto p = tmp.path / "large.png";
  write_png(img, p.string());
  const DecodedPng dec = decode_png(p);
  CHECK(dec.rgb == img.pixels);
}

TEST_CASE("draw_text puts exactly the glyph's dots on the canvas") {
  Image img = make_image(20, 10, {255, 255, 255});
  draw_text(img, 0, 0, "1", {0, 0, 0});
  // glyph '1' rows 04,0C,04,04,04,04,0E -> 1+2+1+1+1+1+3 dots
  CHECK(count_color(img, {0, 0, 0}) == 10);

  SUBCASE("lowercase maps onto the uppercase glyph") {
    Image a = make_image(20, 10, {255, 255, 255});
    Image b = make_image(20, 10, {255, 255, 255});
    draw_text(a, 2, 1, "g", {0, 0, 0});
    draw_text(b, 2, 1, "G", {0, 0, 0});
    CHECK(a.pixels == b.pixels);
  }
  SUBCASE("scale multiplies the dot area") {
    Image big = make_image(30, 30, {255, 255, 255});
    draw_text(big, 0, 0, "1", {0, 0, 0}, 2);
    CHECK(count_color(big, {0, 0, 0}) == 40);
  }
  SUBCASE("clipping at the border does not crash or wrap") {
    Image edge = make_image(8, 8, {255, 255, 255});
    draw_text(edge, -3, -3, "88", {0, 0, 0});
    draw_text(edge, 6, 6, "88", {0, 0, 0});
    CHECK(true);
  }
  CHECK(text_width("AB") == 11);
  CHECK(text_width("") == 0);
}

TEST_CASE("confusion heatmap saturates full rows and stays white on empty cells") {
  Confusion c(3);
  c.at(0, 0) = 10; // share 1.0 -> exact heat color
  c.at(1, 1) = 4;
  c.at(1, 2) = 4;
  c.at(2, 2) = 7;
  const Image img = render_confusion(c, {"a", "b", "c"});
  CHECK(img.width > 3 * 48);
  CHECK(img.height > 3 * 48);
  CHECK(count_color(img, {31, 119, 180}) > 1500); // most of one 48x48 cell
  CHECK(count_color(img, {255, 255, 255}) > 1500); // zero cells stay background
}

TEST_CASE("scatter renders every class color plus the unlabeled gray") {
  Mat coords;
  coords.rows = 9;
  coords.cols = 2;
  coords.data = {0, 0, 0.1f, 0.1f, 0.2f, 0, // class 0 cluster
                 5, 5, 5.1f, 5,    5, 5.2f, // class 1 cluster
                 2, 2, 2.5f, 2.5f, 3, 2};   // unlabeled
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1, -1, -1, -1};
  const Image img = render_scatter(coords, labels, {"alpha", "beta"});
  CHECK(count_color(img, {31, 119, 180}) >= 9);
  CHECK(count_color(img, {255, 127, 14}) >= 9);
  CHECK(count_color(img, {127, 127, 127}) >= 9);

  SUBCASE("label/coordinate mismatch is rejected") {
    CHECK_THROWS_AS(render_scatter(coords, {0, 1}, {}), Error);
  }
}

TEST_CASE("plot_csv renders both artifact kinds produced by the eval writers") {
  TempDir tmp("saeda_plot_csv");

  Confusion c(2);
  c.at(0, 0) = 8;
  c.at(0, 1) = 2;
  c.at(1, 0) = 1;
  c.at(1, 1) = 9;
  const auto ccsv = tmp.path / "confusion.csv";
  write_confusion_csv(c, {"walk", "run"}, ccsv.string());
  CHECK(sniff_plot_kind(ccsv.string()) == PlotKind::confusion);
  const auto cpng = tmp.path / "confusion.png";
  plot_csv(ccsv.string(), cpng.string());
  CHECK(decode_png(cpng).width > 0);

  Mat coords;
  coords.rows = 4;
  coords.cols = 2;
  coords.data = {0, 0, 1, 1, -1, 0.5f, 2, -3};
  const auto ecsv = tmp.path / "embedding.csv";
  write_embedding_csv(coords, {0, 1, 1, 0}, ecsv.string());
  CHECK(sniff_plot_kind(ecsv.string()) == PlotKind::embedding);
  const auto epng = tmp.path / "embedding.png";
  plot_csv(ecsv.string(), epng.string());
  CHECK(decode_png(epng).width > 0);
}

TEST_CASE("plot_csv rejects broken schemas") {
  TempDir tmp("saeda_plot_schema");
  auto expect_schema_error = [&](const std::string& content) {
    const auto p = tmp.path / "bad.csv";
    write_text_file(p, content);
    try {
      plot_csv(p.string(), (tmp.path / "out.png").string());
      FAIL("expected value_error for: ", content);
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::value_error);
    }
  };
  expect_schema_error("");                               // empty file
  expect_schema_error("foo,bar\n1,2\n");                 // unknown header
  expect_schema_error("x,y,label\n");                    // embedding without points
  expect_schema_error("x,y,label\n1.0,2.0\n");           // short row
  expect_schema_error("x,y,label\n1.0,oops,3\n");        // non-numeric
  expect_schema_error("label,a,b\na,1,2\n");             // non-square confusion
  expect_schema_error("label,a,b\na,1,2\nb,3,x\n");      // non-integer count

  SUBCASE("missing file is an io error") {
    try {
      plot_csv((tmp.path / "nope.csv").string(), (tmp.path / "out.png").string());
      FAIL("expected io_error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::io_error);
    }
  }
}
