#include "stripescan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "stripescan/error.hpp"

namespace stripescan {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "image dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  }
}

void check_depth(int depth) {
  if (depth != 8 && depth != 16) {
    throw Error(ErrorCode::kInvalidArgument, "pixel depth must be 8 or 16, got " + std::to_string(depth));
  }
}

int max_value(int depth) { return depth == 16 ? 65535 : 255; }

unsigned quantize(double v, int depth) {
  const double hi = max_value(depth);
  const double c = std::clamp(v, 0.0, hi);
  return static_cast<unsigned>(std::floor(c + 0.5));
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::kIoFailure, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::kIoFailure, "png_create_info_struct failed");
  }
  // libpng reports errors through longjmp; nothing with a destructor may be
  // live between setjmp and the end of decoding except the pre-sized buffer.
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;
  int width = 0, height = 0, bit_depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIoFailure, "corrupt PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // little-endian host order
  png_read_update_info(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int depth = bit_depth == 16 ? 16 : 8;
  GrayImage img(width, height, depth);
  for (int y = 0; y < height; ++y) {
    const unsigned char* r = rows[y];
    for (int x = 0; x < width; ++x) {
      if (depth == 16) {
        std::uint16_t v = 0;
        std::memcpy(&v, r + 2 * x, 2);
        img.at(x, y) = v;
      } else {
        img.at(x, y) = r[x];
      }
    }
  }
  return img;
}

// P5 with optional comments; maxval <= 255 means 8-bit, otherwise 16-bit big-endian.
GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c = 0;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        tok.push_back(c);
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
    return tok;
  };
  if (next_token() != "P5") throw Error(ErrorCode::kParseError, "not a binary PGM: " + path.string());
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "bad PGM header in " + path.string());
  }
  if (maxval < 1 || maxval > 65535) throw Error(ErrorCode::kParseError, "bad PGM maxval");
  const int depth = maxval > 255 ? 16 : 8;
  GrayImage img(width, height, depth);
  const std::size_t bpp = depth == 16 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * bpp);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::kParseError, "truncated PGM " + path.string());
  }
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = bpp == 2 ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  }
  return img;
}

}  // namespace

GrayImage::GrayImage(int width, int height, int depth, double fill) : width_(width), height_(height), depth_(depth) {
  check_dims(width, height);
  check_depth(depth);
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels, int depth)
    : width_(width), height_(height), depth_(depth), pixels_(std::move(pixels)) {
  check_dims(width, height);
  check_depth(depth);
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kInvalidArgument, "pixel buffer length does not match dimensions");
  }
  for (double v : pixels_) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::kInvalidArgument, "intensities must be finite and >= 0");
  }
}

void GrayImage::set_depth(int depth) {
  check_depth(depth);
  depth_ = depth;
}

double GrayImage::sample_bilinear(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
  const double bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), sizeof(magic));
  probe.close();
  if (png_sig_cmp(magic, 0, 8) == 0) return read_png(path);
  if (magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  throw Error(ErrorCode::kParseError, "unsupported image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  auto tmp = path;
  tmp += ".tmp";
  {
    FilePtr fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw Error(ErrorCode::kIoFailure, "cannot open " + tmp.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(ErrorCode::kIoFailure, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw Error(ErrorCode::kIoFailure, "png_create_info_struct failed");
    }
    const int depth = img.depth();
    const std::size_t bpp = depth == 16 ? 2 : 1;
    std::vector<unsigned char> buffer(static_cast<std::size_t>(img.width()) * img.height() * bpp);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const unsigned v = quantize(img.at(x, y), depth);
        const std::size_t i = (static_cast<std::size_t>(y) * img.width() + x) * bpp;
        if (bpp == 2) {
          buffer[i] = static_cast<unsigned char>(v >> 8);
          buffer[i + 1] = static_cast<unsigned char>(v & 0xFF);
        } else {
          buffer[i] = static_cast<unsigned char>(v);
        }
      }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * img.width() * bpp;
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw Error(ErrorCode::kIoFailure, "PNG encode failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "rename to " + path.string() + ": " + ec.message());
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + tmp.string());
    const int depth = img.depth();
    out << "P5\n" << img.width() << ' ' << img.height() << '\n' << max_value(depth) << '\n';
    for (double v : img.pixels()) {
      const unsigned q = quantize(v, depth);
      if (depth == 16) {
        out.put(static_cast<char>(q >> 8));
        out.put(static_cast<char>(q & 0xFF));
      } else {
        out.put(static_cast<char>(q));
      }
    }
    if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "rename to " + path.string() + ": " + ec.message());
}

void write_image(const std::filesystem::path& path, const GrayImage& img) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") {
    write_pgm(path, img);
  } else {
    write_png(path, img);
  }
}

}  // namespace stripescan
