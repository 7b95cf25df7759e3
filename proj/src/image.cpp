#include "e2r/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

#include "e2r/error.hpp"

namespace e2r {

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool is_pgm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5';
}

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PgmHeader parse_pgm_header(std::span<const std::uint8_t> bytes) {
  if (!is_pgm(bytes)) throw Error(ErrorCode::MalformedRecord, "not a binary PGM (P5)");
  std::size_t pos = 2;
  int values[3] = {0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    // whitespace and comments
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw Error(ErrorCode::MalformedRecord, "bad PGM header");
    int v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1 << 20) throw Error(ErrorCode::MalformedRecord, "PGM dimension too large");
      ++pos;
    }
    values[k] = v;
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(ErrorCode::MalformedRecord, "bad PGM header");
  ++pos;
  PgmHeader h{values[0], values[1], values[2], pos};
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 255) {
    throw Error(ErrorCode::MalformedRecord, "unsupported PGM (8-bit only)");
  }
  return h;
}

struct PngReadCtx {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + len > ctx->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, ctx->bytes.data() + ctx->pos, len);
  ctx->pos += len;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_cb(png_structp) {}

// Decodes to either 1 (gray) or 3 (rgb) channels.
std::vector<std::uint8_t> decode_png(std::span<const std::uint8_t> bytes, int channels, int& w, int& h) {
  if (!is_png(bytes)) throw Error(ErrorCode::MalformedRecord, "not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::MalformedRecord, "PNG decode failed");
  }
  PngReadCtx ctx{bytes, 0};
  png_set_read_fn(png, &ctx, png_read_cb);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  const bool is_color = (color & PNG_COLOR_MASK_COLOR) || color == PNG_COLOR_TYPE_PALETTE;
  if (channels == 1 && is_color) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (channels == 3 && !is_color) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<png_size_t>(w) * channels) png_error(png, "unexpected row layout");
  out.resize(rowbytes * h);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = out.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::vector<std::uint8_t> encode_png_raw(const std::uint8_t* data, int w, int h, int channels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "PNG encode failed");
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  const auto h = parse_pgm_header(bytes);
  const auto n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + n) throw Error(ErrorCode::MalformedRecord, "truncated PGM data");
  GrayImage img(h.width, h.height);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), n, img.pixels.begin());
  if (h.maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::min(255, p * 255 / h.maxval));
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> bytes) {
  GrayImage img;
  img.pixels = decode_png(bytes, 1, img.width, img.height);
  return img;
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
  RgbImage img;
  img.pixels = decode_png(bytes, 3, img.width, img.height);
  return img;
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  return encode_png_raw(image.pixels.data(), image.width, image.height, 1);
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  return encode_png_raw(image.pixels.data(), image.width, image.height, 3);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

GrayImage load_gray(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (is_png(bytes)) return decode_png_gray(bytes);
  if (is_pgm(bytes)) return decode_pgm(bytes);
  throw Error(ErrorCode::MalformedRecord, path.string() + ": unsupported image format (PGM or PNG)");
}

RgbImage load_rgb(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (is_png(bytes)) return decode_png_rgb(bytes);
  if (is_pgm(bytes)) {
    const auto g = decode_pgm(bytes);
    RgbImage img(g.width, g.height);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
      std::fill_n(&img.pixels[i * 3], 3, g.pixels[i]);
    }
    return img;
  }
  throw Error(ErrorCode::MalformedRecord, path.string() + ": unsupported image format (PGM or PNG)");
}

Size2 image_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());
  std::vector<std::uint8_t> head(512);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (is_png(head) && head.size() >= 24) {
    auto be32 = [&](std::size_t o) {
      return static_cast<int>((head[o] << 24) | (head[o + 1] << 16) | (head[o + 2] << 8) | head[o + 3]);
    };
    return {be32(16), be32(20)};
  }
  if (is_pgm(head)) {
    const auto h = parse_pgm_header(head);
    return {h.width, h.height};
  }
  throw Error(ErrorCode::MalformedRecord, path.string() + ": unsupported image format (PGM or PNG)");
}

double sample_bilinear(const GrayImage& image, double x, double y) {
  const double cx = std::clamp(x, 0.0, image.width - 1.0);
  const double cy = std::clamp(y, 0.0, image.height - 1.0);
  const int x0 = static_cast<int>(cx);
  const int y0 = static_cast<int>(cy);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  const double top = image.at(x0, y0) * (1 - fx) + image.at(x1, y0) * fx;
  const double bottom = image.at(x0, y1) * (1 - fx) + image.at(x1, y1) * fx;
  return top * (1 - fy) + bottom * fy;
}

}  // namespace e2r
