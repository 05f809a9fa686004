#include "boneage/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "boneage/error.hpp"

namespace boneage {

GrayImage::GrayImage(int width, int height, float fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ContractError("image extents must be positive");
  if (!(fill >= 0.0f && fill <= 1.0f)) throw ContractError("fill value outside [0,1]");
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) throw ContractError("image extents must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ContractError("pixel count does not match image extents");
  }
  for (float p : pixels_) {
    if (!(p >= 0.0f && p <= 1.0f)) throw ContractError("pixel value outside [0,1]");
  }
}

namespace {

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

std::uint8_t to_byte(float p) {
  return static_cast<std::uint8_t>(std::floor(255.0f * clamp01(p) + 0.5f));
}

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  return token;
}

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string where = "'" + path.string() + "'";
  if (pgm_token(in) != "P5") throw IoError("not a binary PGM: " + where);
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(pgm_token(in));
    height = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header: " + where);
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw IoError("unsupported PGM (need 8-bit, positive extents): " + where);
  }
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> bytes(count);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) throw IoError("truncated PGM: " + where);
  std::vector<float> pixels(count);
  for (std::size_t i = 0; i < count; ++i) {
    pixels[i] = std::min(1.0f, static_cast<float>(bytes[i]) / static_cast<float>(maxval));
  }
  return GrayImage(width, height, std::move(pixels));
}

GrayImage load_png(const std::filesystem::path& path) {
  const std::string where = "'" + path.string() + "'";
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + where + ": " + image.message);
  }
  const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = colour ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + where + ": " + image.message);
  }
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<float> pixels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (channels == 1) {
      pixels[i] = static_cast<float>(buffer[i]) / 255.0f;
    } else {
      const float lum = 0.299f * buffer[3 * i] + 0.587f * buffer[3 * i + 1] +
                        0.114f * buffer[3 * i + 2];
      pixels[i] = clamp01(lum / 255.0f);
    }
  }
  return GrayImage(width, height, std::move(pixels));
}

// Bilinear sample treating everything outside the image as 0.
float sample_zero_border(const GrayImage& img, double x, double y) {
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= img.width() || fy0 >= img.height()) return 0.0f;
  const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double ax = x - fx0, ay = y - fy0;
  auto px = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= img.width() || yi >= img.height()) return 0.0;
    return img.at(xi, yi);
  };
  const double top = px(x0, y0) * (1.0 - ax) + px(x0 + 1, y0) * ax;
  const double bottom = px(x0, y0 + 1) * (1.0 - ax) + px(x0 + 1, y0 + 1) * ax;
  return clamp01(static_cast<float>(top * (1.0 - ay) + bottom * ay));
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open image '" + path.string() + "'");
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), sizeof(magic));
  const auto got = probe.gcount();
  probe.close();
  if (got >= 2 && magic[0] == 'P' && magic[1] == '5') return load_pgm(path);
  if (got == 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png(path);
  throw IoError("unsupported image format '" + path.string() + "' (need PGM P5 or PNG)");
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw ContractError("cannot save an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> bytes(img.pixels().size());
  std::transform(img.pixels().begin(), img.pixels().end(), bytes.begin(),
                 [](float p) { return static_cast<char>(to_byte(p)); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image '" + path.string() + "'");
}

GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) throw ContractError("resize target extents must be >= 1");
  if (img.empty()) throw ContractError("cannot resize an empty image");
  GrayImage out(new_width, new_height);
  const double sx = static_cast<double>(img.width()) / new_width;
  const double sy = static_cast<double>(img.height()) / new_height;
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ay = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double ax = fx - x0;
      const double top = img.at(x0, y0) * (1.0 - ax) + img.at(x1, y0) * ax;
      const double bottom = img.at(x0, y1) * (1.0 - ax) + img.at(x1, y1) * ax;
      out.at(x, y) = clamp01(static_cast<float>(top * (1.0 - ay) + bottom * ay));
    }
  }
  return out;
}

GrayImage rotate(const GrayImage& img, double degrees) {
  double turn = std::fmod(degrees, 360.0);
  if (turn < 0.0) turn += 360.0;
  const int w = img.width(), h = img.height();
  if (turn == 0.0) return img;
  if (turn == 90.0) {
    GrayImage out(h, w);
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < h; ++x) out.at(x, y) = img.at(w - 1 - y, x);
    return out;
  }
  if (turn == 180.0) {
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(x, y) = img.at(w - 1 - x, h - 1 - y);
    return out;
  }
  if (turn == 270.0) {
    GrayImage out(h, w);
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < h; ++x) out.at(x, y) = img.at(y, h - 1 - x);
    return out;
  }

  const double theta = turn * M_PI / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse map: output offset rotated clockwise lands on the source.
      const double u = x - cx, v = y - cy;
      const double su = u * c - v * s;
      const double sv = u * s + v * c;
      out.at(x, y) = sample_zero_border(img, cx + su, cy + sv);
    }
  }
  return out;
}

GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(x, y) = img.at(img.width() - 1 - x, y);
  return out;
}

GrayImage shift_crop(const GrayImage& img, int dx, int dy) {
  if (std::abs(dx) >= img.width() || std::abs(dy) >= img.height()) {
    std::ostringstream msg;
    msg << "shift (" << dx << ", " << dy << ") exceeds image extents " << img.width() << "x"
        << img.height();
    throw ContractError(msg.str());
  }
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < img.width(); ++x) {
      const int sx = x - dx;
      if (sx >= 0 && sx < img.width()) out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

GrayImage multiply(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ContractError("multiply: image extents differ");
  }
  GrayImage out(a.width(), a.height());
  for (std::size_t i = 0; i < out.pixels().size(); ++i) {
    out.pixels()[i] = a.pixels()[i] * b.pixels()[i];
  }
  return out;
}

GrayImage binarize(const GrayImage& img, float threshold) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < out.pixels().size(); ++i) {
    out.pixels()[i] = img.pixels()[i] >= threshold ? 1.0f : 0.0f;
  }
  return out;
}

Tensor images_to_tensor(std::span<const GrayImage> images) {
  if (images.empty()) throw ContractError("images_to_tensor: no images");
  const int w = images.front().width(), h = images.front().height();
  const std::size_t plane = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  Tensor t({images.size(), 1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].width() != w || images[n].height() != h) {
      throw DimensionError("images_to_tensor: mixed image extents");
    }
    std::copy(images[n].pixels().begin(), images[n].pixels().end(),
              t.data().begin() + static_cast<std::ptrdiff_t>(n * plane));
  }
  return t;
}

GrayImage tensor_to_image(const Tensor& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 1 || n >= t.dim(0)) {
    throw DimensionError("tensor_to_image: need [N,1,H,W], got " + shape_string(t.shape()));
  }
  const std::size_t h = t.dim(2), w = t.dim(3);
  std::vector<float> pixels(h * w);
  const auto src = t.data().subspan(n * h * w, h * w);
  std::transform(src.begin(), src.end(), pixels.begin(), clamp01);
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(pixels));
}

}  // namespace boneage
