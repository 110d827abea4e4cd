#include <png.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "io_util.hpp"
#include "mvface/data.hpp"

namespace mvface::data {

namespace {

gabor::Image decode_pgm(const std::string& bytes, const fs::path& path) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      const auto ch = static_cast<unsigned char>(bytes[pos]);
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(ch)) {
        ++pos;
      } else {
        break;
      }
    }
    long value = 0;
    const auto* first = bytes.data() + pos;
    const auto* last = bytes.data() + bytes.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) {
      throw IoError("malformed PGM header in '" + path.string() + "'");
    }
    pos += static_cast<std::size_t>(ptr - first);
    return value;
  };
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width <= 0 || height <= 0) throw IoError("bad PGM size in '" + path.string() + "'");
  if (maxval <= 0 || maxval > 255) {
    throw IoError("unsupported PGM maxval " + std::to_string(maxval) + " in '" + path.string() +
                  "' (8-bit only)");
  }
  ++pos;  // single whitespace after maxval
  const auto needed = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (pos > bytes.size() || bytes.size() - pos < needed) {
    throw IoError("unexpected end of data in '" + path.string() + "'");
  }
  gabor::Image img(height, width);
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      const auto byte = static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(y * width + x)]);
      img(y, x) = static_cast<double>(byte) / 255.0;
    }
  }
  return img;
}

gabor::Image decode_png(const std::string& bytes, const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  gabor::Image img(image.height, image.width);
  for (png_uint_32 y = 0; y < image.height; ++y) {
    for (png_uint_32 x = 0; x < image.width; ++x) {
      img(y, x) = static_cast<double>(buffer[y * image.width + x]) / 255.0;
    }
  }
  return img;
}

}  // namespace

gabor::Image load_image(const fs::path& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin(),
                                      [](unsigned char a, char b) {
                                        return a == static_cast<unsigned char>(b);
                                      })) {
    return decode_png(bytes, path);
  }
  throw IoError("unsupported image format in '" + path.string() + "' (expected P5 PGM or PNG)");
}

void save_pgm(const fs::path& path, const gabor::Image& image) {
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) +
                    "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(image.size()));
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const double v = std::clamp(image(y, x), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  io::write_file_atomic(path, out);
}

LoadedAnnotation load_annotation(const fs::path& path, const AnnotationOptions& opts) {
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  LoadedAnnotation out;
  const std::string where = " in '" + path.string() + "'";
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = io::tokens(line);
    if (toks.empty()) continue;
    if (toks.size() != 3) {
      throw IoError("malformed annotation line " + std::to_string(line_no) + where +
                    ": expected 'x y region'");
    }
    gabor::FiducialPoint pt;
    try {
      std::size_t used_x = 0;
      std::size_t used_y = 0;
      pt.x = std::stod(toks[0], &used_x);
      pt.y = std::stod(toks[1], &used_y);
      if (used_x != toks[0].size() || used_y != toks[1].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw IoError("malformed coordinates at line " + std::to_string(line_no) + where);
    }
    pt.region = gabor::parse_region(toks[2]);
    if (!pt.region) {
      throw IoError("unknown region '" + toks[2] + "' at line " + std::to_string(line_no) +
                    where);
    }
    out.mask.points.push_back(pt);
  }
  if (out.mask.size() != opts.expected_points) {
    const std::string msg = "annotation '" + path.string() + "' has " +
                            std::to_string(out.mask.size()) + " points, expected " +
                            std::to_string(opts.expected_points);
    if (opts.mode == AnnotationMode::strict) throw IoError(msg);
    out.warnings.push_back(msg);
  }
  return out;
}

void save_annotation(const fs::path& path, const gabor::FiducialMask& mask) {
  std::ostringstream os;
  os << "# x y region\n";
  os.precision(17);
  for (const auto& p : mask.points) {
    if (!p.region) throw IoError("cannot save an annotation point without a region");
    os << p.x << ' ' << p.y << ' ' << gabor::region_name(*p.region) << '\n';
  }
  io::write_file_atomic(path, os.str());
}

}  // namespace mvface::data
