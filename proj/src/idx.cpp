#include "phvae/idx.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "phvae/errors.hpp"

namespace phvae::data {
namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw IdxTruncatedError(std::string("idx: truncated header while reading ") + what);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::string hex(std::uint32_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("idx: cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

ImageSet read_idx_images(std::istream& in) {
  const std::uint32_t magic = read_be32(in, "magic");
  if (magic != kIdxImageMagic) {
    throw IdxMagicError("idx: expected image magic 0x00000803, found " + hex(magic));
  }
  const std::uint32_t n = read_be32(in, "image count");
  const std::uint32_t rows = read_be32(in, "row count");
  const std::uint32_t cols = read_be32(in, "column count");

  ImageSet out;
  out.rows = rows;
  out.cols = cols;
  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> buffer(std::size_t{n} * pixels);
  if (!buffer.empty() && !in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()))) {
    throw IdxTruncatedError("idx: payload truncated, expected " + std::to_string(buffer.size()) +
                            " bytes, got " + std::to_string(in.gcount()));
  }
  out.pixels.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      out.pixels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(buffer[i * pixels + j]) / 255.0;
    }
  }
  return out;
}

ImageSet load_idx(const std::filesystem::path& path) {
  auto in = open(path);
  return read_idx_images(in);
}

void write_idx_images(std::ostream& out, const ImageSet& images) {
  if (images.pixels.cols() != static_cast<Eigen::Index>(images.rows * images.cols)) {
    throw DimensionError("write_idx_images: pixel matrix width does not match rows x cols");
  }
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.count()));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  for (Eigen::Index i = 0; i < images.pixels.rows(); ++i) {
    for (Eigen::Index j = 0; j < images.pixels.cols(); ++j) {
      const double v = std::clamp(images.pixels(i, j), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
}

void save_idx(const std::filesystem::path& path, const ImageSet& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("idx: cannot write '" + path.string() + "'");
  write_idx_images(out, images);
}

std::vector<std::uint8_t> read_idx_labels(std::istream& in) {
  const std::uint32_t magic = read_be32(in, "magic");
  if (magic != kIdxLabelMagic) {
    throw IdxMagicError("idx: expected label magic 0x00000801, found " + hex(magic));
  }
  const std::uint32_t n = read_be32(in, "label count");
  std::vector<std::uint8_t> labels(n);
  if (n != 0 && !in.read(reinterpret_cast<char*>(labels.data()), n)) {
    throw IdxTruncatedError("idx: label payload truncated");
  }
  return labels;
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  auto in = open(path);
  return read_idx_labels(in);
}

ImageSet downscale(const ImageSet& images, std::size_t side) {
  if (side == 0 || images.rows % side != 0 || images.cols % side != 0) {
    throw DownscaleError("downscale: size " + std::to_string(side) + " does not divide " +
                         std::to_string(images.rows) + "x" + std::to_string(images.cols));
  }
  const std::size_t br = images.rows / side;
  const std::size_t bc = images.cols / side;
  const double inv = 1.0 / static_cast<double>(br * bc);
  ImageSet out;
  out.rows = side;
  out.cols = side;
  out.pixels.resize(images.pixels.rows(), static_cast<Eigen::Index>(side * side));
  for (Eigen::Index n = 0; n < images.pixels.rows(); ++n) {
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < br; ++i) {
          for (std::size_t j = 0; j < bc; ++j) {
            acc += images.pixels(n, static_cast<Eigen::Index>((r * br + i) * images.cols + c * bc + j));
          }
        }
        out.pixels(n, static_cast<Eigen::Index>(r * side + c)) = acc * inv;
      }
    }
  }
  return out;
}

}  // namespace phvae::data
