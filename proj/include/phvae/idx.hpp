#ifndef PHVAE_IDX_HPP
#define PHVAE_IDX_HPP

// IDX container (big-endian): 4-byte magic 0x00000803 for unsigned-byte
// image tensors [n, rows, cols], 0x00000801 for label vectors [n].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace phvae::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // 2049

/// Flattened grayscale images, one row per image, pixels scaled to [0, 1].
struct ImageSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Eigen::MatrixXd pixels;

  std::size_t count() const { return static_cast<std::size_t>(pixels.rows()); }
};

ImageSet read_idx_images(std::istream& in);
ImageSet load_idx(const std::filesystem::path& path);

/// Writes pixels back as bytes round(255 * p).
void write_idx_images(std::ostream& out, const ImageSet& images);
void save_idx(const std::filesystem::path& path, const ImageSet& images);

std::vector<std::uint8_t> read_idx_labels(std::istream& in);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

/// Averages non-overlapping blocks down to side x side. `side` must divide
/// both image dimensions.
ImageSet downscale(const ImageSet& images, std::size_t side);

}  // namespace phvae::data

#endif  // PHVAE_IDX_HPP
