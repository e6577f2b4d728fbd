#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lsmcmc {

/// Dense 2D real field, row-major. Inputs are nominally in [0,255];
/// sampler states are unconstrained reals.
struct ImageGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  ImageGrid() = default;
  ImageGrid(std::size_t r, std::size_t c, double value = 0.0)
      : rows(r), cols(c), data(r * c, value) {}

  std::size_t size() const { return rows * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool same_shape(const ImageGrid& o) const {
    return rows == o.rows && cols == o.cols;
  }

  std::span<double> span() { return {data.data(), data.size()}; }
  std::span<const double> span() const { return {data.data(), data.size()}; }
};

/// Full complex 2D spectrum stored as split re/im arrays, row-major,
/// same layout as the ImageGrid it transforms.
struct ComplexSpectrum {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexSpectrum() = default;
  ComplexSpectrum(std::size_t r, std::size_t c)
      : rows(r), cols(c), re(r * c, 0.0), im(r * c, 0.0) {}

  std::size_t size() const { return rows * cols; }
};

/// Seeded stream of standard-normal draws. Distinct stream ids give
/// statistically independent streams from the same seed; a stream is never
/// shared across threads.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, std::uint64_t stream = 0);

  /// Degenerate source that always yields 0; pins the noise in deterministic
  /// reduction checks.
  static NoiseSource zeros();

  double normal();
  ImageGrid normal_field(std::size_t rows, std::size_t cols);
  void fill_normal(std::span<double> out);

  /// Uniform integer in [0, n). Used for reproducible mask construction.
  std::uint64_t uniform_below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  bool zero_mode_ = false;
};

// Unnormalized forward transform; ifft2 divides by rows*cols so that
// ifft2(fft2(g)) == g.
ComplexSpectrum fft2(const ImageGrid& g);
ImageGrid ifft2(const ComplexSpectrum& s);

/// Block-mean downsampling; factor must divide both dimensions.
ImageGrid downsample_by_averaging(const ImageGrid& g, std::size_t factor);

// Throws std::runtime_error if any entry is non-finite.
void ensure_finite(const ImageGrid& g, const char* context);

double mean(const ImageGrid& g);
double variance(const ImageGrid& g);  // population variance

// 8-bit grayscale image I/O. Values are clamped and rounded to [0,255] on
// write; reads return values in [0,255]. Format chosen by extension
// (.pgm -> binary P5, .png -> grayscale PNG).
ImageGrid read_image(const std::string& path);
void write_image(const ImageGrid& g, const std::string& path);

// Raw real-valued grid I/O (small text header + little-endian doubles),
// used for exact observation round-trips.
ImageGrid read_grid_raw(const std::string& path);
void write_grid_raw(const ImageGrid& g, const std::string& path);

/// Deterministic piecewise-smooth test scene in [0,255]: flat regions,
/// edges, a smooth ramp and a textured band, statistics tuned to behave
/// like a natural grayscale photograph under blur at 40 dB.
ImageGrid make_test_scene(std::size_t rows, std::size_t cols);

}  // namespace lsmcmc
