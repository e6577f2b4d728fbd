#include "lsmcmc/grid.hpp"

#include <fftw3.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>

#include "lsmcmc/kernels.hpp"

namespace lsmcmc {

// ---------------------------------------------------------------------------
// NoiseSource
// ---------------------------------------------------------------------------

NoiseSource::NoiseSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  // Distinct (seed, stream) pairs decorrelate through seed_seq mixing.
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu),
                    static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  engine_.seed(seq);
}

NoiseSource NoiseSource::zeros() {
  NoiseSource n(0, 0);
  n.zero_mode_ = true;
  return n;
}

double NoiseSource::normal() { return zero_mode_ ? 0.0 : normal_(engine_); }

ImageGrid NoiseSource::normal_field(std::size_t rows, std::size_t cols) {
  ImageGrid g(rows, cols);
  fill_normal(g.span());
  return g;
}

void NoiseSource::fill_normal(std::span<double> out) {
  if (zero_mode_) {
    for (double& v : out) v = 0.0;
    return;
  }
  for (double& v : out) v = normal_(engine_);
}

std::uint64_t NoiseSource::uniform_below(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
  return d(engine_);
}

// ---------------------------------------------------------------------------
// FFT via FFTW, one cached plan pair per shape
// ---------------------------------------------------------------------------

namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

PlanPair& plans_for(std::size_t rows, std::size_t cols) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>, PlanPair> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(rows, cols);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::vector<std::complex<double>> in(rows * cols), out(rows * cols);
  PlanPair p;
  // FFTW_UNALIGNED so the plans may be re-executed on any caller buffer.
  p.fwd = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                           reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()),
                           FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.bwd = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                           reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()),
                           FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p.fwd || !p.bwd) throw std::runtime_error("fftw plan creation failed");
  return cache.emplace(key, p).first->second;
}

}  // namespace

ComplexSpectrum fft2(const ImageGrid& g) {
  if (g.rows == 0 || g.cols == 0)
    throw std::invalid_argument("fft2: empty grid");
  const std::size_t n = g.size();
  std::vector<std::complex<double>> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = g.data[i];
  fftw_execute_dft(plans_for(g.rows, g.cols).fwd,
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  ComplexSpectrum s(g.rows, g.cols);
  for (std::size_t i = 0; i < n; ++i) {
    s.re[i] = out[i].real();
    s.im[i] = out[i].imag();
  }
  return s;
}

ImageGrid ifft2(const ComplexSpectrum& s) {
  if (s.re.size() != s.rows * s.cols || s.im.size() != s.rows * s.cols)
    throw std::invalid_argument("ifft2: re/im dimension mismatch");
  const std::size_t n = s.rows * s.cols;
  std::vector<std::complex<double>> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = {s.re[i], s.im[i]};
  fftw_execute_dft(plans_for(s.rows, s.cols).bwd,
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  ImageGrid g(s.rows, s.cols);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) g.data[i] = out[i].real() * scale;
  return g;
}

// ---------------------------------------------------------------------------

ImageGrid downsample_by_averaging(const ImageGrid& g, std::size_t factor) {
  if (factor == 0 || g.rows % factor != 0 || g.cols % factor != 0)
    throw std::invalid_argument(
        "downsample_by_averaging: factor must divide both dimensions");
  if (factor == 1) return g;
  ImageGrid out(g.rows / factor, g.cols / factor);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < factor; ++i)
        for (std::size_t j = 0; j < factor; ++j)
          acc += g.at(r * factor + i, c * factor + j);
      out.at(r, c) = acc * inv;
    }
  return out;
}

void ensure_finite(const ImageGrid& g, const char* context) {
  for (double v : g.data)
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(context) +
                               ": non-finite value in grid");
}

double mean(const ImageGrid& g) {
  return kernels::sum(g.span()) / static_cast<double>(g.size());
}

double variance(const ImageGrid& g) {
  const double m = mean(g);
  const double ss = kernels::sum_squares(g.span());
  return ss / static_cast<double>(g.size()) - m * m;
}

// ---------------------------------------------------------------------------
// image I/O
// ---------------------------------------------------------------------------

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::lround(c));
}

int read_pnm_token(std::FILE* f) {
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (!std::isspace(c)) {
      break;
    }
    c = std::fgetc(f);
  }
  if (c == EOF) throw std::runtime_error("pgm: truncated header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return value;
}

ImageGrid read_pgm(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[3] = {0, 0, 0};
  if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || magic[1] != '5') {
    std::fclose(f);
    throw std::runtime_error(path + ": not a binary P5 PGM");
  }
  ImageGrid g;
  try {
    const int w = read_pnm_token(f);
    const int h = read_pnm_token(f);
    const int maxval = read_pnm_token(f);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
      throw std::runtime_error(path + ": unsupported PGM header");
    g = ImageGrid(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
    for (int r = 0; r < h; ++r) {
      if (std::fread(row.data(), 1, row.size(), f) != row.size())
        throw std::runtime_error(path + ": truncated PGM data");
      for (int c = 0; c < w; ++c)
        g.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
            255.0 * row[static_cast<std::size_t>(c)] / maxval;
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return g;
}

void write_pgm(const ImageGrid& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  std::fprintf(f, "P5\n%zu %zu\n255\n", g.cols, g.rows);
  std::vector<std::uint8_t> row(g.cols);
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) row[c] = to_byte(g.at(r, c));
    std::fwrite(row.data(), 1, row.size(), f);
  }
  std::fclose(f);
}

ImageGrid read_png_gray(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) {
    std::fclose(f);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    throw std::runtime_error(path + ": png read error");
  }
  png_init_io(png, f);
  png_read_info(png, info);

  // normalize everything to 8-bit grayscale
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE)
    png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)
    png_set_rgb_to_gray(png, 1, -1.0, -1.0);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const std::size_t h = png_get_image_height(png, info);
  const std::size_t w = png_get_image_width(png, info);
  ImageGrid g(h, w);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (std::size_t r = 0; r < h; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t c = 0; c < w; ++c) g.at(r, c) = row[c];
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return g;
}

void write_png_gray(const ImageGrid& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) {
    std::fclose(f);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw std::runtime_error(path + ": png write error");
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(g.cols),
               static_cast<png_uint_32>(g.rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(g.cols);
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) row[c] = to_byte(g.at(r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

ImageGrid read_image(const std::string& path) {
  if (has_suffix(path, ".pgm")) return read_pgm(path);
  if (has_suffix(path, ".png")) return read_png_gray(path);
  throw std::invalid_argument("read_image: unsupported extension in " + path);
}

void write_image(const ImageGrid& g, const std::string& path) {
  if (has_suffix(path, ".pgm"))
    write_pgm(g, path);
  else if (has_suffix(path, ".png"))
    write_png_gray(g, path);
  else
    throw std::invalid_argument("write_image: unsupported extension in " +
                                path);
}

ImageGrid read_grid_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string magic;
  std::size_t rows = 0, cols = 0;
  f >> magic >> rows >> cols;
  if (magic != "LSGRID" || rows == 0 || cols == 0)
    throw std::runtime_error(path + ": bad raw grid header");
  f.get();  // newline after header
  ImageGrid g(rows, cols);
  f.read(reinterpret_cast<char*>(g.data.data()),
         static_cast<std::streamsize>(g.size() * sizeof(double)));
  if (!f) throw std::runtime_error(path + ": truncated raw grid");
  return g;
}

void write_grid_raw(const ImageGrid& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "LSGRID " << g.rows << " " << g.cols << "\n";
  f.write(reinterpret_cast<const char*>(g.data.data()),
          static_cast<std::streamsize>(g.size() * sizeof(double)));
}

// ---------------------------------------------------------------------------
// synthetic test scene
// ---------------------------------------------------------------------------

namespace {

// Band-limited pseudo-texture: fixed table of random-phase plane waves with
// wavelengths of a few pixels, so the pattern survives a 5x5 blur.
double texture_at(double u, double v, const std::vector<double>& table) {
  double s = 0.0;
  for (std::size_t k = 0; k + 2 < table.size(); k += 3)
    s += std::sin(table[k] * u + table[k + 1] * v + table[k + 2]);
  return s;
}

}  // namespace

ImageGrid make_test_scene(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("make_test_scene: empty shape");

  NoiseSource rng(0x5ce9e5u, 7);
  std::vector<double> waves;
  for (int k = 0; k < 24; ++k) {
    // wavelengths between roughly 4 and 14 pixels, in absolute units
    const double wl = 4.0 + 10.0 * std::abs(std::tanh(rng.normal()));
    const double ang = rng.normal() * 3.0;
    const double f = 2.0 * 3.14159265358979323846 / wl;
    waves.push_back(f * std::cos(ang));
    waves.push_back(f * std::sin(ang));
    waves.push_back(rng.normal() * 3.0);
  }

  ImageGrid g(rows, cols);
  const double nr = static_cast<double>(rows);
  const double nc = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double y = static_cast<double>(r) / nr;  // 0 top .. 1 bottom
      const double x = static_cast<double>(c) / nc;
      // sky with a gentle vertical ramp
      double v = 196.0 - 42.0 * y;
      // ground band with strong texture
      if (y > 0.62) {
        const double u = static_cast<double>(r);
        const double w = static_cast<double>(c);
        v = 112.0 + 12.5 * texture_at(u, w, waves);
      }
      // dark standing figure: torso rectangle plus head disk
      if (x > 0.30 && x < 0.46 && y > 0.28 && y < 0.80) v = 30.0;
      const double dx = (x - 0.38) * nc;
      const double dy = (y - 0.22) * nr;
      if (dx * dx + dy * dy < 0.004 * nr * nc) v = 36.0;
      // slanted mast
      if (std::abs(x - 0.70 - 0.06 * y) < 0.012 && y > 0.18 && y < 0.72)
        v = 52.0;
      // bright hut on the horizon
      if (x > 0.78 && x < 0.92 && y > 0.52 && y < 0.62) v = 230.0;
      g.at(r, c) = std::clamp(v, 0.0, 255.0);
    }
  }
  return g;
}

}  // namespace lsmcmc
