#include "kanreg/synthetic.hpp"

#include <cmath>
#include <random>

namespace kanreg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

struct Blob {
  double cx, cy, cz, sigma, weight;
};

double texture_at(const std::vector<Blob>& blobs, double x, double y, double z,
                  const std::array<int, 3>& dims) {
  double v = 0.0;
  for (const Blob& b : blobs) {
    double dx = x - b.cx, dy = y - b.cy, dz = z - b.cz;
    v += b.weight * std::exp(-(dx * dx + dy * dy + dz * dz) / (2 * b.sigma * b.sigma));
  }
  // broad gradient so NCC has signal even far from every blob
  v += 0.3 * (x / (dims[0] - 1) + 0.7 * y / (dims[1] - 1) + 0.4 * z / (dims[2] - 1));
  return v;
}

struct SineField {
  // U_k(p) = A * sin(2*pi * dot(freq_k, p_rel) + phase_k), p_rel in [0,1]^3
  double amplitude;
  std::array<std::array<double, 3>, 3> freq;
  std::array<double, 3> phase;
  std::array<int, 3> dims;

  std::array<double, 3> at(double x, double y, double z) const {
    double r[3] = {x / (dims[0] - 1), y / (dims[1] - 1), z / (dims[2] - 1)};
    std::array<double, 3> u;
    for (int k = 0; k < 3; ++k) {
      double arg = phase[k];
      for (int j = 0; j < 3; ++j) arg += kTwoPi * freq[k][j] * r[j];
      u[k] = amplitude * std::sin(arg);
    }
    return u;
  }
};

}  // namespace

SyntheticCase make_synthetic_case(const SyntheticConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& dims = cfg.dims;
  const std::size_t nvox = std::size_t(dims[0]) * dims[1] * dims[2];

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Blob> blobs(cfg.gaussian_blobs);
  for (Blob& b : blobs) {
    b.cx = uni(rng) * (dims[0] - 1);
    b.cy = uni(rng) * (dims[1] - 1);
    b.cz = uni(rng) * (dims[2] - 1);
    // small, signed blobs: sharp local contrast so misalignment of a few
    // voxels visibly decorrelates the pair
    b.sigma = 1.2 + 1.5 * uni(rng);
    b.weight = (uni(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + uni(rng));
  }

  SineField field;
  field.amplitude = cfg.amplitude_vox;
  field.dims = dims;
  for (int k = 0; k < 3; ++k) {
    field.phase[k] = kTwoPi * uni(rng);
    for (int j = 0; j < 3; ++j) field.freq[k][j] = 0.4 + 0.7 * uni(rng);
  }

  SyntheticCase out;
  out.moving.dims = dims;
  out.moving.spacing = cfg.spacing;
  out.moving.data.resize(nvox);
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i)
        out.moving.data[i] = texture_at(blobs, x, y, z, dims);

  // fixed(x) = moving(x + U(x)); texture is analytic, so sample it directly
  // rather than interpolating the discretized moving volume
  out.fixed.dims = dims;
  out.fixed.spacing = cfg.spacing;
  out.fixed.data.resize(nvox);
  out.gt_field.resize(nvox * 3);
  std::vector<std::uint8_t> mask_bits(nvox, 0);
  double max_disp = 0.0, sum_disp = 0.0;
  std::int64_t mask_count = 0;
  i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i) {
        auto u = field.at(x, y, z);
        out.fixed.data[i] = texture_at(blobs, x + u[0], y + u[1], z + u[2], dims);
        for (int k = 0; k < 3; ++k) out.gt_field[i * 3 + k] = u[k];
        bool inside = x >= cfg.margin && x < dims[0] - cfg.margin &&
                      y >= cfg.margin && y < dims[1] - cfg.margin &&
                      z >= cfg.margin && z < dims[2] - cfg.margin;
        if (inside) {
          mask_bits[i] = 1;
          double n = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
          max_disp = std::max(max_disp, n);
          sum_disp += n;
          ++mask_count;
        }
      }
  out.mask = Mask::from_data(dims, mask_bits);
  out.max_displacement_vox = max_disp;
  out.mean_displacement_vox = sum_disp / double(mask_count);

  const int lm_margin = cfg.margin + 4;  // keep both endpoints well inside
  std::uniform_real_distribution<double> lx(lm_margin, dims[0] - 1 - lm_margin);
  std::uniform_real_distribution<double> ly(lm_margin, dims[1] - 1 - lm_margin);
  std::uniform_real_distribution<double> lz(lm_margin, dims[2] - 1 - lm_margin);
  for (int m = 0; m < cfg.landmarks; ++m) {
    std::array<double, 3> lf{lx(rng), ly(rng), lz(rng)};
    auto u = field.at(lf[0], lf[1], lf[2]);
    out.landmarks_fixed.points.push_back(lf);
    out.landmarks_moving.points.push_back({lf[0] + u[0], lf[1] + u[1], lf[2] + u[2]});
  }
  return out;
}

}  // namespace kanreg
