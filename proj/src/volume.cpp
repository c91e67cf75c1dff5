#include "kanreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kanreg/kan.hpp"

namespace kanreg {

void Volume::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw std::invalid_argument("volume: dims must be positive");
    if (!(spacing[a] > 0.0)) throw std::invalid_argument("volume: spacing must be positive");
  }
  if (static_cast<std::int64_t>(data.size()) != voxel_count())
    throw std::invalid_argument("volume: data length does not match dims");
}

Mask Mask::full(const std::array<int, 3>& dims) {
  Mask m;
  m.dims = dims;
  const std::int64_t n = std::int64_t(dims[0]) * dims[1] * dims[2];
  m.data.assign(n, 1);
  m.voxels.resize(n);
  for (std::int64_t i = 0; i < n; ++i) m.voxels[i] = i;
  return m;
}

Mask Mask::from_data(const std::array<int, 3>& dims, std::vector<std::uint8_t> grid) {
  const std::int64_t n = std::int64_t(dims[0]) * dims[1] * dims[2];
  if (static_cast<std::int64_t>(grid.size()) != n)
    throw std::invalid_argument("mask: data length does not match dims");
  Mask m;
  m.dims = dims;
  m.data = std::move(grid);
  for (std::int64_t i = 0; i < n; ++i)
    if (m.data[i]) m.voxels.push_back(i);
  return m;
}

std::array<double, 3> voxel_to_normalized(const std::array<double, 3>& idx,
                                          const std::array<int, 3>& dims) {
  std::array<double, 3> out;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw std::invalid_argument("voxel_to_normalized: axis needs >= 2 voxels");
    out[a] = 2.0 * idx[a] / (dims[a] - 1) - 1.0;
  }
  return out;
}

std::array<double, 3> normalized_to_voxel(const std::array<double, 3>& coord,
                                          const std::array<int, 3>& dims) {
  std::array<double, 3> out;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw std::invalid_argument("normalized_to_voxel: axis needs >= 2 voxels");
    out[a] = (coord[a] + 1.0) * 0.5 * (dims[a] - 1);
  }
  return out;
}

double trilinear_sample_voxel(const Volume& vol, const std::array<double, 3>& voxc,
                              std::array<double, 3>* grad_voxel) {
  std::array<double, 3> vc;
  std::array<bool, 3> clamped{};  // clamped axes carry zero derivative
  for (int a = 0; a < 3; ++a) {
    const double hi = double(vol.dims[a] - 1);
    vc[a] = std::clamp(voxc[a], 0.0, hi);
    clamped[a] = (voxc[a] < 0.0 || voxc[a] > hi);
  }
  int base[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    base[a] = std::min(int(std::floor(vc[a])), vol.dims[a] - 2);
    base[a] = std::max(base[a], 0);
    f[a] = vc[a] - base[a];
  }
  double value = 0.0;
  std::array<double, 3> dvox{0.0, 0.0, 0.0};
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? f[0] : 1.0 - f[0];
        const double wy = dy ? f[1] : 1.0 - f[1];
        const double wz = dz ? f[2] : 1.0 - f[2];
        const double v = vol.at(base[0] + dx, base[1] + dy, base[2] + dz);
        value += wx * wy * wz * v;
        dvox[0] += (dx ? 1.0 : -1.0) * wy * wz * v;
        dvox[1] += (dy ? 1.0 : -1.0) * wx * wz * v;
        dvox[2] += (dz ? 1.0 : -1.0) * wx * wy * v;
      }
  if (grad_voxel)
    for (int a = 0; a < 3; ++a) (*grad_voxel)[a] = clamped[a] ? 0.0 : dvox[a];
  return value;
}

double trilinear_sample(const Volume& vol, const std::array<double, 3>& coord,
                        std::array<double, 3>* grad) {
  std::array<double, 3> voxc;
  for (int a = 0; a < 3; ++a) voxc[a] = (coord[a] + 1.0) * 0.5 * (vol.dims[a] - 1);
  std::array<double, 3> gv;
  const double value = trilinear_sample_voxel(vol, voxc, grad ? &gv : nullptr);
  if (grad)
    for (int a = 0; a < 3; ++a) (*grad)[a] = gv[a] * 0.5 * (vol.dims[a] - 1);
  return value;
}

Vec trilinear_sample(const Volume& vol, const Mat& points, Mat* grads) {
  const int n = static_cast<int>(points.rows());
  Vec out(n);
  if (grads) grads->resize(n, 3);
  std::array<double, 3> g;
  for (int p = 0; p < n; ++p) {
    std::array<double, 3> c{points(p, 0), points(p, 1), points(p, 2)};
    out[p] = trilinear_sample(vol, c, grads ? &g : nullptr);
    if (grads)
      for (int a = 0; a < 3; ++a) (*grads)(p, a) = g[a];
  }
  return out;
}

double nearest_sample_voxel(const Volume& vol, const std::array<double, 3>& voxc) {
  int idx[3];
  for (int a = 0; a < 3; ++a)
    idx[a] = std::clamp(int(std::lround(voxc[a])), 0, vol.dims[a] - 1);
  return vol.at(idx[0], idx[1], idx[2]);
}

double nearest_sample(const Volume& vol, const std::array<double, 3>& coord) {
  std::array<double, 3> voxc;
  for (int a = 0; a < 3; ++a) voxc[a] = (coord[a] + 1.0) * 0.5 * (vol.dims[a] - 1);
  return nearest_sample_voxel(vol, voxc);
}

CoordinateBatch sample_batch(const Mask& mask, const std::array<int, 3>& dims, int n,
                             std::mt19937_64& rng) {
  if (mask.empty()) throw std::invalid_argument("sample_batch: empty mask");
  if (mask.dims != dims) throw std::invalid_argument("sample_batch: mask dims mismatch");
  std::uniform_int_distribution<std::int64_t> pick(0, std::int64_t(mask.voxels.size()) - 1);
  CoordinateBatch batch;
  batch.points.resize(n, 3);
  for (int p = 0; p < n; ++p) {
    const std::int64_t li = mask.voxels[pick(rng)];
    const int x = int(li % dims[0]);
    const int y = int((li / dims[0]) % dims[1]);
    const int z = int(li / (std::int64_t(dims[0]) * dims[1]));
    const auto c = voxel_to_normalized({double(x), double(y), double(z)}, dims);
    batch.points(p, 0) = c[0];
    batch.points(p, 1) = c[1];
    batch.points(p, 2) = c[2];
  }
  return batch;
}

namespace {
constexpr int kDenseChunk = 1 << 16;
}

Volume warp_dense(const Volume& vol, const KanModel& model, Interp interp) {
  vol.validate();
  Volume out;
  out.dims = vol.dims;
  out.spacing = vol.spacing;
  out.data.resize(vol.voxel_count());
  const auto params = plain_params<double>(model);
  const std::int64_t total = vol.voxel_count();
  Mat pts;
  for (std::int64_t start = 0; start < total; start += kDenseChunk) {
    const int n = int(std::min<std::int64_t>(kDenseChunk, total - start));
    pts.resize(n, 3);
    for (int p = 0; p < n; ++p) {
      const std::int64_t li = start + p;
      const int x = int(li % vol.dims[0]);
      const int y = int((li / vol.dims[0]) % vol.dims[1]);
      const int z = int(li / (std::int64_t(vol.dims[0]) * vol.dims[1]));
      const auto c = voxel_to_normalized({double(x), double(y), double(z)}, vol.dims);
      pts(p, 0) = c[0];
      pts(p, 1) = c[1];
      pts(p, 2) = c[2];
    }
    Mat u = model_forward(params, pts);
    for (int p = 0; p < n; ++p) {
      const std::int64_t li = start + p;
      const int x = int(li % vol.dims[0]);
      const int y = int((li / vol.dims[0]) % vol.dims[1]);
      const int z = int(li / (std::int64_t(vol.dims[0]) * vol.dims[1]));
      // Voxel-space target keeps the identity warp bitwise exact.
      std::array<double, 3> phi{x + u(p, 0) * 0.5 * (vol.dims[0] - 1),
                                y + u(p, 1) * 0.5 * (vol.dims[1] - 1),
                                z + u(p, 2) * 0.5 * (vol.dims[2] - 1)};
      out.data[li] = interp == Interp::Trilinear ? trilinear_sample_voxel(vol, phi)
                                                 : nearest_sample_voxel(vol, phi);
    }
  }
  return out;
}

std::vector<double> dense_displacement_field(const KanModel& model,
                                             const std::array<int, 3>& dims) {
  const auto params = plain_params<double>(model);
  const std::int64_t total = std::int64_t(dims[0]) * dims[1] * dims[2];
  std::vector<double> field(3 * total);
  Mat pts;
  for (std::int64_t start = 0; start < total; start += kDenseChunk) {
    const int n = int(std::min<std::int64_t>(kDenseChunk, total - start));
    pts.resize(n, 3);
    for (int p = 0; p < n; ++p) {
      const std::int64_t li = start + p;
      const int x = int(li % dims[0]);
      const int y = int((li / dims[0]) % dims[1]);
      const int z = int(li / (std::int64_t(dims[0]) * dims[1]));
      const auto c = voxel_to_normalized({double(x), double(y), double(z)}, dims);
      pts(p, 0) = c[0];
      pts(p, 1) = c[1];
      pts(p, 2) = c[2];
    }
    Mat u = model_forward(params, pts);
    for (int p = 0; p < n; ++p)
      for (int a = 0; a < 3; ++a)
        field[3 * (start + p) + a] = u(p, a) * 0.5 * (dims[a] - 1);  // voxel units
  }
  return field;
}

}  // namespace kanreg
