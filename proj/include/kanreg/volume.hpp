#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "kanreg/tape.hpp"
#include "kanreg/types.hpp"

namespace kanreg {

// Scalar intensity grid, x-fastest storage, corner-aligned normalized domain:
// voxel 0 maps to -1 and voxel dims-1 maps to +1 on each axis.
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<double> data;

  std::int64_t voxel_count() const {
    return std::int64_t(dims[0]) * dims[1] * dims[2];
  }
  std::int64_t index(int x, int y, int z) const {
    return (std::int64_t(z) * dims[1] + y) * dims[0] + x;
  }
  double at(int x, int y, int z) const { return data[index(x, y, z)]; }
  double& at(int x, int y, int z) { return data[index(x, y, z)]; }
  void validate() const;  // throws on size / spacing inconsistency
};

struct Mask {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> data;
  std::vector<std::int64_t> voxels;  // linear indices of in-mask voxels

  static Mask full(const std::array<int, 3>& dims);
  static Mask from_data(const std::array<int, 3>& dims, std::vector<std::uint8_t> grid);
  bool empty() const { return voxels.empty(); }
};

struct CoordinateBatch {
  Mat points;  // batch x 3, normalized coordinates in [-1, 1]^3
  int count() const { return static_cast<int>(points.rows()); }
};

// coordinate = 2 * idx / (dims - 1) - 1 per axis; exact round trip.
std::array<double, 3> voxel_to_normalized(const std::array<double, 3>& idx,
                                          const std::array<int, 3>& dims);
std::array<double, 3> normalized_to_voxel(const std::array<double, 3>& coord,
                                          const std::array<int, 3>& dims);

// Trilinear interpolation at normalized points; out-of-range points are
// clamped to the boundary. When grad is non-null it receives d(sample)/d(coord)
// per normalized axis (piecewise-linear, zero outside the domain).
double trilinear_sample(const Volume& vol, const std::array<double, 3>& coord,
                        std::array<double, 3>* grad = nullptr);
Vec trilinear_sample(const Volume& vol, const Mat& points, Mat* grads = nullptr);

double nearest_sample(const Volume& vol, const std::array<double, 3>& coord);

// Voxel-space variants (coordinates in voxel index units).
double trilinear_sample_voxel(const Volume& vol, const std::array<double, 3>& voxc,
                              std::array<double, 3>* grad_voxel = nullptr);
double nearest_sample_voxel(const Volume& vol, const std::array<double, 3>& voxc);

// n voxel centers drawn uniformly with replacement from in-mask voxels.
CoordinateBatch sample_batch(const Mask& mask, const std::array<int, 3>& dims, int n,
                             std::mt19937_64& rng);

// Differentiable sampling: records an interpolation node whose backward pass
// routes adjoints into the coordinate node.
template <class S>
VarT<S> sample_trilinear(TapeT<S>& tape, const Volume& vol, VarT<S> coords) {
  const auto& c = tape.val(coords);
  Mat pts = c.template cast<double>();
  Mat grads;
  Vec vals = trilinear_sample(vol, pts, &grads);
  DenseMatrix<S> v = vals.template cast<S>();
  DenseMatrix<S> g = grads.template cast<S>();
  return tape.interp(coords, std::move(v), std::move(g));
}

struct KanModel;

enum class Interp { Trilinear, Nearest };

// Resample vol through the trained deformation x + U(x) over the fixed grid.
Volume warp_dense(const Volume& vol, const KanModel& model, Interp interp);

// Dense displacement in voxel units over the full grid, channel-interleaved
// (ux, uy, uz per voxel), evaluated in memory-bounded chunks.
std::vector<double> dense_displacement_field(const KanModel& model,
                                             const std::array<int, 3>& dims);

}  // namespace kanreg
