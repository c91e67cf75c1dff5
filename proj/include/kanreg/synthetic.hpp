#pragma once

#include <cstdint>

#include "kanreg/metrics.hpp"
#include "kanreg/volume.hpp"

namespace kanreg {

struct SyntheticCase {
  Volume fixed;
  Volume moving;
  Mask mask;
  std::vector<double> gt_field;  // voxel units, xyz interleaved
  LandmarkSet landmarks_fixed;
  LandmarkSet landmarks_moving;
  double max_displacement_vox = 0.0;
  double mean_displacement_vox = 0.0;
};

struct SyntheticConfig {
  std::array<int, 3> dims{48, 48, 48};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  int gaussian_blobs = 400;
  double amplitude_vox = 2.3;  // per-axis sinusoid amplitude
  int margin = 4;              // mask excludes this many border voxels
  int landmarks = 100;
};

// Textured moving volume (sum of random Gaussians over a broad gradient),
// smooth sinusoidal ground-truth displacement, fixed = moving resampled
// through it, and paired landmarks l_m = l_f + U(l_f).
SyntheticCase make_synthetic_case(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace kanreg
