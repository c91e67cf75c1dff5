#pragma once

#include <array>
#include <vector>

#include "kanreg/kan.hpp"
#include "kanreg/volume.hpp"

namespace kanreg {

struct LandmarkSet {
  std::vector<std::array<double, 3>> points;  // voxel indices, possibly fractional
  int count() const { return static_cast<int>(points.size()); }
};

struct LabelVolume {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<int> labels;  // 0 = background

  std::int64_t index(int x, int y, int z) const {
    return (std::int64_t(z) * dims[1] + y) * dims[0] + x;
  }
};

struct TreResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_landmark_mm;
};

// Landmark error in mm: fixed-space landmarks mapped through Phi = x + U and
// compared against their moving-space counterparts.
TreResult tre(const LandmarkSet& fixed_lms, const LandmarkSet& moving_lms,
              const KanModel& model, const std::array<int, 3>& dims,
              const std::array<double, 3>& spacing);

struct ThresholdTable {
  std::vector<double> thresholds_mm{1.0, 2.0, 3.0};
  std::vector<double> within_pct;  // cumulative, one per threshold
  double outlier_pct = 0.0;        // > last threshold
};

ThresholdTable threshold_table(const std::vector<double>& errors_mm);

struct DiceResult {
  std::vector<std::pair<int, double>> per_label;
  double mean = 0.0;
};

DiceResult dice(const LabelVolume& warped, const LabelVolume& fixed);

// Symmetric 95th-percentile surface distance in mm for one label, percentile
// with linear interpolation between order statistics. Surfaces are foreground
// voxels with at least one differing 6-neighbor (volume border counts).
double hd95(const LabelVolume& warped, const LabelVolume& fixed, int label);

// Mean hd95 over labels present in both volumes.
double hd95_mean(const LabelVolume& warped, const LabelVolume& fixed);

// Percentage of voxels with det(J_Phi) <= 0; Jacobian by central differences
// on the dense voxel-unit displacement field (one-sided at boundaries).
// An optional mask restricts the denominator to in-mask voxels.
double njd(const std::vector<double>& field, const std::array<int, 3>& dims,
           const Mask* mask = nullptr);

// Per-voxel determinant map of Phi = x + U over the dense field.
Volume jacobian_map(const std::vector<double>& field, const std::array<int, 3>& dims);

}  // namespace kanreg
