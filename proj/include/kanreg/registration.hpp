#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kanreg/kan.hpp"
#include "kanreg/losses.hpp"
#include "kanreg/optimizer.hpp"
#include "kanreg/volume.hpp"

namespace kanreg {

struct RegistrationConfig {
  BasisConfig basis;
  std::vector<int> widths{3, 70, 70, 3};
  int iterations = 1500;
  int batch_size = 10000;
  LossWeights weights;  // lambda 0.4, gamma 15, epsilon 0.1
  double base_lr = 1e-4;
  double constant_fraction = 0.5;
  bool single_precision = false;
  int threads = 1;

  void validate() const;
};

struct IterRecord {
  double data = 0.0;
  double smooth = 0.0;
  double fold = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct RegistrationResult {
  KanModel model;
  std::vector<IterRecord> history;
  std::vector<double> field;  // dense displacement, voxel units, xyz interleaved
  double seconds = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
};

// One instance-specific optimization: sample batch -> forward with spatial
// tangents -> warp moving intensities -> combined loss -> backward -> Adam.
RegistrationResult register_pair(const Volume& fixed, const Volume& moving,
                                 const Mask& mask, const RegistrationConfig& cfg,
                                 std::uint64_t seed);

struct MultiSeedReport {
  std::vector<RegistrationResult> runs;
  // metric name -> (mean, std) over successful runs
  std::map<std::string, std::pair<double, double>> aggregate;
};

// Independent runs per seed; per-run failures are recorded, not propagated.
MultiSeedReport run_seeds(const Volume& fixed, const Volume& moving, const Mask& mask,
                          const RegistrationConfig& cfg,
                          const std::vector<std::uint64_t>& seeds);

}  // namespace kanreg
