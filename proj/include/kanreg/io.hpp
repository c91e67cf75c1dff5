#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kanreg/metrics.hpp"
#include "kanreg/registration.hpp"
#include "kanreg/volume.hpp"

namespace kanreg {

// MetaImage-style volumes: a .mhd text header next to a raw little-endian
// data file. Supported element types: MET_UCHAR, MET_SHORT, MET_FLOAT,
// MET_DOUBLE; multi-channel data via ElementNumberOfChannels.
Volume read_volume(const std::string& mhd_path);
LabelVolume read_labels(const std::string& mhd_path);
Mask read_mask(const std::string& mhd_path);

// Dense displacement field (voxel units, xyz interleaved) as a 3-channel file.
std::vector<double> read_field(const std::string& mhd_path, std::array<int, 3>& dims);

void write_volume(const std::string& mhd_path, const Volume& vol,
                  const std::string& element_type = "MET_FLOAT");
void write_labels(const std::string& mhd_path, const LabelVolume& vol);
void write_field(const std::string& mhd_path, const std::vector<double>& field,
                 const std::array<int, 3>& dims, const std::array<double, 3>& spacing);

// Plain-text landmarks: one "x y z" triple per line (voxel coordinates);
// blank lines and '#' comments allowed. Errors carry the line number.
LandmarkSet read_landmarks(const std::string& path);
void write_landmarks(const std::string& path, const LandmarkSet& lms);

struct Manifest {
  std::string fixed_path;
  std::string moving_path;
  std::string mask_path;        // optional
  std::string landmarks_fixed;  // optional
  std::string landmarks_moving; // optional
  std::string labels_fixed;     // optional
  std::string labels_moving;    // optional
  std::string output_dir = ".";
  std::vector<std::uint64_t> seeds{0};
  RegistrationConfig config;
};

// JSON manifest; KANREG_OUTPUT_DIR in the environment overrides output_dir.
Manifest read_manifest(const std::string& path);

void write_history_csv(const std::string& path, const std::vector<IterRecord>& history);

struct SeedMetrics {
  std::uint64_t seed = 0;
  double final_total = 0.0;
  double tre_mean = 0.0;
  double tre_std = 0.0;
  double njd_pct = 0.0;
  double seconds = 0.0;
  std::optional<double> dice_mean;
  std::optional<double> hd95_mm;
};

void write_metrics_csv(const std::string& path, const std::vector<SeedMetrics>& rows);
void write_metrics_json(const std::string& path, const std::vector<SeedMetrics>& rows);

}  // namespace kanreg
