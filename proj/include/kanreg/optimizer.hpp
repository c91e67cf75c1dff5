#pragma once

#include <cstdint>
#include <vector>

#include "kanreg/types.hpp"

namespace kanreg {

struct AdamState {
  std::vector<Mat> m;  // first moments, one per parameter matrix
  std::vector<Mat> v;  // second moments
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Constant for the first constant_fraction of the run, then cosine annealing
// down to final_lr at the last iteration.
struct LrSchedule {
  double base_lr = 1e-4;
  int total_iters = 1500;
  double constant_fraction = 0.5;
  double final_lr = 0.0;
};

double lr_at(int iteration, const LrSchedule& sched);

// Standard bias-corrected Adam over a list of parameter matrices.
// Throws on non-finite gradients (the engine attaches seed / iteration info).
// Entries with frozen[i] != 0 are left untouched (value and moments).
void adam_step(AdamState& state, const std::vector<Mat*>& params,
               const std::vector<Mat>& grads, double lr,
               const std::vector<std::uint8_t>* frozen = nullptr);

}  // namespace kanreg
