#include "kanreg/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace kanreg {

double lr_at(int iteration, const LrSchedule& sched) {
  if (iteration < 0 || iteration >= sched.total_iters)
    throw std::invalid_argument("lr_at: iteration out of range");
  const double pivot = sched.constant_fraction * sched.total_iters;
  if (iteration < pivot) return sched.base_lr;
  const double span = sched.total_iters - pivot;
  const double t = span > 0.0 ? (iteration - pivot) / span : 1.0;
  const double w = 0.5 * (1.0 + std::cos(M_PI * t));
  return sched.final_lr + (sched.base_lr - sched.final_lr) * w;
}

void adam_step(AdamState& state, const std::vector<Mat*>& params,
               const std::vector<Mat>& grads, double lr,
               const std::vector<std::uint8_t>* frozen) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter / gradient count mismatch");
  if (lr < 0.0) throw std::invalid_argument("adam_step: negative learning rate");
  if (state.m.empty()) {
    for (const Mat* p : params) {
      state.m.push_back(Mat::Zero(p->rows(), p->cols()));
      state.v.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (!grads[i].allFinite()) throw std::runtime_error("adam_step: non-finite gradient");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (frozen && (*frozen)[i]) continue;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i].array().matrix() +
                 (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    Mat mhat = state.m[i] / c1;
    Mat vhat = state.v[i] / c2;
    params[i]->array() -= lr * mhat.array() / (vhat.array().sqrt() + state.eps);
  }
}

}  // namespace kanreg
