#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kanreg/chebyshev.hpp"
#include "kanreg/ops.hpp"
#include "kanreg/types.hpp"

namespace kanreg {

// One Chebyshev KAN layer: per-degree coefficient slices (in x out each,
// conceptually C[i, o, d]) plus a learnable silu skip connection.
struct KanLayer {
  DegreeSet degrees;
  std::vector<Mat> coeffs;  // one in x out slice per degree, same order as degrees
  Mat skip;                 // in x out

  int in() const { return static_cast<int>(skip.rows()); }
  int out() const { return static_cast<int>(skip.cols()); }
};

struct KanModel {
  std::vector<KanLayer> layers;
  BasisConfig basis;
  std::uint64_t seed = 0;

  int input_width() const { return layers.empty() ? 0 : layers.front().in(); }
  int output_width() const { return layers.empty() ? 0 : layers.back().out(); }
};

// Coefficients get scaled uniform noise (scale 1 / (fan-in * |degrees|)), the
// skip matrix fan-in-scaled uniform, and the final layer is zero-initialized
// so the deformation starts as the identity map.
KanModel init_model(const BasisConfig& config, const std::vector<int>& widths,
                    std::mt19937_64& rng);

std::int64_t count_parameters(const KanModel& model);

// ---- generic forward (plain, tape, or dual backend picked by X / P) ----

template <class P>
struct LayerParamsT {
  const DegreeSet* degrees = nullptr;
  std::vector<P> coeffs;
  P skip;
};

template <class P, class X>
X layer_forward(const LayerParamsT<P>& layer, const X& x) {
  X u = clamp_unit(tanh_ew(x));
  X theta = acos_ew(u);
  X acc = matmul(silu_ew(x), layer.skip);
  for (std::size_t j = 0; j < layer.coeffs.size(); ++j) {
    X basis = cos_ew(scale(theta, double(layer.degrees->degrees[j])));
    acc = add(acc, matmul(basis, layer.coeffs[j]));
  }
  return acc;
}

template <class P, class X>
X model_forward(const std::vector<LayerParamsT<P>>& layers, const X& x) {
  X h = x;
  for (const auto& layer : layers) h = layer_forward(layer, h);
  return h;
}

template <class S>
std::vector<LayerParamsT<DenseMatrix<S>>> plain_params(const KanModel& model) {
  std::vector<LayerParamsT<DenseMatrix<S>>> out;
  out.reserve(model.layers.size());
  for (const auto& l : model.layers) {
    LayerParamsT<DenseMatrix<S>> p;
    p.degrees = &l.degrees;
    for (const auto& c : l.coeffs) p.coeffs.push_back(c.template cast<S>());
    p.skip = l.skip.template cast<S>();
    out.push_back(std::move(p));
  }
  return out;
}

// Displacement U at a batch of normalized coordinates (batch x 3).
Mat model_forward(const KanModel& model, const Mat& coords);

// U plus its spatial derivatives via 3-tangent dual numbers:
// jac[k].col(i) = dU_i / dx_k per batch row, in normalized units.
void model_forward_dual(const KanModel& model, const Mat& coords, Mat& displacement,
                        std::array<Mat, 3>& jac);

// Per-point 3x3 spatial Jacobian dU_i/dx_j of the displacement.
std::vector<Eigen::Matrix3d> spatial_jacobian(const KanModel& model, const Mat& coords);

// ---- adaptive (noisy top-k) basis selection ----

struct AdaptiveBasisState {
  Vec z;                  // fixed Gaussian latent, drawn once, length K
  Mat w1, b1, w2, b2;     // two-layer MLP, K -> 2K -> K, tanh hidden
  double noise_std = 0.3;
  bool frozen = false;
  int k = 0;
  int K = 0;
  Vec cached_w;                       // raw weights captured at freeze
  std::vector<int> cached_selection;  // selected degrees (subset of 1..K)
};

AdaptiveBasisState init_adaptive_state(int k, int K, std::mt19937_64& rng);

// Raw weight vector w = MLP(z), one entry per degree 1..K.
Vec adaptive_weights(const AdaptiveBasisState& state);

// noise_std decays linearly from 0.3 to zero at 75% of the run; the selection
// is frozen for the final 25% of iterations.
void adaptive_schedule_update(AdaptiveBasisState& state, int iteration, int total);

// Top-k degrees of w + Gaussian noise; ties broken by lowest degree.
std::vector<int> noisy_topk(const Vec& w, int k, double noise_std, std::mt19937_64& rng);

// Degrees {0} + selection with sigmoid(w_d) folded into the coefficient
// slices (degree 0 stays unweighted). Used for dense evaluation and export.
KanLayer fold_adaptive(const KanLayer& full, const Vec& w, const std::vector<int>& selection);

// Value-domain forward of one adaptive layer. Samples a fresh selection unless
// the state is frozen, in which case the cached selection is reused.
Mat adaptive_layer_forward(const KanLayer& full, AdaptiveBasisState& state, const Mat& x,
                           std::mt19937_64& rng);

// ---- checkpoint serialization ("KANR" container, little-endian f64) ----

void save_model(const KanModel& model, const std::string& path);
KanModel load_model(const std::string& path);

}  // namespace kanreg
