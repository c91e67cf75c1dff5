#include "kanreg/registration.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kanreg {

void RegistrationConfig::validate() const {
  basis.validate();
  if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("config: batch size must be >= 2");
  if (weights.lambda < 0 || weights.gamma < 0 || weights.epsilon < 0)
    throw std::invalid_argument("config: loss weights must be >= 0");
  if (!(constant_fraction > 0.0 && constant_fraction < 1.0))
    throw std::invalid_argument("config: constant fraction must be in (0, 1)");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (widths.size() < 2 || widths.front() != 3 || widths.back() != 3)
    throw std::invalid_argument("config: widths must start and end at 3");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("config: widths must be positive");
}

namespace {

template <class S>
struct TrainLayer {
  LayerParamsT<VarT<S>> params;  // adaptive: coeffs hold the full 0..K slices
  bool adaptive = false;
  VarT<S> w_raw;  // 1 x K, adaptive only
  std::vector<int> selection;
};

template <class S, class X>
X train_layer_forward(const TrainLayer<S>& layer, const X& x) {
  if (!layer.adaptive) return layer_forward(layer.params, x);
  X u = clamp_unit(tanh_ew(x));
  X theta = acos_ew(u);
  X acc = matmul(silu_ew(x), layer.params.skip);
  acc = add(acc, matmul(cos_ew(scale(theta, 0.0)), layer.params.coeffs[0]));
  for (int d : layer.selection) {
    X basis = cos_ew(scale(theta, double(d)));
    VarT<S> mult = sigmoid_ew(elem_of(layer.w_raw, 0, d - 1));
    acc = add(acc, mul_bc(matmul(basis, layer.params.coeffs[d]), mult));
  }
  return acc;
}

template <class S>
struct TrainContext {
  std::vector<Mat*> host_params;
  std::vector<std::uint8_t> frozen;
  std::vector<VarT<S>> leaves;
  std::vector<TrainLayer<S>> layers;
};

// Bind model (and adaptive MLP) parameters as tape leaves for one iteration.
template <class S>
TrainContext<S> bind_parameters(TapeT<S>& tape, KanModel& model,
                                std::vector<AdaptiveBasisState>& adaptive,
                                std::mt19937_64& rng) {
  TrainContext<S> ctx;
  auto bind = [&](Mat& host, bool frozen) {
    VarT<S> leaf = tape.leaf(host.cast<S>());
    ctx.host_params.push_back(&host);
    ctx.frozen.push_back(frozen ? 1 : 0);
    ctx.leaves.push_back(leaf);
    return leaf;
  };
  const bool is_adaptive = model.basis.mode == BasisConfig::Mode::Adaptive;
  for (std::size_t m = 0; m < model.layers.size(); ++m) {
    KanLayer& l = model.layers[m];
    TrainLayer<S> tl;
    tl.params.degrees = &l.degrees;
    for (auto& c : l.coeffs) tl.params.coeffs.push_back(bind(c, false));
    tl.params.skip = bind(l.skip, false);
    if (is_adaptive) {
      AdaptiveBasisState& st = adaptive[m];
      tl.adaptive = true;
      VarT<S> w1 = bind(st.w1, st.frozen);
      VarT<S> b1 = bind(st.b1, st.frozen);
      VarT<S> w2 = bind(st.w2, st.frozen);
      VarT<S> b2 = bind(st.b2, st.frozen);
      DenseMatrix<S> zrow = st.z.transpose().cast<S>();
      VarT<S> zc = tape.constant(std::move(zrow));
      VarT<S> h = tanh_ew(add(matmul(zc, w1), b1));
      tl.w_raw = add(matmul(h, w2), b2);
      if (st.frozen) {
        tl.selection = st.cached_selection;
      } else {
        const auto& wv = tape.val(tl.w_raw);
        Vec w(wv.cols());
        for (int i = 0; i < wv.cols(); ++i) w[i] = double(wv(0, i));
        tl.selection = noisy_topk(w, st.k, st.noise_std, rng);
      }
    }
    ctx.layers.push_back(std::move(tl));
  }
  return ctx;
}

template <class S>
void train(KanModel& model, std::vector<AdaptiveBasisState>& adaptive,
           const Volume& fixed, const Volume& moving, const Mask& mask,
           const RegistrationConfig& cfg, std::uint64_t seed,
           std::mt19937_64& rng, std::vector<IterRecord>& history) {
  LrSchedule sched;
  sched.base_lr = cfg.base_lr;
  sched.total_iters = cfg.iterations;
  sched.constant_fraction = cfg.constant_fraction;

  TapeT<S> tape;
  AdamState adam;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    for (auto& st : adaptive) adaptive_schedule_update(st, iter, cfg.iterations);

    tape.clear();
    TrainContext<S> ctx = bind_parameters<S>(tape, model, adaptive, rng);

    CoordinateBatch batch = sample_batch(mask, fixed.dims, cfg.batch_size, rng);
    Vec fvals = trilinear_sample(fixed, batch.points);

    VarT<S> coords = tape.constant(batch.points.cast<S>());
    Dual3<VarT<S>> x;
    x.v = coords;
    for (int k = 0; k < 3; ++k) {
      DenseMatrix<S> t = DenseMatrix<S>::Zero(cfg.batch_size, 3);
      t.col(k).setOnes();
      x.d[k] = tape.constant(std::move(t));
    }

    Dual3<VarT<S>> u = x;
    bool first = true;
    for (const auto& layer : ctx.layers) {
      u = train_layer_forward(layer, first ? x : u);
      first = false;
    }

    VarT<S> phi = add(coords, u.v);
    VarT<S> warped = sample_trilinear(tape, moving, phi);
    VarT<S> fixed_vals = tape.constant(fvals.cast<S>());
    NccResult<S> ncc = ncc_loss(tape, fixed_vals, warped);
    JacobianBatchT<S> grad_u = jacobian_from_tangents<S>(u.d, false);
    JacobianBatchT<S> j_phi = jacobian_from_tangents<S>(u.d, true);
    VarT<S> smooth = tv_loss(grad_u);
    VarT<S> fold = jdet_loss(j_phi, cfg.weights.epsilon);
    VarT<S> total = total_loss(ncc.value, smooth, fold, cfg.weights);

    IterRecord rec;
    rec.data = double(tape.val(ncc.value)(0, 0));
    rec.smooth = double(tape.val(smooth)(0, 0));
    rec.fold = double(tape.val(fold)(0, 0));
    rec.total = double(tape.val(total)(0, 0));
    rec.lr = lr_at(iter, sched);
    if (!std::isfinite(rec.total))
      throw std::runtime_error("registration: non-finite loss at iteration " +
                               std::to_string(iter) + " (seed " + std::to_string(seed) + ")");

    tape.backward(total);
    std::vector<Mat> grads;
    grads.reserve(ctx.leaves.size());
    for (const auto& leaf : ctx.leaves)
      grads.push_back(tape.adjoint(leaf).template cast<double>());
    try {
      adam_step(adam, ctx.host_params, grads, rec.lr, &ctx.frozen);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " at iteration " +
                               std::to_string(iter) + " (seed " + std::to_string(seed) + ")");
    }
    history.push_back(rec);
  }
}

}  // namespace

RegistrationResult register_pair(const Volume& fixed, const Volume& moving,
                                 const Mask& mask, const RegistrationConfig& cfg,
                                 std::uint64_t seed) {
  cfg.validate();
  fixed.validate();
  moving.validate();
  if (fixed.dims != moving.dims || fixed.spacing != moving.spacing)
    throw std::invalid_argument("registration: fixed and moving must share dims and spacing");
  if (mask.dims != fixed.dims)
    throw std::invalid_argument("registration: mask dims mismatch");
  if (mask.empty()) throw std::invalid_argument("registration: empty mask");

  Eigen::setNbThreads(cfg.threads);
  const auto t0 = std::chrono::steady_clock::now();

  RegistrationResult result;
  result.seed = seed;
  std::mt19937_64 rng(seed);
  result.model = init_model(cfg.basis, cfg.widths, rng);
  result.model.seed = seed;

  std::vector<AdaptiveBasisState> adaptive;
  if (cfg.basis.mode == BasisConfig::Mode::Adaptive)
    for (std::size_t m = 0; m < result.model.layers.size(); ++m)
      adaptive.push_back(init_adaptive_state(cfg.basis.sample_count, cfg.basis.sample_max, rng));

  if (cfg.single_precision)
    train<float>(result.model, adaptive, fixed, moving, mask, cfg, seed, rng, result.history);
  else
    train<double>(result.model, adaptive, fixed, moving, mask, cfg, seed, rng, result.history);

  if (cfg.basis.mode == BasisConfig::Mode::Adaptive) {
    // Export the effective model: selected degrees with sigmoid weights folded.
    for (std::size_t m = 0; m < result.model.layers.size(); ++m) {
      AdaptiveBasisState& st = adaptive[m];
      if (!st.frozen) {
        st.cached_w = adaptive_weights(st);
        std::mt19937_64 unused(0);
        st.cached_selection = noisy_topk(st.cached_w, st.k, 0.0, unused);
      }
      result.model.layers[m] =
          fold_adaptive(result.model.layers[m], st.cached_w, st.cached_selection);
    }
  }

  result.field = dense_displacement_field(result.model, fixed.dims);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

MultiSeedReport run_seeds(const Volume& fixed, const Volume& moving, const Mask& mask,
                          const RegistrationConfig& cfg,
                          const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("run_seeds: need at least one seed");
  MultiSeedReport report;
  for (std::uint64_t seed : seeds) {
    try {
      report.runs.push_back(register_pair(fixed, moving, mask, cfg, seed));
    } catch (const std::exception& e) {
      RegistrationResult failed;
      failed.seed = seed;
      failed.ok = false;
      failed.error = e.what();
      report.runs.push_back(std::move(failed));
    }
  }
  auto aggregate = [&](const std::string& name, auto getter) {
    std::vector<double> vals;
    for (const auto& r : report.runs)
      if (r.ok) vals.push_back(getter(r));
    if (vals.empty()) return;
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
    report.aggregate[name] = {mean, sd};
  };
  aggregate("final_total", [](const RegistrationResult& r) { return r.history.back().total; });
  aggregate("final_data", [](const RegistrationResult& r) { return r.history.back().data; });
  aggregate("final_smooth", [](const RegistrationResult& r) { return r.history.back().smooth; });
  aggregate("final_fold", [](const RegistrationResult& r) { return r.history.back().fold; });
  aggregate("seconds", [](const RegistrationResult& r) { return r.seconds; });
  return report;
}

}  // namespace kanreg
