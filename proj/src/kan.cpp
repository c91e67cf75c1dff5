#include "kanreg/kan.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kanreg {

namespace {

Mat uniform_matrix(int rows, int cols, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

DegreeSet layer_degrees(const BasisConfig& cfg, std::mt19937_64& rng) {
  switch (cfg.mode) {
    case BasisConfig::Mode::Fixed:
      return full_degree_set(cfg.max_degree);
    case BasisConfig::Mode::Randomized:
      return sample_degree_set(cfg.sample_count, cfg.sample_max, rng);
    case BasisConfig::Mode::Adaptive:
      // Training-time superset; selection narrows it per iteration.
      return full_degree_set(cfg.sample_max);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

KanModel init_model(const BasisConfig& config, const std::vector<int>& widths,
                    std::mt19937_64& rng) {
  config.validate();
  if (widths.size() < 2) throw std::invalid_argument("init_model: need >= 2 widths");
  if (widths.front() != 3 || widths.back() != 3)
    throw std::invalid_argument("init_model: first and last width must be 3");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("init_model: widths must be positive");

  KanModel model;
  model.basis = config;
  for (std::size_t m = 0; m + 1 < widths.size(); ++m) {
    const int in = widths[m], out = widths[m + 1];
    const bool last = (m + 2 == widths.size());
    KanLayer layer;
    layer.degrees = layer_degrees(config, rng);
    const double cscale = last ? 0.0 : 1.0 / (double(in) * layer.degrees.size());
    for (int j = 0; j < layer.degrees.size(); ++j)
      layer.coeffs.push_back(last ? Mat::Zero(in, out)
                                  : uniform_matrix(in, out, cscale, rng));
    layer.skip = last ? Mat::Zero(in, out)
                      : uniform_matrix(in, out, std::sqrt(1.0 / in), rng);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::int64_t count_parameters(const KanModel& model) {
  std::int64_t n = 0;
  for (const auto& l : model.layers)
    n += std::int64_t(l.in()) * l.out() * (l.degrees.size() + 1);
  return n;
}

Mat model_forward(const KanModel& model, const Mat& coords) {
  if (coords.cols() != 3) throw std::invalid_argument("model_forward: coords must be batch x 3");
  return model_forward(plain_params<double>(model), coords);
}

void model_forward_dual(const KanModel& model, const Mat& coords, Mat& displacement,
                        std::array<Mat, 3>& jac) {
  if (coords.cols() != 3) throw std::invalid_argument("model_forward_dual: coords must be batch x 3");
  const int n = static_cast<int>(coords.rows());
  Dual3<Mat> x;
  x.v = coords;
  for (int k = 0; k < 3; ++k) {
    x.d[k] = Mat::Zero(n, 3);
    x.d[k].col(k).setOnes();
  }
  Dual3<Mat> u = model_forward(plain_params<double>(model), x);
  displacement = std::move(u.v);
  for (int k = 0; k < 3; ++k) jac[k] = std::move(u.d[k]);
}

std::vector<Eigen::Matrix3d> spatial_jacobian(const KanModel& model, const Mat& coords) {
  Mat u;
  std::array<Mat, 3> d;
  model_forward_dual(model, coords, u, d);
  std::vector<Eigen::Matrix3d> out(coords.rows());
  for (int p = 0; p < coords.rows(); ++p)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) out[p](i, k) = d[k](p, i);
  return out;
}

// ---- adaptive basis ----

AdaptiveBasisState init_adaptive_state(int k, int K, std::mt19937_64& rng) {
  if (k < 1 || k > K) throw std::invalid_argument("adaptive: need 1 <= k <= K");
  AdaptiveBasisState st;
  st.k = k;
  st.K = K;
  std::normal_distribution<double> gauss(0.0, 1.0);
  st.z.resize(K);
  for (int i = 0; i < K; ++i) st.z[i] = gauss(rng);
  const int hidden = 2 * K;
  st.w1 = uniform_matrix(K, hidden, std::sqrt(1.0 / K), rng);
  st.b1 = Mat::Zero(1, hidden);
  st.w2 = uniform_matrix(hidden, K, std::sqrt(1.0 / hidden), rng);
  st.b2 = Mat::Zero(1, K);
  return st;
}

Vec adaptive_weights(const AdaptiveBasisState& state) {
  Mat h = (state.z.transpose() * state.w1 + state.b1).array().tanh().matrix();
  Mat w = h * state.w2 + state.b2;
  return w.transpose();
}

void adaptive_schedule_update(AdaptiveBasisState& state, int iteration, int total) {
  if (iteration < 0 || iteration >= total)
    throw std::invalid_argument("adaptive_schedule_update: iteration out of range");
  const double cutoff = 0.75 * total;
  const bool freeze = double(iteration) >= cutoff;
  if (state.frozen && !freeze)
    throw std::logic_error("adaptive: cannot unfreeze a frozen selection");
  state.noise_std = freeze ? 0.0 : 0.3 * std::max(0.0, 1.0 - double(iteration) / cutoff);
  if (freeze && !state.frozen) {
    state.cached_w = adaptive_weights(state);
    std::mt19937_64 unused(0);
    state.cached_selection = noisy_topk(state.cached_w, state.k, 0.0, unused);
    state.frozen = true;
  }
}

std::vector<int> noisy_topk(const Vec& w, int k, double noise_std, std::mt19937_64& rng) {
  const int K = static_cast<int>(w.size());
  if (k < 1 || k > K) throw std::invalid_argument("noisy_topk: need 1 <= k <= K");
  std::vector<std::pair<double, int>> scored(K);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < K; ++i) {
    const double noise = noise_std > 0.0 ? noise_std * gauss(rng) : 0.0;
    scored[i] = {w[i] + noise, i + 1};  // degrees are 1-based
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // tie: lowest degree wins
  });
  std::vector<int> sel(k);
  for (int i = 0; i < k; ++i) sel[i] = scored[i].second;
  std::sort(sel.begin(), sel.end());
  return sel;
}

KanLayer fold_adaptive(const KanLayer& full, const Vec& w, const std::vector<int>& selection) {
  if (full.degrees.size() != static_cast<int>(w.size()) + 1)
    throw std::invalid_argument("fold_adaptive: layer must hold degrees 0..K");
  KanLayer out;
  out.skip = full.skip;
  out.degrees.degrees.push_back(0);
  out.coeffs.push_back(full.coeffs[0]);  // degree 0 stays unweighted
  for (int d : selection) {
    const double s = 1.0 / (1.0 + std::exp(-w[d - 1]));
    out.degrees.degrees.push_back(d);
    out.coeffs.push_back(full.coeffs[d] * s);
  }
  return out;
}

Mat adaptive_layer_forward(const KanLayer& full, AdaptiveBasisState& state, const Mat& x,
                           std::mt19937_64& rng) {
  Vec w = state.frozen ? state.cached_w : adaptive_weights(state);
  std::vector<int> sel = state.frozen
                             ? state.cached_selection
                             : noisy_topk(w, state.k, state.noise_std, rng);
  KanLayer eff = fold_adaptive(full, w, sel);
  LayerParamsT<Mat> p;
  p.degrees = &eff.degrees;
  p.coeffs = eff.coeffs;
  p.skip = eff.skip;
  return layer_forward(p, x);
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[4] = {'K', 'A', 'N', 'R'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_matrix(std::ostream& os, const Mat& m) {
  put<std::int64_t>(os, m.rows());
  put<std::int64_t>(os, m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) put<double>(os, m(i, j));
}
Mat get_matrix(std::istream& is) {
  const auto rows = get<std::int64_t>(is);
  const auto cols = get<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (1LL << 32))
    throw std::runtime_error("checkpoint: implausible matrix size");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = get<double>(is);
  return m;
}

}  // namespace

void save_model(const KanModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(model.basis.mode));
  put<std::int32_t>(os, model.basis.max_degree);
  put<std::int32_t>(os, model.basis.sample_count);
  put<std::int32_t>(os, model.basis.sample_max);
  put<std::uint64_t>(os, model.seed);
  put<std::int32_t>(os, static_cast<std::int32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    put<std::int32_t>(os, l.in());
    put<std::int32_t>(os, l.out());
    put<std::int32_t>(os, l.degrees.size());
    for (int d : l.degrees.degrees) put<std::int32_t>(os, d);
    for (const auto& c : l.coeffs) put_matrix(os, c);
    put_matrix(os, l.skip);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

KanModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic bytes: " + path);
  if (get<std::uint32_t>(is) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version: " + path);
  KanModel model;
  model.basis.mode = static_cast<BasisConfig::Mode>(get<std::uint8_t>(is));
  model.basis.max_degree = get<std::int32_t>(is);
  model.basis.sample_count = get<std::int32_t>(is);
  model.basis.sample_max = get<std::int32_t>(is);
  model.seed = get<std::uint64_t>(is);
  const int nlayers = get<std::int32_t>(is);
  for (int m = 0; m < nlayers; ++m) {
    KanLayer l;
    const int in = get<std::int32_t>(is);
    const int out = get<std::int32_t>(is);
    const int nd = get<std::int32_t>(is);
    for (int j = 0; j < nd; ++j) l.degrees.degrees.push_back(get<std::int32_t>(is));
    for (int j = 0; j < nd; ++j) {
      l.coeffs.push_back(get_matrix(is));
      if (l.coeffs.back().rows() != in || l.coeffs.back().cols() != out)
        throw std::runtime_error("checkpoint: coefficient shape mismatch");
    }
    l.skip = get_matrix(is);
    if (l.skip.rows() != in || l.skip.cols() != out)
      throw std::runtime_error("checkpoint: skip shape mismatch");
    model.layers.push_back(std::move(l));
  }
  return model;
}

}  // namespace kanreg
