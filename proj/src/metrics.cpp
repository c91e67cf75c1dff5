#include "kanreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace kanreg {

TreResult tre(const LandmarkSet& fixed_lms, const LandmarkSet& moving_lms,
              const KanModel& model, const std::array<int, 3>& dims,
              const std::array<double, 3>& spacing) {
  if (fixed_lms.count() != moving_lms.count())
    throw std::invalid_argument("tre: landmark counts differ");
  if (fixed_lms.count() == 0) throw std::invalid_argument("tre: empty landmark set");

  const int n = fixed_lms.count();
  Mat pts(n, 3);
  for (int i = 0; i < n; ++i) {
    auto c = voxel_to_normalized(fixed_lms.points[i], dims);
    for (int k = 0; k < 3; ++k) pts(i, k) = c[k];
  }

  Mat u = model_forward(model, pts);

  TreResult out;
  out.per_landmark_mm.resize(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double e2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      double u_vox = u(i, k) * 0.5 * (dims[k] - 1);
      double mapped = fixed_lms.points[i][k] + u_vox;
      double d = (mapped - moving_lms.points[i][k]) * spacing[k];
      e2 += d * d;
    }
    out.per_landmark_mm[i] = std::sqrt(e2);
    sum += out.per_landmark_mm[i];
  }
  out.mean = sum / n;
  double ss = 0.0;
  for (double e : out.per_landmark_mm) ss += (e - out.mean) * (e - out.mean);
  out.stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return out;
}

ThresholdTable threshold_table(const std::vector<double>& errors_mm) {
  if (errors_mm.empty()) throw std::invalid_argument("threshold_table: no errors");
  ThresholdTable t;
  const double n = double(errors_mm.size());
  for (double thr : t.thresholds_mm) {
    std::int64_t c = std::count_if(errors_mm.begin(), errors_mm.end(),
                                   [&](double e) { return e <= thr; });
    t.within_pct.push_back(100.0 * c / n);
  }
  t.outlier_pct = 100.0 - t.within_pct.back();
  return t;
}

DiceResult dice(const LabelVolume& warped, const LabelVolume& fixed) {
  if (warped.dims != fixed.dims) throw std::invalid_argument("dice: dims differ");
  if (warped.labels.size() != fixed.labels.size())
    throw std::invalid_argument("dice: size mismatch");

  std::map<int, std::array<std::int64_t, 3>> tally;  // label -> {|A|, |B|, |A∩B|}
  for (std::size_t i = 0; i < warped.labels.size(); ++i) {
    int a = warped.labels[i];
    int b = fixed.labels[i];
    if (a > 0) ++tally[a][0];
    if (b > 0) ++tally[b][1];
    if (a > 0 && a == b) ++tally[a][2];
  }
  if (tally.empty()) throw std::invalid_argument("dice: no foreground labels");

  DiceResult r;
  double sum = 0.0;
  for (const auto& [label, c] : tally) {
    double d = 2.0 * c[2] / double(c[0] + c[1]);
    r.per_label.emplace_back(label, d);
    sum += d;
  }
  r.mean = sum / double(r.per_label.size());
  return r;
}

namespace {

// 1D squared-distance transform (Felzenszwalb & Huttenlocher) on grid
// positions i*step. Entries with f == inf contribute no parabola.
void dt1d(std::vector<double>& f, double step) {
  const int n = static_cast<int>(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  static thread_local std::vector<int> v;
  static thread_local std::vector<double> z, out;
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  out.assign(n, inf);
  auto pos = [&](int i) { return i * step; };

  int k = -1;  // index of rightmost parabola in the lower envelope
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    double s = -inf;
    while (k >= 0) {
      int p = v[k];
      s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) /
          (2 * pos(q) - 2 * pos(p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : s;
    z[k + 1] = inf;
  }
  if (k < 0) return;  // no seeds on this line

  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < pos(q)) ++k;
    int p = v[k];
    out[q] = (pos(q) - pos(p)) * (pos(q) - pos(p)) + f[p];
  }
  f = out;
}

// Exact Euclidean distance (mm) from every voxel to the seed set.
std::vector<double> distance_transform(const std::vector<bool>& seed,
                                       const std::array<int, 3>& dims,
                                       const std::array<double, 3>& spacing) {
  const double inf = std::numeric_limits<double>::infinity();
  const int nx = dims[0], ny = dims[1], nz = dims[2];
  std::vector<double> d(seed.size());
  for (std::size_t i = 0; i < seed.size(); ++i) d[i] = seed[i] ? 0.0 : inf;

  auto at = [&](int x, int y, int z) -> double& {
    return d[(std::size_t(z) * ny + y) * nx + x];
  };
  std::vector<double> line;

  line.resize(nx);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) line[x] = at(x, y, z);
      dt1d(line, spacing[0]);
      for (int x = 0; x < nx; ++x) at(x, y, z) = line[x];
    }
  line.resize(ny);
  for (int z = 0; z < nz; ++z)
    for (int x = 0; x < nx; ++x) {
      for (int y = 0; y < ny; ++y) line[y] = at(x, y, z);
      dt1d(line, spacing[1]);
      for (int y = 0; y < ny; ++y) at(x, y, z) = line[y];
    }
  line.resize(nz);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      for (int z = 0; z < nz; ++z) line[z] = at(x, y, z);
      dt1d(line, spacing[2]);
      for (int z = 0; z < nz; ++z) at(x, y, z) = line[z];
    }
  for (double& v : d) v = std::isfinite(v) ? std::sqrt(v) : v;
  return d;
}

std::vector<bool> boundary_mask(const LabelVolume& vol, int label) {
  const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
  std::vector<bool> b(vol.labels.size(), false);
  auto lab = [&](int x, int y, int z) { return vol.labels[vol.index(x, y, z)]; };
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (lab(x, y, z) != label) continue;
        bool edge = x == 0 || x == nx - 1 || y == 0 || y == ny - 1 || z == 0 ||
                    z == nz - 1;
        if (!edge) {
          edge = lab(x - 1, y, z) != label || lab(x + 1, y, z) != label ||
                 lab(x, y - 1, z) != label || lab(x, y + 1, z) != label ||
                 lab(x, y, z - 1) != label || lab(x, y, z + 1) != label;
        }
        if (edge) b[vol.index(x, y, z)] = true;
      }
  return b;
}

double percentile95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const int n = static_cast<int>(v.size());
  if (n == 1) return v[0];
  double rank = 0.95 * (n - 1);
  int lo = static_cast<int>(std::floor(rank));
  int hi = std::min(lo + 1, n - 1);
  double frac = rank - lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

double hd95(const LabelVolume& warped, const LabelVolume& fixed, int label) {
  if (warped.dims != fixed.dims) throw std::invalid_argument("hd95: dims differ");
  std::vector<bool> sa = boundary_mask(warped, label);
  std::vector<bool> sb = boundary_mask(fixed, label);
  std::int64_t na = std::count(sa.begin(), sa.end(), true);
  std::int64_t nb = std::count(sb.begin(), sb.end(), true);
  if (na == 0 || nb == 0)
    throw std::invalid_argument("hd95: label absent from one volume");

  std::vector<double> da = distance_transform(sa, warped.dims, warped.spacing);
  std::vector<double> db = distance_transform(sb, fixed.dims, fixed.spacing);

  std::vector<double> d_ab, d_ba;
  d_ab.reserve(na);
  d_ba.reserve(nb);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i]) d_ab.push_back(db[i]);
    if (sb[i]) d_ba.push_back(da[i]);
  }
  return std::max(percentile95(std::move(d_ab)), percentile95(std::move(d_ba)));
}

double hd95_mean(const LabelVolume& warped, const LabelVolume& fixed) {
  std::set<int> la(warped.labels.begin(), warped.labels.end());
  std::set<int> lb(fixed.labels.begin(), fixed.labels.end());
  std::vector<int> common;
  for (int l : la)
    if (l > 0 && lb.count(l)) common.push_back(l);
  if (common.empty()) throw std::invalid_argument("hd95_mean: no common labels");
  double sum = 0.0;
  for (int l : common) sum += hd95(warped, fixed, l);
  return sum / double(common.size());
}

namespace {

// det(I + dU) at one voxel from the interleaved voxel-unit field; central
// differences inside, one-sided at the volume border.
double det_at(const std::vector<double>& field, const std::array<int, 3>& dims,
              int x, int y, int z) {
  auto u = [&](int xx, int yy, int zz, int c) {
    return field[((std::size_t(zz) * dims[1] + yy) * dims[0] + xx) * 3 + c];
  };
  Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
  const int p[3] = {x, y, z};
  for (int k = 0; k < 3; ++k) {
    int lo = std::max(p[k] - 1, 0), hi = std::min(p[k] + 1, dims[k] - 1);
    double denom = double(hi - lo);
    int a[3] = {x, y, z}, b[3] = {x, y, z};
    a[k] = hi;
    b[k] = lo;
    for (int c = 0; c < 3; ++c)
      J(c, k) += (u(a[0], a[1], a[2], c) - u(b[0], b[1], b[2], c)) / denom;
  }
  return J.determinant();
}

}  // namespace

double njd(const std::vector<double>& field, const std::array<int, 3>& dims,
           const Mask* mask) {
  const std::size_t nvox = std::size_t(dims[0]) * dims[1] * dims[2];
  if (field.size() != nvox * 3) throw std::invalid_argument("njd: field size mismatch");
  if (mask && mask->dims != dims) throw std::invalid_argument("njd: mask dims mismatch");

  std::int64_t folded = 0, total = 0;
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i) {
        if (mask && mask->data[i] == 0) continue;
        ++total;
        if (det_at(field, dims, x, y, z) <= 0.0) ++folded;
      }
  if (total == 0) throw std::invalid_argument("njd: empty mask");
  return 100.0 * double(folded) / double(total);
}

Volume jacobian_map(const std::vector<double>& field, const std::array<int, 3>& dims) {
  const std::size_t nvox = std::size_t(dims[0]) * dims[1] * dims[2];
  if (field.size() != nvox * 3)
    throw std::invalid_argument("jacobian_map: field size mismatch");
  Volume out;
  out.dims = dims;
  out.data.resize(nvox);
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x, ++i)
        out.data[i] = det_at(field, dims, x, y, z);
  return out;
}

}  // namespace kanreg
