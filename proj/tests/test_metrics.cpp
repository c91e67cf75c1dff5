#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kanreg/metrics.hpp"

using namespace kanreg;

namespace {

KanModel identity_model() {
  std::mt19937_64 rng(1);
  BasisConfig basis;
  basis.max_degree = 4;
  return init_model(basis, {3, 6, 3}, rng);
}

LabelVolume make_labels(const std::array<int, 3>& dims) {
  LabelVolume v;
  v.dims = dims;
  v.labels.assign(std::size_t(dims[0]) * dims[1] * dims[2], 0);
  return v;
}

// all-pairs brute-force hd95 oracle over explicit boundary voxel lists
double brute_hd95(const LabelVolume& a, const LabelVolume& b, int label) {
  auto boundary = [&](const LabelVolume& v) {
    std::vector<std::array<int, 3>> pts;
    for (int z = 0; z < v.dims[2]; ++z)
      for (int y = 0; y < v.dims[1]; ++y)
        for (int x = 0; x < v.dims[0]; ++x) {
          if (v.labels[v.index(x, y, z)] != label) continue;
          bool edge = x == 0 || x == v.dims[0] - 1 || y == 0 || y == v.dims[1] - 1 ||
                      z == 0 || z == v.dims[2] - 1;
          const int off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                 {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
          for (int n = 0; n < 6 && !edge; ++n) {
            int nx = x + off[n][0], ny = y + off[n][1], nz = z + off[n][2];
            if (v.labels[v.index(nx, ny, nz)] != label) edge = true;
          }
          if (edge) pts.push_back({x, y, z});
        }
    return pts;
  };
  auto pa = boundary(a), pb = boundary(b);
  auto dist = [&](const std::array<int, 3>& p, const std::vector<std::array<int, 3>>& set,
                  const std::array<double, 3>& sp) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) {
      double d2 = 0;
      for (int k = 0; k < 3; ++k) {
        double d = (p[k] - q[k]) * sp[k];
        d2 += d * d;
      }
      best = std::min(best, d2);
    }
    return std::sqrt(best);
  };
  auto pct95 = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double rank = 0.95 * (v.size() - 1);
    std::size_t lo = std::size_t(rank);
    double frac = rank - double(lo);
    return v[lo] * (1 - frac) + v[std::min(lo + 1, v.size() - 1)] * frac;
  };
  std::vector<double> dab, dba;
  for (const auto& p : pa) dab.push_back(dist(p, pb, a.spacing));
  for (const auto& p : pb) dba.push_back(dist(p, pa, b.spacing));
  return std::max(pct95(dab), pct95(dba));
}

}  // namespace

TEST_CASE("tre of the identity model on coincident landmarks is zero") {
  LandmarkSet lf, lm;
  lf.points = {{5, 6, 7}, {10, 3, 2}, {1, 1, 1}};
  lm = lf;
  TreResult r = tre(lf, lm, identity_model(), {16, 16, 16}, {1, 1, 1});
  CHECK(r.mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tre 3-4-5 triangle at unit spacing") {
  LandmarkSet lf, lm;
  lf.points = {{5, 5, 5}};
  lm.points = {{8, 9, 5}};
  TreResult r = tre(lf, lm, identity_model(), {16, 16, 16}, {1, 1, 1});
  CHECK(r.mean == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("tre respects anisotropic spacing") {
  LandmarkSet lf, lm;
  lf.points = {{5, 5, 5}};
  lm.points = {{7, 5, 5}};
  TreResult r = tre(lf, lm, identity_model(), {16, 16, 16}, {2.5, 1, 1});
  CHECK(r.mean == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("tre is invariant under paired permutation") {
  LandmarkSet lf, lm;
  lf.points = {{2, 2, 2}, {5, 5, 5}, {9, 4, 3}};
  lm.points = {{3, 2, 2}, {5, 7, 5}, {9, 4, 6}};
  TreResult a = tre(lf, lm, identity_model(), {16, 16, 16}, {1, 1, 1});
  std::swap(lf.points[0], lf.points[2]);
  std::swap(lm.points[0], lm.points[2]);
  TreResult b = tre(lf, lm, identity_model(), {16, 16, 16}, {1, 1, 1});
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-14));
  CHECK(a.stddev == doctest::Approx(b.stddev).epsilon(1e-14));
}

TEST_CASE("tre rejects mismatched or empty landmark sets") {
  LandmarkSet lf, lm;
  lf.points = {{1, 1, 1}};
  CHECK_THROWS(tre(lf, lm, identity_model(), {16, 16, 16}, {1, 1, 1}));
  LandmarkSet empty;
  CHECK_THROWS(tre(empty, empty, identity_model(), {16, 16, 16}, {1, 1, 1}));
}

TEST_CASE("threshold table trivial and mixed cases") {
  ThresholdTable all_zero = threshold_table({0, 0, 0});
  CHECK(all_zero.within_pct == std::vector<double>{100, 100, 100});
  CHECK(all_zero.outlier_pct == 0);

  ThresholdTable mixed = threshold_table({0.5, 1.5, 2.5, 3.5});
  CHECK(mixed.within_pct == std::vector<double>{25, 50, 75});
  CHECK(mixed.outlier_pct == 25);

  for (std::size_t i = 1; i < mixed.within_pct.size(); ++i)
    CHECK(mixed.within_pct[i] >= mixed.within_pct[i - 1]);
}

TEST_CASE("dice of identical volumes is 1 per label") {
  LabelVolume a = make_labels({8, 8, 8});
  for (int i = 100; i < 150; ++i) a.labels[i] = 1;
  for (int i = 200; i < 230; ++i) a.labels[i] = 2;
  DiceResult r = dice(a, a);
  REQUIRE(r.per_label.size() == 2);
  for (auto& [label, d] : r.per_label) CHECK(d == doctest::Approx(1.0));
  CHECK(r.mean == doctest::Approx(1.0));
}

TEST_CASE("dice of disjoint regions is 0") {
  LabelVolume a = make_labels({8, 8, 8});
  LabelVolume b = make_labels({8, 8, 8});
  for (int i = 0; i < 20; ++i) a.labels[i] = 1;
  for (int i = 30; i < 50; ++i) b.labels[i] = 1;
  CHECK(dice(a, b).mean == doctest::Approx(0.0));
}

TEST_CASE("dice 1-D toy overlap: 2*2/(4+4) = 0.5") {
  LabelVolume a = make_labels({8, 1, 1});
  LabelVolume b = make_labels({8, 1, 1});
  for (int i = 1; i <= 4; ++i) a.labels[i] = 1;
  for (int i = 3; i <= 6; ++i) b.labels[i] = 1;
  CHECK(dice(a, b).mean == doctest::Approx(0.5));
}

TEST_CASE("dice is symmetric and errors with no foreground") {
  LabelVolume a = make_labels({6, 6, 6});
  LabelVolume b = make_labels({6, 6, 6});
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> lab(0, 2);
  for (auto& l : a.labels) l = lab(rng);
  for (auto& l : b.labels) l = lab(rng);
  CHECK(dice(a, b).mean == doctest::Approx(dice(b, a).mean));

  LabelVolume empty = make_labels({6, 6, 6});
  CHECK_THROWS(dice(empty, empty));
}

TEST_CASE("hd95 of identical volumes is zero") {
  LabelVolume a = make_labels({8, 8, 8});
  for (int z = 2; z < 6; ++z)
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) a.labels[a.index(x, y, z)] = 1;
  CHECK(hd95(a, a, 1) == doctest::Approx(0.0));
}

TEST_CASE("two single-voxel surfaces 7 voxels apart at 1 mm") {
  LabelVolume a = make_labels({12, 4, 4});
  LabelVolume b = make_labels({12, 4, 4});
  a.labels[a.index(1, 2, 2)] = 1;
  b.labels[b.index(8, 2, 2)] = 1;
  CHECK(hd95(a, b, 1) == doctest::Approx(7.0));
}

TEST_CASE("hd95 matches all-pairs brute force on random shapes") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 10; ++t) {
    std::uniform_int_distribution<int> dim(6, 12);
    std::array<int, 3> dims{dim(rng), dim(rng), dim(rng)};
    LabelVolume a = make_labels(dims), b = make_labels(dims);
    std::uniform_real_distribution<double> sp(0.5, 2.0);
    a.spacing = b.spacing = {sp(rng), sp(rng), sp(rng)};
    std::bernoulli_distribution fg(0.3);
    for (auto& l : a.labels) l = fg(rng) ? 1 : 0;
    for (auto& l : b.labels) l = fg(rng) ? 1 : 0;
    double fast = hd95(a, b, 1);
    double brute = brute_hd95(a, b, 1);
    CHECK(fast == doctest::Approx(brute).epsilon(1e-10));
  }
}

TEST_CASE("njd of the zero field is 0 percent") {
  std::array<int, 3> dims{8, 8, 8};
  std::vector<double> field(8 * 8 * 8 * 3, 0.0);
  CHECK(njd(field, dims) == 0.0);
}

TEST_CASE("axis reflection folds every voxel") {
  std::array<int, 3> dims{8, 8, 8};
  std::vector<double> field(8 * 8 * 8 * 3, 0.0);
  std::size_t i = 0;
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x, ++i)
        field[i * 3 + 0] = double(7 - x) - double(x);  // maps x to 7-x
  CHECK(njd(field, dims) == 100.0);
  Volume jm = jacobian_map(field, dims);
  for (double d : jm.data) CHECK(d == doctest::Approx(-1.0));
}

TEST_CASE("jacobian map of the zero field is constant 1") {
  std::array<int, 3> dims{6, 5, 4};
  std::vector<double> field(6 * 5 * 4 * 3, 0.0);
  Volume jm = jacobian_map(field, dims);
  for (double d : jm.data) CHECK(d == doctest::Approx(1.0));
}

TEST_CASE("njd of orientation-preserving affine fields is zero") {
  std::array<int, 3> dims{8, 8, 8};
  std::vector<double> field(8 * 8 * 8 * 3);
  std::size_t i = 0;
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x, ++i) {
        field[i * 3 + 0] = 0.2 * x + 0.05 * y + 1.0;
        field[i * 3 + 1] = -0.1 * x + 0.1 * z - 0.5;
        field[i * 3 + 2] = 0.15 * z + 2.0;
      }
  CHECK(njd(field, dims) == 0.0);
}

TEST_CASE("masked njd uses in-mask voxels as the denominator") {
  std::array<int, 3> dims{8, 8, 8};
  std::vector<double> field(8 * 8 * 8 * 3, 0.0);
  std::vector<std::uint8_t> grid(512, 0);
  for (int i = 0; i < 10; ++i) grid[i] = 1;
  Mask m = Mask::from_data(dims, grid);
  CHECK(njd(field, dims, &m) == 0.0);
  Mask empty = Mask::from_data(dims, std::vector<std::uint8_t>(512, 0));
  CHECK_THROWS(njd(field, dims, &empty));
}

TEST_CASE("njd finite-difference signs agree with analytic determinants on smooth fields") {
  std::array<int, 3> dims{10, 10, 10};
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> amp(0.5, 2.0), ph(0, 6.28);
  for (int t = 0; t < 5; ++t) {
    double a[3] = {amp(rng), amp(rng), amp(rng)};
    double p[3] = {ph(rng), ph(rng), ph(rng)};
    auto u = [&](double x, double y, double z, int c) {
      double arg = 0.35 * (x + y + z) + p[c];
      return a[c] * std::sin(arg);
    };
    std::vector<double> field(10 * 10 * 10 * 3);
    std::size_t i = 0;
    for (int z = 0; z < 10; ++z)
      for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x, ++i)
          for (int c = 0; c < 3; ++c) field[i * 3 + c] = u(x, y, z, c);
    Volume jm = jacobian_map(field, dims);
    // analytic jacobian of x + U for the closed-form field
    for (int z = 1; z < 9; ++z)
      for (int y = 1; y < 9; ++y)
        for (int x = 1; x < 9; ++x) {
          Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
          for (int c = 0; c < 3; ++c) {
            double darg = a[c] * 0.35 * std::cos(0.35 * (x + y + z) + p[c]);
            for (int k = 0; k < 3; ++k) J(c, k) += darg;
          }
          double analytic = J.determinant();
          double fd = jm.data[(std::size_t(z) * 10 + y) * 10 + x];
          if (std::abs(analytic) > 0.05)  // sign comparison away from zero crossings
            CHECK((fd > 0) == (analytic > 0));
        }
  }
}
