#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kanreg/kan.hpp"
#include "kanreg/volume.hpp"

using namespace kanreg;

namespace {

Volume random_volume(const std::array<int, 3>& dims, std::uint64_t seed) {
  Volume v;
  v.dims = dims;
  v.data.resize(std::size_t(dims[0]) * dims[1] * dims[2]);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 100.0);
  for (double& d : v.data) d = uni(rng);
  return v;
}

}  // namespace

TEST_CASE("normalization maps corners to +-1 and round-trips") {
  std::array<int, 3> dims{64, 64, 32};
  auto lo = voxel_to_normalized({0, 0, 0}, dims);
  CHECK(lo == std::array<double, 3>{-1.0, -1.0, -1.0});
  auto hi = voxel_to_normalized({63, 63, 31}, dims);
  CHECK(hi == std::array<double, 3>{1.0, 1.0, 1.0});
  auto mid = voxel_to_normalized({31.5, 10, 5}, dims);
  CHECK(mid[0] == doctest::Approx(0.0).epsilon(1e-15));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::array<double, 3> c{uni(rng), uni(rng), uni(rng)};
    auto back = voxel_to_normalized(normalized_to_voxel(c, dims), dims);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(back[k] - c[k]) < 1e-12);
  }
}

TEST_CASE("degenerate axis is rejected") {
  CHECK_THROWS(voxel_to_normalized({0, 0, 0}, {64, 1, 64}));
}

TEST_CASE("trilinear at a voxel center returns that voxel") {
  Volume v = random_volume({5, 4, 3}, 2);
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 5; ++x) {
        double s = trilinear_sample_voxel(v, {double(x), double(y), double(z)});
        CHECK(s == v.at(x, y, z));
      }
}

TEST_CASE("trilinear midpoint of axis-adjacent voxels averages them") {
  Volume v;
  v.dims = {3, 3, 3};
  v.data.assign(27, 0.0);
  v.at(1, 1, 1) = 2.0;
  v.at(2, 1, 1) = 4.0;
  CHECK(trilinear_sample_voxel(v, {1.5, 1.0, 1.0}) == doctest::Approx(3.0));
}

TEST_CASE("trilinear matches 8-corner weight-by-weight oracle") {
  Volume v = random_volume({4, 4, 4}, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(0.0, 3.0);
  for (int t = 0; t < 500; ++t) {
    double x = uni(rng), y = uni(rng), z = uni(rng);
    int x0 = std::min(int(x), 2), y0 = std::min(int(y), 2), z0 = std::min(int(z), 2);
    double fx = x - x0, fy = y - y0, fz = z - z0;
    double ref = 0.0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
          ref += w * v.at(x0 + dx, y0 + dy, z0 + dz);
        }
    CHECK(trilinear_sample_voxel(v, {x, y, z}) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("trilinear reproduces globally affine intensity fields") {
  Volume v;
  v.dims = {6, 5, 4};
  v.data.resize(120);
  auto affine = [](double x, double y, double z) { return 1.5 * x - 2.0 * y + 0.7 * z + 3.0; };
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) v.at(x, y, z) = affine(x, y, z);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    double x = uni(rng) * 5, y = uni(rng) * 4, z = uni(rng) * 3;
    CHECK(trilinear_sample_voxel(v, {x, y, z}) ==
          doctest::Approx(affine(x, y, z)).epsilon(1e-12));
  }
}

TEST_CASE("trilinear gradient matches finite differences away from grid planes") {
  Volume v = random_volume({6, 6, 6}, 6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.3, 4.7);
  const double h = 1e-7;
  for (int t = 0; t < 200; ++t) {
    std::array<double, 3> p{uni(rng), uni(rng), uni(rng)};
    std::array<double, 3> g;
    trilinear_sample_voxel(v, p, &g);
    for (int k = 0; k < 3; ++k) {
      auto pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      double fd = (trilinear_sample_voxel(v, pp) - trilinear_sample_voxel(v, pm)) / (2 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("out-of-range coordinates clamp with zero gradient") {
  Volume v = random_volume({4, 4, 4}, 8);
  std::array<double, 3> g;
  double inside = trilinear_sample_voxel(v, {3.0, 1.2, 1.7});
  double outside = trilinear_sample_voxel(v, {9.0, 1.2, 1.7}, &g);
  CHECK(outside == inside);
  CHECK(g[0] == 0.0);
}

TEST_CASE("single-voxel mask yields identical sample points") {
  std::array<int, 3> dims{8, 8, 8};
  std::vector<std::uint8_t> grid(512, 0);
  grid[(3 * 8 + 2) * 8 + 5] = 1;  // voxel (5, 2, 3)
  Mask m = Mask::from_data(dims, grid);
  std::mt19937_64 rng(9);
  CoordinateBatch b = sample_batch(m, dims, 100, rng);
  REQUIRE(b.count() == 100);
  auto expect = voxel_to_normalized({5, 2, 3}, dims);
  for (int i = 0; i < 100; ++i)
    for (int k = 0; k < 3; ++k) CHECK(b.points(i, k) == expect[k]);
}

TEST_CASE("empty mask rejected; full-mask sampling is uniform") {
  std::array<int, 3> dims{8, 8, 8};
  Mask empty = Mask::from_data(dims, std::vector<std::uint8_t>(512, 0));
  std::mt19937_64 rng(10);
  CHECK_THROWS(sample_batch(empty, dims, 10, rng));

  Mask full = Mask::full(dims);
  const int draws = 1000000;
  std::vector<int> hits(512, 0);
  CoordinateBatch b = sample_batch(full, dims, draws, rng);
  for (int i = 0; i < draws; ++i) {
    auto idx = normalized_to_voxel({b.points(i, 0), b.points(i, 1), b.points(i, 2)}, dims);
    ++hits[(int(std::lround(idx[2])) * 8 + int(std::lround(idx[1]))) * 8 +
           int(std::lround(idx[0]))];
  }
  // 3-sigma binomial band around draws/512
  const double p = 1.0 / 512, mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int c : hits) CHECK(std::abs(c - mean) <= 4 * sigma);  // 4 sigma over 512 bins
}

TEST_CASE("identity model warp is bitwise equal to the input") {
  Volume v = random_volume({12, 10, 9}, 11);
  std::mt19937_64 rng(12);
  BasisConfig basis;
  basis.max_degree = 6;
  KanModel model = init_model(basis, {3, 8, 3}, rng);
  Volume w = warp_dense(v, model, Interp::Trilinear);
  CHECK(w.data == v.data);
}

TEST_CASE("constant volume warps to itself under any model") {
  Volume v;
  v.dims = {10, 10, 10};
  v.data.assign(1000, 42.0);
  std::mt19937_64 rng(13);
  BasisConfig basis;
  basis.max_degree = 6;
  KanModel model = init_model(basis, {3, 8, 3}, rng);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  for (auto& l : model.layers) {
    for (auto& c : l.coeffs)
      c = Mat::NullaryExpr(c.rows(), c.cols(), [&] { return uni(rng); });
  }
  Volume w = warp_dense(v, model, Interp::Trilinear);
  for (double d : w.data) CHECK(d == doctest::Approx(42.0).epsilon(1e-12));
}

TEST_CASE("nearest-mode warping never invents labels") {
  Volume labels;
  labels.dims = {10, 10, 10};
  labels.data.resize(1000);
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> lab(0, 3);
  for (double& d : labels.data) d = lab(rng);
  BasisConfig basis;
  basis.max_degree = 4;
  KanModel model = init_model(basis, {3, 6, 3}, rng);
  std::uniform_real_distribution<double> uni(-0.2, 0.2);
  for (auto& l : model.layers)
    for (auto& c : l.coeffs)
      c = Mat::NullaryExpr(c.rows(), c.cols(), [&] { return uni(rng); });
  Volume w = warp_dense(labels, model, Interp::Nearest);
  for (double d : w.data) {
    CHECK(d == std::floor(d));
    CHECK(d >= 0.0);
    CHECK(d <= 3.0);
  }
}

TEST_CASE("dense field of the identity model is exactly zero") {
  std::mt19937_64 rng(15);
  BasisConfig basis;
  KanModel model = init_model(basis, {3, 8, 3}, rng);
  auto field = dense_displacement_field(model, {6, 5, 4});
  REQUIRE(field.size() == std::size_t(6 * 5 * 4 * 3));
  for (double d : field) CHECK(d == 0.0);
}

TEST_CASE("tape trilinear sampling differentiates through coordinates") {
  Volume v = random_volume({6, 6, 6}, 16);
  Tape tape;
  // points chosen off the interpolation lattice, where the derivative is smooth
  Mat coords =
      (Mat(3, 3) << 0.11, -0.23, 0.35, -0.62, 0.44, 0.03, 0.31, 0.29, -0.33).finished();
  Var c = tape.leaf(coords);
  Var s = sample_trilinear(tape, v, c);
  tape.backward(tape.sum(s));
  const double h = 1e-7;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) {
      auto eval = [&](double delta) {
        std::array<double, 3> p{coords(r, 0), coords(r, 1), coords(r, 2)};
        p[k] += delta;
        return trilinear_sample(v, p);
      };
      double fd = (eval(h) - eval(-h)) / (2 * h);
      CHECK(tape.adjoint(c)(r, k) == doctest::Approx(fd).epsilon(1e-5));
    }
}
