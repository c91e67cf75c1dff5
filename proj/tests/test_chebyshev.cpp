#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kanreg/chebyshev.hpp"

using namespace kanreg;

TEST_CASE("degree-0 basis is the constant 1") {
  auto v = eval_basis(0.7, full_degree_set(0));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == doctest::Approx(1.0));
}

TEST_CASE("closed forms at x=0.5 for degrees {1,3}") {
  DegreeSet d{{1, 3}};
  auto v = eval_basis(0.5, d);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-12));   // T1(x) = x
  CHECK(v[1] == doctest::Approx(-1.0).epsilon(1e-12));  // T3(x) = 4x^3 - 3x
}

TEST_CASE("T_n(1) = 1 within clamp tolerance up to degree 84") {
  // clamping to 1 - 1e-7 perturbs T_n(1) by about n^2 * 1e-7 (7.1e-4 at n=84)
  auto v = eval_basis(1.0, full_degree_set(84));
  for (double t : v) {
    CHECK(t == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(t <= 1.0);
  }
  auto lo = eval_basis(-1.0, full_degree_set(8));
  for (std::size_t n = 0; n < lo.size(); ++n)
    CHECK(lo[n] == doctest::Approx(n % 2 ? -1.0 : 1.0).epsilon(1e-3));
}

TEST_CASE("recurrence identity against three-term oracle") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  DegreeSet full = full_degree_set(84);
  for (int t = 0; t < 1000; ++t) {
    double x = uni(rng);
    auto v = eval_basis(x, full);
    double tm2 = 1.0, tm1 = x;
    CHECK(std::abs(v[0] - 1.0) < 1e-10);
    CHECK(std::abs(v[1] - x) < 1e-10);
    for (int n = 2; n <= 84; ++n) {
      double tn = 2 * x * tm1 - tm2;
      CHECK(std::abs(v[n] - tn) < 1e-10);
      tm2 = tm1;
      tm1 = tn;
    }
  }
}

TEST_CASE("boundedness |T_n| <= 1 + 1e-9") {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  DegreeSet full = full_degree_set(84);
  for (int t = 0; t < 1000; ++t)
    for (double v : eval_basis(uni(rng), full)) CHECK(std::abs(v) <= 1.0 + 1e-9);
}

TEST_CASE("full_degree_set sizes") {
  CHECK(full_degree_set(0).degrees == std::vector<int>{0});
  CHECK(full_degree_set(28).size() == 29);
  CHECK(full_degree_set(8).degrees.back() == 8);
}

TEST_CASE("sample_degree_set exhausts the range when k = K") {
  std::mt19937_64 rng(7);
  auto d = sample_degree_set(5, 5, rng);
  CHECK(d.degrees == std::vector<int>{0, 1, 2, 3, 4, 5});
  auto e = sample_degree_set(1, 1, rng);
  CHECK(e.degrees == std::vector<int>{0, 1});
}

TEST_CASE("sample_degree_set paper defaults: 13 distinct sorted degrees") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    auto d = sample_degree_set(12, 84, rng);
    REQUIRE(d.size() == 13);
    CHECK(d.degrees.front() == 0);
    CHECK(d.degrees.back() <= 84);
    for (int i = 1; i < d.size(); ++i) CHECK(d.degrees[i] > d.degrees[i - 1]);
  }
}

TEST_CASE("sample_degree_set with k=1, K=10 is uniform over 1..10") {
  std::mt19937_64 rng(9);
  std::array<int, 11> hits{};
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    auto d = sample_degree_set(1, 10, rng);
    REQUIRE(d.size() == 2);
    ++hits[d.degrees[1]];
  }
  for (int deg = 1; deg <= 10; ++deg) {
    double freq = double(hits[deg]) / draws;
    CHECK(std::abs(freq - 0.1) < 0.01);
  }
}

TEST_CASE("same seed gives identical degree-set sequences") {
  std::mt19937_64 a(4242), b(4242);
  for (int t = 0; t < 20; ++t)
    CHECK(sample_degree_set(12, 84, a).degrees == sample_degree_set(12, 84, b).degrees);
}

TEST_CASE("invalid sampling arguments throw") {
  std::mt19937_64 rng(1);
  CHECK_THROWS(sample_degree_set(6, 5, rng));
  CHECK_THROWS(sample_degree_set(0, 5, rng));
}

TEST_CASE("basis config validation") {
  BasisConfig c;
  c.mode = BasisConfig::Mode::Fixed;
  c.max_degree = -1;
  CHECK_THROWS(c.validate());
  c.max_degree = 28;
  CHECK_NOTHROW(c.validate());
  c.mode = BasisConfig::Mode::Randomized;
  c.sample_count = 90;
  c.sample_max = 84;
  CHECK_THROWS(c.validate());
}
