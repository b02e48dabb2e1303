#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "chaoslab/torus_grid.hpp"
#include "generators.hpp"

using namespace chaoslab;

TEST_CASE("wrap_point") {
  const double xs[] = {1.25, -0.25, 0.5};
  const auto p = wrap_point(xs);
  CHECK(p[0] == 0.25);
  CHECK(p[1] == 0.75);
  CHECK(p[2] == 0.5);
  CHECK(wrap(-1e-18) < 1.0);
  CHECK(wrap(-1e-18) >= 0.0);
  const double bad[] = {NAN};
  CHECK_THROWS_AS(wrap_point(bad), Error);
  for (int t = 0; t < 1000; ++t) {
    const double x = gen::uniform(-50, 50);
    CHECK(wrap(wrap(x)) == wrap(x));
    CHECK(wrap(x) >= 0.0);
    CHECK(wrap(x) < 1.0);
  }
}

TEST_CASE("density validation") {
  CHECK_THROWS_AS(GriddedDensity(1, 4, {1, 1, 1}), Error);
  CHECK_THROWS_AS(GriddedDensity(1, 4, {2, 2, 1, -1}), Error);
  CHECK_THROWS_AS(GriddedDensity(1, 4, {1, 1, 1, 2}), Error);
  CHECK_NOTHROW(GriddedDensity(1, 4, {1, 1, 1, 1}));
  CHECK(GriddedDensity::uniform(3, 8).mass() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("circular_convolve") {
  const int G = 8;
  const auto rho = gen::rough_density(1, G);
  GridFunction c{1, G, std::vector<double>(G, 3.5)};
  for (double v : circular_convolve(c, rho).values) CHECK(v == doctest::Approx(3.5).epsilon(1e-14));

  auto cosine = sample_on_grid(G, [](double x) { return std::cos(2 * M_PI * x); }, 0.0);
  for (double v : circular_convolve(cosine, GriddedDensity::uniform(1, G)).values) CHECK(std::abs(v) < 1e-14);

  // Point mass at cell 0 (value 1/h): output(i) = f(i).
  std::vector<double> point(G, 0.0);
  point[0] = G;
  const auto out = circular_convolve(cosine, GriddedDensity(1, G, point));
  for (int i = 0; i < G; ++i) CHECK(out.values[i] == doctest::Approx(std::cos(2 * M_PI * i / G)).epsilon(1e-14));

  CHECK_THROWS_AS(circular_convolve(cosine, GriddedDensity::uniform(1, 16)), Error);
}

TEST_CASE("circular_convolve_kernel evaluates at cell-centre differences") {
  const int G = 16;
  const auto rho = gen::rough_density(1, G);
  auto kernel = [](double x) { return std::sin(2 * M_PI * x) + 0.3 * std::cos(4 * M_PI * x); };
  for (double off : {0.5, 1.0}) {
    const auto out = circular_convolve_kernel(kernel, rho, off);
    for (int i = 0; i < G; ++i) {
      double ref = 0;
      for (int j = 0; j < G; ++j) ref += kernel((i + off) / G - (j + 0.5) / G) * rho[j] / G;
      CHECK(out.values[i] == doctest::Approx(ref).epsilon(1e-13));
    }
  }
}

TEST_CASE("periodic_gradient") {
  auto flat = GriddedDensity::uniform(2, 8);
  for (double v : periodic_gradient(flat).components) CHECK(v == 0.0);

  auto error_at = [](int G) {
    auto f = sample_on_grid(G, [](double x) { return std::exp(std::cos(2 * M_PI * x)); });
    const auto g = periodic_gradient(f);
    double err = 0;
    for (int i = 0; i < G; ++i) {
      const double x = (i + 0.5) / G;
      err = std::max(err, std::abs(g.components[i] + 2 * M_PI * std::sin(2 * M_PI * x) * std::exp(std::cos(2 * M_PI * x))));
    }
    return err;
  };
  const double ratio = error_at(64) / error_at(128);
  CHECK(ratio > 3.8);
  CHECK(ratio < 4.2);

  // Perturbation along axis 1 only.
  const int G = 16;
  GridFunction f{2, G, std::vector<double>(G * G)};
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) f.values[i * G + j] = std::sin(2 * M_PI * (j + 0.5) / G);
  const auto g = periodic_gradient(f);
  for (double v : g.axis(0)) CHECK(v == 0.0);
  double mx = 0;
  for (double v : g.axis(1)) mx = std::max(mx, std::abs(v));
  CHECK(mx > 1.0);

  CHECK_THROWS_AS(periodic_gradient(GriddedDensity::uniform(1, 2)), Error);
}

TEST_CASE("marginalize and product_density") {
  const auto r1 = gen::smooth_density(1, 16);
  const auto r2 = gen::smooth_density(1, 16);
  CHECK(marginalize(r1, 1).values()[3] == r1[3]);

  std::vector<double> prod(256);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) prod[i * 16 + j] = r1[i] * r2[j];
  const auto m = marginalize(GriddedDensity::normalized(2, 16, prod), 1);
  for (int i = 0; i < 16; ++i) CHECK(m[i] == doctest::Approx(r1[i]).epsilon(1e-12));

  // Symmetrize a random 2-axis density: both marginals agree.
  auto rough = gen::rough_density(2, 12);
  std::vector<double> sym(144);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) sym[i * 12 + j] = rough[i * 12 + j] + rough[j * 12 + i];
  const auto s = GriddedDensity::normalized(2, 12, sym);
  const auto first = marginalize(s, 1);
  for (int j = 0; j < 12; ++j) {
    double col = 0;
    for (int i = 0; i < 12; ++i) col += s[i * 12 + j] / 12.0;
    CHECK(first[j] == doctest::Approx(col).epsilon(1e-13));
  }

  for (int t = 0; t < 20; ++t) {
    const auto r = gen::rough_density(3, 10);
    for (int k = 1; k <= 3; ++k) CHECK(std::abs(marginalize(r, k).mass() - r.mass()) <= 1e-12);
  }
  CHECK_THROWS_AS(marginalize(r1, 2), Error);
  CHECK_THROWS_AS(marginalize(r1, 0), Error);

  CHECK(product_density(r1, 1).values()[5] == doctest::Approx(r1[5]).epsilon(1e-15));
  for (double v : product_density(GriddedDensity::uniform(1, 8), 4).values()) CHECK(v == doctest::Approx(1.0));
  const auto back = marginalize(product_density(r1, 3), 1);
  for (int i = 0; i < 16; ++i) CHECK(back[i] == doctest::Approx(r1[i]).epsilon(1e-12));
  CHECK_THROWS_AS(product_density(GriddedDensity::uniform(1, 64), 5), Error);
}

TEST_CASE("coarsen aggregates cells") {
  const auto r = gen::rough_density(1, 64);
  const auto c = coarsen(r, 16);
  for (int i = 0; i < 16; ++i) {
    const double ref = (r[4 * i] + r[4 * i + 1] + r[4 * i + 2] + r[4 * i + 3]) / 4;
    CHECK(c[i] == doctest::Approx(ref).epsilon(1e-13));
  }
  CHECK_THROWS_AS(coarsen(r, 24), Error);
}

TEST_CASE("serialization round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "chaoslab_grid_test";
  std::filesystem::create_directories(dir);
  const auto small = gen::rough_density(2, 8);
  const auto p1 = save_density(small, dir / "small");
  const auto s2 = load_density(p1);
  CHECK(s2.axes() == 2);
  for (std::size_t i = 0; i < small.size(); ++i) CHECK(s2[i] == small[i]);

  const auto big = gen::rough_density(2, 128);
  const auto p2 = save_density(big, dir / "big");
  CHECK(std::filesystem::exists(dir / "big.bin"));
  const auto b2 = load_density(p2);
  for (std::size_t i = 0; i < big.size(); ++i) CHECK(b2[i] == big[i]);
  std::filesystem::remove_all(dir);
}
