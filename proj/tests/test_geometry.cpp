#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nfce/channel.hpp"
#include "nfce/polardict.hpp"
#include "nfce/sysgeom.hpp"

using namespace nfce;

namespace {

SystemConfig small_config(int n, int k = 4) {
  SystemConfig c;
  c.n_antennas = n;
  c.n_rf = std::min(4, n);
  c.n_subcarriers = k;
  c.n_paths = 3;
  return c;
}

double wrap(double x) { return std::remainder(x, 2.0 * kPi); }

double max_phase_gap(const CVector& a, const CVector& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(std::arg(a[i] * std::conj(b[i]))));
  return m;
}

}  // namespace

TEST_CASE("full-scale geometry: wavelength, Fraunhofer and Fresnel distances") {
  const auto g = derive_geometry(SystemConfig{});
  const double lambda = kSpeedOfLight / 28e9;
  CHECK(g.wavelength == doctest::Approx(lambda).epsilon(1e-15));
  CHECK(g.wavelength * 1e3 == doctest::Approx(10.7069).epsilon(1e-4));
  const double d = 256 * lambda / 2;
  CHECK(g.aperture == doctest::Approx(d).epsilon(1e-14));
  CHECK(std::abs(g.fraunhofer_m - 2 * d * d / lambda) / g.fraunhofer_m < 1e-12);
  CHECK(g.fraunhofer_m > 350.0);
  CHECK(g.fraunhofer_m < 353.0);
  CHECK(g.fresnel_m == doctest::Approx(d / 2 * std::sqrt(d / lambda)).epsilon(1e-12));
  CHECK(g.fresnel_m == doctest::Approx(7.75).epsilon(0.01));
}

TEST_CASE("antenna offsets are centered and antisymmetric") {
  for (int n : {1, 2, 7, 32, 256}) {
    const auto g = derive_geometry(small_config(n));
    REQUIRE(g.antenna_offsets.size() == static_cast<std::size_t>(n));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(g.antenna_offsets[i] == doctest::Approx(g.delta(i) * g.spacing));
      CHECK(g.antenna_offsets[i] == -g.antenna_offsets[n - 1 - i]);
      // Mirror pairs cancel exactly.
      sum += g.antenna_offsets[i] + g.antenna_offsets[n - 1 - i];
    }
    CHECK(sum == 0.0);
  }
  CHECK(derive_geometry(small_config(1)).antenna_offsets[0] == 0.0);
}

TEST_CASE("Fresnel boundary lies inside the Fraunhofer distance") {
  for (int n = 2; n <= 512; n *= 2) {
    const auto g = derive_geometry(small_config(n));
    CHECK(g.fresnel_m < g.fraunhofer_m);
  }
}

TEST_CASE("subcarrier grid is increasing, centered, and inside the band") {
  SystemConfig c = small_config(8, 16);
  const auto g = derive_geometry(c);
  REQUIRE(g.subcarrier_freqs.size() == 16u);
  for (std::size_t k = 1; k < 16; ++k) CHECK(g.subcarrier_freqs[k] > g.subcarrier_freqs[k - 1]);
  const double mean = std::accumulate(g.subcarrier_freqs.begin(), g.subcarrier_freqs.end(), 0.0) / 16;
  CHECK(mean == doctest::Approx(c.carrier_hz).epsilon(1e-14));
  CHECK(g.subcarrier_freqs.front() >= c.carrier_hz - c.bandwidth_hz / 2);
  CHECK(g.subcarrier_freqs.back() <= c.carrier_hz + c.bandwidth_hz / 2);
}

TEST_CASE("config validation rejects invalid values") {
  SystemConfig c;
  c.n_antennas = 0;
  CHECK_THROWS_AS(derive_geometry(c), InvalidArgument);
  c = SystemConfig{};
  c.carrier_hz = -1;
  CHECK_THROWS_AS(derive_geometry(c), InvalidArgument);
  c = SystemConfig{};
  c.bandwidth_hz = 0;
  CHECK_THROWS_AS(derive_geometry(c), InvalidArgument);
  c = SystemConfig{};
  c.n_subcarriers = 0;
  CHECK_THROWS_AS(derive_geometry(c), InvalidArgument);
  c = SystemConfig{};
  c.n_rf = 300;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("config JSON round trip") {
  SystemConfig c = small_config(16, 8);
  c.antenna_spacing = 0.004;
  c.rng_seed = 99;
  const auto back = SystemConfig::from_json(c.to_json());
  CHECK(back.n_antennas == 16);
  CHECK(back.n_subcarriers == 8);
  CHECK(back.spacing() == 0.004);
  CHECK(back.rng_seed == 99u);
}

TEST_CASE("steering vector special cases") {
  const auto g1 = derive_geometry(small_config(1));
  for (auto m : {SteeringModel::exact, SteeringModel::fresnel, SteeringModel::planar}) {
    const auto a = steering_vector(0.4, 3.0, m, g1);
    REQUIRE(a.size() == 1);
    CHECK(std::abs(a[0] - cdouble(1.0, 0.0)) < 1e-15);
  }
  const auto g4 = derive_geometry(small_config(4));
  const auto a = steering_vector(0.0, 1.0, SteeringModel::planar, g4);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - cdouble(0.5, 0.0)) < 1e-15);
}

TEST_CASE("steering vectors have unit norm and phi = 0 symmetry") {
  const auto g = derive_geometry(small_config(32));
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double phi = rng.uniform(-kPi / 2, kPi / 2);
    const double d = rng.uniform(0.5, 50.0);
    for (auto m : {SteeringModel::exact, SteeringModel::fresnel, SteeringModel::planar})
      CHECK(std::abs(steering_vector(phi, d, m, g).norm() - 1.0) < 1e-12);
  }
  for (auto m : {SteeringModel::exact, SteeringModel::fresnel}) {
    const auto a = steering_vector(0.0, 2.3, m, g);
    for (int i = 0; i < 32; ++i) CHECK(std::abs(a[i] - a[31 - i]) < 1e-12);
  }
}

TEST_CASE("exact path difference matches the direct law-of-cosines form") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const double phi = rng.uniform(-kPi / 2, kPi / 2);
    const double d = rng.uniform(1.0, 30.0);
    const double off = rng.uniform(-0.2, 0.2);
    const double direct = std::sqrt(d * d + off * off - 2 * d * off * std::sin(phi)) - d;
    CHECK(path_difference(phi, d, off, SteeringModel::exact) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("endfire angles reduce to collinear distances") {
  const auto g = derive_geometry(small_config(16));
  const double d = 0.7;
  for (double phi : {kPi / 2, -kPi / 2}) {
    const double s = phi > 0 ? 1.0 : -1.0;
    for (int i = 0; i < 16; ++i) {
      const double off = g.antenna_offsets[i];
      const double expect = std::abs(d - s * off) - d;
      CHECK(path_difference(phi, d, off, SteeringModel::exact) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("fresnel phase error shrinks with distance beyond the Fresnel boundary") {
  const auto g = derive_geometry(small_config(64));
  const double phi = 0.5;
  double prev = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 8; ++j) {
    const double d = g.fresnel_m * std::pow(10.0, 0.25 * j);
    const double err = max_phase_gap(steering_vector(phi, d, SteeringModel::exact, g),
                                     steering_vector(phi, d, SteeringModel::fresnel, g));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("steering vector input validation") {
  const auto g = derive_geometry(small_config(8));
  CHECK_THROWS_AS(steering_vector(0.1, 0.0, SteeringModel::exact, g), InvalidArgument);
  CHECK_THROWS_AS(steering_vector(0.1, -2.0, SteeringModel::fresnel, g), InvalidArgument);
  CHECK_THROWS_AS(steering_vector(std::nan(""), 2.0, SteeringModel::exact, g), InvalidArgument);
  CHECK_THROWS_AS(steering_vector(2.0, 2.0, SteeringModel::exact, g), InvalidArgument);
  CHECK_NOTHROW(steering_vector(0.1, 0.0, SteeringModel::planar, g));
}

TEST_CASE("draw_paths: degenerate range, determinism, gain moments") {
  SystemConfig c = small_config(8);
  c.n_paths = 1;
  Rng r0(1);
  const auto one = draw_paths(c, {20.0, 20.0}, r0);
  REQUIRE(one.size() == 1u);
  CHECK(one[0].distance == 20.0);
  CHECK(one[0].is_los);

  c.n_paths = 6;
  Rng a(42), b(42);
  const auto pa = draw_paths(c, {15, 25}, a);
  const auto pb = draw_paths(c, {15, 25}, b);
  for (int l = 0; l < 6; ++l) {
    CHECK(pa[l].angle == pb[l].angle);
    CHECK(pa[l].distance == pb[l].distance);
    CHECK(pa[l].gain == pb[l].gain);
    CHECK(pa[l].is_los == (l == 0));
    CHECK(pa[l].distance >= 15.0);
    CHECK(pa[l].distance <= 25.0);
    CHECK(std::abs(pa[l].angle) <= kPi / 2);
  }

  c.n_paths = 1;
  Rng m(9);
  double acc = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) acc += std::norm(draw_paths(c, {1, 2}, m)[0].gain);
  CHECK(std::abs(acc / draws - 1.0) < 0.02);

  CHECK_THROWS_AS(draw_paths(c, {3.0, 2.0}, m), InvalidArgument);
  CHECK_THROWS_AS(draw_paths(c, {0.0, 2.0}, m), InvalidArgument);
  c.n_paths = 0;
  CHECK_THROWS_AS(draw_paths(c, {1.0, 2.0}, m), InvalidArgument);
}

TEST_CASE("assemble_channel: phase-cancelling single path equals scaled steering vector") {
  SystemConfig c = small_config(16, 1);
  auto g = derive_geometry(c);
  const double f = g.subcarrier_freqs[0];
  // Distance holding an integer number of wavelengths at f.
  const double d = 137.0 * kSpeedOfLight / f;
  PathParams p;
  p.angle = 0.3;
  p.distance = d;
  const auto ch = assemble_channel({p}, g, SteeringModel::exact);
  const CVector expect = 4.0 * steering_vector(0.3, d, SteeringModel::exact, g);
  CHECK((ch.h.col(0) - expect).norm() < 1e-9);
}

TEST_CASE("assemble_channel: subcarriers differ only by per-path phase factors") {
  SystemConfig c = small_config(16, 2);
  const auto g = derive_geometry(c);
  PathParams p;
  p.angle = -0.6;
  p.distance = 3.7;
  p.gain = {0.3, -1.1};
  const auto ch = assemble_channel({p}, g);
  const auto a = steering_vector(p.angle, p.distance, SteeringModel::exact, g);
  for (int k = 0; k < 2; ++k) {
    const double ph = -2 * kPi * g.subcarrier_freqs[k] * p.distance / kSpeedOfLight;
    const CVector expect = 4.0 * p.gain * std::polar(1.0, wrap(ph)) * a;
    CHECK((ch.h.col(k) - expect).norm() < 1e-9);
  }
}

TEST_CASE("assemble_channel: mean column energy is N") {
  SystemConfig c = small_config(32, 1);
  c.n_paths = 6;
  const auto g = derive_geometry(c);
  Rng rng(11);
  double acc = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) acc += assemble_channel(draw_paths(c, {2, 20}, rng), g).h.squaredNorm();
  CHECK(std::abs(acc / draws / 32.0 - 1.0) < 0.03);
}

TEST_CASE("polar grid: rings respect d_min, angles increase, bookkeeping adds up") {
  const auto g = derive_geometry(SystemConfig{});
  GridOptions o;
  const auto grid = build_grid(g, o);
  REQUIRE(grid.angles.size() == 256u);
  std::size_t total = 0;
  for (std::size_t i = 0; i < grid.angles.size(); ++i) {
    if (i > 0) CHECK(grid.angles[i] > grid.angles[i - 1]);
    CHECK(std::sin(grid.angles[i]) == doctest::Approx(-1.0 + 2.0 * i / 256));
    CHECK(is_far_field(grid.distances[i].front()));
    for (std::size_t s = 1; s < grid.distances[i].size(); ++s) {
      CHECK(grid.distances[i][s] >= o.d_min);
      CHECK(grid.distances[i][s] > 0.0);
    }
    total += grid.distances[i].size();
  }
  CHECK(total == grid.total_atoms);
  CHECK(grid.total_atoms >= grid.angles.size());
}

TEST_CASE("polar grid: ring spacing is uniform in reciprocal distance") {
  const auto g = derive_geometry(small_config(64));
  GridOptions o;
  o.d_min = 0.05;
  const auto grid = build_grid(g, o);
  const std::size_t mid = 32;  // sin φ = 0
  const auto& d = grid.distances[mid];
  REQUIRE(d.size() >= 4u);
  const double step = 1.0 / d[1];
  for (std::size_t s = 2; s < d.size(); ++s) CHECK(1.0 / d[s] - 1.0 / d[s - 1] == doctest::Approx(step));
  const double expect_r1 = 64.0 * 64.0 * g.spacing * g.spacing / (2 * 1.2 * 1.2 * g.wavelength);
  CHECK(d[1] == doctest::Approx(expect_r1));
}

TEST_CASE("polar grid: far-field-only degenerate case is the planar dictionary") {
  const auto g = derive_geometry(small_config(16));
  GridOptions o;
  o.d_min = 1.0;
  o.max_rings = 0;
  const auto dict = build_transform(build_grid(g, o), g);
  REQUIRE(dict.size() == 16);
  for (int i = 0; i < 16; ++i) {
    const double phi = std::asin(-1.0 + 2.0 * i / 16);
    CHECK((dict.p.col(i) - steering_vector(phi, 1.0, SteeringModel::planar, g)).norm() < 1e-14);
  }
}

TEST_CASE("polar grid: errors for budget, floor, and bad parameters") {
  const auto g = derive_geometry(small_config(64));
  GridOptions o;
  o.d_min = 0.05;
  o.atom_budget = 10;
  CHECK_THROWS_AS(build_grid(g, o), InvalidArgument);
  o = GridOptions{};
  o.d_min = 0.1 * g.wavelength;
  CHECK_THROWS_AS(build_grid(g, o), InvalidArgument);
  o = GridOptions{};
  o.beta_delta = 0.0;
  CHECK_THROWS_AS(build_grid(g, o), InvalidArgument);
  o = GridOptions{};
  o.d_min = -1;
  CHECK_THROWS_AS(build_grid(g, o), InvalidArgument);
}

TEST_CASE("transform: unit columns, coherence below one, on-grid round trip") {
  const auto g = derive_geometry(small_config(32));
  GridOptions o;
  o.d_min = 0.3;
  const auto grid = build_grid(g, o);
  const auto dict = build_transform(grid, g);
  REQUIRE(dict.atoms.size() == static_cast<std::size_t>(dict.size()));
  for (Eigen::Index j = 0; j < dict.size(); ++j) CHECK(std::abs(dict.p.col(j).norm() - 1.0) < 1e-12);
  CMatrix gram = dict.p.adjoint() * dict.p;
  double coh = 0.0;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = 0; j < gram.cols(); ++j)
      if (i != j) coh = std::max(coh, std::abs(gram(i, j)));
  CHECK(coh < 1.0);
  for (Eigen::Index j = 0; j < dict.size(); ++j) {
    const auto& at = dict.atoms[j];
    const CVector a = is_far_field(at.distance)
                          ? steering_vector(at.angle, 1.0, SteeringModel::planar, g)
                          : steering_vector(at.angle, at.distance, SteeringModel::fresnel, g);
    Eigen::Index best;
    (dict.p.adjoint() * a).cwiseAbs().maxCoeff(&best);
    CHECK(best == j);
  }
  const auto again = build_grid(g, o);
  CHECK(again.distances == grid.distances);
  CHECK(again.angles == grid.angles);
}

TEST_CASE("single-atom grid gives one unit-norm column") {
  const auto g = derive_geometry(small_config(1));
  GridOptions o;
  o.d_min = 1.0;
  const auto dict = build_transform(build_grid(g, o), g);
  REQUIRE(dict.size() == 1);
  CHECK(std::abs(dict.p.col(0).norm() - 1.0) < 1e-15);
}

TEST_CASE("synthesize: selector, zero, and explicit-sum oracle") {
  const auto g = derive_geometry(small_config(16));
  GridOptions o;
  o.d_min = 0.3;
  const auto dict = build_transform(build_grid(g, o), g);
  const auto s = dict.size();
  CVector e = CVector::Zero(s);
  e[5] = 1.0;
  CHECK((synthesize(dict, e) - dict.p.col(5)).norm() == 0.0);
  CHECK(synthesize(dict, CVector(CVector::Zero(s))).norm() == 0.0);
  CVector c = CVector::Zero(s);
  c[1] = {0.5, 0.2};
  c[7] = {-1.0, 0.0};
  c[s - 1] = {0.0, 2.0};
  CVector oracle = CVector::Zero(16);
  for (int n = 0; n < 16; ++n)
    for (Eigen::Index j = 0; j < s; ++j) oracle[n] += dict.p(n, j) * c[j];
  CHECK((synthesize(dict, c) - oracle).norm() < 1e-13);
  CHECK_THROWS_AS(synthesize(dict, CVector(CVector::Zero(s + 1))), ShapeError);
}
