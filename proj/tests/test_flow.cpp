#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <morphforge/bump.hpp>
#include <morphforge/evolve.hpp>
#include <morphforge/manifold.hpp>
#include <morphforge/velocity.hpp>

using namespace morphforge;
using Catch::Approx;

namespace {
constexpr double kPi = 3.14159265358979323846;

std::vector<std::vector<Vec3>> ambient_basis(std::size_t nseeds) {
  std::vector<Vec3> basis{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  return std::vector<std::vector<Vec3>>(nseeds, basis);
}

std::vector<std::pair<int, int>> full_pairs() {
  std::vector<std::pair<int, int>> p;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) p.emplace_back(a, b);
  return p;
}

std::vector<std::vector<Vec3>> zero_seconds(std::size_t nseeds, std::size_t np) {
  return std::vector<std::vector<Vec3>>(nseeds, std::vector<Vec3>(np, Vec3::Zero()));
}

VelocityField wavy_field() {
  return make_expression_field(
      {"0.3*sin(y) + 0.1*x", "0.2*cos(x) - 0.1*y", "0.15*sin(x + y)"});
}
}  // namespace

TEST_CASE("zero field is the identity morph with trivial transports") {
  auto v = make_constant_field(Vec3(0, 0, 0));
  std::vector<Vec3> seeds{Vec3(1, 0, 0), Vec3(0.2, -0.4, 0.9)};
  auto pairs = full_pairs();
  auto rec = evolve(v, seeds, ambient_basis(2), zero_seconds(2, pairs.size()), pairs);
  for (int s = 0; s < 2; ++s)
    for (int it = 0; it < rec.nt(); ++it) {
      REQUIRE((rec.position(s, it) - seeds[s]).norm() < 1e-14);
      REQUIRE((rec.transport1(s, it, 0) - Vec3(1, 0, 0)).norm() < 1e-14);
      REQUIRE((rec.transport1(s, it, 1) - Vec3(0, 1, 0)).norm() < 1e-14);
      REQUIRE((rec.transport1(s, it, 2) - Vec3(0, 0, 1)).norm() < 1e-14);
      for (std::size_t p = 0; p < pairs.size(); ++p)
        REQUIRE(rec.transport2(s, it, static_cast<int>(p)).norm() < 1e-14);
    }
}

TEST_CASE("the radial ramp field doubles the circle at time one") {
  double R = 2.0;
  auto v = apply_bump(make_radial_ramp_field(R), BumpFunction{2.2, 3.2});
  std::vector<Vec3> seeds{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-std::sqrt(0.5), std::sqrt(0.5), 0)};
  auto rec = evolve(v, seeds, {}, {}, {});
  for (int s = 0; s < 3; ++s) {
    int mid = rec.nt() / 2;
    double tm = rec.times[mid];
    REQUIRE((rec.position(s, mid) - (1 + (R - 1) * tm) * seeds[s]).norm() < 1e-9);
    REQUIRE((rec.position(s, rec.nt() - 1) - R * seeds[s]).norm() < 1e-9);
  }
}

TEST_CASE("linear field integrates to the exact exponential") {
  auto v = make_linear_field(Eigen::Matrix3d::Identity(), Vec3::Zero());
  std::vector<Vec3> seeds{Vec3(0.3, -0.7, 0.2)};
  EvolveOptions opt;
  opt.steps = 64;
  auto rec = evolve(v, seeds, ambient_basis(1), {}, {}, opt);
  double e1 = std::exp(1.0);
  REQUIRE((rec.position(0, rec.nt() - 1) - e1 * seeds[0]).norm() < 1e-10);
  for (int a = 0; a < 3; ++a) {
    Vec3 want = Vec3::Zero();
    want[a] = e1;
    REQUIRE((rec.transport1(0, rec.nt() - 1, a) - want).norm() < 1e-10);
  }
}

TEST_CASE("trajectories that exit the domain are rejected") {
  auto v = make_constant_field(Vec3(1, 0, 0), 1.2);
  REQUIRE_THROWS_AS(evolve(v, {Vec3(1, 0, 0)}, {}, {}, {}), LeftDomain);
  REQUIRE_THROWS_AS(evolve(v, {Vec3(5, 0, 0)}, {}, {}, {}), LeftDomain);
}

TEST_CASE("variational transports match finite differences of the flow") {
  auto v = wavy_field();
  const Vec3 p(0.3, -0.2, 0.5);
  const double eps = 1e-4;

  auto flow_to_one = [&](const Vec3& seed) {
    auto rec = evolve(v, {seed}, {}, {}, {});
    return rec.position(0, rec.nt() - 1);
  };

  auto pairs = full_pairs();
  auto rec = evolve(v, {p}, ambient_basis(1), zero_seconds(1, pairs.size()), pairs);
  int last = rec.nt() - 1;

  for (int a = 0; a < 3; ++a) {
    Vec3 da = Vec3::Zero();
    da[a] = eps;
    Vec3 fd = (flow_to_one(p + da) - flow_to_one(p - da)) / (2 * eps);
    Vec3 tr = rec.transport1(0, last, a);
    REQUIRE((tr - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
  for (std::size_t ip = 0; ip < pairs.size(); ++ip) {
    auto [a, b] = pairs[ip];
    Vec3 da = Vec3::Zero(), db = Vec3::Zero();
    da[a] = eps;
    db[b] = eps;
    Vec3 fd = (flow_to_one(p + da + db) - flow_to_one(p + da - db) - flow_to_one(p - da + db) +
               flow_to_one(p - da - db)) /
              (4 * eps * eps);
    Vec3 tr = rec.transport2(0, last, static_cast<int>(ip));
    REQUIRE((tr - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("flows compose across intermediate times") {
  auto v = apply_bump(wavy_field(), BumpFunction{5.0, 8.0});
  const Vec3 p(0.8, 0.1, -0.3);

  EvolveOptions first;
  first.t0 = 0.0;
  first.t1 = 0.4;
  auto recA = evolve(v, {p}, {}, {}, {}, first);
  Vec3 mid = recA.position(0, recA.nt() - 1);

  EvolveOptions second;
  second.t0 = 0.4;
  second.t1 = 1.0;
  auto recB = evolve(v, {mid}, {}, {}, {}, second);

  auto recC = evolve(v, {p}, {}, {}, {});
  REQUIRE((recB.position(0, recB.nt() - 1) - recC.position(0, recC.nt() - 1)).norm() < 1e-8);
}

TEST_CASE("the inverse flow returns the seed") {
  auto v = apply_bump(wavy_field(), BumpFunction{5.0, 8.0});
  const Vec3 p(0.4, 0.6, -0.1);
  auto fwd = evolve(v, {p}, {}, {}, {});
  Vec3 q = fwd.position(0, fwd.nt() - 1);

  VelocityField rev;
  rev.v = [v](const Vec3& x, double t) { return Vec3(-v.eval(x, 1.0 - t)); };
  rev.fd_step = v.fd_step;
  auto back = evolve(rev, {q}, {}, {}, {});
  REQUIRE((back.position(0, back.nt() - 1) - p).norm() < 1e-8);
}

TEST_CASE("field_from_morph recovers generating fields") {
  BumpFunction bump{2.5, 3.5};

  SECTION("translation morph has a constant field") {
    Vec3 c(0.3, -0.2, 0.1);
    auto F = [c](const Vec3& p, double t) { return Vec3(p + t * c); };
    auto Ft = [c](const Vec3&, double) { return c; };
    auto w = field_from_morph(F, Ft, bump);
    Vec3 got = w.eval(Vec3(0.5, 0.4, -0.3), 0.7);
    REQUIRE((got - c).norm() < 1e-7);
  }

  SECTION("scaling morph has the radial field psi'/psi x") {
    auto F = [](const Vec3& p, double t) { return Vec3((1 + t) * p); };
    auto Ft = [](const Vec3& p, double) { return p; };
    auto w = field_from_morph(F, Ft, bump);
    Vec3 x(0.5, 0.0, 0.0);
    double t = 0.5;
    REQUIRE((w.eval(x, t) - x / (1 + t)).norm() < 1e-7);
  }

  SECTION("re-evolving the recovered field reproduces the morph") {
    auto F = [](const Vec3& p, double t) { return Vec3((1 + t) * p); };
    auto Ft = [](const Vec3& p, double) { return p; };
    auto w = field_from_morph(F, Ft, bump);
    auto M = make_circle(1.0, 16);
    std::vector<Vec3> seeds;
    for (int k = 0; k < M.grid.nodes(); ++k) seeds.push_back(M.position(k));
    auto rec = evolve(w, seeds, {}, {}, {});
    double worst = 0;
    for (int s = 0; s < rec.nseeds; ++s)
      for (int it = 0; it < rec.nt(); ++it)
        worst = std::max(worst,
                         (rec.position(s, it) - F(seeds[s], rec.times[it])).norm());
    REQUIRE(worst < 1e-8);
  }
}

TEST_CASE("bump profile has plateau, support, and symmetric midpoint") {
  BumpFunction b{1.0, 2.0};
  REQUIRE(b.value(Vec3(0.5, 0, 0)) == Approx(1.0).margin(1e-15));
  REQUIRE(b.value(Vec3(0, 1.0, 0)) == Approx(1.0).margin(1e-15));
  REQUIRE(b.value(Vec3(2.0, 0, 0)) == Approx(0.0).margin(1e-15));
  REQUIRE(b.value(Vec3(0, 0, 2.7)) == Approx(0.0).margin(1e-15));
  REQUIRE(b.value(Vec3(1.5, 0, 0)) == Approx(0.5).margin(1e-12));
  for (double r : {0.3, 1.1, 1.5, 1.9, 2.4})
    for (double dir : {0.0, 1.2, 2.5}) {
      Vec3 x = r * Vec3(std::cos(dir), std::sin(dir), 0.2).normalized();
      double val = b.value(x);
      REQUIRE(val >= 0.0);
      REQUIRE(val <= 1.0);
    }

  // gradient and hessian agree with finite differences
  Vec3 x(0.9, 0.8, 0.4);
  const double h = 1e-5;
  Vec3 grad = b.gradient(x);
  Eigen::Matrix3d hess = b.hessian(x);
  for (int i = 0; i < 3; ++i) {
    Vec3 dx = Vec3::Zero();
    dx[i] = h;
    double fd = (b.value(x + dx) - b.value(x - dx)) / (2 * h);
    REQUIRE(grad[i] == Approx(fd).margin(1e-7));
    Vec3 gfd = (b.gradient(x + dx) - b.gradient(x - dx)) / (2 * h);
    for (int j = 0; j < 3; ++j) REQUIRE(hess(i, j) == Approx(gfd[j]).margin(1e-6));
  }
}

TEST_CASE("sobolev norm of the zero field vanishes") {
  auto v = make_constant_field(Vec3(0, 0, 0));
  BoxGrid box;
  box.halfwidth = 1.0;
  box.n = 17;
  box.dim = 2;
  auto rep = sobolev_norm_sq(v, 2, box);
  REQUIRE(rep.value == Approx(0.0).margin(1e-15));
}

TEST_CASE("sobolev norm of a product sine field matches the closed form") {
  auto v = make_expression_field({"sin(pi*x)*sin(pi*y)", "0", "0"});
  BoxGrid box;
  box.center = Vec3(0.5, 0.5, 0);
  box.halfwidth = 0.5;
  box.n = 129;
  box.dim = 2;
  box.time_nodes = 3;
  auto rep = sobolev_norm_sq(v, 1, box);
  double want = 0.25 + kPi * kPi / 2;
  REQUIRE(std::abs(rep.value - want) < 0.02 * want);
}

TEST_CASE("sobolev norm factorizes for separable fields") {
  BumpFunction bump{1.5, 2.5};
  auto unit = apply_bump(make_scaled_radial_field([](double) { return 1.0; }), bump);
  auto scaled = apply_bump(
      make_scaled_radial_field([](double t) { return 1.0 / (1.0 + t); }), bump);
  BoxGrid box;
  box.halfwidth = 2.6;
  box.n = 129;
  box.dim = 2;
  box.time_nodes = 33;
  double base = sobolev_norm_sq(unit, 2, box).value;
  double got = sobolev_norm_sq(scaled, 2, box).value;
  // int_0^1 dt/(1+t)^2 = 1/2
  REQUIRE(std::abs(got - 0.5 * base) < 1e-3 * base);
}

TEST_CASE("admissibility report for the radial ramp against the doubled circle") {
  double R = 2.0;
  auto v = apply_bump(make_radial_ramp_field(R), BumpFunction{2.2, 3.2});
  auto M = make_circle(1.0, 64);
  auto N = make_circle(R, 64);
  BoxGrid box;
  box.halfwidth = 3.3;
  box.n = 129;
  box.dim = 2;
  SECTION("generous budget accepts") {
    auto rep = admissibility_check(v, M, N, 1e6, 2, box);
    REQUIRE(rep.match_residual < 1e-6);
    REQUIRE(rep.maps_to_target);
    REQUIRE(rep.norm_within_bound);
  }
  SECTION("zero budget rejects on the norm") {
    auto rep = admissibility_check(v, M, N, 0.0, 2, box);
    REQUIRE(rep.maps_to_target);
    REQUIRE_FALSE(rep.norm_within_bound);
  }
  SECTION("zero field misses the target") {
    auto z = make_constant_field(Vec3(0, 0, 0));
    auto rep = admissibility_check(z, M, N, 1e6, 2, box);
    REQUIRE_FALSE(rep.maps_to_target);
    REQUIRE(rep.match_residual == Approx(1.0).margin(1e-6));
  }
}
