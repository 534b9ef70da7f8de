#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <morphforge/eleq.hpp>
#include <morphforge/energy.hpp>

using namespace morphforge;
using Catch::Approx;

namespace {

// chart-identity map from the unit circle onto the radius-R circle
ChartMap radial_circle_map() {
  ChartMap f;
  f.value = [](const Param& u) { return u; };
  f.jacobian = [](const Param&) { return std::array<double, 4>{1, 0, 0, 1}; };
  f.hessian = [](const Param&) { return std::array<double, 6>{0, 0, 0, 0, 0, 0}; };
  return f;
}

// arc-position 2t + amp*sin(t) on the radius-2 target, i.e. chart value
// t + (amp/2) sin t; a generic non-critical self-map of the circle pair
ChartMap wavy_circle_map(double amp) {
  ChartMap f;
  f.value = [amp](const Param& u) { return Param{u[0] + 0.5 * amp * std::sin(u[0]), u[1]}; };
  f.jacobian = [amp](const Param& u) {
    return std::array<double, 4>{1 + 0.5 * amp * std::cos(u[0]), 0, 0, 1};
  };
  f.hessian = [amp](const Param& u) {
    return std::array<double, 6>{-0.5 * amp * std::sin(u[0]), 0, 0, 0, 0, 0};
  };
  return f;
}

CovariantTensorField pullback_through(const EmbeddedManifold& M, const EmbeddedManifold& N,
                                      const ChartMap& f) {
  auto samples = map_samples_from_chart_map(M, N, f, false);
  return pullback(first_fundamental_form(N), samples, N);
}

CovariantTensorField scaled(const CovariantTensorField& alpha, double factor) {
  CovariantTensorField out = alpha;
  for (auto& c : out.comps) c *= factor;
  return out;
}

}  // namespace

TEST_CASE("christoffel symbols") {
  SECTION("arc-length circle chart is flat") {
    EmbeddedManifold M = make_circle(1.0, 128);
    ChristoffelField G = christoffels(first_fundamental_form(M));
    for (int node = 0; node < M.grid.nodes(); ++node)
      REQUIRE(std::abs(G.at(node, 0, 0, 0)) < 1e-12);
  }
  SECTION("angle chart of an ellipse") {
    const double a = 1.3, b = 0.8;
    EmbeddedManifold M = make_ellipse(a, b, 256);
    ChristoffelField G = christoffels(first_fundamental_form(M));
    for (int node = 0; node < M.grid.nodes(); ++node) {
      double t = M.param(node, 0)[0];
      double den = a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t);
      double expect = (a * a - b * b) * std::sin(t) * std::cos(t) / den;
      REQUIRE(G.at(node, 0, 0, 0) == Approx(expect).margin(1e-8));
    }
  }
  SECTION("round sphere") {
    EmbeddedManifold M = make_sphere(1.0, 64, 128);
    ChristoffelField G = christoffels(first_fundamental_form(M));
    for (int i0 = 0; i0 < 64; ++i0)
      for (int i1 = 0; i1 < 128; i1 += 17) {
        int node = M.grid.id(i0, i1);
        double th = M.param(i0, i1)[0];
        double cot = std::cos(th) / std::sin(th);
        auto close = [&](double got, double expect) {
          REQUIRE(got == Approx(expect).margin(1e-4 * (1 + std::abs(expect))));
        };
        close(G.at(node, 0, 1, 1), -std::sin(th) * std::cos(th));
        close(G.at(node, 1, 0, 1), cot);
        close(G.at(node, 0, 0, 0), 0.0);
        close(G.at(node, 0, 0, 1), 0.0);
        close(G.at(node, 1, 0, 0), 0.0);
        close(G.at(node, 1, 1, 1), 0.0);
        // symmetry in the lower pair
        REQUIRE(G.at(node, 0, 0, 1) == G.at(node, 0, 1, 0));
        REQUIRE(G.at(node, 1, 0, 1) == G.at(node, 1, 1, 0));
      }
  }
  SECTION("constant conformal factors cancel") {
    EmbeddedManifold M = make_sphere(1.0, 32, 64);
    auto g = first_fundamental_form(M);
    ChristoffelField G0 = christoffels(g);
    ChristoffelField G1 = christoffels(scaled(g, 6.25));
    for (std::size_t i = 0; i < G0.comps.size(); ++i)
      REQUIRE(G1.comps[i] == Approx(G0.comps[i]).margin(1e-12));
  }
  SECTION("rank validation") {
    EmbeddedManifold M = make_circle(1.0, 64);
    CovariantTensorField not_a_metric;
    not_a_metric.dim = 1;
    not_a_metric.order = 1;
    not_a_metric.grid = M.grid;
    not_a_metric.comps.assign(M.grid.nodes(), 1.0);
    REQUIRE_THROWS_AS(christoffels(not_a_metric), ValidationError);
  }
}

TEST_CASE("raised strain tensor") {
  EmbeddedManifold M = make_sphere(1.0, 32, 64);
  auto alpha = first_fundamental_form(M);

  SECTION("no strain for identical metrics") {
    RaisedStrain B = raised_strain(alpha, alpha);
    for (double c : B.comps) REQUIRE(c == 0.0);
  }
  SECTION("constant conformal stretch raises to the inverse metric") {
    const double R2 = 4.0;
    RaisedStrain B = raised_strain(alpha, scaled(alpha, R2));
    for (int node = 0; node < M.grid.nodes(); ++node) {
      auto inv = detail::invert_metric(alpha.at(node), 2, 1.0);
      for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 2; ++m) {
          double expect = (R2 - 1) * inv[k * 2 + m];
          REQUIRE(B.at(node, k, m) ==
                  Approx(expect).margin(1e-11 * (1 + std::abs(expect))));
        }
      REQUIRE(B.at(node, 0, 1) == Approx(B.at(node, 1, 0)).margin(1e-12));
    }
  }
  SECTION("validation") {
    EmbeddedManifold other = make_sphere(1.0, 16, 32);
    REQUIRE_THROWS_AS(raised_strain(alpha, first_fundamental_form(other)), ValidationError);
    CovariantTensorField degenerate = alpha;
    std::fill(degenerate.comps.begin(), degenerate.comps.end(), 0.0);
    REQUIRE_THROWS_AS(raised_strain(degenerate, alpha), SingularMetric);
  }
}

TEST_CASE("component residual of the criticality equation") {
  SECTION("identical metrics give an exact zero") {
    EmbeddedManifold M = make_sphere(1.0, 24, 48);
    auto alpha = first_fundamental_form(M);
    ELResidual res = el_residual(alpha, alpha);
    REQUIRE(res.max_norm == 0.0);
    REQUIRE(res.l2_norm == 0.0);
  }
  SECTION("conformal stretch on a curved circle chart: residual order >= 2") {
    double prev = 0;
    std::vector<double> norms;
    for (int n : {64, 128, 256}) {
      EmbeddedManifold M = make_ellipse(1.3, 0.8, n);
      auto alpha = first_fundamental_form(M);
      ELResidual res = el_residual(alpha, scaled(alpha, 4.0));
      norms.push_back(res.max_norm);
      (void)prev;
    }
    REQUIRE(norms[0] > 0);
    double order01 = std::log2(norms[0] / norms[1]);
    double order12 = std::log2(norms[1] / norms[2]);
    REQUIRE(order01 >= 2.0);
    REQUIRE(order12 >= 2.0);
  }
  SECTION("radial stretch of the sphere is discretely exact") {
    // on the standard sphere chart every surviving term of the residual
    // flows through the same finite-difference array, so the truncation
    // errors cancel identically; what remains is pole-amplified rounding
    // noise (about 1e-12), far below any truncation-driven sequence
    for (int n : {24, 48, 96}) {
      EmbeddedManifold M = make_sphere(1.0, n, 2 * n);
      auto alpha = first_fundamental_form(M);
      ELResidual res = el_residual(alpha, scaled(alpha, 4.0));
      REQUIRE(res.max_norm < 1e-10);
      REQUIRE(res.l2_norm < 1e-12);
    }
  }
  SECTION("radial circle map through the pull-back route is exactly critical") {
    EmbeddedManifold M = make_circle(1.0, 128);
    EmbeddedManifold N = make_circle(2.0, 128);
    auto beta = pullback_through(M, N, radial_circle_map());
    ELResidual res = el_residual(first_fundamental_form(M), beta);
    REQUIRE(res.max_norm < 1e-12);
  }
  SECTION("generic circle map stays bounded away from critical") {
    for (int n : {64, 128, 256}) {
      EmbeddedManifold M = make_circle(1.0, n);
      EmbeddedManifold N = make_circle(2.0, n);
      auto beta = pullback_through(M, N, wavy_circle_map(0.3));
      ELResidual res = el_residual(first_fundamental_form(M), beta);
      REQUIRE(res.max_norm > 0.1);
      REQUIRE(res.l2_norm > 0.1);
    }
  }
}

TEST_CASE("first variation against finite differences") {
  EmbeddedManifold M = make_circle(1.0, 256);
  EmbeddedManifold N = make_circle(2.0, 256);
  ChartVectorField Y_sin = [](const Param& u) {
    return std::array<double, 2>{std::sin(u[0]), 0.0};
  };

  SECTION("zero variation field") {
    ChartVectorField Y0 = [](const Param&) { return std::array<double, 2>{0.0, 0.0}; };
    FirstVariationReport rep = first_variation(wavy_circle_map(0.3), Y0, M, N);
    REQUIRE(rep.analytic == 0.0);
    REQUIRE(rep.finite_difference == 0.0);
  }
  SECTION("radial map is critical") {
    FirstVariationReport rep = first_variation(radial_circle_map(), Y_sin, M, N);
    REQUIRE(std::abs(rep.analytic) < 1e-6);
    REQUIRE(std::abs(rep.finite_difference) < 1e-6);
  }
  SECTION("generic map: analytic value matches the energy difference") {
    FirstVariationReport rep = first_variation(wavy_circle_map(0.3), Y_sin, M, N);
    REQUIRE(std::abs(rep.analytic) > 0.01);
    REQUIRE(rep.rel_err < 1e-3);
  }
  SECTION("linearity in the variation field") {
    ChartVectorField Y_cos = [](const Param& u) {
      return std::array<double, 2>{std::cos(2 * u[0]), 0.0};
    };
    ChartVectorField Y_sum = [](const Param& u) {
      return std::array<double, 2>{std::sin(u[0]) + std::cos(2 * u[0]), 0.0};
    };
    ChartMap h = wavy_circle_map(0.3);
    double v1 = first_variation(h, Y_sin, M, N).analytic;
    double v2 = first_variation(h, Y_cos, M, N).analytic;
    double v12 = first_variation(h, Y_sum, M, N).analytic;
    REQUIRE(v12 == Approx(v1 + v2).epsilon(1e-8));
  }
}

TEST_CASE("divergence integral vanishes on closed manifolds") {
  // the discrete sum telescopes exactly (summation by parts with periodic
  // and pole-wrapped ghosts), so these bounds are conservative
  SECTION("circle") {
    EmbeddedManifold M = make_circle(1.0, 128);
    ChartVectorField X = [](const Param& u) {
      return std::array<double, 2>{std::cos(3 * u[0]) + 0.2 * std::sin(u[0]), 0.0};
    };
    REQUIRE(std::abs(divergence_integral(X, M)) < 1e-8);
  }
  SECTION("sphere, gradients of ambient coordinates") {
    EmbeddedManifold M = make_sphere(1.0, 64, 128);
    ChartVectorField grad_z = [](const Param& u) {
      return std::array<double, 2>{-std::sin(u[0]), 0.0};
    };
    ChartVectorField grad_mix = [](const Param& u) {
      double th = u[0], ph = u[1];
      return std::array<double, 2>{
          std::cos(th) * (0.7 * std::cos(ph) - 1.2 * std::sin(ph)) - 0.4 * std::sin(th),
          (-0.7 * std::sin(ph) - 1.2 * std::cos(ph)) / std::sin(th)};
    };
    REQUIRE(std::abs(divergence_integral(grad_z, M)) < 1e-8);
    REQUIRE(std::abs(divergence_integral(grad_mix, M)) < 1e-8);
  }
}
