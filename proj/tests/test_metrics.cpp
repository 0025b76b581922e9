#include <gtest/gtest.h>

#include "support.hpp"

using namespace penalflow;

namespace {

struct Fixture {
  Mesh mesh;
  Spaces spaces;
  explicit Fixture(const Mesh& m) : mesh(m), spaces(build_spaces(mesh)) {}
  Eigen::VectorXd field(const VectorFunction& f) const { return interpolate(spaces, f); }
};

}  // namespace

TEST(Norms, ConstantFieldOverChannel) {
  const Fixture fx(pftest::coarse_channel());
  EXPECT_NEAR(norm_l2(fx.field([](Point) { return std::array<double, 2>{1, 0}; }), fx.spaces, fx.mesh).value,
              std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(seminorm_h1(fx.field([](Point) { return std::array<double, 2>{3, -2}; }), fx.spaces, fx.mesh).value,
              0.0, 1e-12);
  EXPECT_EQ(norm_l2(Eigen::VectorXd::Zero(fx.spaces.n_u()), fx.spaces, fx.mesh).value, 0.0);
}

TEST(Norms, LinearFieldSymbolic) {
  const Fixture fx(pftest::coarse_channel());
  const auto u = fx.field([](Point x) { return std::array<double, 2>{x.x, x.y}; });
  EXPECT_NEAR(norm_l2(u, fx.spaces, fx.mesh).value, std::sqrt(160.0 / 3.0), 1e-11);
}

TEST(Norms, QuadraticOnOneTriangle) {
  const Mesh m = pftest::one_triangle();
  const Spaces s = build_spaces(m);
  const auto u = interpolate(s, [](Point x) { return std::array<double, 2>{x.y * x.y, 0}; });
  // int_T 4 y^2 over the reference triangle = 4 * 1/12
  EXPECT_NEAR(seminorm_h1(u, s, m).value, std::sqrt(1.0 / 3.0), 1e-14);
}

TEST(Norms, PoiseuilleSeminorm) {
  const Fixture fx(pftest::coarse_channel());
  const auto u = fx.field([](Point x) { return std::array<double, 2>{pftest::poiseuille_u(x), 0}; });
  EXPECT_NEAR(seminorm_h1(u, fx.spaces, fx.mesh).value, std::sqrt(320000.0 / 3.0), 1e-9);
}

TEST(Norms, RegionAdditivity) {
  const Fixture fx(generate_mesh(make_geometry(CaseId::TwoObstacles, 16), 0.2));
  const Eigen::VectorXd u = pftest::random_vector(fx.spaces.n_u(), 9);
  for (auto norm : {&norm_l2, &seminorm_h1}) {
    const double all = norm(u, fx.spaces, fx.mesh, Region::all());
    const double fluid = norm(u, fx.spaces, fx.mesh, Region::fluid());
    const double solid = norm(u, fx.spaces, fx.mesh, Region::solid());
    const double o1 = norm(u, fx.spaces, fx.mesh, Region::obstacle(1));
    const double o2 = norm(u, fx.spaces, fx.mesh, Region::obstacle(2));
    EXPECT_NEAR(all * all, fluid * fluid + solid * solid, 1e-12 * all * all);
    EXPECT_NEAR(solid * solid, o1 * o1 + o2 * o2, 1e-12 * solid * solid);
  }
}

TEST(Norms, EmptyRegionFlagged) {
  const Fixture fx(pftest::coarse_channel());
  const auto r = norm_l2(Eigen::VectorXd::Ones(fx.spaces.n_u()), fx.spaces, fx.mesh, Region::solid());
  EXPECT_TRUE(r.empty_region);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_FALSE(norm_l2(Eigen::VectorXd::Ones(fx.spaces.n_u()), fx.spaces, fx.mesh).empty_region);
}

TEST(Norms, SizeMismatchRejected) {
  const Fixture fx(pftest::coarse_channel());
  EXPECT_THROW(norm_l2(Eigen::VectorXd::Zero(3), fx.spaces, fx.mesh), InvalidInput);
}

TEST(ExtendByZero, IdentityOnNoObstacle) {
  const Mesh& m = pftest::coarse_channel();
  const SubmeshMap sub = extract_fluid_submesh(m);
  const Spaces g = build_spaces(m), s = build_spaces(sub.fluid);
  const Eigen::VectorXd u = pftest::random_vector(s.n_u(), 4);
  EXPECT_EQ((extend_by_zero(u, s, sub, g) - u).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ExtendByZero, BoxWallZeroInsideAndSeminormPreserved) {
  const Mesh& m = pftest::coarse_box_wall();
  const SubmeshMap sub = extract_fluid_submesh(m);
  const Spaces g = build_spaces(m), s = build_spaces(sub.fluid);
  // Field vanishing on the submesh walls, as a no-slip solution would.
  Eigen::VectorXd u = interpolate(s, [](Point x) {
    return std::array<double, 2>{std::sin(x.x) * x.y, std::cos(x.y) * x.x};
  });
  for (const auto& f : sub.fluid.facets)
    if (f.tag == FacetTag::Wall)
      for (int node : {f.v0, f.v1, s.edge_node(f.v0, f.v1)}) {
        u[s.velocity_dof(node, 0)] = 0.0;
        u[s.velocity_dof(node, 1)] = 0.0;
      }
  const Eigen::VectorXd ext = extend_by_zero(u, s, sub, g);
  for (int i = 0; i < g.n_nodes(); ++i) {
    const Point x = g.node_coords[static_cast<std::size_t>(i)];
    if (x.x > 0.9 && x.x < 1.1 && x.y > 0.0 && x.y < 0.6) {
      EXPECT_EQ(ext[g.velocity_dof(i, 0)], 0.0);
      EXPECT_EQ(ext[g.velocity_dof(i, 1)], 0.0);
    }
  }
  const double a = seminorm_h1(ext, g, m), b = seminorm_h1(u, s, sub.fluid);
  EXPECT_NEAR(a, b, 1e-12 * b);
}

TEST(ErrorRecord, SelfAndShift) {
  const Fixture fx(pftest::coarse_box_wall());
  const Eigen::VectorXd ref = pftest::random_vector(fx.spaces.n_u(), 12);
  Solution s;
  s.velocity = ref;
  s.scheme = Scheme::Volume;
  s.n = 1e6;
  auto r = error_record(ref, s, fx.spaces, fx.mesh);
  EXPECT_EQ(r.err_L2_Omega, 0.0);
  EXPECT_EQ(r.err_H1semi_Omega, 0.0);
  EXPECT_EQ(r.err_L2_OmegaF, 0.0);
  EXPECT_EQ(r.err_H1semi_OmegaF, 0.0);

  s.velocity = ref + fx.field([](Point) { return std::array<double, 2>{1, 0}; });
  r = error_record(ref, s, fx.spaces, fx.mesh);
  EXPECT_NEAR(r.err_L2_Omega, std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(r.err_H1semi_Omega, 0.0, 1e-10);
  EXPECT_NEAR(r.err_L2_OmegaF, std::sqrt(8.0 - 0.12), 1e-12);
  EXPECT_THROW(r.metric("bogus"), InvalidInput);
  EXPECT_EQ(r.metric("err_L2_Omega"), r.err_L2_Omega);
}

TEST(RateFit, ExactPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (int k = 1; k <= 5; ++k) pts.emplace_back(std::pow(10.0, k), std::pow(10.0, -k));
  const auto f = fit_rate(pts);
  EXPECT_NEAR(f.slope, -1.0, 1e-14);
  EXPECT_EQ(f.points_used, 5);
}

TEST(RateFit, ConstantSeries) {
  std::vector<std::pair<double, double>> pts;
  for (int k = 1; k <= 5; ++k) pts.emplace_back(std::pow(10.0, k), 3.5);
  EXPECT_NEAR(fit_rate(pts).slope, 0.0, 1e-14);
}

TEST(RateFit, PublishedViscosityColumn) {
  const std::vector<std::pair<double, double>> pts{
      {1e6, 1.246052e-1}, {1e7, 1.246381e-2}, {1e8, 1.246414e-3}, {1e9, 1.246417e-4}, {1e10, 1.246417e-5}};
  EXPECT_NEAR(fit_rate(pts, 1e6, 1e10).slope, -1.0, 0.01);
}

TEST(RateFit, WindowAndZeros) {
  std::vector<std::pair<double, double>> pts{{1e2, 1.0}, {1e6, 1e-6}, {1e7, 1e-7}, {1e8, 0.0}, {1e9, 1e-9}};
  const auto f = fit_rate(pts, 1e6, 1e10);
  EXPECT_EQ(f.points_used, 3);
  EXPECT_EQ(f.zeros_excluded, 1);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  EXPECT_THROW(fit_rate({{1e6, 1.0}, {1e7, 0.1}}), InsufficientData);
}
