#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "domino/shapes.hpp"
#include "domino/spatial.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace domino;

namespace {

void expect_box(const BoundingBox& b, Vec3 lo, Vec3 hi) {
  for (int a = 0; a < 3; ++a) {
    EXPECT_DOUBLE_EQ(b.min[a], lo[a]) << "axis " << a;
    EXPECT_DOUBLE_EQ(b.max[a], hi[a]) << "axis " << a;
  }
}

}  // namespace

TEST(DomainBox, DefaultTrimsOnUnitBox) {
  const auto d = make_domain_box({{0, 0, 0}, {1, 1, 1}}, {0, 1}, TrimFactors{});
  expect_box(d, {-1, -0.5, -0.5}, {3, 1.5, 1.5});
}

TEST(DomainBox, ZeroTrimIsIdentity) {
  const BoundingBox b{{0.2, -1, 3}, {1, 2, 4}};
  expect_box(make_domain_box(b, {0, 1}, {0, 0, 0}), b.min, b.max);
}

TEST(DomainBox, ScalesWithBodyLength) {
  const auto d = make_domain_box({{0, 0, 0}, {2, 1, 1}}, {0, 1}, TrimFactors{});
  EXPECT_DOUBLE_EQ(d.min.x, -2.0);
  EXPECT_DOUBLE_EQ(d.max.x, 6.0);
}

TEST(DomainBox, NegativeFlowMirrorsTrim) {
  const auto d = make_domain_box({{0, 0, 0}, {1, 1, 1}}, {1, -1}, TrimFactors{});
  EXPECT_DOUBLE_EQ(d.min.y, -2.0);
  EXPECT_DOUBLE_EQ(d.max.y, 2.0);
}

TEST(Grid, CellCenteredNodes) {
  const GridGeometry g({{0, 0, 0}, {2, 4, 8}}, 4);
  EXPECT_EQ(g.node_count(), 64u);
  EXPECT_EQ(g.cell_size(), (Vec3{0.5, 1.0, 2.0}));
  EXPECT_EQ(g.node(0, 0, 0), (Vec3{0.25, 0.5, 1.0}));
  EXPECT_EQ(g.node(3, 3, 3), (Vec3{1.75, 3.5, 7.0}));
  EXPECT_EQ(g.node(g.flat(1, 2, 3)), g.node(1, 2, 3));
  StructuredGrid grid(g, 3);
  EXPECT_EQ(grid.data.size(), 64u * 3u);
}

TEST(Grid, TrilinearReproducesLinearFieldAndClamps) {
  const GridGeometry g({{-1, -1, -1}, {1, 1, 1}}, 6);
  StructuredGrid grid(g, 1);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Vec3 p = g.node(n);
    grid.at(n, 0) = 2 * p.x - p.y + 0.5 * p.z;
  }
  const Vec3 q{0.1, -0.3, 0.45};
  EXPECT_NEAR(sample_channel(grid, 0, q), 2 * 0.1 + 0.3 + 0.225, 1e-12);
  // Outside the node span the boundary value is held.
  const Vec3 last = g.node(5, 5, 5);
  EXPECT_NEAR(sample_channel(grid, 0, {5, 5, 5}), 2 * last.x - last.y + 0.5 * last.z, 1e-12);
}

TEST(BallQuery, Examples) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  NeighborIndex idx(pts, 0.5);
  EXPECT_EQ(idx.ball_query({0, 0, 0}, 0.5, 10), (std::vector<Neighbor>{{0, 0.0}}));
  NeighborIndex wide(pts, 2.0);
  EXPECT_EQ(wide.ball_query({0, 0, 0}, 2.0, 1), (std::vector<Neighbor>{{0, 0.0}}));
  EXPECT_TRUE(wide.ball_query({10, 0, 0}, 2.0, 4).empty());
  EXPECT_THROW(wide.ball_query({0, 0, 0}, 0.0, 1), ContractError);
  EXPECT_THROW(wide.ball_query({0, 0, 0}, 1.0, 0), ContractError);
}

TEST(BallQuery, TieBrokenByLowerIndex) {
  const std::vector<Vec3> pts{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
  NeighborIndex idx(pts, 1.0);
  const auto r = idx.ball_query({0, 0, 0}, 1.0, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].index, 0u);
  EXPECT_EQ(r[1].index, 1u);
}

TEST(BallQuery, MatchesBruteForceScan) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(1000);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  for (double radius : {0.05, 0.1, 0.3}) {
    NeighborIndex idx(pts, radius);
    for (int q = 0; q < 100; ++q) {
      const Vec3 c{u(rng), u(rng), u(rng)};
      for (std::size_t cap : {std::size_t{1}, std::size_t{8}, std::size_t{1000}})
        EXPECT_EQ(idx.ball_query(c, radius, cap), testkit::brute_ball_query(pts, c, radius, cap));
    }
  }
}

TEST(BallQuery, RadiusLargerThanCellEdge) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(300);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  NeighborIndex idx(pts, 0.1);
  for (int q = 0; q < 20; ++q) {
    const Vec3 c{u(rng), u(rng), u(rng)};
    EXPECT_EQ(idx.ball_query(c, 0.35, 50), testkit::brute_ball_query(pts, c, 0.35, 50));
  }
}

TEST(BallQuery, InsertionOrderInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(400);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> shuffled(pts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = pts[perm[i]];
  NeighborIndex a(pts, 0.2), b(shuffled, 0.2);
  for (int q = 0; q < 50; ++q) {
    const Vec3 c{u(rng), u(rng), u(rng)};
    const auto ra = a.ball_query(c, 0.2, 1000), rb = b.ball_query(c, 0.2, 1000);
    ASSERT_EQ(ra.size(), rb.size());
    std::vector<Vec3> sa, sb;
    for (const auto& n : ra) sa.push_back(pts[n.index]);
    for (const auto& n : rb) sb.push_back(shuffled[n.index]);
    auto lex = [](const Vec3& x, const Vec3& y) { return std::tie(x.x, x.y, x.z) < std::tie(y.x, y.y, y.z); };
    std::sort(sa.begin(), sa.end(), lex);
    std::sort(sb.begin(), sb.end(), lex);
    EXPECT_EQ(sa, sb);
  }
}

TEST(Sdf, SphereCenterIsNegativeRadius) {
  const auto sphere = make_icosphere(3, 0.5, {0.5, 0.5, 0.5});
  const GridGeometry g({{0, 0, 0}, {1, 1, 1}}, 9);
  const auto sdf = compute_sdf_grid(sphere, g);
  const double center = sdf.at(g.flat(4, 4, 4), kSdf);
  double inradius = 1e9;
  for (std::size_t f = 0; f < sphere.face_count(); ++f)
    inradius = std::min(inradius, dot(sphere.face_center[f] - Vec3{0.5, 0.5, 0.5}, sphere.face_normal[f]));
  const double tol = 0.5 * g.cell_size().x + (0.5 - inradius);
  EXPECT_NEAR(center, -0.5, tol);
  EXPECT_LT(center, 0.0);
}

TEST(Sdf, DistanceAboveLargeFlatTriangle) {
  TriangleSurface tri;
  tri.vertices = {{-100, -100, 0}, {100, -100, 0}, {0, 100, 0}};
  tri.faces = {{0, 1, 2}};
  face_properties(tri);
  const GridGeometry g({{-1, -1, 0}, {1, 1, 2}}, 4);
  const auto sdf = compute_sdf_grid(tri, g);
  for (std::size_t n = 0; n < g.node_count(); ++n) EXPECT_NEAR(sdf.at(n, kSdf), g.node(n).z, 1e-12);
}

TEST(Sdf, MagnitudesMatchBruteForceExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  auto body = scaled_translated(make_icosphere(2), {0.6, 0.4, 0.3}, {u(rng), u(rng), u(rng)});
  const GridGeometry g({{-1.1, -0.9, -0.8}, {1.2, 0.95, 0.85}}, 16);
  const auto sdf = compute_sdf_grid(body, g);
  for (std::size_t n = 0; n < g.node_count(); ++n)
    ASSERT_EQ(std::abs(sdf.at(n, kSdf)), testkit::brute_unsigned_distance(body, g.node(n))) << "node " << n;
}

TEST(Sdf, SignAndGradientOnSphere) {
  const auto sphere = make_icosphere(3, 1.0);
  const GridGeometry g({{-2, -2, -2}, {2, 2, 2}}, 16);
  SdfReport report;
  const auto sdf = compute_sdf_grid(sphere, g, &report);
  EXPECT_FALSE(report.unsigned_fallback);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Vec3 p = g.node(n);
    const double r = norm(p);
    if (r < 0.9) {
      EXPECT_LT(sdf.at(n, kSdf), 0.0);
    }
    if (r > 1.0) {
      EXPECT_GT(sdf.at(n, kSdf), 0.0);
    }
    if (r > 1.4 && r < 1.6) {
      const Vec3 grad{sdf.at(n, kSdfDx), sdf.at(n, kSdfDy), sdf.at(n, kSdfDz)};
      EXPECT_NEAR(norm(grad), 1.0, 0.1);
    }
  }
}

TEST(Sdf, FacetingBound) {
  const auto sphere = make_icosphere(3, 1.0);
  double inradius = 1e9;
  for (std::size_t f = 0; f < sphere.face_count(); ++f)
    inradius = std::min(inradius, dot(sphere.face_center[f], sphere.face_normal[f]));
  const double bound = 1.0 - inradius;
  const GridGeometry g({{-1.7, -1.7, -1.7}, {1.7, 1.7, 1.7}}, 12);
  const auto sdf = compute_sdf_grid(sphere, g);
  for (std::size_t n = 0; n < g.node_count(); ++n)
    EXPECT_LE(std::abs(std::abs(sdf.at(n, kSdf)) - std::abs(norm(g.node(n)) - 1.0)), bound + 1e-12);
}

TEST(Sdf, TranslationEquivariantExactly) {
  const auto cube = testkit::surface_from_triangles(testkit::unit_cube_triangles());
  const Vec3 shift{2, -4, 8};
  auto moved = cube;
  for (auto& v : moved.vertices) v += shift;
  face_properties(moved);
  const GridGeometry g({{-0.5, -0.5, -0.5}, {1.5, 1.5, 1.5}}, 8);
  const GridGeometry gm({g.box.min + shift, g.box.max + shift}, 8);
  const auto a = compute_sdf_grid(cube, g);
  const auto b = compute_sdf_grid(moved, gm);
  EXPECT_EQ(a.data, b.data);
}

TEST(Sdf, OpenSurfaceFallsBackToUnsigned) {
  TriangleSurface tri;
  tri.vertices = {{-1, -1, 0}, {1, -1, 0}, {0, 1, 0}};
  tri.faces = {{0, 1, 2}};
  face_properties(tri);
  SdfReport report;
  const auto sdf = compute_sdf_grid(tri, GridGeometry({{-1, -1, -1}, {1, 1, 1}}, 8), &report);
  EXPECT_TRUE(report.unsigned_fallback);
  for (std::size_t n = 0; n < sdf.geometry.node_count(); ++n) EXPECT_GE(sdf.at(n, kSdf), 0.0);
}

TEST(Sdf, RejectsTinyGrid) {
  EXPECT_THROW(compute_sdf_grid(make_icosphere(1), GridGeometry({{-2, -2, -2}, {2, 2, 2}}, 3)), ContractError);
}

TEST(SurfaceSampling, FaceFrequencyFollowsArea) {
  TriangleSurface s;
  // Two disjoint triangles with areas 0.9 and 0.1.
  s.vertices = {{0, 0, 0}, {1.8, 0, 0}, {0, 1, 0}, {5, 0, 0}, {5.2, 0, 0}, {5, 1, 0}};
  s.faces = {{0, 1, 2}, {3, 4, 5}};
  face_properties(s);
  ASSERT_NEAR(s.face_area[0], 0.9, 1e-12);
  Rng rng(1);
  const auto samples = sample_surface_area_weighted(s, 100000, rng);
  const double freq = static_cast<double>(std::count_if(samples.begin(), samples.end(), [](const auto& x) { return x.face == 0; })) / 1e5;
  EXPECT_NEAR(freq, 0.9, 0.01);
}

TEST(SurfaceSampling, PointsLieOnTheTriangle) {
  TriangleSurface s;
  s.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  s.faces = {{0, 1, 2}};
  face_properties(s);
  Rng rng(2);
  double total = 0.0;
  for (const auto& x : sample_surface_area_weighted(s, 5000, rng)) {
    EXPECT_GE(x.position.x, 0.0);
    EXPECT_GE(x.position.y, 0.0);
    EXPECT_LE(x.position.x + x.position.y, 1.0 + 1e-15);
    EXPECT_EQ(x.position.z, 0.0);
    EXPECT_EQ(x.normal, (Vec3{0, 0, 1}));
    total += x.area_weight;
  }
  EXPECT_NEAR(total, 0.5, 1e-12);
}

TEST(SurfaceSampling, StratifiedCloudIsEqualAreaAndBalanced) {
  const auto sphere = make_icosphere(3);
  Rng rng(9);
  const auto cloud = sample_surface_stratified(sphere, sphere.face_count(), rng);
  double total = 0.0;
  std::vector<int> per_face(sphere.face_count(), 0);
  for (const auto& x : cloud) {
    total += x.area_weight;
    ++per_face[x.face];
    EXPECT_NEAR(norm(x.position), 1.0, 0.02);
  }
  EXPECT_NEAR(total, sphere.total_area(), 1e-10);
  // Per-face counts stay within one of the expectation.
  for (std::size_t f = 0; f < sphere.face_count(); ++f)
    EXPECT_LT(std::abs(per_face[f] - sphere.face_area[f] / sphere.total_area() * cloud.size()), 2.0);
}

TEST(VolumeSampling, EmptySurfaceIsPlainUniform) {
  const BoundingBox box{{-1, 0, 2}, {3, 1, 4}};
  Rng rng(4);
  const std::size_t n = 20000;
  const auto pts = sample_volume_uniform(box, TriangleSurface{}, n, rng);
  for (int a = 0; a < 3; ++a) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[a];
    mean /= n;
    const double sigma = box.extent()[a] / std::sqrt(12.0 * n);
    EXPECT_NEAR(mean, box.center()[a], 3 * sigma);
  }
}

TEST(VolumeSampling, AcceptanceMatchesVolumeFraction) {
  // Sphere volume is 1% of the box.
  const double box_volume = 4.0 / 3.0 * std::numbers::pi * 100.0;
  const double edge = std::cbrt(box_volume);
  const BoundingBox box{{-edge / 2, -edge / 2, -edge / 2}, {edge / 2, edge / 2, edge / 2}};
  const auto sphere = make_icosphere(3, 1.0);
  Rng rng(6);
  std::size_t draws = 0;
  const auto pts = sample_volume_uniform(box, sphere, 20000, rng, &draws);
  EXPECT_NEAR(20000.0 / draws, 0.99, 0.003);
  SurfaceLocator loc(sphere);
  for (const auto& p : pts) ASSERT_FALSE(loc.inside(p).inside);
}

TEST(VolumeSampling, GeometryFillingBoxExhaustsBudget) {
  const auto sphere = make_icosphere(2, 10.0);
  Rng rng(1);
  EXPECT_THROW(sample_volume_uniform({{-1, -1, -1}, {1, 1, 1}}, sphere, 10, rng), RuntimeFailure);
}
