#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "domino/mesh_io.hpp"
#include "domino/shapes.hpp"
#include "support/fixtures.hpp"

using namespace domino;
using domino::testkit::binary_stl;
using domino::testkit::unit_cube_triangles;

TEST(ParseStl, BinaryUnitCube) {
  StlReadReport report;
  const auto s = parse_stl(binary_stl(unit_cube_triangles()), &report);
  EXPECT_TRUE(report.binary);
  EXPECT_EQ(report.facets_read, 12u);
  EXPECT_EQ(s.vertices.size(), 8u);
  EXPECT_EQ(s.faces.size(), 12u);
  EXPECT_DOUBLE_EQ(s.total_area(), 6.0);
  EXPECT_NEAR(s.center_of_mass.x, 0.5, 1e-15);
  EXPECT_NEAR(s.center_of_mass.y, 0.5, 1e-15);
  EXPECT_NEAR(s.center_of_mass.z, 0.5, 1e-15);
  // Outward winding: each normal points away from the cube center.
  for (std::size_t f = 0; f < s.face_count(); ++f)
    EXPECT_GT(dot(s.face_normal[f], s.face_center[f] - Vec3{0.5, 0.5, 0.5}), 0.0);
}

TEST(ParseStl, AsciiSingleTriangle) {
  const std::string text =
      "solid tri\n"
      "  facet normal 0 0 1\n"
      "    outer loop\n"
      "      vertex 0 0 0\n"
      "      vertex 1 0 0\n"
      "      vertex 0 1 0\n"
      "    endloop\n"
      "  endfacet\n"
      "endsolid tri\n";
  StlReadReport report;
  const auto s = parse_stl(text, &report);
  EXPECT_FALSE(report.binary);
  ASSERT_EQ(s.face_count(), 1u);
  EXPECT_DOUBLE_EQ(s.face_area[0], 0.5);
  EXPECT_EQ(s.face_normal[0], (Vec3{0, 0, 1}));
  EXPECT_DOUBLE_EQ(s.face_center[0].x, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.face_center[0].y, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.face_center[0].z, 0.0);
}

TEST(ParseStl, BinaryHeaderStartingWithSolidIsStillBinary) {
  auto bytes = binary_stl(unit_cube_triangles());
  bytes.replace(0, 5, "solid");
  StlReadReport report;
  parse_stl(bytes, &report);
  EXPECT_TRUE(report.binary);
}

TEST(ParseStl, IcosphereAreaApproachesSphere) {
  // Oracle: sum of face areas of the generated mesh, compared to 4*pi.
  const auto sphere = make_icosphere(3, 1.0);
  const auto s = parse_stl(write_stl_binary(sphere));
  EXPECT_EQ(s.face_count(), 1280u);
  EXPECT_EQ(s.vertices.size(), 642u);
  EXPECT_LT(std::abs(s.total_area() - 4.0 * std::numbers::pi) / (4.0 * std::numbers::pi), 0.01);
}

TEST(ParseStl, TruncatedBinaryReportsOffset) {
  auto bytes = binary_stl(unit_cube_triangles());
  bytes.resize(84 + 50 * 5 + 20);
  try {
    parse_stl(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 84u + 50u * 5u);
  }
  EXPECT_THROW(parse_stl(std::string(40, '\0')), ParseError);
}

TEST(ParseStl, FacetCountMismatch) {
  auto bytes = binary_stl(unit_cube_triangles());
  bytes += std::string(50, '\0');
  EXPECT_THROW(parse_stl(bytes), ParseError);
}

TEST(ParseStl, EmptyMeshRejected) {
  EXPECT_THROW(parse_stl(binary_stl({})), ParseError);
  EXPECT_THROW(parse_stl(std::string("solid x\nendsolid x\n")), ParseError);
}

TEST(ParseStl, MalformedAsciiFacet) {
  const std::string two_vertices =
      "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nendloop\nendfacet\nendsolid\n";
  EXPECT_THROW(parse_stl(two_vertices), ParseError);
  const std::string bad_number = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 zz\n";
  try {
    parse_stl(bad_number);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), bad_number.find("zz"));
  }
}

TEST(ParseStl, DegenerateFacesDropped) {
  auto tris = unit_cube_triangles();
  tris.push_back({Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{2, 0, 0}});  // collinear
  StlReadReport report;
  const auto s = parse_stl(binary_stl(tris), &report);
  EXPECT_EQ(report.facets_read, 13u);
  EXPECT_EQ(report.degenerate_dropped, 1u);
  EXPECT_EQ(s.face_count(), 12u);
  for (double a : s.face_area) EXPECT_GT(a, 0.0);
}

TEST(FaceProperties, TwoIdenticalTrianglesShareCentroid) {
  TriangleSurface s;
  s.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 3, 0}};
  s.faces = {{0, 1, 2}, {0, 1, 2}};
  face_properties(s);
  EXPECT_DOUBLE_EQ(s.center_of_mass.x, 1.0);
  EXPECT_DOUBLE_EQ(s.center_of_mass.y, 1.0);
}

TEST(FaceProperties, ZeroAreaFaceIsInternalError) {
  TriangleSurface s;
  s.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  s.faces = {{0, 1, 2}};
  EXPECT_THROW(face_properties(s), Error);
}

TEST(MeshInvariants, BinaryRoundTripPreservesFaceData) {
  const auto a = parse_stl(write_stl_binary(make_icosphere(2, 0.7, {0.1, -0.2, 0.3})));
  const auto b = parse_stl(write_stl_binary(a));
  EXPECT_EQ(a.face_area, b.face_area);
  ASSERT_EQ(a.face_normal.size(), b.face_normal.size());
  for (std::size_t i = 0; i < a.face_normal.size(); ++i) EXPECT_EQ(a.face_normal[i], b.face_normal[i]);
}

TEST(MeshInvariants, RigidMotionRotatesNormalsAndKeepsAreas) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  const auto base = make_icosphere(2);
  for (int trial = 0; trial < 5; ++trial) {
    // Random rotation from a normalised quaternion.
    double q[4] = {g(rng), g(rng), g(rng), g(rng)};
    const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (double& v : q) v /= qn;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    const double R[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
                            {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
                            {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
    auto rot = [&](const Vec3& v) {
      return Vec3{R[0][0] * v.x + R[0][1] * v.y + R[0][2] * v.z, R[1][0] * v.x + R[1][1] * v.y + R[1][2] * v.z,
                  R[2][0] * v.x + R[2][1] * v.y + R[2][2] * v.z};
    };
    TriangleSurface moved = base;
    const Vec3 shift{g(rng), g(rng), g(rng)};
    for (auto& v : moved.vertices) v = rot(v) + shift;
    face_properties(moved);
    double area_a = 0, area_b = 0;
    for (std::size_t f = 0; f < base.face_count(); ++f) {
      EXPECT_LT(norm(rot(base.face_normal[f]) - moved.face_normal[f]), 1e-9);
      EXPECT_NEAR(base.face_area[f], moved.face_area[f], 1e-12);
      EXPECT_NEAR(norm(moved.face_normal[f]), 1.0, 1e-9);
      area_a += base.face_area[f];
      area_b += moved.face_area[f];
    }
    EXPECT_NEAR(area_a, area_b, 1e-10);
  }
}
