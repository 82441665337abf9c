#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include <siftfuse/landmarks.hpp>

#include "support/tempdir.hpp"

using namespace siftfuse;

namespace {

Keypoint keypoint_at(double x, double y) {
    Keypoint k;
    k.x = x;
    k.y = y;
    k.scale = 1.6;
    return k;
}

} // namespace

TEST_CASE("default_landmarks places the fixed fractional geometry") {
    const auto lm = default_landmarks(100, 140);
    CHECK(lm.left_eye.x == Catch::Approx(30.0));
    CHECK(lm.left_eye.y == Catch::Approx(50.4));
    CHECK(lm.right_eye.x == Catch::Approx(70.0));
    CHECK(lm.right_eye.y == Catch::Approx(50.4));
    CHECK(lm.nose.x == Catch::Approx(50.0));
    CHECK(lm.nose.y == Catch::Approx(77.0));
    CHECK(lm.mouth.x == Catch::Approx(50.0));
    CHECK(lm.mouth.y == Catch::Approx(100.8));

    const auto doubled = default_landmarks(200, 280);
    CHECK(doubled.left_eye.x == Catch::Approx(2 * lm.left_eye.x));
    CHECK(doubled.mouth.y == Catch::Approx(2 * lm.mouth.y));

    // degenerate but valid frame
    const auto tiny = default_landmarks(1, 1);
    CHECK_NOTHROW(tiny.validate(1, 1));
}

TEST_CASE("load_landmarks parses annotation lines") {
    testutil::TempDir dir("landmarks");
    const auto p = dir.file("points.txt");
    std::ofstream(p) << "s1/1.pgm 30 50 70 50 50 75 50 105\n";
    const auto map = load_landmarks(p);
    REQUIRE(map.count("s1/1.pgm") == 1);
    const auto& lm = map.at("s1/1.pgm");
    CHECK(lm.left_eye.x == 30.0);
    CHECK(lm.right_eye.y == 50.0);
    CHECK(lm.nose.y == 75.0);
    CHECK(lm.mouth.y == 105.0);
}

TEST_CASE("load_landmarks enforces the landmark invariants") {
    testutil::TempDir dir("landmarks");
    const auto transposed = dir.file("transposed.txt");
    std::ofstream(transposed) << "a.pgm 70 50 30 50 50 75 50 105\n";
    CHECK_THROWS_AS(load_landmarks(transposed), InvariantViolation);

    const auto short_line = dir.file("short.txt");
    std::ofstream(short_line) << "a.pgm 30 50 70 50 50 75 50\n";
    CHECK_THROWS_AS(load_landmarks(short_line), ParseError);

    const auto oob = dir.file("oob.txt");
    std::ofstream(oob) << "a.pgm 30 50 70 50 50 75 50 512\n";
    CHECK_THROWS_AS(load_landmarks(oob), InvariantViolation);
}

TEST_CASE("assign_regions follows containment, proximity and tie order") {
    const auto lm = default_landmarks(100, 140);
    const auto radii = RegionRadii::from_interocular(lm); // iod 40: eyes/nose 14, mouth 20

    SECTION("keypoint at a landmark goes to that region") {
        const auto features = assign_regions({keypoint_at(lm.nose.x, lm.nose.y)}, lm, radii);
        CHECK(features.of(Region::nose).size() == 1);
        CHECK(features.total() == 1);
    }
    SECTION("keypoint outside every circle is discarded") {
        const auto features = assign_regions({keypoint_at(2.0, 2.0)}, lm, radii);
        CHECK(features.total() == 0);
    }
    SECTION("overlap resolves to the nearest center") {
        // between nose (50,77) and mouth (50,100.8); the two circles overlap
        const auto features = assign_regions({keypoint_at(50.0, 86.0)}, lm, radii);
        CHECK(features.of(Region::nose).size() == 1);
        CHECK(features.of(Region::mouth).empty());
    }
    SECTION("exact ties break by fixed region order") {
        LandmarkSet custom = lm;
        custom.left_eye = {40.0, 70.0};
        custom.right_eye = {60.0, 70.0};
        custom.nose = {50.0, 70.0};
        const RegionRadii wide{{20.0, 20.0, 20.0, 20.0}};
        // equidistant from left_eye and nose, both circles cover it
        const auto features = assign_regions({keypoint_at(45.0, 70.0)}, custom, wide);
        CHECK(features.of(Region::left_eye).size() == 1);
        CHECK(features.of(Region::nose).empty());
    }
}

TEST_CASE("assign_regions partitions and is permutation invariant") {
    const auto lm = default_landmarks(100, 140);
    const auto radii = RegionRadii::from_interocular(lm);

    std::vector<Keypoint> keypoints;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ux(0.0, 99.0), uy(0.0, 139.0);
    for (int i = 0; i < 200; ++i) keypoints.push_back(keypoint_at(ux(rng), uy(rng)));

    const auto a = assign_regions(keypoints, lm, radii);
    CHECK(a.total() <= keypoints.size());
    for (Region r : kAllRegions) {
        const auto& center = lm.at(r);
        for (const auto& kp : a.of(r))
            CHECK(std::hypot(kp.x - center.x, kp.y - center.y) <=
                  radii.radius[static_cast<int>(r)] + 1e-12);
    }

    std::shuffle(keypoints.begin(), keypoints.end(), rng);
    const auto b = assign_regions(keypoints, lm, radii);
    for (Region r : kAllRegions) {
        const auto& va = a.of(r);
        const auto& vb = b.of(r);
        REQUIRE(va.size() == vb.size());
        for (std::size_t i = 0; i < va.size(); ++i) {
            CHECK(va[i].x == vb[i].x);
            CHECK(va[i].y == vb[i].y);
        }
    }
}
