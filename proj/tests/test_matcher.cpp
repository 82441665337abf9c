#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <siftfuse/matcher.hpp>

#include "support/oracles.hpp"

using namespace siftfuse;

namespace {

Keypoint with_element(int index, float value) {
    Keypoint k;
    k.descriptor[index] = value;
    return k;
}

Keypoint random_unit_keypoint(std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Keypoint k;
    double norm = 0.0;
    std::array<double, kDescriptorSize> raw{};
    for (auto& v : raw) {
        v = std::abs(n(rng));
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (int i = 0; i < kDescriptorSize; ++i)
        k.descriptor[i] = static_cast<float>(raw[i] / norm);
    return k;
}

std::vector<Keypoint> random_set(std::mt19937& rng, std::size_t n) {
    std::vector<Keypoint> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_unit_keypoint(rng));
    return out;
}

RegionFeatures features_with(std::array<std::vector<Keypoint>, 4> lists) {
    RegionFeatures f;
    f.regions = std::move(lists);
    f.radii = RegionRadii{{10, 10, 10, 10}};
    return f;
}

} // namespace

TEST_CASE("region_distance of identical lists is zero") {
    std::mt19937 rng(3);
    const auto set = random_set(rng, 6);
    CHECK(region_distance(set, set) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("region_distance picks the nearest gallery descriptor") {
    const Keypoint probe; // zero vector
    const std::vector<Keypoint> gallery{with_element(0, 0.3f), with_element(1, 0.7f)};
    const std::vector<Keypoint> probe_list{probe};
    const double d = region_distance(probe_list, gallery);
    CHECK(d == Catch::Approx(0.3).margin(1e-6));

    const double expected = oracle::directed_min_mean(probe_list, gallery);
    CHECK(d == expected);
}

TEST_CASE("region_distance rejects empty lists") {
    std::mt19937 rng(4);
    const auto set = random_set(rng, 3);
    const std::vector<Keypoint> empty;
    CHECK_THROWS_AS(region_distance(empty, set), MissingRegion);
    CHECK_THROWS_AS(region_distance(set, empty), MissingRegion);
}

TEST_CASE("region_distance equals the double-loop oracle on random sets") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const auto probe = random_set(rng, 10);
        const auto gallery = random_set(rng, 10);
        REQUIRE(region_distance(probe, gallery) ==
                oracle::directed_min_mean(probe, gallery));
    }
}

TEST_CASE("local_match sums the four region distances") {
    // single-keypoint regions with exact distances 1, 2, 3, 4
    RegionFeatures probe = features_with({std::vector<Keypoint>{Keypoint{}},
                                          {Keypoint{}},
                                          {Keypoint{}},
                                          {Keypoint{}}});
    RegionFeatures gallery = features_with({std::vector<Keypoint>{with_element(0, 1.0f)},
                                            {with_element(0, 2.0f)},
                                            {with_element(0, 3.0f)},
                                            {with_element(0, 4.0f)}});
    const auto score = local_match(probe, gallery);
    CHECK(score.kind == MatchKind::local);
    CHECK(score.value == Catch::Approx(10.0).margin(1e-6));

    double per_region_sum = 0.0;
    for (const auto& d : score.per_region) {
        REQUIRE(d.has_value());
        per_region_sum += *d;
    }
    CHECK(score.value == Catch::Approx(per_region_sum).margin(1e-9));
}

TEST_CASE("local_match of identical features is zero") {
    std::mt19937 rng(12);
    const RegionFeatures f = features_with({random_set(rng, 3), random_set(rng, 2),
                                            random_set(rng, 4), random_set(rng, 5)});
    CHECK(local_match(f, f).value == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("missing regions follow the configured policy") {
    RegionFeatures probe = features_with({std::vector<Keypoint>{Keypoint{}},
                                          {Keypoint{}},
                                          {}, // nose empty
                                          {Keypoint{}}});
    RegionFeatures gallery = features_with({std::vector<Keypoint>{with_element(0, 1.0f)},
                                            {with_element(0, 2.0f)},
                                            {with_element(0, 3.0f)},
                                            {with_element(0, 4.0f)}});
    SECTION("strict policy errors") {
        MatcherOptions strict;
        strict.missing_region = MissingRegionPolicy::strict;
        CHECK_THROWS_AS(local_match(probe, gallery, strict), MissingRegion);
    }
    SECTION("skip policy rescales by 4/k") {
        MatcherOptions skip;
        skip.missing_region = MissingRegionPolicy::skip;
        const auto score = local_match(probe, gallery, skip);
        // remaining distances 1, 2, 4 -> (4/3) * 7
        CHECK(score.value == Catch::Approx(4.0 / 3.0 * 7.0).margin(1e-6));
        CHECK_FALSE(score.per_region[static_cast<int>(Region::nose)].has_value());
    }
}

TEST_CASE("local_match is monotone in each per-region distance") {
    RegionFeatures probe = features_with({std::vector<Keypoint>{Keypoint{}},
                                          {Keypoint{}},
                                          {Keypoint{}},
                                          {Keypoint{}}});
    for (int region = 0; region < 4; ++region) {
        std::array<std::vector<Keypoint>, 4> lists{
            std::vector<Keypoint>{with_element(0, 1.0f)},
            {with_element(0, 1.0f)},
            {with_element(0, 1.0f)},
            {with_element(0, 1.0f)}};
        const double base = local_match(probe, features_with(lists)).value;
        lists[region] = {with_element(0, 1.5f)};
        const double bumped = local_match(probe, features_with(lists)).value;
        CHECK(bumped > base);
    }
}

TEST_CASE("concat_features appends regions in fixed order") {
    std::mt19937 rng(21);
    const auto a = random_set(rng, 3), b = random_set(rng, 4);
    const auto c = random_set(rng, 2), d = random_set(rng, 5);
    const RegionFeatures f = features_with({a, b, c, d});
    const auto cat = concat_features(f);
    REQUIRE(cat.size() == 14);
    CHECK(cat[0].descriptor == a[0].descriptor);
    CHECK(cat[3].descriptor == b[0].descriptor);
    CHECK(cat[7].descriptor == c[0].descriptor);
    CHECK(cat[9].descriptor == d[0].descriptor);

    const RegionFeatures mouth_only = features_with({{}, {}, {}, random_set(rng, 2)});
    CHECK(concat_features(mouth_only).size() == 2);

    const RegionFeatures none = features_with({});
    CHECK_THROWS_AS(concat_features(none), EmptyFeatureSet);
}

TEST_CASE("global_match is the symmetrized mean of minimum pair distances") {
    SECTION("identical sets") {
        std::mt19937 rng(31);
        const auto set = random_set(rng, 8);
        CHECK(global_match(set, set).value == Catch::Approx(0.0).margin(1e-9));
    }
    SECTION("singletons reduce to the pair distance") {
        std::mt19937 rng(32);
        const auto a = random_set(rng, 1), b = random_set(rng, 1);
        CHECK(global_match(a, b).value ==
              Catch::Approx(descriptor_distance(a[0], b[0])).margin(1e-12));
    }
    SECTION("directed means symmetrize by max") {
        // probe {a1, a2}, gallery {b1} with pair distances 0.2 and 0.6
        const std::vector<Keypoint> gallery{Keypoint{}};
        const std::vector<Keypoint> probe{with_element(0, 0.2f), with_element(1, 0.6f)};
        const auto score = global_match(probe, gallery);
        CHECK(score.value == Catch::Approx(0.4).margin(1e-6));
        CHECK(score.value == oracle::modified_hausdorff(probe, gallery));
    }
    SECTION("empty sets are rejected") {
        std::mt19937 rng(33);
        const auto set = random_set(rng, 2);
        const std::vector<Keypoint> empty;
        CHECK_THROWS_AS(global_match(empty, set), EmptyFeatureSet);
    }
}

TEST_CASE("global_match equals the brute-force oracle and is symmetric") {
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_set(rng, 10);
        const auto b = random_set(rng, 10);
        const double forward = global_match(a, b).value;
        const double backward = global_match(b, a).value;
        REQUIRE(forward == oracle::modified_hausdorff(a, b));
        REQUIRE(std::abs(forward - backward) <= 1e-12);
        REQUIRE(forward <= 2.0); // unit-norm descriptors bound pair distances by 2
    }
}
