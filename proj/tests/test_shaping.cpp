#include <catch2/catch_amalgamated.hpp>

#include "apprl/rng.hpp"
#include "apprl/shaping.hpp"

using namespace apprl;
using Catch::Matchers::WithinAbs;

namespace {
AppraisalVector random_appraisals(Rng& rng) {
    return {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
}
}  // namespace

TEST_CASE("reshape matches hand evaluations") {
    AppraisalVector z;
    z.mr = 1.0;
    REQUIRE(reshape(0.0, z, ShapingConfig::make(ShapingName::RSv1)) == 0.0);

    z.mr = 0.4;
    REQUIRE_THAT(reshape(0.5, z, ShapingConfig::make(ShapingName::RSv1)), WithinAbs(0.494, 1e-12));

    AppraisalVector z7{0.3, 0.0, 0.0, 0.5, 0.2, 0.0};
    REQUIRE_THAT(reshape(0.0, z7, ShapingConfig::make(ShapingName::RSv7B)), WithinAbs(-0.16, 1e-12));
    REQUIRE_THAT(reshape(0.0, z7, ShapingConfig::make(ShapingName::RSv7A)),
                 WithinAbs(-0.01 * 0.8 - 0.1 * 0.8, 1e-12));

    AppraisalVector z2{0.1, 0.0, 0.0, 0.9, 0.6, 0.0};
    REQUIRE_THAT(reshape(1.0, z2, ShapingConfig::make(ShapingName::RSv2)), WithinAbs(1.0 - 0.004, 1e-12));
    REQUIRE_THAT(reshape(1.0, z2, ShapingConfig::make(ShapingName::RSv3)), WithinAbs(1.0 - 0.001, 1e-12));
    REQUIRE_THAT(reshape(1.0, z2, ShapingConfig::make(ShapingName::RSv4)),
                 WithinAbs(1.0 - 0.01 * (0.9 + 0.1), 1e-12));
    REQUIRE_THAT(reshape(1.0, z2, ShapingConfig::make(ShapingName::RSv5)),
                 WithinAbs(1.0 - 0.01 * (0.9 + 0.4 + 0.1), 1e-12));
    REQUIRE_THAT(reshape(1.0, z2, ShapingConfig::make(ShapingName::RSv6)),
                 WithinAbs(1.0 - 0.1 * (0.1 + 0.6 + 0.9), 1e-12));
}

TEST_CASE("baseline, noise and appraisal-only leave rewards unchanged") {
    Rng rng(4);
    for (auto name : {ShapingName::Baseline, ShapingName::Noise, ShapingName::AppraisalOnly}) {
        const auto cfg = ShapingConfig::make(name);
        for (int i = 0; i < 100; ++i) {
            const double r = rng.uniform(-1.0, 1.0);
            REQUIRE(reshape(r, random_appraisals(rng), cfg) == r);
        }
    }
}

TEST_CASE("penalty direction and equality conditions") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const AppraisalVector z = random_appraisals(rng);
        const double r = rng.uniform(-1.0, 1.0);
        for (auto name : {ShapingName::RSv1, ShapingName::RSv2, ShapingName::RSv3, ShapingName::RSv4,
                          ShapingName::RSv5, ShapingName::RSv6}) {
            REQUIRE(reshape(r, z, ShapingConfig::make(name)) <= r);
        }
    }
    AppraisalVector ones{1, 1, 1, 1, 1, 1};
    AppraisalVector zeros{0, 0, 0, 0, 0, 0};
    for (auto name : {ShapingName::RSv1, ShapingName::RSv2, ShapingName::RSv3, ShapingName::RSv4,
                      ShapingName::RSv5}) {
        REQUIRE(reshape(0.25, ones, ShapingConfig::make(name)) == 0.25);
        REQUIRE(reshape(0.25, zeros, ShapingConfig::make(name)) < 0.25);
    }
    REQUIRE(reshape(0.25, zeros, ShapingConfig::make(ShapingName::RSv6)) == 0.25);
    REQUIRE(reshape(0.25, ones, ShapingConfig::make(ShapingName::RSv6)) < 0.25);
}

TEST_CASE("per-step shaping magnitude bounds") {
    Rng rng(21);
    for (int i = 0; i < 10000; ++i) {
        const AppraisalVector z = random_appraisals(rng);
        const double r = rng.uniform(-1.0, 1.0);
        for (auto name : {ShapingName::RSv1, ShapingName::RSv2, ShapingName::RSv3, ShapingName::RSv4,
                          ShapingName::RSv5}) {
            REQUIRE(std::abs(reshape(r, z, ShapingConfig::make(name)) - r) <= 0.03 + 1e-12);
        }
        REQUIRE(std::abs(reshape(r, z, ShapingConfig::make(ShapingName::RSv6)) - r) <= 0.3 + 1e-12);
        REQUIRE(std::abs(reshape(r, z, ShapingConfig::make(ShapingName::RSv7A)) - r) <= 0.21 + 1e-12);
        REQUIRE(std::abs(reshape(r, z, ShapingConfig::make(ShapingName::RSv7B)) - r) <= 0.3 + 1e-12);
    }
}

TEST_CASE("reshape is affine in each appraisal with the documented slope") {
    struct Expected {
        ShapingName name;
        double slopes[6];  // d(reshaped)/d(zeta_i), order mr, c, n, gc, cp, a
    };
    const Expected table[] = {
        {ShapingName::RSv1, {0.01, 0, 0, 0, 0, 0}},
        {ShapingName::RSv2, {0, 0, 0, 0, 0.01, 0}},
        {ShapingName::RSv3, {0, 0, 0, 0.01, 0, 0}},
        {ShapingName::RSv4, {0.01, 0, 0, 0.01, 0, 0}},
        {ShapingName::RSv5, {0.01, 0, 0, 0.01, 0.01, 0}},
        {ShapingName::RSv6, {-0.1, 0, 0, -0.1, -0.1, 0}},
        {ShapingName::RSv7A, {-0.1, 0, 0, -0.1, 0.01, 0}},
        {ShapingName::RSv7B, {-0.1, 0, 0, -0.1, 0.1, 0}},
    };
    Rng rng(31);
    for (const auto& row : table) {
        const auto cfg = ShapingConfig::make(row.name);
        AppraisalVector z = random_appraisals(rng);
        double* fields[] = {&z.mr, &z.certainty, &z.novelty, &z.gc, &z.cp, &z.anticipation};
        for (int i = 0; i < 6; ++i) {
            const double base = reshape(0.0, z, cfg);
            const double saved = *fields[i];
            *fields[i] = saved + 0.125;
            const double bumped = reshape(0.0, z, cfg);
            *fields[i] = saved;
            REQUIRE_THAT((bumped - base) / 0.125, WithinAbs(row.slopes[i], 1e-9));
        }
    }
}

TEST_CASE("aux modes follow the configuration table") {
    REQUIRE(ShapingConfig::make(ShapingName::Baseline).aux_mode == AuxMode::None);
    REQUIRE(ShapingConfig::make(ShapingName::Noise).aux_mode == AuxMode::Noise6);
    REQUIRE(ShapingConfig::make(ShapingName::AppraisalOnly).aux_mode == AuxMode::Appraisal6);
    for (auto name : {ShapingName::RSv1, ShapingName::RSv2, ShapingName::RSv3, ShapingName::RSv4,
                      ShapingName::RSv5, ShapingName::RSv6, ShapingName::RSv7A, ShapingName::RSv7B}) {
        REQUIRE(ShapingConfig::make(name).aux_mode == AuxMode::Appraisal6);
    }
}

TEST_CASE("critic_aux produces the mode-dependent vector") {
    AppraisalVector ones{1, 1, 1, 1, 1, 1};
    Rng rng(5);
    REQUIRE(critic_aux(ShapingConfig::make(ShapingName::Baseline), ones, rng).empty());

    const auto passthrough = critic_aux(ShapingConfig::make(ShapingName::AppraisalOnly), ones, rng);
    REQUIRE(passthrough == std::vector<double>{1, 1, 1, 1, 1, 1});

    Rng a(77), b(77);
    const auto noise1 = critic_aux(ShapingConfig::make(ShapingName::Noise), ones, a);
    const auto noise2 = critic_aux(ShapingConfig::make(ShapingName::Noise), ones, b);
    REQUIRE(noise1 == noise2);
    REQUIRE(noise1.size() == 6);
    for (double v : noise1) {
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("shaping names parse case-insensitively") {
    REQUIRE(ShapingConfig::parse("Baseline").name == ShapingName::Baseline);
    REQUIRE(ShapingConfig::parse("NOISE").name == ShapingName::Noise);
    REQUIRE(ShapingConfig::parse("appraisal").name == ShapingName::AppraisalOnly);
    REQUIRE(ShapingConfig::parse("rsv7a").rsv7_eps == 0.01);
    REQUIRE(ShapingConfig::parse("RSV7B").rsv7_eps == 0.1);
    REQUIRE_THROWS_AS(ShapingConfig::parse("rsv9"), ConfigError);
    try {
        ShapingConfig::parse("rsv9");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("rsv7b") != std::string::npos);
    }
}
