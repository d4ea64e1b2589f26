#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "apnav/detector_field.hpp"

using namespace apnav;
using std::numbers::pi;

namespace {

ConfidenceField single_lobe()
{
    return {.lobes = {{0.0, 1.0, 1.0}}, .r_half = 1e9, .r_slope = 1.0, .bias = 0.0};
}

const PoseGrid kGrid = make_grid(76, 65, 1.0, 60.0);

} // namespace

TEST(Confidence, SingleLobeAtCenter)
{
    EXPECT_NEAR(confidence(single_lobe(), {0.0, 10.0}), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(angular_response(single_lobe(), 0.0), 1.0);
}

TEST(Confidence, SingleLobeOffCenter)
{
    EXPECT_NEAR(angular_response(single_lobe(), 1.0), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(confidence(single_lobe(), {1.0, 10.0}), 0.6065306597, 1e-9);
}

TEST(Confidence, WrappedAngularDistance)
{
    // 2pi - 0.3 is 0.3 away from a lobe at 0, not 2pi - 0.3.
    EXPECT_NEAR(angular_response(single_lobe(), 2 * pi - 0.3), std::exp(-0.045), 1e-12);
}

TEST(Confidence, PeriodicInTheta)
{
    for (const auto& f : {preset_car(), preset_person()})
        for (double th = 0.0; th < 2 * pi; th += 0.37)
            EXPECT_NEAR(confidence(f, {th, 12.0}), confidence(f, {th + 2 * pi, 12.0}), 1e-12);
}

TEST(Confidence, RangeClamped)
{
    ConfidenceField hot{.lobes = {{0.0, 1.0, 1.0}, {0.2, 1.0, 1.0}}, .r_half = 100, .r_slope = 1, .bias = 0.5};
    EXPECT_EQ(confidence(hot, {0.1, 1.0}), 1.0);
    for (const auto& f : {preset_car(), preset_person()}) {
        const auto t = export_manifold(f, kGrid);
        for (double v : t.values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Confidence, DecreasingInRadius)
{
    // Non-increasing everywhere; strictly decreasing wherever the clamp at 1
    // is not active.
    for (const auto& f : {preset_car(), preset_person()}) {
        const auto t = export_manifold(f, kGrid);
        for (std::size_t i = 0; i < kGrid.n_angles(); ++i)
            for (std::size_t j = 1; j < kGrid.n_radii(); ++j) {
                ASSERT_LE(t.at(i, j), t.at(i, j - 1)) << i << "," << j;
                if (t.at(i, j - 1) < 1.0)
                    ASSERT_LT(t.at(i, j), t.at(i, j - 1)) << i << "," << j;
            }
    }
}

TEST(Presets, CarBroadsideBeatsEndOn)
{
    const auto car = preset_car();
    EXPECT_GT(confidence(car, {pi / 2, 1.0}), confidence(car, {0.0, 1.0}));
    EXPECT_GT(confidence(car, {3 * pi / 2, 1.0}), confidence(car, {pi, 1.0}));
}

TEST(Presets, CarIsPiSymmetric)
{
    const auto car = preset_car();
    for (double th = 0.0; th < pi; th += 0.1)
        EXPECT_NEAR(confidence(car, {th, 5.0}), confidence(car, {th + pi, 5.0}), 1e-12);
}

TEST(Presets, PersonSmallerAndFlatter)
{
    const auto car = preset_car();
    const auto person = preset_person();
    EXPECT_LT(person.r_half, car.r_half);
    // Max deviation from the angular mean at a fixed radius.
    auto spread = [](const ConfidenceField& f, double r) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 76; ++i)
            mean += confidence(f, {i * 2 * pi / 76, r});
        mean /= 76;
        double worst = 0.0;
        for (std::size_t i = 0; i < 76; ++i)
            worst = std::max(worst, std::abs(confidence(f, {i * 2 * pi / 76, r}) - mean));
        return worst;
    };
    for (double r : {1.0, 5.0, 10.0})
        EXPECT_LT(spread(person, r), spread(car, r)) << r;
}

TEST(Presets, ByName)
{
    EXPECT_EQ(preset_by_name("car"), preset_car());
    EXPECT_EQ(preset_by_name("person"), preset_person());
    EXPECT_THROW(preset_by_name("truck"), std::invalid_argument);
}

TEST(Validate, RejectsBadFields)
{
    EXPECT_NO_THROW(validate(preset_car()));
    ConfidenceField f = single_lobe();
    f.lobes.clear();
    EXPECT_THROW(validate(f), DimensionError);
    f = single_lobe();
    f.lobes[0].sigma = 0.0;
    EXPECT_THROW(validate(f), DimensionError);
    f = single_lobe();
    f.lobes[0].weight = 1.5;
    EXPECT_THROW(validate(f), DimensionError);
    f = single_lobe();
    f.r_slope = -1.0;
    EXPECT_THROW(validate(f), DimensionError);
    f = single_lobe();
    f.bias = 1.0;
    EXPECT_THROW(validate(f), DimensionError);
}

TEST(Manifold, MatchesPointwiseConfidence)
{
    const auto g = make_grid(8, 3, 1.0, 3.0);
    const auto car = preset_car();
    const auto t = export_manifold(car, g);
    ASSERT_EQ(t.values.size(), 24u);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(t.at(i, j), confidence(car, pose_at(g, i, j)));
            EXPECT_EQ(t.values[i * 3 + j], t.at(i, j));
        }
}

TEST(Manifold, ConstantField)
{
    const ConfidenceField flat{.lobes = {{0.0, 1e6, 0.5}}, .r_half = 1e9, .r_slope = 1.0, .bias = 0.1};
    const auto t = export_manifold(flat, kGrid);
    for (double v : t.values)
        EXPECT_NEAR(v, t.values.front(), 1e-9);
}

TEST(Manifold, CarArgmaxAtBroadsideNearest)
{
    // The maximum is reached broadside at the nearest radius; the clamp may
    // make it a plateau, but only around the broadside angles.
    const auto t = export_manifold(preset_car(), kGrid);
    const double best = *std::max_element(t.values.begin(), t.values.end());
    EXPECT_EQ(t.at(19, 0), best);
    EXPECT_EQ(t.at(57, 0), best);
    for (std::size_t k = 0; k < t.values.size(); ++k) {
        if (t.values[k] < best)
            continue;
        const auto idx = kGrid.unflat(k);
        const auto d = std::min(std::abs(static_cast<int>(idx.angle) - 19), std::abs(static_cast<int>(idx.angle) - 57));
        EXPECT_LE(d, 2) << idx.angle << "," << idx.radius;
    }
}

TEST(Manifold, AngularVarianceOrdering)
{
    const auto car = export_manifold(preset_car(), kGrid);
    const auto person = export_manifold(preset_person(), kGrid);
    EXPECT_NE(car.values, person.values);
    EXPECT_LT(angular_variance(person, 0), angular_variance(car, 0));
}

TEST(Manifold, CsvFormat)
{
    const auto g = make_grid(4, 2, 1.0, 2.0);
    std::ostringstream os;
    write_manifold_csv(os, export_manifold(single_lobe(), g));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "theta,r,confidence");
    std::getline(is, line);
    EXPECT_EQ(line, "0,1,1");
    std::getline(is, line);
    EXPECT_EQ(line, "0,2,1");
    std::getline(is, line);
    // exp(-(pi/2)^2 / 2) with a flat radial response.
    EXPECT_EQ(line, "1.57079633,1,0.291212933");
    int rows = 3;
    while (std::getline(is, line))
        ++rows;
    EXPECT_EQ(rows, 8);
}
