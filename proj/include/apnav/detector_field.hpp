#pragma once

// Parametric detector-confidence manifolds p(theta, r): a sum of Gaussian
// angular lobes scaled by a logistic radial falloff, plus a constant bias.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "apnav/errors.hpp"
#include "apnav/geometry.hpp"

namespace apnav {

struct AngularLobe {
    double mu = 0.0;     ///< center, radians
    double sigma = 1.0;  ///< width, radians, > 0
    double weight = 1.0; ///< [0, 1]

    friend bool operator==(const AngularLobe&, const AngularLobe&) = default;
};

struct ConfidenceField {
    std::vector<AngularLobe> lobes;
    double r_half = 30.0;  ///< distance of 50% radial response
    double r_slope = 8.0;  ///< logistic width, > 0
    double bias = 0.0;     ///< [0, 1)

    friend bool operator==(const ConfidenceField&, const ConfidenceField&) = default;
};

inline void validate(const ConfidenceField& field)
{
    if (field.lobes.empty())
        throw DimensionError("confidence field needs at least one lobe");
    for (const auto& lobe : field.lobes) {
        if (!(lobe.sigma > 0.0))
            throw DimensionError("lobe sigma must be positive");
        if (!(lobe.weight >= 0.0 && lobe.weight <= 1.0))
            throw DimensionError("lobe weight must lie in [0, 1]");
    }
    if (!(field.r_slope > 0.0))
        throw DimensionError("r_slope must be positive");
    if (!(field.bias >= 0.0 && field.bias < 1.0))
        throw DimensionError("bias must lie in [0, 1)");
}

/// A(theta): lobe response using the wrapped angular distance in [0, pi].
inline double angular_response(const ConfidenceField& field, double theta) noexcept
{
    double a = 0.0;
    for (const auto& lobe : field.lobes) {
        const double d = std::abs(std::remainder(theta - lobe.mu, kTwoPi));
        a += lobe.weight * std::exp(-d * d / (2.0 * lobe.sigma * lobe.sigma));
    }
    return a;
}

/// G(r): logistic falloff, decreasing in r.
inline double radial_response(const ConfidenceField& field, double r) noexcept
{
    return 1.0 / (1.0 + std::exp((r - field.r_half) / field.r_slope));
}

inline double confidence(const ConfidenceField& field, Pose pose) noexcept
{
    const double p = field.bias + angular_response(field, pose.theta) * radial_response(field, pose.r);
    return std::clamp(p, 0.0, 1.0);
}

/// Car-like manifold: narrow strong broadside lobes, broad weaker end-on
/// lobes, slow radial falloff. Saturates at 1 close in beside the car.
inline ConfidenceField preset_car()
{
    using std::numbers::pi;
    return {
        .lobes = {{pi / 2, 0.16, 1.0}, {3 * pi / 2, 0.16, 1.0}, {0.0, 0.7, 0.75}, {pi, 0.7, 0.75}},
        .r_half = 30.0,
        .r_slope = 6.0,
        .bias = 0.02,
    };
}

/// Person-like manifold: nearly rotation invariant, detected only when
/// closer.
inline ConfidenceField preset_person()
{
    using std::numbers::pi;
    return {
        .lobes = {{0.0, 1.5, 0.85}, {pi, 1.5, 0.85}},
        .r_half = 14.0,
        .r_slope = 3.5,
        .bias = 0.01,
    };
}

/// Looks up a preset by name ("car", "person"). Throws std::invalid_argument.
inline ConfidenceField preset_by_name(const std::string& name)
{
    if (name == "car")
        return preset_car();
    if (name == "person")
        return preset_person();
    throw std::invalid_argument("unknown field preset '" + name + "'");
}

/// Confidence evaluated at every grid pose, angle-major.
struct ManifoldTable {
    PoseGrid grid;
    std::vector<double> values;

    double at(std::size_t angle_idx, std::size_t radius_idx) const
    {
        return values[grid.flat({angle_idx, radius_idx})];
    }
};

inline ManifoldTable export_manifold(const ConfidenceField& field, const PoseGrid& grid)
{
    ManifoldTable table{grid, {}};
    table.values.reserve(grid.size());
    for (std::size_t i = 0; i < grid.n_angles(); ++i)
        for (std::size_t j = 0; j < grid.n_radii(); ++j)
            table.values.push_back(confidence(field, pose_at(grid, i, j)));
    return table;
}

/// Population variance of the confidence over all angles at one radius.
inline double angular_variance(const ManifoldTable& table, std::size_t radius_idx)
{
    const auto n = table.grid.n_angles();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mean += table.at(i, radius_idx);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = table.at(i, radius_idx) - mean;
        var += d * d;
    }
    return var / static_cast<double>(n);
}

/// Formats a double with 9 significant digits.
inline std::string format_g9(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// CSV with header `theta,r,confidence`, one row per grid point.
inline void write_manifold_csv(std::ostream& os, const ManifoldTable& table)
{
    os << "theta,r,confidence\n";
    for (std::size_t i = 0; i < table.grid.n_angles(); ++i) {
        for (std::size_t j = 0; j < table.grid.n_radii(); ++j) {
            const Pose p = pose_at(table.grid, i, j);
            os << format_g9(p.theta) << ',' << format_g9(p.r) << ',' << format_g9(table.at(i, j)) << '\n';
        }
    }
}

} // namespace apnav
