#pragma once

// Polar pose grid around the object of interest, trajectory interpolation,
// and the synthetic observation encoder.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "apnav/errors.hpp"
#include "apnav/rng.hpp"

namespace apnav {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [0, 2pi).
inline double wrap_angle(double theta) noexcept
{
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0)
        t += kTwoPi;
    if (t >= kTwoPi)
        t = 0.0;
    return t;
}

/// Signed angular difference (to - from) wrapped into [-pi, pi].
inline double signed_angle_diff(double from, double to) noexcept
{
    return std::remainder(to - from, kTwoPi);
}

struct Pose {
    double theta = 0.0; ///< radians, [0, 2pi)
    double r = 1.0;     ///< meters from the object

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Rotation about the object and radial translation.
struct Proposal {
    double dtheta = 0.0;
    double dr = 0.0;

    friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct GridIndex {
    std::size_t angle = 0;
    std::size_t radius = 0;

    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

class PoseGrid {
public:
    PoseGrid() = default;

    /// Throws DimensionError unless n_angles >= 2, n_radii >= 1 and
    /// 0 < r_min <= r_max.
    PoseGrid(std::size_t n_angles, std::size_t n_radii, double r_min, double r_max)
        : n_angles_(n_angles), n_radii_(n_radii), r_min_(r_min), r_max_(r_max)
    {
        if (n_angles < 2)
            throw DimensionError("pose grid needs at least 2 angles, got " + std::to_string(n_angles));
        if (n_radii < 1)
            throw DimensionError("pose grid needs at least 1 radius");
        if (!(r_min > 0.0))
            throw DimensionError("r_min must be positive, got " + std::to_string(r_min));
        if (r_min > r_max)
            throw DimensionError("r_min must not exceed r_max");
    }

    std::size_t n_angles() const noexcept { return n_angles_; }
    std::size_t n_radii() const noexcept { return n_radii_; }
    std::size_t size() const noexcept { return n_angles_ * n_radii_; }
    double r_min() const noexcept { return r_min_; }
    double r_max() const noexcept { return r_max_; }
    double radial_range() const noexcept { return r_max_ - r_min_; }

    double angle_step() const noexcept { return kTwoPi / static_cast<double>(n_angles_); }

    double radius_step() const noexcept
    {
        return n_radii_ > 1 ? (r_max_ - r_min_) / static_cast<double>(n_radii_ - 1) : 0.0;
    }

    double angle_of(std::size_t angle_idx) const noexcept
    {
        return static_cast<double>(angle_idx) * kTwoPi / static_cast<double>(n_angles_);
    }

    double radius_of(std::size_t radius_idx) const noexcept
    {
        return r_min_ + static_cast<double>(radius_idx) * radius_step();
    }

    /// Row-major, angle-major flat index.
    std::size_t flat(GridIndex idx) const noexcept { return idx.angle * n_radii_ + idx.radius; }

    GridIndex unflat(std::size_t k) const noexcept { return {k / n_radii_, k % n_radii_}; }

    double clamp_radius(double r) const noexcept { return std::clamp(r, r_min_, r_max_); }

    Pose clamp(Pose p) const noexcept { return {wrap_angle(p.theta), clamp_radius(p.r)}; }

    /// Nearest grid point to an arbitrary pose (after clamping).
    GridIndex snap(Pose p) const noexcept
    {
        p = clamp(p);
        auto a = static_cast<std::size_t>(std::llround(p.theta / angle_step())) % n_angles_;
        std::size_t j = 0;
        if (n_radii_ > 1) {
            auto rj = std::llround((p.r - r_min_) / radius_step());
            j = static_cast<std::size_t>(std::clamp<long long>(rj, 0, static_cast<long long>(n_radii_ - 1)));
        }
        return {a, j};
    }

    friend bool operator==(const PoseGrid&, const PoseGrid&) = default;

private:
    std::size_t n_angles_ = 2;
    std::size_t n_radii_ = 1;
    double r_min_ = 1.0;
    double r_max_ = 1.0;
};

inline PoseGrid make_grid(std::size_t n_angles, std::size_t n_radii, double r_min, double r_max)
{
    return PoseGrid(n_angles, n_radii, r_min, r_max);
}

inline Pose pose_at(const PoseGrid& grid, std::size_t angle_idx, std::size_t radius_idx)
{
    if (angle_idx >= grid.n_angles() || radius_idx >= grid.n_radii())
        throw IndexError("grid index (" + std::to_string(angle_idx) + ", " + std::to_string(radius_idx)
                         + ") outside " + std::to_string(grid.n_angles()) + "x"
                         + std::to_string(grid.n_radii()) + " grid");
    return {grid.angle_of(angle_idx), grid.radius_of(radius_idx)};
}

inline Pose pose_at(const PoseGrid& grid, GridIndex idx)
{
    return pose_at(grid, idx.angle, idx.radius);
}

/// Applies a proposal and clamps the result to the grid bounds.
inline Pose apply(const PoseGrid& grid, Pose start, Proposal p) noexcept
{
    return grid.clamp({start.theta + p.dtheta, start.r + p.dr});
}

/// Waypoints along a proposal: n_intermediate + 1 poses at fractions
/// k/(n_intermediate+1), theta and r interpolated together (a spiral about the
/// object). The sign of dtheta fixes the direction of rotation. The last pose
/// is apply(grid, start, proposal).
inline std::vector<Pose> trajectory(const PoseGrid& grid, Pose start, Proposal proposal,
                                    std::size_t n_intermediate)
{
    const std::size_t n = n_intermediate + 1;
    std::vector<Pose> out;
    out.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(n);
        out.push_back(grid.clamp({start.theta + f * proposal.dtheta, start.r + f * proposal.dr}));
    }
    return out;
}

struct WorldConfig {
    PoseGrid grid = make_grid(76, 65, 1.0, 60.0);
    std::size_t obs_dim = 32;
    double obs_noise_sigma = 0.0;
    std::uint64_t encoder_seed = 7;
    /// Standard deviation of the random projection frequencies.
    double encoder_scale = 2.0;
};

using Observation = std::vector<double>;

/// A world instance: configuration plus the random-Fourier projection drawn
/// once from encoder_seed.
class World {
public:
    explicit World(WorldConfig cfg) : cfg_(std::move(cfg))
    {
        if (cfg_.obs_dim == 0)
            throw DimensionError("obs_dim must be positive");
        if (!(cfg_.obs_noise_sigma >= 0.0))
            throw DimensionError("obs_noise_sigma must be >= 0");
        if (!(cfg_.encoder_scale > 0.0))
            throw DimensionError("encoder_scale must be positive");
        Rng rng(cfg_.encoder_seed);
        freq_.resize(cfg_.obs_dim * 3);
        phase_.resize(cfg_.obs_dim);
        for (double& w : freq_)
            w = rng.normal(0.0, cfg_.encoder_scale);
        for (double& p : phase_)
            p = rng.uniform(0.0, kTwoPi);
    }

    const WorldConfig& config() const noexcept { return cfg_; }
    const PoseGrid& grid() const noexcept { return cfg_.grid; }
    std::size_t obs_dim() const noexcept { return cfg_.obs_dim; }

    /// features = cos(freq . u + phase) + noise, u = (cos theta, sin theta, r / r_max).
    /// Noise is N(0, obs_noise_sigma^2) drawn from noise_seed.
    Observation observe(Pose pose, std::uint64_t noise_seed) const
    {
        pose = grid().clamp(pose);
        const double u0 = std::cos(pose.theta);
        const double u1 = std::sin(pose.theta);
        const double u2 = pose.r / grid().r_max();
        Observation x(cfg_.obs_dim);
        for (std::size_t d = 0; d < cfg_.obs_dim; ++d) {
            const double* w = &freq_[3 * d];
            x[d] = std::cos(w[0] * u0 + w[1] * u1 + w[2] * u2 + phase_[d]);
        }
        if (cfg_.obs_noise_sigma > 0.0) {
            Rng rng(noise_seed);
            for (double& v : x)
                v += rng.normal(0.0, cfg_.obs_noise_sigma);
        }
        return x;
    }

private:
    WorldConfig cfg_;
    std::vector<double> freq_;
    std::vector<double> phase_;
};

inline Observation observe(const World& world, Pose pose, std::uint64_t noise_seed)
{
    return world.observe(pose, noise_seed);
}

} // namespace apnav
