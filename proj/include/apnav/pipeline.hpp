#pragma once

// The detect / propose / traverse loop. Detection runs at the start pose and
// again at every waypoint of the proposed trajectory; only improving
// waypoints replace the best snapshot.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "apnav/detector_field.hpp"
#include "apnav/geometry.hpp"
#include "apnav/json_io.hpp"
#include "apnav/policies.hpp"
#include "apnav/rng.hpp"

namespace apnav {

struct EpisodeConfig {
    double p_thres = 0.9;
    std::size_t n_intermediate = 4;
    std::size_t max_steps = 1;
    double sigma_meas = 0.0;
    /// Stop traversing as soon as a waypoint reaches p_thres.
    bool early_stop = false;
};

inline void validate(const EpisodeConfig& cfg)
{
    if (!(cfg.p_thres > 0.0 && cfg.p_thres < 1.0))
        throw std::invalid_argument("p_thres must lie in (0, 1)");
    if (cfg.max_steps < 1)
        throw std::invalid_argument("max_steps must be at least 1");
    if (!(cfg.sigma_meas >= 0.0))
        throw std::invalid_argument("sigma_meas must be >= 0");
}

/// Detector confidence plus optional Gaussian measurement noise, clamped to [0, 1].
inline double measure(const ConfidenceField& field, Pose pose, double sigma_meas, Rng& rng)
{
    double p = confidence(field, pose);
    if (sigma_meas > 0.0)
        p += rng.normal(0.0, sigma_meas);
    return std::clamp(p, 0.0, 1.0);
}

struct EpisodeStep {
    Pose from;
    Proposal proposal;
    std::vector<Pose> waypoints;
    std::vector<double> measured;
};

struct EpisodeRecord {
    std::string policy;
    std::uint64_t seed = 0;
    Pose init_pose;
    double p_init = 0.0;
    std::vector<EpisodeStep> steps;
    double p_final = 0.0;
    Pose best_pose;
    double p_best = 0.0;
    bool success = false;

    std::size_t measurement_count() const noexcept
    {
        std::size_t n = 1;
        for (const auto& s : steps)
            n += s.measured.size();
        return n;
    }
};

inline EpisodeRecord run_episode(const World& world, const ConfidenceField& field, const Policy& policy,
                                 Pose init_pose, const EpisodeConfig& cfg, std::uint64_t seed)
{
    validate(cfg);
    const PoseGrid& grid = world.grid();
    Rng meas_rng(derive_seed(seed, "measure"));
    Rng policy_rng(derive_seed(seed, "policy"));

    EpisodeRecord rec;
    rec.policy = policy.name();
    rec.seed = seed;
    rec.init_pose = grid.clamp(init_pose);
    rec.p_init = measure(field, rec.init_pose, cfg.sigma_meas, meas_rng);
    rec.best_pose = rec.init_pose;
    rec.p_best = rec.p_init;
    rec.p_final = rec.p_init;
    if (rec.p_init >= cfg.p_thres)
        return rec;

    double post_max = -std::numeric_limits<double>::infinity();
    bool stop = false;
    for (std::size_t step = 0; step < cfg.max_steps && !stop; ++step) {
        EpisodeStep s;
        s.from = rec.best_pose;
        const Observation obs = world.observe(s.from, derive_seed(derive_seed(seed, "observe"), step));
        s.proposal = policy.propose(obs, s.from, policy_rng);
        for (const Pose& wp : trajectory(grid, s.from, s.proposal, cfg.n_intermediate)) {
            const double m = measure(field, wp, cfg.sigma_meas, meas_rng);
            s.waypoints.push_back(wp);
            s.measured.push_back(m);
            post_max = std::max(post_max, m);
            if (m > rec.p_best) {
                rec.p_best = m;
                rec.best_pose = wp;
            }
            if (cfg.early_stop && m >= cfg.p_thres) {
                stop = true;
                break;
            }
        }
        rec.steps.push_back(std::move(s));
        if (rec.p_best >= cfg.p_thres)
            stop = true;
    }
    rec.p_final = post_max;
    rec.success = rec.p_final > rec.p_init;
    return rec;
}

inline json pose_to_json(Pose p) { return {{"theta", p.theta}, {"r", p.r}}; }

inline json episode_to_json(const EpisodeRecord& rec)
{
    json steps = json::array();
    for (const auto& s : rec.steps) {
        json wps = json::array();
        for (const auto& w : s.waypoints)
            wps.push_back(pose_to_json(w));
        steps.push_back({{"from", pose_to_json(s.from)},
                         {"proposal", {{"dtheta", s.proposal.dtheta}, {"dr", s.proposal.dr}}},
                         {"waypoints", std::move(wps)},
                         {"measured", s.measured}});
    }
    return {{"policy", rec.policy},
            {"seed", rec.seed},
            {"init_pose", pose_to_json(rec.init_pose)},
            {"p_init", rec.p_init},
            {"steps", std::move(steps)},
            {"p_final", rec.p_final},
            {"best_pose", pose_to_json(rec.best_pose)},
            {"p_best", rec.p_best},
            {"success", rec.success}};
}

} // namespace apnav
