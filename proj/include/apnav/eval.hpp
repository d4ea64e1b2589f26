#pragma once

// Paired multi-policy evaluation: every policy starts from the same sampled
// initial poses; success and improvement rates are aggregated per policy.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "apnav/detector_field.hpp"
#include "apnav/geometry.hpp"
#include "apnav/json_io.hpp"
#include "apnav/pipeline.hpp"
#include "apnav/policies.hpp"
#include "apnav/rng.hpp"

namespace apnav {

/// Draws n_trials grid poses uniformly (with replacement) from the grid
/// poses whose confidence is below p_thres.
inline std::vector<Pose> sample_initial_poses(const World& world, const ConfidenceField& field, double p_thres,
                                              std::size_t n_trials, std::uint64_t seed)
{
    const PoseGrid& grid = world.grid();
    std::vector<Pose> candidates;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Pose p = pose_at(grid, grid.unflat(k));
        if (confidence(field, p) < p_thres)
            candidates.push_back(p);
    }
    if (candidates.empty())
        throw NoValidPoseError("every grid pose meets the threshold; no initial pose to sample");
    Rng rng(derive_seed(seed, "initial-poses"));
    std::vector<Pose> out;
    out.reserve(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t)
        out.push_back(candidates[rng.below(candidates.size())]);
    return out;
}

/// Percentage of episodes that ended with p_final > p_init.
inline double success_rate(const std::vector<EpisodeRecord>& records)
{
    if (records.empty())
        throw std::invalid_argument("success_rate of an empty record list");
    const auto n = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.success; });
    return 100.0 * static_cast<double>(n) / static_cast<double>(records.size());
}

/// Mean relative confidence gain in percent over the successful episodes;
/// 0.0 when none succeeded.
inline double improvement_rate(const std::vector<EpisodeRecord>& records)
{
    if (records.empty())
        throw std::invalid_argument("improvement_rate of an empty record list");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (!r.success)
            continue;
        sum += 100.0 * (r.p_final - r.p_init) / r.p_init;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

struct EvalConfig {
    std::size_t n_trials = 100;
    std::uint64_t seed = 0;
    EpisodeConfig episode;
    /// Worker threads; results do not depend on it.
    std::size_t jobs = 1;
};

struct PolicyReport {
    std::string policy;
    double success_rate = 0.0;
    double improvement_rate = 0.0;
    std::size_t n_trials = 0;
    double mean_p_init = 0.0;
    double mean_p_final = 0.0;
    std::vector<EpisodeRecord> episodes;
};

struct Report {
    std::uint64_t seed = 0;
    EvalConfig config;
    std::vector<Pose> initial_poses;
    std::vector<PolicyReport> policies;

    const PolicyReport& at(const std::string& name) const
    {
        for (const auto& p : policies)
            if (p.policy == name)
                return p;
        throw std::out_of_range("no policy named '" + name + "' in report");
    }
};

/// Seed of one (trial, policy) episode. Depends only on the policy's name,
/// so adding a policy never changes another policy's episodes.
inline std::uint64_t episode_seed(std::uint64_t master, std::size_t trial, const std::string& policy)
{
    return derive_seed(derive_seed(master, static_cast<std::uint64_t>(trial)), policy);
}

inline PolicyReport summarize(const std::string& name, std::vector<EpisodeRecord> episodes)
{
    PolicyReport pr;
    pr.policy = name;
    pr.n_trials = episodes.size();
    pr.success_rate = success_rate(episodes);
    pr.improvement_rate = improvement_rate(episodes);
    for (const auto& e : episodes) {
        pr.mean_p_init += e.p_init;
        pr.mean_p_final += e.p_final;
    }
    pr.mean_p_init /= static_cast<double>(episodes.size());
    pr.mean_p_final /= static_cast<double>(episodes.size());
    pr.episodes = std::move(episodes);
    return pr;
}

inline Report evaluate(const World& world, const ConfidenceField& field, const std::vector<PolicyPtr>& policies,
                       const EvalConfig& cfg)
{
    if (cfg.n_trials < 1)
        throw std::invalid_argument("n_trials must be at least 1");
    validate(cfg.episode);
    Report report;
    report.seed = cfg.seed;
    report.config = cfg;
    report.initial_poses = sample_initial_poses(world, field, cfg.episode.p_thres, cfg.n_trials, cfg.seed);

    const std::size_t n_pol = policies.size();
    const std::size_t n_tasks = n_pol * cfg.n_trials;
    std::vector<EpisodeRecord> results(n_tasks);
    auto run_task = [&](std::size_t task) {
        const std::size_t p = task / cfg.n_trials;
        const std::size_t t = task % cfg.n_trials;
        results[task] = run_episode(world, field, *policies[p], report.initial_poses[t], cfg.episode,
                                    episode_seed(cfg.seed, t, policies[p]->name()));
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, n_tasks));
    if (jobs == 1) {
        for (std::size_t k = 0; k < n_tasks; ++k)
            run_task(k);
    } else {
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t k = w; k < n_tasks; k += jobs)
                    run_task(k);
            });
        for (auto& th : workers)
            th.join();
    }

    for (std::size_t p = 0; p < n_pol; ++p) {
        std::vector<EpisodeRecord> eps(std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>(p * cfg.n_trials)),
                                       std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>((p + 1) * cfg.n_trials)));
        report.policies.push_back(summarize(policies[p]->name(), std::move(eps)));
    }
    return report;
}

inline json report_to_json(const Report& report, const Provenance& prov = {})
{
    json j;
    stamp(j, prov);
    j["kind"] = "report";
    j["protocol"] = "paired: every policy starts from the same sampled initial poses";
    j["seed"] = report.seed;
    j["n_trials"] = report.config.n_trials;
    j["episode_config"] = {{"p_thres", report.config.episode.p_thres},
                           {"n_intermediate", report.config.episode.n_intermediate},
                           {"max_steps", report.config.episode.max_steps},
                           {"sigma_meas", report.config.episode.sigma_meas},
                           {"early_stop", report.config.episode.early_stop}};
    json pols = json::array();
    for (const auto& p : report.policies) {
        json eps = json::array();
        for (const auto& e : p.episodes)
            eps.push_back({{"seed", e.seed},
                           {"init_pose", pose_to_json(e.init_pose)},
                           {"p_init", e.p_init},
                           {"p_final", e.p_final},
                           {"best_pose", pose_to_json(e.best_pose)},
                           {"success", e.success},
                           {"proposal",
                            e.steps.empty() ? json(nullptr)
                                            : json{{"dtheta", e.steps.front().proposal.dtheta},
                                                   {"dr", e.steps.front().proposal.dr}}}});
        pols.push_back({{"policy", p.policy},
                        {"success_rate", p.success_rate},
                        {"improvement_rate", p.improvement_rate},
                        {"n_trials", p.n_trials},
                        {"mean_p_init", p.mean_p_init},
                        {"mean_p_final", p.mean_p_final},
                        {"episodes", std::move(eps)}});
    }
    j["policies"] = std::move(pols);
    return j;
}

/// `policy,success_rate,improvement_rate,n_trials`, one row per policy.
inline std::string report_to_csv(const Report& report)
{
    std::ostringstream os;
    os << "policy,success_rate,improvement_rate,n_trials\n";
    for (const auto& p : report.policies)
        os << p.policy << ',' << format_g9(p.success_rate) << ',' << format_g9(p.improvement_rate) << ','
           << p.n_trials << '\n';
    return os.str();
}

} // namespace apnav
