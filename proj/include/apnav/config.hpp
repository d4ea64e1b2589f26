#pragma once

// Run configuration: one JSON document with a section per module, strict
// key checking, a canonical hash, and the master-seed derivation used by
// every command.

#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "apnav/detector_field.hpp"
#include "apnav/errors.hpp"
#include "apnav/eval.hpp"
#include "apnav/geometry.hpp"
#include "apnav/json_io.hpp"
#include "apnav/label_gen.hpp"
#include "apnav/nav_regressor.hpp"
#include "apnav/pipeline.hpp"
#include "apnav/policies.hpp"
#include "apnav/rng.hpp"

namespace apnav {

/// The configuration document itself is invalid (unknown key, wrong type,
/// out-of-range value).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct GridSettings {
    std::size_t n_angles = 76;
    std::size_t n_radii = 65;
    double r_min = 1.0;
    double r_max = 60.0;
};

struct WorldSettings {
    GridSettings grid;
    std::size_t obs_dim = 32;
    double obs_noise_sigma = 0.0;
    double encoder_scale = 2.0;
};

struct LabelSettings {
    double p_thres = 0.9;
    double radial_weight = 1.0;
};

struct TrainingSettings {
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double lr = 0.001;
    bool include_unreachable = true;
    double validation_fraction = 0.0;
};

struct ClassifierSettings {
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double lr = 0.001;
    BinConfig bins;
};

struct EpisodeSettings {
    std::size_t n_intermediate = 4;
    std::size_t max_steps = 1;
    double sigma_meas = 0.0;
    bool early_stop = false;
};

inline const std::vector<std::string>& known_policies()
{
    static const std::vector<std::string> names{"static", "random", "classifier", "regression", "oracle"};
    return names;
}

struct EvalSettings {
    std::size_t n_trials = 100;
    std::vector<std::string> policies = {"static", "random", "classifier", "regression"};
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out = "out";
    WorldSettings world;
    /// Preset name, or empty when the field is given explicitly.
    std::string field_preset = "car";
    ConfidenceField field = preset_car();
    LabelSettings labels;
    TrainingSettings training;
    ClassifierSettings classifier;
    EpisodeSettings episode;
    EvalSettings eval;
};

/// Seeds of every random stream, derived from the master seed.
struct SeedPlan {
    std::uint64_t encoder;
    std::uint64_t label_noise;
    std::uint64_t regression;
    std::uint64_t classifier;
    std::uint64_t eval;
};

inline SeedPlan seed_plan(std::uint64_t master)
{
    return {derive_seed(master, "encoder"), derive_seed(master, "labels"), derive_seed(master, "regression"),
            derive_seed(master, "classifier"), derive_seed(master, "eval")};
}

namespace detail {

inline std::string key_path(const std::string& section, const std::string& key)
{
    return section.empty() ? key : section + "." + key;
}

inline void check_object(const json& j, const std::string& section)
{
    if (!j.is_object())
        throw ConfigError("config section '" + (section.empty() ? std::string("<root>") : section) +
                          "' must be an object");
}

inline void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> allowed)
{
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok)
            throw ConfigError("unknown config key '" + key_path(section, key) + "'");
    }
}

inline void read_number(const json& j, const std::string& section, const char* key, double& out)
{
    if (!j.contains(key))
        return;
    if (!j[key].is_number())
        throw ConfigError("config key '" + key_path(section, key) + "' must be a number");
    out = j[key].get<double>();
}

inline bool is_non_negative_integer(const json& v)
{
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline void read_count(const json& j, const std::string& section, const char* key, std::size_t& out)
{
    if (!j.contains(key))
        return;
    if (!is_non_negative_integer(j[key]))
        throw ConfigError("config key '" + key_path(section, key) + "' must be a non-negative integer");
    out = j[key].get<std::size_t>();
}

inline void read_bool(const json& j, const std::string& section, const char* key, bool& out)
{
    if (!j.contains(key))
        return;
    if (!j[key].is_boolean())
        throw ConfigError("config key '" + key_path(section, key) + "' must be a boolean");
    out = j[key].get<bool>();
}

inline void read_counts(const json& j, const std::string& section, const char* key, std::vector<std::size_t>& out)
{
    if (!j.contains(key))
        return;
    const json& v = j[key];
    if (!v.is_array())
        throw ConfigError("config key '" + key_path(section, key) + "' must be an array of positive integers");
    std::vector<std::size_t> vals;
    for (const auto& e : v) {
        if (!is_non_negative_integer(e) || e.get<std::size_t>() == 0)
            throw ConfigError("config key '" + key_path(section, key) + "' must be an array of positive integers");
        vals.push_back(e.get<std::size_t>());
    }
    out = std::move(vals);
}

inline void require_that(bool cond, const std::string& key, const std::string& what)
{
    if (!cond)
        throw ConfigError("config key '" + key + "' " + what);
}

inline ConfidenceField parse_field(const json& j, std::string& preset)
{
    if (j.is_string()) {
        preset = j.get<std::string>();
        try {
            return preset_by_name(preset);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config key 'field': ") + e.what());
        }
    }
    check_object(j, "field");
    if (j.contains("preset")) {
        reject_unknown(j, "field", {"preset"});
        if (!j["preset"].is_string())
            throw ConfigError("config key 'field.preset' must be a string");
        return parse_field(j["preset"], preset);
    }
    reject_unknown(j, "field", {"lobes", "r_half", "r_slope", "bias"});
    preset.clear();
    if (!j.contains("lobes") || !j["lobes"].is_array() || j["lobes"].empty())
        throw ConfigError("config key 'field.lobes' must be a non-empty array");
    ConfidenceField f;
    f.lobes.clear();
    for (std::size_t k = 0; k < j["lobes"].size(); ++k) {
        const json& l = j["lobes"][k];
        const std::string sec = "field.lobes[" + std::to_string(k) + "]";
        check_object(l, sec);
        reject_unknown(l, sec, {"mu", "sigma", "weight"});
        AngularLobe lobe{0.0, 1.0, 1.0};
        read_number(l, sec, "mu", lobe.mu);
        read_number(l, sec, "sigma", lobe.sigma);
        read_number(l, sec, "weight", lobe.weight);
        f.lobes.push_back(lobe);
    }
    read_number(j, "field", "r_half", f.r_half);
    read_number(j, "field", "r_slope", f.r_slope);
    read_number(j, "field", "bias", f.bias);
    try {
        validate(f);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config key 'field': ") + e.what());
    }
    return f;
}

} // namespace detail

/// Parses and validates a configuration document. Missing keys keep their
/// defaults; unknown keys and ill-typed values throw ConfigError naming the key.
inline RunConfig config_from_json(const json& j)
{
    using namespace detail;
    RunConfig cfg;
    check_object(j, "");
    reject_unknown(j, "", {"seed", "out", "world", "field", "labels", "training", "classifier", "episode", "eval"});
    if (j.contains("seed")) {
        if (!detail::is_non_negative_integer(j["seed"]))
            throw ConfigError("config key 'seed' must be a non-negative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("out")) {
        if (!j["out"].is_string())
            throw ConfigError("config key 'out' must be a string");
        cfg.out = j["out"].get<std::string>();
    }
    if (j.contains("world")) {
        const json& w = j["world"];
        check_object(w, "world");
        reject_unknown(w, "world", {"n_angles", "n_radii", "r_min", "r_max", "obs_dim", "obs_noise_sigma", "encoder_scale"});
        read_count(w, "world", "n_angles", cfg.world.grid.n_angles);
        read_count(w, "world", "n_radii", cfg.world.grid.n_radii);
        read_number(w, "world", "r_min", cfg.world.grid.r_min);
        read_number(w, "world", "r_max", cfg.world.grid.r_max);
        read_count(w, "world", "obs_dim", cfg.world.obs_dim);
        read_number(w, "world", "obs_noise_sigma", cfg.world.obs_noise_sigma);
        read_number(w, "world", "encoder_scale", cfg.world.encoder_scale);
    }
    const auto& g = cfg.world.grid;
    require_that(g.n_angles >= 2, "world.n_angles", "must be at least 2");
    require_that(g.n_radii >= 1, "world.n_radii", "must be at least 1");
    require_that(g.r_min > 0.0, "world.r_min", "must be positive");
    require_that(g.r_min <= g.r_max, "world.r_max", "must not be below world.r_min");
    require_that(cfg.world.obs_dim >= 1, "world.obs_dim", "must be positive");
    require_that(cfg.world.obs_noise_sigma >= 0.0, "world.obs_noise_sigma", "must be >= 0");
    require_that(cfg.world.encoder_scale > 0.0, "world.encoder_scale", "must be positive");

    if (j.contains("field"))
        cfg.field = parse_field(j["field"], cfg.field_preset);

    if (j.contains("labels")) {
        const json& l = j["labels"];
        check_object(l, "labels");
        reject_unknown(l, "labels", {"p_thres", "radial_weight"});
        read_number(l, "labels", "p_thres", cfg.labels.p_thres);
        read_number(l, "labels", "radial_weight", cfg.labels.radial_weight);
    }
    require_that(cfg.labels.p_thres > 0.0 && cfg.labels.p_thres < 1.0, "labels.p_thres", "must lie in (0, 1)");
    require_that(cfg.labels.radial_weight > 0.0, "labels.radial_weight", "must be positive");

    if (j.contains("training")) {
        const json& t = j["training"];
        check_object(t, "training");
        reject_unknown(t, "training",
                       {"hidden", "epochs", "batch_size", "lr", "include_unreachable", "validation_fraction"});
        read_counts(t, "training", "hidden", cfg.training.hidden);
        read_count(t, "training", "epochs", cfg.training.epochs);
        read_count(t, "training", "batch_size", cfg.training.batch_size);
        read_number(t, "training", "lr", cfg.training.lr);
        read_bool(t, "training", "include_unreachable", cfg.training.include_unreachable);
        read_number(t, "training", "validation_fraction", cfg.training.validation_fraction);
    }
    require_that(cfg.training.epochs >= 1, "training.epochs", "must be at least 1");
    require_that(cfg.training.batch_size >= 1, "training.batch_size", "must be at least 1");
    require_that(cfg.training.lr > 0.0, "training.lr", "must be positive");
    require_that(cfg.training.validation_fraction >= 0.0 && cfg.training.validation_fraction < 1.0,
                 "training.validation_fraction", "must lie in [0, 1)");

    if (j.contains("classifier")) {
        const json& c = j["classifier"];
        check_object(c, "classifier");
        reject_unknown(c, "classifier", {"hidden", "epochs", "batch_size", "lr", "bins"});
        read_counts(c, "classifier", "hidden", cfg.classifier.hidden);
        read_count(c, "classifier", "epochs", cfg.classifier.epochs);
        read_count(c, "classifier", "batch_size", cfg.classifier.batch_size);
        read_number(c, "classifier", "lr", cfg.classifier.lr);
        if (c.contains("bins")) {
            const json& b = c["bins"];
            check_object(b, "classifier.bins");
            reject_unknown(b, "classifier.bins", {"theta_small", "theta_large", "r_small", "r_large"});
            read_number(b, "classifier.bins", "theta_small", cfg.classifier.bins.theta_small);
            read_number(b, "classifier.bins", "theta_large", cfg.classifier.bins.theta_large);
            read_number(b, "classifier.bins", "r_small", cfg.classifier.bins.r_small);
            read_number(b, "classifier.bins", "r_large", cfg.classifier.bins.r_large);
        }
    }
    const auto& bins = cfg.classifier.bins;
    require_that(cfg.classifier.epochs >= 1, "classifier.epochs", "must be at least 1");
    require_that(cfg.classifier.batch_size >= 1, "classifier.batch_size", "must be at least 1");
    require_that(cfg.classifier.lr > 0.0, "classifier.lr", "must be positive");
    require_that(bins.theta_small > 0.0 && bins.theta_small < bins.theta_large, "classifier.bins.theta_large",
                 "must exceed classifier.bins.theta_small > 0");
    require_that(bins.r_small > 0.0 && bins.r_small < bins.r_large, "classifier.bins.r_large",
                 "must exceed classifier.bins.r_small > 0");

    if (j.contains("episode")) {
        const json& e = j["episode"];
        check_object(e, "episode");
        reject_unknown(e, "episode", {"n_intermediate", "max_steps", "sigma_meas", "early_stop"});
        read_count(e, "episode", "n_intermediate", cfg.episode.n_intermediate);
        read_count(e, "episode", "max_steps", cfg.episode.max_steps);
        read_number(e, "episode", "sigma_meas", cfg.episode.sigma_meas);
        read_bool(e, "episode", "early_stop", cfg.episode.early_stop);
    }
    require_that(cfg.episode.max_steps >= 1, "episode.max_steps", "must be at least 1");
    require_that(cfg.episode.sigma_meas >= 0.0, "episode.sigma_meas", "must be >= 0");

    if (j.contains("eval")) {
        const json& e = j["eval"];
        check_object(e, "eval");
        reject_unknown(e, "eval", {"n_trials", "policies"});
        read_count(e, "eval", "n_trials", cfg.eval.n_trials);
        if (e.contains("policies")) {
            if (!e["policies"].is_array() || e["policies"].empty())
                throw ConfigError("config key 'eval.policies' must be a non-empty array of policy names");
            cfg.eval.policies.clear();
            std::set<std::string> seen;
            for (const auto& p : e["policies"]) {
                if (!p.is_string())
                    throw ConfigError("config key 'eval.policies' must contain strings");
                const auto name = p.get<std::string>();
                const auto& known = known_policies();
                if (std::find(known.begin(), known.end(), name) == known.end())
                    throw ConfigError("config key 'eval.policies': unknown policy '" + name + "'");
                if (!seen.insert(name).second)
                    throw ConfigError("config key 'eval.policies': duplicate policy '" + name + "'");
                cfg.eval.policies.push_back(name);
            }
        }
    }
    require_that(cfg.eval.n_trials >= 1, "eval.n_trials", "must be at least 1");
    return cfg;
}

/// Fully resolved configuration, every key present.
inline json config_to_json(const RunConfig& cfg)
{
    json j;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out;
    j["world"] = {{"n_angles", cfg.world.grid.n_angles},
                  {"n_radii", cfg.world.grid.n_radii},
                  {"r_min", cfg.world.grid.r_min},
                  {"r_max", cfg.world.grid.r_max},
                  {"obs_dim", cfg.world.obs_dim},
                  {"obs_noise_sigma", cfg.world.obs_noise_sigma},
                  {"encoder_scale", cfg.world.encoder_scale}};
    if (!cfg.field_preset.empty()) {
        j["field"] = {{"preset", cfg.field_preset}};
    } else {
        json f = field_to_json(cfg.field);
        j["field"] = f;
    }
    j["labels"] = {{"p_thres", cfg.labels.p_thres}, {"radial_weight", cfg.labels.radial_weight}};
    j["training"] = {{"hidden", cfg.training.hidden},
                     {"epochs", cfg.training.epochs},
                     {"batch_size", cfg.training.batch_size},
                     {"lr", cfg.training.lr},
                     {"include_unreachable", cfg.training.include_unreachable},
                     {"validation_fraction", cfg.training.validation_fraction}};
    j["classifier"] = {{"hidden", cfg.classifier.hidden},
                       {"epochs", cfg.classifier.epochs},
                       {"batch_size", cfg.classifier.batch_size},
                       {"lr", cfg.classifier.lr},
                       {"bins",
                        {{"theta_small", cfg.classifier.bins.theta_small},
                         {"theta_large", cfg.classifier.bins.theta_large},
                         {"r_small", cfg.classifier.bins.r_small},
                         {"r_large", cfg.classifier.bins.r_large}}}};
    j["episode"] = {{"n_intermediate", cfg.episode.n_intermediate},
                    {"max_steps", cfg.episode.max_steps},
                    {"sigma_meas", cfg.episode.sigma_meas},
                    {"early_stop", cfg.episode.early_stop}};
    j["eval"] = {{"n_trials", cfg.eval.n_trials}, {"policies", cfg.eval.policies}};
    return j;
}

/// Hex FNV-1a hash of the canonical configuration, excluding the master
/// seed and the output directory (both recorded separately).
inline std::string config_hash(const RunConfig& cfg)
{
    json j = config_to_json(cfg);
    j.erase("seed");
    j.erase("out");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(j.dump())));
    return buf;
}

inline Provenance provenance(const RunConfig& cfg) { return {config_hash(cfg), cfg.seed}; }

inline RunConfig load_config(const std::string& path)
{
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

inline WorldConfig world_config(const RunConfig& cfg)
{
    WorldConfig wc;
    const auto& g = cfg.world.grid;
    wc.grid = make_grid(g.n_angles, g.n_radii, g.r_min, g.r_max);
    wc.obs_dim = cfg.world.obs_dim;
    wc.obs_noise_sigma = cfg.world.obs_noise_sigma;
    wc.encoder_scale = cfg.world.encoder_scale;
    wc.encoder_seed = seed_plan(cfg.seed).encoder;
    return wc;
}

inline EpisodeConfig episode_config(const RunConfig& cfg)
{
    EpisodeConfig ec;
    ec.p_thres = cfg.labels.p_thres;
    ec.n_intermediate = cfg.episode.n_intermediate;
    ec.max_steps = cfg.episode.max_steps;
    ec.sigma_meas = cfg.episode.sigma_meas;
    ec.early_stop = cfg.episode.early_stop;
    return ec;
}

inline TrainConfig train_config(const RunConfig& cfg)
{
    TrainConfig tc;
    tc.epochs = cfg.training.epochs;
    tc.batch_size = cfg.training.batch_size;
    tc.lr = cfg.training.lr;
    tc.seed = seed_plan(cfg.seed).regression;
    tc.include_unreachable = cfg.training.include_unreachable;
    tc.validation_fraction = cfg.training.validation_fraction;
    return tc;
}

inline ClassifierTrainConfig classifier_config(const RunConfig& cfg)
{
    ClassifierTrainConfig cc;
    cc.hidden = cfg.classifier.hidden;
    cc.epochs = cfg.classifier.epochs;
    cc.batch_size = cfg.classifier.batch_size;
    cc.lr = cfg.classifier.lr;
    cc.seed = seed_plan(cfg.seed).classifier;
    cc.bins = cfg.classifier.bins;
    return cc;
}

inline EvalConfig eval_config(const RunConfig& cfg, std::size_t jobs = 1)
{
    EvalConfig ec;
    ec.n_trials = cfg.eval.n_trials;
    ec.seed = seed_plan(cfg.seed).eval;
    ec.episode = episode_config(cfg);
    ec.jobs = jobs;
    return ec;
}

inline Dataset make_dataset(const RunConfig& cfg)
{
    Dataset ds = generate_dataset(World(world_config(cfg)), cfg.field, cfg.labels.p_thres, cfg.labels.radial_weight,
                                  seed_plan(cfg.seed).label_noise);
    ds.provenance = provenance(cfg);
    return ds;
}

/// Layer sizes of the navigation net for a world with obs_dim inputs.
inline std::vector<std::size_t> regression_layers(const RunConfig& cfg)
{
    std::vector<std::size_t> sizes{cfg.world.obs_dim};
    sizes.insert(sizes.end(), cfg.training.hidden.begin(), cfg.training.hidden.end());
    sizes.push_back(2);
    return sizes;
}

inline NavNet train_regression(const RunConfig& cfg, const Dataset& ds, TrainReport* report = nullptr)
{
    const TrainConfig tc = train_config(cfg);
    NavNet net = init_net(regression_layers(cfg), derive_seed(tc.seed, "init"));
    TrainReport rep = train(net, ds, tc);
    if (report)
        *report = std::move(rep);
    return net;
}

/// Throws SchemaError when a dataset was not generated for this
/// configuration's world, field and threshold.
inline void check_dataset_matches(const RunConfig& cfg, const Dataset& ds)
{
    const WorldConfig wc = world_config(cfg);
    const auto& g = ds.world.grid;
    const bool same_world = g.n_angles() == wc.grid.n_angles() && g.n_radii() == wc.grid.n_radii() &&
                            g.r_min() == wc.grid.r_min() && g.r_max() == wc.grid.r_max() &&
                            ds.world.obs_dim == wc.obs_dim && ds.world.encoder_seed == wc.encoder_seed &&
                            ds.world.encoder_scale == wc.encoder_scale &&
                            ds.world.obs_noise_sigma == wc.obs_noise_sigma;
    if (!same_world)
        throw SchemaError("dataset world (grid, encoder) does not match the configuration");
    if (ds.p_thres != cfg.labels.p_thres)
        throw SchemaError("dataset threshold does not match the configuration");
    if (field_to_json(ds.field) != field_to_json(cfg.field))
        throw SchemaError("dataset confidence field does not match the configuration");
}

} // namespace apnav
