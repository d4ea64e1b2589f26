// apnav: command-line front end.
//
//   apnav manifold | labels | train | episode | eval  [--config PATH] [--seed N] [--out DIR] [--jobs N]
//
// Exit codes: 0 ok, 1 runtime failure, 2 config or usage error,
// 3 missing input file, 4 input schema mismatch, 5 empty dataset.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "apnav/config.hpp"

namespace fs = std::filesystem;
using namespace apnav;

namespace {

enum ExitCode : int {
    kOk = 0,
    kRuntime = 1,
    kUsage = 2,
    kMissingInput = 3,
    kSchema = 4,
    kEmptyDataset = 5,
};

class MissingInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
};

struct InputOptions {
    std::string dataset;
    std::string model;
    std::string classifier;
};

struct EpisodeOptions {
    std::string policy = "regression";
    std::vector<double> pose;
};

void require_input(const std::string& path, const std::string& what)
{
    if (!fs::is_regular_file(path))
        throw MissingInputError(what + " not found: " + path);
}

RunConfig resolve_config(const GlobalOptions& g)
{
    RunConfig cfg;
    if (!g.config_path.empty()) {
        require_input(g.config_path, "config file");
        cfg = load_config(g.config_path);
    }
    if (g.seed)
        cfg.seed = *g.seed;
    if (!g.out.empty())
        cfg.out = g.out;
    if (g.jobs < 1)
        throw ConfigError("--jobs must be at least 1");
    return cfg;
}

fs::path out_dir(const RunConfig& cfg)
{
    fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + cfg.out + "': " + ec.message());
    return dir;
}

std::string default_input(const RunConfig& cfg, const std::string& given, const char* file)
{
    return given.empty() ? (fs::path(cfg.out) / file).string() : given;
}

/// Provenance sidecar for formats that cannot carry it inline (CSV).
void write_sidecar(const fs::path& file, const RunConfig& cfg, const std::string& kind, json extra = json::object())
{
    json j = std::move(extra);
    stamp(j, provenance(cfg));
    j["kind"] = kind;
    j["file"] = file.filename().string();
    write_file(file.string() + ".meta.json", j.dump(1) + "\n");
}

Dataset load_dataset(const RunConfig& cfg, const std::string& path)
{
    require_input(path, "dataset");
    Dataset ds = read_dataset(path);
    check_dataset_matches(cfg, ds);
    if (ds.records.empty())
        throw EmptyDatasetError("dataset '" + path + "' has no records");
    return ds;
}

NavNet load_model(const RunConfig& cfg, const std::string& path)
{
    require_input(path, "regression model (run `apnav train` or pass --model)");
    NavNet net = read_model(path);
    if (net.mlp.input_size() != cfg.world.obs_dim)
        throw SchemaError("model '" + path + "' expects " + std::to_string(net.mlp.input_size()) +
                          " inputs but the world has obs_dim " + std::to_string(cfg.world.obs_dim));
    return net;
}

ClassifierModel load_classifier(const RunConfig& cfg, const std::string& path)
{
    require_input(path, "classifier model (run `apnav train` or pass --classifier)");
    ClassifierModel model = read_classifier(path);
    if (model.mlp.input_size() != cfg.world.obs_dim)
        throw SchemaError("classifier '" + path + "' expects " + std::to_string(model.mlp.input_size()) +
                          " inputs but the world has obs_dim " + std::to_string(cfg.world.obs_dim));
    return model;
}

PolicyPtr make_policy(const std::string& name, const RunConfig& cfg, const World& world, const InputOptions& in)
{
    if (name == "static")
        return policy_static();
    if (name == "random")
        return policy_random(world.grid());
    if (name == "regression")
        return policy_regression(load_model(cfg, default_input(cfg, in.model, "model.json")), world.grid());
    if (name == "classifier")
        return policy_classifier(load_classifier(cfg, default_input(cfg, in.classifier, "classifier.json")));
    if (name == "oracle")
        return policy_oracle(load_dataset(cfg, default_input(cfg, in.dataset, "dataset.jsonl")));
    throw ConfigError("unknown policy '" + name + "'");
}

int cmd_manifold(const RunConfig& base, const std::string& preset)
{
    RunConfig cfg = base;
    if (!preset.empty()) {
        try {
            cfg.field = preset_by_name(preset);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        cfg.field_preset = preset;
    }
    const fs::path dir = out_dir(cfg);
    const auto table = export_manifold(cfg.field, world_config(cfg).grid);
    std::ostringstream os;
    write_manifold_csv(os, table);
    const fs::path file = dir / "manifold.csv";
    write_file(file.string(), os.str());
    const auto& g = cfg.world.grid;
    write_sidecar(file, cfg, "manifold",
                  {{"field_preset", cfg.field_preset},
                   {"field_params", field_to_json(cfg.field)},
                   {"n_angles", g.n_angles},
                   {"n_radii", g.n_radii},
                   {"r_min", g.r_min},
                   {"r_max", g.r_max}});
    std::cerr << "wrote " << file.string() << " (" << table.values.size() << " rows)\n";
    return kOk;
}

int cmd_labels(const RunConfig& cfg)
{
    const fs::path dir = out_dir(cfg);
    const Dataset ds = make_dataset(cfg);
    const fs::path file = dir / "dataset.jsonl";
    write_dataset(ds, file.string());
    std::size_t unreachable = 0;
    for (const auto& r : ds.records)
        unreachable += !r.label.reachable;
    std::cerr << "wrote " << file.string() << " (" << ds.records.size() << " records, " << unreachable
              << " unreachable)\n";
    return kOk;
}

int cmd_train(const RunConfig& cfg, const InputOptions& in)
{
    const Dataset ds = load_dataset(cfg, default_input(cfg, in.dataset, "dataset.jsonl"));
    const fs::path dir = out_dir(cfg);
    const Provenance prov = provenance(cfg);

    TrainReport rep;
    const NavNet net = train_regression(cfg, ds, &rep);
    write_model(net, (dir / "model.json").string(), prov);
    std::cerr << "regression: final loss " << rep.final_loss() << " after " << rep.epochs_run << " epochs\n";

    ClassifierReport crep;
    const ClassifierModel cls = train_classifier(ds, classifier_config(cfg), &crep);
    write_classifier(cls, (dir / "classifier.json").string(), prov);
    std::cerr << "classifier: train accuracy " << crep.train_accuracy << "\n";

    json j;
    stamp(j, prov);
    j["kind"] = "train_report";
    j["regression"] = {{"epoch_loss", rep.epoch_loss},
                       {"final_loss", rep.final_loss()},
                       {"validation_loss", rep.validation_loss},
                       {"epochs_run", rep.epochs_run},
                       {"n_train", rep.n_train},
                       {"n_validation", rep.n_validation},
                       {"seed", rep.seed}};
    j["classifier"] = {{"epoch_loss", crep.epoch_loss}, {"train_accuracy", crep.train_accuracy}};
    write_file((dir / "train_report.json").string(), j.dump(1) + "\n");
    std::cerr << "wrote model.json, classifier.json, train_report.json to " << dir.string() << "\n";
    return kOk;
}

int cmd_episode(const RunConfig& cfg, const InputOptions& in, const EpisodeOptions& opt)
{
    if (opt.pose.size() != 2)
        throw ConfigError("--pose expects THETA,R");
    const World world(world_config(cfg));
    const PolicyPtr policy = make_policy(opt.policy, cfg, world, in);
    const Pose start = world.grid().clamp({opt.pose[0], opt.pose[1]});
    const std::uint64_t seed = episode_seed(seed_plan(cfg.seed).eval, 0, opt.policy);
    const EpisodeRecord rec = run_episode(world, cfg.field, *policy, start, episode_config(cfg), seed);
    json j = episode_to_json(rec);
    stamp(j, provenance(cfg));
    j["kind"] = "episode";
    const fs::path file = out_dir(cfg) / "episode.json";
    write_file(file.string(), j.dump(1) + "\n");
    std::cerr << opt.policy << ": p_init " << rec.p_init << " -> p_final " << rec.p_final
              << (rec.success ? " (success)" : " (no improvement)") << "\n";
    return kOk;
}

int cmd_eval(const RunConfig& cfg, const InputOptions& in, std::size_t jobs)
{
    const World world(world_config(cfg));
    std::vector<PolicyPtr> policies;
    for (const auto& name : cfg.eval.policies)
        policies.push_back(make_policy(name, cfg, world, in));
    const Report report = evaluate(world, cfg.field, policies, eval_config(cfg, jobs));
    const fs::path dir = out_dir(cfg);
    write_file((dir / "report.json").string(), report_to_json(report, provenance(cfg)).dump(1) + "\n");
    const fs::path csv = dir / "report.csv";
    write_file(csv.string(), report_to_csv(report));
    write_sidecar(csv, cfg, "report_table");
    for (const auto& p : report.policies)
        std::cerr << p.policy << ": success " << p.success_rate << "%, improvement " << p.improvement_rate
                  << "%\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"apnav: active-perception navigation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "Run configuration (JSON)");
    app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--out", g.out, "Output directory (overrides the config)");
    app.add_option("--jobs", g.jobs, "Worker threads for eval")->check(CLI::PositiveNumber);

    InputOptions in;
    EpisodeOptions ep;
    std::string preset;

    auto* manifold = app.add_subcommand("manifold", "Export the confidence manifold as CSV");
    manifold->add_option("--preset", preset, "Field preset (car, person); overrides the config field");
    auto* labels = app.add_subcommand("labels", "Generate the labelled navigation dataset");
    auto* train = app.add_subcommand("train", "Train the regression and classification policies");
    train->add_option("--dataset", in.dataset, "Dataset (default OUT/dataset.jsonl)");
    auto* episode = app.add_subcommand("episode", "Run one episode from a given pose");
    episode->add_option("--policy", ep.policy, "Policy name")
        ->check(CLI::IsMember({"static", "random", "classifier", "regression", "oracle"}));
    episode->add_option("--pose", ep.pose, "Initial pose THETA,R")->delimiter(',')->expected(2)->required();
    auto* eval = app.add_subcommand("eval", "Evaluate the configured policies from paired initial poses");
    for (auto* sub : {episode, eval}) {
        sub->add_option("--model", in.model, "Regression model (default OUT/model.json)");
        sub->add_option("--classifier", in.classifier, "Classifier model (default OUT/classifier.json)");
        sub->add_option("--dataset", in.dataset, "Dataset for the oracle policy (default OUT/dataset.jsonl)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const RunConfig cfg = resolve_config(g);
        if (manifold->parsed())
            return cmd_manifold(cfg, preset);
        if (labels->parsed())
            return cmd_labels(cfg);
        if (train->parsed())
            return cmd_train(cfg, in);
        if (episode->parsed())
            return cmd_episode(cfg, in, ep);
        if (eval->parsed())
            return cmd_eval(cfg, in, g.jobs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return kMissingInput;
    } catch (const SchemaError& e) {
        std::cerr << "schema mismatch: " << e.what() << "\n";
        return kSchema;
    } catch (const EmptyDatasetError& e) {
        std::cerr << "empty dataset: " << e.what() << "\n";
        return kEmptyDataset;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kRuntime;
}
