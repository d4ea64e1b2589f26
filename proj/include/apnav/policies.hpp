#pragma once

// Navigation policies: static, random, direction classifier, regression and
// an oracle that replays ground-truth labels.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "apnav/geometry.hpp"
#include "apnav/json_io.hpp"
#include "apnav/label_gen.hpp"
#include "apnav/mlp.hpp"
#include "apnav/nav_regressor.hpp"

namespace apnav {

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    /// Proposal for the current observation. `pose` is only read by the
    /// oracle; learned policies see the observation alone.
    virtual Proposal propose(const Observation& obs, Pose pose, Rng& rng) const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

class StaticPolicy final : public Policy {
public:
    std::string name() const override { return "static"; }
    Proposal propose(const Observation&, Pose, Rng&) const override { return {}; }
};

/// dtheta ~ U[-pi, pi], dr ~ U[-R, R] from the caller's stream.
class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(const PoseGrid& grid) : range_(grid.radial_range()) {}

    std::string name() const override { return "random"; }

    Proposal propose(const Observation&, Pose, Rng& rng) const override
    {
        const double dtheta = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const double dr = rng.uniform(-range_, range_);
        return {dtheta, dr};
    }

private:
    double range_;
};

class RegressionPolicy final : public Policy {
public:
    RegressionPolicy(NavNet net, const PoseGrid& grid) : net_(std::move(net)), grid_(grid) {}

    std::string name() const override { return "regression"; }

    Proposal propose(const Observation& obs, Pose, Rng&) const override
    {
        return predict_proposal(net_, obs, grid_);
    }

    const NavNet& net() const noexcept { return net_; }

private:
    NavNet net_;
    PoseGrid grid_;
};

/// Snaps the pose to the nearest grid point and returns its stored label.
class OraclePolicy final : public Policy {
public:
    explicit OraclePolicy(const Dataset& ds) : grid_(ds.world.grid), labels_(ds.world.grid.size())
    {
        if (ds.records.size() != grid_.size())
            throw std::invalid_argument("oracle policy needs one record per grid point");
        for (const auto& r : ds.records)
            labels_[grid_.flat(r.index)] = {r.label.dtheta, r.label.dr};
    }

    std::string name() const override { return "oracle"; }

    Proposal propose(const Observation&, Pose pose, Rng&) const override
    {
        return labels_[grid_.flat(grid_.snap(pose))];
    }

private:
    PoseGrid grid_;
    std::vector<Proposal> labels_;
};

inline PolicyPtr policy_static() { return std::make_shared<StaticPolicy>(); }
inline PolicyPtr policy_random(const PoseGrid& grid) { return std::make_shared<RandomPolicy>(grid); }
inline PolicyPtr policy_regression(NavNet net, const PoseGrid& grid)
{
    return std::make_shared<RegressionPolicy>(std::move(net), grid);
}
inline PolicyPtr policy_oracle(const Dataset& ds) { return std::make_shared<OraclePolicy>(ds); }

// Direction classification baseline.

/// Sign/magnitude bin boundaries: |x| <= small -> 0, <= large -> +-1, else +-2.
struct BinConfig {
    double theta_small = 0.05;
    double theta_large = 0.5;
    double r_small = 0.5;
    double r_large = 5.0;
};

struct DirectionClass {
    int theta_bin = 0; ///< -2..2
    int r_bin = 0;     ///< -2..2

    friend bool operator==(const DirectionClass&, const DirectionClass&) = default;
};

inline constexpr std::size_t kNumClasses = 25;

inline std::size_t class_index(DirectionClass c) noexcept
{
    return static_cast<std::size_t>((c.theta_bin + 2) * 5 + (c.r_bin + 2));
}

inline DirectionClass class_from_index(std::size_t k) noexcept
{
    return {static_cast<int>(k / 5) - 2, static_cast<int>(k % 5) - 2};
}

namespace detail {

inline int bin_of(double x, double small, double large) noexcept
{
    const double a = std::abs(x);
    const int mag = a <= small ? 0 : (a <= large ? 1 : 2);
    return x < 0.0 ? -mag : mag;
}

inline double bin_midpoint(int bin, double small, double large, double limit) noexcept
{
    const int mag = std::abs(bin);
    const double m = mag == 0 ? 0.0 : (mag == 1 ? 0.5 * (small + large) : 0.5 * (large + std::max(limit, large)));
    return bin < 0 ? -m : m;
}

} // namespace detail

inline DirectionClass quantize_label(double dtheta, double dr, const BinConfig& bins = {}) noexcept
{
    return {detail::bin_of(dtheta, bins.theta_small, bins.theta_large), detail::bin_of(dr, bins.r_small, bins.r_large)};
}

inline DirectionClass quantize_label(const NavigationLabel& label, const BinConfig& bins = {}) noexcept
{
    return quantize_label(label.dtheta, label.dr, bins);
}

/// Mean label of the training records in a class; the bin midpoint when the
/// class is empty.
inline Proposal class_centroid(DirectionClass cls, const Dataset& ds, const BinConfig& bins = {})
{
    double st = 0.0, sr = 0.0;
    std::size_t n = 0;
    for (const auto& rec : ds.records) {
        if (quantize_label(rec.label, bins) == cls) {
            st += rec.label.dtheta;
            sr += rec.label.dr;
            ++n;
        }
    }
    if (n > 0)
        return {st / static_cast<double>(n), sr / static_cast<double>(n)};
    return {detail::bin_midpoint(cls.theta_bin, bins.theta_small, bins.theta_large, std::numbers::pi),
            detail::bin_midpoint(cls.r_bin, bins.r_small, bins.r_large, ds.world.grid.radial_range())};
}

struct ClassifierModel {
    Mlp mlp;
    BinConfig bins;
    std::array<Proposal, kNumClasses> centroids{};
};

struct ClassifierTrainConfig {
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double lr = 0.001;
    std::uint64_t seed = 1;
    BinConfig bins;
};

struct ClassifierReport {
    std::vector<double> epoch_loss; ///< cross-entropy after each epoch
    double train_accuracy = 0.0;    ///< top-1, fraction
};

inline std::size_t predict_class(const ClassifierModel& model, std::span<const double> obs)
{
    const VectorXd probs = model.mlp.forward(obs);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return static_cast<std::size_t>(best);
}

inline double classifier_accuracy(const ClassifierModel& model, const Dataset& ds)
{
    if (ds.records.empty())
        return 0.0;
    std::vector<std::size_t> all(ds.records.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    const MatrixXd probs = model.mlp.forward(detail::observation_matrix(ds, all));
    std::size_t hits = 0;
    for (std::size_t c = 0; c < all.size(); ++c) {
        Eigen::Index best = 0;
        probs.col(static_cast<Eigen::Index>(c)).maxCoeff(&best);
        hits += static_cast<std::size_t>(best) == class_index(quantize_label(ds.records[c].label, model.bins));
    }
    return static_cast<double>(hits) / static_cast<double>(all.size());
}

/// Same MLP family as the regressor with a 25-way softmax head trained by
/// cross-entropy on quantized labels.
inline ClassifierModel train_classifier(const Dataset& ds, const ClassifierTrainConfig& cfg,
                                        ClassifierReport* report = nullptr)
{
    if (ds.records.empty())
        throw EmptyDatasetError("cannot train a classifier on an empty dataset");
    if (cfg.batch_size == 0)
        throw std::invalid_argument("batch_size must be positive");
    std::vector<std::size_t> sizes{ds.world.obs_dim};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(kNumClasses);

    ClassifierModel model{Mlp(sizes, OutputActivation::softmax, cfg.seed), cfg.bins, {}};
    for (std::size_t k = 0; k < kNumClasses; ++k)
        model.centroids[k] = class_centroid(class_from_index(k), ds, cfg.bins);

    const std::size_t n = ds.records.size();
    std::vector<std::size_t> all(n);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = i;
        labels[i] = class_index(quantize_label(ds.records[i].label, cfg.bins));
    }
    const MatrixXd x = detail::observation_matrix(ds, all);

    AdamState adam(model.mlp.params(), cfg.lr);
    Rng shuffle_rng(derive_seed(cfg.seed, "classifier-shuffle"));
    std::vector<std::size_t> batch_labels;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(n, shuffle_rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            batch_labels.clear();
            for (auto i : batch)
                batch_labels.push_back(labels[i]);
            const auto grads = cross_entropy_gradient(model.mlp, detail::gather_columns(x, batch), batch_labels);
            adam_step(model.mlp.params(), grads, adam);
        }
        if (report)
            report->epoch_loss.push_back(cross_entropy_loss(model.mlp.forward(x), labels));
    }
    if (report)
        report->train_accuracy = classifier_accuracy(model, ds);
    return model;
}

class ClassifierPolicy final : public Policy {
public:
    explicit ClassifierPolicy(ClassifierModel model) : model_(std::move(model)) {}

    std::string name() const override { return "classifier"; }

    Proposal propose(const Observation& obs, Pose, Rng&) const override
    {
        return model_.centroids[predict_class(model_, obs)];
    }

    const ClassifierModel& model() const noexcept { return model_; }

private:
    ClassifierModel model_;
};

inline PolicyPtr policy_classifier(ClassifierModel model)
{
    return std::make_shared<ClassifierPolicy>(std::move(model));
}

inline json classifier_to_json(const ClassifierModel& model, const Provenance& prov = {})
{
    json j = mlp_to_json(model.mlp);
    stamp(j, prov);
    j["kind"] = "classifier";
    j["bins"] = {{"theta_small", model.bins.theta_small},
                 {"theta_large", model.bins.theta_large},
                 {"r_small", model.bins.r_small},
                 {"r_large", model.bins.r_large}};
    json c = json::array();
    for (const auto& p : model.centroids)
        c.push_back({p.dtheta, p.dr});
    j["centroids"] = std::move(c);
    return j;
}

inline ClassifierModel classifier_from_json(const json& j)
{
    check_schema_version(j);
    if (require_as<std::string>(j, "kind") != "classifier")
        throw SchemaError("not a classifier model file");
    ClassifierModel m{mlp_from_json(j, OutputActivation::softmax), {}, {}};
    if (m.mlp.output_size() != kNumClasses)
        throw SchemaError("classifier must have 25 outputs");
    const json& b = require(j, "bins");
    m.bins = {require_number(b, "theta_small"), require_number(b, "theta_large"), require_number(b, "r_small"),
              require_number(b, "r_large")};
    const json& c = require(j, "centroids");
    if (!c.is_array() || c.size() != kNumClasses)
        throw SchemaError("centroids must hold 25 entries");
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        const auto pair = c[k].get<std::vector<double>>();
        if (pair.size() != 2)
            throw SchemaError("centroid entries must be pairs");
        m.centroids[k] = {pair[0], pair[1]};
    }
    return m;
}

inline void write_classifier(const ClassifierModel& model, const std::string& path, const Provenance& prov = {})
{
    write_file(path, classifier_to_json(model, prov).dump(1) + "\n");
}

inline ClassifierModel read_classifier(const std::string& path)
{
    return classifier_from_json(parse_json(read_file(path), "classifier file '" + path + "'"));
}

} // namespace apnav
