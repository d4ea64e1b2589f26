#pragma once

// Navigation proposal regressor: observation -> normalized (rotation,
// translation) pair, trained with Adam on squared error.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "apnav/geometry.hpp"
#include "apnav/json_io.hpp"
#include "apnav/label_gen.hpp"
#include "apnav/mlp.hpp"

namespace apnav {

inline const std::vector<std::size_t> kDefaultLayerSizes{32, 64, 64, 2};

/// Sigmoid-output MLP with two outputs, plus the radial range used to map
/// its outputs back to meters.
struct NavNet {
    Mlp mlp;
    double radial_range = 0.0;
};

inline NavNet init_net(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                       double radial_range = 0.0)
{
    if (layer_sizes.size() < 2 || layer_sizes.back() != 2)
        throw DimensionError("navigation network needs at least two layers and exactly 2 outputs");
    return {Mlp(layer_sizes, OutputActivation::sigmoid, seed), radial_range};
}

inline NormalizedLabel forward(const NavNet& net, std::span<const double> obs)
{
    const VectorXd y = net.mlp.forward(obs);
    return {y(0), y(1)};
}

/// Squared Euclidean distance between prediction and target.
inline double loss(NormalizedLabel pred, NormalizedLabel target) noexcept
{
    const double du = pred.u - target.u;
    const double dv = pred.v - target.v;
    return du * du + dv * dv;
}

/// Gradient of loss(forward(net, obs), target) with respect to every parameter.
inline LayerParams backward(const NavNet& net, std::span<const double> obs, NormalizedLabel target)
{
    if (obs.size() != net.mlp.input_size())
        throw DimensionError("observation length does not match network input");
    MatrixXd x(static_cast<Eigen::Index>(obs.size()), 1);
    for (std::size_t i = 0; i < obs.size(); ++i)
        x(static_cast<Eigen::Index>(i), 0) = obs[i];
    MatrixXd t(2, 1);
    t << target.u, target.v;
    return squared_error_gradient(net.mlp, x, t);
}

inline Proposal predict_proposal(const NavNet& net, std::span<const double> obs, const PoseGrid& grid)
{
    return denormalize(forward(net, obs), grid);
}

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double lr = 0.001;
    std::uint64_t seed = 1;
    bool include_unreachable = true;
    /// Fraction of records held out for validation; 0 disables the split.
    double validation_fraction = 0.0;
};

struct TrainReport {
    std::vector<double> epoch_loss; ///< training-set loss after each epoch
    double validation_loss = 0.0;   ///< equals the final training loss without a split
    std::size_t epochs_run = 0;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::uint64_t seed = 0;

    double final_loss() const
    {
        return epoch_loss.empty() ? std::numeric_limits<double>::quiet_NaN() : epoch_loss.back();
    }
};

namespace detail {

struct TrainSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Eligible records, split deterministically by a seeded shuffle.
inline TrainSplit split_records(const Dataset& ds, const TrainConfig& cfg)
{
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        if (cfg.include_unreachable || ds.records[i].label.reachable)
            eligible.push_back(i);
    if (eligible.empty())
        throw EmptyDatasetError("no training records");
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
        throw std::invalid_argument("validation_fraction must lie in [0, 1)");
    TrainSplit split;
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(eligible.size())));
    if (n_val == 0) {
        split.train = std::move(eligible);
        return split;
    }
    Rng rng(derive_seed(cfg.seed, "validation-split"));
    const auto order = shuffled_indices(eligible.size(), rng);
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < n_val ? split.validation : split.train).push_back(eligible[order[k]]);
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

inline MatrixXd observation_matrix(const Dataset& ds, std::span<const std::size_t> rows)
{
    const auto d = static_cast<Eigen::Index>(ds.world.obs_dim);
    MatrixXd x(d, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c) {
        const auto& obs = ds.records[rows[c]].observation;
        if (obs.size() != ds.world.obs_dim)
            throw DimensionError("record observation has the wrong length");
        for (Eigen::Index r = 0; r < d; ++r)
            x(r, static_cast<Eigen::Index>(c)) = obs[static_cast<std::size_t>(r)];
    }
    return x;
}

inline MatrixXd target_matrix(const Dataset& ds, std::span<const std::size_t> rows)
{
    MatrixXd t(2, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c) {
        t(0, static_cast<Eigen::Index>(c)) = ds.records[rows[c]].label_norm.u;
        t(1, static_cast<Eigen::Index>(c)) = ds.records[rows[c]].label_norm.v;
    }
    return t;
}

inline MatrixXd gather_columns(const MatrixXd& m, std::span<const std::size_t> cols)
{
    MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        out.col(static_cast<Eigen::Index>(c)) = m.col(static_cast<Eigen::Index>(cols[c]));
    return out;
}

} // namespace detail

/// Mini-batch Adam over a seeded shuffle; mean squared error per batch.
/// Deterministic for a fixed (dataset, config).
inline TrainReport train(NavNet& net, const Dataset& ds, const TrainConfig& cfg)
{
    if (ds.records.empty())
        throw EmptyDatasetError("cannot train on an empty dataset");
    if (cfg.batch_size == 0)
        throw std::invalid_argument("batch_size must be positive");
    if (net.mlp.input_size() != ds.world.obs_dim)
        throw DimensionError("network input size does not match dataset obs_dim");
    net.radial_range = ds.world.grid.radial_range();

    const auto split = detail::split_records(ds, cfg);
    const MatrixXd x = detail::observation_matrix(ds, split.train);
    const MatrixXd t = detail::target_matrix(ds, split.train);

    TrainReport report;
    report.seed = cfg.seed;
    report.n_train = split.train.size();
    report.n_validation = split.validation.size();

    AdamState adam(net.mlp.params(), cfg.lr);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    const std::size_t n = split.train.size();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(n, shuffle_rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            const auto grads
                = squared_error_gradient(net.mlp, detail::gather_columns(x, batch), detail::gather_columns(t, batch));
            adam_step(net.mlp.params(), grads, adam);
        }
        report.epoch_loss.push_back(squared_error_loss(net.mlp.forward(x), t));
        ++report.epochs_run;
    }
    if (split.validation.empty()) {
        report.validation_loss = report.final_loss();
    } else {
        const MatrixXd xv = detail::observation_matrix(ds, split.validation);
        const MatrixXd tv = detail::target_matrix(ds, split.validation);
        report.validation_loss = squared_error_loss(net.mlp.forward(xv), tv);
    }
    return report;
}

/// Mean loss of the network over every record of a dataset.
inline double dataset_loss(const NavNet& net, const Dataset& ds)
{
    std::vector<std::size_t> all(ds.records.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    return squared_error_loss(net.mlp.forward(detail::observation_matrix(ds, all)), detail::target_matrix(ds, all));
}

// Model files. Doubles are written in shortest round-trip form, so
// read(write(net)) reproduces every parameter bit-exactly.

inline json layers_to_json(const LayerParams& layers)
{
    json weights = json::array();
    json biases = json::array();
    for (const auto& l : layers) {
        json w = json::array();
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                row.push_back(l.weight(r, c));
            w.push_back(std::move(row));
        }
        weights.push_back(std::move(w));
        json b = json::array();
        for (Eigen::Index r = 0; r < l.bias.size(); ++r)
            b.push_back(l.bias(r));
        biases.push_back(std::move(b));
    }
    return {{"weights", std::move(weights)}, {"biases", std::move(biases)}};
}

inline Mlp mlp_from_json(const json& j, OutputActivation expected_output)
{
    const auto sizes = require_as<std::vector<std::size_t>>(j, "layer_sizes");
    const json& act = require(j, "activation");
    if (require_as<std::string>(act, "hidden") != "tanh")
        throw SchemaError("unsupported hidden activation");
    if (require_as<std::string>(act, "output") != to_string(expected_output))
        throw SchemaError("unexpected output activation");
    const json& weights = require(j, "weights");
    const json& biases = require(j, "biases");
    if (sizes.size() < 2 || !weights.is_array() || !biases.is_array() || weights.size() + 1 != sizes.size()
        || biases.size() + 1 != sizes.size())
        throw SchemaError("weights/biases do not match layer_sizes");
    LayerParams layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
        const auto in = static_cast<Eigen::Index>(sizes[l]);
        const json& w = weights[l];
        const json& b = biases[l];
        if (!w.is_array() || static_cast<Eigen::Index>(w.size()) != out || !b.is_array()
            || static_cast<Eigen::Index>(b.size()) != out)
            throw SchemaError("layer " + std::to_string(l) + " has the wrong shape");
        DenseLayer layer{MatrixXd(out, in), VectorXd(out)};
        for (Eigen::Index r = 0; r < out; ++r) {
            const json& row = w[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != in)
                throw SchemaError("layer " + std::to_string(l) + " has the wrong shape");
            for (Eigen::Index c = 0; c < in; ++c)
                layer.weight(r, c) = row[static_cast<std::size_t>(c)].get<double>();
            layer.bias(r) = b[static_cast<std::size_t>(r)].get<double>();
        }
        layers.push_back(std::move(layer));
    }
    return Mlp(sizes, expected_output, std::move(layers));
}

inline json mlp_to_json(const Mlp& mlp)
{
    json j = layers_to_json(mlp.params());
    j["layer_sizes"] = mlp.layer_sizes();
    j["activation"] = {{"hidden", "tanh"}, {"output", to_string(mlp.output_activation())}};
    return j;
}

inline json model_to_json(const NavNet& net, const Provenance& prov = {})
{
    json j = mlp_to_json(net.mlp);
    stamp(j, prov);
    j["kind"] = "nav_net";
    j["normalization"] = {{"dtheta", {-std::numbers::pi, std::numbers::pi}},
                          {"dr", {-net.radial_range, net.radial_range}}};
    return j;
}

inline NavNet model_from_json(const json& j)
{
    check_schema_version(j);
    if (require_as<std::string>(j, "kind") != "nav_net")
        throw SchemaError("not a navigation model file");
    NavNet net{mlp_from_json(j, OutputActivation::sigmoid), 0.0};
    if (net.mlp.output_size() != 2)
        throw SchemaError("navigation model must have 2 outputs");
    const auto dr = require_as<std::vector<double>>(require(j, "normalization"), "dr");
    if (dr.size() != 2)
        throw SchemaError("normalization.dr must be a pair");
    net.radial_range = dr[1];
    return net;
}

inline void write_model(const NavNet& net, const std::string& path, const Provenance& prov = {})
{
    write_file(path, model_to_json(net, prov).dump(1) + "\n");
}

inline NavNet read_model(const std::string& path)
{
    return model_from_json(parse_json(read_file(path), "model file '" + path + "'"));
}

} // namespace apnav
