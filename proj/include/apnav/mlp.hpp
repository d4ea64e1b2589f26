#pragma once

// Fully connected network with tanh hidden layers and either a sigmoid
// (regression) or softmax (classification) output, exact backpropagation,
// and the Adam optimizer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apnav/errors.hpp"
#include "apnav/rng.hpp"

namespace apnav {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class OutputActivation { sigmoid, softmax };

inline const char* to_string(OutputActivation a)
{
    return a == OutputActivation::sigmoid ? "sigmoid" : "softmax";
}

struct DenseLayer {
    MatrixXd weight; ///< out x in
    VectorXd bias;   ///< out
};

/// Parameter-shaped container, used for gradients and optimizer moments.
using LayerParams = std::vector<DenseLayer>;

inline LayerParams zeros_like(const LayerParams& p)
{
    LayerParams z;
    z.reserve(p.size());
    for (const auto& l : p)
        z.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
    return z;
}

inline std::size_t parameter_count(const LayerParams& p)
{
    std::size_t n = 0;
    for (const auto& l : p)
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

inline double stable_sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

class Mlp {
public:
    Mlp() = default;

    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from seed, biases zero.
    Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output, std::uint64_t seed)
        : sizes_(std::move(layer_sizes)), output_(output)
    {
        if (sizes_.size() < 2)
            throw DimensionError("network needs at least an input and an output layer");
        for (auto s : sizes_)
            if (s == 0)
                throw DimensionError("layer sizes must be positive");
        Rng rng(seed);
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const auto in = static_cast<Eigen::Index>(sizes_[l]);
            const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            DenseLayer layer{MatrixXd(out, in), VectorXd::Zero(out)};
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c)
                    layer.weight(r, c) = rng.uniform(-bound, bound);
            layers_.push_back(std::move(layer));
        }
    }

    /// Builds a network from explicit parameters (e.g. a loaded model).
    Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output, LayerParams layers)
        : sizes_(std::move(layer_sizes)), output_(output), layers_(std::move(layers))
    {
        if (sizes_.size() < 2 || layers_.size() + 1 != sizes_.size())
            throw DimensionError("layer list does not match layer sizes");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& L = layers_[l];
            if (L.weight.cols() != static_cast<Eigen::Index>(sizes_[l])
                || L.weight.rows() != static_cast<Eigen::Index>(sizes_[l + 1])
                || L.bias.size() != L.weight.rows())
                throw DimensionError("layer " + std::to_string(l) + " has the wrong shape");
        }
    }

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    std::size_t input_size() const noexcept { return sizes_.front(); }
    std::size_t output_size() const noexcept { return sizes_.back(); }
    OutputActivation output_activation() const noexcept { return output_; }
    const LayerParams& params() const noexcept { return layers_; }
    LayerParams& params() noexcept { return layers_; }
    std::size_t parameter_count() const { return apnav::parameter_count(layers_); }

    /// Activations of every layer for a batch (columns are samples);
    /// element 0 is the input itself.
    std::vector<MatrixXd> forward_all(const MatrixXd& x) const
    {
        if (x.rows() != static_cast<Eigen::Index>(input_size()))
            throw DimensionError("input has " + std::to_string(x.rows()) + " features, network expects "
                                 + std::to_string(input_size()));
        std::vector<MatrixXd> acts;
        acts.reserve(layers_.size() + 1);
        acts.push_back(x);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            MatrixXd z = layers_[l].weight * acts.back();
            z.colwise() += layers_[l].bias;
            if (l + 1 < layers_.size())
                acts.push_back(z.array().tanh().matrix());
            else
                acts.push_back(apply_output(std::move(z)));
        }
        return acts;
    }

    MatrixXd forward(const MatrixXd& x) const { return forward_all(x).back(); }

    VectorXd forward(std::span<const double> x) const
    {
        const Eigen::Map<const VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        return forward(MatrixXd(v)).col(0);
    }

    /// Backpropagates dL/d(pre-activation of the output layer) through the
    /// network, given the cached activations of forward_all.
    LayerParams backprop(const std::vector<MatrixXd>& acts, MatrixXd delta) const
    {
        LayerParams grads(layers_.size());
        for (std::size_t l = layers_.size(); l-- > 0;) {
            grads[l].weight = delta * acts[l].transpose();
            grads[l].bias = delta.rowwise().sum();
            if (l > 0) {
                MatrixXd back = layers_[l].weight.transpose() * delta;
                delta = back.array() * (1.0 - acts[l].array().square());
            }
        }
        return grads;
    }

private:
    MatrixXd apply_output(MatrixXd z) const
    {
        if (output_ == OutputActivation::sigmoid)
            return z.unaryExpr([](double v) { return stable_sigmoid(v); });
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            auto col = z.col(c);
            col.array() -= col.maxCoeff();
            col = col.array().exp().matrix();
            col /= col.sum();
        }
        return z;
    }

    std::vector<std::size_t> sizes_;
    OutputActivation output_ = OutputActivation::sigmoid;
    LayerParams layers_;
};

/// Mean squared-error loss over a batch: mean_b ||y_b - t_b||^2.
inline double squared_error_loss(const MatrixXd& pred, const MatrixXd& target)
{
    return (pred - target).colwise().squaredNorm().mean();
}

/// Gradient of squared_error_loss for a sigmoid-output network.
inline LayerParams squared_error_gradient(const Mlp& net, const MatrixXd& x, const MatrixXd& target)
{
    const auto acts = net.forward_all(x);
    const MatrixXd& y = acts.back();
    if (y.rows() != target.rows() || y.cols() != target.cols())
        throw DimensionError("target shape does not match network output");
    const double scale = 2.0 / static_cast<double>(x.cols());
    MatrixXd delta = (scale * (y - target)).array() * y.array() * (1.0 - y.array());
    return net.backprop(acts, std::move(delta));
}

/// Mean cross-entropy of a softmax network against class indices.
inline double cross_entropy_loss(const MatrixXd& probs, std::span<const std::size_t> labels)
{
    double total = 0.0;
    for (std::size_t c = 0; c < labels.size(); ++c)
        total -= std::log(std::max(probs(static_cast<Eigen::Index>(labels[c]), static_cast<Eigen::Index>(c)),
                                   1e-300));
    return total / static_cast<double>(labels.size());
}

inline LayerParams cross_entropy_gradient(const Mlp& net, const MatrixXd& x, std::span<const std::size_t> labels)
{
    const auto acts = net.forward_all(x);
    MatrixXd delta = acts.back();
    for (std::size_t c = 0; c < labels.size(); ++c)
        delta(static_cast<Eigen::Index>(labels[c]), static_cast<Eigen::Index>(c)) -= 1.0;
    delta /= static_cast<double>(x.cols());
    return net.backprop(acts, std::move(delta));
}

struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    LayerParams m;
    LayerParams v;

    AdamState() = default;
    AdamState(const LayerParams& params, double learning_rate)
        : lr(learning_rate), m(zeros_like(params)), v(zeros_like(params))
    {}
};

/// One Adam update with bias correction.
inline void adam_step(LayerParams& params, const LayerParams& grads, AdamState& st)
{
    if (grads.size() != params.size() || st.m.size() != params.size())
        throw DimensionError("gradient/optimizer state does not match parameters");
    ++st.step;
    const double t = static_cast<double>(st.step);
    const double c1 = 1.0 - std::pow(st.beta1, t);
    const double c2 = 1.0 - std::pow(st.beta2, t);
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = st.beta1 * m + (1.0 - st.beta1) * g;
        v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseProduct(g);
        p.array() -= st.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.epsilon);
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
        update(params[l].weight, grads[l].weight, st.m[l].weight, st.v[l].weight);
        update(params[l].bias, grads[l].bias, st.m[l].bias, st.v[l].bias);
    }
}

/// Fisher-Yates shuffle of 0..n-1 driven by rng.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng)
{
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
        idx[i] = i;
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

} // namespace apnav
