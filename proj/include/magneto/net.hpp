#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "magneto/binary_io.hpp"
#include "magneto/error.hpp"
#include "magneto/features.hpp"
#include "magneto/rng.hpp"

namespace magneto {

enum class Activation : std::uint8_t { relu };

struct NetConfig {
    std::size_t input_dim = 86;
    std::vector<std::size_t> layer_widths{1024, 512, 128, 64, 64};
    Activation hidden_activation = Activation::relu;
    bool output_normalize = true;
    std::uint64_t init_seed = 0;

    void validate() const;
    std::size_t embedding_dim() const { return layer_widths.back(); }
    // sum over layers of fan_in * fan_out + fan_out
    std::size_t parameter_count() const;

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// weight is fan_out x fan_in
template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weight;
    Vector<Scalar> bias;
};

template <typename Scalar>
struct AdamMoments {
    DenseLayer<Scalar> first;
    DenseLayer<Scalar> second;
};

template <typename Scalar>
struct Gradients {
    std::vector<DenseLayer<Scalar>> layers;
};

// Parameters of the embedding network plus optimizer state.
template <typename Scalar>
struct BasicEmbeddingModel {
    NetConfig config;
    std::vector<DenseLayer<Scalar>> layers;
    std::vector<AdamMoments<Scalar>> adam;
    std::uint64_t step = 0;
};

using EmbeddingModel = BasicEmbeddingModel<float>;
using Embedding = std::vector<float>;

// Activations saved by forward_batch for the matching backward call.
template <typename Scalar>
struct ForwardCache {
    const void* model = nullptr;
    std::uint64_t step = 0;
    std::vector<Matrix<Scalar>> inputs;       // input of each layer
    std::vector<Matrix<Scalar>> pre_activation;
    Matrix<Scalar> output;                    // after optional normalization
    std::vector<double> norms;                // pre-normalization column norms
};

inline constexpr double kNormFloor = 1e-12;

template <typename Scalar>
BasicEmbeddingModel<Scalar> init_model(const NetConfig& cfg) {
    cfg.validate();
    BasicEmbeddingModel<Scalar> m;
    m.config = cfg;
    Rng rng(cfg.init_seed);
    std::size_t fan_in = cfg.input_dim;
    for (std::size_t width : cfg.layer_widths) {
        DenseLayer<Scalar> layer;
        layer.weight.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(fan_in));
        layer.bias = Vector<Scalar>::Zero(static_cast<Eigen::Index>(width));
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
            }
        }
        AdamMoments<Scalar> mom;
        mom.first.weight = Matrix<Scalar>::Zero(layer.weight.rows(), layer.weight.cols());
        mom.first.bias = Vector<Scalar>::Zero(layer.bias.size());
        mom.second = mom.first;
        m.layers.push_back(std::move(layer));
        m.adam.push_back(std::move(mom));
        fan_in = width;
    }
    return m;
}

// Packs feature vectors as columns of an input_dim x N matrix.
template <typename Scalar>
Matrix<Scalar> pack_inputs(std::span<const FeatureVector> xs, std::size_t input_dim) {
    Matrix<Scalar> X(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(xs.size()));
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (xs[j].size() != input_dim) {
            throw InputError("feature vector has " + std::to_string(xs[j].size()) +
                             " dims, network expects " + std::to_string(input_dim));
        }
        for (std::size_t i = 0; i < input_dim; ++i) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<Scalar>(xs[j].values[i]);
        }
    }
    return X;
}

// Embeds every column of X. When cache is non-null it receives what
// backward() needs.
template <typename Scalar>
Matrix<Scalar> forward_batch(const BasicEmbeddingModel<Scalar>& m, const Matrix<Scalar>& X,
                             ForwardCache<Scalar>* cache = nullptr) {
    if (static_cast<std::size_t>(X.rows()) != m.config.input_dim) {
        throw InputError("input has " + std::to_string(X.rows()) + " rows, network expects " +
                         std::to_string(m.config.input_dim));
    }
    if (cache) {
        cache->model = &m;
        cache->step = m.step;
        cache->inputs.clear();
        cache->pre_activation.clear();
    }
    Matrix<Scalar> A = X;
    const std::size_t L = m.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        const auto& layer = m.layers[l];
        Matrix<Scalar> Z(layer.weight.rows(), A.cols());
        Z.noalias() = layer.weight * A;
        Z.colwise() += layer.bias;
        if (cache) cache->inputs.push_back(std::move(A));
        if (l + 1 < L) {
            A = Z.cwiseMax(Scalar(0));
            if (cache) cache->pre_activation.push_back(std::move(Z));
        } else {
            A = std::move(Z);
        }
    }
    std::vector<double> norms;
    if (m.config.output_normalize) {
        norms.resize(static_cast<std::size_t>(A.cols()));
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            const double n = A.col(j).template cast<double>().norm();
            norms[static_cast<std::size_t>(j)] = n;
            A.col(j) /= static_cast<Scalar>(std::max(n, kNormFloor));
        }
    }
    if (cache) {
        cache->output = A;
        cache->norms = std::move(norms);
    }
    return A;
}

template <typename Scalar>
std::vector<Scalar> forward(const BasicEmbeddingModel<Scalar>& m, const FeatureVector& x) {
    const auto Y = forward_batch(m, pack_inputs<Scalar>(std::span(&x, 1), m.config.input_dim));
    return std::vector<Scalar>(Y.data(), Y.data() + Y.size());
}

// Parameter gradients given d(loss)/d(output) for every column of the
// cached batch, including the Jacobian of the L2 normalization.
template <typename Scalar>
Gradients<Scalar> backward(const BasicEmbeddingModel<Scalar>& m, const Matrix<Scalar>& output_grad,
                           const ForwardCache<Scalar>& cache) {
    const std::size_t L = m.layers.size();
    if (cache.model != &m || cache.step != m.step || cache.inputs.size() != L) {
        throw ContractError("backward called with a cache from a different or updated model");
    }
    if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols()) {
        throw ContractError("output gradient shape does not match cached forward pass");
    }
    Matrix<Scalar> G = output_grad;
    if (m.config.output_normalize) {
        for (Eigen::Index j = 0; j < G.cols(); ++j) {
            const double n = cache.norms[static_cast<std::size_t>(j)];
            if (n > kNormFloor) {
                const auto y = cache.output.col(j);
                const Scalar proj = y.dot(G.col(j));
                G.col(j) = (G.col(j) - y * proj) / static_cast<Scalar>(n);
            } else {
                G.col(j) /= static_cast<Scalar>(kNormFloor);
            }
        }
    }
    Gradients<Scalar> grads;
    grads.layers.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        auto& g = grads.layers[l];
        g.weight.noalias() = G * cache.inputs[l].transpose();
        g.bias = G.rowwise().sum();
        if (l > 0) {
            Matrix<Scalar> upstream(m.layers[l].weight.cols(), G.cols());
            upstream.noalias() = m.layers[l].weight.transpose() * G;
            G = upstream.cwiseProduct(
                (cache.pre_activation[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
        }
    }
    return grads;
}

// Adam update of one parameter tensor, evaluated in double precision:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// `step` is the 1-based step index t. Returns false, leaving everything
// untouched, when any resulting value would be non-finite in Scalar.
template <typename Scalar>
bool adam_update(std::span<Scalar> params, std::span<const Scalar> grads, std::span<Scalar> m,
                 std::span<Scalar> v, std::uint64_t step, const AdamConfig& cfg,
                 bool commit = true) {
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    auto compute = [&](std::size_t i, Scalar& m_out, Scalar& v_out, Scalar& p_out) {
        const double g = static_cast<double>(grads[i]);
        const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
        const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
        const double p = static_cast<double>(params[i]) -
                         cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
        m_out = static_cast<Scalar>(mi);
        v_out = static_cast<Scalar>(vi);
        p_out = static_cast<Scalar>(p);
        return std::isfinite(m_out) && std::isfinite(v_out) && std::isfinite(p_out);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        Scalar a, b, c;
        if (!std::isfinite(grads[i]) || !compute(i, a, b, c)) return false;
    }
    if (commit) {
        for (std::size_t i = 0; i < params.size(); ++i) compute(i, m[i], v[i], params[i]);
    }
    return true;
}

namespace detail {
template <typename Derived>
auto as_span(Eigen::PlainObjectBase<Derived>& x) {
    return std::span(x.data(), static_cast<std::size_t>(x.size()));
}
template <typename Derived>
auto as_span(const Eigen::PlainObjectBase<Derived>& x) {
    return std::span(x.data(), static_cast<std::size_t>(x.size()));
}
} // namespace detail

// One optimizer step over every tensor. Throws NumericError with the model
// unchanged when any gradient or updated value is non-finite.
template <typename Scalar>
void adam_step(BasicEmbeddingModel<Scalar>& m, const Gradients<Scalar>& g, const AdamConfig& cfg) {
    cfg.validate();
    if (g.layers.size() != m.layers.size()) throw InputError("gradient layer count mismatch");
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        if (g.layers[l].weight.rows() != m.layers[l].weight.rows() ||
            g.layers[l].weight.cols() != m.layers[l].weight.cols() ||
            g.layers[l].bias.size() != m.layers[l].bias.size()) {
            throw InputError("gradient shape mismatch at layer " + std::to_string(l));
        }
    }
    const std::uint64_t t = m.step + 1;
    using detail::as_span;
    for (int pass = 0; pass < 2; ++pass) {
        const bool commit = pass == 1;
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            auto& layer = m.layers[l];
            auto& mom = m.adam[l];
            const bool ok =
                adam_update<Scalar>(as_span(layer.weight), as_span(g.layers[l].weight),
                                    as_span(mom.first.weight), as_span(mom.second.weight), t, cfg,
                                    commit) &&
                adam_update<Scalar>(as_span(layer.bias), as_span(g.layers[l].bias),
                                    as_span(mom.first.bias), as_span(mom.second.bias), t, cfg,
                                    commit);
            if (!ok) {
                throw NumericError("adam step rejected: non-finite gradient or update at layer " +
                                   std::to_string(l));
            }
        }
    }
    m.step = t;
}

template <typename Scalar>
bool all_finite(const BasicEmbeddingModel<Scalar>& m) {
    for (const auto& l : m.layers) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

// Checkpoint layout: "MGN1", u16 version, u8 flags (bit 0: Adam state
// present), u32-length JSON config, then per layer the row-major f32 weight
// followed by the f32 bias. With Adam state: u64 step, then per layer
// first-moment weight/bias and second-moment weight/bias in the same layout.
Bytes encode_checkpoint(const EmbeddingModel& m, bool with_adam = true);
EmbeddingModel decode_checkpoint(std::span<const std::uint8_t> bytes);
// FNV-1a digest of the parameter-only checkpoint encoding.
std::string model_digest(const EmbeddingModel& m);

} // namespace magneto
