#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magneto/features.hpp"
#include "magneto/net.hpp"
#include "magneto/rng.hpp"

namespace magneto {

// Indices into the sampling pool.
struct Pair {
    std::size_t a = 0;
    std::size_t b = 0;
    bool same_class = false;

    friend bool operator==(const Pair&, const Pair&) = default;
};

struct TrainConfig {
    std::size_t batch_pairs = 512;
    double margin = 1.0;
    std::size_t epochs = 10;
    double positive_fraction = 0.5;
    AdamConfig adam;
    std::uint64_t seed = 0;
    std::size_t eval_every = 1;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

// round(n * positive_fraction) positive pairs, drawn by picking a class
// uniformly among classes with >= 2 samples and then two distinct members;
// the rest negative, uniform over ordered cross-class sample pairs.
// Sampling is with replacement across pairs.
std::vector<Pair> sample_pairs(std::span<const FeatureVector> pool, std::size_t n,
                               double positive_fraction, Rng& rng);

template <typename Scalar>
struct PairLoss {
    double loss = 0.0;
    std::vector<Scalar> grad_a;
    std::vector<Scalar> grad_b;
};

// d = |za - zb|. Positive pairs: d^2. Negative pairs: max(0, margin - d)^2,
// with zero gradient at d = 0.
template <typename Scalar>
PairLoss<Scalar> contrastive_loss(std::span<const Scalar> za, std::span<const Scalar> zb,
                                  bool same_class, double margin) {
    if (za.size() != zb.size()) throw InputError("embedding length mismatch in contrastive loss");
    const std::size_t n = za.size();
    PairLoss<Scalar> out;
    out.grad_a.assign(n, Scalar(0));
    out.grad_b.assign(n, Scalar(0));
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = static_cast<double>(za[i]) - static_cast<double>(zb[i]);
        d2 += diff * diff;
    }
    if (same_class) {
        out.loss = d2;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = 2.0 * (static_cast<double>(za[i]) - static_cast<double>(zb[i]));
            out.grad_a[i] = static_cast<Scalar>(g);
            out.grad_b[i] = static_cast<Scalar>(-g);
        }
        return out;
    }
    const double d = std::sqrt(d2);
    if (d >= margin) return out;
    const double gap = margin - d;
    out.loss = gap * gap;
    if (d > 0.0) {
        const double scale = -2.0 * gap / d;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = scale * (static_cast<double>(za[i]) - static_cast<double>(zb[i]));
            out.grad_a[i] = static_cast<Scalar>(g);
            out.grad_b[i] = static_cast<Scalar>(-g);
        }
    }
    return out;
}

template <typename Scalar>
struct BatchResult {
    double loss = 0.0; // mean over pairs
    Gradients<Scalar> grads;
};

// Mean contrastive loss of `pairs` over pool columns (input_dim x |pool|)
// and its gradient with respect to every parameter.
template <typename Scalar>
BatchResult<Scalar> pair_batch_gradients(const BasicEmbeddingModel<Scalar>& m,
                                         const Matrix<Scalar>& pool_inputs,
                                         std::span<const Pair> pairs, double margin) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    if (n == 0) throw InputError("empty pair batch");
    Matrix<Scalar> X(pool_inputs.rows(), 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& p = pairs[static_cast<std::size_t>(k)];
        X.col(k) = pool_inputs.col(static_cast<Eigen::Index>(p.a));
        X.col(n + k) = pool_inputs.col(static_cast<Eigen::Index>(p.b));
    }
    ForwardCache<Scalar> cache;
    const Matrix<Scalar> Y = forward_batch(m, X, &cache);
    Matrix<Scalar> G(Y.rows(), Y.cols());
    const auto dim = static_cast<std::size_t>(Y.rows());
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto pl = contrastive_loss<Scalar>(std::span(Y.col(k).data(), dim),
                                                 std::span(Y.col(n + k).data(), dim),
                                                 pairs[static_cast<std::size_t>(k)].same_class, margin);
        total += pl.loss;
        for (std::size_t i = 0; i < dim; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            G(r, k) = static_cast<Scalar>(static_cast<double>(pl.grad_a[i]) * inv_n);
            G(r, n + k) = static_cast<Scalar>(static_cast<double>(pl.grad_b[i]) * inv_n);
        }
    }
    BatchResult<Scalar> out;
    out.loss = total * inv_n;
    out.grads = backward(m, G, cache);
    return out;
}

struct AccuracySnapshot {
    double overall = 0.0;
    double new_class = std::nan("");
    double old_classes = std::nan("");

    friend bool operator==(const AccuracySnapshot&, const AccuracySnapshot&) = default;
};

using EvalHook = std::function<AccuracySnapshot(const EmbeddingModel&)>;

struct TraceRow {
    std::size_t batch_index = 0;
    double loss = 0.0;
    std::size_t pairs = 0;
    std::size_t positive_pairs = 0;
    std::optional<AccuracySnapshot> accuracy;
};

struct TrainingTrace {
    std::vector<TraceRow> rows;

    // batch_index,loss,accuracy_overall,accuracy_new,accuracy_old
    // (accuracy fields empty when not evaluated or not applicable)
    std::string to_csv() const;
};

// cfg.epochs * ceil(|pool| / batch_pairs) Adam steps on the mean pair loss.
// The hook, when set, is evaluated after every cfg.eval_every-th batch.
TrainingTrace train_epochs(EmbeddingModel& m, std::span<const FeatureVector> pool,
                           const TrainConfig& cfg, const EvalHook& eval_hook = {});

std::string format_real(double v);

} // namespace magneto
