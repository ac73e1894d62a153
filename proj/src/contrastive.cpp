#include "magneto/contrastive.hpp"

#include <cstdio>
#include <map>

namespace magneto {

void TrainConfig::validate() const {
    if (batch_pairs == 0) throw ConfigError("batch_pairs must be >= 1");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
        throw ConfigError("positive_fraction must lie in (0, 1)");
    }
    if (!(margin > 0.0)) throw ConfigError("margin must be positive");
    if (eval_every == 0) throw ConfigError("eval_every must be >= 1");
    adam.validate();
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"batch_pairs", cfg.batch_pairs},
            {"margin", cfg.margin},
            {"epochs", cfg.epochs},
            {"positive_fraction", cfg.positive_fraction},
            {"learning_rate", cfg.adam.learning_rate},
            {"beta1", cfg.adam.beta1},
            {"beta2", cfg.adam.beta2},
            {"epsilon", cfg.adam.epsilon},
            {"seed", cfg.seed},
            {"eval_every", cfg.eval_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
    try {
        cfg.batch_pairs = j.value("batch_pairs", cfg.batch_pairs);
        cfg.margin = j.value("margin", cfg.margin);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.positive_fraction = j.value("positive_fraction", cfg.positive_fraction);
        cfg.adam.learning_rate = j.value("learning_rate", cfg.adam.learning_rate);
        cfg.adam.beta1 = j.value("beta1", cfg.adam.beta1);
        cfg.adam.beta2 = j.value("beta2", cfg.adam.beta2);
        cfg.adam.epsilon = j.value("epsilon", cfg.adam.epsilon);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.eval_every = j.value("eval_every", cfg.eval_every);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::vector<Pair> sample_pairs(std::span<const FeatureVector> pool, std::size_t n,
                               double positive_fraction, Rng& rng) {
    if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
        throw SamplingError("positive_fraction must lie in [0, 1]");
    }
    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!pool[i].label) throw SamplingError("pool sample " + std::to_string(i) + " is unlabeled");
        members[*pool[i].label].push_back(i);
    }
    std::vector<const std::vector<std::size_t>*> eligible;
    for (const auto& [_, idx] : members) {
        if (idx.size() >= 2) eligible.push_back(&idx);
    }

    const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * positive_fraction));
    const std::size_t n_neg = n - n_pos;
    if (n_pos > 0 && eligible.empty()) {
        throw SamplingError("positive pairs need a class with at least 2 samples");
    }
    if (n_neg > 0 && members.size() < 2) {
        throw SamplingError("negative pairs need at least 2 classes, pool has " +
                            std::to_string(members.size()));
    }

    std::vector<Pair> pairs;
    pairs.reserve(n);
    for (std::size_t k = 0; k < n_pos; ++k) {
        const auto& idx = *eligible[rng.below(eligible.size())];
        const std::size_t i = rng.below(idx.size());
        std::size_t j = rng.below(idx.size() - 1);
        if (j >= i) ++j;
        pairs.push_back({idx[i], idx[j], true});
    }
    for (std::size_t k = 0; k < n_neg; ++k) {
        std::size_t a, b;
        do {
            a = rng.below(pool.size());
            b = rng.below(pool.size());
        } while (pool[a].label == pool[b].label);
        pairs.push_back({a, b, false});
    }
    return pairs;
}

std::string format_real(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string TrainingTrace::to_csv() const {
    std::string out = "batch_index,loss,accuracy_overall,accuracy_new,accuracy_old\n";
    for (const auto& r : rows) {
        out += std::to_string(r.batch_index) + "," + format_real(r.loss) + ",";
        if (r.accuracy) {
            out += format_real(r.accuracy->overall) + "," + format_real(r.accuracy->new_class) + "," +
                   format_real(r.accuracy->old_classes);
        } else {
            out += ",,";
        }
        out += "\n";
    }
    return out;
}

TrainingTrace train_epochs(EmbeddingModel& m, std::span<const FeatureVector> pool,
                           const TrainConfig& cfg, const EvalHook& eval_hook) {
    cfg.validate();
    TrainingTrace trace;
    if (cfg.epochs == 0) return trace;
    if (pool.empty()) throw InputError("training pool is empty");

    const Matrix<float> pool_inputs = pack_inputs<float>(pool, m.config.input_dim);
    const std::size_t batches_per_epoch = (pool.size() + cfg.batch_pairs - 1) / cfg.batch_pairs;
    Rng rng(cfg.seed);
    std::size_t batch_index = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches_per_epoch; ++b, ++batch_index) {
            const auto pairs = sample_pairs(pool, cfg.batch_pairs, cfg.positive_fraction, rng);
            auto result = pair_batch_gradients<float>(m, pool_inputs, pairs, cfg.margin);
            if (!std::isfinite(result.loss)) {
                throw NumericError("non-finite loss at batch " + std::to_string(batch_index));
            }
            adam_step(m, result.grads, cfg.adam);

            TraceRow row;
            row.batch_index = batch_index;
            row.loss = result.loss;
            row.pairs = pairs.size();
            for (const auto& p : pairs) row.positive_pairs += p.same_class ? 1 : 0;
            if (eval_hook && (batch_index + 1) % cfg.eval_every == 0) row.accuracy = eval_hook(m);
            trace.rows.push_back(row);
        }
    }
    return trace;
}

} // namespace magneto
