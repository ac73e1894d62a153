#pragma once

#include <string>
#include <vector>

#include "magneto/experiment.hpp"

namespace magneto::testing {

// Small, fast generator settings: 4 channels, 24 samples at 24 Hz.
inline SynthSettings small_settings(std::size_t session_length = 40) {
    SynthSettings s;
    s.channels = 4;
    s.samples_per_window = 24;
    s.sample_rate_hz = 24.0;
    s.session_length = session_length;
    return s;
}

inline FeatureSchema small_schema(std::size_t channels = 4) {
    std::vector<ChannelStats> entries;
    for (std::size_t c = 0; c < channels; ++c) {
        entries.push_back({c, {Stat::mean, Stat::variance, Stat::jerk_mean, Stat::jerk_variance}});
    }
    return FeatureSchema(entries);
}

// Well separated classes: class k oscillates at (k + 1) Hz with amplitude 1 + k.
inline ProfileSet small_profiles(std::size_t classes, std::size_t session_length = 40,
                                 double noise = 0.05) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < classes; ++k) names.push_back("c" + std::to_string(k));
    ProfileSet set;
    set.labels = LabelSpace(names);
    set.settings = small_settings(session_length);
    for (std::size_t k = 0; k < classes; ++k) {
        SynthClassProfile p;
        p.seed = 100 + k;
        for (std::size_t c = 0; c < set.settings.channels; ++c) {
            p.channels.push_back({1.0 + static_cast<double>(k), 1.0 + static_cast<double>(k) + 0.25 * c,
                                  noise, 0.0});
        }
        set.profiles[names[k]] = p;
    }
    return set;
}

inline NetConfig small_net(std::size_t input_dim, std::uint64_t seed = 1) {
    NetConfig net;
    net.input_dim = input_dim;
    net.layer_widths = {32, 16, 8};
    net.init_seed = seed;
    return net;
}

inline TrainConfig small_train(std::size_t epochs, std::uint64_t seed = 3) {
    TrainConfig cfg;
    cfg.batch_pairs = 64;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.adam.learning_rate = 5e-3;
    return cfg;
}

inline std::vector<FeatureVector> features_of(const Dataset& ds, const FeatureSchema& schema) {
    return extract_batch(ds.windows, schema);
}

inline PreparedData small_prepared(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
    const auto set = small_profiles(classes);
    const auto ds = generate_dataset(set, per_class, seed);
    const auto [train, test] = gap_split(ds, 0.2, 2.0);
    PreparedData data;
    data.labels = set.labels;
    data.schema = small_schema();
    data.train = features_of(train, data.schema);
    data.test = features_of(test, data.schema);
    return data;
}

inline ExperimentSpec small_spec(Protocol protocol) {
    ExperimentSpec spec;
    spec.protocol = protocol;
    spec.support_sizes = {12, 6};
    spec.repetitions = 1;
    spec.realizations = 2;
    spec.initial_classes = 2;
    spec.seed = 5;
    spec.net = small_net(16);
    spec.pretrain = small_train(3);
    spec.retrain = small_train(2);
    return spec;
}

} // namespace magneto::testing
