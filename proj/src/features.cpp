#include "magneto/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "magneto/error.hpp"

namespace magneto {

std::string to_string(Stat s) {
    switch (s) {
    case Stat::mean: return "mean";
    case Stat::variance: return "variance";
    case Stat::jerk_mean: return "jerk_mean";
    case Stat::jerk_variance: return "jerk_variance";
    }
    return "?";
}

Stat stat_from_string(const std::string& s) {
    if (s == "mean") return Stat::mean;
    if (s == "variance") return Stat::variance;
    if (s == "jerk_mean") return Stat::jerk_mean;
    if (s == "jerk_variance") return Stat::jerk_variance;
    throw ConfigError("unknown statistic '" + s + "'");
}

FeatureSchema::FeatureSchema(std::vector<ChannelStats> entries) : entries_(std::move(entries)) {
    std::set<std::pair<std::size_t, Stat>> seen;
    for (const auto& e : entries_) {
        if (e.stats.empty()) {
            throw ConfigError("schema entry for channel " + std::to_string(e.channel) +
                              " selects no statistics");
        }
        for (Stat s : e.stats) {
            if (!seen.insert({e.channel, s}).second) {
                throw ConfigError("schema selects " + to_string(s) + " of channel " +
                                  std::to_string(e.channel) + " twice");
            }
        }
        total_dims_ += e.stats.size();
    }
}

std::size_t FeatureSchema::max_channel() const {
    std::size_t m = 0;
    for (const auto& e : entries_) m = std::max(m, e.channel);
    return m;
}

FeatureSchema default_schema() {
    std::vector<ChannelStats> entries;
    for (std::size_t c = 0; c < 21; ++c) {
        entries.push_back({c, {Stat::mean, Stat::variance, Stat::jerk_mean, Stat::jerk_variance}});
    }
    entries.push_back({21, {Stat::mean, Stat::variance}});
    return FeatureSchema(std::move(entries));
}

nlohmann::json to_json(const FeatureSchema& schema) {
    auto j = nlohmann::json::array();
    for (const auto& e : schema.entries()) {
        auto stats = nlohmann::json::array();
        for (Stat s : e.stats) stats.push_back(to_string(s));
        j.push_back({{"channel", e.channel}, {"stats", stats}});
    }
    return j;
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
    std::vector<ChannelStats> entries;
    try {
        for (const auto& je : j) {
            ChannelStats e;
            e.channel = je.at("channel").get<std::size_t>();
            for (const auto& s : je.at("stats")) e.stats.push_back(stat_from_string(s.get<std::string>()));
            entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("feature schema: ") + e.what());
    }
    return FeatureSchema(std::move(entries));
}

FeatureSchema load_schema(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return schema_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

template <typename Get>
Moments moments(std::size_t n, Get get) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += get(i);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = get(i) - mean;
        ss += d * d;
    }
    return {mean, ss / static_cast<double>(n)};
}

} // namespace

FeatureVector extract(const SensorWindow& w, const FeatureSchema& schema) {
    const std::size_t T = w.samples;
    if (T < 2) throw InputError("window needs at least 2 samples, has " + std::to_string(T));
    if (w.values.size() != T * w.channels) throw InputError("window value count does not match shape");
    if (schema.entries().empty()) throw ConfigError("empty feature schema");
    if (schema.max_channel() >= w.channels) {
        throw InputError("schema references channel " + std::to_string(schema.max_channel()) +
                         " but window has " + std::to_string(w.channels));
    }
    if (!(w.sample_rate_hz > 0.0)) throw InputError("sample rate must be positive");
    for (float v : w.values) {
        if (!std::isfinite(v)) throw InputError("window contains a non-finite sample");
    }

    FeatureVector out;
    out.label = w.label;
    out.values.reserve(schema.total_dims());
    const double rate = w.sample_rate_hz;
    for (const auto& entry : schema.entries()) {
        const std::size_t c = entry.channel;
        const auto raw = moments(T, [&](std::size_t t) { return static_cast<double>(w.at(t, c)); });
        const auto jerk = moments(T - 1, [&](std::size_t t) {
            return (static_cast<double>(w.at(t + 1, c)) - static_cast<double>(w.at(t, c))) * rate;
        });
        for (Stat s : entry.stats) {
            switch (s) {
            case Stat::mean: out.values.push_back(raw.mean); break;
            case Stat::variance: out.values.push_back(raw.variance); break;
            case Stat::jerk_mean: out.values.push_back(jerk.mean); break;
            case Stat::jerk_variance: out.values.push_back(jerk.variance); break;
            }
        }
    }
    return out;
}

std::vector<FeatureVector> extract_batch(std::span<const SensorWindow> windows,
                                         const FeatureSchema& schema) {
    std::vector<FeatureVector> out;
    out.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        try {
            out.push_back(extract(windows[i], schema));
        } catch (const Error& e) {
            throw InputError("window " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
    if (mean_.size() != stddev_.size()) throw ConfigError("standardizer mean/stddev size mismatch");
}

Standardizer Standardizer::fit(std::span<const FeatureVector> train) {
    if (train.empty()) throw InputError("cannot fit a standardizer on an empty set");
    const std::size_t dims = train.front().size();
    for (const auto& v : train) {
        if (v.size() != dims) throw InputError("feature vectors of mixed length");
    }
    std::vector<double> mean(dims), stddev(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const auto m = moments(train.size(), [&](std::size_t i) { return train[i].values[d]; });
        mean[d] = m.mean;
        stddev[d] = std::sqrt(m.variance);
    }
    return Standardizer(std::move(mean), std::move(stddev));
}

FeatureVector Standardizer::apply(const FeatureVector& v) const {
    if (v.size() != mean_.size()) {
        throw InputError("feature vector has " + std::to_string(v.size()) + " dims, standardizer " +
                         std::to_string(mean_.size()));
    }
    FeatureVector out;
    out.label = v.label;
    out.values.resize(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) {
        out.values[d] = (v.values[d] - mean_[d]) / std::max(stddev_[d], kMinScale);
    }
    return out;
}

std::vector<FeatureVector> Standardizer::apply(std::span<const FeatureVector> vs) const {
    std::vector<FeatureVector> out;
    out.reserve(vs.size());
    for (const auto& v : vs) out.push_back(apply(v));
    return out;
}

} // namespace magneto
