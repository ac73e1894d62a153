#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magneto/labels.hpp"
#include "magneto/sensor_data.hpp"

namespace magneto {

enum class Stat : std::uint8_t { mean, variance, jerk_mean, jerk_variance };

std::string to_string(Stat s);
Stat stat_from_string(const std::string& s);

struct ChannelStats {
    std::size_t channel = 0;
    std::vector<Stat> stats;

    friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// Ordered (channel, stats) selection; output index order follows entry order,
// then stat order within an entry.
class FeatureSchema {
public:
    FeatureSchema() = default;
    // Throws ConfigError on duplicate (channel, stat) pairs or an empty entry.
    explicit FeatureSchema(std::vector<ChannelStats> entries);

    const std::vector<ChannelStats>& entries() const { return entries_; }
    std::size_t total_dims() const { return total_dims_; }
    std::size_t max_channel() const;

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

private:
    std::vector<ChannelStats> entries_;
    std::size_t total_dims_ = 0;
};

// Channels 0-20 carry all four statistics, channel 21 only mean and
// variance: 21 * 4 + 2 = 86 dimensions.
FeatureSchema default_schema();

nlohmann::json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);
FeatureSchema load_schema(const std::filesystem::path& path);

struct FeatureVector {
    std::vector<double> values;
    std::optional<ClassId> label;

    std::size_t size() const { return values.size(); }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// mean and population variance of each channel, plus mean and population
// variance of the jerk (x[t+1] - x[t]) * sample_rate over the T-1 differences.
FeatureVector extract(const SensorWindow& w, const FeatureSchema& schema);

// Errors from a single window are rethrown as InputError naming its index.
std::vector<FeatureVector> extract_batch(std::span<const SensorWindow> windows,
                                         const FeatureSchema& schema);

class Standardizer {
public:
    static constexpr double kMinScale = 1e-8;

    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> stddev);

    // Per-dimension population mean and standard deviation of `train`.
    static Standardizer fit(std::span<const FeatureVector> train);

    FeatureVector apply(const FeatureVector& v) const;
    std::vector<FeatureVector> apply(std::span<const FeatureVector> vs) const;

    std::size_t dims() const { return mean_.size(); }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return stddev_; }

    friend bool operator==(const Standardizer&, const Standardizer&) = default;

private:
    std::vector<double> mean_;
    std::vector<double> stddev_;
};

} // namespace magneto
