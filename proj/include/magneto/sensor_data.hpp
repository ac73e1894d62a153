#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magneto/binary_io.hpp"
#include "magneto/labels.hpp"

namespace magneto {

// One window of raw multi-channel samples, row-major T x C.
struct SensorWindow {
    std::size_t samples = 0;
    std::size_t channels = 0;
    std::vector<float> values;
    double sample_rate_hz = 120.0;
    double start_time = 0.0;
    std::optional<ClassId> label;

    float at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }
    double duration() const { return static_cast<double>(samples) / sample_rate_hz; }

    friend bool operator==(const SensorWindow&, const SensorWindow&) = default;
};

// Contiguous run of same-class windows, half-open [begin, end) into Dataset::windows.
struct Session {
    std::uint32_t id = 0;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    friend bool operator==(const Session&, const Session&) = default;
};

struct Dataset {
    LabelSpace label_space;
    std::size_t channels = 0;
    std::size_t samples_per_window = 0;
    double sample_rate_hz = 0.0;
    std::vector<SensorWindow> windows;
    std::vector<Session> sessions;

    std::size_t size() const { return windows.size(); }
    std::size_t count_label(ClassId id) const;
    // Throws InputError when a structural invariant is broken.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ChannelSignal {
    double amplitude = 0.0;
    double frequency_hz = 0.0;
    double noise_std = 0.0;
    double drift = 0.0;
};

// x_t = A sin(2 pi f t_abs + phase) + drift * t_session + N(0, noise_std^2),
// where phase is drawn once per channel from the profile seed.
struct SynthClassProfile {
    std::vector<ChannelSignal> channels;
    std::uint64_t seed = 0;
};

struct SynthSettings {
    std::size_t samples_per_window = 120;
    std::size_t channels = 22;
    double sample_rate_hz = 120.0;
    std::size_t session_length = 300;
};

struct ProfileSet {
    LabelSpace labels;
    SynthSettings settings;
    std::map<std::string, SynthClassProfile> profiles;
};

ProfileSet load_profiles(const std::filesystem::path& path);
ProfileSet profiles_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProfileSet& set);

// Pure function of its arguments. Windows are grouped into sessions of
// settings.session_length contiguous same-class windows.
Dataset generate_dataset(const LabelSpace& labels,
                         const std::map<std::string, SynthClassProfile>& profiles,
                         std::size_t windows_per_class, std::uint64_t seed,
                         const SynthSettings& settings = {});

inline Dataset generate_dataset(const ProfileSet& set, std::size_t windows_per_class,
                                std::uint64_t seed) {
    return generate_dataset(set.labels, set.profiles, windows_per_class, seed, set.settings);
}

// Temporal holdout. The tail of every session goes to test; train windows
// whose end lies closer than min_gap_seconds to the first test window of the
// same session are discarded. Per-class test counts track
// round(test_fraction * class size) cumulatively across that class's sessions.
std::pair<Dataset, Dataset> gap_split(const Dataset& ds, double test_fraction,
                                      double min_gap_seconds);

Bytes encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

} // namespace magneto
