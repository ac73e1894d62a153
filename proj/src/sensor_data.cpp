#include "magneto/sensor_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "magneto/error.hpp"
#include "magneto/rng.hpp"

namespace magneto {

namespace {

constexpr char kDatasetMagic[] = "MGD1";
constexpr std::uint16_t kDatasetVersion = 1;

void validate_profile(const std::string& name, const SynthClassProfile& p,
                      const SynthSettings& settings) {
    if (p.channels.size() != settings.channels) {
        throw ConfigError("profile '" + name + "' has " + std::to_string(p.channels.size()) +
                          " channels, expected " + std::to_string(settings.channels));
    }
    const double nyquist = settings.sample_rate_hz / 2.0;
    for (std::size_t c = 0; c < p.channels.size(); ++c) {
        const auto& ch = p.channels[c];
        const bool ok = std::isfinite(ch.amplitude) && ch.amplitude >= 0.0 &&
                        std::isfinite(ch.noise_std) && ch.noise_std >= 0.0 &&
                        std::isfinite(ch.drift) && ch.frequency_hz >= 0.0 &&
                        ch.frequency_hz < nyquist;
        if (!ok) {
            throw ConfigError("profile '" + name + "' channel " + std::to_string(c) +
                              " has out-of-range parameters");
        }
    }
}

} // namespace

std::size_t Dataset::count_label(ClassId id) const {
    return static_cast<std::size_t>(std::count_if(
        windows.begin(), windows.end(), [id](const SensorWindow& w) { return w.label == id; }));
}

void Dataset::validate() const {
    for (const auto& w : windows) {
        if (w.channels != channels || w.samples != samples_per_window ||
            w.values.size() != w.samples * w.channels) {
            throw InputError("window shape does not match dataset");
        }
        if (w.label && !label_space.contains(*w.label)) {
            throw InputError("window label " + std::to_string(*w.label) + " outside label space");
        }
    }
    std::size_t expected_begin = 0;
    for (const auto& s : sessions) {
        if (s.begin != expected_begin || s.end < s.begin || s.end > windows.size()) {
            throw InputError("session table is not a contiguous partition");
        }
        for (std::size_t i = s.begin + 1; i < s.end; ++i) {
            if (!(windows[i].start_time > windows[i - 1].start_time)) {
                throw InputError("session " + std::to_string(s.id) +
                                 " start times are not strictly increasing");
            }
        }
        expected_begin = s.end;
    }
    if (expected_begin != windows.size()) throw InputError("session table does not cover dataset");
}

Dataset generate_dataset(const LabelSpace& labels,
                         const std::map<std::string, SynthClassProfile>& profiles,
                         std::size_t windows_per_class, std::uint64_t seed,
                         const SynthSettings& settings) {
    if (windows_per_class == 0) throw ConfigError("windows_per_class must be >= 1");
    if (settings.samples_per_window == 0 || settings.channels == 0 ||
        !(settings.sample_rate_hz > 0.0) || settings.session_length == 0) {
        throw ConfigError("invalid synthesis settings");
    }
    for (const auto& l : labels.labels()) {
        auto it = profiles.find(l.name);
        if (it == profiles.end()) throw ConfigError("missing profile for label '" + l.name + "'");
        validate_profile(l.name, it->second, settings);
    }
    for (const auto& [name, _] : profiles) {
        if (!labels.find(name)) throw ConfigError("profile '" + name + "' has no label");
    }

    Dataset ds;
    ds.label_space = labels;
    ds.channels = settings.channels;
    ds.samples_per_window = settings.samples_per_window;
    ds.sample_rate_hz = settings.sample_rate_hz;
    ds.windows.reserve(labels.size() * windows_per_class);

    const std::size_t T = settings.samples_per_window;
    const std::size_t C = settings.channels;
    const double rate = settings.sample_rate_hz;
    const double window_seconds = static_cast<double>(T) / rate;
    std::uint32_t session_id = 0;

    for (const auto& label : labels.labels()) {
        const auto& profile = profiles.at(label.name);
        std::vector<double> phase(C);
        Rng phase_rng(profile.seed);
        for (auto& p : phase) p = 2.0 * std::numbers::pi * phase_rng.uniform();

        std::size_t produced = 0;
        std::size_t class_session = 0;
        while (produced < windows_per_class) {
            const std::size_t n = std::min(settings.session_length, windows_per_class - produced);
            Rng rng(derive_seed(seed, profile.seed, label.id, class_session));
            // whole seconds keep window start times exact in binary
            const double session_start = std::floor(rng.uniform(0.0, 3600.0));
            Session session{session_id++, ds.windows.size(), ds.windows.size() + n};
            for (std::size_t k = 0; k < n; ++k) {
                SensorWindow w;
                w.samples = T;
                w.channels = C;
                w.sample_rate_hz = rate;
                w.start_time = session_start + static_cast<double>(k) * window_seconds;
                w.label = label.id;
                w.values.resize(T * C);
                for (std::size_t t = 0; t < T; ++t) {
                    const double in_session = static_cast<double>(k) * window_seconds +
                                              static_cast<double>(t) / rate;
                    const double abs_time = w.start_time + static_cast<double>(t) / rate;
                    for (std::size_t c = 0; c < C; ++c) {
                        const auto& ch = profile.channels[c];
                        double x = ch.amplitude * std::sin(2.0 * std::numbers::pi *
                                                               ch.frequency_hz * abs_time +
                                                           phase[c]) +
                                   ch.drift * in_session;
                        if (ch.noise_std > 0.0) x += ch.noise_std * rng.normal();
                        w.values[t * C + c] = static_cast<float>(x);
                    }
                }
                ds.windows.push_back(std::move(w));
            }
            ds.sessions.push_back(session);
            produced += n;
            ++class_session;
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> gap_split(const Dataset& ds, double test_fraction,
                                      double min_gap_seconds) {
    if (ds.windows.empty()) throw InputError("cannot split an empty dataset");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw InputError("test_fraction must lie in (0, 1)");
    }
    if (!(min_gap_seconds >= 0.0)) throw InputError("min_gap_seconds must be >= 0");

    auto shell = [&ds] {
        Dataset d;
        d.label_space = ds.label_space;
        d.channels = ds.channels;
        d.samples_per_window = ds.samples_per_window;
        d.sample_rate_hz = ds.sample_rate_hz;
        return d;
    };
    Dataset train = shell();
    Dataset test = shell();

    auto append = [](Dataset& dst, std::uint32_t id, auto first, auto last) {
        if (first == last) return;
        Session s{id, dst.windows.size(), 0};
        dst.windows.insert(dst.windows.end(), first, last);
        s.end = dst.windows.size();
        dst.sessions.push_back(s);
    };

    // cumulative class sizes and test counts keep each class total at
    // round(test_fraction * class size) despite per-session rounding
    std::map<std::optional<ClassId>, std::pair<std::size_t, std::size_t>> progress;
    constexpr double kTimeEps = 1e-9;

    for (const auto& s : ds.sessions) {
        const std::size_t n = s.size();
        if (n == 0) continue;
        auto& [seen, assigned] = progress[ds.windows[s.begin].label];
        seen += n;
        const auto target = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(seen)));
        std::size_t n_test = target > assigned ? target - assigned : 0;
        n_test = std::min(n_test, n >= 2 ? n - 1 : std::size_t{0});
        assigned += n_test;

        const auto first = ds.windows.begin() + static_cast<std::ptrdiff_t>(s.begin);
        const auto last = ds.windows.begin() + static_cast<std::ptrdiff_t>(s.end);
        const auto test_begin = last - static_cast<std::ptrdiff_t>(n_test);
        if (n_test == 0) {
            append(train, s.id, first, last);
            continue;
        }
        const double test_start = test_begin->start_time;
        auto train_end = first;
        while (train_end != test_begin &&
               test_start - (train_end->start_time + train_end->duration()) >=
                   min_gap_seconds - kTimeEps) {
            ++train_end;
        }
        append(train, s.id, first, train_end);
        append(test, s.id, test_begin, last);
    }
    return {std::move(train), std::move(test)};
}

Bytes encode_dataset(const Dataset& ds) {
    nlohmann::json header;
    header["labels"] = to_json(ds.label_space);
    header["channels"] = ds.channels;
    header["samples_per_window"] = ds.samples_per_window;
    header["sample_rate_hz"] = ds.sample_rate_hz;
    auto& sessions = header["sessions"] = nlohmann::json::array();
    for (const auto& s : ds.sessions) {
        sessions.push_back({{"id", s.id}, {"begin", s.begin}, {"end", s.end}});
    }
    auto& windows = header["windows"] = nlohmann::json::array();
    for (const auto& w : ds.windows) {
        windows.push_back({{"start_time", w.start_time},
                           {"label", w.label ? nlohmann::json(*w.label) : nlohmann::json()}});
    }

    ByteWriter out;
    out.put_magic(kDatasetMagic);
    out.put_u16(kDatasetVersion);
    out.put_string(header.dump());
    for (const auto& w : ds.windows) {
        for (float v : w.values) out.put_f32(v);
    }
    return std::move(out).bytes();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kDatasetMagic);
    const auto version = in.get_u16();
    if (version != kDatasetVersion) {
        throw FormatError("unsupported dataset version " + std::to_string(version));
    }
    Dataset ds;
    try {
        const auto header = nlohmann::json::parse(in.get_string());
        ds.label_space = label_space_from_json(header.at("labels"));
        ds.channels = header.at("channels").get<std::size_t>();
        ds.samples_per_window = header.at("samples_per_window").get<std::size_t>();
        ds.sample_rate_hz = header.at("sample_rate_hz").get<double>();
        for (const auto& s : header.at("sessions")) {
            ds.sessions.push_back({s.at("id").get<std::uint32_t>(), s.at("begin").get<std::size_t>(),
                                   s.at("end").get<std::size_t>()});
        }
        for (const auto& jw : header.at("windows")) {
            SensorWindow w;
            w.samples = ds.samples_per_window;
            w.channels = ds.channels;
            w.sample_rate_hz = ds.sample_rate_hz;
            w.start_time = jw.at("start_time").get<double>();
            if (!jw.at("label").is_null()) w.label = jw.at("label").get<ClassId>();
            ds.windows.push_back(std::move(w));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset header: ") + e.what());
    }
    for (auto& w : ds.windows) {
        w.values.resize(w.samples * w.channels);
        for (auto& v : w.values) v = in.get_f32();
    }
    if (!in.at_end()) throw FormatError("trailing bytes after dataset blocks");
    ds.validate();
    return ds;
}

ProfileSet profiles_from_json(const nlohmann::json& j) {
    ProfileSet set;
    try {
        set.settings.sample_rate_hz = j.value("sample_rate_hz", 120.0);
        set.settings.samples_per_window = j.value("samples_per_window", std::size_t{120});
        set.settings.session_length = j.value("session_length", std::size_t{300});
        std::vector<std::string> names;
        for (const auto& jc : j.at("classes")) {
            SynthClassProfile p;
            p.seed = jc.at("seed").get<std::uint64_t>();
            for (const auto& ch : jc.at("channels")) {
                p.channels.push_back({ch.at("amplitude").get<double>(),
                                      ch.at("frequency_hz").get<double>(),
                                      ch.at("noise_std").get<double>(),
                                      ch.value("drift", 0.0)});
            }
            const auto name = jc.at("name").get<std::string>();
            names.push_back(name);
            set.settings.channels = p.channels.size();
            set.profiles.emplace(name, std::move(p));
        }
        set.labels = LabelSpace(names);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("profile file: ") + e.what());
    }
    for (const auto& [name, p] : set.profiles) validate_profile(name, p, set.settings);
    return set;
}

nlohmann::json to_json(const ProfileSet& set) {
    nlohmann::json j;
    j["sample_rate_hz"] = set.settings.sample_rate_hz;
    j["samples_per_window"] = set.settings.samples_per_window;
    j["session_length"] = set.settings.session_length;
    auto& classes = j["classes"] = nlohmann::json::array();
    for (const auto& label : set.labels.labels()) {
        const auto& p = set.profiles.at(label.name);
        nlohmann::json jc;
        jc["name"] = label.name;
        jc["seed"] = p.seed;
        auto& chans = jc["channels"] = nlohmann::json::array();
        for (const auto& ch : p.channels) {
            chans.push_back({{"amplitude", ch.amplitude},
                             {"frequency_hz", ch.frequency_hz},
                             {"noise_std", ch.noise_std},
                             {"drift", ch.drift}});
        }
        classes.push_back(std::move(jc));
    }
    return j;
}

ProfileSet load_profiles(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return profiles_from_json(j);
}

} // namespace magneto
