#include <doctest.h>

#include <cmath>

#include "magneto/error.hpp"
#include "test_support.hpp"

using namespace magneto;
using namespace magneto::testing;

namespace {

// Shortest time between two windows' [start, start + duration) intervals.
double interval_gap(const SensorWindow& a, const SensorWindow& b) {
    const double a_end = a.start_time + a.duration();
    const double b_end = b.start_time + b.duration();
    return std::max({0.0, b.start_time - a_end, a.start_time - b_end});
}

Dataset random_dataset(std::uint64_t seed) {
    Rng r(seed);
    const std::size_t classes = 2 + r.below(3);
    auto set = small_profiles(classes, 5 + r.below(60));
    return generate_dataset(set, 10 + r.below(120), seed);
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("window and class counts") {
    const auto set = small_profiles(5);
    const auto ds = generate_dataset(set, 10, 7);
    CHECK(ds.windows.size() == 50);
    CHECK(ds.label_space.size() == 5);
    for (ClassId k = 0; k < 5; ++k) CHECK(ds.count_label(k) == 10);
    ds.validate();
}

TEST_CASE("sessions hold contiguous same-class windows") {
    const auto ds = generate_dataset(small_profiles(3, 25), 60, 1);
    CHECK(ds.sessions.size() == 9);
    for (const auto& s : ds.sessions) {
        for (std::size_t i = s.begin + 1; i < s.end; ++i) {
            CHECK(ds.windows[i].label == ds.windows[s.begin].label);
            CHECK(ds.windows[i].start_time ==
                  doctest::Approx(ds.windows[i - 1].start_time + ds.windows[i - 1].duration()));
        }
    }
}

TEST_CASE("missing or extra profiles are configuration errors") {
    auto set = small_profiles(5);
    auto four = set.profiles;
    four.erase("c4");
    CHECK_THROWS_AS(generate_dataset(set.labels, four, 10, 1, set.settings), ConfigError);
    auto six = set.profiles;
    six["extra"] = six["c0"];
    CHECK_THROWS_AS(generate_dataset(set.labels, six, 10, 1, set.settings), ConfigError);
    CHECK_THROWS_AS(generate_dataset(set, 0, 1), ConfigError);
}

TEST_CASE("generation is deterministic byte for byte") {
    const auto set = small_profiles(3);
    CHECK(encode_dataset(generate_dataset(set, 30, 11)) == encode_dataset(generate_dataset(set, 30, 11)));
    CHECK(encode_dataset(generate_dataset(set, 30, 11)) != encode_dataset(generate_dataset(set, 30, 12)));
}

TEST_CASE("noise-free classes with distinct frequencies have distinct features") {
    auto set = small_profiles(3, 40, 0.0);
    const auto ds = generate_dataset(set, 5, 3);
    const auto f = extract_batch(ds.windows, small_schema());
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (std::size_t j = 0; j < f.size(); ++j) {
            if (f[i].label == f[j].label) continue;
            double biggest = 0.0;
            for (std::size_t d = 0; d < f[i].size(); ++d) {
                biggest = std::max(biggest, std::abs(f[i].values[d] - f[j].values[d]));
            }
            CHECK(biggest > 1e-6);
        }
    }
}

TEST_CASE("dataset codec round trip") {
    const auto ds = generate_dataset(small_profiles(3), 20, 4);
    const auto bytes = encode_dataset(ds);
    const auto back = decode_dataset(bytes);
    CHECK(back == ds);
    CHECK(encode_dataset(back) == bytes);
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(decode_dataset(cut), FormatError);
}

TEST_CASE("profile JSON round trip") {
    const auto set = small_profiles(3);
    const auto back = profiles_from_json(to_json(set));
    CHECK(back.labels == set.labels);
    CHECK(to_json(back) == to_json(set));
}

TEST_CASE("gap split of one 100-window session") {
    auto set = small_profiles(2, 100);
    set.settings.samples_per_window = 24;
    const auto ds = generate_dataset(set, 100, 2);
    const auto [train, test] = gap_split(ds, 0.2, 10.0);
    // per class: windows 0-69 train, 70-79 discarded, 80-99 test
    CHECK(train.windows.size() == 140);
    CHECK(test.windows.size() == 40);
    const double t0 = ds.windows[0].start_time;
    double last_train = -1.0, first_test = 1e18;
    for (const auto& w : train.windows) {
        if (w.label == 0u) last_train = std::max(last_train, w.start_time - t0);
    }
    for (const auto& w : test.windows) {
        if (w.label == 0u) first_test = std::min(first_test, w.start_time - t0);
    }
    CHECK(last_train == doctest::Approx(69.0));
    CHECK(first_test == doctest::Approx(80.0));
}

TEST_CASE("gap split keeps every same-session train/test pair at least the gap apart") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ds = random_dataset(seed);
        Rng r(seed + 1000);
        const double gap = 1.0 + r.below(6);
        const double fraction = 0.1 + 0.3 * r.uniform();
        const auto [train, test] = gap_split(ds, fraction, gap);
        train.validate();
        test.validate();
        // sessions keep their source id through the split
        double min_gap = 1e18;
        for (const auto& st : train.sessions) {
            for (const auto& se : test.sessions) {
                if (st.id != se.id) continue;
                for (std::size_t i = st.begin; i < st.end; ++i) {
                    for (std::size_t j = se.begin; j < se.end; ++j) {
                        min_gap = std::min(min_gap, interval_gap(train.windows[i], test.windows[j]));
                    }
                }
            }
        }
        CHECK(min_gap >= gap - 1e-9);
        CHECK(train.windows.size() + test.windows.size() <= ds.windows.size());
        for (ClassId k = 0; k < ds.label_space.size(); ++k) {
            CHECK(test.count_label(k) >= 1);
        }
    }
}

TEST_CASE("gap split rejects bad arguments") {
    const auto ds = generate_dataset(small_profiles(2), 20, 1);
    CHECK_THROWS_AS(gap_split(ds, 0.0, 1.0), InputError);
    CHECK_THROWS_AS(gap_split(ds, 1.0, 1.0), InputError);
}

}
