#include <doctest.h>

#include <cmath>
#include <limits>

#include "magneto/error.hpp"
#include "test_support.hpp"

using namespace magneto;
using namespace magneto::testing;

namespace {

SensorWindow window_from(const std::vector<std::vector<float>>& channels, double rate = 120.0) {
    SensorWindow w;
    w.channels = channels.size();
    w.samples = channels.front().size();
    w.sample_rate_hz = rate;
    w.values.resize(w.samples * w.channels);
    for (std::size_t c = 0; c < w.channels; ++c) {
        for (std::size_t t = 0; t < w.samples; ++t) w.values[t * w.channels + c] = channels[c][t];
    }
    return w;
}

SensorWindow random_window(Rng& r, std::size_t channels, std::size_t samples) {
    std::vector<std::vector<float>> data(channels, std::vector<float>(samples));
    for (auto& ch : data) {
        const double offset = r.uniform(-3, 3), scale = r.uniform(0.1, 4);
        for (auto& x : ch) x = static_cast<float>(offset + scale * r.normal());
    }
    return window_from(data);
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("default schema has 86 dimensions") {
    const auto s = default_schema();
    CHECK(s.total_dims() == 86);
    CHECK(s.max_channel() == 21);
    Rng r(1);
    CHECK(extract(random_window(r, 22, 120), s).size() == 86);
}

TEST_CASE("constant channel") {
    const auto w = window_from({std::vector<float>(10, 2.5f)});
    const auto f = extract(w, small_schema(1));
    CHECK(f.values == std::vector<double>{2.5, 0.0, 0.0, 0.0});
}

TEST_CASE("alternating channel has jerk variance rate squared") {
    std::vector<float> x(120);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = static_cast<float>(t % 2);
    const auto f = extract(window_from({x}), small_schema(1));
    // 119 differences alternate +120, -120 starting with +120
    const double jm = 120.0 / 119.0;
    const double jv = 14400.0 - jm * jm;
    CHECK(f.values[0] == doctest::Approx(0.5));
    CHECK(f.values[1] == doctest::Approx(0.25));
    CHECK(f.values[2] == doctest::Approx(jm).epsilon(1e-12));
    CHECK(f.values[3] == doctest::Approx(jv).epsilon(1e-12));
    // over an even number of differences the jerk mean vanishes exactly
    x.push_back(0.0f);
    const auto g = extract(window_from({x}), small_schema(1));
    CHECK(g.values[2] == 0.0);
    CHECK(g.values[3] == doctest::Approx(14400.0).epsilon(1e-12));
}

TEST_CASE("schema order drives output order") {
    const FeatureSchema s({{1, {Stat::variance}}, {0, {Stat::mean, Stat::jerk_mean}}});
    const auto w = window_from({{1, 2, 3}, {0, 0, 4}}, 1.0);
    const auto f = extract(w, s);
    REQUIRE(f.size() == 3);
    CHECK(f.values[0] == doctest::Approx(32.0 / 9.0));
    CHECK(f.values[1] == doctest::Approx(2.0));
    CHECK(f.values[2] == doctest::Approx(1.0));
}

TEST_CASE("input errors") {
    CHECK_THROWS_AS(extract(window_from({{1.0f}}), small_schema(1)), InputError);
    CHECK_THROWS_AS(extract(window_from({{1.0f, std::nanf("")}}), small_schema(1)), InputError);
    CHECK_THROWS_AS(extract(window_from({{1.0f, 2.0f}}), small_schema(2)), InputError);
    Rng r(2);
    std::vector<SensorWindow> ws{random_window(r, 1, 8), window_from({{1.0f}}), random_window(r, 1, 8)};
    try {
        extract_batch(ws, small_schema(1));
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("window 1") != std::string::npos);
    }
    CHECK(extract_batch({}, small_schema(1)).empty());
    ws.erase(ws.begin() + 1);
    ws.push_back(random_window(r, 1, 8));
    const auto out = extract_batch(ws, small_schema(1));
    REQUIRE(out.size() == 3);
    CHECK(out[2] == extract(ws[2], small_schema(1)));
}

TEST_CASE("schema validation and JSON round trip") {
    CHECK_THROWS_AS(FeatureSchema({{0, {Stat::mean, Stat::mean}}}), ConfigError);
    CHECK_THROWS_AS(FeatureSchema(std::vector<ChannelStats>{{0, {}}}), ConfigError);
    CHECK_THROWS_AS(FeatureSchema({{0, {Stat::mean}}, {0, {Stat::mean}}}), ConfigError);
    const auto s = default_schema();
    CHECK(schema_from_json(to_json(s)) == s);
    CHECK_THROWS_AS(stat_from_string("median"), ConfigError);
}

TEST_CASE("shift moves only the mean") {
    Rng r(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto w = random_window(r, 3, 50);
        const float c = static_cast<float>(r.uniform(-5, 5));
        auto shifted = w;
        for (std::size_t t = 0; t < w.samples; ++t) shifted.values[t * 3 + 1] = w.values[t * 3 + 1] + c;
        const auto a = extract(w, small_schema(3));
        const auto b = extract(shifted, small_schema(3));
        // compare against the float-rounded shifted data, channel 1 at indices 4..7
        double exact_shift = 0.0;
        for (std::size_t t = 0; t < w.samples; ++t) {
            exact_shift += static_cast<double>(shifted.values[t * 3 + 1]) - w.values[t * 3 + 1];
        }
        exact_shift /= static_cast<double>(w.samples);
        CHECK(std::abs((b.values[4] - a.values[4]) - exact_shift) < 1e-9);
        CHECK(std::abs(b.values[4] - a.values[4] - c) < 1e-5);
        for (std::size_t d : {0u, 1u, 2u, 3u, 8u, 9u, 10u, 11u}) CHECK(a.values[d] == b.values[d]);
    }
}

TEST_CASE("scaling by a power of two scales mean and variance exactly") {
    Rng r(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto w = random_window(r, 2, 40);
        const float s = trial % 2 ? 4.0f : 0.5f;
        auto scaled = w;
        for (auto& x : scaled.values) x *= s;
        const auto a = extract(w, small_schema(2));
        const auto b = extract(scaled, small_schema(2));
        for (std::size_t ch = 0; ch < 2; ++ch) {
            CHECK(std::abs(b.values[ch * 4] - s * a.values[ch * 4]) <= 1e-9 * std::abs(s * a.values[ch * 4]) + 1e-15);
            CHECK(std::abs(b.values[ch * 4 + 1] - s * s * a.values[ch * 4 + 1]) <=
                  1e-9 * s * s * a.values[ch * 4 + 1]);
        }
    }
}

TEST_CASE("standardizer") {
    FeatureVector v{{1.0, -2.0, 3.0}, std::nullopt};
    const std::vector<FeatureVector> same{v, v};
    const auto z = Standardizer::fit(same).apply(v);
    CHECK(z.values == std::vector<double>{0.0, 0.0, 0.0});

    Rng r(5);
    std::vector<FeatureVector> train;
    for (int i = 0; i < 200; ++i) {
        train.push_back({{r.uniform(-10, 10), 100 + 5 * r.normal(), 1e-3 * r.normal()}, std::nullopt});
    }
    const auto s = Standardizer::fit(train);
    const auto out = s.apply(train);
    for (std::size_t d = 0; d < 3; ++d) {
        double mean = 0.0, var = 0.0;
        for (const auto& x : out) mean += x.values[d];
        mean /= out.size();
        for (const auto& x : out) var += (x.values[d] - mean) * (x.values[d] - mean);
        CHECK(std::abs(mean) < 1e-6);
        CHECK(var / out.size() == doctest::Approx(1.0).epsilon(1e-9));
    }
    // held-out vectors use the training statistics
    const FeatureVector held{{0.0, 0.0, 0.0}, std::nullopt};
    CHECK(s.apply(held).values[1] == doctest::Approx(-s.mean()[1] / s.stddev()[1]));
    CHECK_THROWS_AS(Standardizer::fit(std::vector<FeatureVector>{}), InputError);
}

}
