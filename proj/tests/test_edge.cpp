#include <doctest.h>

#include <cmath>

#include "test_support.hpp"

using namespace magneto;
using namespace magneto::testing;

namespace {

struct Fixture {
    Dataset train;
    Dataset test;
    std::vector<FeatureVector> new_raw; // class c4, never seen by the cloud
    EdgeBundle bundle;
};

// Four known classes in the bundle, a fifth held back for class addition.
const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture out;
        const auto set = small_profiles(5);
        const auto all = generate_dataset(set, 200, 31);
        auto [train, test] = gap_split(all, 0.2, 2.0);
        Dataset known;
        known.label_space = LabelSpace(std::vector<std::string>{"c0", "c1", "c2", "c3"});
        known.channels = train.channels;
        known.samples_per_window = train.samples_per_window;
        known.sample_rate_hz = train.sample_rate_hz;
        std::uint32_t sid = 0;
        for (const auto& s : train.sessions) {
            if (*train.windows[s.begin].label == 4) continue;
            Session ns{sid++, known.windows.size(), 0};
            for (std::size_t i = s.begin; i < s.end; ++i) known.windows.push_back(train.windows[i]);
            ns.end = known.windows.size();
            known.sessions.push_back(ns);
        }
        for (const auto& w : train.windows) {
            if (*w.label == 4) out.new_raw.push_back(extract(w, small_schema()));
        }
        out.train = known;
        out.test = test;
        out.bundle = cloud_init(known, small_schema(), small_net(16), small_train(15), 100, 77);
        return out;
    }();
    return f;
}

std::vector<FeatureVector> first_n(const std::vector<FeatureVector>& xs, std::size_t n) {
    return {xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(std::min(n, xs.size()))};
}

TrainConfig zero_epochs() {
    auto cfg = small_train(0);
    return cfg;
}

} // namespace

TEST_SUITE("edge") {

TEST_CASE("cloud init packs a consistent bundle") {
    const auto& f = fixture();
    const auto& b = f.bundle;
    CHECK_NOTHROW(b.validate());
    CHECK(b.labels.size() == 4);
    CHECK(b.support.total() == 400);
    CHECK(b.protos.size() == 4);
    CHECK(b.warnings.empty());
    CHECK(b.revision == 0);
    // every support vector is a standardized training vector
    const auto std_train = b.standardizer.apply(extract_batch(f.train.windows, b.schema));
    for (ClassId c = 0; c < 4; ++c) {
        CHECK(b.support.count(c) == 100);
        for (const auto& s : b.support.samples(c)) {
            bool found = false;
            for (const auto& t : std_train) {
                if (t.label == c && quantize_f32(t).values == s.values) {
                    found = true;
                    break;
                }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("short classes produce a warning") {
    const auto& f = fixture();
    const auto raw = extract_batch(f.train.windows, small_schema());
    CloudModel cloud;
    cloud.standardizer = f.bundle.standardizer;
    cloud.model = f.bundle.model;
    const auto b = package_bundle(small_schema(), f.train.label_space, cloud, raw, 1000, 3);
    CHECK(b.warnings.size() == 4);
    CHECK(b.support.count(0) == f.train.count_label(0));
}

TEST_CASE("bundle encoding round trips") {
    const auto& b = fixture().bundle;
    const auto bytes = encode_bundle(b);
    const auto back = decode_bundle(bytes);
    CHECK(encode_bundle(back) == bytes);
    CHECK(back.support == b.support);
    CHECK(back.protos.prototypes == b.protos.prototypes);
    CHECK(back.standardizer == b.standardizer);
    CHECK(back.labels == b.labels);
    CHECK(model_digest(back.model) == model_digest(b.model));
    auto cut = bytes;
    cut.resize(bytes.size() / 2);
    CHECK_THROWS_AS(decode_bundle(cut), FormatError);
}

TEST_CASE("collecting a new class grows the support set") {
    const auto& f = fixture();
    const auto b = collect_new_class(f.bundle, first_n(f.new_raw, 100), {4, "c4"});
    CHECK(b.support.total() == 500);
    CHECK(b.support.count(4) == 100);
    CHECK(b.labels.size() == 5);
    CHECK(b.protos.size() == 4); // until retrain
    CHECK(f.bundle.labels.size() == 4);
    const auto s0 = quantize_f32(f.bundle.standardizer.apply(f.new_raw[0]));
    CHECK(b.support.samples(4)[0].values == s0.values);

    const auto capped = collect_new_class(f.bundle, first_n(f.new_raw, 150), {4, "c4"});
    CHECK(capped.support.count(4) == 100);

    CHECK_THROWS_AS(collect_new_class(f.bundle, first_n(f.new_raw, 5), {4, "c2"}), ConflictError);
    CHECK_THROWS_AS(collect_new_class(f.bundle, first_n(f.new_raw, 5), {2, "c9"}), ConflictError);
    CHECK_THROWS_AS(collect_new_class(f.bundle, {}, {4, "c4"}), InputError);
}

TEST_CASE("retraining with zero epochs only adds the new prototype") {
    const auto& f = fixture();
    const auto collected = collect_new_class(f.bundle, first_n(f.new_raw, 100), {4, "c4"});
    const auto b = edge_retrain(collected, zero_epochs());
    CHECK(model_digest(b.model) == model_digest(f.bundle.model));
    CHECK(b.protos.size() == 5);
    for (ClassId c = 0; c < 4; ++c) CHECK(b.protos.prototypes.at(c) == f.bundle.protos.prototypes.at(c));
    CHECK(b.last_trace.rows.empty());
}

TEST_CASE("warm start retraining learns the new class") {
    const auto& f = fixture();
    const auto collected = collect_new_class(f.bundle, first_n(f.new_raw, 100), {4, "c4"});
    const auto b = edge_retrain(collected, small_train(10));
    CHECK(b.last_trace.rows.size() == 10 * ((500 + 63) / 64));
    CHECK(model_digest(b.model) != model_digest(f.bundle.model));
    const auto test = preprocess(b, extract_batch(f.test.windows, b.schema));
    const auto rep = evaluate(b.model, b.protos, test, {{0, 1, 2, 3}, 4});
    CHECK(rep.new_class > 0.9);
    CHECK(rep.old_macro > 0.9);
    const auto again = edge_retrain(collected, small_train(10));
    CHECK(encode_bundle(again) == encode_bundle(b));
    const auto scratch = edge_retrain(collected, small_train(10), RetrainMode::from_scratch);
    CHECK(model_digest(scratch.model) != model_digest(b.model));
}

TEST_CASE("recalibration with zero epochs resets one prototype") {
    const auto& f = fixture();
    const auto raw = extract_batch(f.test.windows, small_schema());
    std::vector<FeatureVector> fresh;
    for (const auto& x : raw) if (x.label == 1) fresh.push_back(x);
    const auto b = recalibrate(f.bundle, "c1", fresh, zero_epochs());
    CHECK(b.support.count(1) == std::min<std::size_t>(fresh.size(), 100));
    std::vector<double> mean(8, 0.0);
    for (const auto& s : b.support.samples(1)) {
        const auto z = forward(b.model, s);
        for (std::size_t i = 0; i < 8; ++i) mean[i] += z[i];
    }
    double n = 0;
    for (double v : mean) n += v * v;
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(std::abs(b.protos.prototypes.at(1)[i] - mean[i] / std::sqrt(n)) < 1e-6);
    }
    CHECK(b.protos.prototypes.at(0) == f.bundle.protos.prototypes.at(0));
    CHECK_THROWS_AS(recalibrate(f.bundle, "nope", fresh, zero_epochs()), NotFoundError);
}

TEST_CASE("uncovered classes cannot be retrained") {
    auto b = fixture().bundle;
    b.labels = b.labels.extended("ghost");
    CHECK_THROWS_AS(edge_retrain(b, zero_epochs()), CoverageError);
}

TEST_CASE("inference") {
    const auto& f = fixture();
    std::size_t correct = 0, known = 0;
    for (const auto& w : f.test.windows) {
        const auto a = infer(f.bundle, w);
        const auto b = infer(f.bundle, w);
        CHECK(a.label == b.label);
        CHECK(a.distances == b.distances);
        if (*w.label < 4) {
            ++known;
            correct += a.label == *w.label;
        }
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(known) > 0.9);
    SensorWindow one = f.test.windows.front();
    one.samples = 1;
    one.values.resize(one.channels);
    CHECK_THROWS_AS(infer(f.bundle, one), InputError);
}

}
