#include <doctest.h>

#include <cmath>

#include "test_support.hpp"

using namespace magneto;
using namespace magneto::testing;

namespace {

// One linear layer with the identity weight: embeddings are the inputs,
// L2-normalized when `normalize` is set.
EmbeddingModel identity_model(std::size_t dim, bool normalize) {
    NetConfig cfg;
    cfg.input_dim = dim;
    cfg.layer_widths = {dim};
    cfg.output_normalize = normalize;
    auto m = init_model<float>(cfg);
    m.layers[0].weight.setIdentity();
    return m;
}

FeatureVector fv(std::vector<double> values, ClassId label) { return {std::move(values), label}; }

SupportSet support_of(std::size_t dim, const std::vector<std::vector<FeatureVector>>& per_class) {
    SupportSet s(dim, 1000);
    Rng r(1);
    for (std::size_t c = 0; c < per_class.size(); ++c) s.set_class(static_cast<ClassId>(c), per_class[c], r);
    return s;
}

LabelSpace labels_of(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
    return LabelSpace(names);
}

} // namespace

TEST_SUITE("prototypes") {

TEST_CASE("prototype of a single sample is its embedding") {
    const auto m = identity_model(2, true);
    const auto s = support_of(2, {{fv({3, 4}, 0)}, {fv({0, -2}, 1)}});
    const auto t = compute_prototypes(m, s, labels_of(2));
    CHECK(t.prototypes.at(0) == std::vector<float>{0.6f, 0.8f});
    CHECK(t.prototypes.at(1) == std::vector<float>{0.0f, -1.0f});
    CHECK(t.model_id == model_digest(m));
    CHECK(t.support_digest == s.digest());
}

TEST_CASE("opposite embeddings average to zero") {
    const auto m = identity_model(2, true);
    const auto s = support_of(2, {{fv({1, 0}, 0), fv({-1, 0}, 0)}, {fv({0, 1}, 1)}});
    const auto t = compute_prototypes(m, s, labels_of(2));
    CHECK(t.prototypes.at(0) == std::vector<float>{0.0f, 0.0f});
}

TEST_CASE("prototypes equal the brute-force normalized class mean") {
    Rng r(2);
    const auto m = init_model<float>(small_net(5, 4));
    std::vector<std::vector<FeatureVector>> per_class(3);
    for (std::size_t c = 0; c < 3; ++c) {
        for (int i = 0; i < 17; ++i) {
            std::vector<double> v(5);
            for (auto& x : v) x = r.normal(static_cast<double>(c), 1.0);
            per_class[c].push_back(fv(v, static_cast<ClassId>(c)));
        }
    }
    const auto s = support_of(5, per_class);
    const auto t = compute_prototypes(m, s, labels_of(3));
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> mean(8, 0.0);
        for (const auto& x : s.samples(static_cast<ClassId>(c))) {
            const auto z = forward(m, x);
            for (std::size_t i = 0; i < 8; ++i) mean[i] += z[i] / 17.0;
        }
        double n = 0;
        for (double v : mean) n += v * v;
        n = std::sqrt(n);
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(std::abs(t.prototypes.at(static_cast<ClassId>(c))[i] - mean[i] / n) < 1e-6);
        }
    }
}

TEST_CASE("classification by nearest prototype") {
    std::map<ClassId, std::vector<float>> p{{0, {1, 0}}, {1, {0, 1}}, {2, {-1, 0}}};
    const std::vector<float> exact{0, 1};
    const auto c = classify_embedding(p, exact);
    CHECK(c.label == 1);
    CHECK(c.distances.at(1) == 0.0);
    CHECK(std::abs(c.distances.at(0) - std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(c.distances.at(2) - std::sqrt(2.0)) < 1e-12);

    // equidistant from 0 and 2 (and 1): lowest id wins
    const std::vector<float> centre{0, 0};
    CHECK(classify_embedding(p, centre).label == 0);
    std::map<ClassId, std::vector<float>> q{{4, {1, 0}}, {2, {-1, 0}}};
    CHECK(classify_embedding(q, centre).label == 2);

    CHECK_THROWS_AS(classify_embedding({}, centre), ConfigError);
    CHECK_THROWS_AS(classify(identity_model(2, true), PrototypeTable{}, fv({1, 0}, 0)), ConfigError);
    const std::vector<float> short_z{1};
    CHECK_THROWS_AS(classify_embedding(p, short_z), InputError);
}

TEST_CASE("prototypes do not depend on support order") {
    Rng r(3);
    const auto m = init_model<float>(small_net(3, 8));
    std::vector<FeatureVector> a, b;
    for (int i = 0; i < 30; ++i) a.push_back(fv({r.normal(), r.normal(), r.normal()}, 0));
    b = a;
    r.shuffle(b);
    const auto other = std::vector<FeatureVector>{fv({5, 5, 5}, 1)};
    const auto pa = compute_prototypes(m, support_of(3, {a, other}), labels_of(2));
    const auto pb = compute_prototypes(m, support_of(3, {b, other}), labels_of(2));
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(pa.prototypes.at(0)[i] - pb.prototypes.at(0)[i]) < 1e-6);
}

TEST_CASE("missing support class is a coverage error") {
    const auto m = identity_model(2, true);
    const auto s = support_of(2, {{fv({1, 0}, 0)}});
    CHECK_THROWS_AS(compute_prototypes(m, s, labels_of(2)), CoverageError);
}

TEST_CASE("constant classifier on five balanced classes scores 0.2") {
    std::vector<ClassId> truth, predicted;
    for (ClassId c = 0; c < 5; ++c) {
        for (int i = 0; i < 40; ++i) {
            truth.push_back(c);
            predicted.push_back(3);
        }
    }
    const auto r = score_predictions(truth, predicted, {{0, 1, 2, 3}, 4});
    CHECK(r.overall == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(r.new_class == 0.0);
    CHECK(r.old_macro == doctest::Approx(0.25));
    CHECK(r.per_class.at(3).accuracy == 1.0);
}

TEST_CASE("scores agree with an independent confusion count") {
    Rng r(4);
    std::vector<ClassId> truth, predicted;
    for (int i = 0; i < 1000; ++i) {
        truth.push_back(static_cast<ClassId>(r.below(4)));
        predicted.push_back(r.uniform() < 0.7 ? truth.back() : static_cast<ClassId>(r.below(4)));
    }
    const auto rep = score_predictions(truth, predicted, {{0, 1, 2}, 3});
    std::size_t diag = 0, total = 0;
    double macro = 0;
    for (ClassId t = 0; t < 4; ++t) {
        std::size_t row = 0;
        for (ClassId p = 0; p < 4; ++p) {
            std::size_t n = 0;
            for (std::size_t i = 0; i < truth.size(); ++i) n += truth[i] == t && predicted[i] == p;
            CHECK(rep.confusion[t][p] == n);
            row += n;
        }
        diag += rep.confusion[t][t];
        total += row;
        const double acc = static_cast<double>(rep.confusion[t][t]) / static_cast<double>(row);
        CHECK(std::abs(rep.per_class.at(t).accuracy - acc) < 1e-12);
        if (t < 3) macro += acc / 3.0;
        else CHECK(std::abs(rep.new_class - acc) < 1e-12);
    }
    CHECK(total == 1000);
    CHECK(rep.overall == static_cast<double>(diag) / static_cast<double>(total));
    CHECK(std::abs(rep.old_macro - macro) < 1e-12);
}

TEST_CASE("scoring edge cases") {
    const std::vector<ClassId> t{0, 1}, p{0};
    CHECK_THROWS_AS(score_predictions(t, p, {}), InputError);
    CHECK_THROWS_AS(score_predictions({}, {}, {}), InputError);
    const std::vector<ClassId> only{0, 0};
    const auto r = score_predictions(only, only, {{1}, 2});
    CHECK(std::isnan(r.old_macro));
    CHECK(std::isnan(r.new_class));
}

TEST_CASE("evaluate matches predict on a trained model") {
    const auto data = small_prepared(3, 80, 21);
    const auto std_ = Standardizer::fit(data.train);
    auto m = init_model<float>(small_net(16, 2));
    const auto pool = std_.apply(data.train);
    train_epochs(m, pool, small_train(20));
    SupportSet s(16, 30);
    Rng r(5);
    for (ClassId c = 0; c < 3; ++c) {
        std::vector<FeatureVector> xs;
        for (const auto& x : pool) if (x.label == c) xs.push_back(x);
        s.set_class(c, xs, r);
    }
    const auto t = compute_prototypes(m, s, data.labels);
    const auto test = std_.apply(data.test);
    const auto rep = evaluate(m, t, test, {{0, 1, 2}, std::nullopt});
    std::size_t correct = 0;
    for (const auto& x : test) correct += classify(m, t, x).label == *x.label;
    CHECK(rep.overall == static_cast<double>(correct) / static_cast<double>(test.size()));
    CHECK(rep.overall > 0.9);
    const auto j = prototypes_to_json(t, data.labels);
    CHECK(j.size() == 3);
    CHECK(j.at("c1").size() == 8);
}

}
