#include "magneto/prototypes.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace magneto {

std::map<ClassId, std::vector<float>> prototype_vectors(const EmbeddingModel& m,
                                                        const SupportSet& support,
                                                        const LabelSpace& labels) {
    for (const auto& l : labels.labels()) {
        if (support.count(l.id) == 0) {
            throw CoverageError("no support samples for class '" + l.name + "' (id " +
                                std::to_string(l.id) + ")");
        }
    }
    const auto dim = m.config.embedding_dim();
    std::map<ClassId, std::vector<float>> out;
    for (const auto& l : labels.labels()) {
        const auto& rows = support.samples(l.id);
        const Matrix<float> Y = forward_batch(m, pack_inputs<float>(rows, m.config.input_dim));
        std::vector<double> mean(dim, 0.0);
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
            for (std::size_t i = 0; i < dim; ++i) mean[i] += Y(static_cast<Eigen::Index>(i), j);
        }
        for (auto& v : mean) v /= static_cast<double>(Y.cols());
        if (m.config.output_normalize) {
            double n2 = 0.0;
            for (double v : mean) n2 += v * v;
            const double n = std::max(std::sqrt(n2), kNormFloor);
            for (auto& v : mean) v /= n;
        }
        out[l.id] = std::vector<float>(mean.begin(), mean.end());
    }
    return out;
}

PrototypeTable compute_prototypes(const EmbeddingModel& m, const SupportSet& support,
                                  const LabelSpace& labels) {
    PrototypeTable t;
    t.prototypes = prototype_vectors(m, support, labels);
    t.model_id = model_digest(m);
    t.support_digest = support.digest();
    return t;
}

Classification classify_embedding(const std::map<ClassId, std::vector<float>>& prototypes,
                                  std::span<const float> embedding) {
    if (prototypes.empty()) throw ConfigError("prototype table is empty");
    Classification c;
    double best = std::numeric_limits<double>::infinity();
    bool first = true;
    // std::map iterates in ascending id, so strict < keeps the lowest id on ties
    for (const auto& [id, p] : prototypes) {
        if (p.size() != embedding.size()) throw InputError("prototype/embedding length mismatch");
        double d2 = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double diff = static_cast<double>(embedding[i]) - static_cast<double>(p[i]);
            d2 += diff * diff;
        }
        const double d = std::sqrt(d2);
        c.distances[id] = d;
        if (first || d < best) {
            best = d;
            c.label = id;
            first = false;
        }
    }
    return c;
}

Classification classify(const EmbeddingModel& m, const PrototypeTable& protos,
                        const FeatureVector& x) {
    if (protos.prototypes.empty()) throw ConfigError("prototype table is empty");
    const auto z = forward(m, x);
    return classify_embedding(protos.prototypes, z);
}

AccuracyReport score_predictions(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                 const EvalGroups& groups) {
    if (truth.size() != predicted.size()) throw InputError("truth/prediction length mismatch");
    if (truth.empty()) throw InputError("cannot score an empty test set");
    ClassId max_id = 0;
    for (auto t : truth) max_id = std::max(max_id, t);
    for (auto p : predicted) max_id = std::max(max_id, p);
    AccuracyReport r;
    r.total = truth.size();
    r.confusion.assign(max_id + 1, std::vector<std::size_t>(max_id + 1, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++r.confusion[truth[i]][predicted[i]];
        auto& pc = r.per_class[truth[i]];
        ++pc.total;
        if (truth[i] == predicted[i]) {
            ++pc.correct;
            ++correct;
        }
    }
    for (auto& [_, pc] : r.per_class) {
        pc.accuracy = static_cast<double>(pc.correct) / static_cast<double>(pc.total);
    }
    r.overall = static_cast<double>(correct) / static_cast<double>(truth.size());

    double sum = 0.0;
    std::size_t n = 0;
    for (ClassId id : groups.old_classes) {
        auto it = r.per_class.find(id);
        if (it == r.per_class.end()) continue;
        sum += it->second.accuracy;
        ++n;
    }
    if (n > 0) r.old_macro = sum / static_cast<double>(n);
    if (groups.new_class) {
        auto it = r.per_class.find(*groups.new_class);
        if (it != r.per_class.end()) r.new_class = it->second.accuracy;
    }
    return r;
}

std::vector<ClassId> predict(const EmbeddingModel& m,
                             const std::map<ClassId, std::vector<float>>& prototypes,
                             std::span<const FeatureVector> xs) {
    const Matrix<float> Y = forward_batch(m, pack_inputs<float>(xs, m.config.input_dim));
    std::vector<ClassId> out;
    out.reserve(xs.size());
    const auto dim = static_cast<std::size_t>(Y.rows());
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        out.push_back(classify_embedding(prototypes, std::span(Y.col(j).data(), dim)).label);
    }
    return out;
}

AccuracyReport evaluate(const EmbeddingModel& m,
                        const std::map<ClassId, std::vector<float>>& prototypes,
                        std::span<const FeatureVector> test, const EvalGroups& groups) {
    if (test.empty()) throw InputError("cannot evaluate on an empty test set");
    std::vector<ClassId> truth;
    truth.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!test[i].label) throw InputError("test sample " + std::to_string(i) + " is unlabeled");
        truth.push_back(*test[i].label);
    }
    const auto predicted = predict(m, prototypes, test);
    return score_predictions(truth, predicted, groups);
}

AccuracyReport evaluate(const EmbeddingModel& m, const PrototypeTable& protos,
                        std::span<const FeatureVector> test, const EvalGroups& groups) {
    return evaluate(m, protos.prototypes, test, groups);
}

nlohmann::json prototypes_to_json(const PrototypeTable& protos, const LabelSpace& labels) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, p] : protos.prototypes) j[labels.at(id).name] = p;
    return j;
}

} // namespace magneto
