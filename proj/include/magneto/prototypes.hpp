#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magneto/net.hpp"
#include "magneto/support_set.hpp"

namespace magneto {

struct PrototypeTable {
    std::map<ClassId, std::vector<float>> prototypes;
    std::string model_id;
    std::string support_digest;

    std::size_t size() const { return prototypes.size(); }

    friend bool operator==(const PrototypeTable&, const PrototypeTable&) = default;
};

// Class means of the support embeddings, re-normalized when the model
// normalizes its outputs. Every label must have at least one sample.
PrototypeTable compute_prototypes(const EmbeddingModel& m, const SupportSet& support,
                                  const LabelSpace& labels);

// Same as compute_prototypes without provenance; used on hot evaluation paths.
std::map<ClassId, std::vector<float>> prototype_vectors(const EmbeddingModel& m,
                                                        const SupportSet& support,
                                                        const LabelSpace& labels);

struct Classification {
    ClassId label = 0;
    std::map<ClassId, double> distances;
};

// Nearest prototype in Euclidean distance; ties go to the lowest class id.
Classification classify_embedding(const std::map<ClassId, std::vector<float>>& prototypes,
                                  std::span<const float> embedding);
Classification classify(const EmbeddingModel& m, const PrototypeTable& protos,
                        const FeatureVector& x);

struct ClassAccuracy {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
};

// Classes whose accuracies feed the "old" macro average and the "new" figure.
struct EvalGroups {
    std::vector<ClassId> old_classes;
    std::optional<ClassId> new_class;
};

struct AccuracyReport {
    std::map<ClassId, ClassAccuracy> per_class; // classes present in the test set
    double overall = 0.0;                       // micro accuracy
    double old_macro = std::nan("");            // NaN when no old class was tested
    double new_class = std::nan("");            // NaN when the new class was not tested
    std::vector<std::vector<std::size_t>> confusion; // [truth][predicted]
    std::size_t total = 0;
};

AccuracyReport score_predictions(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                 const EvalGroups& groups);

std::vector<ClassId> predict(const EmbeddingModel& m,
                             const std::map<ClassId, std::vector<float>>& prototypes,
                             std::span<const FeatureVector> xs);

AccuracyReport evaluate(const EmbeddingModel& m, const PrototypeTable& protos,
                        std::span<const FeatureVector> test, const EvalGroups& groups);
AccuracyReport evaluate(const EmbeddingModel& m,
                        const std::map<ClassId, std::vector<float>>& prototypes,
                        std::span<const FeatureVector> test, const EvalGroups& groups);

// {"<label name>": [floats], ...}
nlohmann::json prototypes_to_json(const PrototypeTable& protos, const LabelSpace& labels);

} // namespace magneto
