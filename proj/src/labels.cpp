#include "magneto/labels.hpp"

#include <set>

#include "magneto/error.hpp"

namespace magneto {

LabelSpace::LabelSpace(const std::vector<std::string>& names) {
    labels_.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        labels_.push_back({static_cast<ClassId>(i), names[i]});
    }
    validate(2);
}

LabelSpace::LabelSpace(std::vector<ActivityLabel> labels) : labels_(std::move(labels)) {
    validate(2);
}

void LabelSpace::validate(std::size_t min_size) const {
    if (labels_.size() < min_size) {
        throw ConfigError("label space needs at least " + std::to_string(min_size) +
                          " classes, got " + std::to_string(labels_.size()));
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i].id != i) {
            throw ConfigError("label ids must be dense from 0; label '" + labels_[i].name +
                              "' has id " + std::to_string(labels_[i].id));
        }
        if (labels_[i].name.empty()) throw ConfigError("empty label name");
        if (!seen.insert(labels_[i].name).second) {
            throw ConfigError("duplicate label name '" + labels_[i].name + "'");
        }
    }
}

const ActivityLabel& LabelSpace::at(ClassId id) const {
    if (!contains(id)) throw NotFoundError("no label with id " + std::to_string(id));
    return labels_[id];
}

std::optional<ClassId> LabelSpace::find(const std::string& name) const {
    for (const auto& l : labels_) {
        if (l.name == name) return l.id;
    }
    return std::nullopt;
}

std::vector<std::string> LabelSpace::names() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.name);
    return out;
}

LabelSpace LabelSpace::extended(const std::string& name) const {
    if (find(name)) throw ConflictError("label '" + name + "' already exists");
    auto labels = labels_;
    labels.push_back({static_cast<ClassId>(labels.size()), name});
    return LabelSpace(std::move(labels));
}

nlohmann::json to_json(const LabelSpace& space) { return space.names(); }

LabelSpace label_space_from_json(const nlohmann::json& j) {
    return LabelSpace(j.get<std::vector<std::string>>());
}

} // namespace magneto
