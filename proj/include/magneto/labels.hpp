#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace magneto {

using ClassId = std::uint32_t;

struct ActivityLabel {
    ClassId id = 0;
    std::string name;

    friend bool operator==(const ActivityLabel&, const ActivityLabel&) = default;
};

// Ordered set of activity labels with dense ids 0..K-1.
class LabelSpace {
public:
    LabelSpace() = default;
    // Ids are assigned in order. Throws ConfigError on duplicates or K < 2.
    explicit LabelSpace(const std::vector<std::string>& names);
    explicit LabelSpace(std::vector<ActivityLabel> labels);

    std::size_t size() const { return labels_.size(); }
    const std::vector<ActivityLabel>& labels() const { return labels_; }
    const ActivityLabel& at(ClassId id) const;
    bool contains(ClassId id) const { return id < labels_.size(); }
    std::optional<ClassId> find(const std::string& name) const;
    std::vector<std::string> names() const;

    // Copy with one more label appended (id = K). Throws ConflictError when
    // the name already exists.
    LabelSpace extended(const std::string& name) const;

    friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

private:
    void validate(std::size_t min_size) const;

    std::vector<ActivityLabel> labels_;
};

nlohmann::json to_json(const LabelSpace& space);
LabelSpace label_space_from_json(const nlohmann::json& j);

} // namespace magneto
