#pragma once

#include <map>
#include <string>
#include <vector>

#include "magneto/binary_io.hpp"
#include "magneto/features.hpp"
#include "magneto/rng.hpp"

namespace magneto {

// Per-class store of model-ready (standardized) feature vectors kept on the
// edge device. Stored values are rounded to f32 precision on insertion so
// the in-memory set equals what the bundle file holds.
class SupportSet {
public:
    SupportSet() = default;
    SupportSet(std::size_t dim, std::size_t capacity_per_class);

    // Replaces the samples of `id`. More than capacity_per_class samples are
    // uniformly down-sampled with `rng`, keeping their relative order.
    void set_class(ClassId id, std::vector<FeatureVector> samples, Rng& rng);

    bool has_class(ClassId id) const { return samples_.contains(id); }
    const std::vector<FeatureVector>& samples(ClassId id) const;
    std::size_t count(ClassId id) const;
    std::size_t total() const;
    std::vector<ClassId> classes() const;
    // All samples in ascending class-id order.
    std::vector<FeatureVector> flatten() const;

    std::size_t dim() const { return dim_; }
    std::size_t capacity_per_class() const { return capacity_; }

    // Block layout: u32 class count, then per class u32 id, u32 rows and
    // rows x dim little-endian f32 values.
    void encode(ByteWriter& out) const;
    static SupportSet decode(ByteReader& in, std::size_t dim, std::size_t capacity);
    std::string digest() const;

    friend bool operator==(const SupportSet&, const SupportSet&) = default;

private:
    std::size_t dim_ = 0;
    std::size_t capacity_ = 0;
    std::map<ClassId, std::vector<FeatureVector>> samples_;
};

// Rounds every value to the nearest f32.
FeatureVector quantize_f32(FeatureVector v);

} // namespace magneto
