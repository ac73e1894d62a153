#include "magneto/support_set.hpp"

#include "magneto/error.hpp"

namespace magneto {

FeatureVector quantize_f32(FeatureVector v) {
    for (auto& x : v.values) x = static_cast<double>(static_cast<float>(x));
    return v;
}

SupportSet::SupportSet(std::size_t dim, std::size_t capacity_per_class)
    : dim_(dim), capacity_(capacity_per_class) {
    if (dim == 0) throw ConfigError("support set dimension must be >= 1");
    if (capacity_per_class == 0) throw ConfigError("support capacity must be >= 1");
}

void SupportSet::set_class(ClassId id, std::vector<FeatureVector> samples, Rng& rng) {
    for (const auto& s : samples) {
        if (s.size() != dim_) {
            throw InputError("support sample has " + std::to_string(s.size()) + " dims, expected " +
                             std::to_string(dim_));
        }
    }
    if (samples.size() > capacity_) {
        const auto keep = rng.choose(samples.size(), capacity_);
        std::vector<FeatureVector> kept;
        kept.reserve(keep.size());
        for (std::size_t i : keep) kept.push_back(std::move(samples[i]));
        samples = std::move(kept);
    }
    for (auto& s : samples) {
        s = quantize_f32(std::move(s));
        s.label = id;
    }
    samples_[id] = std::move(samples);
}

const std::vector<FeatureVector>& SupportSet::samples(ClassId id) const {
    auto it = samples_.find(id);
    if (it == samples_.end()) throw NotFoundError("support set has no class " + std::to_string(id));
    return it->second;
}

std::size_t SupportSet::count(ClassId id) const {
    auto it = samples_.find(id);
    return it == samples_.end() ? 0 : it->second.size();
}

std::size_t SupportSet::total() const {
    std::size_t n = 0;
    for (const auto& [_, v] : samples_) n += v.size();
    return n;
}

std::vector<ClassId> SupportSet::classes() const {
    std::vector<ClassId> ids;
    for (const auto& [id, _] : samples_) ids.push_back(id);
    return ids;
}

std::vector<FeatureVector> SupportSet::flatten() const {
    std::vector<FeatureVector> out;
    out.reserve(total());
    for (const auto& [_, v] : samples_) out.insert(out.end(), v.begin(), v.end());
    return out;
}

void SupportSet::encode(ByteWriter& out) const {
    out.put_u32(static_cast<std::uint32_t>(samples_.size()));
    for (const auto& [id, rows] : samples_) {
        out.put_u32(id);
        out.put_u32(static_cast<std::uint32_t>(rows.size()));
        for (const auto& r : rows) {
            for (double v : r.values) out.put_f32(static_cast<float>(v));
        }
    }
}

SupportSet SupportSet::decode(ByteReader& in, std::size_t dim, std::size_t capacity) {
    SupportSet s(dim, capacity);
    const auto classes = in.get_u32();
    for (std::uint32_t k = 0; k < classes; ++k) {
        const ClassId id = in.get_u32();
        const auto rows = in.get_u32();
        if (rows > capacity) throw FormatError("support class exceeds capacity");
        std::vector<FeatureVector> vs(rows);
        for (auto& v : vs) {
            v.label = id;
            v.values.resize(dim);
            for (auto& x : v.values) x = static_cast<double>(in.get_f32());
        }
        s.samples_[id] = std::move(vs);
    }
    return s;
}

std::string SupportSet::digest() const {
    ByteWriter w;
    encode(w);
    return digest_hex(fnv1a64(w.bytes()));
}

} // namespace magneto
