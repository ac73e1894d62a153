#include "magneto/edge.hpp"

#include <algorithm>
#include <map>

namespace magneto {

namespace {

constexpr char kBundleMagic[] = "MGB1";
constexpr std::uint16_t kBundleVersion = 1;

// tags separating the random streams drawn from a bundle seed
enum : std::uint64_t { kInitStream = 1, kPairStream = 2, kSupportStream = 3, kCapacityStream = 4 };

void check_labels(std::span<const FeatureVector> xs, const LabelSpace& labels) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!xs[i].label || !labels.contains(*xs[i].label)) {
            throw InputError("feature vector " + std::to_string(i) + " has no label in the label space");
        }
    }
}

} // namespace

void EdgeBundle::validate() const {
    const std::size_t dims = schema.total_dims();
    if (standardizer.dims() != dims) throw ContractError("standardizer does not match schema");
    if (model.config.input_dim != dims) throw ContractError("model input does not match schema");
    if (support.dim() != dims) throw ContractError("support set dimension does not match schema");
    for (ClassId id : support.classes()) {
        if (!labels.contains(id)) throw ContractError("support class outside label space");
    }
    for (const auto& [id, p] : protos.prototypes) {
        if (!labels.contains(id)) throw ContractError("prototype class outside label space");
        if (p.size() != model.config.embedding_dim()) {
            throw ContractError("prototype length does not match embedding dimension");
        }
    }
}

std::vector<FeatureVector> preprocess(const EdgeBundle& bundle, std::span<const FeatureVector> raw) {
    return bundle.standardizer.apply(raw);
}

CloudModel pretrain(std::span<const FeatureVector> raw, const NetConfig& net,
                    const TrainConfig& cfg) {
    if (raw.empty()) throw InputError("initial dataset is empty");
    CloudModel out;
    out.standardizer = Standardizer::fit(raw);
    const auto pool = out.standardizer.apply(raw);
    out.model = init_model<float>(net);
    out.trace = train_epochs(out.model, pool, cfg);
    return out;
}

EdgeBundle package_bundle(const FeatureSchema& schema, const LabelSpace& labels, CloudModel cloud,
                          std::span<const FeatureVector> raw, std::size_t support_per_class,
                          std::uint64_t seed) {
    check_labels(raw, labels);
    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < raw.size(); ++i) members[*raw[i].label].push_back(i);

    EdgeBundle b;
    b.schema = schema;
    b.standardizer = std::move(cloud.standardizer);
    b.labels = labels;
    b.model = std::move(cloud.model);
    b.seed = seed;
    b.support = SupportSet(schema.total_dims(), support_per_class);
    b.last_trace = std::move(cloud.trace);

    Rng rng(derive_seed(seed, kSupportStream));
    for (const auto& label : labels.labels()) {
        const auto& idx = members[label.id];
        if (idx.size() < support_per_class) {
            b.warnings.push_back("class '" + label.name + "' has " + std::to_string(idx.size()) +
                                 " samples, fewer than support_per_class " +
                                 std::to_string(support_per_class));
        }
        std::vector<FeatureVector> picked;
        for (std::size_t k : rng.choose(idx.size(), support_per_class)) {
            picked.push_back(b.standardizer.apply(raw[idx[k]]));
        }
        b.support.set_class(label.id, std::move(picked), rng);
    }
    b.protos = compute_prototypes(b.model, b.support, b.labels);
    b.validate();
    return b;
}

EdgeBundle cloud_init(const Dataset& train, const FeatureSchema& schema, NetConfig net,
                      TrainConfig cfg, std::size_t support_per_class, std::uint64_t seed) {
    for (const auto& l : train.label_space.labels()) {
        if (train.count_label(l.id) == 0) {
            throw InputError("training data has no windows of class '" + l.name + "'");
        }
    }
    const auto raw = extract_batch(train.windows, schema);
    net.input_dim = schema.total_dims();
    net.init_seed = derive_seed(seed, kInitStream);
    cfg.seed = derive_seed(seed, kPairStream);
    auto cloud = pretrain(raw, net, cfg);
    return package_bundle(schema, train.label_space, std::move(cloud), raw, support_per_class, seed);
}

EdgeBundle collect_new_class(const EdgeBundle& bundle, std::span<const FeatureVector> raw_samples,
                             const ActivityLabel& label) {
    if (raw_samples.empty()) throw InputError("no samples for the new class");
    if (bundle.labels.find(label.name) || bundle.labels.contains(label.id)) {
        throw ConflictError("label '" + label.name + "' (id " + std::to_string(label.id) +
                            ") already exists");
    }
    if (label.id != bundle.labels.size()) {
        throw ConfigError("new label id must be " + std::to_string(bundle.labels.size()));
    }
    EdgeBundle b = bundle;
    b.labels = bundle.labels.extended(label.name);
    ++b.revision;
    Rng rng(derive_seed(b.seed, kCapacityStream, b.revision));
    b.support.set_class(label.id, preprocess(b, raw_samples), rng);
    b.last_trace = {};
    return b;
}

EdgeBundle edge_retrain(const EdgeBundle& bundle, const TrainConfig& cfg, RetrainMode mode,
                        const EvalHook& hook) {
    for (const auto& l : bundle.labels.labels()) {
        if (bundle.support.count(l.id) == 0) {
            throw CoverageError("support set has no samples of class '" + l.name + "'");
        }
    }
    EdgeBundle b = bundle;
    ++b.revision;
    if (mode == RetrainMode::from_scratch) {
        NetConfig net = b.model.config;
        net.init_seed = derive_seed(b.seed, kInitStream, b.revision);
        b.model = init_model<float>(net);
    }
    TrainConfig run_cfg = cfg;
    run_cfg.seed = derive_seed(cfg.seed, b.revision);
    const auto pool = b.support.flatten();
    b.last_trace = train_epochs(b.model, pool, run_cfg, hook);
    b.protos = compute_prototypes(b.model, b.support, b.labels);
    return b;
}

EdgeBundle recalibrate(const EdgeBundle& bundle, const std::string& label_name,
                       std::span<const FeatureVector> raw_samples, const TrainConfig& cfg,
                       RetrainMode mode, const EvalHook& hook) {
    const auto id = bundle.labels.find(label_name);
    if (!id) throw NotFoundError("no class named '" + label_name + "'");
    if (raw_samples.empty()) throw InputError("no samples for recalibration");
    EdgeBundle b = bundle;
    ++b.revision;
    Rng rng(derive_seed(b.seed, kCapacityStream, b.revision));
    b.support.set_class(*id, preprocess(b, raw_samples), rng);
    return edge_retrain(b, cfg, mode, hook);
}

Classification infer(const EdgeBundle& bundle, const SensorWindow& window) {
    const auto raw = extract(window, bundle.schema);
    return classify(bundle.model, bundle.protos, bundle.standardizer.apply(raw));
}

Bytes encode_bundle(const EdgeBundle& b) {
    b.validate();
    const auto checkpoint = encode_checkpoint(b.model, true);
    nlohmann::json manifest;
    manifest["schema"] = to_json(b.schema);
    manifest["labels"] = to_json(b.labels);
    manifest["revision"] = b.revision;
    manifest["seed"] = b.seed;
    manifest["feature_dims"] = b.schema.total_dims();
    manifest["embedding_dims"] = b.model.config.embedding_dim();
    manifest["capacity_per_class"] = b.support.capacity_per_class();
    manifest["warnings"] = b.warnings;
    manifest["digests"] = {{"model", model_digest(b.model)},
                           {"support", b.support.digest()},
                           {"prototype_model", b.protos.model_id},
                           {"prototype_support", b.protos.support_digest}};

    ByteWriter out;
    out.put_magic(kBundleMagic);
    out.put_u16(kBundleVersion);
    out.put_string(manifest.dump());
    out.put_u64(checkpoint.size());
    out.put_bytes(checkpoint);
    out.put_u32(static_cast<std::uint32_t>(b.standardizer.dims()));
    for (double v : b.standardizer.mean()) out.put_f64(v);
    for (double v : b.standardizer.stddev()) out.put_f64(v);
    b.support.encode(out);
    out.put_u32(static_cast<std::uint32_t>(b.protos.prototypes.size()));
    for (const auto& [id, p] : b.protos.prototypes) {
        out.put_u32(id);
        out.put_u32(static_cast<std::uint32_t>(p.size()));
        for (float v : p) out.put_f32(v);
    }
    return std::move(out).bytes();
}

EdgeBundle decode_bundle(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kBundleMagic);
    const auto version = in.get_u16();
    if (version != kBundleVersion) throw FormatError("unsupported bundle version " + std::to_string(version));

    EdgeBundle b;
    std::size_t capacity = 0;
    std::string model_digest_expected, support_digest_expected;
    try {
        const auto manifest = nlohmann::json::parse(in.get_string());
        b.schema = schema_from_json(manifest.at("schema"));
        b.labels = label_space_from_json(manifest.at("labels"));
        b.revision = manifest.at("revision").get<std::uint32_t>();
        b.seed = manifest.at("seed").get<std::uint64_t>();
        capacity = manifest.at("capacity_per_class").get<std::size_t>();
        b.warnings = manifest.at("warnings").get<std::vector<std::string>>();
        const auto& d = manifest.at("digests");
        model_digest_expected = d.at("model").get<std::string>();
        support_digest_expected = d.at("support").get<std::string>();
        b.protos.model_id = d.at("prototype_model").get<std::string>();
        b.protos.support_digest = d.at("prototype_support").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bundle manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("bundle manifest: ") + e.what());
    }

    const auto checkpoint_size = in.get_u64();
    b.model = decode_checkpoint(in.get_bytes(static_cast<std::size_t>(checkpoint_size)));
    const auto dims = in.get_u32();
    std::vector<double> mean(dims), stddev(dims);
    for (auto& v : mean) v = in.get_f64();
    for (auto& v : stddev) v = in.get_f64();
    b.standardizer = Standardizer(std::move(mean), std::move(stddev));
    b.support = SupportSet::decode(in, b.schema.total_dims(), capacity);
    const auto count = in.get_u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        const ClassId id = in.get_u32();
        std::vector<float> p(in.get_u32());
        for (auto& v : p) v = in.get_f32();
        b.protos.prototypes[id] = std::move(p);
    }
    if (!in.at_end()) throw FormatError("trailing bytes after bundle");
    if (model_digest(b.model) != model_digest_expected) throw FormatError("model digest mismatch");
    if (b.support.digest() != support_digest_expected) throw FormatError("support digest mismatch");
    b.validate();
    return b;
}

} // namespace magneto
