#include "magneto/net.hpp"

namespace magneto {

namespace {

constexpr char kCheckpointMagic[] = "MGN1";
constexpr std::uint16_t kCheckpointVersion = 1;
constexpr std::uint8_t kFlagAdam = 0x01;

void put_tensor(ByteWriter& out, const DenseLayer<float>& t) {
    for (Eigen::Index r = 0; r < t.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.weight.cols(); ++c) out.put_f32(t.weight(r, c));
    }
    for (Eigen::Index r = 0; r < t.bias.size(); ++r) out.put_f32(t.bias(r));
}

void get_tensor(ByteReader& in, DenseLayer<float>& t) {
    for (Eigen::Index r = 0; r < t.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.weight.cols(); ++c) t.weight(r, c) = in.get_f32();
    }
    for (Eigen::Index r = 0; r < t.bias.size(); ++r) t.bias(r) = in.get_f32();
}

} // namespace

void NetConfig::validate() const {
    if (input_dim == 0) throw ConfigError("input_dim must be >= 1");
    if (layer_widths.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t i = 0; i < layer_widths.size(); ++i) {
        if (layer_widths[i] == 0) throw ConfigError("layer " + std::to_string(i) + " has width 0");
    }
}

std::size_t NetConfig::parameter_count() const {
    std::size_t total = 0;
    std::size_t fan_in = input_dim;
    for (std::size_t w : layer_widths) {
        total += fan_in * w + w;
        fan_in = w;
    }
    return total;
}

nlohmann::json to_json(const NetConfig& cfg) {
    return {{"input_dim", cfg.input_dim},
            {"layer_widths", cfg.layer_widths},
            {"hidden_activation", "relu"},
            {"output_normalize", cfg.output_normalize},
            {"init_seed", cfg.init_seed}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig cfg;
    try {
        cfg.input_dim = j.value("input_dim", cfg.input_dim);
        cfg.layer_widths = j.value("layer_widths", cfg.layer_widths);
        if (j.value("hidden_activation", std::string("relu")) != "relu") {
            throw ConfigError("only relu hidden activations are supported");
        }
        cfg.output_normalize = j.value("output_normalize", cfg.output_normalize);
        cfg.init_seed = j.value("init_seed", cfg.init_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("net config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning rate must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(epsilon >= 0.0)) throw ConfigError("adam epsilon must be non-negative");
}

Bytes encode_checkpoint(const EmbeddingModel& m, bool with_adam) {
    ByteWriter out;
    out.put_magic(kCheckpointMagic);
    out.put_u16(kCheckpointVersion);
    out.put_u8(with_adam ? kFlagAdam : 0);
    out.put_string(to_json(m.config).dump());
    for (const auto& layer : m.layers) put_tensor(out, layer);
    if (with_adam) {
        out.put_u64(m.step);
        for (const auto& mom : m.adam) {
            put_tensor(out, mom.first);
            put_tensor(out, mom.second);
        }
    }
    return std::move(out).bytes();
}

EmbeddingModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kCheckpointMagic);
    const auto version = in.get_u16();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto flags = in.get_u8();
    NetConfig cfg;
    try {
        cfg = net_config_from_json(nlohmann::json::parse(in.get_string()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
    // shapes (and zeroed Adam state) come from the config
    auto m = init_model<float>(cfg);
    for (auto& layer : m.layers) get_tensor(in, layer);
    if (flags & kFlagAdam) {
        m.step = in.get_u64();
        for (auto& mom : m.adam) {
            get_tensor(in, mom.first);
            get_tensor(in, mom.second);
        }
    }
    if (!in.at_end()) throw FormatError("trailing bytes after checkpoint");
    return m;
}

std::string model_digest(const EmbeddingModel& m) {
    return digest_hex(fnv1a64(encode_checkpoint(m, false)));
}

} // namespace magneto
