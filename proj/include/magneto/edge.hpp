#pragma once

#include <span>
#include <string>
#include <vector>

#include "magneto/contrastive.hpp"
#include "magneto/features.hpp"
#include "magneto/net.hpp"
#include "magneto/prototypes.hpp"
#include "magneto/sensor_data.hpp"
#include "magneto/support_set.hpp"

namespace magneto {

enum class RetrainMode { warm_start, from_scratch };

// Everything the edge device needs for inference and on-device learning:
// pre-processing (schema + standardizer), the model, the support set and
// the current prototypes. Holds feature vectors only, never raw windows.
struct EdgeBundle {
    FeatureSchema schema;
    Standardizer standardizer;
    LabelSpace labels;
    EmbeddingModel model;
    SupportSet support;
    PrototypeTable protos;
    std::uint32_t revision = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
    TrainingTrace last_trace; // in-memory only

    // Throws ContractError when dimensions or coverage disagree.
    void validate() const;
};

struct CloudModel {
    Standardizer standardizer;
    EmbeddingModel model;
    TrainingTrace trace;
};

// Fits the standardizer on `raw` and trains a fresh model on the
// standardized vectors. net.input_dim must equal the feature length.
CloudModel pretrain(std::span<const FeatureVector> raw, const NetConfig& net,
                    const TrainConfig& cfg);

// Draws support_per_class vectors per class uniformly without replacement
// from `raw` (standardized), computes prototypes and packs the bundle. A
// class with fewer vectors contributes all of them and a warning is recorded.
EdgeBundle package_bundle(const FeatureSchema& schema, const LabelSpace& labels, CloudModel cloud,
                          std::span<const FeatureVector> raw, std::size_t support_per_class,
                          std::uint64_t seed);

// Feature extraction + pretrain + package_bundle. `seed` drives model
// initialization, pair sampling and support selection.
EdgeBundle cloud_init(const Dataset& train, const FeatureSchema& schema, NetConfig net,
                      TrainConfig cfg, std::size_t support_per_class, std::uint64_t seed);

// Adds a new class (id must be K) and stores its standardized samples in the
// support set, down-sampled to capacity. Prototypes are left untouched
// until the next edge_retrain.
EdgeBundle collect_new_class(const EdgeBundle& bundle, std::span<const FeatureVector> raw_samples,
                             const ActivityLabel& label);

// Retrains on the whole support set (warm start by default) and recomputes
// every prototype. The pair-sampling seed is cfg.seed mixed with the bundle
// revision.
EdgeBundle edge_retrain(const EdgeBundle& bundle, const TrainConfig& cfg,
                        RetrainMode mode = RetrainMode::warm_start, const EvalHook& hook = {});

// Swaps the support samples of an existing class for new ones, then retrains.
EdgeBundle recalibrate(const EdgeBundle& bundle, const std::string& label_name,
                       std::span<const FeatureVector> raw_samples, const TrainConfig& cfg,
                       RetrainMode mode = RetrainMode::warm_start, const EvalHook& hook = {});

// extract -> standardize -> embed -> nearest prototype.
Classification infer(const EdgeBundle& bundle, const SensorWindow& window);

// Standardizes raw extracted features with the bundle's pre-processing.
std::vector<FeatureVector> preprocess(const EdgeBundle& bundle, std::span<const FeatureVector> raw);

// "MGB1", u16 version, u32-length JSON manifest, u64-length model checkpoint,
// standardizer block (u32 dims, f64 means, f64 stddevs), support block,
// prototype block (u32 count, then u32 id, u32 dim, f32 values per class).
Bytes encode_bundle(const EdgeBundle& bundle);
EdgeBundle decode_bundle(std::span<const std::uint8_t> bytes);

} // namespace magneto
