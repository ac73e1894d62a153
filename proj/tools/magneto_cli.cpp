// magneto: command-line front end for data generation, the cloud/edge
// bundle lifecycle and the experiment protocols.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "magneto/binary_io.hpp"
#include "magneto/edge.hpp"
#include "magneto/error.hpp"
#include "magneto/experiment.hpp"

using namespace magneto;

namespace {

struct TrainingOptions {
    std::string config;
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
    RetrainMode mode = RetrainMode::warm_start;
    bool scratch = false;
};

nlohmann::json read_json(const std::string& path) {
    const auto bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// {"net": {...}, "train": {...}}; both optional.
TrainConfig train_config(const TrainingOptions& o, std::uint64_t seed) {
    TrainConfig cfg;
    if (!o.config.empty()) {
        const auto j = read_json(o.config);
        if (j.contains("train")) cfg = train_config_from_json(j.at("train"));
    }
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.learning_rate) cfg.adam.learning_rate = *o.learning_rate;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

NetConfig net_config(const std::string& path) {
    if (path.empty()) return {};
    const auto j = read_json(path);
    return j.contains("net") ? net_config_from_json(j.at("net")) : NetConfig{};
}

Dataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }
EdgeBundle load_bundle(const std::string& path) { return decode_bundle(read_file(path)); }

// Raw features of every window labelled `name` in the dataset, at most `limit`.
std::vector<FeatureVector> class_samples(const EdgeBundle& bundle, const Dataset& ds, const std::string& name,
                                         std::size_t limit, std::uint64_t seed) {
    const auto id = ds.label_space.find(name);
    if (!id) throw NotFoundError("dataset has no class '" + name + "'");
    std::vector<SensorWindow> windows;
    for (const auto& w : ds.windows) {
        if (w.label == *id) windows.push_back(w);
    }
    if (windows.empty()) throw InputError("dataset has no windows of class '" + name + "'");
    if (limit > 0 && windows.size() > limit) {
        Rng rng(seed);
        std::vector<SensorWindow> picked;
        for (std::size_t i : rng.choose(windows.size(), limit)) picked.push_back(windows[i]);
        windows = std::move(picked);
    }
    return extract_batch(windows, bundle.schema);
}

void write_trace(const std::string& path, const TrainingTrace& trace) {
    if (!path.empty()) write_text(path, trace.to_csv());
}

void report_bundle(const EdgeBundle& b, const std::string& path) {
    std::cout << path << ": revision " << b.revision << ", " << b.labels.size() << " classes, "
              << b.support.total() << " support vectors, model " << model_digest(b.model) << "\n";
    for (const auto& w : b.warnings) std::cerr << "warning: " << w << "\n";
}

void add_training_options(CLI::App* cmd, TrainingOptions& o) {
    cmd->add_option("--config", o.config, "JSON with optional \"net\" and \"train\" sections");
    cmd->add_option("--epochs", o.epochs, "Override training epochs");
    cmd->add_option("--learning-rate", o.learning_rate, "Override Adam learning rate");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MAGNETO incremental activity recognition"};
    app.require_subcommand(1);

    // generate-data
    std::string profiles, out;
    std::size_t per_class = 600;
    std::uint64_t seed = 1;
    auto* gen = app.add_subcommand("generate-data", "Generate a synthetic labelled dataset");
    gen->add_option("--profiles", profiles, "Class profile JSON")->required();
    gen->add_option("--per-class", per_class, "Windows per class")->required();
    gen->add_option("--seed", seed, "Generator seed")->required();
    gen->add_option("--out", out, "Dataset file")->required();

    // split-data
    std::string data, train_out, test_out;
    double test_fraction = 0.2, min_gap = 10.0;
    auto* split = app.add_subcommand("split-data", "Session-aware train/test split with a time gap");
    split->add_option("--data", data, "Dataset file")->required();
    split->add_option("--test-fraction", test_fraction, "Test share per class");
    split->add_option("--min-gap", min_gap, "Minimum train/test gap in seconds");
    split->add_option("--train-out", train_out, "Train dataset file")->required();
    split->add_option("--test-out", test_out, "Test dataset file")->required();

    // pretrain
    std::string schema_path, checkpoint_out, trace_out;
    std::size_t support_per_class = 100;
    TrainingOptions pre_opts;
    auto* pre = app.add_subcommand("pretrain", "Cloud pretraining; writes an edge bundle");
    pre->add_option("--data", data, "Training dataset file")->required();
    pre->add_option("--schema", schema_path, "Feature schema JSON (default: 86-dim)");
    pre->add_option("--support-per-class", support_per_class, "Support vectors kept per class");
    pre->add_option("--seed", seed, "Seed for init, pair sampling and support choice");
    pre->add_option("--out", out, "Bundle file")->required();
    pre->add_option("--checkpoint", checkpoint_out, "Also write the model checkpoint");
    pre->add_option("--trace", trace_out, "Training trace CSV");
    add_training_options(pre, pre_opts);

    // add-class
    std::string bundle_path, label;
    std::size_t samples = 0;
    TrainingOptions add_opts;
    auto* add = app.add_subcommand("add-class", "Collect a new class on the edge and retrain");
    add->add_option("--bundle", bundle_path, "Input bundle")->required();
    add->add_option("--data", data, "Dataset holding the new class windows")->required();
    add->add_option("--label", label, "Name of the new class")->required();
    add->add_option("--samples", samples, "Use at most this many windows (0: all)");
    add->add_option("--seed", seed, "Seed for sample choice and retraining");
    add->add_option("--out", out, "Output bundle")->required();
    add->add_option("--checkpoint", checkpoint_out, "Also write the model checkpoint");
    add->add_option("--trace", trace_out, "Training trace CSV");
    add->add_flag("--from-scratch", add_opts.scratch, "Reinitialize the model before retraining");
    add_training_options(add, add_opts);

    // recalibrate
    TrainingOptions rec_opts;
    auto* rec = app.add_subcommand("recalibrate", "Replace one class's support samples and retrain");
    rec->add_option("--bundle", bundle_path, "Input bundle")->required();
    rec->add_option("--data", data, "Dataset holding the class windows")->required();
    rec->add_option("--label", label, "Existing class name")->required();
    rec->add_option("--samples", samples, "Use at most this many windows (0: all)");
    rec->add_option("--seed", seed, "Seed for sample choice and retraining");
    rec->add_option("--out", out, "Output bundle")->required();
    rec->add_option("--checkpoint", checkpoint_out, "Also write the model checkpoint");
    rec->add_option("--trace", trace_out, "Training trace CSV");
    rec->add_flag("--from-scratch", rec_opts.scratch, "Reinitialize the model before retraining");
    add_training_options(rec, rec_opts);

    // infer
    auto* inf = app.add_subcommand("infer", "Classify every window of a dataset");
    inf->add_option("--bundle", bundle_path, "Bundle")->required();
    inf->add_option("--data", data, "Dataset file")->required();
    inf->add_option("--out", out, "Predictions CSV")->required();

    // experiment
    std::string protocol, spec_path;
    bool check = false;
    auto* exp = app.add_subcommand("experiment", "Run an experiment protocol and write CSV reports");
    exp->add_option("--protocol", protocol, "single, sweep or sequential")
        ->required()
        ->check(CLI::IsMember({"single", "sweep", "sequential"}));
    exp->add_option("--spec", spec_path, "Experiment spec JSON")->required();
    exp->add_option("--out", out, "Output directory")->required();
    exp->add_flag("--check", check, "Verify the protocol targets; exit 1 when one fails");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto set = load_profiles(profiles);
            const auto ds = generate_dataset(set, per_class, seed);
            write_file(out, encode_dataset(ds));
            std::cout << out << ": " << ds.windows.size() << " windows, " << ds.label_space.size()
                      << " classes, " << ds.sessions.size() << " sessions\n";
        } else if (*split) {
            const auto [train, test] = gap_split(load_dataset(data), test_fraction, min_gap);
            write_file(train_out, encode_dataset(train));
            write_file(test_out, encode_dataset(test));
            std::cout << "train " << train.windows.size() << ", test " << test.windows.size() << " windows\n";
        } else if (*pre) {
            const auto ds = load_dataset(data);
            const auto schema = schema_path.empty() ? default_schema() : load_schema(schema_path);
            const auto bundle = cloud_init(ds, schema, net_config(pre_opts.config), train_config(pre_opts, 0),
                                           support_per_class, seed);
            write_file(out, encode_bundle(bundle));
            if (!checkpoint_out.empty()) write_file(checkpoint_out, encode_checkpoint(bundle.model));
            write_trace(trace_out, bundle.last_trace);
            report_bundle(bundle, out);
        } else if (*add || *rec) {
            const auto& o = *add ? add_opts : rec_opts;
            const auto bundle = load_bundle(bundle_path);
            const auto raw = class_samples(bundle, load_dataset(data), label, samples, derive_seed(seed, 1));
            const auto cfg = train_config(o, derive_seed(seed, 2));
            const auto mode = o.scratch ? RetrainMode::from_scratch : RetrainMode::warm_start;
            EdgeBundle result;
            if (*add) {
                const ActivityLabel l{static_cast<ClassId>(bundle.labels.size()), label};
                result = edge_retrain(collect_new_class(bundle, raw, l), cfg, mode);
            } else {
                result = recalibrate(bundle, label, raw, cfg, mode);
            }
            write_file(out, encode_bundle(result));
            if (!checkpoint_out.empty()) write_file(checkpoint_out, encode_checkpoint(result.model));
            write_trace(trace_out, result.last_trace);
            report_bundle(result, out);
        } else if (*inf) {
            const auto bundle = load_bundle(bundle_path);
            const auto ds = load_dataset(data);
            std::string csv = "window,start_time,truth,predicted,distance\n";
            std::size_t correct = 0, labelled = 0;
            for (std::size_t i = 0; i < ds.windows.size(); ++i) {
                const auto& w = ds.windows[i];
                const auto c = infer(bundle, w);
                const auto& predicted = bundle.labels.at(c.label).name;
                std::string truth = w.label ? ds.label_space.at(*w.label).name : "";
                if (w.label) {
                    ++labelled;
                    correct += truth == predicted ? 1 : 0;
                }
                csv += std::to_string(i) + "," + format_real(w.start_time) + "," + truth + "," + predicted +
                       "," + format_real(c.distances.at(c.label)) + "\n";
            }
            write_text(out, csv);
            if (labelled > 0) {
                std::cout << "accuracy " << format_real(static_cast<double>(correct) / labelled) << " on "
                          << labelled << " labelled windows\n";
            }
        } else if (*exp) {
            auto spec = load_experiment_spec(spec_path);
            spec.protocol = protocol_from_string(protocol);
            const auto report = run_experiment(spec, [](const std::string& line) { std::cerr << line << "\n"; });
            emit_report(report, out);
            for (const auto& g : report.groups) {
                std::cout << g.group << ": runs " << g.runs << ", zero-shot new " << format_real(g.zero_shot_new)
                          << ", final new " << format_real(g.final_new) << ", final old "
                          << format_real(g.final_old) << ", final " << format_real(g.convergence.final_accuracy)
                          << ", convergence batch " << g.convergence.convergence_batch << "\n";
            }
            for (const auto& s : report.stages) {
                std::cout << "stage " << s.stage << " (" << s.classes << " classes): " << format_real(s.mean)
                          << " +- " << format_real(s.stddev) << "\n";
            }
            if (check) {
                bool ok = true;
                for (const auto& c : check_report(report)) {
                    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
                    ok = ok && c.passed;
                }
                if (!ok) return 1;
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
