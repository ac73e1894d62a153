#include "magneto/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <unordered_set>

namespace magneto {

namespace {

struct MeanStd {
    double mean = std::nan("");
    double stddev = std::nan("");
    std::size_t n = 0;
};

// population statistics over the non-NaN entries
MeanStd mean_std(std::span<const double> xs) {
    MeanStd r;
    double sum = 0.0;
    for (double x : xs) {
        if (std::isnan(x)) continue;
        sum += x;
        ++r.n;
    }
    if (r.n == 0) return r;
    r.mean = sum / static_cast<double>(r.n);
    double ss = 0.0;
    for (double x : xs) {
        if (std::isnan(x)) continue;
        ss += (x - r.mean) * (x - r.mean);
    }
    r.stddev = std::sqrt(ss / static_cast<double>(r.n));
    return r;
}

std::vector<FeatureVector> select_relabel(std::span<const FeatureVector> xs,
                                          const std::map<ClassId, ClassId>& mapping) {
    std::vector<FeatureVector> out;
    for (const auto& x : xs) {
        auto it = mapping.find(*x.label);
        if (it == mapping.end()) continue;
        out.push_back(x);
        out.back().label = it->second;
    }
    return out;
}

std::uint64_t vector_digest(const FeatureVector& v) {
    ByteWriter w;
    for (double x : v.values) w.put_f32(static_cast<float>(x));
    return fnv1a64(w.bytes());
}

std::unordered_set<std::uint64_t> digests(const Standardizer& s, std::span<const FeatureVector> raw) {
    std::unordered_set<std::uint64_t> out;
    for (const auto& x : raw) out.insert(vector_digest(s.apply(x)));
    return out;
}

AccuracySnapshot snapshot(const AccuracyReport& r) { return {r.overall, r.new_class, r.old_macro}; }

EvalGroups groups_for(std::size_t old_count, std::optional<ClassId> new_id) {
    EvalGroups g;
    for (std::size_t i = 0; i < old_count; ++i) g.old_classes.push_back(static_cast<ClassId>(i));
    g.new_class = new_id;
    return g;
}

std::vector<double> overall_series(const TrainingTrace& trace) {
    std::vector<double> out;
    for (const auto& r : trace.rows) {
        if (r.accuracy) out.push_back(r.accuracy->overall);
    }
    return out;
}

// Maps an index into the evaluated subsequence back to a batch index.
std::size_t evaluated_batch(const TrainingTrace& trace, std::size_t k) {
    std::size_t seen = 0;
    for (const auto& r : trace.rows) {
        if (!r.accuracy) continue;
        if (seen++ == k) return r.batch_index;
    }
    return k;
}

void fill_audit(RunRecord& rec, const TrainingTrace& trace) {
    rec.pairs_min = std::numeric_limits<std::size_t>::max();
    rec.pairs_max = 0;
    for (const auto& r : trace.rows) {
        rec.pairs_min = std::min(rec.pairs_min, r.pairs);
        rec.pairs_max = std::max(rec.pairs_max, r.pairs);
    }
    if (trace.rows.empty()) rec.pairs_min = 0;
}

void fill_convergence(RunRecord& rec, const ExperimentSpec& spec) {
    const auto series = overall_series(rec.trace);
    if (series.empty()) return;
    rec.convergence = convergence_batch(series, spec.tolerance, spec.final_window);
    rec.convergence.convergence_batch = evaluated_batch(rec.trace, rec.convergence.convergence_batch);
}

// Support membership and test disjointness, checked through f32 digests.
void audit_support(RunRecord& rec, const EdgeBundle& bundle, ClassId new_id,
                   std::span<const FeatureVector> initial_train,
                   std::span<const FeatureVector> new_train, std::span<const FeatureVector> test) {
    const auto initial = digests(bundle.standardizer, initial_train);
    const auto fresh = digests(bundle.standardizer, new_train);
    const auto held_out = digests(bundle.standardizer, test);
    rec.support_subset = true;
    rec.disjoint = true;
    for (ClassId id : bundle.support.classes()) {
        const auto& pool = id == new_id ? fresh : initial;
        for (const auto& v : bundle.support.samples(id)) {
            const auto d = vector_digest(v);
            if (!pool.contains(d)) rec.support_subset = false;
            if (held_out.contains(d)) rec.disjoint = false;
        }
    }
}

struct PretrainKey {
    ClassId excluded;
    std::size_t repetition;
    auto operator<=>(const PretrainKey&) const = default;
};

NetConfig net_for(const ExperimentSpec& spec, const PreparedData& data, std::uint64_t seed) {
    NetConfig net = spec.net;
    net.input_dim = data.schema.total_dims();
    net.init_seed = seed;
    return net;
}

TrainConfig with_seed(TrainConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    return cfg;
}

// stream tags for derive_seed
enum : std::uint64_t { kPretrainInit = 11, kPretrainPairs = 12, kSupport = 13, kNewSamples = 14,
                       kRetrain = 15, kRealization = 16 };

RunRecord run_class_add(const ExperimentSpec& spec, const PreparedData& data, ClassId excluded,
                        std::size_t rep, std::size_t support_size, const CloudModel& cloud) {
    std::map<ClassId, ClassId> initial_map, full_map;
    std::vector<std::string> names;
    for (const auto& l : data.labels.labels()) {
        if (l.id == excluded) continue;
        initial_map[l.id] = static_cast<ClassId>(names.size());
        names.push_back(l.name);
    }
    const auto new_id = static_cast<ClassId>(names.size());
    full_map = initial_map;
    full_map[excluded] = new_id;
    const LabelSpace labels(names);
    const auto& new_name = data.labels.at(excluded).name;

    const auto initial_train = select_relabel(data.train, initial_map);
    const auto new_train = select_relabel(data.train, {{excluded, new_id}});
    const auto test_raw = select_relabel(data.test, full_map);

    const std::uint64_t s = derive_seed(spec.seed, excluded, rep, support_size);
    auto bundle = package_bundle(data.schema, labels, cloud, initial_train, support_size,
                                 derive_seed(s, kSupport));
    // the standardizer is fixed once the bundle leaves the cloud
    const auto test = preprocess(bundle, test_raw);
    const auto old_test = preprocess(bundle, select_relabel(data.test, initial_map));

    RunRecord rec;
    rec.support_per_class = support_size;
    rec.new_class = new_name;
    rec.repetition = rep;
    rec.classes_before = labels.size();
    rec.support_total = bundle.support.total();
    rec.pre_old_macro = evaluate(bundle.model, bundle.protos, old_test, groups_for(labels.size(), {})).old_macro;

    // |D_n| = |D_s| / K, remainder dropped
    const std::size_t n_new = rec.support_total / labels.size();
    if (new_train.size() < n_new) {
        throw ConfigError("class '" + new_name + "' has " + std::to_string(new_train.size()) +
                          " training windows, run needs " + std::to_string(n_new));
    }
    Rng pick(derive_seed(s, kNewSamples));
    std::vector<FeatureVector> new_samples;
    for (std::size_t i : pick.choose(new_train.size(), n_new)) new_samples.push_back(new_train[i]);

    const auto extended = collect_new_class(bundle, new_samples, {new_id, new_name});
    rec.new_count = extended.support.count(new_id);
    const auto groups = groups_for(labels.size(), new_id);
    const auto zero_shot = evaluate(
        extended.model, prototype_vectors(extended.model, extended.support, extended.labels), test, groups);
    rec.zero_shot_new = zero_shot.new_class;
    rec.zero_shot_overall = zero_shot.overall;

    const EvalHook hook = [&](const EmbeddingModel& m) {
        return snapshot(evaluate(m, prototype_vectors(m, extended.support, extended.labels), test, groups));
    };
    const auto retrained =
        edge_retrain(extended, with_seed(spec.retrain, derive_seed(s, kRetrain)), RetrainMode::warm_start, hook);
    rec.final_accuracy = snapshot(evaluate(retrained.model, retrained.protos, test, groups));
    rec.trace = retrained.last_trace;
    fill_audit(rec, rec.trace);
    fill_convergence(rec, spec);
    audit_support(rec, retrained, new_id, initial_train, new_train, test_raw);
    return rec;
}

std::string support_group(std::size_t n) { return "support=" + std::to_string(n); }

} // namespace

std::string to_string(Protocol p) {
    switch (p) {
    case Protocol::single_class_add: return "single_class_add";
    case Protocol::support_sweep: return "support_sweep";
    case Protocol::sequential_multi: return "sequential_multi";
    }
    return "?";
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "single" || s == "single_class_add") return Protocol::single_class_add;
    if (s == "sweep" || s == "support_sweep") return Protocol::support_sweep;
    if (s == "sequential" || s == "sequential_multi") return Protocol::sequential_multi;
    throw ConfigError("unknown protocol '" + s + "'");
}

void ExperimentSpec::validate() const {
    if (support_sizes.empty()) throw ConfigError("support_sizes is empty");
    for (std::size_t i = 0; i < support_sizes.size(); ++i) {
        if (support_sizes[i] == 0) throw ConfigError("support sizes must be positive");
        if (i > 0 && support_sizes[i] >= support_sizes[i - 1]) {
            throw ConfigError("support sizes must be strictly decreasing");
        }
    }
    if (repetitions == 0) throw ConfigError("repetitions must be >= 1");
    if (realizations == 0) throw ConfigError("realizations must be >= 1");
    if (initial_classes < 2) throw ConfigError("initial_classes must be >= 2");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    if (final_window == 0) throw ConfigError("final_window must be >= 1");
    pretrain.validate();
    retrain.validate();
    net.validate();
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ExperimentSpec spec;
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    try {
        spec.protocol = protocol_from_string(j.at("protocol").get<std::string>());
        spec.support_sizes = j.value("support_sizes", spec.support_sizes);
        spec.repetitions = j.value("repetitions", spec.repetitions);
        spec.realizations = j.value("realizations", spec.realizations);
        spec.initial_classes = j.value("initial_classes", spec.initial_classes);
        spec.excluded_classes = j.value("excluded_classes", spec.excluded_classes);
        spec.seed = j.value("seed", spec.seed);
        spec.tolerance = j.value("tolerance", spec.tolerance);
        spec.final_window = j.value("final_window", spec.final_window);
        const auto& d = j.at("data");
        spec.data.profiles = resolve(d.at("profiles").get<std::string>());
        spec.data.schema = resolve(d.value("schema", std::string()));
        spec.data.windows_per_class = d.value("windows_per_class", spec.data.windows_per_class);
        spec.data.test_fraction = d.value("test_fraction", spec.data.test_fraction);
        spec.data.min_gap_seconds = d.value("min_gap_seconds", spec.data.min_gap_seconds);
        if (j.contains("net")) spec.net = net_config_from_json(j.at("net"));
        if (j.contains("pretrain")) spec.pretrain = train_config_from_json(j.at("pretrain"));
        if (j.contains("retrain")) spec.retrain = train_config_from_json(j.at("retrain"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return experiment_spec_from_json(j, path.parent_path());
}

nlohmann::json to_json(const ExperimentSpec& spec) {
    return {{"protocol", to_string(spec.protocol)},
            {"support_sizes", spec.support_sizes},
            {"repetitions", spec.repetitions},
            {"realizations", spec.realizations},
            {"initial_classes", spec.initial_classes},
            {"excluded_classes", spec.excluded_classes},
            {"seed", spec.seed},
            {"tolerance", spec.tolerance},
            {"final_window", spec.final_window},
            {"data",
             {{"profiles", spec.data.profiles.string()},
              {"schema", spec.data.schema.string()},
              {"windows_per_class", spec.data.windows_per_class},
              {"test_fraction", spec.data.test_fraction},
              {"min_gap_seconds", spec.data.min_gap_seconds}}},
            {"net", to_json(spec.net)},
            {"pretrain", to_json(spec.pretrain)},
            {"retrain", to_json(spec.retrain)}};
}

ConvergenceStat convergence_batch(std::span<const double> accuracy, double tolerance,
                                  std::size_t final_window) {
    if (accuracy.empty()) throw InputError("convergence needs a non-empty accuracy series");
    const std::size_t n = accuracy.size();
    const std::size_t w = std::min(std::max<std::size_t>(final_window, 1), n);
    double sum = 0.0;
    for (std::size_t i = n - w; i < n; ++i) sum += accuracy[i];
    ConvergenceStat stat;
    stat.final_accuracy = sum / static_cast<double>(w);
    stat.tolerance = tolerance;
    std::size_t b = n - 1;
    if (std::abs(accuracy[b] - stat.final_accuracy) <= tolerance) {
        while (b > 0 && std::abs(accuracy[b - 1] - stat.final_accuracy) <= tolerance) --b;
    }
    stat.convergence_batch = b;
    return stat;
}

PreparedData prepare_data(const ExperimentSpec& spec) {
    const auto profiles = load_profiles(spec.data.profiles);
    PreparedData data;
    data.labels = profiles.labels;
    data.schema = spec.data.schema.empty() ? default_schema() : load_schema(spec.data.schema);
    const auto ds = generate_dataset(profiles, spec.data.windows_per_class, derive_seed(spec.seed, 0));
    const auto [train, test] = gap_split(ds, spec.data.test_fraction, spec.data.min_gap_seconds);
    data.train = extract_batch(train.windows, data.schema);
    data.test = extract_batch(test.windows, data.schema);
    return data;
}

ExperimentReport run_single_class_add(const ExperimentSpec& spec, const PreparedData& data,
                                      const ProgressFn& progress) {
    spec.validate();
    std::vector<ClassId> excluded;
    if (spec.excluded_classes.empty()) {
        for (const auto& l : data.labels.labels()) excluded.push_back(l.id);
    } else {
        for (const auto& name : spec.excluded_classes) {
            const auto id = data.labels.find(name);
            if (!id) throw ConfigError("unknown excluded class '" + name + "'");
            excluded.push_back(*id);
        }
    }
    if (data.labels.size() < 3) throw ConfigError("class-add protocol needs at least 3 classes");
    for (const auto& l : data.labels.labels()) {
        std::size_t n = 0;
        for (const auto& x : data.train) n += x.label == l.id ? 1 : 0;
        if (n < spec.support_sizes.front()) {
            throw ConfigError("class '" + l.name + "' has " + std::to_string(n) +
                              " training windows, fewer than support size " +
                              std::to_string(spec.support_sizes.front()));
        }
    }

    ExperimentReport report;
    report.spec = spec;
    for (ClassId e : excluded) {
        for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
            std::map<ClassId, ClassId> initial_map;
            for (const auto& l : data.labels.labels()) {
                if (l.id != e) initial_map[l.id] = static_cast<ClassId>(initial_map.size());
            }
            // one cloud model per (excluded class, repetition), shared by all support sizes
            const std::uint64_t s = derive_seed(spec.seed, e, rep);
            const auto initial_train = select_relabel(data.train, initial_map);
            const auto cloud = pretrain(initial_train, net_for(spec, data, derive_seed(s, kPretrainInit)),
                                        with_seed(spec.pretrain, derive_seed(s, kPretrainPairs)));
            for (std::size_t size : spec.support_sizes) {
                auto rec = run_class_add(spec, data, e, rep, size, cloud);
                rec.run_id = report.runs.size();
                rec.group = support_group(size);
                if (progress) {
                    progress("run " + std::to_string(rec.run_id) + " new=" + rec.new_class +
                             " rep=" + std::to_string(rep) + " " + rec.group +
                             " zero_shot_new=" + format_real(rec.zero_shot_new) +
                             " final_overall=" + format_real(rec.final_accuracy.overall));
                }
                report.runs.push_back(std::move(rec));
            }
        }
    }
    summarize(report);
    return report;
}

ExperimentReport run_single_class_add(const ExperimentSpec& spec, const ProgressFn& progress) {
    return run_single_class_add(spec, prepare_data(spec), progress);
}

ExperimentReport run_support_sweep(const ExperimentSpec& spec, const ProgressFn& progress) {
    auto report = run_single_class_add(spec, progress);
    report.spec.protocol = Protocol::support_sweep;
    return report;
}

ExperimentReport run_sequential_multi(const ExperimentSpec& spec, const PreparedData& data,
                                      const ProgressFn& progress) {
    spec.validate();
    const std::size_t total = data.labels.size();
    if (spec.initial_classes >= total) throw ConfigError("initial_classes must leave classes to add");
    const std::size_t support_size = spec.support_sizes.front();

    ExperimentReport report;
    report.spec = spec;
    for (std::size_t r = 0; r < spec.realizations; ++r) {
        const std::uint64_t s = derive_seed(spec.seed, kRealization, r);
        Rng order_rng(s);
        std::vector<ClassId> order;
        for (const auto& l : data.labels.labels()) order.push_back(l.id);
        order_rng.shuffle(order);
        std::vector<std::string> sequence;
        std::map<ClassId, ClassId> to_run;
        for (std::size_t k = 0; k < order.size(); ++k) {
            sequence.push_back(data.labels.at(order[k]).name);
            to_run[order[k]] = static_cast<ClassId>(k);
        }
        const auto train = select_relabel(data.train, to_run);
        const auto test = select_relabel(data.test, to_run);
        auto filter = [](std::span<const FeatureVector> xs, std::size_t below) {
            std::vector<FeatureVector> out;
            for (const auto& x : xs) {
                if (*x.label < below) out.push_back(x);
            }
            return out;
        };
        auto only = [](std::span<const FeatureVector> xs, ClassId id) {
            std::vector<FeatureVector> out;
            for (const auto& x : xs) {
                if (*x.label == id) out.push_back(x);
            }
            return out;
        };

        const std::size_t k0 = spec.initial_classes;
        const auto initial_train = filter(train, k0);
        auto cloud = pretrain(initial_train, net_for(spec, data, derive_seed(s, kPretrainInit)),
                              with_seed(spec.pretrain, derive_seed(s, kPretrainPairs)));
        auto bundle = package_bundle(
            data.schema, LabelSpace(std::vector<std::string>(sequence.begin(), sequence.begin() + k0)),
            std::move(cloud), initial_train, support_size, derive_seed(s, kSupport));
        const auto test_std = preprocess(bundle, test);

        std::vector<double> stages;
        {
            const auto stage_test = filter(test_std, k0);
            const auto rep = evaluate(bundle.model, bundle.protos, stage_test, groups_for(k0, {}));
            stages.push_back(rep.overall);
            RunRecord rec;
            rec.run_id = report.runs.size();
            rec.group = "stage=0";
            rec.support_per_class = support_size;
            rec.repetition = r;
            rec.sequence = sequence;
            rec.classes_before = k0;
            rec.support_total = bundle.support.total();
            rec.pre_old_macro = rep.old_macro;
            rec.final_accuracy = snapshot(rep);
            rec.support_subset = true;
            rec.disjoint = true;
            audit_support(rec, bundle, static_cast<ClassId>(k0), initial_train, {}, filter(test, k0));
            report.runs.push_back(std::move(rec));
        }

        for (std::size_t k = k0; k < total; ++k) {
            const auto new_id = static_cast<ClassId>(k);
            const auto stage_test = filter(test_std, k + 1);
            const auto old_test = filter(test_std, k);
            const auto new_train = only(train, new_id);
            const auto old_train = filter(train, k);

            RunRecord rec;
            rec.group = "stage=" + std::to_string(k - k0 + 1);
            rec.stage = k - k0 + 1;
            rec.support_per_class = support_size;
            rec.new_class = sequence[k];
            rec.repetition = r;
            rec.sequence = sequence;
            rec.classes_before = k;
            rec.support_total = bundle.support.total();
            rec.pre_old_macro = evaluate(bundle.model, bundle.protos, old_test, groups_for(k, {})).old_macro;

            const std::size_t n_new = rec.support_total / k;
            if (new_train.size() < n_new) {
                throw ConfigError("class '" + sequence[k] + "' has too few training windows");
            }
            Rng pick(derive_seed(s, kNewSamples, k));
            std::vector<FeatureVector> new_samples;
            for (std::size_t i : pick.choose(new_train.size(), n_new)) new_samples.push_back(new_train[i]);

            const auto extended = collect_new_class(bundle, new_samples, {new_id, sequence[k]});
            rec.new_count = extended.support.count(new_id);
            const auto groups = groups_for(k, new_id);
            const auto zero_shot = evaluate(
                extended.model, prototype_vectors(extended.model, extended.support, extended.labels),
                stage_test, groups);
            rec.zero_shot_new = zero_shot.new_class;
            rec.zero_shot_overall = zero_shot.overall;

            const EvalHook hook = [&](const EmbeddingModel& m) {
                return snapshot(
                    evaluate(m, prototype_vectors(m, extended.support, extended.labels), stage_test, groups));
            };
            bundle = edge_retrain(extended, with_seed(spec.retrain, derive_seed(s, kRetrain, k)),
                                  RetrainMode::warm_start, hook);
            rec.final_accuracy = snapshot(evaluate(bundle.model, bundle.protos, stage_test, groups));
            stages.push_back(rec.final_accuracy.overall);
            rec.trace = bundle.last_trace;
            fill_audit(rec, rec.trace);
            fill_convergence(rec, spec);
            // old-class support must come from the earlier classes' training data
            audit_support(rec, bundle, new_id, old_train, new_train, filter(test, k + 1));
            rec.run_id = report.runs.size();
            report.runs.push_back(std::move(rec));
        }
        if (progress) {
            std::string line = "realization " + std::to_string(r) + " [";
            for (std::size_t k = 0; k < sequence.size(); ++k) line += (k ? " " : "") + sequence[k];
            line += "] stages:";
            for (double a : stages) line += " " + format_real(a);
            progress(line);
        }
        report.stage_accuracy.push_back(std::move(stages));
    }
    summarize(report);
    return report;
}

ExperimentReport run_sequential_multi(const ExperimentSpec& spec, const ProgressFn& progress) {
    return run_sequential_multi(spec, prepare_data(spec), progress);
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
    switch (spec.protocol) {
    case Protocol::single_class_add: return run_single_class_add(spec, progress);
    case Protocol::support_sweep: return run_support_sweep(spec, progress);
    case Protocol::sequential_multi: return run_sequential_multi(spec, progress);
    }
    throw ConfigError("unknown protocol");
}

void summarize(ExperimentReport& report) {
    report.aggregate.clear();
    report.groups.clear();
    report.stages.clear();

    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunRecord*>> by_group;
    for (const auto& r : report.runs) {
        if (!by_group.contains(r.group)) order.push_back(r.group);
        by_group[r.group].push_back(&r);
    }
    for (const auto& g : order) {
        const auto& runs = by_group[g];
        std::size_t longest = 0;
        for (const auto* r : runs) longest = std::max(longest, r->trace.rows.size());
        std::vector<double> mean_curve;
        for (std::size_t b = 0; b < longest; ++b) {
            std::vector<double> overall, fresh, old;
            for (const auto* r : runs) {
                if (b >= r->trace.rows.size() || !r->trace.rows[b].accuracy) continue;
                const auto& a = *r->trace.rows[b].accuracy;
                overall.push_back(a.overall);
                fresh.push_back(a.new_class);
                old.push_back(a.old_classes);
            }
            if (overall.empty()) continue;
            const auto mo = mean_std(overall), mn = mean_std(fresh), ml = mean_std(old);
            report.aggregate.push_back({g, runs.front()->trace.rows[b].batch_index, overall.size(),
                                        mo.mean, mo.stddev, mn.mean, mn.stddev, ml.mean, ml.stddev});
            mean_curve.push_back(mo.mean);
        }
        GroupSummary sum;
        sum.group = g;
        sum.support_per_class = runs.front()->support_per_class;
        sum.runs = runs.size();
        std::vector<double> zs, pre, fn, fo;
        for (const auto* r : runs) {
            zs.push_back(r->zero_shot_new);
            pre.push_back(r->pre_old_macro);
            fn.push_back(r->final_accuracy.new_class);
            fo.push_back(r->final_accuracy.old_classes);
        }
        sum.zero_shot_new = mean_std(zs).mean;
        sum.pre_old_macro = mean_std(pre).mean;
        sum.final_new = mean_std(fn).mean;
        sum.final_old = mean_std(fo).mean;
        if (!mean_curve.empty()) {
            sum.convergence = convergence_batch(mean_curve, report.spec.tolerance, report.spec.final_window);
        } else {
            std::vector<double> finals;
            for (const auto* r : runs) finals.push_back(r->final_accuracy.overall);
            sum.convergence.final_accuracy = mean_std(finals).mean;
            sum.convergence.tolerance = report.spec.tolerance;
        }
        report.groups.push_back(sum);
    }

    std::size_t n_stages = 0;
    for (const auto& s : report.stage_accuracy) n_stages = std::max(n_stages, s.size());
    for (std::size_t k = 0; k < n_stages; ++k) {
        std::vector<double> xs;
        for (const auto& s : report.stage_accuracy) {
            if (k < s.size()) xs.push_back(s[k]);
        }
        const auto ms = mean_std(xs);
        report.stages.push_back({k, report.spec.initial_classes + k, ms.mean, ms.stddev});
    }
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir.string());
    }
    auto f = format_real;

    std::string runs = "run_id,group,new_class,repetition,stage,batch_index,loss,pairs,positive_pairs,"
                       "accuracy_overall,accuracy_new,accuracy_old\n";
    for (const auto& r : report.runs) {
        for (const auto& row : r.trace.rows) {
            runs += std::to_string(r.run_id) + "," + r.group + "," + r.new_class + "," +
                    std::to_string(r.repetition) + "," + std::to_string(r.stage) + "," +
                    std::to_string(row.batch_index) + "," + f(row.loss) + "," + std::to_string(row.pairs) +
                    "," + std::to_string(row.positive_pairs) + ",";
            if (row.accuracy) {
                runs += f(row.accuracy->overall) + "," + f(row.accuracy->new_class) + "," +
                        f(row.accuracy->old_classes);
            } else {
                runs += ",,";
            }
            runs += "\n";
        }
    }

    std::string agg = "group,batch_index,runs,mean_overall,std_overall,mean_new,std_new,mean_old,std_old\n";
    for (const auto& a : report.aggregate) {
        agg += a.group + "," + std::to_string(a.batch_index) + "," + std::to_string(a.runs) + "," +
               f(a.mean_overall) + "," + f(a.std_overall) + "," + f(a.mean_new) + "," + f(a.std_new) + "," +
               f(a.mean_old) + "," + f(a.std_old) + "\n";
    }

    std::string conv = "run_id,group,new_class,repetition,stage,sequence,classes_before,support_total,"
                       "new_count,pairs_min,pairs_max,support_subset,disjoint,pre_old_macro,zero_shot_new,"
                       "zero_shot_overall,final_overall,final_new,final_old,final_accuracy,"
                       "convergence_batch,tolerance\n";
    for (const auto& r : report.runs) {
        std::string seq;
        for (std::size_t k = 0; k < r.sequence.size(); ++k) seq += (k ? "|" : "") + r.sequence[k];
        conv += std::to_string(r.run_id) + "," + r.group + "," + r.new_class + "," +
                std::to_string(r.repetition) + "," + std::to_string(r.stage) + "," + seq + "," +
                std::to_string(r.classes_before) + "," + std::to_string(r.support_total) + "," +
                std::to_string(r.new_count) + "," + std::to_string(r.pairs_min) + "," +
                std::to_string(r.pairs_max) + "," + (r.support_subset ? "1" : "0") + "," +
                (r.disjoint ? "1" : "0") + "," + f(r.pre_old_macro) + "," + f(r.zero_shot_new) + "," +
                f(r.zero_shot_overall) + "," + f(r.final_accuracy.overall) + "," +
                f(r.final_accuracy.new_class) + "," + f(r.final_accuracy.old_classes) + "," +
                f(r.convergence.final_accuracy) + "," + std::to_string(r.convergence.convergence_batch) +
                "," + f(r.convergence.tolerance) + "\n";
    }

    std::string summary = "kind,key,runs,support_per_class,zero_shot_new,pre_old_macro,final_new,final_old,"
                          "final_accuracy,convergence_batch,stage_mean,stage_std\n";
    for (const auto& g : report.groups) {
        summary += "group," + g.group + "," + std::to_string(g.runs) + "," +
                   std::to_string(g.support_per_class) + "," + f(g.zero_shot_new) + "," +
                   f(g.pre_old_macro) + "," + f(g.final_new) + "," + f(g.final_old) + "," +
                   f(g.convergence.final_accuracy) + "," + std::to_string(g.convergence.convergence_batch) +
                   ",,\n";
    }
    for (const auto& s : report.stages) {
        summary += "stage," + std::to_string(s.stage) + "," + std::to_string(report.stage_accuracy.size()) +
                   ",,,,,,,," + f(s.mean) + "," + f(s.stddev) + "\n";
    }

    write_text(out_dir / "runs.csv", runs);
    write_text(out_dir / "aggregate.csv", agg);
    write_text(out_dir / "convergence.csv", conv);
    write_text(out_dir / "summary.csv", summary);
    write_text(out_dir / "config.json", to_json(report.spec).dump(2) + "\n");
}

std::vector<CheckResult> check_report(const ExperimentReport& report) {
    std::vector<CheckResult> out;
    auto add = [&](std::string name, bool ok, std::string detail) {
        out.push_back({std::move(name), ok, std::move(detail)});
    };

    bool fidelity = true;
    for (const auto& r : report.runs) {
        if (r.support_total == 0 || !r.support_subset || !r.disjoint) fidelity = false;
        if (r.stage > 0 || !r.group.starts_with("stage")) {
            if (r.classes_before > 0 && r.new_count != r.support_total / r.classes_before) fidelity = false;
            if (r.pairs_min != report.spec.retrain.batch_pairs || r.pairs_max != report.spec.retrain.batch_pairs) {
                fidelity = false;
            }
        }
    }
    add("protocol_fidelity", fidelity, std::to_string(report.runs.size()) + " runs audited");

    switch (report.spec.protocol) {
    case Protocol::single_class_add: {
        for (const auto& g : report.groups) {
            const double chance = 1.0 / static_cast<double>(report.runs.front().classes_before + 1);
            add("zero_shot_near_chance[" + g.group + "]", std::abs(g.zero_shot_new - chance) <= 0.10,
                "zero-shot new " + format_real(g.zero_shot_new) + " vs chance " + format_real(chance));
            add("new_class_learned[" + g.group + "]", g.final_new > 0.90, "final new " + format_real(g.final_new));
            add("old_classes_retained[" + g.group + "]", g.pre_old_macro - g.final_old <= 0.05,
                "old macro " + format_real(g.pre_old_macro) + " -> " + format_real(g.final_old));
        }
        break;
    }
    case Protocol::support_sweep: {
        double lo = 1.0, hi = 0.0;
        std::size_t clo = std::numeric_limits<std::size_t>::max(), chi = 0;
        for (const auto& g : report.groups) {
            lo = std::min(lo, g.convergence.final_accuracy);
            hi = std::max(hi, g.convergence.final_accuracy);
            clo = std::min(clo, g.convergence.convergence_batch);
            chi = std::max(chi, g.convergence.convergence_batch);
        }
        add("final_accuracy_spread", hi - lo <= 0.04, "spread " + format_real(hi - lo));
        add("convergence_spread", chi - clo < 15, "spread " + std::to_string(chi - clo) + " batches");
        break;
    }
    case Protocol::sequential_multi: {
        bool finite = !report.stages.empty();
        for (const auto& s : report.stages) finite = finite && std::isfinite(s.mean);
        add("stages_finite", finite, std::to_string(report.stages.size()) + " stages");
        if (finite) {
            add("initial_stage_accuracy", report.stages.front().mean >= 0.95,
                "stage 0 mean " + format_real(report.stages.front().mean));
            const double drop = report.stages.front().mean - report.stages.back().mean;
            add("total_degradation", drop <= 0.10, "drop " + format_real(drop));
        }
        break;
    }
    }
    return out;
}

} // namespace magneto
