#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magneto/contrastive.hpp"
#include "magneto/edge.hpp"
#include "magneto/features.hpp"
#include "magneto/net.hpp"
#include "magneto/sensor_data.hpp"

namespace magneto {

enum class Protocol { single_class_add, support_sweep, sequential_multi };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct DataSpec {
    std::filesystem::path profiles;
    std::filesystem::path schema; // empty: built-in 86-dim schema
    std::size_t windows_per_class = 600;
    double test_fraction = 0.2;
    double min_gap_seconds = 10.0;
};

struct ExperimentSpec {
    Protocol protocol = Protocol::single_class_add;
    std::vector<std::size_t> support_sizes{1000, 500, 100};
    std::size_t repetitions = 5;
    std::size_t realizations = 100;
    std::size_t initial_classes = 2;
    std::vector<std::string> excluded_classes; // empty: every class in turn
    std::uint64_t seed = 1;
    DataSpec data;
    NetConfig net;
    TrainConfig pretrain;
    TrainConfig retrain;
    double tolerance = 0.02;
    std::size_t final_window = 5;

    void validate() const;
};

// Relative paths inside the JSON resolve against base_dir.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentSpec& spec);

struct ConvergenceStat {
    double final_accuracy = 0.0;
    std::size_t convergence_batch = 0;
    double tolerance = 0.02;
};

// final_accuracy: mean of the last `final_window` values. convergence_batch:
// smallest index b with every value at index >= b within +-tolerance
// (absolute) of final_accuracy; the last index when even the final value
// falls outside the band.
ConvergenceStat convergence_batch(std::span<const double> accuracy, double tolerance = 0.02,
                                  std::size_t final_window = 5);

struct RunRecord {
    std::size_t run_id = 0;
    std::string group;
    std::size_t support_per_class = 0;
    std::string new_class;
    std::size_t repetition = 0; // realization index for sequential runs
    std::size_t stage = 0;
    std::vector<std::string> sequence;
    std::size_t classes_before = 0; // K
    std::size_t support_total = 0;  // |D_s| before the new class
    std::size_t new_count = 0;      // |D_n| stored
    std::size_t pairs_min = 0;
    std::size_t pairs_max = 0;
    bool support_subset = false;    // D_s drawn from the initial training set
    bool disjoint = false;          // no support vector among test vectors
    double pre_old_macro = std::nan("");
    double zero_shot_new = std::nan("");
    double zero_shot_overall = std::nan("");
    AccuracySnapshot final_accuracy;
    TrainingTrace trace;
    ConvergenceStat convergence;
};

struct AggregateRow {
    std::string group;
    std::size_t batch_index = 0;
    std::size_t runs = 0;
    double mean_overall = 0.0, std_overall = 0.0;
    double mean_new = 0.0, std_new = 0.0;
    double mean_old = 0.0, std_old = 0.0;
};

struct GroupSummary {
    std::string group;
    std::size_t support_per_class = 0;
    std::size_t runs = 0;
    double zero_shot_new = 0.0;
    double pre_old_macro = 0.0;
    double final_new = 0.0;
    double final_old = 0.0;
    ConvergenceStat convergence; // of the mean overall-accuracy curve
};

struct StageSummary {
    std::size_t stage = 0;
    std::size_t classes = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct ExperimentReport {
    ExperimentSpec spec;
    std::vector<RunRecord> runs;
    std::vector<AggregateRow> aggregate;
    std::vector<GroupSummary> groups;
    std::vector<std::vector<double>> stage_accuracy; // [realization][stage]
    std::vector<StageSummary> stages;
};

using ProgressFn = std::function<void(const std::string&)>;

// Data shared by every run of an experiment: raw (unstandardized) features
// of the gap-split train and test windows.
struct PreparedData {
    LabelSpace labels;
    FeatureSchema schema;
    std::vector<FeatureVector> train;
    std::vector<FeatureVector> test;
};

PreparedData prepare_data(const ExperimentSpec& spec);

ExperimentReport run_single_class_add(const ExperimentSpec& spec, const ProgressFn& progress = {});
ExperimentReport run_support_sweep(const ExperimentSpec& spec, const ProgressFn& progress = {});
ExperimentReport run_sequential_multi(const ExperimentSpec& spec, const ProgressFn& progress = {});
ExperimentReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

ExperimentReport run_single_class_add(const ExperimentSpec& spec, const PreparedData& data,
                                      const ProgressFn& progress = {});
ExperimentReport run_sequential_multi(const ExperimentSpec& spec, const PreparedData& data,
                                      const ProgressFn& progress = {});

// Recomputes aggregate rows, group and stage summaries from the runs.
void summarize(ExperimentReport& report);

// Writes runs.csv, aggregate.csv, convergence.csv, summary.csv and config.json.
void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Protocol-specific targets on the default synthetic profiles.
std::vector<CheckResult> check_report(const ExperimentReport& report);

} // namespace magneto
