#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recur/data_model.hpp"
#include "recur/simgen.hpp"

namespace recur {

// The four models fitted to every replicate, in output order.
inline constexpr ModelId kHarnessModels[] = {ModelId::COX, ModelId::NB, ModelId::AG, ModelId::LWYY};

struct ReplicateResult {
    std::string scenario;
    int replicate = 0;
    ModelId model = ModelId::COX;
    bool converged = false;
    bool fallback_used = false;
    bool monotone = false;
    std::string error;  // error code name when the fit or the trial failed
    double beta = NAN;
    double se = NAN;
    double ci_low = NAN;   // log scale
    double ci_high = NAN;
    double p_value = NAN;
    double dispersion = NAN;
    double study_duration = NAN;
    int total_events = 0;
    int first_events = 0;
    std::vector<int> events_histogram;

    bool usable() const { return converged && error.empty(); }
};

struct ModelSummary {
    ModelId model = ModelId::COX;
    int n_used = 0;
    int n_failed = 0;
    double mean_beta = NAN;
    double mean_effect = NAN;
    double bias = NAN;      // NaN without a known truth
    double mse = NAN;
    double se = NAN;        // empirical SD of estimates
    double see = NAN;       // mean estimated SE
    double coverage = NAN;
    double rejection_rate = NAN;
    double fallback_rate = NAN;  // NB only
};

struct EvaluationSummary {
    std::string scenario;
    std::optional<double> true_beta;
    int replicates = 0;
    int trial_failures = 0;
    double mean_study_duration = NAN;
    double mean_total_events = NAN;
    double mean_first_events = NAN;
    std::vector<ModelSummary> models;

    const ModelSummary& of(ModelId m) const;
};

// Four rows for one replicate; never throws for data-dependent failures.
std::vector<ReplicateResult> run_replicate(const ScenarioConfig& cfg, std::uint64_t master_seed, int replicate);

// strict: throw TOO_FEW_REPLICATES when a model has fewer than two usable fits;
// otherwise such models keep their counts and NaN statistics.
EvaluationSummary summarize(const std::vector<ReplicateResult>& results, std::optional<double> true_beta,
                            double alpha = 0.05, bool strict = true);

// Truth used for bias/MSE/coverage: log(effect) for S1, none for S2.
std::optional<double> scenario_truth(const ScenarioConfig& cfg);

struct RunOptions {
    int threads = 0;                  // 0 = hardware concurrency
    std::string out_dir;              // empty = keep in memory only
    bool resume = false;              // reuse complete replicates already in out_dir/replicates.csv
    int flush_every = 100;
    std::function<void(int done, int total)> progress;
};

struct ScenarioRun {
    std::vector<ReplicateResult> results;  // replicate-major, kHarnessModels order
    EvaluationSummary summary;
};

ScenarioRun run_scenario(const ScenarioConfig& cfg, int n_replicates, std::uint64_t master_seed,
                         const RunOptions& opt = {});

void write_replicates_header(std::ostream& out);
void write_replicate_rows(std::ostream& out, const std::vector<ReplicateResult>& rows);
std::vector<ReplicateResult> read_replicates_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const EvaluationSummary& s);

}  // namespace recur
