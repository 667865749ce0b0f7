#ifndef FLOWCAST_EXPERIMENT_HPP
#define FLOWCAST_EXPERIMENT_HPP

#include "flowcast/baselines.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/synth.hpp"
#include "flowcast/train.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowcast {

struct DataConfig {
    enum class Kind { Directory, Synth };
    Kind kind = Kind::Synth;
    // Directory source
    std::string root;
    std::vector<std::string> basins; // empty = all
    // Synthetic source
    SynthOptions synth;
    std::uint64_t synth_seed = 7;
};

/**
 * One full experiment: a data source, disjoint train/test periods, a DI
 * scheme and the training protocol. Serialized as a versioned JSON
 * document (schema version 1).
 */
struct ExperimentConfig {
    DiScheme scheme;
    Period train_period;
    Period test_period;
    TrainConfig train;
    DataConfig data;
    ForecastOptions forecast;
    std::string output_dir;

    ExperimentConfig(); // paper-default periods

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
};

struct BasinResult {
    std::string id;
    MetricReport metrics;
    SignatureReport signatures;
};

struct ExperimentResult {
    std::vector<BasinResult> basins;
    std::vector<AggregateStat> aggregate;

    std::optional<double> median(const std::string& metric) const;
};

/** Load the configured data source (ingest or synthesize). */
std::vector<BasinRecord> load_records(const DataConfig& data);

/**
 * Train the ensemble, forecast the test period, evaluate every metric and
 * signature per basin, and (when output_dir is set) write checkpoints,
 * loss histories, per-basin forecast CSVs, metrics.csv and aggregate.csv.
 * Fully reproducible from (config, data, seeds).
 */
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/** Evaluate existing forecast CSVs (date,obs,sim) into metric tables. */
ExperimentResult evaluate_forecast_dir(const std::string& forecast_dir,
                                       const std::string& output_dir);

// --- checkpoint round trips -------------------------------------------------

void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

// --- report tables -----------------------------------------------------------

/**
 * Read one or more experiment directories (each with metrics.csv and
 * config.json) and emit plot-ready tables under out_dir: per-metric
 * boxplot quantiles per scheme, per-metric CDF tables, and an NSE-vs-
 * signature scatter table.
 */
void write_report_tables(const std::vector<std::string>& experiment_dirs,
                         const std::string& out_dir);

} // namespace flowcast

#endif // FLOWCAST_EXPERIMENT_HPP
