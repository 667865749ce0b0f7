#include "flowcast/experiment.hpp"

#include "flowcast/errors.hpp"
#include "flowcast/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace flowcast {

ExperimentConfig::ExperimentConfig() {
    train_period = {parse_date("1985-10-01"), parse_date("1995-09-30")};
    test_period = {parse_date("1995-10-01"), parse_date("2005-09-30")};
}

void ExperimentConfig::validate() const {
    train.validate();
    if (train_period.start > train_period.end || test_period.start > test_period.end)
        throw ConfigError("experiment: period start after end");
    if (!train_period.disjoint(test_period))
        throw ConfigError("experiment: train and test periods must be disjoint");
    if (data.kind == DataConfig::Kind::Directory && data.root.empty())
        throw ConfigError("experiment: data.root is required for directory data");
}

namespace {

json period_json(const Period& p) {
    return json::array({format_date(p.start), format_date(p.end)});
}

Period period_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(std::string(what) + ": expected [start, end]");
    return {parse_date(j[0].get<std::string>()), parse_date(j[1].get<std::string>())};
}

} // namespace

std::string ExperimentConfig::to_json() const {
    json j;
    j["version"] = 1;
    j["scheme"] = scheme.label();
    j["train_period"] = period_json(train_period);
    j["test_period"] = period_json(test_period);

    json t;
    t["batch_size"] = train.batch_size;
    t["hidden_size"] = train.hidden_size;
    t["transform_dim"] = train.transform_dim;
    t["rho"] = train.rho;
    t["epochs"] = train.epochs;
    t["steps_per_epoch"] = train.steps_per_epoch;
    t["keep_prob"] = train.keep_prob;
    t["seeds"] = train.seeds;
    t["loss_space"] = train.loss_space == LossSpace::Transformed ? "transformed" : "physical";
    t["adadelta_decay"] = train.adadelta_decay;
    t["adadelta_eps"] = train.adadelta_eps;
    t["ensemble_threads"] = train.ensemble_threads;
    j["train"] = t;

    json d;
    if (data.kind == DataConfig::Kind::Directory) {
        d["kind"] = "dir";
        d["root"] = data.root;
        d["basins"] = data.basins;
    } else {
        d["kind"] = "synth";
        d["n_basins"] = data.synth.n_basins;
        d["regime"] = regime_name(data.synth.regime);
        d["years"] = data.synth.n_years;
        d["seed"] = data.synth_seed;
        d["noise_scale"] = data.synth.noise_scale;
        d["start"] = format_date(data.synth.start_date != 0 ? data.synth.start_date
                                                            : parse_date("1988-10-01"));
    }
    j["data"] = d;

    json f;
    f["closed_loop"] = forecast.closed_loop;
    f["warmup_days"] = forecast.warmup_days;
    j["forecast"] = f;

    j["output_dir"] = output_dir;
    return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    try {
        ExperimentConfig cfg;
        if (j.value("version", 1) != 1) throw ConfigError("config: unsupported schema version");
        if (j.contains("scheme")) cfg.scheme = DiScheme::parse(j["scheme"].get<std::string>());
        if (j.contains("train_period"))
            cfg.train_period = period_from_json(j["train_period"], "train_period");
        if (j.contains("test_period"))
            cfg.test_period = period_from_json(j["test_period"], "test_period");

        if (j.contains("train")) {
            const json& t = j["train"];
            TrainConfig& c = cfg.train;
            c.batch_size = t.value("batch_size", c.batch_size);
            c.hidden_size = t.value("hidden_size", c.hidden_size);
            c.transform_dim = t.value("transform_dim", c.transform_dim);
            c.rho = t.value("rho", c.rho);
            c.epochs = t.value("epochs", c.epochs);
            c.steps_per_epoch = t.value("steps_per_epoch", c.steps_per_epoch);
            c.keep_prob = t.value("keep_prob", c.keep_prob);
            if (t.contains("seeds")) c.seeds = t["seeds"].get<std::vector<std::uint64_t>>();
            if (t.contains("loss_space")) {
                const std::string s = t["loss_space"].get<std::string>();
                if (s == "transformed")
                    c.loss_space = LossSpace::Transformed;
                else if (s == "physical")
                    c.loss_space = LossSpace::Physical;
                else
                    throw ConfigError("config: loss_space must be transformed or physical");
            }
            c.adadelta_decay = t.value("adadelta_decay", c.adadelta_decay);
            c.adadelta_eps = t.value("adadelta_eps", c.adadelta_eps);
            c.ensemble_threads = t.value("ensemble_threads", c.ensemble_threads);
        }

        if (j.contains("data")) {
            const json& d = j["data"];
            const std::string kind = d.value("kind", "synth");
            if (kind == "dir") {
                cfg.data.kind = DataConfig::Kind::Directory;
                cfg.data.root = d.value("root", "");
                if (d.contains("basins"))
                    cfg.data.basins = d["basins"].get<std::vector<std::string>>();
            } else if (kind == "synth") {
                cfg.data.kind = DataConfig::Kind::Synth;
                cfg.data.synth.n_basins = d.value("n_basins", cfg.data.synth.n_basins);
                if (d.contains("regime"))
                    cfg.data.synth.regime = parse_regime(d["regime"].get<std::string>());
                cfg.data.synth.n_years = d.value("years", cfg.data.synth.n_years);
                cfg.data.synth_seed = d.value("seed", cfg.data.synth_seed);
                cfg.data.synth.noise_scale = d.value("noise_scale", cfg.data.synth.noise_scale);
                if (d.contains("start"))
                    cfg.data.synth.start_date = parse_date(d["start"].get<std::string>());
            } else {
                throw ConfigError("config: data.kind must be 'dir' or 'synth'");
            }
        }

        if (j.contains("forecast")) {
            const json& f = j["forecast"];
            cfg.forecast.closed_loop = f.value("closed_loop", cfg.forecast.closed_loop);
            cfg.forecast.warmup_days = f.value("warmup_days", cfg.forecast.warmup_days);
        }
        cfg.output_dir = j.value("output_dir", "");
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::string text;
    for (const std::string& line : read_lines(path)) {
        text += line;
        text += '\n';
    }
    return from_json(text);
}

std::vector<BasinRecord> load_records(const DataConfig& data) {
    if (data.kind == DataConfig::Kind::Directory) return ingest(data.root, data.basins);
    SeededRng rng(data.synth_seed);
    return synth_generate(data.synth, rng).first;
}

std::optional<double> ExperimentResult::median(const std::string& metric) const {
    for (const AggregateStat& s : aggregate)
        if (s.metric == metric) return s.median;
    return std::nullopt;
}

// --- checkpoints ------------------------------------------------------------

void save_model(const std::string& path, const TrainedModel& model) {
    std::vector<std::pair<std::string, const Matrix*>> tensors;
    std::vector<std::pair<std::string, std::string>> meta = {
        {"model", "lstm"},
        {"input_dim", std::to_string(model.weights.dims.input_dim)},
        {"transform_dim", std::to_string(model.weights.dims.transform_dim)},
        {"conv_dim", std::to_string(model.weights.dims.conv_dim)},
        {"hidden_dim", std::to_string(model.weights.dims.hidden_dim)},
        {"output_dim", std::to_string(model.weights.dims.output_dim)},
        {"scheme", model.scheme.label()},
        {"seed", std::to_string(model.seed)},
    };
    const auto& names = LstmWeights::names();
    auto mats = model.weights.all();
    for (std::size_t i = 0; i < mats.size(); ++i) tensors.emplace_back(names[i], mats[i]);
    if (model.has_conv) append_conv_tensors(tensors, meta, model.conv);
    save_tensors(path, tensors, meta);
}

TrainedModel load_model(const std::string& path) {
    const TensorFile file = load_tensors(path);
    TrainedModel model;
    model.weights = load_lstm_weights(file);
    model.scheme = DiScheme::parse(file.meta_value("scheme"));
    model.seed = std::stoull(file.meta_value("seed"));
    model.has_conv = model.scheme.conv_width() > 0;
    if (model.has_conv) model.conv = load_conv_weights(file);
    return model;
}

// --- experiment -------------------------------------------------------------

namespace {

std::string metrics_csv_header() {
    return "basin_id,bias,nse,flv,fhv,corr,kge,acf1,baseflow_index,xi,gamma";
}

std::string opt_field(const std::optional<double>& v) {
    return v ? fmt_report(*v) : "";
}

void write_metrics_csv(const std::string& path, const std::vector<BasinResult>& basins) {
    std::string out = metrics_csv_header();
    out += '\n';
    for (const BasinResult& b : basins) {
        out += b.id;
        out += ',' + opt_field(b.metrics.bias_pct);
        out += ',' + opt_field(b.metrics.nse);
        out += ',' + opt_field(b.metrics.flv);
        out += ',' + opt_field(b.metrics.fhv);
        out += ',' + opt_field(b.metrics.corr);
        out += ',' + opt_field(b.metrics.kge);
        out += ',' + opt_field(b.signatures.acf1);
        out += ',' + opt_field(b.signatures.baseflow_index);
        out += ',' + opt_field(b.signatures.xi);
        out += ',' + opt_field(b.signatures.gamma);
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateStat>& stats) {
    std::string out = "metric,median,defined,undefined\n";
    for (const AggregateStat& s : stats) {
        out += s.metric;
        out += ',' + (s.median ? fmt_report(*s.median) : std::string());
        out += ',' + std::to_string(s.defined);
        out += ',' + std::to_string(s.undefined);
        out += '\n';
    }
    write_text_atomic(path, out);
}

std::optional<double> basin_gamma(const DataConfig& data, const std::string& basin_id) {
    if (data.kind != DataConfig::Kind::Directory) return std::nullopt;
    const std::string path = data.root + "/" + basin_id + "/twsa.csv";
    if (!fs::exists(path)) return std::nullopt;
    const auto lines = read_lines(path);
    std::vector<double> monthly;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_csv(lines[i]);
        if (fields.size() != 2)
            throw DataError(path + ":" + std::to_string(i + 1) + ": expected date,value");
        monthly.push_back(parse_double(fields[1], path));
    }
    return twsa_gamma(monthly);
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::vector<BasinRecord> records = load_records(cfg.data);
    const PreparedDataset prepared = prepare_dataset(records, cfg.train_period, cfg.test_period);

    const std::vector<TrainedModel> members = train_ensemble(prepared, cfg.scheme, cfg.train);

    const bool write = !cfg.output_dir.empty();
    if (write) {
        fs::create_directories(cfg.output_dir);
        fs::create_directories(cfg.output_dir + "/checkpoints");
        fs::create_directories(cfg.output_dir + "/forecasts");
        write_text_atomic(cfg.output_dir + "/config.json", cfg.to_json());
        for (const TrainedModel& m : members) {
            save_model(cfg.output_dir + "/checkpoints/member_" + std::to_string(m.seed) + ".fct",
                       m);
            std::string loss = "epoch,loss\n";
            for (std::size_t e = 0; e < m.loss_history.size(); ++e)
                loss += std::to_string(e + 1) + ',' + fmt_report(m.loss_history[e]) + '\n';
            write_text_atomic(cfg.output_dir + "/loss_" + std::to_string(m.seed) + ".csv", loss);
        }
    }

    ExperimentResult result;
    for (std::size_t b = 0; b < prepared.basins.size(); ++b) {
        const PreparedBasin& pb = prepared.basins[b];
        if (cfg.test_period.start < pb.start_date || cfg.test_period.end > pb.end_date()) {
            std::cerr << "experiment: basin " << pb.id
                      << " does not cover the test period; skipped\n";
            continue;
        }
        const std::vector<double> sim =
            ensemble_mean_forecast(members, prepared, b, cfg.test_period, cfg.forecast);

        const long lo = pb.day_index(cfg.test_period.start);
        std::vector<double> obs(sim.size());
        for (std::size_t k = 0; k < sim.size(); ++k) obs[k] = pb.q_native[lo + k];

        BasinResult br;
        br.id = pb.id;
        br.metrics = evaluate_metrics(obs, sim);
        br.signatures.acf1 = acf1(obs);
        br.signatures.baseflow_index = baseflow_index(obs);
        {
            std::vector<double> precip(sim.size()), tmean(sim.size());
            for (std::size_t k = 0; k < sim.size(); ++k) {
                precip[k] = pb.forcing_raw(lo + k, kForcingPrcp);
                tmean[k] = 0.5 * (pb.forcing_raw(lo + k, kForcingTmax) +
                                  pb.forcing_raw(lo + k, kForcingTmin));
            }
            br.signatures.xi = seasonality_xi(precip, tmean);
        }
        br.signatures.gamma = basin_gamma(cfg.data, pb.id);
        result.basins.push_back(std::move(br));

        if (write) {
            std::string csv = "date,obs,sim\n";
            for (std::size_t k = 0; k < sim.size(); ++k) {
                csv += format_date(cfg.test_period.start + static_cast<long>(k));
                csv += ',' + fmt_report(obs[k]);
                csv += ',' + fmt_report(sim[k]);
                csv += '\n';
            }
            write_text_atomic(cfg.output_dir + "/forecasts/" + pb.id + ".csv", csv);
        }
    }
    if (result.basins.empty()) throw DataError("experiment: no basin covers the test period");

    std::vector<MetricReport> reports;
    for (const BasinResult& b : result.basins) reports.push_back(b.metrics);
    result.aggregate = aggregate_reports(reports);

    if (write) {
        write_metrics_csv(cfg.output_dir + "/metrics.csv", result.basins);
        write_aggregate_csv(cfg.output_dir + "/aggregate.csv", result.aggregate);
    }
    return result;
}

ExperimentResult evaluate_forecast_dir(const std::string& forecast_dir,
                                       const std::string& output_dir) {
    if (!fs::is_directory(forecast_dir))
        throw DataError("evaluate: '" + forecast_dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(forecast_dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("evaluate: no forecast CSVs under '" + forecast_dir + "'");

    ExperimentResult result;
    for (const std::string& path : files) {
        const auto lines = read_lines(path);
        if (lines.empty() || lines[0] != "date,obs,sim")
            throw DataError(path + ": expected header date,obs,sim");
        std::vector<double> obs, sim;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            const auto fields = split_csv(lines[i]);
            if (fields.size() != 3)
                throw DataError(path + ":" + std::to_string(i + 1) + ": expected 3 fields");
            obs.push_back(parse_double(fields[1], path));
            sim.push_back(parse_double(fields[2], path));
        }
        BasinResult br;
        br.id = fs::path(path).stem().string();
        br.metrics = evaluate_metrics(obs, sim);
        br.signatures.acf1 = acf1(obs);
        br.signatures.baseflow_index = baseflow_index(obs);
        result.basins.push_back(std::move(br));
    }
    std::vector<MetricReport> reports;
    for (const BasinResult& b : result.basins) reports.push_back(b.metrics);
    result.aggregate = aggregate_reports(reports);
    if (!output_dir.empty()) {
        fs::create_directories(output_dir);
        write_metrics_csv(output_dir + "/metrics.csv", result.basins);
        write_aggregate_csv(output_dir + "/aggregate.csv", result.aggregate);
    }
    return result;
}

} // namespace flowcast
