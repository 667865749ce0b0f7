#include "flowcast/experiment.hpp"

#include "flowcast/errors.hpp"
#include "flowcast/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>

namespace fs = std::filesystem;

namespace flowcast {

namespace {

const std::array<const char*, 6> kMetricColumns = {"bias", "nse", "flv", "fhv", "corr", "kge"};
const std::array<const char*, 4> kSignatureColumns = {"acf1", "baseflow_index", "xi", "gamma"};

struct SchemeMetrics {
    std::string scheme;
    std::vector<std::string> basin_ids;
    // column name -> per-basin optional values (aligned with basin_ids)
    std::map<std::string, std::vector<std::optional<double>>> columns;
};

SchemeMetrics load_experiment_dir(const std::string& dir) {
    SchemeMetrics out;
    const std::string metrics_path = dir + "/metrics.csv";
    if (!fs::exists(metrics_path)) throw DataError("report: missing " + metrics_path);

    out.scheme = fs::path(dir).filename().string();
    const std::string config_path = dir + "/config.json";
    if (fs::exists(config_path)) {
        try {
            out.scheme = ExperimentConfig::from_json_file(config_path).scheme.label();
        } catch (const Error&) {
            // fall back to the directory name
        }
    }

    const auto lines = read_lines(metrics_path);
    if (lines.empty()) throw DataError(metrics_path + ": empty file");
    const auto header = split_csv(lines[0]);
    if (header.empty() || header[0] != "basin_id")
        throw DataError(metrics_path + ": first column must be basin_id");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_csv(lines[i]);
        if (fields.size() != header.size())
            throw DataError(metrics_path + ":" + std::to_string(i + 1) + ": field count");
        out.basin_ids.push_back(fields[0]);
        for (std::size_t c = 1; c < header.size(); ++c) {
            std::optional<double> v;
            if (!fields[c].empty()) v = parse_double(fields[c], metrics_path);
            out.columns[header[c]].push_back(v);
        }
    }
    return out;
}

/** Linearly interpolated quantile of sorted data (the common type-7 rule). */
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

void write_report_tables(const std::vector<std::string>& experiment_dirs,
                         const std::string& out_dir) {
    if (experiment_dirs.empty()) throw ParamError("report: no experiment directories");
    std::vector<SchemeMetrics> schemes;
    for (const std::string& dir : experiment_dirs) schemes.push_back(load_experiment_dir(dir));
    fs::create_directories(out_dir);

    // Boxplot quantiles per scheme and metric.
    {
        std::string csv = "scheme,metric,min,q25,median,q75,max,defined,undefined\n";
        for (const SchemeMetrics& s : schemes) {
            for (const char* metric : kMetricColumns) {
                const auto it = s.columns.find(metric);
                if (it == s.columns.end()) continue;
                std::vector<double> v;
                for (const auto& o : it->second)
                    if (o) v.push_back(*o);
                csv += s.scheme;
                csv += ',';
                csv += metric;
                if (v.empty()) {
                    csv += ",,,,,";
                } else {
                    std::sort(v.begin(), v.end());
                    csv += ',' + fmt_report(v.front());
                    csv += ',' + fmt_report(quantile_sorted(v, 0.25));
                    csv += ',' + fmt_report(quantile_sorted(v, 0.5));
                    csv += ',' + fmt_report(quantile_sorted(v, 0.75));
                    csv += ',' + fmt_report(v.back());
                }
                csv += ',' + std::to_string(v.size());
                csv += ',' + std::to_string(it->second.size() - v.size());
                csv += '\n';
            }
        }
        write_text_atomic(out_dir + "/boxplot.csv", csv);
    }

    // Empirical CDF table per metric.
    for (const char* metric : kMetricColumns) {
        std::string csv = "scheme,value,fraction\n";
        for (const SchemeMetrics& s : schemes) {
            const auto it = s.columns.find(metric);
            if (it == s.columns.end()) continue;
            for (const auto& [value, fraction] : cdf_table(it->second)) {
                csv += s.scheme;
                csv += ',' + fmt_report(value);
                csv += ',' + fmt_report(fraction);
                csv += '\n';
            }
        }
        write_text_atomic(out_dir + "/cdf_" + metric + ".csv", csv);
    }

    // NSE against basin signatures, one row per basin and scheme.
    {
        std::string csv = "scheme,basin_id,nse";
        for (const char* sig : kSignatureColumns) {
            csv += ',';
            csv += sig;
        }
        csv += '\n';
        for (const SchemeMetrics& s : schemes) {
            for (std::size_t b = 0; b < s.basin_ids.size(); ++b) {
                csv += s.scheme;
                csv += ',' + s.basin_ids[b];
                auto field = [&](const char* name) -> std::string {
                    const auto it = s.columns.find(name);
                    if (it == s.columns.end() || !it->second[b]) return "";
                    return fmt_report(*it->second[b]);
                };
                csv += ',' + field("nse");
                for (const char* sig : kSignatureColumns) csv += ',' + field(sig);
                csv += '\n';
            }
        }
        write_text_atomic(out_dir + "/scatter_nse.csv", csv);
    }
}

} // namespace flowcast
