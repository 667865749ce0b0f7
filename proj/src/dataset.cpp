#include "flowcast/dataset.hpp"

#include "flowcast/errors.hpp"
#include "flowcast/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>

namespace fs = std::filesystem;

namespace flowcast {

namespace {

// attributes.csv column order (Table-1 order, categorical interleaved).
struct AttrColumn {
    const char* name;
    int numeric_index;     // -1 for categorical
    int categorical_index; // -1 for numeric
};
const std::array<AttrColumn, 17> kAttributeColumns = {{
    {"elev_mean", 0, -1},
    {"slope_mean", 1, -1},
    {"area_gages2", 2, -1},
    {"frac_forest", 3, -1},
    {"lai_max", 4, -1},
    {"lai_diff", 5, -1},
    {"dom_land_cover_frac", 6, -1},
    {"dom_land_cover", -1, 0},
    {"root_depth_50", 7, -1},
    {"soil_depth_statgso", 8, -1},
    {"soil_porosity", 9, -1},
    {"soil_conductivity", 10, -1},
    {"max_water_content", 11, -1},
    {"geol_class_1st", -1, 1},
    {"geol_class_2nd", -1, 2},
    {"geol_porosity", 12, -1},
    {"geol_permeability", 13, -1},
}};

std::string attributes_header() {
    std::string h = "basin_id";
    for (const auto& col : kAttributeColumns) {
        h += ',';
        h += col.name;
    }
    return h;
}

struct AttrRow {
    std::vector<double> numeric;
    std::array<std::string, 3> categorical;
};

std::map<std::string, AttrRow> read_attributes(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty file");
    if (lines[0] != attributes_header())
        throw DataError(path + ":1: unexpected header (expected '" + attributes_header() + "')");
    std::map<std::string, AttrRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_csv(lines[i]);
        const std::string where = path + ":" + std::to_string(i + 1);
        if (fields.size() != kAttributeColumns.size() + 1)
            throw DataError(where + ": expected " + std::to_string(kAttributeColumns.size() + 1) +
                            " fields, got " + std::to_string(fields.size()));
        AttrRow row;
        row.numeric.resize(kNumericAttributeNames.size());
        for (std::size_t c = 0; c < kAttributeColumns.size(); ++c) {
            const AttrColumn& col = kAttributeColumns[c];
            if (col.numeric_index >= 0)
                row.numeric[col.numeric_index] = parse_double(fields[c + 1], where);
            else
                row.categorical[col.categorical_index] = fields[c + 1];
        }
        rows[fields[0]] = std::move(row);
    }
    return rows;
}

struct SeriesFile {
    long start_date = 0;
    std::vector<std::vector<double>> columns;
};

SeriesFile read_series(const std::string& path, const std::string& expected_header) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw DataError(path + ": empty file");
    if (lines[0] != expected_header)
        throw DataError(path + ":1: unexpected header (expected '" + expected_header + "')");
    const std::size_t n_cols = split_csv(expected_header).size() - 1;
    SeriesFile out;
    out.columns.resize(n_cols);
    long prev = 0;
    bool first = true;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string where = path + ":" + std::to_string(i + 1);
        const auto fields = split_csv(lines[i]);
        if (fields.size() != n_cols + 1)
            throw DataError(where + ": expected " + std::to_string(n_cols + 1) +
                            " fields, got " + std::to_string(fields.size()));
        const long date = parse_date(fields[0]);
        if (first) {
            out.start_date = date;
            first = false;
        } else if (date != prev + 1) {
            throw DataError(where + ": dates must be consecutive days (got " + fields[0] + ")");
        }
        prev = date;
        for (std::size_t c = 0; c < n_cols; ++c)
            out.columns[c].push_back(parse_double(fields[c + 1], where));
    }
    if (first) throw DataError(path + ": no data rows");
    return out;
}

std::string forcing_header() {
    std::string h = "date";
    for (const char* n : kForcingNames) {
        h += ',';
        h += n;
    }
    return h;
}

BasinRecord load_basin(const std::string& root, const std::string& id, const AttrRow& attrs) {
    const std::string dir = root + "/" + id;
    const SeriesFile forcing = read_series(dir + "/forcing.csv", forcing_header());
    const SeriesFile discharge = read_series(dir + "/discharge.csv", "date,discharge");

    if (forcing.start_date != discharge.start_date ||
        forcing.columns[0].size() != discharge.columns[0].size())
        throw DataError(dir + ": forcing and discharge must share the same daily calendar");

    BasinRecord rec;
    rec.id = id;
    rec.start_date = forcing.start_date;
    rec.attributes = attrs.numeric;
    rec.categorical = attrs.categorical;

    const std::size_t n = forcing.columns[0].size();
    rec.forcing = Matrix(n, kForcingNames.size());
    for (std::size_t c = 0; c < kForcingNames.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) rec.forcing(i, c) = forcing.columns[c][i];

    // Negative discharge codes (CAMELS uses -999) mean "not observed".
    rec.discharge.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = discharge.columns[0][i];
        rec.discharge[i] = (std::isnan(q) || q < 0.0) ? std::nan("") : q;
    }
    return rec;
}

} // namespace

std::vector<BasinRecord> ingest(const std::string& root,
                                const std::vector<std::string>& basin_ids) {
    const std::string attr_path = root + "/attributes.csv";
    if (!fs::exists(attr_path)) throw DataError(attr_path + ": not found");
    const auto attr_rows = read_attributes(attr_path);

    std::vector<std::string> ids = basin_ids;
    if (ids.empty())
        for (const auto& [id, _] : attr_rows) ids.push_back(id);

    std::vector<BasinRecord> records;
    for (const std::string& id : ids) {
        const auto it = attr_rows.find(id);
        if (it == attr_rows.end()) {
            std::cerr << "ingest: basin " << id << " missing from attributes.csv; skipped\n";
            continue;
        }
        try {
            records.push_back(load_basin(root, id, it->second));
        } catch (const Error& e) {
            std::cerr << "ingest: basin " << id << " skipped: " << e.what() << "\n";
        }
    }
    if (records.empty()) throw DataError("ingest: no usable basin under '" + root + "'");
    std::sort(records.begin(), records.end(),
              [](const BasinRecord& a, const BasinRecord& b) { return a.id < b.id; });
    return records;
}

void serialize_dataset(const std::string& root, const std::vector<BasinRecord>& records) {
    fs::create_directories(root);
    std::string attrs = attributes_header();
    attrs += '\n';
    std::vector<const BasinRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const BasinRecord* a, const BasinRecord* b) { return a->id < b->id; });

    for (const BasinRecord* rec : sorted) {
        attrs += rec->id;
        for (const auto& col : kAttributeColumns) {
            attrs += ',';
            if (col.numeric_index >= 0)
                attrs += fmt_full(rec->attributes[col.numeric_index]);
            else
                attrs += rec->categorical[col.categorical_index];
        }
        attrs += '\n';

        const std::string dir = root + "/" + rec->id;
        fs::create_directories(dir);

        std::string forcing = forcing_header();
        forcing += '\n';
        for (std::size_t i = 0; i < rec->n_days(); ++i) {
            forcing += format_date(rec->start_date + static_cast<long>(i));
            for (std::size_t c = 0; c < kForcingNames.size(); ++c) {
                forcing += ',';
                forcing += fmt_full(rec->forcing(i, c));
            }
            forcing += '\n';
        }
        write_text_atomic(dir + "/forcing.csv", forcing);

        std::string discharge = "date,discharge\n";
        for (std::size_t i = 0; i < rec->n_days(); ++i) {
            discharge += format_date(rec->start_date + static_cast<long>(i));
            discharge += ',';
            const double q = rec->discharge[i];
            discharge += std::isnan(q) ? "-999" : fmt_full(q);
            discharge += '\n';
        }
        write_text_atomic(dir + "/discharge.csv", discharge);
    }
    write_text_atomic(root + "/attributes.csv", attrs);
}

} // namespace flowcast
