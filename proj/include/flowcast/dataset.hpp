#ifndef FLOWCAST_DATASET_HPP
#define FLOWCAST_DATASET_HPP

#include "flowcast/numerics.hpp"

#include <array>
#include <string>
#include <vector>

namespace flowcast {

/** Forcing column order in BasinRecord::forcing and forcing.csv. */
inline const std::array<const char*, 6> kForcingNames = {"prcp", "srad",  "tmax",
                                                         "tmin", "vp",    "dayl"};
inline constexpr int kForcingPrcp = 0;
inline constexpr int kForcingTmax = 2;
inline constexpr int kForcingTmin = 3;

/** Static attributes, numeric part (attributes.csv column order interleaves
 *  the categorical ones; see kAttributeColumns in dataset.cpp). */
inline const std::array<const char*, 14> kNumericAttributeNames = {
    "elev_mean",      "slope_mean",        "area_gages2",     "frac_forest",
    "lai_max",        "lai_diff",          "dom_land_cover_frac", "root_depth_50",
    "soil_depth_statgso", "soil_porosity", "soil_conductivity", "max_water_content",
    "geol_porosity",  "geol_permeability"};
inline constexpr int kAttrAreaIndex = 2; // area_gages2

inline const std::array<const char*, 3> kCategoricalAttributeNames = {
    "dom_land_cover", "geol_class_1st", "geol_class_2nd"};

/**
 * One catchment: static attributes plus aligned daily forcing and discharge
 * series. Discharge is in native units (cubic feet per second for CAMELS)
 * with NaN marking missing days.
 */
struct BasinRecord {
    std::string id;
    long start_date = 0; // serial day of the first row
    Matrix forcing;      // n_days x 6, kForcingNames order
    std::vector<double> discharge;
    std::vector<double> attributes; // kNumericAttributeNames order
    std::array<std::string, 3> categorical;

    std::size_t n_days() const { return discharge.size(); }
    long end_date() const { return start_date + static_cast<long>(n_days()) - 1; }
    double area_km2() const { return attributes[kAttrAreaIndex]; }
};

/**
 * Read a dataset directory:
 *   root/attributes.csv            one row per basin, Table-1 column order
 *   root/<basin_id>/forcing.csv    date,prcp,srad,tmax,tmin,vp,dayl
 *   root/<basin_id>/discharge.csv  date,discharge   (negative = missing code)
 *
 * Basins with missing/malformed files are skipped with a log line naming
 * the file (and line, for parse errors). Throws DataError when no usable
 * basin remains. An empty `basin_ids` loads every basin in attributes.csv.
 */
std::vector<BasinRecord> ingest(const std::string& root,
                                const std::vector<std::string>& basin_ids = {});

/** Write records back out in the same layout (atomic per file). */
void serialize_dataset(const std::string& root, const std::vector<BasinRecord>& records);

} // namespace flowcast

#endif // FLOWCAST_DATASET_HPP
