#include "cn2/sounding.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cn2/csv.hpp"
#include "cn2/errors.hpp"
#include <nlohmann/json.hpp>

namespace cn2 {

double SoundingProfile::min_altitude_m() const {
    if (levels.empty()) throw InsufficientDataError("sounding has no levels");
    return levels.front().altitude_m;
}

double SoundingProfile::max_altitude_m() const {
    if (levels.empty()) throw InsufficientDataError("sounding has no levels");
    return levels.back().altitude_m;
}

bool SoundingProfile::reaches(double ceiling_m) const {
    if (ceiling_m <= 0.0) return true;
    return !levels.empty() && levels.back().altitude_m >= ceiling_m;
}

SoundingProfile SoundingProfile::to_above_ground() const {
    SoundingProfile out = *this;
    if (altitude_reference == AltitudeReference::above_sea_level) {
        for (auto& lv : out.levels) lv.altitude_m -= station_elevation_m;
        out.altitude_reference = AltitudeReference::above_ground;
    }
    return out;
}

double ct2_to_cn2(double ct2, double pressure_hpa, double temperature_k) {
    if (ct2 < 0.0) throw ValidationError("ct2 must be non-negative");
    if (pressure_hpa <= 0.0) throw ValidationError("pressure must be positive");
    if (temperature_k <= 0.0) throw ValidationError("temperature must be positive");
    const double dn_dt = 79e-6 * pressure_hpa / (temperature_k * temperature_k);
    return dn_dt * dn_dt * ct2;
}

namespace {

constexpr double kCelsiusOffset = 273.15;
constexpr std::size_t kMinLevels = 10;

void check_physical(double altitude_m, double pressure_hpa, double temperature_k,
                    std::size_t row) {
    if (altitude_m < 0.0)
        throw ValidationError("row " + std::to_string(row) +
                              ": negative altitude " + csv::format_double(altitude_m));
    if (pressure_hpa <= 0.0)
        throw ValidationError("row " + std::to_string(row) +
                              ": non-positive pressure " + csv::format_double(pressure_hpa));
    if (temperature_k <= 0.0 || temperature_k > 400.0)
        throw ValidationError("row " + std::to_string(row) +
                              ": temperature " + csv::format_double(temperature_k) +
                              " K outside (0, 400]");
}

/// Sorts by altitude (stable) and averages exact-duplicate altitudes.
std::size_t normalize_levels(std::vector<LevelRecord>& levels) {
    std::stable_sort(levels.begin(), levels.end(),
                     [](const LevelRecord& a, const LevelRecord& b) {
                         return a.altitude_m < b.altitude_m;
                     });
    std::vector<LevelRecord> merged;
    merged.reserve(levels.size());
    std::size_t duplicates = 0;
    std::size_t i = 0;
    while (i < levels.size()) {
        std::size_t j = i + 1;
        double p = levels[i].pressure_hpa;
        double t = levels[i].temperature_k;
        while (j < levels.size() && levels[j].altitude_m == levels[i].altitude_m) {
            p += levels[j].pressure_hpa;
            t += levels[j].temperature_k;
            ++j;
        }
        const auto n = static_cast<double>(j - i);
        merged.push_back({levels[i].altitude_m, p / n, t / n});
        duplicates += j - i - 1;
        i = j;
    }
    levels = std::move(merged);
    return duplicates;
}

SoundingProfile parse_sounding_csv(std::istream& in) {
    auto table = csv::read_table(in);
    if (table.header.empty())
        throw InsufficientDataError("empty sounding file");

    const int col_alt = table.column("altitude_m");
    const int col_p = table.column("pressure_hPa");
    const int col_tk = table.column("temperature_K");
    const int col_tc = table.column("temperature_C");
    if (col_alt < 0 || col_p < 0 || (col_tk < 0 && col_tc < 0))
        throw FormatError("sounding CSV header must name altitude_m, pressure_hPa "
                          "and temperature_K or temperature_C");
    if (col_tk >= 0 && col_tc >= 0)
        throw FormatError("sounding CSV header names both temperature_K and temperature_C");
    const bool celsius = col_tk < 0;
    const int col_t = celsius ? col_tc : col_tk;

    SoundingProfile profile;
    std::size_t row_no = 1;  // header is row 1
    for (const auto& row : table.rows) {
        ++row_no;
        const auto alt = row[static_cast<std::size_t>(col_alt)];
        const auto p = row[static_cast<std::size_t>(col_p)];
        const auto t = row[static_cast<std::size_t>(col_t)];
        if (!alt || !p || !t) {
            ++profile.dropped_rows;
            continue;
        }
        const double t_k = celsius ? *t + kCelsiusOffset : *t;
        check_physical(*alt, *p, t_k, row_no);
        profile.levels.push_back({*alt, *p, t_k});
    }
    return profile;
}

/// Fixed-width layout: 7-character columns in the order
/// PRES HGHT TEMP DWPT RELH MIXR DRCT SKNT THTA THTE THTV (TEMP in degC).
/// Blank slices mark missing values. Header/separator lines are skipped.
SoundingProfile parse_sounding_fixed(std::istream& in) {
    constexpr int kWidth = 7;
    SoundingProfile profile;
    std::string line;
    std::size_t row_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.find("PRES") != std::string::npos &&
            line.find("HGHT") != std::string::npos) {
            saw_header = true;
            continue;
        }
        if (line.find_first_not_of(" -\r\t") == std::string::npos) continue;
        if (line.find_first_not_of(" 0123456789.-\r\t") != std::string::npos)
            continue;  // station metadata or units line
        auto slice = [&](int idx) -> std::optional<double> {
            const std::size_t start = static_cast<std::size_t>(idx) * kWidth;
            if (start >= line.size()) return std::nullopt;
            std::string field = line.substr(start, kWidth);
            const auto b = field.find_first_not_of(" \r\t");
            if (b == std::string::npos) return std::nullopt;
            const auto e = field.find_last_not_of(" \r\t");
            return csv::parse_field(field.substr(b, e - b + 1));
        };
        const auto p = slice(0);
        const auto h = slice(1);
        const auto t_c = slice(2);
        if (!p || !h || !t_c) {
            ++profile.dropped_rows;
            continue;
        }
        const double t_k = *t_c + kCelsiusOffset;
        check_physical(*h, *p, t_k, row_no);
        profile.levels.push_back({*h, *p, t_k});
    }
    if (!saw_header && profile.levels.empty())
        throw FormatError("fixed-width sounding lacks a PRES/HGHT header");
    return profile;
}

SoundingFormat detect_format(std::istream& in) {
    const auto pos = in.tellg();
    std::string line;
    std::string first_line;
    std::optional<SoundingFormat> detected;
    // Title/station lines may precede the fixed-width column header, so
    // scan until either marker shows up.
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (first_line.empty()) first_line = line;
        if (line.find("altitude_m") != std::string::npos) {
            detected = SoundingFormat::csv;
            break;
        }
        if (line.find("PRES") != std::string::npos &&
            line.find("HGHT") != std::string::npos) {
            detected = SoundingFormat::fixed_width;
            break;
        }
    }
    if (!detected)
        throw FormatError("unrecognized sounding header: " +
                          (first_line.empty() ? "<empty file>" : first_line));
    in.clear();
    in.seekg(pos);
    return *detected;
}

} // namespace

SoundingProfile parse_sounding(std::istream& in, SoundingFormat format) {
    if (format == SoundingFormat::auto_detect) format = detect_format(in);
    SoundingProfile profile = format == SoundingFormat::csv
                                  ? parse_sounding_csv(in)
                                  : parse_sounding_fixed(in);
    profile.merged_duplicates = normalize_levels(profile.levels);
    if (profile.levels.size() < kMinLevels)
        throw InsufficientDataError("sounding has " +
                                    std::to_string(profile.levels.size()) +
                                    " valid levels, need at least " +
                                    std::to_string(kMinLevels));
    return profile;
}

ThermosondeProfile parse_thermosonde(std::istream& in) {
    auto table = csv::read_table(in);
    if (table.header.empty() || table.rows.empty())
        throw InsufficientDataError("empty thermosonde file");
    const int col_alt = table.column("altitude_m");
    const int col_ct2 = table.column("ct2_K2m23");
    if (col_alt < 0 || col_ct2 < 0)
        throw FormatError("thermosonde CSV header must name altitude_m and ct2_K2m23");

    ThermosondeProfile profile;
    std::size_t row_no = 1;
    double prev_alt = -1.0;
    for (const auto& row : table.rows) {
        ++row_no;
        const auto alt = row[static_cast<std::size_t>(col_alt)];
        const auto ct2 = row[static_cast<std::size_t>(col_ct2)];
        if (!alt || !ct2) continue;
        if (*ct2 < 0.0)
            throw ValidationError("row " + std::to_string(row_no) +
                                  ": negative ct2 " + csv::format_double(*ct2));
        if (!profile.levels.empty() && *alt < prev_alt) ++profile.sort_warnings;
        prev_alt = *alt;
        profile.levels.push_back({*alt, *ct2});
    }
    if (profile.levels.empty())
        throw InsufficientDataError("thermosonde file has no valid rows");

    std::stable_sort(profile.levels.begin(), profile.levels.end(),
                     [](const Ct2Level& a, const Ct2Level& b) {
                         return a.altitude_m < b.altitude_m;
                     });
    std::vector<Ct2Level> merged;
    merged.reserve(profile.levels.size());
    std::size_t i = 0;
    while (i < profile.levels.size()) {
        std::size_t j = i + 1;
        double sum = profile.levels[i].ct2;
        while (j < profile.levels.size() &&
               profile.levels[j].altitude_m == profile.levels[i].altitude_m) {
            sum += profile.levels[j].ct2;
            ++j;
        }
        merged.push_back({profile.levels[i].altitude_m,
                          sum / static_cast<double>(j - i)});
        profile.merged_duplicates += j - i - 1;
        i = j;
    }
    profile.levels = std::move(merged);
    return profile;
}

void serialize_sounding_csv(const SoundingProfile& profile, std::ostream& out) {
    out << "altitude_m,pressure_hPa,temperature_K\n";
    for (const auto& lv : profile.levels)
        out << csv::format_double(lv.altitude_m) << ','
            << csv::format_double(lv.pressure_hpa) << ','
            << csv::format_double(lv.temperature_k) << '\n';
}

void serialize_thermosonde_csv(const ThermosondeProfile& profile, std::ostream& out) {
    out << "altitude_m,ct2_K2m23\n";
    for (const auto& lv : profile.levels)
        out << csv::format_double(lv.altitude_m) << ','
            << csv::format_double(lv.ct2) << '\n';
}

void apply_metadata_sidecar(SoundingProfile& profile, std::istream& json_in) {
    nlohmann::json meta;
    try {
        json_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("metadata sidecar is not valid JSON: ") + e.what());
    }
    if (meta.contains("station_id")) profile.station_id = meta["station_id"].get<std::string>();
    if (meta.contains("launch_time")) profile.launch_time = meta["launch_time"].get<std::string>();
    if (meta.contains("elevation_m")) profile.station_elevation_m = meta["elevation_m"].get<double>();
    if (meta.contains("altitude_reference")) {
        const auto ref = meta["altitude_reference"].get<std::string>();
        if (ref == "above_ground")
            profile.altitude_reference = AltitudeReference::above_ground;
        else if (ref == "above_sea_level")
            profile.altitude_reference = AltitudeReference::above_sea_level;
        else
            throw ValidationError("unknown altitude_reference: " + ref);
    }
}

} // namespace cn2
