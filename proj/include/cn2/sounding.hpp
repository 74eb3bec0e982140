#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cn2 {

enum class AltitudeReference { above_ground, above_sea_level };

/// One radiosonde level. Altitudes are meters, pressure hPa, temperature K.
struct LevelRecord {
    double altitude_m = 0.0;
    double pressure_hpa = 0.0;
    double temperature_k = 0.0;
};

/// A complete radiosonde ascent, normalized: levels sorted by altitude,
/// strictly increasing (duplicate altitudes averaged at parse time).
struct SoundingProfile {
    std::string station_id;
    std::string launch_time;  // ISO-8601 UTC, empty when unknown
    AltitudeReference altitude_reference = AltitudeReference::above_ground;
    double station_elevation_m = 0.0;
    std::vector<LevelRecord> levels;

    // parse bookkeeping
    std::size_t dropped_rows = 0;      // rows missing a mandatory field
    std::size_t merged_duplicates = 0; // duplicate-altitude rows averaged away

    double min_altitude_m() const;
    double max_altitude_m() const;

    /// True when the ascent tops out at or above `ceiling_m`.
    /// A non-positive ceiling disables the check.
    bool reaches(double ceiling_m) const;

    /// Returns a copy with altitudes re-expressed above ground. For
    /// above_sea_level profiles the station elevation is subtracted.
    SoundingProfile to_above_ground() const;
};

struct Ct2Level {
    double altitude_m = 0.0;
    double ct2 = 0.0;  // K^2 m^(-2/3)
};

/// Thermosonde ascent: temperature structure parameter versus altitude.
struct ThermosondeProfile {
    std::vector<Ct2Level> levels;
    double sensor_spacing_m = 1.0;
    std::size_t merged_duplicates = 0;
    std::size_t sort_warnings = 0;  // rows that arrived out of order
};

enum class SoundingFormat {
    auto_detect,
    csv,         // altitude_m,pressure_hPa,temperature_K|temperature_C[,...]
    fixed_width, // 7-char columns, PRES HGHT TEMP ... (see README)
};

/// Parses a sounding stream. Temperatures are converted to kelvin, levels
/// sorted by altitude and duplicate altitudes collapsed to their mean.
/// Rows with a missing mandatory field are dropped and counted.
///
/// Throws FormatError on an unrecognized header, ValidationError on
/// non-physical values (p <= 0, T <= 0 K or > 400 K, altitude < 0) naming
/// the offending row, InsufficientDataError when fewer than 10 valid
/// levels remain.
SoundingProfile parse_sounding(std::istream& in,
                               SoundingFormat format = SoundingFormat::auto_detect);

/// Parses a thermosonde stream (header altitude_m,ct2_K2m23).
/// Unsorted input is sorted with a warning count; duplicate altitudes are
/// averaged. Negative ct2 raises ValidationError; an empty file raises
/// InsufficientDataError.
ThermosondeProfile parse_thermosonde(std::istream& in);

/// Canonical CSV writers. parse(serialize(p)) round-trips bit-identically.
void serialize_sounding_csv(const SoundingProfile& profile, std::ostream& out);
void serialize_thermosonde_csv(const ThermosondeProfile& profile, std::ostream& out);

/// Applies a metadata sidecar (JSON: station_id, lat, lon, elevation_m,
/// launch_time, optional altitude_reference) to a parsed profile.
void apply_metadata_sidecar(SoundingProfile& profile, std::istream& json_in);

/// Temperature-to-refractive-index structure parameter conversion:
///   Cn2 = (79e-6 * p / T^2)^2 * Ct2
/// with p in hPa and T in kelvin.
double ct2_to_cn2(double ct2, double pressure_hpa, double temperature_k);

} // namespace cn2
