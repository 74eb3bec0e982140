// cn2profiler - batch estimation of optical turbulence profiles from
// radiosonde soundings, synthetic-field studies, and analytic-model
// calibration/fitting. CSV in, CSV/JSON out; no plotting.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cn2/csv.hpp"
#include "cn2/errors.hpp"
#include "cn2/estimator.hpp"
#include "cn2/models.hpp"
#include "cn2/parallel.hpp"
#include "cn2/profile_prep.hpp"
#include "cn2/sounding.hpp"
#include "cn2/synthesis.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// exit codes: 0 ok, 1 usage, 2 io, 3 validation, 4 numerical, 5 empty result
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitEmpty = 5;

class EmptyResult : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const cn2::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const cn2::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const EmptyResult& e) {
        std::cerr << "empty result: " << e.what() << '\n';
        return kExitEmpty;
    } catch (const cn2::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

// ---------------------------------------------------------------------------
// small IO helpers
// ---------------------------------------------------------------------------

void atomic_write(const fs::path& target, const std::string& content) {
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw cn2::IoError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw cn2::IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw cn2::IoError("cannot move " + tmp.string() + " to " + target.string());
}

std::ifstream open_input(const fs::path& path) {
    if (!fs::exists(path)) throw cn2::IoError("no such file: " + path.string());
    std::ifstream in(path);
    if (!in) throw cn2::IoError("cannot read " + path.string());
    return in;
}

fs::path meta_path_for(const fs::path& out) {
    fs::path p = out;
    p += ".meta.json";
    return p;
}

std::string cn2_profile_csv(const cn2::Cn2Profile& profile) {
    std::ostringstream out;
    out << "altitude_m,cn2_m_23\n";
    for (std::size_t i = 0; i < profile.size(); ++i)
        out << cn2::csv::format_double(profile.altitude_m[i]) << ','
            << cn2::csv::format_double(profile.cn2[i]) << '\n';
    return out.str();
}

cn2::Cn2Profile read_cn2_csv(const fs::path& path) {
    auto in = open_input(path);
    auto table = cn2::csv::read_table(in);
    const int col_z = table.column("altitude_m");
    const int col_v = table.column("cn2_m_23");
    if (col_z < 0 || col_v < 0)
        throw cn2::FormatError(path.string() + ": expected header altitude_m,cn2_m_23");
    cn2::Cn2Profile profile;
    profile.provenance = path.filename().string();
    for (const auto& row : table.rows) {
        const auto z = row[static_cast<std::size_t>(col_z)];
        const auto v = row[static_cast<std::size_t>(col_v)];
        if (!z || !v) continue;
        profile.altitude_m.push_back(*z);
        profile.cn2.push_back(*v);
    }
    if (profile.size() == 0)
        throw cn2::InsufficientDataError(path.string() + ": no usable rows");
    return profile;
}

double infer_grid_spacing(const cn2::Cn2Profile& profile) {
    double best = 0.0;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        const double d = profile.altitude_m[i] - profile.altitude_m[i - 1];
        if (d > 0.0 && (best == 0.0 || d < best)) best = d;
    }
    if (best <= 0.0)
        throw cn2::ValidationError("cannot infer grid spacing from profile");
    return best;
}

// ---------------------------------------------------------------------------
// shared option blocks
// ---------------------------------------------------------------------------

struct EstimatorFlags {
    double dz = 100.0;
    std::size_t omega = 2;
    std::size_t m = 1;
    double scale_factor = 1.0;
    std::optional<double> wavelength;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dz", dz, "Resampling grid spacing [m]")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--omega", omega, "Window mean half-width (window is 2w+1)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--m", m, "Estimator separation in grid steps (delta = m dz)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--scale-factor", scale_factor, "Calibration factor c")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--wavelength", wavelength,
                        "Optical wavelength [um]; omit for the broadband index");
    }

    cn2::EstimatorConfig config() const {
        cn2::EstimatorConfig cfg;
        cfg.dz_m = dz;
        cfg.window_half_width = omega;
        cfg.separation_steps = m;
        cfg.scale_factor = scale_factor;
        cfg.wavelength_um = wavelength;
        return cfg;
    }

    json echo() const {
        json j;
        j["dz_m"] = dz;
        j["omega"] = omega;
        j["m"] = m;
        j["scale_factor"] = scale_factor;
        if (wavelength)
            j["wavelength_um"] = *wavelength;
        else
            j["wavelength_um"] = nullptr;
        return j;
    }
};

cn2::CalibrationBand parse_band(const std::string& text) {
    const auto sep = text.find(':');
    if (sep == std::string::npos)
        throw cn2::ConfigError("--band expects LOW:HIGH in meters");
    const auto lo = cn2::csv::parse_field(text.substr(0, sep));
    const auto hi = cn2::csv::parse_field(text.substr(sep + 1));
    if (!lo || !hi || !(*hi > *lo) || *lo < 0)
        throw cn2::ConfigError("--band expects 0 <= LOW < HIGH");
    return {*lo, *hi};
}

json params_to_json(const cn2::GeneralizedHVParams& p) {
    json j;
    j["A"] = p.A;
    j["B"] = p.B;
    j["C"] = p.C;
    j["D"] = p.D;
    j["H_A"] = p.H_A;
    j["H_B"] = p.H_B;
    j["H_C"] = p.H_C;
    j["H_D"] = p.H_D;
    j["d"] = p.d;
    j["layers"] = json::array();
    for (const auto& layer : p.layers) {
        json l;
        l["E"] = layer.magnitude;
        l["H_E"] = layer.center_m;
        l["e"] = layer.thickness_m;
        j["layers"].push_back(l);
    }
    return j;
}

cn2::GeneralizedHVParams params_from_json(const json& j) {
    cn2::GeneralizedHVParams p;
    auto get = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = j.at(key).get<double>();
    };
    get("A", p.A);
    get("B", p.B);
    get("C", p.C);
    get("D", p.D);
    get("H_A", p.H_A);
    get("H_B", p.H_B);
    get("H_C", p.H_C);
    get("H_D", p.H_D);
    get("d", p.d);
    if (j.contains("layers"))
        for (const auto& l : j.at("layers"))
            p.layers.push_back({l.at("E").get<double>(), l.at("H_E").get<double>(),
                                l.at("e").get<double>()});
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// compute
// ---------------------------------------------------------------------------

struct ComputeArgs {
    std::vector<std::string> inputs;
    std::string out_dir;
    EstimatorFlags est;
    double ceiling = 30000.0;
    std::optional<double> z_start;
    unsigned threads = 0;
};

void cmd_compute(const ComputeArgs& args) {
    for (const auto& input : args.inputs)
        if (!fs::exists(input)) throw cn2::IoError("no such file: " + input);
    {
        std::set<std::string> stems;
        for (const auto& input : args.inputs) {
            const auto stem = fs::path(input).stem().string();
            if (!stems.insert(stem).second)
                throw cn2::ConfigError("two inputs share the output name " + stem +
                                       ".cn2.csv; rename one");
        }
    }
    fs::create_directories(args.out_dir);

    struct FileOutcome {
        std::string input;
        std::string output;  // empty when skipped/failed
        std::string error;
        bool skipped_ceiling = false;
    };
    std::vector<FileOutcome> outcomes(args.inputs.size());

    const auto cfg = args.est.config();
    cn2::parallel_for(args.inputs.size(), args.threads, [&](std::size_t idx) {
        auto& outcome = outcomes[idx];
        outcome.input = args.inputs[idx];
        try {
            const fs::path in_path(args.inputs[idx]);
            auto stream = open_input(in_path);
            auto sounding = cn2::parse_sounding(stream);
            fs::path sidecar = in_path;
            sidecar.replace_extension(".json");
            if (fs::exists(sidecar)) {
                auto meta_stream = open_input(sidecar);
                cn2::apply_metadata_sidecar(sounding, meta_stream);
            }
            sounding = sounding.to_above_ground();
            if (!sounding.reaches(args.ceiling)) {
                outcome.skipped_ceiling = true;
                return;
            }
            auto uniform = cn2::resample_profile(sounding, cfg.dz_m, args.z_start,
                                                 cfg.wavelength_um);
            auto fluct = cn2::extract_fluctuations(uniform, cfg.window_half_width);
            std::string provenance = sounding.station_id.empty()
                                         ? in_path.filename().string()
                                         : sounding.station_id + " " + sounding.launch_time;
            auto profile = cn2::estimate_cn2(fluct, cfg, provenance);
            fs::path out = fs::path(args.out_dir) / (in_path.stem().string() + ".cn2.csv");
            atomic_write(out, cn2_profile_csv(profile));
            outcome.output = out.string();
        } catch (const cn2::Error& e) {
            outcome.error = e.what();
        }
    });

    json summary;
    summary["command"] = "compute";
    summary["config"] = args.est.echo();
    summary["config"]["ceiling_m"] = args.ceiling;
    if (args.z_start) summary["config"]["z_start_m"] = *args.z_start;
    std::size_t processed = 0, skipped = 0, failed = 0;
    json files = json::array();
    for (const auto& o : outcomes) {
        json f;
        f["input"] = o.input;
        if (!o.output.empty()) {
            ++processed;
            f["output"] = o.output;
        } else if (o.skipped_ceiling) {
            ++skipped;
            f["skipped"] = "ceiling";
        } else {
            ++failed;
            f["error"] = o.error;
        }
        files.push_back(f);
    }
    summary["processed"] = processed;
    summary["skipped_ceiling"] = skipped;
    summary["failed_parse"] = failed;
    summary["files"] = files;
    atomic_write(fs::path(args.out_dir) / "summary.json", summary.dump(2) + "\n");

    std::cout << "processed " << processed << ", skipped (ceiling) " << skipped
              << ", failed " << failed << '\n';
    if (processed == 0) throw EmptyResult("no profile was produced");
}

// ---------------------------------------------------------------------------
// average
// ---------------------------------------------------------------------------

struct AverageArgs {
    std::vector<std::string> inputs;
    std::string out_file;
    double min_fraction = 0.8;
    std::optional<double> dz;
};

void cmd_average(const AverageArgs& args) {
    std::vector<cn2::Cn2Profile> profiles;
    profiles.reserve(args.inputs.size());
    for (const auto& input : args.inputs) profiles.push_back(read_cn2_csv(input));

    const double dz = args.dz ? *args.dz : infer_grid_spacing(profiles.front());
    for (auto& p : profiles) {
        const double own = infer_grid_spacing(p);
        if (std::abs(own - dz) > 1e-6 * dz)
            throw cn2::ConfigError(p.provenance + ": grid spacing " +
                                   std::to_string(own) + " m differs from " +
                                   std::to_string(dz) + " m");
        p.config.dz_m = dz;
    }
    auto mean = cn2::average_profiles(profiles, args.min_fraction);
    atomic_write(args.out_file, cn2_profile_csv(mean));

    std::set<long long> lattice;
    for (const auto& p : profiles)
        for (double z : p.altitude_m) lattice.insert(std::llround(z / dz));

    json meta;
    meta["command"] = "average";
    meta["config"]["dz_m"] = dz;
    meta["config"]["min_fraction"] = args.min_fraction;
    meta["profiles"] = profiles.size();
    meta["levels"] = mean.size();
    meta["dropped_levels"] = lattice.size() - mean.size();
    atomic_write(meta_path_for(args.out_file), meta.dump(2) + "\n");
    std::cout << "averaged " << profiles.size() << " profiles onto " << mean.size()
              << " levels\n";
}

// ---------------------------------------------------------------------------
// synth / study
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out_file;
    std::size_t count = 1u << 20;
    double dz = 0.1;
    double cn2 = 1e-16;
    double outer_scale = 100.0;
    double inner_scale = 1e-3;
    double n0 = 1.0003;
    std::size_t alias_terms = 32;
    std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& args) {
    cn2::VonKarmanParams params{args.cn2, args.outer_scale, args.inner_scale};
    cn2::SynthesisOptions opts;
    opts.mean_n0 = args.n0;
    opts.alias_terms = args.alias_terms;
    auto field = cn2::synthesize_fluctuations(args.count, args.dz, params, args.seed, opts);
    std::ostringstream csv;
    cn2::serialize_field_csv(field, csv);
    atomic_write(args.out_file, csv.str());

    json meta;
    meta["command"] = "synth";
    meta["config"] = {{"samples", args.count},          {"dz_m", args.dz},
                      {"cn2", args.cn2},                {"L0_m", args.outer_scale},
                      {"l0_m", args.inner_scale},       {"n0", args.n0},
                      {"alias_terms", args.alias_terms}, {"seed", args.seed}};
    meta["band_variance"] = field.band_variance;
    atomic_write(meta_path_for(args.out_file), meta.dump(2) + "\n");
    std::cout << "wrote " << args.count << " samples to " << args.out_file << '\n';
}

struct StudyArgs {
    std::string out_file;
    std::vector<double> dz_list{25, 50, 100, 200, 400};
    std::vector<double> L0_list{100.0};
    std::vector<std::size_t> omega_list{2};
    std::vector<std::size_t> m_list{1};
    std::size_t trials = 8;
    std::size_t samples = 1u << 15;
    double cn2 = 1e-16;
    double guard = 0.1;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

void cmd_study(const StudyArgs& args) {
    cn2::StudyConfig cfg;
    cfg.dz_list = args.dz_list;
    cfg.outer_scale_list = args.L0_list;
    cfg.window_list = args.omega_list;
    cfg.separation_steps_list = args.m_list;
    cfg.trials = args.trials;
    cfg.samples = args.samples;
    cfg.cn2 = args.cn2;
    cfg.guard_fraction = args.guard;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    auto rows = cn2::scale_factor_study(cfg);

    std::ostringstream csv;
    cn2::serialize_study_csv(rows, csv);
    atomic_write(args.out_file, csv.str());

    json meta;
    meta["command"] = "study";
    meta["config"] = {{"dz_list", args.dz_list},       {"L0_list", args.L0_list},
                      {"omega_list", args.omega_list}, {"m_list", args.m_list},
                      {"trials", args.trials},         {"samples", args.samples},
                      {"cn2", args.cn2},               {"guard_fraction", args.guard},
                      {"seed", args.seed}};
    atomic_write(meta_path_for(args.out_file), meta.dump(2) + "\n");
    std::cout << "study wrote " << rows.size() << " rows to " << args.out_file << '\n';
}

// ---------------------------------------------------------------------------
// calibrate / fit
// ---------------------------------------------------------------------------

struct ModelFlags {
    std::string model = "hv57";
    std::string ghv_params_file;
    double hv_wind = 21.0;
    double hv_ground = 1.7e-14;

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", model, "Reference model: hv57 | hv | ghv")
            ->check(CLI::IsMember({"hv57", "hv", "ghv"}))
            ->capture_default_str();
        cmd->add_option("--hv-wind", hv_wind, "HV rms wind speed [m/s] (model=hv)")
            ->capture_default_str();
        cmd->add_option("--hv-ground", hv_ground, "HV ground Cn2 [m^-2/3] (model=hv)")
            ->capture_default_str();
        cmd->add_option("--ghv-params", ghv_params_file,
                        "JSON file with generalized HV parameters (model=ghv)");
    }

    std::function<double(double)> reference() const {
        if (model == "ghv") {
            if (ghv_params_file.empty())
                throw cn2::ConfigError("--model ghv requires --ghv-params");
            auto in = open_input(ghv_params_file);
            json j;
            in >> j;
            auto params = params_from_json(j);
            return [params](double z) { return cn2::generalized_hv_cn2(z, params); };
        }
        const cn2::HVParams params =
            model == "hv57" ? cn2::hv57() : cn2::HVParams{hv_wind, hv_ground};
        return [params](double z) { return cn2::hv_cn2(z, params); };
    }

    json echo() const {
        json j;
        j["model"] = model;
        if (model == "hv") {
            j["hv_wind_ms"] = hv_wind;
            j["hv_ground_cn2"] = hv_ground;
        }
        if (model == "ghv") j["ghv_params_file"] = ghv_params_file;
        return j;
    }
};

struct CalibrateArgs {
    std::string profile_file;
    std::string out_file;
    ModelFlags model;
    std::string band = "1000:4000";
    std::optional<double> station_elevation;
};

void cmd_calibrate(const CalibrateArgs& args) {
    auto profile = read_cn2_csv(args.profile_file);
    const auto band = parse_band(args.band);
    if (!args.station_elevation)
        std::cerr << "note: --station-elevation not set; comparing above-ground "
                     "altitudes against the sea-level reference directly\n";
    const double elevation = args.station_elevation.value_or(0.0);
    auto result = cn2::calibrate_scale_factor(profile, args.model.reference(), band,
                                              elevation);

    json report;
    report["command"] = "calibrate";
    report["config"]["profile"] = args.profile_file;
    report["config"]["band_m"] = {band.z_low_m, band.z_high_m};
    report["config"]["station_elevation_m"] = elevation;
    report["config"]["reference"] = args.model.echo();
    report["scale_factor"] = result.scale_factor;
    report["residual_log10_rms"] = result.residual_log10_rms;
    report["used_levels"] = result.used_levels;
    report["excluded_nonpositive"] = result.excluded_nonpositive;
    atomic_write(args.out_file, report.dump(2) + "\n");
    std::cout << "scale factor " << result.scale_factor << " (log10 rms "
              << result.residual_log10_rms << ")\n";
}

struct FitArgs {
    std::string profile_file;
    std::string out_file;
    std::string curve_file;
    std::string init_file;
    std::vector<std::string> fix;
    std::vector<std::string> free_params;
    std::vector<std::string> layers;  // "E,H_E,e"
    std::size_t starts = 8;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 6000;
    std::optional<double> station_elevation;
};

void apply_mask_names(cn2::GeneralizedHVMask& mask, const std::vector<std::string>& names,
                      bool value) {
    for (const auto& name : names) {
        if (name == "A") mask.A = value;
        else if (name == "B") mask.B = value;
        else if (name == "C") mask.C = value;
        else if (name == "D") mask.D = value;
        else if (name == "H_A") mask.H_A = value;
        else if (name == "H_B") mask.H_B = value;
        else if (name == "H_C") mask.H_C = value;
        else if (name == "H_D") mask.H_D = value;
        else if (name == "d") mask.d = value;
        else if (name == "E") mask.layer_magnitudes = value;
        else throw cn2::ConfigError("unknown parameter name: " + name);
    }
}

void cmd_fit(const FitArgs& args) {
    auto profile = read_cn2_csv(args.profile_file);

    cn2::GeneralizedHVParams init;
    if (!args.init_file.empty()) {
        auto in = open_input(args.init_file);
        json j;
        in >> j;
        init = params_from_json(j);
    } else {
        init.A = 1e-13;
        init.B = 2.7e-16;
        init.C = 1e-4;
        init.D = 1e-17;
    }
    for (const auto& spec : args.layers) {
        auto fields = cn2::csv::split_line(spec);
        if (fields.size() != 3) throw cn2::ConfigError("--layer expects E,H_E,e");
        auto e0 = cn2::csv::parse_field(fields[0]);
        auto e1 = cn2::csv::parse_field(fields[1]);
        auto e2 = cn2::csv::parse_field(fields[2]);
        if (!e0 || !e1 || !e2) throw cn2::ConfigError("--layer expects numbers E,H_E,e");
        init.layers.push_back({*e0, *e1, *e2});
    }

    cn2::GeneralizedHVMask mask;
    apply_mask_names(mask, args.fix, false);
    apply_mask_names(mask, args.free_params, true);

    cn2::FitOptions options;
    options.starts = args.starts;
    options.seed = args.seed;
    options.max_iterations = args.max_iterations;
    if (!args.station_elevation)
        std::cerr << "note: --station-elevation not set; fitting in above-ground "
                     "altitudes\n";
    options.station_elevation_m = args.station_elevation.value_or(0.0);

    auto fit = cn2::fit_generalized_hv(profile, init, mask, options);

    json report;
    report["command"] = "fit";
    report["config"]["profile"] = args.profile_file;
    report["config"]["starts"] = args.starts;
    report["config"]["seed"] = args.seed;
    report["config"]["station_elevation_m"] = options.station_elevation_m;
    report["config"]["init"] = params_to_json(init);
    report["params"] = params_to_json(fit.params);
    report["residual_log10_ss"] = fit.residual;
    report["initial_residual_log10_ss"] = fit.initial_residual;
    report["used_levels"] = fit.used_levels;
    report["excluded_nonpositive"] = fit.excluded_nonpositive;
    report["starts"] = json::array();
    for (const auto& s : fit.starts)
        report["starts"].push_back({{"start", s.start},
                                    {"residual", s.residual},
                                    {"iterations", s.iterations},
                                    {"converged", s.converged}});
    atomic_write(args.out_file, report.dump(2) + "\n");

    if (!args.curve_file.empty()) {
        std::ostringstream curve;
        curve << "altitude_m,cn2_m_23\n";
        for (double z : profile.altitude_m)
            curve << cn2::csv::format_double(z) << ','
                  << cn2::csv::format_double(cn2::generalized_hv_cn2(
                         z + options.station_elevation_m, fit.params))
                  << '\n';
        atomic_write(args.curve_file, curve.str());
    }
    std::cout << "fit residual " << fit.residual << " over " << fit.used_levels
              << " levels\n";
}

// ---------------------------------------------------------------------------
// thermo / compare
// ---------------------------------------------------------------------------

struct ThermoArgs {
    std::string thermosonde_file;
    std::string sounding_file;
    std::string out_file;
    double sensor_spacing = 1.0;
    EstimatorFlags est;
};

void cmd_thermo(const ThermoArgs& args) {
    auto t_in = open_input(args.thermosonde_file);
    auto thermo = cn2::parse_thermosonde(t_in);
    thermo.sensor_spacing_m = args.sensor_spacing;
    auto s_in = open_input(args.sounding_file);
    auto sounding = cn2::parse_sounding(s_in).to_above_ground();

    // thermosonde side: convert ct2 pointwise with p,T interpolated from
    // the radiosonde, then bin
    std::vector<std::pair<double, double>> converted;
    std::size_t outside = 0;
    const auto& levels = sounding.levels;
    for (const auto& lv : thermo.levels) {
        const double z = lv.altitude_m;
        if (z < levels.front().altitude_m || z > levels.back().altitude_m) {
            ++outside;
            continue;
        }
        auto it = std::lower_bound(levels.begin(), levels.end(), z,
                                   [](const cn2::LevelRecord& rec, double val) {
                                       return rec.altitude_m < val;
                                   });
        double p, temp;
        if (it == levels.begin() || it->altitude_m == z) {
            p = it->pressure_hpa;
            temp = it->temperature_k;
        } else {
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double f = (z - lo.altitude_m) / (hi.altitude_m - lo.altitude_m);
            p = lo.pressure_hpa + f * (hi.pressure_hpa - lo.pressure_hpa);
            temp = lo.temperature_k + f * (hi.temperature_k - lo.temperature_k);
        }
        converted.emplace_back(z, cn2::ct2_to_cn2(lv.ct2, p, temp));
    }
    if (converted.empty())
        throw EmptyResult("no thermosonde level inside the sounding range");
    auto thermo_bins = cn2::bin_average(converted, args.est.dz);

    // model side: the usual pipeline on the same sounding, binned identically
    const auto cfg = args.est.config();
    auto uniform = cn2::resample_profile(sounding, cfg.dz_m, std::nullopt,
                                         cfg.wavelength_um);
    auto fluct = cn2::extract_fluctuations(uniform, cfg.window_half_width);
    auto model = cn2::estimate_cn2(fluct, cfg, args.sounding_file);
    std::vector<std::pair<double, double>> model_samples;
    for (std::size_t i = 0; i < model.size(); ++i)
        model_samples.emplace_back(model.altitude_m[i], model.cn2[i]);
    auto model_bins = cn2::bin_average(model_samples, args.est.dz);

    std::ostringstream out;
    out << "bin_center_m,cn2_thermosonde_m_23,cn2_model_m_23\n";
    std::size_t paired = 0;
    for (const auto& [center, tv] : thermo_bins) {
        for (const auto& [mc, mv] : model_bins) {
            if (std::abs(mc - center) < 1e-9 * args.est.dz) {
                out << cn2::csv::format_double(center) << ','
                    << cn2::csv::format_double(tv) << ','
                    << cn2::csv::format_double(mv) << '\n';
                ++paired;
                break;
            }
        }
    }
    if (paired == 0) throw EmptyResult("thermosonde and model bins do not overlap");
    atomic_write(args.out_file, out.str());

    json meta;
    meta["command"] = "thermo";
    meta["config"] = args.est.echo();
    meta["config"]["thermosonde"] = args.thermosonde_file;
    meta["config"]["sounding"] = args.sounding_file;
    meta["config"]["sensor_spacing_m"] = args.sensor_spacing;
    meta["paired_bins"] = paired;
    meta["thermo_levels_outside_sounding"] = outside;
    atomic_write(meta_path_for(args.out_file), meta.dump(2) + "\n");
    std::cout << "paired " << paired << " bins\n";
}

struct CompareArgs {
    std::string file_a;
    std::string file_b;
    std::string out_file;
    double dz = 200.0;
};

void cmd_compare(const CompareArgs& args) {
    auto pa = read_cn2_csv(args.file_a);
    auto pb = read_cn2_csv(args.file_b);
    std::vector<std::pair<double, double>> sa, sb;
    for (std::size_t i = 0; i < pa.size(); ++i) sa.emplace_back(pa.altitude_m[i], pa.cn2[i]);
    for (std::size_t i = 0; i < pb.size(); ++i) sb.emplace_back(pb.altitude_m[i], pb.cn2[i]);
    auto ba = cn2::bin_average(sa, args.dz);
    auto bb = cn2::bin_average(sb, args.dz);

    std::ostringstream out;
    out << "bin_center_m,cn2_a_m_23,cn2_b_m_23,ratio_a_over_b\n";
    std::size_t paired = 0;
    for (const auto& [center, va] : ba) {
        for (const auto& [cb, vb] : bb) {
            if (std::abs(cb - center) < 1e-9 * args.dz) {
                const double ratio =
                    vb != 0.0 ? va / vb : std::numeric_limits<double>::quiet_NaN();
                out << cn2::csv::format_double(center) << ','
                    << cn2::csv::format_double(va) << ',' << cn2::csv::format_double(vb)
                    << ',' << cn2::csv::format_double(ratio) << '\n';
                ++paired;
                break;
            }
        }
    }
    if (paired == 0) throw EmptyResult("profiles share no altitude bin");
    atomic_write(args.out_file, out.str());
    std::cout << "paired " << paired << " bins\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optical turbulence (Cn2) profiles from radiosonde soundings:\n"
                 "structure-function estimation, von Karman synthesis studies,\n"
                 "and Hufnagel-Valley-family calibration and fitting."};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file (key=value lines); "
                                   "command-line flags take precedence");

    ComputeArgs compute;
    auto* c = app.add_subcommand("compute", "Estimate Cn2 profiles from soundings");
    c->add_option("inputs", compute.inputs, "Sounding files (CSV or fixed-width)")
        ->required()
        ->expected(-1);
    c->add_option("--out", compute.out_dir, "Output directory")->required();
    compute.est.attach(c);
    c->add_option("--ceiling", compute.ceiling,
                  "Required top altitude [m]; ascents below are skipped; <=0 disables")
        ->capture_default_str();
    c->add_option("--z-start", compute.z_start, "Grid start altitude [m] (default: auto)");
    c->add_option("--threads", compute.threads, "Worker threads (0 = auto)");

    AverageArgs average;
    auto* a = app.add_subcommand("average", "Average Cn2 profiles on a shared grid");
    a->add_option("inputs", average.inputs, "Profile CSV files")->required()->expected(-1);
    a->add_option("--out", average.out_file, "Output CSV")->required();
    a->add_option("--min-fraction", average.min_fraction,
                  "Keep levels present in at least this fraction of profiles")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    a->add_option("--dz", average.dz, "Grid spacing [m] (default: inferred)");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Synthesize von Karman fluctuations");
    s->add_option("--out", synth.out_file, "Output CSV (z_m,n1)")->required();
    s->add_option("--n", synth.count, "Sample count (power of two)")->capture_default_str();
    s->add_option("--dz", synth.dz, "Sample spacing [m]")->capture_default_str();
    s->add_option("--cn2", synth.cn2, "True Cn2 [m^-2/3]")->capture_default_str();
    s->add_option("--L0", synth.outer_scale, "Outer scale [m]")->capture_default_str();
    s->add_option("--l0", synth.inner_scale, "Inner scale [m]")->capture_default_str();
    s->add_option("--n0", synth.n0, "Constant mean refractive index")->capture_default_str();
    s->add_option("--alias-terms", synth.alias_terms, "Folded spectrum aliases")
        ->capture_default_str();
    s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();

    StudyArgs study;
    auto* st = app.add_subcommand("study", "Estimated/true Cn2 ratio study");
    st->add_option("--out", study.out_file, "Output CSV")->required();
    st->add_option("--dz-list", study.dz_list, "Grid spacings [m]")
        ->delimiter(',')
        ->capture_default_str();
    st->add_option("--L0-list", study.L0_list, "Outer scales [m]")
        ->delimiter(',')
        ->capture_default_str();
    st->add_option("--omega-list", study.omega_list, "Window half-widths")
        ->delimiter(',')
        ->capture_default_str();
    st->add_option("--m-list", study.m_list, "Separation steps")
        ->delimiter(',')
        ->capture_default_str();
    st->add_option("--trials", study.trials, "Trials per cell")->capture_default_str();
    st->add_option("--samples", study.samples, "Field length (power of two)")
        ->capture_default_str();
    st->add_option("--cn2", study.cn2, "True Cn2 [m^-2/3]")->capture_default_str();
    st->add_option("--guard", study.guard, "Guard fraction discarded per end")
        ->capture_default_str();
    st->add_option("--seed", study.seed, "Master seed")->capture_default_str();
    st->add_option("--threads", study.threads, "Worker threads (0 = auto)");

    CalibrateArgs calibrate;
    auto* cal = app.add_subcommand("calibrate", "Scale factor against an analytic model");
    cal->add_option("profile", calibrate.profile_file, "Cn2 profile CSV")->required();
    cal->add_option("--out", calibrate.out_file, "Report JSON")->required();
    calibrate.model.attach(cal);
    cal->add_option("--band", calibrate.band, "Calibration band LOW:HIGH [m]")
        ->capture_default_str();
    cal->add_option("--station-elevation", calibrate.station_elevation,
                    "Station elevation [m] added to profile altitudes for the reference");

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "Fit generalized HV parameters to a profile");
    f->add_option("profile", fit.profile_file, "Cn2 profile CSV")->required();
    f->add_option("--out", fit.out_file, "Report JSON")->required();
    f->add_option("--curve", fit.curve_file, "Optional fitted-curve CSV");
    f->add_option("--init", fit.init_file, "JSON file with initial parameters");
    f->add_option("--fix", fit.fix, "Parameters to hold fixed")->delimiter(',');
    f->add_option("--free", fit.free_params, "Parameters to free")->delimiter(',');
    f->add_option("--layer", fit.layers, "Extra Gaussian layer E,H_E,e (repeatable)");
    f->add_option("--starts", fit.starts, "Multi-start count")->capture_default_str();
    f->add_option("--seed", fit.seed, "Start-perturbation seed")->capture_default_str();
    f->add_option("--max-iterations", fit.max_iterations, "Iteration cap per start")
        ->capture_default_str();
    f->add_option("--station-elevation", fit.station_elevation,
                  "Station elevation [m] added to profile altitudes");

    ThermoArgs thermo;
    auto* th = app.add_subcommand("thermo",
                                  "Thermosonde Ct2 conversion and model comparison");
    th->add_option("--thermosonde", thermo.thermosonde_file, "Thermosonde CSV")->required();
    th->add_option("--sounding", thermo.sounding_file, "Matching radiosonde file")
        ->required();
    th->add_option("--out", thermo.out_file, "Paired comparison CSV")->required();
    th->add_option("--sensor-spacing", thermo.sensor_spacing,
                   "Thermosonde probe separation [m]")
        ->capture_default_str();
    thermo.est.attach(th);

    CompareArgs compare;
    auto* cp = app.add_subcommand("compare", "Bin two Cn2 profiles onto a common grid");
    cp->add_option("a", compare.file_a, "First profile CSV")->required();
    cp->add_option("b", compare.file_b, "Second profile CSV")->required();
    cp->add_option("--out", compare.out_file, "Paired CSV")->required();
    cp->add_option("--dz", compare.dz, "Bin width [m]")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (c->parsed()) return run_guarded([&] { cmd_compute(compute); });
    if (a->parsed()) return run_guarded([&] { cmd_average(average); });
    if (s->parsed()) return run_guarded([&] { cmd_synth(synth); });
    if (st->parsed()) return run_guarded([&] { cmd_study(study); });
    if (cal->parsed()) return run_guarded([&] { cmd_calibrate(calibrate); });
    if (f->parsed()) return run_guarded([&] { cmd_fit(fit); });
    if (th->parsed()) return run_guarded([&] { cmd_thermo(thermo); });
    if (cp->parsed()) return run_guarded([&] { cmd_compare(compare); });
    return kExitUsage;
}
