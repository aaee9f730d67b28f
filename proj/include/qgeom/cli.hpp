#pragma once

// Subcommands of the qgeom binary. run_cli is callable in-process so tests
// can drive it with a fake argv and capture streams.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "errors.hpp"
#include "geometry.hpp"
#include "json_io.hpp"
#include "propagator.hpp"
#include "qubit.hpp"
#include "schedule.hpp"
#include "verify.hpp"

namespace qgeom {

inline constexpr const char* kVersion = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int violations = 1;
inline constexpr int config = 2;
inline constexpr int runtime = 3;
} // namespace exit_code

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

/// Content staged next to its destination; nothing is visible until commit().
class StagedFile {
public:
    StagedFile(fs::path target, std::string content) : target_(std::move(target)) {
        tmp_ = target_;
        tmp_ += ".tmp";
        std::ofstream out(tmp_, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp_, ec);
            throw std::runtime_error("cannot write " + tmp_.string());
        }
    }
    StagedFile(const StagedFile&) = delete;
    StagedFile& operator=(const StagedFile&) = delete;
    StagedFile(StagedFile&& other) noexcept
        : target_(std::move(other.target_)), tmp_(std::move(other.tmp_)), committed_(other.committed_) {
        other.committed_ = true;
    }
    ~StagedFile() {
        if (!committed_) {
            std::error_code ec;
            fs::remove(tmp_, ec);
        }
    }

    void commit() {
        fs::rename(tmp_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path tmp_;
    bool committed_ = false;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes all files or none.
inline void write_outputs(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
    fs::create_directories(dir);
    std::vector<StagedFile> staged;
    staged.reserve(files.size());
    for (const auto& [name, content] : files) {
        staged.emplace_back(dir / name, content);
    }
    for (auto& f : staged) {
        f.commit();
    }
}

// ---------------------------------------------------------------------------
// Flag parsing helpers

inline std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw UsageError(flag + ": '" + item + "' is not a number");
        }
        if (used != item.size() || !std::isfinite(v)) {
            throw UsageError(flag + ": '" + item + "' is not a finite number");
        }
        out.push_back(v);
    }
    return out;
}

inline Vec3 parse_vec3(const std::string& text, const std::string& flag) {
    const auto v = parse_real_list(text, flag);
    if (v.size() != 3) {
        throw UsageError(flag + " expects x,y,z");
    }
    return {v[0], v[1], v[2]};
}

inline TimeGrid parse_grid_flag(const std::string& text) {
    const auto v = parse_real_list(text, "--grid");
    if (v.size() != 3 || v[2] != std::floor(v[2])) {
        throw UsageError("--grid expects t0,t1,steps");
    }
    return TimeGrid(v[0], v[1], static_cast<long>(v[2]));
}

// ---------------------------------------------------------------------------
// simulate

/// Schedule document plus "grid" and "initial_state" (amplitudes, or {"bloch": [x,y,z]} for qubits).
struct SimulationConfig {
    json document;
    HamiltonianSchedule schedule;
    TimeGrid grid;
    PureState psi0;
};

inline SimulationConfig simulation_config_from_json(const json& doc) {
    HamiltonianSchedule sched = schedule_from_json(doc);
    TimeGrid grid = grid_from_json(detail::require_key(doc, "grid", "$"), "$.grid");
    const json& init = detail::require_key(doc, "initial_state", "$");
    std::optional<PureState> psi;
    if (init.is_object()) {
        const json& b = detail::require_key(init, "bloch", "$.initial_state");
        if (sched.dim() != 2) {
            throw ConfigError("$.initial_state.bloch", "Bloch vectors describe qubits only");
        }
        const Vec3 v = detail::vec3_from_json(b, "$.initial_state.bloch");
        if (!(v.norm() > 0.0)) {
            throw ConfigError("$.initial_state.bloch", "cannot normalize a zero vector");
        }
        psi = state_from_bloch(BlochVector(v));
    } else {
        psi = state_from_json(init, sched.dim(), "$.initial_state");
    }
    return {doc, std::move(sched), grid, std::move(*psi)};
}

inline SimulationConfig parse_simulation_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("$", std::string("invalid JSON: ") + e.what());
    }
    return simulation_config_from_json(doc);
}

inline int cmd_simulate(const std::string& config_path, const std::string& out_dir, const std::string& csv_name,
                        std::ostream& out) {
    const SimulationConfig cfg = parse_simulation_config(read_text_file(config_path));
    const Trajectory traj = propagate(cfg.schedule, cfg.psi0, cfg.grid);
    const std::vector<GeometrySample> samples = sample_trajectory(traj);

    std::ostringstream csv;
    write_geometry_csv(csv, samples);
    long degenerate = 0;
    for (const auto& s : samples) {
        degenerate += s.degenerate ? 1 : 0;
    }
    const json meta{{"tool", "qgeom"},
                    {"version", kVersion},
                    {"command", "simulate"},
                    {"config", cfg.document},
                    {"hbar", cfg.schedule.hbar()},
                    {"grid", grid_to_json(cfg.grid)},
                    {"samples", samples.size()},
                    {"degenerate_samples", degenerate},
                    {"max_norm_defect", traj.max_norm_defect},
                    {"warnings", traj.warnings}};
    write_outputs(out_dir, {{csv_name, csv.str()}, {"meta.json", meta.dump(2) + "\n"}});
    for (const auto& w : traj.warnings) {
        out << "warning: " << w << '\n';
    }
    out << "wrote " << samples.size() << " samples to " << (fs::path(out_dir) / csv_name).string() << '\n';
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// qubit

struct QubitOptions {
    std::string field;
    std::string m0;
    double alpha = 0.0;
    double omega = 0.0;
    std::string config;
    std::string a0;
    std::string grid = "0,2,2001";
    std::string out;
    std::string csv = "qubit.csv";
    bool check_operator_path = false;
};

inline HamiltonianSchedule qubit_schedule_from_flags(const QubitOptions& o) {
    if (!o.config.empty()) {
        if (!o.field.empty()) {
            throw UsageError("--config and --field are mutually exclusive");
        }
        const json doc = json::parse(read_text_file(o.config), nullptr, false);
        if (doc.is_discarded()) {
            throw ConfigError(o.config, "invalid JSON");
        }
        HamiltonianSchedule sched = schedule_from_json(doc);
        if (sched.dim() != 2) {
            throw ConfigError("$.dim", "qubit command needs dim 2");
        }
        return sched;
    }
    if (o.field.empty()) {
        throw UsageError("one of --field or --config is required");
    }
    const auto fam = family_from_name(o.field);
    if (!fam || !is_qubit_family(*fam)) {
        throw UsageError("--field must be fixed-axis or rotating");
    }
    if (o.m0.empty()) {
        throw UsageError("--m0 is required");
    }
    if (*fam == Family::fixed_axis_qubit) {
        const Vec3 m0 = parse_vec3(o.m0, "--m0");
        if (!(m0.norm() > 0.0)) {
            throw UsageError("--m0 must be nonzero");
        }
        return HamiltonianSchedule(FixedAxisParams{m0, o.alpha});
    }
    const auto v = parse_real_list(o.m0, "--m0");
    if (v.size() != 1 && v.size() != 3) {
        throw UsageError("--m0 for a rotating field is a magnitude or x,y,z");
    }
    const double m0 = v.size() == 1 ? v[0] : Vec3(v[0], v[1], v[2]).norm();
    return HamiltonianSchedule(RotatingFieldParams{m0, o.omega});
}

inline json dual_path_to_json(const DualPathReport& r) {
    return {{"v_H", r.v_H},           {"a_H", r.a_H},     {"sigma_Hdot", r.sigma_Hdot}, {"exp_H", r.exp_H},
            {"exp_Hdot", r.exp_Hdot}, {"bloch", r.bloch}, {"max", r.max()}};
}

inline int cmd_qubit(const QubitOptions& o, std::ostream& out) {
    const HamiltonianSchedule sched = qubit_schedule_from_flags(o);
    const MagneticSchedule field = MagneticSchedule::from_schedule(sched);
    if (o.a0.empty()) {
        throw UsageError("--a0 is required");
    }
    const BlochVector a0(parse_vec3(o.a0, "--a0"));
    const TimeGrid grid = parse_grid_flag(o.grid);

    const BlochTrajectory path = integrate_bloch(field, a0, grid);
    const std::vector<BlochRecord> records = bloch_records(field, path);
    std::ostringstream csv;
    write_qubit_csv(csv, records);

    json meta{{"tool", "qgeom"},
              {"version", kVersion},
              {"command", "qubit"},
              {"schedule", schedule_to_json(sched)},
              {"hbar", 1.0},
              {"grid", grid_to_json(grid)},
              {"a0", {a0.x(), a0.y(), a0.z()}},
              {"max_norm_drift", path.max_norm_drift}};
    if (o.check_operator_path) {
        const Trajectory traj = propagate(sched, state_from_bloch(a0), grid);
        const DualPathReport rep = compare_paths(traj, field, path);
        meta["dual_path"] = dual_path_to_json(rep);
        out << "dual-path max deviation " << format_real(rep.max()) << '\n';
    }
    write_outputs(o.out, {{o.csv, csv.str()}, {"meta.json", meta.dump(2) + "\n"}});
    out << "wrote " << records.size() << " samples to " << (fs::path(o.out) / o.csv).string() << '\n';
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
    long trials = 0;
    std::string dims = "2,3,4,8";
    std::string families = "constant,fourier,fixed_axis,rotating_field";
    std::uint64_t seed = 0;
    std::string report;
    long steps = 1001;
    double t1 = 1.0;
    double scale = 0.15;
    unsigned threads = 0;
};

inline CampaignConfig campaign_config_from_flags(const VerifyOptions& o) {
    if (o.trials < 1) {
        throw UsageError("--trials must be at least 1");
    }
    CampaignConfig cfg;
    cfg.n_trials = o.trials;
    cfg.base_seed = o.seed;
    cfg.dims.clear();
    for (double d : parse_real_list(o.dims, "--dims")) {
        if (d != std::floor(d) || d < 2 || d > 16) {
            throw UsageError("--dims entries must be integers in [2, 16]");
        }
        cfg.dims.push_back(static_cast<Index>(d));
    }
    cfg.families.clear();
    std::stringstream ss(o.families);
    std::string name;
    while (std::getline(ss, name, ',')) {
        const auto f = family_from_name(name);
        if (!f) {
            throw UsageError("--families: unknown family '" + name + "'");
        }
        cfg.families.push_back(*f);
    }
    if (cfg.dims.empty() || cfg.families.empty()) {
        throw UsageError("--dims and --families must be nonempty");
    }
    cfg.grid = TimeGrid(0.0, o.t1, o.steps);
    cfg.ensemble_scale = o.scale;
    cfg.threads = o.threads;
    return cfg;
}

inline int cmd_verify(const VerifyOptions& o, std::ostream& out) {
    const CampaignConfig cfg = campaign_config_from_flags(o);
    const CampaignReport report = run_campaign(cfg);
    json doc = campaign_to_json(report);
    doc["version"] = kVersion;
    const fs::path path(o.report);
    write_outputs(path.has_parent_path() ? path.parent_path() : fs::path("."),
                  {{path.filename().string(), doc.dump(1) + "\n"}});
    const long v = report.violations();
    out << "trials=" << cfg.n_trials << " violations=" << v
        << " min_main_slack=" << format_real(doc["summary"]["min_main_slack"].get<double>()) << " report=" << o.report
        << '\n';
    return v == 0 ? exit_code::ok : exit_code::violations;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsOptions {
    std::string particle = "electron";
    std::optional<double> m0, c, hbar, mu, lambda, vh, sigma_hdot, delta_e, mean_e_minus_e0;
    std::string delta_x;
};

inline ParticleParams particle_from_flags(const BoundsOptions& o) {
    ParticleParams p{};
    if (o.particle == "electron") {
        p = ParticleParams::electron();
        if (o.m0) p.m0 = *o.m0;
        if (o.c) p.c = *o.c;
        if (o.hbar) p.hbar = *o.hbar;
    } else if (o.particle == "custom") {
        if (!o.m0 || !o.c || !o.hbar) {
            throw UsageError("--particle custom needs --m0, --c and --hbar");
        }
        p = ParticleParams{*o.m0, *o.c, *o.hbar, {}, {}, {}};
    } else {
        throw UsageError("--particle must be electron or custom");
    }
    p.mu = o.mu;
    p.lambda = o.lambda;
    if (!o.delta_x.empty()) {
        if (o.delta_x == "compton/2") {
            p.delta_x = 0.5 * p.compton_wavelength();
        } else {
            const auto v = parse_real_list(o.delta_x, "--delta-x");
            if (v.size() != 1) {
                throw UsageError("--delta-x expects a length or 'compton/2'");
            }
            p.delta_x = v[0];
        }
    }
    p.validate();
    return p;
}

inline json bounds_report(const BoundsOptions& o) {
    const ParticleParams p = particle_from_flags(o);
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    const CaianielloBounds cb = caianiello_bounds(p);
    json doc{{"particle",
              {{"m0", p.m0},
               {"c", p.c},
               {"hbar", p.hbar},
               {"compton_wavelength", p.compton_wavelength()},
               {"delta_x", opt(p.delta_x)},
               {"mu", opt(p.mu)},
               {"lambda", opt(p.lambda)}}},
             {"caianiello",
              {{"a_max_1981", opt(cb.a_max_1981)},
               {"a_max_1984", cb.a_max_1984},
               {"a_max_from_dx", opt(cb.a_max_from_dx)},
               {"p_max", opt(cb.p_max)}}}};
    if (o.vh) {
        const PatiBounds pb = pati_acceleration_and_jerk(*o.vh, o.sigma_hdot.value_or(0.0), p);
        doc["pati"] = {{"v_H", *o.vh}, {"a_max_t", pb.a_max_t}};
        if (o.sigma_hdot) {
            doc["pati"]["sigma_Hdot"] = *o.sigma_hdot;
            doc["pati"]["jerk_bound"] = pb.jerk_bound;
        }
    } else if (o.sigma_hdot) {
        throw UsageError("--sigma-hdot needs --vh");
    }
    if (o.delta_e || o.mean_e_minus_e0) {
        if (!o.delta_e || !o.mean_e_minus_e0) {
            throw UsageError("--delta-e and --mean-e-minus-e0 go together");
        }
        const QslTimes q = qsl_times(*o.delta_e, *o.mean_e_minus_e0, p.hbar);
        doc["qsl"] = {{"mandelstam_tamm", q.mandelstam_tamm},
                      {"margolus_levitin", q.margolus_levitin},
                      {"tau_qsl", q.tau_qsl}};
    }
    return doc;
}

inline int cmd_bounds(const BoundsOptions& o, std::ostream& out) {
    out << bounds_report(o).dump(2) << '\n';
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Geometric kinematics of unitary quantum evolution", "qgeom"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string sim_config, sim_out, sim_csv = "geometry.csv";
    auto* sim = app.add_subcommand("simulate", "propagate a configured schedule and write the geometry CSV");
    sim->add_option("--config", sim_config, "schedule + grid + initial_state JSON")->required();
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--csv", sim_csv, "CSV file name");

    QubitOptions qo;
    auto* qub = app.add_subcommand("qubit", "integrate the Bloch equation for a magnetic schedule");
    qub->add_option("--field", qo.field, "fixed-axis | rotating");
    qub->add_option("--m0", qo.m0, "x,y,z (fixed-axis) or magnitude (rotating)");
    qub->add_option("--alpha", qo.alpha, "fixed-axis growth rate");
    qub->add_option("--omega", qo.omega, "rotation frequency");
    qub->add_option("--config", qo.config, "qubit schedule JSON instead of --field");
    qub->add_option("--a0", qo.a0, "initial Bloch vector x,y,z")->required();
    qub->add_option("--grid", qo.grid, "t0,t1,steps");
    qub->add_option("--out", qo.out, "output directory")->required();
    qub->add_option("--csv", qo.csv, "CSV file name");
    qub->add_flag("--check-operator-path", qo.check_operator_path, "compare against 2x2 propagation");

    VerifyOptions vo;
    auto* ver = app.add_subcommand("verify", "randomized campaign over the inequality chain");
    ver->add_option("--trials", vo.trials, "number of trials")->required();
    ver->add_option("--dims", vo.dims, "comma-separated dimensions");
    ver->add_option("--families", vo.families, "comma-separated families");
    ver->add_option("--seed", vo.seed, "base seed; trial i uses seed + i");
    ver->add_option("--report", vo.report, "JSON report path")->required();
    ver->add_option("--steps", vo.steps, "grid points per trial");
    ver->add_option("--t1", vo.t1, "grid end time (start is 0)");
    ver->add_option("--scale", vo.scale, "ensemble spectral scale");
    ver->add_option("--threads", vo.threads, "worker threads (default QGEOM_THREADS or all cores)");

    BoundsOptions bo;
    auto* bnd = app.add_subcommand("bounds", "maximal acceleration, power and jerk bounds (SI)");
    bnd->add_option("--particle", bo.particle, "electron | custom");
    bnd->add_option("--m0", bo.m0, "rest mass, kg");
    bnd->add_option("--c", bo.c, "speed of light, m/s");
    bnd->add_option("--hbar", bo.hbar, "J s");
    bnd->add_option("--delta-x", bo.delta_x, "position spread in m, or compton/2");
    bnd->add_option("--mu", bo.mu, "minimum-uncertainty mass, kg");
    bnd->add_option("--lambda", bo.lambda, "particle size, m");
    bnd->add_option("--vh", bo.vh, "Fubini-Study speed, 1/s");
    bnd->add_option("--sigma-hdot", bo.sigma_hdot, "spread of dH/dt, J/s");
    bnd->add_option("--delta-e", bo.delta_e, "energy spread, J");
    bnd->add_option("--mean-e-minus-e0", bo.mean_e_minus_e0, "mean energy above ground, J");

    std::vector<std::string> argv_store{"qgeom"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_code::ok;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return exit_code::ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::config;
    }

    try {
        if (*sim) {
            return cmd_simulate(sim_config, sim_out, sim_csv, out);
        }
        if (*qub) {
            return cmd_qubit(qo, out);
        }
        if (*ver) {
            return cmd_verify(vo, out);
        }
        return cmd_bounds(bo, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_code::config;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_code::config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::runtime;
    }
}

} // namespace qgeom
