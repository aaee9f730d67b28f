#include <catch_amalgamated.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qgeom/cli.hpp"

// Contracts for the files consumed by the plotting scripts: column names and
// order, cell syntax, and the campaign report keys.

using namespace qgeom;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(QGEOM_SOURCE_DIR) / "configs";

const std::vector<std::string> kGeometryColumns{"t",           "s",          "exp_H",        "sigma_H",
                                                "v_H",         "a_H_analytic", "a_H_fd",     "sigma_Hdot",
                                                "main_slack",  "kappa_LT_sq", "kappa_AC_sq", "degenerate"};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

bool is_number(const std::string& s) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Csv load(const fs::path& p) {
    std::ifstream in(p);
    Csv csv;
    std::string line;
    std::getline(in, line);
    csv.header = split(line);
    while (std::getline(in, line)) {
        csv.rows.push_back(split(line));
    }
    return csv;
}

void check_geometry_cells(const Csv& csv) {
    for (const auto& row : csv.rows) {
        REQUIRE(row.size() == csv.header.size());
        for (std::size_t k = 0; k < row.size(); ++k) {
            const std::string& name = csv.header[k];
            if (name == "degenerate") {
                CHECK((row[k] == "true" || row[k] == "false"));
            } else if (name == "a_H_analytic" || name == "a_H_fd" || name == "kappa_LT_sq" || name == "kappa_AC_sq") {
                CHECK((row[k].empty() || is_number(row[k])));
            } else {
                CHECK(is_number(row[k]));
            }
        }
    }
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("qgeom_if_" + std::to_string(std::rand()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return run_cli(args, out, err);
}

} // namespace

TEST_CASE("geometry CSV layout") {
    TempDir dir;
    REQUIRE(run({"simulate", "--config", (kConfigs / "piecewise_ramp.json").string(), "--out", dir.path.string()}) ==
            0);
    const Csv csv = load(dir.path / "geometry.csv");
    CHECK(csv.header == kGeometryColumns);
    CHECK(csv.rows.size() == 2001);
    check_geometry_cells(csv);
    // endpoints have no central difference
    CHECK(csv.rows.front()[6].empty());
    CHECK(csv.rows.back()[6].empty());
    CHECK(is_number(csv.rows[1000][6]));
    // time column is increasing
    double prev = -1;
    for (const auto& row : csv.rows) {
        const double t = std::stod(row[0]);
        CHECK(t > prev);
        prev = t;
    }
}

TEST_CASE("geometry CSV marks degenerate samples") {
    TempDir dir;
    std::ofstream(dir.path / "eig.json")
        << R"({"dim": 2, "schedule": {"family": "constant", "A": [[1,0],[0,-1]]}, "grid": {"t0": 0, "t1": 1, "steps": 11}, "initial_state": [1, 0]})";
    REQUIRE(run({"simulate", "--config", (dir.path / "eig.json").string(), "--out", (dir.path / "o").string()}) == 0);
    const Csv csv = load(dir.path / "o" / "geometry.csv");
    check_geometry_cells(csv);
    for (const auto& row : csv.rows) {
        CHECK(row.back() == "true");
        CHECK(row[5].empty());
        CHECK(row[9].empty());
    }
}

TEST_CASE("qubit CSV layout") {
    TempDir dir;
    REQUIRE(run({"qubit", "--field", "rotating", "--m0", "1", "--omega", "2", "--a0", "0.6,0,0.8", "--grid",
                 "0,2,401", "--out", dir.path.string()}) == 0);
    const Csv csv = load(dir.path / "qubit.csv");
    std::vector<std::string> expected = kGeometryColumns;
    for (const char* extra : {"ax", "ay", "az", "mx", "my", "mz", "triple"}) {
        expected.emplace_back(extra);
    }
    CHECK(csv.header == expected);
    CHECK(csv.rows.size() == 401);
    check_geometry_cells(csv);
    for (const auto& row : csv.rows) {
        const double ax = std::stod(row[12]);
        const double ay = std::stod(row[13]);
        const double az = std::stod(row[14]);
        CHECK(std::abs(ax * ax + ay * ay + az * az - 1) <= 1e-12);
    }
}

TEST_CASE("shortest round-trip number formatting") {
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(2.0) == "2");
    CHECK(format_real(-0.25) == "-0.25");
    CHECK(format_real(1e-300) == "1e-300");
    for (double x : {1.0 / 3.0, std::sqrt(2.0), 6.02214076e23, -1.602176634e-19}) {
        CHECK(std::stod(format_real(x)) == x);
    }
    CHECK(format_optional(std::nullopt).empty());
}

TEST_CASE("campaign report keys") {
    TempDir dir;
    const fs::path rep = dir.path / "campaign.json";
    REQUIRE(run({"verify", "--trials", "10", "--steps", "101", "--report", rep.string()}) == 0);
    std::ifstream in(rep);
    const json doc = json::parse(in);
    CHECK(doc.at("version").is_string());
    for (const char* key : {"n_trials", "base_seed", "dims", "families", "grid", "ensemble_scale", "seed_rule"}) {
        CHECK(doc.at("config").contains(key));
    }
    for (const auto& [id, entry] : doc.at("tolerances").items()) {
        CHECK(entry.at("bound").is_number());
        CHECK((entry.at("sense") == ">=" || entry.at("sense") == "<="));
    }
    const json& summary = doc.at("summary");
    for (const char* key :
         {"min_main_slack", "min_kappa_AC", "violations", "trial_errors", "degenerate_steps", "checks"}) {
        CHECK(summary.contains(key));
    }
    CHECK(doc.at("trials").size() == 10);
    for (const auto& t : doc.at("trials")) {
        for (const char* key : {"index", "spec", "min_main_slack", "min_schwarz_slack", "max_decomposition_residual",
                                "max_imag_residual", "max_ac1_residual", "min_kappa_AC", "max_accel_fd_deviation",
                                "max_norm_defect", "violations", "checks", "records"}) {
            CHECK(t.contains(key));
        }
        for (const char* key : {"dim", "family", "seed", "grid"}) {
            CHECK(t.at("spec").contains(key));
        }
    }
}

TEST_CASE("files satisfy the plotting assertions") {
    TempDir dir;
    auto column = [](const Csv& csv, const std::string& name) {
        const auto it = std::find(csv.header.begin(), csv.header.end(), name);
        REQUIRE(it != csv.header.end());
        const auto k = static_cast<std::size_t>(it - csv.header.begin());
        std::vector<double> out;
        for (const auto& row : csv.rows) {
            out.push_back(row[k].empty() ? std::nan("") : std::stod(row[k]));
        }
        return out;
    };

    // saturating case: a_H on the upper band edge
    REQUIRE(run({"simulate", "--config", (kConfigs / "fixed_axis_saturating.json").string(), "--out",
                 (dir.path / "sat").string()}) == 0);
    const Csv sat = load(dir.path / "sat" / "geometry.csv");
    const auto a_h = column(sat, "a_H_analytic");
    const auto band = column(sat, "sigma_Hdot");
    for (std::size_t i = 0; i < a_h.size(); ++i) {
        CHECK(std::abs(a_h[i] - band[i]) <= 1e-5);
    }

    // constant Hamiltonian: flat speed
    REQUIRE(run({"simulate", "--config", (kConfigs / "constant_sigma_z.json").string(), "--out",
                 (dir.path / "const").string()}) == 0);
    const auto v = column(load(dir.path / "const" / "geometry.csv"), "v_H");
    CHECK(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()) < 1e-9);

    // precession about z: circle in the x-y plane on the unit sphere
    REQUIRE(run({"qubit", "--field", "fixed-axis", "--m0", "0,0,1", "--alpha", "0", "--a0", "1,0,0", "--grid",
                 "0,3.2,3201", "--out", (dir.path / "prec").string()}) == 0);
    const Csv prec = load(dir.path / "prec" / "qubit.csv");
    const auto ax = column(prec, "ax");
    const auto ay = column(prec, "ay");
    const auto az = column(prec, "az");
    for (std::size_t i = 0; i < ax.size(); ++i) {
        CHECK(std::abs(std::hypot(ax[i], ay[i], az[i]) - 1) <= 1e-6);
        CHECK(std::abs(az[i]) <= 1e-12);
    }
    // 2 m t = 6.4 > 2 pi: the trace closes
    CHECK(*std::min_element(ay.begin(), ay.end()) < -0.99);
}
