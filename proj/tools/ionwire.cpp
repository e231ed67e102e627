// ionwire command-line front end.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ionwire/analysis.hpp"
#include "ionwire/circuit.hpp"
#include "ionwire/experiments.hpp"
#include "ionwire/geometry.hpp"
#include "ionwire/report.hpp"
#include "ionwire/scenario.hpp"

namespace fs = std::filesystem;
using namespace ionwire;
using nlohmann::ordered_json;

namespace {

enum Exit { ok = 0, band_failure = 1, usage_error = 2, runtime_failure = 3 };

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> ensemble;
    std::string out;
    std::string format = "csv";
};

std::string default_scenario(const char* name) { return std::string(IONWIRE_SCENARIO_DIR) + "/" + name; }

/// --out, then IONWIRE_OUT, then the scenario's output_dir.
std::string output_dir(const Globals& g, const std::string& from_scenario = "") {
    if (!g.out.empty()) return g.out;
    if (const char* env = std::getenv("IONWIRE_OUT"); env && *env) return env;
    return from_scenario;
}

scenario::Scenario load(const std::string& path, const Globals& g) {
    auto sc = scenario::parse_file(path);
    if (g.seed) sc.seed = *g.seed;
    if (g.ensemble) {
        if (*g.ensemble < 1) throw InvalidInput("--ensemble must be >= 1");
        sc.ensemble.size = *g.ensemble;
    }
    return sc;
}

report::Format format_of(const Globals& g) { return g.format == "json" ? report::Format::json : report::Format::csv; }

void emit(const std::string& name, const std::string& content, const Globals& g) {
    std::cout << content;
    const auto dir = output_dir(g);
    if (!dir.empty()) report::write_atomic(fs::path(dir) / name, content);
}

int run_experiment(const std::string& path, scenario::ScheduleKind kind, const char* command, const Globals& g) {
    const auto started = report::utc_now();
    const auto sc = load(path, g);
    if (sc.schedule.kind != kind)
        throw InvalidInput(path + ": the '" + command + "' command needs a different [schedule] kind");
    const auto ex = experiments::Expectations::load();
    const auto r = experiments::run(sc, ex);
    const auto dir = output_dir(g, sc.output_dir);
    if (!dir.empty()) report::write(r, dir, format_of(g), scenario::serialize(sc), started);
    if (g.format == "json") std::cout << report::summary_json(r).dump(2) << "\n";
    else std::cout << report::markdown(r);
    return r.passed() ? ok : band_failure;
}

int cmd_rate(const std::string& path, const Globals& g) {
    const auto sc = load(path, g);
    const auto species = sc.ion_species();
    const auto s1 = sc.trap_site(0), s2 = sc.trap_site(1);
    const double kappa = sc.predicted_kappa();
    const double omega = 0.5 * (s1.vertical_frequency + s2.vertical_frequency);
    const double coulomb = circuit::coulomb_coupling_rate(species, omega, sc.wire.separation_m);
    const auto b1 = circuit::circuit_equivalent(species, s1);
    const auto b2 = circuit::circuit_equivalent(species, s2);
    ordered_json j = {{"kappa_hz", angular_to_hz(kappa)},
                      {"coulomb_hz", angular_to_hz(coulomb)},
                      {"ratio", kappa / coulomb},
                      {"L_henry", b1.inductance},
                      {"C_farad", b1.capacitance},
                      {"site2", {{"L_henry", b2.inductance}, {"C_farad", b2.capacitance}}},
                      {"effective_distance_um", {s1.effective_distance * 1e6, s2.effective_distance * 1e6}},
                      {"digest", scenario::digest(sc)}};
    emit("rate.json", j.dump(2) + "\n", g);
    return ok;
}

int cmd_deff(std::vector<double> heights_um, double paddle_um, const Globals& g) {
    if (heights_um.empty())
        for (double h = 20; h <= 200 + 1e-9; h += 10) heights_um.push_back(h);
    const auto patch = geometry::RectPatch::centered_square(paddle_um * 1e-6);
    std::vector<std::pair<double, double>> rows;
    for (double h : heights_um) rows.push_back({h, geometry::effective_distance(patch, h * 1e-6) * 1e6});
    if (g.format == "json") {
        ordered_json j = ordered_json::array();
        for (const auto& [h, d] : rows) j.push_back({{"height_um", h}, {"deff_um", d}});
        emit("deff.json", j.dump(2) + "\n", g);
    } else {
        std::ostringstream o;
        o << report::table_schema << "\nheight_um,deff_um\n";
        for (const auto& [h, d] : rows) o << report::num(h) << ',' << report::num(d) << '\n';
        emit("deff.csv", o.str(), g);
    }
    return ok;
}

struct ThermometryArgs {
    double nbar = 182;
    double eta = 0.05;
    double rabi_khz = 100;
    long shots = 200;
    int points = 100;
    std::string data;
};

analysis::RabiDataset read_rabi_csv(const std::string& path, double eta, double rabi) {
    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open " + path);
    analysis::RabiDataset d;
    d.eta = eta;
    d.rabi_frequency = rabi;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "t_s,excited,shots")
                throw InvalidInput(path + ":" + std::to_string(lineno) + ": expected header t_s,excited,shots");
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": expected three columns");
        try {
            d.times.push_back(std::stod(a));
            d.excited.push_back(std::stol(b));
            d.shots.push_back(std::stol(c));
        } catch (const std::exception&) {
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": not a number");
        }
    }
    if (d.times.empty()) throw InvalidInput(path + ": no data rows");
    return d;
}

int cmd_thermometry(const ThermometryArgs& a, const Globals& g) {
    const double rabi = hz_to_angular(a.rabi_khz * 1e3);
    const analysis::RabiModel model(a.eta);
    analysis::RabiDataset data;
    const bool synthetic = a.data.empty();
    if (synthetic) {
        if (a.points < 5) throw InvalidInput("--points must be >= 5");
        // Two carrier periods of the ground state.
        std::vector<double> t(static_cast<std::size_t>(a.points));
        for (int k = 0; k < a.points; ++k) t[static_cast<std::size_t>(k)] = 4 * std::numbers::pi / rabi * k / (a.points - 1);
        Rng rng(g.seed.value_or(1), 0, Substream::measurement);
        data = analysis::synthesize_rabi(model, a.nbar, rabi, t, a.shots, rng);
    } else {
        data = read_rabi_csv(a.data, a.eta, rabi);
    }
    const auto fit = analysis::fit_rabi_nbar(data, model);
    auto j = report::fit_json(fit);
    j["eta"] = a.eta;
    j["rabi_khz"] = a.rabi_khz;
    j["points"] = data.times.size();
    if (synthetic) {
        j["injected_n_bar"] = a.nbar;
        j["seed"] = g.seed.value_or(1);
    }
    emit("thermometry.json", j.dump(2) + "\n", g);
    return ok;
}

int cmd_predict(const Globals& g) {
    const auto started = report::utc_now();
    const auto r = experiments::run_prediction_table(experiments::Expectations::load());
    const auto dir = output_dir(g);
    if (!dir.empty()) report::write(r, dir, format_of(g), "", started);
    if (g.format == "json") {
        std::cout << report::summary_json(r).dump(2) << "\n";
    } else {
        std::cout << report::markdown(r) << "\n" << report::table_csv(r.tables.front());
    }
    return r.passed() ? ok : band_failure;
}

/// First argument that is neither a global option nor its value.
std::string first_word(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--seed" || a == "--ensemble" || a == "--out" || a == "--format") {
            ++i;
            continue;
        }
        if (a.rfind("-", 0) == 0) continue;
        return a;
    }
    return {};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ionwire: wire-coupled trapped-ion simulations"};
    app.set_version_flag("--version", std::string(IONWIRE_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 0;
    std::size_t ensemble = 0;
    auto* seed_opt = app.add_option("--seed", seed, "master 64-bit seed (overrides the scenario)");
    auto* ens_opt = app.add_option("--ensemble", ensemble, "ensemble size (overrides the scenario)")
                        ->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory (default: $IONWIRE_OUT, then the scenario's output_dir)");
    app.add_option("--format", g.format, "data format")->check(CLI::IsMember({"csv", "json"}));

    std::string path;
    auto* rate = app.add_subcommand("rate", "predicted coupling, Coulomb rate and circuit elements");
    rate->add_option("scenario", path, "scenario file")->check(CLI::ExistingFile);

    std::vector<double> heights;
    double paddle = 120;
    auto* deff = app.add_subcommand("deff", "effective distance above a square paddle");
    deff->add_option("heights", heights, "heights in um (default 20..200 step 10)");
    deff->add_option("--paddle", paddle, "paddle side in um")->check(CLI::PositiveNumber);

    auto* swap = app.add_subcommand("swap", "noiseless coherent exchange");
    swap->add_option("scenario", path, "scenario file")->check(CLI::ExistingFile);
    auto* scan = app.add_subcommand("scan", "heating-rate spectroscopy of ion 2");
    scan->add_option("scenario", path, "scenario file")->check(CLI::ExistingFile);
    auto* symp = app.add_subcommand("sympathetic", "coupled versus uncoupled heating of ion 1");
    symp->add_option("scenario", path, "scenario file")->check(CLI::ExistingFile);

    ThermometryArgs th;
    auto* thermo = app.add_subcommand("thermometry", "thermal occupation from carrier Rabi flops");
    thermo->add_option("--data", th.data, "CSV with columns t_s,excited,shots (default: synthetic data)")
        ->check(CLI::ExistingFile);
    thermo->add_option("--nbar", th.nbar, "occupation of the synthetic data")->check(CLI::NonNegativeNumber);
    thermo->add_option("--eta", th.eta, "Lamb-Dicke parameter")->check(CLI::Range(0.0, 1.0));
    thermo->add_option("--rabi-khz", th.rabi_khz, "ground-state carrier Rabi frequency in kHz")
        ->check(CLI::PositiveNumber);
    thermo->add_option("--shots", th.shots, "shots per pulse time")->check(CLI::PositiveNumber);
    thermo->add_option("--points", th.points, "pulse times")->check(CLI::PositiveNumber);

    auto* predict = app.add_subcommand("predict", "closed-form coupling predictions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const auto word = first_word(argc, argv);
        if (!word.empty() && !app.get_subcommand_no_throw(word))
            std::cerr << "error: unknown subcommand '" << word << "'\n\n" << app.help();
        else
            std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return usage_error;
    }
    if (*seed_opt) g.seed = seed;
    if (*ens_opt) g.ensemble = ensemble;

    try {
        if (*rate) return cmd_rate(path.empty() ? default_scenario("paper_fig4.scenario") : path, g);
        if (*deff) return cmd_deff(heights, paddle, g);
        using K = scenario::ScheduleKind;
        if (*swap)
            return run_experiment(path.empty() ? default_scenario("swap.scenario") : path, K::swap_demo, "swap", g);
        if (*scan)
            return run_experiment(path.empty() ? default_scenario("paper_fig3.scenario") : path, K::resonance_scan,
                                  "scan", g);
        if (*symp)
            return run_experiment(path.empty() ? default_scenario("paper_fig4.scenario") : path, K::sympathetic_run,
                                  "sympathetic", g);
        if (*thermo) return cmd_thermometry(th, g);
        if (*predict) return cmd_predict(g);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const Unphysical& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage_error;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return runtime_failure;
    }
    std::cerr << app.help();
    return usage_error;
}
