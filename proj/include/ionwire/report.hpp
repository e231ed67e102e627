// Files written for an experiment: trajectory CSVs, fit JSONs, a Markdown
// summary, SVG plots and a manifest. Every file is written to a temporary
// name in the target directory and renamed into place.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionwire/experiments.hpp"

#ifndef IONWIRE_VERSION
#define IONWIRE_VERSION "0.0.0"
#endif

namespace ionwire::report {

namespace fs = std::filesystem;
using experiments::ExperimentReport;
using nlohmann::ordered_json;

inline constexpr const char* trajectory_schema = "# ionwire-trajectory v1";
inline constexpr const char* table_schema = "# ionwire-table v1";

inline void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << content;
        f.flush();
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Serializers

inline std::string trajectory_csv(const dynamics::EnsembleTrajectory& t) {
    std::ostringstream o;
    o << trajectory_schema << '\n';
    o << "# integrator=" << t.integrator << " realizations=" << t.n_realizations << " seed=" << t.rng_seed
      << " dt_s=" << num(t.dt) << " steps=" << t.steps << '\n';
    o << "t_s,nbar1,sem1,nbar2,sem2\n";
    for (std::size_t k = 0; k < t.times.size(); ++k)
        o << num(t.times[k]) << ',' << num(t.n_bar_1[k]) << ',' << num(t.n_bar_sem_1[k]) << ','
          << num(t.n_bar_2[k]) << ',' << num(t.n_bar_sem_2[k]) << '\n';
    return o.str();
}

inline ordered_json trajectory_json(const dynamics::EnsembleTrajectory& t) {
    return {{"schema", "ionwire-trajectory"}, {"version", 1},   {"integrator", t.integrator},
            {"realizations", t.n_realizations}, {"seed", t.rng_seed}, {"dt_s", t.dt},
            {"steps", t.steps},                 {"t_s", t.times},     {"nbar1", t.n_bar_1},
            {"sem1", t.n_bar_sem_1},            {"nbar2", t.n_bar_2}, {"sem2", t.n_bar_sem_2}};
}

inline std::string table_csv(const experiments::Table& t) {
    std::ostringstream o;
    o << table_schema << '\n';
    for (std::size_t c = 0; c < t.columns.size(); ++c) o << (c ? "," : "") << t.columns[c];
    o << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) o << (c ? "," : "") << num(row[c]);
        o << '\n';
    }
    return o.str();
}

inline ordered_json table_json(const experiments::Table& t) {
    return {{"schema", "ionwire-table"}, {"version", 1}, {"name", t.name}, {"columns", t.columns}, {"rows", t.rows}};
}

inline ordered_json fit_json(const analysis::FitResult& f) {
    ordered_json params = ordered_json::object();
    for (std::size_t k = 0; k < f.names.size(); ++k)
        params[f.names[k]] = {{"value", f.values[k]}, {"sigma", f.sigmas[k]}};
    return {{"model", f.model},
            {"parameters", params},
            {"residual_norm", f.residual_norm},
            {"reduced_chi2", f.reduced_chi2},
            {"iterations", f.iterations},
            {"converged", f.converged},
            {"init_policy", f.init_policy}};
}

inline ordered_json summary_json(const ExperimentReport& r) {
    ordered_json heads = ordered_json::array();
    for (const auto& h : r.headlines)
        heads.push_back({{"name", h.key},
                         {"value", h.value},
                         {"unit", h.unit},
                         {"band", {h.lo, h.hi}},
                         {"source", h.source},
                         {"pass", h.pass}});
    ordered_json info = ordered_json::object();
    for (const auto& [k, v] : r.info) info[k] = v;
    return {{"experiment", r.experiment},
            {"digest", r.digest},
            {"seed", r.seed},
            {"expectations_version", r.expectations_version},
            {"passed", r.passed()},
            {"headlines", heads},
            {"values", info},
            {"notes", r.notes}};
}

inline std::string markdown(const ExperimentReport& r) {
    std::ostringstream o;
    o << "# " << r.experiment << "\n\n";
    if (!r.digest.empty()) o << "Scenario digest `" << r.digest << "`, seed " << r.seed << ".\n\n";
    o << "| quantity | value | unit | band | source | result |\n";
    o << "|---|---|---|---|---|---|\n";
    for (const auto& h : r.headlines)
        o << "| " << h.key << " | " << num(h.value) << " | " << h.unit << " | [" << num(h.lo) << ", " << num(h.hi)
          << "] | " << h.source << " | " << (h.pass ? "PASS" : "FAIL") << " |\n";
    o << "\nOverall: " << (r.passed() ? "PASS" : "FAIL") << "\n";
    if (!r.info.empty()) {
        o << "\n| value | |\n|---|---|\n";
        for (const auto& [k, v] : r.info) o << "| " << k << " | " << num(v) << " |\n";
    }
    if (!r.notes.empty()) {
        o << "\nNotes:\n\n";
        for (const auto& n : r.notes) o << "- " << n << "\n";
    }
    return o.str();
}

// ---------------------------------------------------------------------------
// Minimal SVG line plots

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color;
};

inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                            const std::vector<Series>& series) {
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<path d=\"M" << L << ' ' << T << " V" << H - B << " H" << W - R << "\" stroke=\"black\" fill=\"none\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
      << "</text>\n";
    int legend = 0;
    for (const auto& s : series) {
        o << "<path fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" d=\"";
        for (std::size_t k = 0; k < s.x.size(); ++k) o << (k ? " L" : "M") << num(px(s.x[k])) << ' ' << num(py(s.y[k]));
        o << "\"/>\n";
        o << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 + 14 * legend++ << "\" fill=\"" << s.color << "\">" << s.label
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline std::string trajectory_svg(const std::string& name, const dynamics::EnsembleTrajectory& t) {
    std::vector<double> ms(t.times.size());
    std::transform(t.times.begin(), t.times.end(), ms.begin(), [](double s) { return s * 1e3; });
    return svg_plot(name + ": mean occupation", "t (ms)", "n (quanta)",
                    {{"ion 1", ms, t.n_bar_1, "#c0392b"}, {"ion 2", ms, t.n_bar_2, "#2471a3"}});
}

// ---------------------------------------------------------------------------
// Writing a whole report

enum class Format { csv, json };

/// Writes every artifact of `r` into `dir`; returns the file names, the
/// manifest last.
/// `scenario_text` is the canonical scenario (empty for built-in runs).
inline std::vector<std::string> write(const ExperimentReport& r, const fs::path& dir, Format format,
                                      const std::string& scenario_text, const std::string& started) {
    std::vector<std::string> files;
    auto put = [&](const std::string& name, const std::string& content) {
        write_atomic(dir / name, content);
        files.push_back(name);
    };
    const std::string base = r.experiment;
    for (const auto& t : r.trajectories) {
        const std::string stem = base + "_" + t.name;
        if (format == Format::csv) put(stem + ".csv", trajectory_csv(t.trajectory));
        else put(stem + ".json", trajectory_json(t.trajectory).dump(2) + "\n");
        put(stem + ".svg", trajectory_svg(t.name, t.trajectory));
    }
    for (const auto& t : r.tables) {
        const std::string stem = base + "_" + t.name;
        if (format == Format::csv) put(stem + ".csv", table_csv(t));
        else put(stem + ".json", table_json(t).dump(2) + "\n");
        if (t.columns.size() >= 2 && t.columns[0] == "f_hz") {
            Series s{t.columns[1], {}, {}, "#2471a3"};
            for (const auto& row : t.rows) {
                s.x.push_back((row[0] - t.rows[t.rows.size() / 2][0]) / 1e3);
                s.y.push_back(row[1]);
            }
            put(stem + ".svg", svg_plot(base + ": heating rate", "detuning from scan center (kHz)", t.columns[1], {s}));
        }
    }
    for (const auto& f : r.fits) put(base + "_fit_" + f.name + ".json", fit_json(f.fit).dump(2) + "\n");
    put(base + "_summary.json", summary_json(r).dump(2) + "\n");
    put(base + "_report.md", markdown(r));
    if (!scenario_text.empty()) put(base + ".scenario", scenario_text);

    ordered_json m = {{"tool", "ionwire"},
                      {"version", IONWIRE_VERSION},
                      {"experiment", r.experiment},
                      {"digest", r.digest},
                      {"seed", r.seed},
                      {"started", started},
                      {"finished", utc_now()},
                      {"wall_time_s", r.wall_time_s},
                      {"passed", r.passed()}};
    ordered_json runs = ordered_json::array();
    for (const auto& t : r.trajectories)
        runs.push_back({{"name", t.name},
                        {"integrator", t.trajectory.integrator},
                        {"realizations", t.trajectory.n_realizations},
                        {"dt_s", t.trajectory.dt},
                        {"steps", t.trajectory.steps}});
    m["runs"] = runs;
    if (!scenario_text.empty()) m["scenario"] = scenario_text;
    const std::string manifest = base + "_manifest.json";
    files.push_back(manifest);
    m["files"] = files;
    write_atomic(dir / manifest, m.dump(2) + "\n");
    return files;
}

}  // namespace ionwire::report
