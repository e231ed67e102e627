// Scenario files: strict, sectioned key = value text with unit suffixes.
//
//   # comment
//   seed = 2024
//   output_dir = out/fig4
//
//   [site1]
//   frequency = 1.990 MHz
//   height = 50 um
//
// Unknown sections and keys are rejected. Values are normalized to a
// canonical unit on parse (Hz, m, F, u, quanta, quanta_per_s, s, per_s),
// and the typed Scenario keeps those canonical numbers, so
// serialize(parse(serialize(s))) reproduces the same text and digest.
#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ionwire/circuit.hpp"
#include "ionwire/core.hpp"
#include "ionwire/dynamics.hpp"
#include "ionwire/geometry.hpp"

namespace ionwire::scenario {

enum class ErrorKind { syntax, missing_field, unknown_key, bad_unit, bad_value, invariant, io };

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::syntax: return "syntax error";
        case ErrorKind::missing_field: return "missing field";
        case ErrorKind::unknown_key: return "unknown key";
        case ErrorKind::bad_unit: return "bad unit";
        case ErrorKind::bad_value: return "bad value";
        case ErrorKind::invariant: return "invalid scenario";
        case ErrorKind::io: return "i/o error";
    }
    return "error";
}

class ScenarioError : public InvalidInput {
public:
    ScenarioError(ErrorKind kind, std::string source, int line, std::string field, const std::string& message)
        : InvalidInput(format(kind, source, line, field, message)),
          kind_(kind),
          line_(line),
          field_(std::move(field)) {}

    ErrorKind kind() const { return kind_; }
    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    static std::string format(ErrorKind kind, const std::string& source, int line, const std::string& field,
                              const std::string& message) {
        std::string s = source.empty() ? "<scenario>" : source;
        if (line > 0) s += ":" + std::to_string(line);
        s += ": ";
        s += to_string(kind);
        if (!field.empty()) s += " '" + field + "'";
        return s + ": " + message;
    }
    ErrorKind kind_;
    int line_;
    std::string field_;
};

enum class ScheduleKind { resonance_scan, sympathetic_run, swap_demo };
enum class ExchangeMode { hamiltonian, incoherent };
enum class CoolingMode { none, langevin, hard };
enum class IntegratorKind { envelope, full };

struct SpeciesConfig {
    std::string name = "40Ca+";
    int charge = 1;
    double mass_u = 0.0;  // atomic mass units
};

struct SiteConfig {
    double frequency_hz = 0.0;
    double height_m = 0.0;
    std::optional<double> effective_distance_m;  // empty: from the paddle geometry
};

struct WireConfig {
    double capacitance_f = 0.0;
    double paddle_side_m = 0.0;
    double separation_m = 0.0;
    double resistance_ohm = 0.0;
};

struct IonNoiseConfig {
    double heating_rate = 0.0;       // quanta/s at reference_hz
    double reference_hz = 0.0;       // 0: the site frequency
    double jitter_hz = 0.0;          // rms
};

struct NoiseConfig {
    std::array<IonNoiseConfig, 2> ion{};
    double spectral_exponent = 1.0;
    dynamics::JitterKind jitter_kind = dynamics::JitterKind::per_shot_static;
    double correlation_time_s = 0.0;
};

struct IonCoolingConfig {
    CoolingMode mode = CoolingMode::none;
    double occupation = 0.0;  // quanta
    double damping = 0.0;     // 1/s
};

struct Detuning {
    double value = 0.0;
    bool in_kappa = false;  // multiples of kappa rather than Hz
};

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::swap_demo;
    ExchangeMode exchange = ExchangeMode::hamiltonian;
    std::optional<double> kappa_hz;  // kappa / 2 pi override; empty: wire prediction

    // resonance_scan
    double scan_center_hz = 0.0;
    double scan_span_hz = 0.0;
    int scan_points = 0;
    double probe_duration_s = 0.0;
    double hot_occupation = 0.0;
    double probe_initial = 0.0;

    // sympathetic_run
    double wait_start_s = 0.0;
    double wait_stop_s = 0.0;
    double wait_step_s = 0.0;
    double crossing_time_s = 0.0;
    double hot_initial = 0.0;
    double uncoupled_initial = 0.0;

    // swap_demo
    double duration_s = 0.0;
    std::array<double, 2> initial{};
    Detuning detuning;
};

struct EnsembleConfig {
    std::size_t size = 1;
    IntegratorKind integrator = IntegratorKind::envelope;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    std::string output_dir;
    SpeciesConfig species;
    std::array<SiteConfig, 2> site{};
    WireConfig wire;
    NoiseConfig noise;
    std::array<IonCoolingConfig, 2> cooling{};
    ScheduleConfig schedule;
    EnsembleConfig ensemble;

    IonSpecies ion_species() const {
        return {species.charge, species.mass_u, species.name};
    }

    WireSpec wire_spec() const {
        return {wire.capacitance_f, wire.paddle_side_m, wire.separation_m, wire.resistance_ohm};
    }

    TrapSite trap_site(int i) const {
        const auto& s = site[static_cast<std::size_t>(i)];
        const auto& n = noise.ion[static_cast<std::size_t>(i)];
        TrapSite t;
        t.vertical_frequency = hz_to_angular(s.frequency_hz);
        t.physical_height = s.height_m;
        t.effective_distance = s.effective_distance_m ? *s.effective_distance_m
                                                      : geometry::paddle_effective_distance(wire_spec(), s.height_m);
        t.heating_rate_reference = n.heating_rate;
        t.reference_frequency = hz_to_angular(n.reference_hz > 0.0 ? n.reference_hz : s.frequency_hz);
        t.jitter_sigma = n.jitter_hz;
        return t;
    }

    dynamics::NoiseModel noise_model(int i) const {
        auto m = dynamics::NoiseModel::from_site(trap_site(i), noise.spectral_exponent);
        m.jitter_kind = noise.jitter_kind;
        m.correlation_time = noise.correlation_time_s;
        return m;
    }

    dynamics::CoolingClamp cooling_clamp(int i) const {
        const auto& c = cooling[static_cast<std::size_t>(i)];
        switch (c.mode) {
            case CoolingMode::none: return {};
            case CoolingMode::langevin: return {c.damping, c.occupation, false};
            case CoolingMode::hard: return dynamics::CoolingClamp::hard_clamp(c.occupation);
        }
        return {};
    }

    /// Wire-mediated coupling predicted for the two sites (rad/s); uses the
    /// mean frequency even when the sites are detuned.
    double predicted_kappa() const {
        const auto s1 = trap_site(0), s2 = trap_site(1);
        const double w = 0.5 * (s1.vertical_frequency + s2.vertical_frequency);
        return circuit::wire_coupling_rate(ion_species(), w, s1.effective_distance, s2.effective_distance,
                                           wire.capacitance_f);
    }

    /// Coupling used by the dynamics (rad/s): the override if present.
    double kappa() const { return schedule.kappa_hz ? hz_to_angular(*schedule.kappa_hz) : predicted_kappa(); }

    std::vector<double> wait_times() const {
        std::vector<double> t;
        const auto& s = schedule;
        const auto n = static_cast<long>(std::floor((s.wait_stop_s - s.wait_start_s) / s.wait_step_s + 1e-9));
        for (long k = 0; k <= n; ++k) t.push_back(s.wait_start_s + static_cast<double>(k) * s.wait_step_s);
        return t;
    }

    std::vector<double> scan_frequencies_hz() const {
        std::vector<double> f;
        const auto& s = schedule;
        for (int k = 0; k < s.scan_points; ++k)
            f.push_back(s.scan_center_hz - 0.5 * s.scan_span_hz + s.scan_span_hz * k / (s.scan_points - 1));
        return f;
    }
};

// ---------------------------------------------------------------------------
// Units

enum class Dim { frequency, length, capacitance, mass, occupation, heating, time, rate, resistance, none };

namespace detail {

struct UnitDef {
    const char* name;
    double scale;
};

inline const std::vector<UnitDef>& units_for(Dim d) {
    static const std::vector<UnitDef> frequency{{"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}};
    static const std::vector<UnitDef> length{{"m", 1.0}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}};
    static const std::vector<UnitDef> capacitance{{"F", 1.0}, {"pF", 1e-12}, {"fF", 1e-15}, {"aF", 1e-18}};
    static const std::vector<UnitDef> mass{{"u", 1.0}};
    static const std::vector<UnitDef> occupation{{"quanta", 1.0}};
    static const std::vector<UnitDef> heating{{"quanta_per_s", 1.0}, {"quanta_per_ms", 1e3}};
    static const std::vector<UnitDef> time{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}};
    static const std::vector<UnitDef> rate{{"per_s", 1.0}, {"per_ms", 1e3}};
    static const std::vector<UnitDef> resistance{{"ohm", 1.0}, {"kohm", 1e3}};
    static const std::vector<UnitDef> none{};
    switch (d) {
        case Dim::frequency: return frequency;
        case Dim::length: return length;
        case Dim::capacitance: return capacitance;
        case Dim::mass: return mass;
        case Dim::occupation: return occupation;
        case Dim::heating: return heating;
        case Dim::time: return time;
        case Dim::rate: return rate;
        case Dim::resistance: return resistance;
        case Dim::none: return none;
    }
    return none;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Shortest text that parses back to exactly v.
inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

using Section = std::map<std::string, Entry>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Parser

class Reader {
public:
    Reader(std::map<std::string, detail::Section> sections, std::string source)
        : sections_(std::move(sections)), source_(std::move(source)) {}

    [[noreturn]] void fail(ErrorKind kind, const std::string& section, const std::string& key,
                           const std::string& message) const {
        int line = 0;
        if (const auto* e = find(section, key)) line = e->line;
        throw ScenarioError(kind, source_, line, qualified(section, key), message);
    }

    bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
    bool has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

    void require_section(const std::string& s) const {
        if (!has_section(s))
            throw ScenarioError(ErrorKind::missing_field, source_, 0, s, "section [" + s + "] is missing");
    }

    std::string text(const std::string& section, const std::string& key,
                     std::optional<std::string> fallback = std::nullopt) {
        auto* e = find(section, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ScenarioError(ErrorKind::missing_field, source_, 0, qualified(section, key), "required key is missing");
        }
        e->used = true;
        return e->value;
    }

    double quantity(const std::string& section, const std::string& key, Dim dim,
                    std::optional<double> fallback = std::nullopt) {
        auto* e = find(section, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ScenarioError(ErrorKind::missing_field, source_, 0, qualified(section, key), "required key is missing");
        }
        e->used = true;
        return convert(*e, section, key, dim);
    }

    template <typename E>
    E choice(const std::string& section, const std::string& key, const std::vector<std::pair<std::string, E>>& opts,
             std::optional<E> fallback = std::nullopt) {
        auto* e = find(section, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ScenarioError(ErrorKind::missing_field, source_, 0, qualified(section, key), "required key is missing");
        }
        e->used = true;
        std::string allowed;
        for (const auto& [name, v] : opts) {
            if (e->value == name) return v;
            allowed += (allowed.empty() ? "" : ", ") + name;
        }
        throw ScenarioError(ErrorKind::bad_value, source_, e->line, qualified(section, key),
                            "'" + e->value + "' is not one of: " + allowed);
    }

    long long integer(const std::string& section, const std::string& key, std::optional<long long> fallback = std::nullopt) {
        auto* e = find(section, key);
        if (!e) {
            if (fallback) return *fallback;
            throw ScenarioError(ErrorKind::missing_field, source_, 0, qualified(section, key), "required key is missing");
        }
        e->used = true;
        long long v = 0;
        const char* end = e->value.data() + e->value.size();
        auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
        if (ec != std::errc() || ptr != end)
            throw ScenarioError(ErrorKind::bad_value, source_, e->line, qualified(section, key),
                                "expected an integer, got '" + e->value + "'");
        return v;
    }

    std::uint64_t unsigned_integer(const std::string& section, const std::string& key) {
        auto* e = find(section, key);
        if (!e) throw ScenarioError(ErrorKind::missing_field, source_, 0, qualified(section, key), "required key is missing");
        e->used = true;
        std::uint64_t v = 0;
        const char* end = e->value.data() + e->value.size();
        auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
        if (ec != std::errc() || ptr != end)
            throw ScenarioError(ErrorKind::bad_value, source_, e->line, qualified(section, key),
                                "expected an unsigned 64-bit integer, got '" + e->value + "'");
        return v;
    }

    /// Quantity or the literal "auto".
    std::optional<double> optional_quantity(const std::string& section, const std::string& key, Dim dim) {
        auto* e = find(section, key);
        if (!e) return std::nullopt;
        e->used = true;
        if (e->value == "auto") return std::nullopt;
        return convert(*e, section, key, dim);
    }

    Detuning detuning(const std::string& section, const std::string& key) {
        auto* e = find(section, key);
        if (!e) return {};
        e->used = true;
        const auto [num, unit] = split(*e, section, key);
        if (unit == "kappa") return {num, true};
        detail::Entry copy = *e;
        return {convert(copy, section, key, Dim::frequency), false};
    }

    void reject_unused() const {
        for (const auto& [sname, sec] : sections_) {
            for (const auto& [key, e] : sec) {
                if (!e.used)
                    throw ScenarioError(ErrorKind::unknown_key, source_, e.line, qualified(sname, key),
                                        "not a recognised key" + std::string(sname.empty() ? " at top level" : " in [" + sname + "]"));
            }
        }
    }

    const std::string& source() const { return source_; }

private:
    static std::string qualified(const std::string& section, const std::string& key) {
        if (key.empty()) return section;
        return section.empty() ? key : section + "." + key;
    }

    detail::Entry* find(const std::string& section, const std::string& key) {
        auto it = sections_.find(section);
        if (it == sections_.end()) return nullptr;
        auto jt = it->second.find(key);
        return jt == it->second.end() ? nullptr : &jt->second;
    }
    const detail::Entry* find(const std::string& section, const std::string& key) const {
        auto it = sections_.find(section);
        if (it == sections_.end()) return nullptr;
        auto jt = it->second.find(key);
        return jt == it->second.end() ? nullptr : &jt->second;
    }

    std::pair<double, std::string> split(const detail::Entry& e, const std::string& section, const std::string& key) const {
        const auto sp = e.value.find_first_of(" \t");
        const std::string num = sp == std::string::npos ? e.value : e.value.substr(0, sp);
        const std::string unit = sp == std::string::npos ? "" : detail::trim(e.value.substr(sp));
        const auto v = detail::parse_number(num);
        if (!v)
            throw ScenarioError(ErrorKind::bad_value, source_, e.line, qualified(section, key),
                                "expected a number, got '" + num + "'");
        return {*v, unit};
    }

    double convert(const detail::Entry& e, const std::string& section, const std::string& key, Dim dim) const {
        const auto [v, unit] = split(e, section, key);
        const auto& table = detail::units_for(dim);
        if (table.empty()) {
            if (!unit.empty())
                throw ScenarioError(ErrorKind::bad_unit, source_, e.line, qualified(section, key),
                                    "takes no unit, got '" + unit + "'");
            return v;
        }
        std::string allowed;
        for (const auto& u : table) {
            if (unit == u.name) return v * u.scale;
            allowed += (allowed.empty() ? "" : ", ") + std::string(u.name);
        }
        if (unit.empty())
            throw ScenarioError(ErrorKind::bad_unit, source_, e.line, qualified(section, key),
                                "a unit is required (one of: " + allowed + ")");
        throw ScenarioError(ErrorKind::bad_unit, source_, e.line, qualified(section, key),
                            "unit '" + unit + "' not accepted here (one of: " + allowed + ")");
    }

    std::map<std::string, detail::Section> sections_;
    std::string source_;
};

inline const std::vector<std::string>& section_order() {
    static const std::vector<std::string> s{"species", "site1", "site2", "wire", "noise",
                                            "cooling", "schedule", "ensemble"};
    return s;
}

/// Splits text into sections; the empty section name holds top-level keys.
inline std::map<std::string, detail::Section> tokenize(const std::string& text, const std::string& source) {
    std::map<std::string, detail::Section> sections;
    sections[""];
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    const std::set<std::string> known(section_order().begin(), section_order().end());
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ScenarioError(ErrorKind::syntax, source, lineno, "", "unterminated section header");
            current = detail::trim(line.substr(1, line.size() - 2));
            if (!known.count(current))
                throw ScenarioError(ErrorKind::unknown_key, source, lineno, current, "unknown section [" + current + "]");
            if (sections.count(current))
                throw ScenarioError(ErrorKind::syntax, source, lineno, current, "section [" + current + "] repeated");
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ScenarioError(ErrorKind::syntax, source, lineno, "", "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ScenarioError(ErrorKind::syntax, source, lineno, "", "empty key");
        const std::string field = current.empty() ? key : current + "." + key;
        if (value.empty()) throw ScenarioError(ErrorKind::bad_value, source, lineno, field, "empty value");
        auto& sec = sections[current];
        if (sec.count(key)) throw ScenarioError(ErrorKind::syntax, source, lineno, field, "key repeated");
        sec[key] = {value, lineno, false};
    }
    return sections;
}

namespace detail {

inline const std::vector<std::pair<std::string, CoolingMode>>& cooling_modes() {
    static const std::vector<std::pair<std::string, CoolingMode>> m{
        {"none", CoolingMode::none}, {"langevin", CoolingMode::langevin}, {"hard", CoolingMode::hard}};
    return m;
}

inline void check(bool ok, Reader& r, const std::string& section, const std::string& key, const std::string& msg) {
    if (!ok) r.fail(ErrorKind::invariant, section, key, msg);
}

}  // namespace detail

inline Scenario parse_text(const std::string& text, const std::string& source = "") {
    Reader r(tokenize(text, source), source);
    for (const auto& s : section_order()) r.require_section(s);

    Scenario sc;
    sc.name = r.text("", "name", std::string("scenario"));
    sc.seed = r.unsigned_integer("", "seed");
    sc.output_dir = r.text("", "output_dir", std::string());

    sc.species.name = r.text("species", "name");
    std::optional<double> preset_mass;
    int preset_charge = 1;
    if (sc.species.name == "40Ca+") {
        preset_mass = IonSpecies::calcium40().mass_number;
    } else if (sc.species.name == "e-") {
        preset_mass = IonSpecies::electron().mass_number;
        preset_charge = -1;
    }
    sc.species.charge = static_cast<int>(r.integer("species", "charge", preset_charge));
    sc.species.mass_u = r.quantity("species", "mass", Dim::mass, preset_mass);
    detail::check(sc.species.charge != 0, r, "species", "charge", "charge must be nonzero");
    detail::check(sc.species.mass_u > 0, r, "species", "mass", "mass must be > 0");

    for (int i = 0; i < 2; ++i) {
        const std::string s = "site" + std::to_string(i + 1);
        auto& site = sc.site[static_cast<std::size_t>(i)];
        site.frequency_hz = r.quantity(s, "frequency", Dim::frequency);
        site.height_m = r.quantity(s, "height", Dim::length);
        site.effective_distance_m = r.optional_quantity(s, "effective_distance", Dim::length);
        detail::check(site.frequency_hz > 0, r, s, "frequency", "must be > 0");
        detail::check(site.height_m > 0, r, s, "height", "must be > 0");
        if (site.effective_distance_m)
            detail::check(*site.effective_distance_m >= site.height_m, r, s, "effective_distance",
                          "must be >= height");
    }

    sc.wire.capacitance_f = r.quantity("wire", "capacitance", Dim::capacitance);
    sc.wire.paddle_side_m = r.quantity("wire", "paddle_side", Dim::length);
    sc.wire.separation_m = r.quantity("wire", "separation", Dim::length);
    sc.wire.resistance_ohm = r.quantity("wire", "resistance", Dim::resistance, 0.0);
    detail::check(sc.wire.capacitance_f > 0, r, "wire", "capacitance", "must be > 0");
    detail::check(sc.wire.paddle_side_m > 0, r, "wire", "paddle_side", "must be > 0");
    detail::check(sc.wire.separation_m > sc.wire.paddle_side_m, r, "wire", "separation",
                  "paddles overlap: separation must exceed paddle_side");
    detail::check(sc.wire.resistance_ohm >= 0, r, "wire", "resistance", "must be >= 0");

    for (int i = 0; i < 2; ++i) {
        const std::string p = "ion" + std::to_string(i + 1) + "_";
        auto& n = sc.noise.ion[static_cast<std::size_t>(i)];
        n.heating_rate = r.quantity("noise", p + "heating_rate", Dim::heating, 0.0);
        n.reference_hz = r.quantity("noise", p + "reference", Dim::frequency, 0.0);
        n.jitter_hz = r.quantity("noise", p + "jitter", Dim::frequency, 0.0);
        detail::check(n.heating_rate >= 0, r, "noise", p + "heating_rate", "must be >= 0");
        detail::check(n.reference_hz >= 0, r, "noise", p + "reference", "must be >= 0");
        detail::check(n.jitter_hz >= 0, r, "noise", p + "jitter", "must be >= 0");
    }
    sc.noise.spectral_exponent = r.quantity("noise", "spectral_exponent", Dim::none, 1.0);
    detail::check(sc.noise.spectral_exponent >= 0 && sc.noise.spectral_exponent <= 2, r, "noise",
                  "spectral_exponent", "must lie in [0, 2]");
    sc.noise.jitter_kind = r.choice<dynamics::JitterKind>(
        "noise", "jitter_kind",
        {{"static", dynamics::JitterKind::per_shot_static}, {"ornstein_uhlenbeck", dynamics::JitterKind::ornstein_uhlenbeck}},
        dynamics::JitterKind::per_shot_static);
    sc.noise.correlation_time_s = r.quantity("noise", "correlation_time", Dim::time, 0.0);
    detail::check(sc.noise.jitter_kind != dynamics::JitterKind::ornstein_uhlenbeck || sc.noise.correlation_time_s > 0,
                  r, "noise", "correlation_time", "ornstein_uhlenbeck jitter needs correlation_time > 0");

    for (int i = 0; i < 2; ++i) {
        const std::string p = "ion" + std::to_string(i + 1);
        auto& c = sc.cooling[static_cast<std::size_t>(i)];
        c.mode = r.choice<CoolingMode>("cooling", p, detail::cooling_modes(), CoolingMode::none);
        c.occupation = r.quantity("cooling", p + "_occupation", Dim::occupation, 0.0);
        c.damping = r.quantity("cooling", p + "_damping", Dim::rate, 0.0);
        detail::check(c.occupation >= 0, r, "cooling", p + "_occupation", "must be >= 0");
        detail::check(c.damping >= 0, r, "cooling", p + "_damping", "must be >= 0");
        detail::check(c.mode != CoolingMode::langevin || c.damping > 0, r, "cooling", p + "_damping",
                      "langevin cooling needs a damping rate > 0");
    }

    auto& s = sc.schedule;
    s.kind = r.choice<ScheduleKind>("schedule", "kind",
                                    {{"resonance_scan", ScheduleKind::resonance_scan},
                                     {"sympathetic_run", ScheduleKind::sympathetic_run},
                                     {"swap_demo", ScheduleKind::swap_demo}});
    s.exchange = r.choice<ExchangeMode>(
        "schedule", "exchange", {{"hamiltonian", ExchangeMode::hamiltonian}, {"incoherent", ExchangeMode::incoherent}},
        ExchangeMode::hamiltonian);
    s.kappa_hz = r.optional_quantity("schedule", "kappa", Dim::frequency);
    if (s.kappa_hz) detail::check(*s.kappa_hz >= 0, r, "schedule", "kappa", "must be >= 0");
    switch (s.kind) {
        case ScheduleKind::resonance_scan:
            s.scan_center_hz = r.quantity("schedule", "scan_center", Dim::frequency);
            s.scan_span_hz = r.quantity("schedule", "scan_span", Dim::frequency);
            s.scan_points = static_cast<int>(r.integer("schedule", "scan_points"));
            s.probe_duration_s = r.quantity("schedule", "probe_duration", Dim::time);
            s.hot_occupation = r.quantity("schedule", "hot_occupation", Dim::occupation);
            s.probe_initial = r.quantity("schedule", "probe_initial", Dim::occupation, 0.0);
            detail::check(s.scan_points >= 6, r, "schedule", "scan_points", "need at least 6 scan points");
            detail::check(s.scan_span_hz > 0, r, "schedule", "scan_span", "must be > 0");
            detail::check(s.scan_center_hz - s.scan_span_hz / 2 > 0, r, "schedule", "scan_span",
                          "scan reaches non-positive frequencies");
            detail::check(s.probe_duration_s > 0, r, "schedule", "probe_duration", "must be > 0");
            break;
        case ScheduleKind::sympathetic_run:
            s.wait_start_s = r.quantity("schedule", "wait_start", Dim::time, 0.0);
            s.wait_stop_s = r.quantity("schedule", "wait_stop", Dim::time);
            s.wait_step_s = r.quantity("schedule", "wait_step", Dim::time);
            s.crossing_time_s = r.quantity("schedule", "crossing_time", Dim::time, 0.0);
            s.hot_initial = r.quantity("schedule", "hot_initial", Dim::occupation);
            s.uncoupled_initial = r.quantity("schedule", "uncoupled_initial", Dim::occupation, s.hot_initial);
            detail::check(s.wait_step_s > 0, r, "schedule", "wait_step", "must be > 0");
            detail::check(s.wait_start_s >= 0 && s.wait_stop_s > s.wait_start_s, r, "schedule", "wait_stop",
                          "need 0 <= wait_start < wait_stop");
            detail::check((s.wait_stop_s - s.wait_start_s) / s.wait_step_s >= 2 - 1e-9, r, "schedule", "wait_step",
                          "need at least 3 wait times");
            detail::check(s.crossing_time_s == 0 || s.crossing_time_s > s.wait_stop_s, r, "schedule",
                          "crossing_time", "must lie after wait_stop");
            break;
        case ScheduleKind::swap_demo:
            s.duration_s = r.quantity("schedule", "duration", Dim::time);
            s.initial[0] = r.quantity("schedule", "initial1", Dim::occupation);
            s.initial[1] = r.quantity("schedule", "initial2", Dim::occupation, 0.0);
            s.detuning = r.detuning("schedule", "detuning");
            detail::check(s.duration_s > 0, r, "schedule", "duration", "must be > 0");
            break;
    }

    const auto size = r.integer("ensemble", "size");
    detail::check(size >= 1, r, "ensemble", "size", "ensemble size must be >= 1");
    sc.ensemble.size = static_cast<std::size_t>(size);
    sc.ensemble.integrator = r.choice<IntegratorKind>(
        "ensemble", "integrator", {{"envelope", IntegratorKind::envelope}, {"full", IntegratorKind::full}},
        IntegratorKind::envelope);

    r.reject_unused();
    // Physical consistency of the assembled objects.
    try {
        sc.ion_species().validate();
        sc.wire_spec().validate();
        for (int i = 0; i < 2; ++i) {
            sc.trap_site(i).validate();
            sc.noise_model(i).validate();
            sc.cooling_clamp(i).validate();
        }
    } catch (const InvalidInput& e) {
        throw ScenarioError(ErrorKind::invariant, source, 0, "", e.what());
    }
    return sc;
}

inline Scenario parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ScenarioError(ErrorKind::io, path, 0, "", "cannot open file");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Canonical serialization and digest

inline std::string serialize(const Scenario& sc) {
    using detail::format_number;
    std::ostringstream o;
    auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
    auto q = [&](const std::string& k, double v, const char* unit) { kv(k, format_number(v) + " " + unit); };
    auto plain = [&](const std::string& k, double v) { kv(k, format_number(v)); };
    kv("name", sc.name);
    kv("seed", std::to_string(sc.seed));
    if (!sc.output_dir.empty()) kv("output_dir", sc.output_dir);

    o << "\n[species]\n";
    kv("name", sc.species.name);
    kv("charge", std::to_string(sc.species.charge));
    q("mass", sc.species.mass_u, "u");

    for (int i = 0; i < 2; ++i) {
        const auto& s = sc.site[static_cast<std::size_t>(i)];
        o << "\n[site" << i + 1 << "]\n";
        q("frequency", s.frequency_hz, "Hz");
        q("height", s.height_m, "m");
        if (s.effective_distance_m) q("effective_distance", *s.effective_distance_m, "m");
        else kv("effective_distance", "auto");
    }

    o << "\n[wire]\n";
    q("capacitance", sc.wire.capacitance_f, "F");
    q("paddle_side", sc.wire.paddle_side_m, "m");
    q("separation", sc.wire.separation_m, "m");
    q("resistance", sc.wire.resistance_ohm, "ohm");

    o << "\n[noise]\n";
    for (int i = 0; i < 2; ++i) {
        const auto& n = sc.noise.ion[static_cast<std::size_t>(i)];
        const std::string p = "ion" + std::to_string(i + 1) + "_";
        q(p + "heating_rate", n.heating_rate, "quanta_per_s");
        q(p + "reference", n.reference_hz, "Hz");
        q(p + "jitter", n.jitter_hz, "Hz");
    }
    plain("spectral_exponent", sc.noise.spectral_exponent);
    kv("jitter_kind", sc.noise.jitter_kind == dynamics::JitterKind::per_shot_static ? "static" : "ornstein_uhlenbeck");
    q("correlation_time", sc.noise.correlation_time_s, "s");

    o << "\n[cooling]\n";
    for (int i = 0; i < 2; ++i) {
        const auto& c = sc.cooling[static_cast<std::size_t>(i)];
        const std::string p = "ion" + std::to_string(i + 1);
        const char* mode = c.mode == CoolingMode::none ? "none" : c.mode == CoolingMode::langevin ? "langevin" : "hard";
        kv(p, mode);
        q(p + "_occupation", c.occupation, "quanta");
        q(p + "_damping", c.damping, "per_s");
    }

    const auto& s = sc.schedule;
    o << "\n[schedule]\n";
    switch (s.kind) {
        case ScheduleKind::resonance_scan:
            kv("kind", "resonance_scan");
            break;
        case ScheduleKind::sympathetic_run:
            kv("kind", "sympathetic_run");
            break;
        case ScheduleKind::swap_demo:
            kv("kind", "swap_demo");
            break;
    }
    kv("exchange", s.exchange == ExchangeMode::hamiltonian ? "hamiltonian" : "incoherent");
    if (s.kappa_hz) q("kappa", *s.kappa_hz, "Hz");
    else kv("kappa", "auto");
    switch (s.kind) {
        case ScheduleKind::resonance_scan:
            q("scan_center", s.scan_center_hz, "Hz");
            q("scan_span", s.scan_span_hz, "Hz");
            kv("scan_points", std::to_string(s.scan_points));
            q("probe_duration", s.probe_duration_s, "s");
            q("hot_occupation", s.hot_occupation, "quanta");
            q("probe_initial", s.probe_initial, "quanta");
            break;
        case ScheduleKind::sympathetic_run:
            q("wait_start", s.wait_start_s, "s");
            q("wait_stop", s.wait_stop_s, "s");
            q("wait_step", s.wait_step_s, "s");
            q("crossing_time", s.crossing_time_s, "s");
            q("hot_initial", s.hot_initial, "quanta");
            q("uncoupled_initial", s.uncoupled_initial, "quanta");
            break;
        case ScheduleKind::swap_demo:
            q("duration", s.duration_s, "s");
            q("initial1", s.initial[0], "quanta");
            q("initial2", s.initial[1], "quanta");
            q("detuning", s.detuning.value, s.detuning.in_kappa ? "kappa" : "Hz");
            break;
    }

    o << "\n[ensemble]\n";
    kv("size", std::to_string(sc.ensemble.size));
    kv("integrator", sc.ensemble.integrator == IntegratorKind::envelope ? "envelope" : "full");
    return o.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Digest of the physics content: output_dir and name do not contribute.
inline std::string digest(const Scenario& sc) {
    Scenario copy = sc;
    copy.output_dir.clear();
    copy.name = "scenario";
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize(copy))));
    return buf;
}

}  // namespace ionwire::scenario
