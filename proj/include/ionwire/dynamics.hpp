// Time-domain models of two wire-coupled vertical modes.
//
//   H = sum_i p_i^2/(2 m_i) + m_i w_i^2 x_i^2 / 2 + 2 kappa sqrt(m1 w1 m2 w2) x1 x2
//
// Three levels of description are provided:
//   * integrate_full      - the equations of motion of H with stochastic
//                           heating kicks and a Langevin cooling clamp
//                           (velocity Verlet, ~50 steps per period);
//   * integrate_envelope  - slowly varying complex amplitudes in a frame
//                           rotating at w1, valid for kappa, detunings and
//                           damping << w;
//   * rate_equation_model - deterministic mean occupations with an
//                           incoherent exchange rate kappa_ex.
//
// Occupations reported by the stochastic integrators are classical
// actions n = E / (hbar w) without the zero-point offset.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ionwire/core.hpp"
#include "ionwire/random.hpp"

namespace ionwire::dynamics {

using cplx = std::complex<double>;

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class JitterKind { per_shot_static, ornstein_uhlenbeck };

struct NoiseModel {
    double heating_rate_at_reference = 0.0;  // quanta/s
    double reference_frequency = 0.0;        // rad/s
    double spectral_exponent = 1.0;          // alpha in S_E ~ 1/f^alpha
    double jitter_sigma = 0.0;               // Hz
    JitterKind jitter_kind = JitterKind::per_shot_static;
    double correlation_time = 0.0;  // s, ornstein_uhlenbeck only

    void validate() const {
        require(std::isfinite(heating_rate_at_reference) && heating_rate_at_reference >= 0.0,
                "heating rate must be >= 0");
        require(heating_rate_at_reference == 0.0 || reference_frequency > 0.0,
                "noise reference_frequency must be > 0");
        require(spectral_exponent >= 0.0 && spectral_exponent <= 2.0,
                "spectral_exponent must lie in [0, 2]");
        require(std::isfinite(jitter_sigma) && jitter_sigma >= 0.0, "jitter_sigma must be >= 0");
        require(jitter_kind != JitterKind::ornstein_uhlenbeck || correlation_time > 0.0,
                "ornstein_uhlenbeck jitter needs correlation_time > 0");
    }

    static NoiseModel from_site(const TrapSite& site, double spectral_exponent = 1.0) {
        return {site.heating_rate_reference,
                site.reference_frequency > 0.0 ? site.reference_frequency : site.vertical_frequency,
                spectral_exponent, site.jitter_sigma, JitterKind::per_shot_static, 0.0};
    }
};

/// Heating rate (quanta/s) at omega. A field PSD S_E ~ 1/f^alpha heats a
/// mode of frequency w at a rate ~ S_E(w) / w.
inline double noise_psd(const NoiseModel& model, double omega) {
    require(std::isfinite(omega) && omega > 0.0, "omega must be > 0");
    model.validate();
    if (model.heating_rate_at_reference == 0.0) return 0.0;
    return model.heating_rate_at_reference *
           std::pow(model.reference_frequency / omega, model.spectral_exponent + 1.0);
}

/// Phenomenological laser cooling: occupation relaxes to
/// steady_state_occupation at damping_rate. A hard clamp resamples the
/// mode from a thermal state at the steady-state occupation every step.
struct CoolingClamp {
    double damping_rate = 0.0;             // 1/s, energy relaxation rate
    double steady_state_occupation = 0.0;  // quanta
    bool hard = false;

    void validate() const {
        require(std::isfinite(damping_rate) && damping_rate >= 0.0, "damping_rate must be >= 0");
        require(std::isfinite(steady_state_occupation) && steady_state_occupation >= 0.0,
                "steady_state_occupation must be >= 0");
    }
    bool active() const { return hard || damping_rate > 0.0; }

    static CoolingClamp hard_clamp(double n_ss) { return {0.0, n_ss, true}; }
};

struct CoupledSystem {
    std::array<double, 2> mass{};   // kg
    std::array<double, 2> omega{};  // rad/s
    double kappa = 0.0;             // rad/s, Hamiltonian coupling
    std::array<NoiseModel, 2> noise{};
    std::array<CoolingClamp, 2> cooling{};
    /// Incoherent exchange rate kappa_ex (1/s); envelope and rate models only.
    double incoherent_rate = 0.0;

    void validate() const {
        for (int i = 0; i < 2; ++i) {
            require(std::isfinite(mass[i]) && mass[i] > 0.0, "mass must be > 0");
            require(std::isfinite(omega[i]) && omega[i] > 0.0, "omega must be > 0");
            noise[i].validate();
            cooling[i].validate();
        }
        require(std::isfinite(kappa), "kappa must be finite");
        require(std::isfinite(incoherent_rate) && incoherent_rate >= 0.0,
                "incoherent_rate must be >= 0");
    }

    double heating_rate(int i) const { return noise_psd(noise[i], omega[i]); }

    static CoupledSystem symmetric(double mass, double omega, double kappa) {
        CoupledSystem s;
        s.mass = {mass, mass};
        s.omega = {omega, omega};
        s.kappa = kappa;
        return s;
    }
};

enum class InitialKind {
    thermal,       // complex Gaussian amplitude, <|a|^2> = n
    fixed_energy,  // |a|^2 = n, uniformly random phase
    fixed_phase,   // |a|^2 = n, phase zero
};

struct InitialCondition {
    double n_bar = 0.0;
    InitialKind kind = InitialKind::thermal;
};

struct RunConfig {
    std::array<InitialCondition, 2> initial{};
    double duration = 0.0;  // s
    double dt = 0.0;        // s; 0 selects the integrator's automatic step
    /// Explicit sample times; if empty, samples every sample_interval from 0.
    std::vector<double> sample_times;
    double sample_interval = 0.0;
    std::size_t realizations = 1;
    std::uint64_t seed = 0;
};

struct EnsembleTrajectory {
    std::vector<double> times;
    std::vector<double> n_bar_1, n_bar_2;
    std::vector<double> n_bar_sem_1, n_bar_sem_2;
    std::size_t n_realizations = 0;
    std::uint64_t rng_seed = 0;
    std::string integrator;
    double dt = 0.0;
    std::size_t steps = 0;
};

inline cplx thermal_amplitude(Rng& rng, double n_bar) {
    const double s = std::sqrt(n_bar / 2.0);
    return {s * rng.normal(), s * rng.normal()};
}

inline cplx initial_amplitude(Rng& rng, const InitialCondition& ic) {
    require(std::isfinite(ic.n_bar) && ic.n_bar >= 0.0, "initial occupation must be >= 0");
    // Draw the same number of variates for every kind so streams line up.
    const double u = rng.uniform();
    const cplx thermal = thermal_amplitude(rng, ic.n_bar);
    switch (ic.kind) {
        case InitialKind::thermal:
            return thermal;
        case InitialKind::fixed_energy:
            return std::polar(std::sqrt(ic.n_bar), two_pi * u);
        case InitialKind::fixed_phase:
            return {std::sqrt(ic.n_bar), 0.0};
    }
    return {};
}

namespace detail {

struct SampleGrid {
    std::vector<std::size_t> step_index;
    std::vector<double> times;
    std::size_t total_steps = 0;
};

inline SampleGrid make_grid(const RunConfig& run, double dt) {
    require(std::isfinite(run.duration) && run.duration > 0.0, "duration must be > 0");
    require(dt > 0.0 && run.duration >= dt, "duration must be at least one step");
    SampleGrid g;
    std::vector<double> requested = run.sample_times;
    if (requested.empty()) {
        require(run.sample_interval > 0.0, "need sample_times or sample_interval > 0");
        const auto n = static_cast<std::size_t>(std::floor(run.duration / run.sample_interval + 1e-9));
        for (std::size_t k = 0; k <= n; ++k) requested.push_back(static_cast<double>(k) * run.sample_interval);
    }
    for (std::size_t k = 0; k < requested.size(); ++k) {
        const double t = requested[k];
        require(t >= 0.0 && t <= run.duration * (1 + 1e-12), "sample time outside [0, duration]");
        require(k == 0 || t > requested[k - 1], "sample times must be strictly increasing");
        const auto idx = static_cast<std::size_t>(std::llround(t / dt));
        require(g.step_index.empty() || idx > g.step_index.back(),
                "sample times closer than one integration step");
        g.step_index.push_back(idx);
        g.times.push_back(static_cast<double>(idx) * dt);
    }
    g.total_steps = g.step_index.back();
    return g;
}

/// Shrinks an automatic step so every requested sample falls on the grid
/// when the samples share a common spacing.
inline double align_step(const RunConfig& run, double dt_max) {
    std::vector<double> t = run.sample_times;
    if (t.empty()) {
        if (run.sample_interval <= 0.0) return dt_max;
        t = {0.0, run.sample_interval};
    }
    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < t.size(); ++k) spacing = std::min(spacing, t[k] - t[k - 1]);
    if (t.size() == 1) spacing = t[0];
    if (!(spacing > 0.0) || !std::isfinite(spacing)) return dt_max;
    for (double v : t) {
        const double r = v / spacing;
        if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) return dt_max;
    }
    const double sub = std::ceil(spacing / dt_max - 1e-12);
    return spacing / std::max(1.0, sub);
}

inline EnsembleTrajectory finish(const MomentAccumulator& acc, const SampleGrid& grid,
                                 const RunConfig& run, std::string name, double dt) {
    EnsembleTrajectory out;
    out.times = grid.times;
    out.n_realizations = acc.count;
    out.rng_seed = run.seed;
    out.integrator = std::move(name);
    out.dt = dt;
    out.steps = grid.total_steps;
    const double n = static_cast<double>(acc.count);
    for (std::size_t k = 0; k < grid.times.size(); ++k) {
        auto moments = [&](double s, double ss, std::vector<double>& mean, std::vector<double>& sem) {
            const double m = s / n;
            const double var = acc.count > 1 ? std::max(0.0, (ss - s * m) / (n - 1.0)) : 0.0;
            mean.push_back(m);
            sem.push_back(std::sqrt(var / n));
        };
        moments(acc.sum1[k], acc.sumsq1[k], out.n_bar_1, out.n_bar_sem_1);
        moments(acc.sum2[k], acc.sumsq2[k], out.n_bar_2, out.n_bar_sem_2);
    }
    return out;
}

/// Per-ion slow frequency offset (rad/s).
class Jitter {
public:
    Jitter(const NoiseModel& model, Rng& rng)
        : sigma_(two_pi * model.jitter_sigma),
          tau_(model.correlation_time),
          ou_(model.jitter_kind == JitterKind::ornstein_uhlenbeck && model.jitter_sigma > 0.0) {
        // Always consume one variate so streams stay aligned.
        offset_ = sigma_ * rng.normal();
    }
    double offset() const { return offset_; }
    bool varies() const { return ou_; }
    void advance(double dt, Rng& rng) {
        if (!ou_) return;
        const double decay = std::exp(-dt / tau_);
        offset_ = offset_ * decay + sigma_ * std::sqrt(1.0 - decay * decay) * rng.normal();
    }
    double bound() const { return 5.0 * sigma_; }

private:
    double sigma_, tau_;
    bool ou_;
    double offset_ = 0.0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Full equations of motion

struct OscillatorState {
    std::array<double, 2> x{};  // m
    std::array<double, 2> v{};  // m/s
};

struct MotionParams {
    std::array<double, 2> mass{};
    std::array<double, 2> omega{};  // restoring frequencies
    double coupling = 0.0;          // 2 kappa sqrt(m1 w1 m2 w2), N/m

    static MotionParams from(const CoupledSystem& s) {
        return {s.mass, s.omega,
                2.0 * s.kappa * std::sqrt(s.mass[0] * s.omega[0] * s.mass[1] * s.omega[1])};
    }
};

struct Derivatives {
    std::array<double, 2> dx{};
    std::array<double, 2> dv{};
};

/// Deterministic part of the motion, -dH/dx.
inline Derivatives equations_of_motion(const OscillatorState& s, const MotionParams& p) {
    Derivatives d;
    d.dx = s.v;
    d.dv[0] = -p.omega[0] * p.omega[0] * s.x[0] - p.coupling * s.x[1] / p.mass[0];
    d.dv[1] = -p.omega[1] * p.omega[1] * s.x[1] - p.coupling * s.x[0] / p.mass[1];
    return d;
}

inline double ion_energy(const OscillatorState& s, const MotionParams& p, int i) {
    return 0.5 * p.mass[i] * (s.v[i] * s.v[i] + p.omega[i] * p.omega[i] * s.x[i] * s.x[i]);
}

inline double total_energy(const OscillatorState& s, const MotionParams& p) {
    return ion_energy(s, p, 0) + ion_energy(s, p, 1) + p.coupling * s.x[0] * s.x[1];
}

/// One velocity-Verlet (kick-drift-kick) step.
inline void verlet_step(OscillatorState& s, const MotionParams& p, double dt) {
    auto d = equations_of_motion(s, p);
    for (int i = 0; i < 2; ++i) {
        s.v[i] += 0.5 * dt * d.dv[i];
        s.x[i] += dt * s.v[i];
    }
    d = equations_of_motion(s, p);
    for (int i = 0; i < 2; ++i) s.v[i] += 0.5 * dt * d.dv[i];
}

/// Position/velocity for classical action |a|^2 (in quanta).
inline void set_from_amplitude(OscillatorState& s, int i, cplx a, double mass, double omega) {
    const double hbar = constants::reduced_planck;
    s.x[i] = std::sqrt(2.0 * hbar / (mass * omega)) * a.real();
    s.v[i] = -std::sqrt(2.0 * hbar * omega / mass) * a.imag();
}

/// Largest step allowed for the full integrator: 50 steps per period.
inline double full_max_step(const CoupledSystem& s) {
    return two_pi / (50.0 * std::max(s.omega[0], s.omega[1]));
}

struct FullRealization {
    std::vector<double> n1, n2;
};

namespace detail {

template <typename Sink>
void run_full(const CoupledSystem& sys, const RunConfig& run, const SampleGrid& grid, double dt,
              std::size_t index, Sink&& sink) {
    const double hbar = constants::reduced_planck;
    Rng init_rng(run.seed, index, Substream::initial_state);
    Rng jitter_rng(run.seed, index, Substream::jitter);
    Rng rng(run.seed, index, Substream::dynamics);

    const std::array<cplx, 2> a0{initial_amplitude(init_rng, run.initial[0]),
                                 initial_amplitude(init_rng, run.initial[1])};
    std::array<Jitter, 2> jitter{Jitter(sys.noise[0], jitter_rng), Jitter(sys.noise[1], jitter_rng)};

    MotionParams p = MotionParams::from(sys);
    for (int i = 0; i < 2; ++i) p.omega[i] = sys.omega[i] + jitter[i].offset();

    OscillatorState s;
    for (int i = 0; i < 2; ++i) set_from_amplitude(s, i, a0[i], p.mass[i], p.omega[i]);

    std::array<double, 2> kick{}, decay{}, thermal_v{}, clamp_kick{};
    for (int i = 0; i < 2; ++i) {
        // Velocity impulses adding hbar w ndot dt of energy per step on average.
        kick[i] = std::sqrt(2.0 * hbar * sys.omega[i] * sys.heating_rate(i) * dt / p.mass[i]);
        const auto& c = sys.cooling[i];
        decay[i] = std::exp(-c.damping_rate * dt);
        thermal_v[i] = std::sqrt(c.steady_state_occupation * hbar * sys.omega[i] / p.mass[i]);
        clamp_kick[i] = thermal_v[i] * std::sqrt(1.0 - decay[i] * decay[i]);
    }

    double scale = hbar * std::max(sys.omega[0], sys.omega[1]);
    double expected = std::max(total_energy(s, p), 0.0);
    for (int i = 0; i < 2; ++i)
        expected += scale * (1.0 + sys.cooling[i].steady_state_occupation +
                             sys.heating_rate(i) * run.duration);
    const double limit = 1e6 * expected;

    std::size_t next = 0;
    auto record = [&] {
        sink(next, ion_energy(s, p, 0) / (hbar * p.omega[0]), ion_energy(s, p, 1) / (hbar * p.omega[1]));
        ++next;
    };
    if (grid.step_index[0] == 0) record();

    for (std::size_t step = 1; step <= grid.total_steps; ++step) {
        verlet_step(s, p, dt);
        for (int i = 0; i < 2; ++i) {
            if (kick[i] > 0.0) s.v[i] += kick[i] * rng.normal();
            const auto& c = sys.cooling[i];
            if (c.hard) {
                set_from_amplitude(s, i, thermal_amplitude(rng, c.steady_state_occupation), p.mass[i],
                                   p.omega[i]);
            } else if (c.damping_rate > 0.0) {
                s.v[i] = s.v[i] * decay[i] + clamp_kick[i] * rng.normal();
            }
            if (jitter[i].varies()) {
                jitter[i].advance(dt, jitter_rng);
                p.omega[i] = sys.omega[i] + jitter[i].offset();
            }
        }
        if ((step & 1023u) == 0) {
            const double e = ion_energy(s, p, 0) + ion_energy(s, p, 1);
            if (!std::isfinite(e) || e > limit)
                throw IntegrationError("full integrator unstable at step " + std::to_string(step) +
                                       ": energy " + std::to_string(e) + " J exceeds " +
                                       std::to_string(limit) + " J; reduce dt");
        }
        if (next < grid.step_index.size() && step == grid.step_index[next]) record();
    }
}

}  // namespace detail

inline EnsembleTrajectory integrate_full(const CoupledSystem& sys, const RunConfig& run) {
    sys.validate();
    require(sys.incoherent_rate == 0.0,
            "the full integrator has no incoherent exchange channel; use integrate_envelope");
    require(run.realizations >= 1, "need at least one realization");
    const double max_dt = full_max_step(sys);
    const double dt = run.dt > 0.0 ? run.dt : detail::align_step(run, max_dt);
    require(dt <= max_dt * (1 + 1e-12), "dt exceeds 1/50 of the shortest trap period");
    const auto grid = detail::make_grid(run, dt);
    const auto acc = run_ensemble(run.realizations, grid.times.size(),
                                  [&](std::size_t i, MomentAccumulator& a) {
                                      detail::run_full(sys, run, grid, dt, i,
                                                       [&](std::size_t k, double n1, double n2) {
                                                           a.add(k, n1, n2);
                                                       });
                                  });
    return detail::finish(acc, grid, run, "full", dt);
}

/// A single realization of the full integrator (diagnostics and tests).
inline FullRealization integrate_full_single(const CoupledSystem& sys, const RunConfig& run,
                                             std::size_t index = 0) {
    sys.validate();
    const double max_dt = full_max_step(sys);
    const double dt = run.dt > 0.0 ? run.dt : detail::align_step(run, max_dt);
    require(dt <= max_dt * (1 + 1e-12), "dt exceeds 1/50 of the shortest trap period");
    const auto grid = detail::make_grid(run, dt);
    FullRealization r;
    r.n1.resize(grid.times.size());
    r.n2.resize(grid.times.size());
    detail::run_full(sys, run, grid, dt, index, [&](std::size_t k, double n1, double n2) {
        r.n1[k] = n1;
        r.n2[k] = n2;
    });
    return r;
}

// ---------------------------------------------------------------------------
// Envelope (rotating frame) integrator

/// exp(A t) for a 2x2 complex matrix given row-major.
inline std::array<cplx, 4> expm2(const std::array<cplx, 4>& A, double t) {
    const cplx tau = 0.5 * (A[0] + A[3]);
    const cplx half_diff = 0.5 * (A[0] - A[3]);
    const cplx s = std::sqrt(half_diff * half_diff + A[1] * A[2]);
    const cplx st = s * t;
    cplx ch, sh_over_s;
    if (std::abs(st) < 1e-4) {
        const cplx st2 = st * st;
        ch = 1.0 + st2 / 2.0 + st2 * st2 / 24.0;
        sh_over_s = t * (1.0 + st2 / 6.0 + st2 * st2 / 120.0);
    } else {
        ch = std::cosh(st);
        sh_over_s = std::sinh(st) / s;
    }
    const cplx e = std::exp(tau * t);
    return {e * (ch + sh_over_s * half_diff), e * sh_over_s * A[1], e * sh_over_s * A[2],
            e * (ch - sh_over_s * half_diff)};
}

/// Fraction of the trap frequency the slow rates may reach.
inline constexpr double envelope_scale_limit = 1e-2;

struct EnvelopeStep {
    double dt;
    double fastest_rate;
};

inline EnvelopeStep envelope_step(const CoupledSystem& sys, double requested_dt) {
    const double frame = sys.omega[0];
    double fastest = std::abs(sys.kappa);
    for (int i = 0; i < 2; ++i) {
        const auto& n = sys.noise[i];
        fastest = std::max(fastest, std::abs(sys.omega[i] - frame) + 5.0 * two_pi * n.jitter_sigma);
        fastest = std::max(fastest, sys.cooling[i].damping_rate);
        if (n.jitter_kind == JitterKind::ornstein_uhlenbeck && n.jitter_sigma > 0.0)
            fastest = std::max(fastest, 1.0 / n.correlation_time);
    }
    fastest = std::max(fastest, sys.incoherent_rate);
    const double slowest_trap = std::min(sys.omega[0], sys.omega[1]);
    if (fastest > envelope_scale_limit * slowest_trap)
        throw InvalidInput("envelope model needs kappa, detuning and damping << trap frequency (" +
                           std::to_string(fastest) + " rad/s vs " + std::to_string(slowest_trap) +
                           " rad/s)");
    double dt = fastest > 0.0 ? 1.0 / (100.0 * fastest) : std::numeric_limits<double>::infinity();
    if (requested_dt > 0.0) dt = std::min(dt, requested_dt);
    return {dt, fastest};
}

namespace detail {

template <typename Sink>
void run_envelope(const CoupledSystem& sys, const RunConfig& run, const SampleGrid& grid, double dt,
                  std::size_t index, Sink&& sink) {
    Rng init_rng(run.seed, index, Substream::initial_state);
    Rng jitter_rng(run.seed, index, Substream::jitter);
    Rng rng(run.seed, index, Substream::dynamics);

    std::array<cplx, 2> a{initial_amplitude(init_rng, run.initial[0]),
                          initial_amplitude(init_rng, run.initial[1])};
    std::array<Jitter, 2> jitter{Jitter(sys.noise[0], jitter_rng), Jitter(sys.noise[1], jitter_rng)};

    const double frame = sys.omega[0];
    const double kex = sys.incoherent_rate;
    std::array<double, 2> base_diffusion{}, loss{};
    for (int i = 0; i < 2; ++i) {
        const auto& c = sys.cooling[i];
        base_diffusion[i] = sys.heating_rate(i) + (c.hard ? 0.0 : c.damping_rate * c.steady_state_occupation);
        loss[i] = 0.5 * ((c.hard ? 0.0 : c.damping_rate) + kex);
    }
    const cplx I(0.0, 1.0);
    auto generator = [&] {
        std::array<cplx, 4> A;
        const double d0 = sys.omega[0] - frame + jitter[0].offset();
        const double d1 = sys.omega[1] - frame + jitter[1].offset();
        A[0] = -I * d0 - loss[0];
        A[1] = -I * sys.kappa;
        A[2] = -I * sys.kappa;
        A[3] = -I * d1 - loss[1];
        return A;
    };
    const bool varying = jitter[0].varies() || jitter[1].varies();
    auto M = expm2(generator(), dt);

    std::size_t next = 0;
    auto record = [&] {
        sink(next, std::norm(a[0]), std::norm(a[1]));
        ++next;
    };
    if (grid.step_index[0] == 0) record();

    for (std::size_t step = 1; step <= grid.total_steps; ++step) {
        const std::array<double, 2> n_before{std::norm(a[0]), std::norm(a[1])};
        const cplx b0 = M[0] * a[0] + M[1] * a[1];
        const cplx b1 = M[2] * a[0] + M[3] * a[1];
        a = {b0, b1};
        for (int i = 0; i < 2; ++i) {
            const auto& c = sys.cooling[i];
            if (c.hard) {
                a[i] = thermal_amplitude(rng, c.steady_state_occupation);
                continue;
            }
            const double D = base_diffusion[i] + kex * n_before[1 - i];
            if (D > 0.0) a[i] += thermal_amplitude(rng, D * dt);
        }
        if (varying) {
            jitter[0].advance(dt, jitter_rng);
            jitter[1].advance(dt, jitter_rng);
            M = expm2(generator(), dt);
        }
        if (next < grid.step_index.size() && step == grid.step_index[next]) record();
    }
}

}  // namespace detail

inline EnsembleTrajectory integrate_envelope(const CoupledSystem& sys, const RunConfig& run) {
    sys.validate();
    require(run.realizations >= 1, "need at least one realization");
    const auto step = envelope_step(sys, run.dt);
    double dt = std::min(step.dt, run.duration / 100.0);
    if (run.dt <= 0.0) dt = detail::align_step(run, dt);
    const auto grid = detail::make_grid(run, dt);
    const auto acc = run_ensemble(run.realizations, grid.times.size(),
                                  [&](std::size_t i, MomentAccumulator& a) {
                                      detail::run_envelope(sys, run, grid, dt, i,
                                                           [&](std::size_t k, double n1, double n2) {
                                                               a.add(k, n1, n2);
                                                           });
                                  });
    return detail::finish(acc, grid, run, "envelope", dt);
}

// ---------------------------------------------------------------------------
// Rate equations

struct RateModel {
    std::array<double, 2> initial{};  // quanta
    std::array<double, 2> heating{};  // quanta/s
    double kappa_ex = 0.0;            // 1/s
    std::array<CoolingClamp, 2> cooling{};

    void validate() const {
        for (int i = 0; i < 2; ++i) {
            require(initial[i] >= 0.0 && std::isfinite(initial[i]), "initial occupation must be >= 0");
            require(heating[i] >= 0.0 && std::isfinite(heating[i]), "heating rates must be >= 0");
            cooling[i].validate();
        }
        require(kappa_ex >= 0.0 && std::isfinite(kappa_ex), "kappa_ex must be >= 0");
    }

    std::array<double, 2> derivative(const std::array<double, 2>& n) const {
        std::array<double, 2> d{};
        const double flow = kappa_ex * (n[0] - n[1]);
        d[0] = heating[0] - flow;
        d[1] = heating[1] + flow;
        for (int i = 0; i < 2; ++i) {
            if (cooling[i].hard) d[i] = 0.0;
            else d[i] -= cooling[i].damping_rate * (n[i] - cooling[i].steady_state_occupation);
        }
        return d;
    }
};

/// Dormand-Prince 5(4) with step-size control; lands exactly on each
/// requested output time.
template <std::size_t N, typename F>
std::vector<std::array<double, N>> integrate_adaptive(F&& f, std::array<double, N> y,
                                                      const std::vector<double>& times,
                                                      double rtol = 1e-10, double atol = 1e-10) {
    using State = std::array<double, N>;
    static constexpr double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5, c5 = 8. / 9;
    static constexpr double a21 = 1. / 5, a31 = 3. / 40, a32 = 9. / 40, a41 = 44. / 45,
                            a42 = -56. / 15, a43 = 32. / 9, a51 = 19372. / 6561,
                            a52 = -25360. / 2187, a53 = 64448. / 6561, a54 = -212. / 729,
                            a61 = 9017. / 3168, a62 = -355. / 33, a63 = 46732. / 5247,
                            a64 = 49. / 176, a65 = -5103. / 18656, b1 = 35. / 384, b3 = 500. / 1113,
                            b4 = 125. / 192, b5 = -2187. / 6784, b6 = 11. / 84, e1 = 71. / 57600,
                            e3 = -71. / 16695, e4 = 71. / 1920, e5 = -17253. / 339200,
                            e6 = 22. / 525, e7 = -1. / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;
    auto axpy = [](const State& base, std::initializer_list<std::pair<double, const State*>> terms,
                   double h) {
        State out = base;
        for (const auto& [c, k] : terms)
            for (std::size_t i = 0; i < N; ++i) out[i] += h * c * (*k)[i];
        return out;
    };
    std::vector<State> out;
    out.reserve(times.size());
    double t = 0.0;
    double h = 0.0;
    for (double target : times) {
        require(target >= t, "output times must be nondecreasing from 0");
        if (h == 0.0) h = std::max(target - t, 1e-9) / 100.0;
        while (t < target) {
            double step = std::min(h, target - t);
            const State k1 = f(y);
            const State k2 = f(axpy(y, {{a21, &k1}}, step));
            const State k3 = f(axpy(y, {{a31, &k1}, {a32, &k2}}, step));
            const State k4 = f(axpy(y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, step));
            const State k5 = f(axpy(y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, step));
            const State k6 = f(axpy(y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, step));
            const State y5 = axpy(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, step);
            const State k7 = f(y5);
            double err = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                         e6 * k6[i] + e7 * k7[i]);
                const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
                err = std::max(err, std::abs(e) / sc);
            }
            if (err <= 1.0) {
                t = (step == target - t) ? target : t + step;
                y = y5;
            }
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = step * factor;
        }
        out.push_back(y);
    }
    return out;
}

inline EnsembleTrajectory rate_equation_model(const RateModel& model,
                                              const std::vector<double>& sample_times) {
    model.validate();
    require(!sample_times.empty(), "need at least one sample time");
    std::array<double, 2> y0 = model.initial;
    for (int i = 0; i < 2; ++i)
        if (model.cooling[i].hard) y0[i] = model.cooling[i].steady_state_occupation;
    const auto ys = integrate_adaptive<2>([&](const std::array<double, 2>& n) { return model.derivative(n); },
                                          y0, sample_times);
    EnsembleTrajectory out;
    out.times = sample_times;
    out.integrator = "rate_equation";
    out.n_realizations = 1;
    for (const auto& y : ys) {
        out.n_bar_1.push_back(y[0]);
        out.n_bar_2.push_back(y[1]);
        out.n_bar_sem_1.push_back(0.0);
        out.n_bar_sem_2.push_back(0.0);
    }
    return out;
}

inline std::vector<double> uniform_times(double duration, std::size_t points) {
    require(points >= 2 && duration > 0.0, "need >= 2 points over a positive duration");
    std::vector<double> t(points);
    for (std::size_t k = 0; k < points; ++k)
        t[k] = duration * static_cast<double>(k) / static_cast<double>(points - 1);
    return t;
}

}  // namespace ionwire::dynamics
