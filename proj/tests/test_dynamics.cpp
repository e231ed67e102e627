#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <vector>

#include "ionwire/dynamics.hpp"

using namespace ionwire;
using namespace ionwire::dynamics;

namespace {

const double m_ca = IonSpecies::calcium40().mass();
const double w199 = hz_to_angular(1.990e6);
const double kappa_meas = hz_to_angular(11.1);

// Ordinary least-squares slope (test oracle, independent of the fitters).
double ols_slope(const std::vector<double>& t, const std::vector<double>& y) {
    const double n = static_cast<double>(t.size());
    const double mt = std::accumulate(t.begin(), t.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        sxy += (t[k] - mt) * (y[k] - my);
        sxx += (t[k] - mt) * (t[k] - mt);
    }
    return sxy / sxx;
}

RunConfig noiseless_run(double n1, double n2, double duration, double interval) {
    RunConfig run;
    run.initial = {InitialCondition{n1, InitialKind::fixed_phase}, InitialCondition{n2, InitialKind::fixed_phase}};
    run.duration = duration;
    run.sample_interval = interval;
    run.realizations = 1;
    run.seed = 1;
    return run;
}

NoiseModel heating(double quanta_per_s, double omega) {
    NoiseModel n;
    n.heating_rate_at_reference = quanta_per_s;
    n.reference_frequency = omega;
    return n;
}

}  // namespace

// ---------------------------------------------------------------- equations

TEST(EquationsOfMotion, ForceIsMinusGradient) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, hz_to_angular(50.0));
    sys.mass[1] = 2 * m_ca;
    sys.omega[1] = 1.01 * w199;
    const auto p = MotionParams::from(sys);
    OscillatorState s;
    s.x = {1e-7, -3e-8};
    s.v = {0.2, 0.05};
    const auto d = equations_of_motion(s, p);
    // Finite-difference gradient of the potential part of H.
    for (int i = 0; i < 2; ++i) {
        const double h = 1e-13;
        auto plus = s, minus = s;
        plus.x[i] += h;
        minus.x[i] -= h;
        const double grad = (total_energy(plus, p) - total_energy(minus, p)) / (2 * h);
        EXPECT_NEAR(d.dv[i] * p.mass[i] / -grad, 1.0, 1e-6);
        EXPECT_EQ(d.dx[i], s.v[i]);
    }
}

TEST(EquationsOfMotion, DecoupledEnergiesConserved) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, 0.0);
    sys.omega[1] = 1.3 * w199;
    const auto p = MotionParams::from(sys);
    OscillatorState s;
    set_from_amplitude(s, 0, {30.0, 0.0}, m_ca, p.omega[0]);
    set_from_amplitude(s, 1, {0.0, 10.0}, m_ca, p.omega[1]);
    const double e0 = ion_energy(s, p, 0), e1 = ion_energy(s, p, 1);
    const double dt = full_max_step(sys);
    double worst0 = 0, worst1 = 0;
    for (int k = 0; k < 200000; ++k) {
        verlet_step(s, p, dt);
        worst0 = std::max(worst0, std::abs(ion_energy(s, p, 0) / e0 - 1));
        worst1 = std::max(worst1, std::abs(ion_energy(s, p, 1) / e1 - 1));
    }
    // Bounded Verlet oscillation (w dt)^2 / 4, no secular change.
    const double bound = std::pow(1.3 * w199 * dt, 2) / 4 * 1.05;
    EXPECT_LT(worst0, bound);
    EXPECT_LT(worst1, bound);
}

TEST(EquationsOfMotion, NormalModeFrequencies) {
    // 1 kHz carrier so a 1 s trajectory is cheap; kappa/w = 0.02.
    const double w = hz_to_angular(1000.0);
    const double kappa = hz_to_angular(20.0);
    const auto sys = CoupledSystem::symmetric(m_ca, w, kappa);
    const auto p = MotionParams::from(sys);
    const double dt = two_pi / w / 500.0;
    OscillatorState s;
    s.x = {1e-6, 0.0};
    std::vector<double> x;
    const int steps = 500000;
    for (int k = 0; k < steps; ++k) {
        if (k % 10 == 0) x.push_back(s.x[0]);
        verlet_step(s, p, dt);
    }
    const double ts = 10 * dt;
    const std::size_t n = x.size();
    auto power = [&](double f) {
        std::complex<double> acc = 0;
        const std::complex<double> step = std::polar(1.0, -two_pi * f * ts);
        std::complex<double> ph = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double hann = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(k) / static_cast<double>(n - 1));
            acc += hann * x[k] * ph;
            ph *= step;
        }
        return std::norm(acc);
    };
    auto peak_near = [&](double f0) {
        double best_f = f0, best_p = -1;
        for (double f = f0 - 3.0; f <= f0 + 3.0; f += 0.01) {
            const double pw = power(f);
            if (pw > best_p) best_p = pw, best_f = f;
        }
        const double pm = power(best_f - 0.01), pp = power(best_f + 0.01), pc = best_p;
        return best_f + 0.01 * 0.5 * (pm - pp) / (pm - 2 * pc + pp);
    };
    // Oracle: eigenvalues of the 2x2 dynamical matrix, with Verlet's
    // dispersion asin(w dt / 2) * 2 / dt applied to each.
    auto verlet_freq = [&](double om) { return angular_to_hz(2.0 / dt * std::asin(om * dt / 2)); };
    const double w_plus = std::sqrt(w * w + 2 * kappa * w);
    const double w_minus = std::sqrt(w * w - 2 * kappa * w);
    const double f_plus = peak_near(verlet_freq(w_plus));
    const double f_minus = peak_near(verlet_freq(w_minus));
    EXPECT_NEAR(f_plus, verlet_freq(w_plus), 0.02);
    EXPECT_NEAR(f_minus, verlet_freq(w_minus), 0.02);
    const double k_hz = angular_to_hz(kappa), w_hz = angular_to_hz(w);
    EXPECT_NEAR(f_plus, w_hz + k_hz, k_hz * k_hz / w_hz);
    EXPECT_NEAR(f_minus, w_hz - k_hz, k_hz * k_hz / w_hz);
}

TEST(EquationsOfMotion, TotalEnergyDriftOverMillionSteps) {
    const auto sys = CoupledSystem::symmetric(m_ca, w199, hz_to_angular(50.0));
    const auto p = MotionParams::from(sys);
    OscillatorState s;
    set_from_amplitude(s, 0, {std::sqrt(1000.0), 0.0}, m_ca, w199);
    const double dt = full_max_step(sys);  // 50 steps per period
    // Average over a whole number of the integrator's own periods so the
    // bounded O((w dt)^2) oscillation of E cancels out of the means.
    const double numerical_period = two_pi / (2.0 * std::asin(w199 * dt / 2));
    const int window = static_cast<int>(std::lround(200 * numerical_period));
    const int steps = 1000000;
    double first = 0, last = 0;
    for (int k = 0; k < steps; ++k) {
        verlet_step(s, p, dt);
        const double e = total_energy(s, p);
        if (k < window) first += e;
        if (k >= steps - window) last += e;
    }
    EXPECT_LT(std::abs(last / first - 1.0), 1e-6);
}

// ------------------------------------------------------------ full integrator

TEST(FullIntegrator, CompleteSwapAtQuarterBeat) {
    for (double k_hz : {5.0, 11.1, 50.0}) {
        const double kappa = hz_to_angular(k_hz);
        const double t_swap = std::numbers::pi / (2 * kappa);
        const auto sys = CoupledSystem::symmetric(m_ca, w199, kappa);
        const auto run = noiseless_run(1000.0, 0.0, 1.2 * t_swap, t_swap / 2000);
        const auto r = integrate_full_single(sys, run);
        const auto it = std::min_element(r.n1.begin(), r.n1.end());
        const double t_min = static_cast<double>(it - r.n1.begin()) * (run.sample_interval);
        EXPECT_NEAR(t_min / t_swap, 1.0, 0.01) << k_hz;
        // Energy moved to ion 2 at t = pi / (2 kappa).
        const std::size_t at = 2000;
        EXPECT_GT(r.n2[at] / 1000.0, 0.99) << k_hz;
    }
}

TEST(FullIntegrator, SwapTimeForMeasuredCoupling) {
    const double t_swap = std::numbers::pi / (2 * kappa_meas);
    EXPECT_NEAR(t_swap * 1e3, 22.52, 0.01);
}

TEST(FullIntegrator, HeatingRateCalibration) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, 0.0);
    sys.noise = {heating(206e3, w199), heating(206e3, w199)};
    RunConfig run;
    run.duration = 0.5e-3;
    run.sample_interval = 0.05e-3;
    run.realizations = 3000;
    run.seed = 11;
    const auto tr = integrate_full(sys, run);
    const double slope1 = ols_slope(tr.times, tr.n_bar_1);
    const double slope2 = ols_slope(tr.times, tr.n_bar_2);
    EXPECT_NEAR(slope1 / 206e3, 1.0, 0.05);
    EXPECT_NEAR(slope2 / 206e3, 1.0, 0.05);
}

TEST(FullIntegrator, CoolingClampSteadyState) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, 0.0);
    sys.cooling[0] = CoolingClamp{1e4, 182.0, false};
    RunConfig run;
    run.initial = {InitialCondition{0.0}, InitialCondition{0.0}};
    run.duration = 2e-3;
    run.sample_interval = 0.1e-3;
    run.realizations = 200;
    run.seed = 5;
    const auto tr = integrate_full(sys, run);
    double late = 0;
    int count = 0;
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        if (tr.times[k] >= 1e-3) late += tr.n_bar_1[k], ++count;
    EXPECT_NEAR(late / count / 182.0, 1.0, 0.10);
    EXPECT_EQ(tr.n_bar_2.back(), 0.0);
}

TEST(FullIntegrator, RejectsOversizedStepAndIncoherentChannel) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
    auto run = noiseless_run(10, 0, 1e-4, 1e-5);
    run.dt = 2 * full_max_step(sys);
    EXPECT_THROW(integrate_full(sys, run), InvalidInput);
    run.dt = 0;
    sys.incoherent_rate = 10;
    EXPECT_THROW(integrate_full(sys, run), InvalidInput);
}

TEST(FullIntegrator, UnstableSystemAborts) {
    // kappa > w/2 makes the lower normal mode exponentially unstable.
    const auto sys = CoupledSystem::symmetric(m_ca, w199, 0.6 * w199);
    const auto run = noiseless_run(10, 0, 2e-4, 1e-5);
    EXPECT_THROW(integrate_full(sys, run), IntegrationError);
}

TEST(FullIntegrator, SeedDeterminism) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, hz_to_angular(200.0));
    sys.noise = {heating(206e3, w199), heating(100e3, w199)};
    sys.cooling[1] = CoolingClamp{1e3, 182, false};
    sys.noise[1].jitter_sigma = 300;
    RunConfig run;
    run.initial = {InitialCondition{1000.0}, InitialCondition{182.0}};
    run.duration = 0.2e-3;
    run.sample_interval = 0.02e-3;
    run.realizations = 70;
    run.seed = 42;
    const auto a = integrate_full(sys, run);
    setenv("IONWIRE_THREADS", "3", 1);
    const auto b = integrate_full(sys, run);
    unsetenv("IONWIRE_THREADS");
    EXPECT_EQ(a.n_bar_1, b.n_bar_1);
    EXPECT_EQ(a.n_bar_sem_2, b.n_bar_sem_2);
    run.seed = 43;
    const auto c = integrate_full(sys, run);
    EXPECT_NE(a.n_bar_1, c.n_bar_1);
    // Realization k does not depend on the ensemble size.
    const auto single = integrate_full_single(sys, run, 17);
    run.realizations = 18;
    const auto again = integrate_full_single(sys, run, 17);
    EXPECT_EQ(single.n1, again.n1);
}

// -------------------------------------------------------- envelope integrator

TEST(EnvelopeIntegrator, ResonantExchangeClosedForm) {
    const auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
    const auto run = noiseless_run(1000.0, 0.0, 50e-3, 0.5e-3);
    const auto tr = integrate_envelope(sys, run);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double c = std::cos(kappa_meas * tr.times[k]);
        EXPECT_NEAR(tr.n_bar_1[k], 1000.0 * c * c, 1e-8);
        EXPECT_NEAR(tr.n_bar_1[k] + tr.n_bar_2[k], 1000.0, 1e-8);
    }
}

TEST(EnvelopeIntegrator, DetuningSuppressionFollowsTwoModeFormula) {
    for (double ratio : {0.0, 1.0, 5.0, 20.0}) {
        auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
        const double delta = ratio * kappa_meas;
        sys.omega[1] = w199 + delta;
        const double Omega = std::sqrt(kappa_meas * kappa_meas + delta * delta / 4);
        const double half_period = std::numbers::pi / Omega;
        const auto run = noiseless_run(1000.0, 0.0, half_period, half_period / 4000);
        const auto tr = integrate_envelope(sys, run);
        const double transferred = *std::max_element(tr.n_bar_2.begin(), tr.n_bar_2.end()) / 1000.0;
        const double expected = kappa_meas * kappa_meas / (Omega * Omega);
        EXPECT_NEAR(transferred / expected, 1.0, 0.05) << ratio;
        if (ratio == 20.0) {
            EXPECT_NEAR(transferred, 0.0099, 0.0005);
        }
    }
}

TEST(EnvelopeIntegrator, MatchesFullSwapDynamics) {
    const auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
    const auto run = noiseless_run(1000.0, 0.0, 30e-3, 0.25e-3);
    const auto full = integrate_full(sys, run);
    const auto env = integrate_envelope(sys, run);
    ASSERT_EQ(full.times.size(), env.times.size());
    double sq = 0;
    for (std::size_t k = 0; k < full.times.size(); ++k) {
        const double d = (env.n_bar_1[k] - full.n_bar_1[k]) / 1000.0;
        sq += d * d;
    }
    EXPECT_LT(std::sqrt(sq / full.times.size()), 0.03);
}

TEST(EnvelopeIntegrator, MatchesFullOnSympatheticScenario) {
    // Hamiltonian coupling, hot heated ion 1, Doppler-clamped ion 2.
    auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
    sys.noise[0] = heating(206e3, w199);
    sys.cooling[1] = CoolingClamp{1e3, 182.0, false};
    RunConfig run;
    run.initial = {InitialCondition{1000.0, InitialKind::fixed_energy}, InitialCondition{182.0}};
    run.duration = 2e-3;
    run.sample_interval = 0.1e-3;
    run.realizations = 4000;
    run.seed = 99;
    const auto full = integrate_full(sys, run);
    const auto env = integrate_envelope(sys, run);
    double sq1 = 0, sq2 = 0;
    for (std::size_t k = 0; k < full.times.size(); ++k) {
        const double d1 = env.n_bar_1[k] / full.n_bar_1[k] - 1.0;
        const double d2 = env.n_bar_2[k] / full.n_bar_2[k] - 1.0;
        sq1 += d1 * d1;
        sq2 += d2 * d2;
    }
    const double n = static_cast<double>(full.times.size());
    EXPECT_LT(std::sqrt(sq1 / n), 0.03);
    EXPECT_LT(std::sqrt(sq2 / n), 0.03);
}

TEST(EnvelopeIntegrator, HeatingCalibrationAcrossRates) {
    for (double per_ms : {10.0, 100.0, 1000.0}) {
        auto sys = CoupledSystem::symmetric(m_ca, w199, 0.0);
        sys.noise = {heating(per_ms * 1e3, w199), NoiseModel{}};
        RunConfig run;
        run.duration = 1e-3;
        run.sample_interval = 0.1e-3;
        run.realizations = 10000;
        run.seed = 3;
        const auto tr = integrate_envelope(sys, run);
        EXPECT_NEAR(ols_slope(tr.times, tr.n_bar_1) / (per_ms * 1e3), 1.0, 0.05) << per_ms;
    }
}

TEST(EnvelopeIntegrator, EquipartitionUnderSymmetricHeating) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
    sys.noise = {heating(206e3, w199), heating(206e3, w199)};
    RunConfig run;
    run.initial = {InitialCondition{0.0}, InitialCondition{0.0}};
    run.duration = 10 * std::numbers::pi / (2 * kappa_meas);
    run.sample_times = {0.0, run.duration};
    run.realizations = 20000;
    run.seed = 8;
    const auto tr = integrate_envelope(sys, run);
    const double n1 = tr.n_bar_1.back(), n2 = tr.n_bar_2.back();
    EXPECT_LT(std::abs(n1 - n2) / n1, 0.05);
}

TEST(EnvelopeIntegrator, IncoherentRateObeysRateEquation) {
    auto sys = CoupledSystem::symmetric(m_ca, w199, 0.0);
    sys.noise[0] = heating(206e3, w199);
    sys.cooling[1] = CoolingClamp::hard_clamp(182.0);
    sys.incoherent_rate = 69.7;
    RunConfig run;
    run.initial = {InitialCondition{1000.0}, InitialCondition{182.0}};
    run.duration = 10e-3;
    run.sample_interval = 1e-3;
    run.realizations = 4000;
    run.seed = 21;
    const auto tr = integrate_envelope(sys, run);
    RateModel rm;
    rm.initial = {1000.0, 182.0};
    rm.heating = {206e3, 0.0};
    rm.kappa_ex = 69.7;
    rm.cooling[1] = CoolingClamp::hard_clamp(182.0);
    const auto det = rate_equation_model(rm, tr.times);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        EXPECT_NEAR(tr.n_bar_1[k], det.n_bar_1[k], 4 * tr.n_bar_sem_1[k] + 1e-9);
        EXPECT_NEAR(tr.n_bar_2[k], 182.0, 4 * tr.n_bar_sem_2[k] + 1e-9);
    }
}

TEST(EnvelopeIntegrator, JitterTurnsExchangeIncoherent) {
    // Hot ion 1, Doppler-cooled ion 2; the effective extraction-formula rate
    // falls with increasing static frequency jitter and stays below kappa.
    const double gamma = 1e3;
    std::vector<double> rates;
    for (double sigma : {0.0, 50.0, 200.0, 1000.0}) {
        auto sys = CoupledSystem::symmetric(m_ca, w199, kappa_meas);
        sys.cooling[1] = CoolingClamp{gamma, 0.0, false};
        sys.noise[1].jitter_sigma = sigma;
        RunConfig run;
        run.initial = {InitialCondition{1000.0, InitialKind::fixed_energy}, InitialCondition{0.0}};
        run.duration = 30e-3;
        // Skip the initial transient of the fast (damped) normal mode.
        for (int k = 10; k <= 30; ++k) run.sample_times.push_back(k * 1e-3);
        run.realizations = 400;
        run.seed = 4;
        const auto tr = integrate_envelope(sys, run);
        const double slope = ols_slope(tr.times, tr.n_bar_1);
        const double mean1 = std::accumulate(tr.n_bar_1.begin(), tr.n_bar_1.end(), 0.0) / tr.times.size();
        const double mean2 = std::accumulate(tr.n_bar_2.begin(), tr.n_bar_2.end(), 0.0) / tr.times.size();
        rates.push_back(-slope / (mean1 - mean2));
    }
    for (std::size_t k = 0; k < rates.size(); ++k) {
        EXPECT_GT(rates[k], 0.0);
        EXPECT_LE(rates[k], kappa_meas);
        if (k > 0) {
            EXPECT_LT(rates[k], rates[k - 1]);
        }
    }
    // Zero jitter oracle: slow eigenvalue of the damped 2x2 amplitude
    // equations, lambda = g/4 - sqrt(g^2/16 - kappa^2), with the partner
    // slaved at |a2/a1|^2 = kappa^2 / (g/2 - lambda)^2.
    const double lambda = gamma / 4 - std::sqrt(gamma * gamma / 16 - kappa_meas * kappa_meas);
    const double slave = kappa_meas * kappa_meas / std::pow(gamma / 2 - lambda, 2);
    const double expected = 2 * lambda / (1 - slave);
    EXPECT_NEAR(rates[0] / expected, 1.0, 0.03);
    EXPECT_NEAR(rates[0] / (4 * kappa_meas * kappa_meas / gamma), 1.0, 0.1);
}

TEST(EnvelopeIntegrator, ScaleSeparationEnforced) {
    const auto sys = CoupledSystem::symmetric(m_ca, w199, 0.02 * w199);
    EXPECT_THROW(integrate_envelope(sys, noiseless_run(1, 0, 1e-3, 1e-4)), InvalidInput);
}

TEST(EnvelopeIntegrator, MatrixExponentialSmallAndLargeArguments) {
    const std::array<cplx, 4> A{cplx(-1.0, -2.0), cplx(0.0, -3.0), cplx(0.0, -3.0), cplx(-0.5, 1.0)};
    // Oracle: 4096 squarings of a truncated Taylor step.
    auto taylor = [&](double t) {
        const double h = t / 4096.0;
        std::array<cplx, 4> M{1, 0, 0, 1}, term{1, 0, 0, 1};
        for (int k = 1; k < 12; ++k) {
            std::array<cplx, 4> next{};
            next[0] = (term[0] * A[0] + term[1] * A[2]) * h / double(k);
            next[1] = (term[0] * A[1] + term[1] * A[3]) * h / double(k);
            next[2] = (term[2] * A[0] + term[3] * A[2]) * h / double(k);
            next[3] = (term[2] * A[1] + term[3] * A[3]) * h / double(k);
            term = next;
            for (int i = 0; i < 4; ++i) M[i] += term[i];
        }
        for (int s = 0; s < 12; ++s) {
            std::array<cplx, 4> sq{M[0] * M[0] + M[1] * M[2], M[0] * M[1] + M[1] * M[3],
                                   M[2] * M[0] + M[3] * M[2], M[2] * M[1] + M[3] * M[3]};
            M = sq;
        }
        return M;
    };
    for (double t : {1e-7, 0.3, 2.0}) {
        const auto a = expm2(A, t), b = taylor(t);
        for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-10) << t;
    }
}

// --------------------------------------------------------------- rate model

TEST(RateEquation, NoExchangeIsLinear) {
    RateModel rm;
    rm.initial = {1000.0, 182.0};
    rm.heating = {206e3, 50e3};
    const auto tr = rate_equation_model(rm, uniform_times(10e-3, 11));
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        EXPECT_NEAR(tr.n_bar_1[k], 1000.0 + 206e3 * tr.times[k], 1e-7);
}

TEST(RateEquation, InstantaneousCoupledSlope) {
    RateModel rm;
    rm.initial = {1000.0, 182.0};
    rm.heating = {206e3, 0.0};
    rm.kappa_ex = 132.0;
    rm.cooling[1] = CoolingClamp::hard_clamp(182.0);
    const double slope = rm.derivative({1000.0, 182.0})[0];
    EXPECT_NEAR(slope * 1e-3, 98.0, 0.1);
    EXPECT_NEAR(slope * 1e-3, 102.0, 12.0);
    // The extraction identity inverts it.
    EXPECT_NEAR((206e3 - slope) / (1000.0 - 182.0), 132.0, 1e-9);
}

TEST(RateEquation, SteadyStateMatchesFixedPoint) {
    RateModel rm;
    rm.initial = {1000.0, 0.0};
    rm.heating = {206e3, 30e3};
    rm.kappa_ex = 150.0;
    rm.cooling[1] = CoolingClamp{1e3, 182.0, false};
    // Fixed point of the linear system:
    //   0 = h1 - k (n1 - n2)
    //   0 = h2 + k (n1 - n2) - g (n2 - nss)
    const double k = rm.kappa_ex, g = 1e3, h1 = 206e3, h2 = 30e3;
    const double n2 = 182.0 + (h1 + h2) / g;
    const double n1 = n2 + h1 / k;
    const auto tr = rate_equation_model(rm, {0.0, 1.0, 2.0});
    EXPECT_NEAR(tr.n_bar_1.back() / n1, 1.0, 1e-8);
    EXPECT_NEAR(tr.n_bar_2.back() / n2, 1.0, 1e-8);
}

TEST(RateEquation, AgreesWithAnalyticSolution) {
    // Clamped partner: n1(t) = n_inf - (n_inf - n0) exp(-k t).
    RateModel rm;
    rm.initial = {1000.0, 182.0};
    rm.heating = {206e3, 0.0};
    rm.kappa_ex = 69.7;
    rm.cooling[1] = CoolingClamp::hard_clamp(182.0);
    const auto times = uniform_times(30e-3, 31);
    const auto tr = rate_equation_model(rm, times);
    const double n_inf = 182.0 + 206e3 / 69.7;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double exact = n_inf - (n_inf - 1000.0) * std::exp(-69.7 * times[k]);
        EXPECT_NEAR(tr.n_bar_1[k], exact, 1e-7 * exact);
    }
}

// --------------------------------------------------------------- noise PSD

TEST(NoisePsd, FrequencyScaling) {
    NoiseModel white{1e5, hz_to_angular(1e6), 0.0};
    EXPECT_NEAR(noise_psd(white, hz_to_angular(2e6)), 0.5e5, 1e-9);
    NoiseModel pink{1e5, hz_to_angular(1e6), 1.0};
    EXPECT_NEAR(noise_psd(pink, hz_to_angular(2e6)), 0.25e5, 1e-9);
}

TEST(NoisePsd, BaselineDeclineAcrossScan) {
    NoiseModel pink{250e3, hz_to_angular(1.368e6), 1.0};
    EXPECT_NEAR(noise_psd(pink, hz_to_angular(1.380e6)) * 1e-3, 245.67, 0.01);
    EXPECT_THROW(noise_psd(pink, 0.0), InvalidInput);
    pink.spectral_exponent = 3.0;
    EXPECT_THROW(pink.validate(), InvalidInput);
}
