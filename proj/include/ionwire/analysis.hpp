// Fits and estimators applied to simulated (or measured) occupations.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/laguerre.hpp>

#include "ionwire/core.hpp"
#include "ionwire/random.hpp"

namespace ionwire::analysis {

struct FitResult {
    std::string model;
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> sigmas;
    double residual_norm = 0.0;  // sqrt of the (weighted) residual sum of squares
    double reduced_chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string init_policy;

    std::size_t index(const std::string& name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw InvalidInput("fit has no parameter '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
    }
    double value(const std::string& name) const { return values[index(name)]; }
    double sigma(const std::string& name) const { return sigmas[index(name)]; }
};

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

struct LmOptions {
    double tolerance = 1e-10;
    int max_iterations = 200;
    /// Optional box constraint applied after every step.
    std::function<void(Eigen::VectorXd&)> project;
};

struct LmOutcome {
    Eigen::VectorXd params;
    Eigen::MatrixXd jtj;  // J^T J at the solution
    double cost = 0.0;    // sum of squared residuals
    std::size_t residual_count = 0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

template <typename F>
Eigen::MatrixXd numeric_jacobian(F& residuals, const Eigen::VectorXd& p, const Eigen::VectorXd& r0,
                                 const LmOptions& opt) {
    Eigen::MatrixXd J(r0.size(), p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
        Eigen::VectorXd plus = p, minus = p;
        plus[j] += h;
        minus[j] -= h;
        if (opt.project) {
            opt.project(plus);
            opt.project(minus);
        }
        const double span = plus[j] - minus[j];
        if (span == 0.0) {
            J.col(j).setZero();
            continue;
        }
        J.col(j) = (residuals(plus) - residuals(minus)) / span;
    }
    return J;
}

}  // namespace detail

/// Minimizes |r(p)|^2. `jacobian(p, r)` returns dr/dp at p (r = r(p)).
template <typename F, typename G>
LmOutcome levenberg_marquardt(F&& residuals, G&& jacobian, Eigen::VectorXd p, const LmOptions& opt = {}) {
    if (opt.project) opt.project(p);
    Eigen::VectorXd r = residuals(p);
    double cost = r.squaredNorm();
    require(std::isfinite(cost), "fit residuals are not finite at the initial guess");
    double lambda = 1e-3;
    LmOutcome out;
    Eigen::MatrixXd J = jacobian(p, r);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        out.iterations = it;
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool accepted = false;
        double step_norm = 0.0, new_cost = cost;
        Eigen::VectorXd trial, r_trial;
        for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
            Eigen::MatrixXd damped = A;
            for (Eigen::Index k = 0; k < A.rows(); ++k)
                damped(k, k) += lambda * std::max(A(k, k), 1e-12);
            const Eigen::VectorXd delta = damped.ldlt().solve(-g);
            trial = p + delta;
            if (opt.project) opt.project(trial);
            r_trial = residuals(trial);
            new_cost = r_trial.squaredNorm();
            if (std::isfinite(new_cost) && new_cost <= cost) {
                accepted = true;
                step_norm = (trial - p).norm();
                lambda = std::max(lambda / 3.0, 1e-12);
            } else {
                lambda *= 4.0;
            }
        }
        if (!accepted) {
            // Cannot descend further: a (possibly flat) minimum.
            out.converged = true;
            break;
        }
        const double improvement = cost - new_cost;
        p = trial;
        r = r_trial;
        cost = new_cost;
        J = jacobian(p, r);
        if (improvement <= opt.tolerance * std::max(cost, 1e-300) ||
            step_norm <= opt.tolerance * (p.norm() + opt.tolerance)) {
            out.converged = true;
            break;
        }
    }
    out.params = p;
    out.jtj = J.transpose() * J;
    out.cost = cost;
    out.residual_count = static_cast<std::size_t>(r.size());
    return out;
}

/// Same, with a central-difference Jacobian.
template <typename F>
LmOutcome levenberg_marquardt(F&& residuals, Eigen::VectorXd p, const LmOptions& opt = {}) {
    auto jac = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& r) {
        return detail::numeric_jacobian(residuals, q, r, opt);
    };
    return levenberg_marquardt(residuals, jac, std::move(p), opt);
}

/// Parameter standard errors from J^T J. With `scale_by_residuals` the
/// covariance is multiplied by the reduced chi^2 (unknown noise level).
inline std::vector<double> parameter_sigmas(const LmOutcome& o, bool scale_by_residuals) {
    const auto n = o.params.size();
    const double dof = static_cast<double>(o.residual_count) - static_cast<double>(n);
    const double scale = scale_by_residuals && dof > 0 ? o.cost / dof : 1.0;
    Eigen::MatrixXd cov = o.jtj.completeOrthogonalDecomposition().pseudoInverse() * scale;
    std::vector<double> s(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) s[static_cast<std::size_t>(k)] = std::sqrt(std::max(cov(k, k), 0.0));
    return s;
}

// ---------------------------------------------------------------------------
// Linear heating fit n(t) = n0 + rate t

/// Weighted least squares. If every entry of `sem` is > 0 it is used as the
/// absolute standard error; otherwise the fit is unweighted and the
/// uncertainties are scaled by the residual scatter.
inline FitResult fit_linear_heating(const std::vector<double>& t, const std::vector<double>& n,
                                    const std::vector<double>& sem = {}) {
    require(t.size() == n.size(), "times and occupations differ in length");
    require(t.size() >= 2, "need at least two points for a linear fit");
    require(sem.empty() || sem.size() == t.size(), "sem must match the data length");
    const bool weighted = !sem.empty() && std::all_of(sem.begin(), sem.end(), [](double s) { return s > 0.0; });
    const auto m = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd X(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double w = weighted ? 1.0 / sem[static_cast<std::size_t>(k)] : 1.0;
        X(k, 0) = w;
        X(k, 1) = w * t[static_cast<std::size_t>(k)];
        y[k] = w * n[static_cast<std::size_t>(k)];
    }
    const Eigen::MatrixXd XtX = X.transpose() * X;
    require(std::abs(XtX.determinant()) > 0.0, "sample times must not all coincide");
    const Eigen::VectorXd beta = XtX.ldlt().solve(X.transpose() * y);
    const Eigen::VectorXd res = y - X * beta;
    const double rss = res.squaredNorm();
    const double dof = static_cast<double>(m - 2);
    double scale = 1.0;
    if (!weighted) scale = dof > 0 ? rss / dof : 0.0;
    const Eigen::MatrixXd cov = XtX.inverse() * scale;

    FitResult f;
    f.model = "linear";
    f.names = {"n0", "heating_rate"};
    f.values = {beta[0], beta[1]};
    f.sigmas = {std::sqrt(cov(0, 0)), std::sqrt(cov(1, 1))};
    f.residual_norm = std::sqrt(rss);
    f.reduced_chi2 = dof > 0 ? rss / dof : 0.0;
    f.iterations = 1;
    f.converged = std::isfinite(beta[0]) && std::isfinite(beta[1]);
    f.init_policy = "closed_form";
    return f;
}

// ---------------------------------------------------------------------------
// Resonance scan: rate(f) = A (f_ref / f)^2 + B exp(-(f - f0)^2 / (2 w^2))

struct ResonanceModel {
    double reference_frequency_hz = 0.0;
    double operator()(double f, double A, double B, double f0, double width) const {
        const double r = reference_frequency_hz / f;
        const double z = (f - f0) / width;
        return A * r * r + B * std::exp(-0.5 * z * z);
    }
};

/// Fits baseline amplitude A, peak excess B, centre f0 and Gaussian width
/// (all frequencies in Hz). The seed comes from a grid over (f0, width)
/// with A and B solved linearly at each node, followed by a joint LM fit.
inline FitResult fit_resonance(const std::vector<double>& f_hz, const std::vector<double>& rate,
                               const std::vector<double>& sem, double reference_frequency_hz,
                               const LmOptions& options = {}) {
    require(f_hz.size() == rate.size() && f_hz.size() >= 5, "need >= 5 scan points");
    require(sem.empty() || sem.size() == f_hz.size(), "sem must match the data length");
    require(reference_frequency_hz > 0.0, "reference frequency must be > 0");
    for (double f : f_hz) require(f > 0.0 && std::isfinite(f), "scan frequencies must be > 0");
    const bool weighted = !sem.empty() && std::all_of(sem.begin(), sem.end(), [](double s) { return s > 0.0; });
    const ResonanceModel model{reference_frequency_hz};
    const std::size_t m = f_hz.size();
    auto weight = [&](std::size_t k) { return weighted ? 1.0 / sem[k] : 1.0; };

    const auto [lo, hi] = std::minmax_element(f_hz.begin(), f_hz.end());
    const double span = *hi - *lo;
    double min_spacing = span;
    {
        std::vector<double> sorted = f_hz;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 1; k < m; ++k) min_spacing = std::min(min_spacing, sorted[k] - sorted[k - 1]);
    }
    require(span > 0.0, "scan frequencies must not all coincide");

    // Grid seed.
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector4d seed(0, 0, 0.5 * (*lo + *hi), span / 4);
    const double w_min = std::max(min_spacing / 2, span / 200);
    for (int ic = 0; ic <= 40; ++ic) {
        const double f0 = *lo + span * ic / 40.0;
        for (int iw = 0; iw <= 30; ++iw) {
            const double width = w_min * std::pow(span / w_min, iw / 30.0);
            Eigen::MatrixXd X(m, 2);
            Eigen::VectorXd y(m);
            for (std::size_t k = 0; k < m; ++k) {
                const double w = weight(k);
                X(k, 0) = w * model(f_hz[k], 1, 0, f0, width);
                X(k, 1) = w * model(f_hz[k], 0, 1, f0, width);
                y[k] = w * rate[k];
            }
            const Eigen::Vector2d ab = (X.transpose() * X).ldlt().solve(X.transpose() * y);
            const double ss = (y - X * ab).squaredNorm();
            if (std::isfinite(ss) && ss < best) {
                best = ss;
                seed = {ab[0], ab[1], f0, width};
            }
        }
    }

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(m);
        for (std::size_t k = 0; k < m; ++k)
            r[static_cast<Eigen::Index>(k)] = weight(k) * (model(f_hz[k], p[0], p[1], p[2], p[3]) - rate[k]);
        return r;
    };
    LmOptions opt = options;
    const double w_floor = w_min / 4;
    opt.project = [w_floor](Eigen::VectorXd& p) { p[3] = std::max(std::abs(p[3]), w_floor); };
    const auto out = levenberg_marquardt(residuals, Eigen::VectorXd(seed), opt);
    const auto sig = parameter_sigmas(out, !weighted);

    FitResult fr;
    fr.model = "baseline_inverse_square_plus_gaussian";
    fr.names = {"baseline", "peak_excess", "center_hz", "width_hz"};
    fr.values = {out.params[0], out.params[1], out.params[2], out.params[3]};
    fr.sigmas = sig;
    fr.residual_norm = std::sqrt(out.cost);
    const double dof = static_cast<double>(m) - 4.0;
    fr.reduced_chi2 = dof > 0 ? out.cost / dof : 0.0;
    fr.iterations = out.iterations;
    fr.converged = out.converged;
    fr.init_policy = "grid_center_width_linear_amplitudes";
    return fr;
}

// ---------------------------------------------------------------------------
// Exchange-rate extraction

/// kappa_ex = (ndot_uncoupled - ndot_coupled) / (n1 - n2).
inline double extract_kappa(double ndot_uncoupled, double ndot_coupled, double n1, double n2) {
    require_finite(ndot_uncoupled, "ndot_uncoupled");
    require_finite(ndot_coupled, "ndot_coupled");
    require_finite(n1, "n1");
    require_finite(n2, "n2");
    const double diff = n1 - n2;
    if (std::abs(diff) <= 1e-12 * std::max({std::abs(n1), std::abs(n2), 1e-300}))
        throw InvalidInput("n1 equals n2: exchange rate is undefined without a temperature difference");
    return (ndot_uncoupled - ndot_coupled) / diff;
}

struct KappaEstimate {
    double kappa = 0.0;
    double sigma = 0.0;
};

/// First-order error propagation with independent inputs.
inline KappaEstimate extract_kappa(double ndot_u, double sigma_u, double ndot_c, double sigma_c,
                                   double n1, double sigma_n1, double n2, double sigma_n2) {
    const double k = extract_kappa(ndot_u, ndot_c, n1, n2);
    const double d = n1 - n2;
    const double var = (sigma_u * sigma_u + sigma_c * sigma_c) / (d * d) +
                       k * k * (sigma_n1 * sigma_n1 + sigma_n2 * sigma_n2) / (d * d);
    return {k, std::sqrt(var)};
}

// ---------------------------------------------------------------------------
// Sideband-free Rabi thermometry

struct RabiDataset {
    std::vector<double> times;  // s
    std::vector<long> excited;  // bright counts per time
    std::vector<long> shots;    // shots per time
    double eta = 0.05;
    double rabi_frequency = 0.0;  // rad/s, carrier Rabi frequency at n = 0
};

inline constexpr std::size_t rabi_level_cap = 200000;
inline constexpr double rabi_tail_limit = 1e-6;

/// Carrier coupling factors c_n = exp(-eta^2/2) L_n(eta^2) for n < count,
/// by the three-term recurrence. |L_n(x)| <= exp(x/2) for x >= 0, so no
/// overflow or loss of range occurs at any n.
inline std::vector<double> carrier_factors(double eta, std::size_t count) {
    require(std::isfinite(eta) && eta >= 0.0, "Lamb-Dicke parameter must be >= 0");
    require(count >= 1, "need at least one level");
    const double x = eta * eta;
    const double scale = std::exp(-0.5 * x);
    std::vector<double> c(count);
    double prev = 1.0;       // L_0
    double cur = 1.0 - x;    // L_1
    c[0] = scale * prev;
    if (count > 1) c[1] = scale * cur;
    for (std::size_t n = 1; n + 1 < count; ++n) {
        const double next = boost::math::laguerre_next(static_cast<unsigned>(n), x, cur, prev);
        prev = cur;
        cur = next;
        c[n + 1] = scale * cur;
    }
    return c;
}

/// Number of thermal levels kept for a given n_bar.
inline std::size_t rabi_level_count(double n_bar) {
    require(std::isfinite(n_bar) && n_bar >= 0.0, "n_bar must be >= 0");
    const double want = 20.0 * n_bar + 100.0;
    const auto count = static_cast<std::size_t>(std::min<double>(want, static_cast<double>(rabi_level_cap)));
    // Thermal tail beyond the last kept level.
    const double tail = n_bar > 0 ? std::pow(n_bar / (n_bar + 1.0), static_cast<double>(count)) : 0.0;
    if (tail >= rabi_tail_limit)
        throw InvalidInput("n_bar too large for carrier thermometry: truncated thermal tail " +
                           std::to_string(tail));
    return count;
}

/// Largest n_bar whose tail stays below the limit at the level cap.
inline double rabi_max_nbar() {
    // (n/(n+1))^N = limit  =>  n = 1 / (limit^(-1/N) - 1)
    return 1.0 / (std::pow(rabi_tail_limit, -1.0 / static_cast<double>(rabi_level_cap)) - 1.0);
}

class RabiModel {
public:
    RabiModel(double eta, std::size_t levels = rabi_level_cap) : eta_(eta), c_(carrier_factors(eta, levels)) {}

    double eta() const { return eta_; }

    /// Largest n_bar this precomputed model can evaluate.
    double max_nbar() const {
        const double by_levels = (static_cast<double>(c_.size()) - 100.0) / 20.0;
        return std::min(by_levels, rabi_max_nbar());
    }

    /// Thermally averaged carrier excitation probability.
    double excitation(double t, double n_bar, double rabi_frequency) const {
        const std::size_t count = rabi_level_count(n_bar);
        require(count <= c_.size(), "model precomputed with too few levels");
        const double q = n_bar / (n_bar + 1.0);
        double p = 1.0 / (n_bar + 1.0);
        double sum = 0.0;
        const double half = 0.5 * rabi_frequency * t;
        for (std::size_t n = 0; n < count; ++n) {
            const double s = std::sin(half * c_[n]);
            sum += p * s * s;
            p *= q;
        }
        return sum;
    }

    struct Gradient {
        double p = 0.0;
        double d_nbar = 0.0;   // dP / d n_bar
        double d_omega = 0.0;  // dP / d rabi_frequency
    };

    /// Excitation and its parameter derivatives in a single pass.
    Gradient excitation_gradient(double t, double n_bar, double rabi_frequency) const {
        const std::size_t count = rabi_level_count(n_bar);
        require(count <= c_.size(), "model precomputed with too few levels");
        const double q = n_bar / (n_bar + 1.0);
        double p = 1.0 / (n_bar + 1.0);
        const double half = 0.5 * rabi_frequency * t;
        // d p_n / d n_bar = p_n (n / n_bar - (n + 1) / (n_bar + 1)); the
        // n / n_bar part is accumulated as sum n p_n s_n and divided once.
        double sum = 0.0, sum_n = 0.0, dtheta = 0.0;
        for (std::size_t n = 0; n < count; ++n) {
            const double s = std::sin(half * c_[n]);
            const double c = std::cos(half * c_[n]);
            const double w = p * s * s;
            sum += w;
            sum_n += static_cast<double>(n) * w;
            dtheta += p * 2.0 * s * c * c_[n];
            p *= q;
        }
        Gradient g;
        g.p = sum;
        const double inv = 1.0 / (n_bar + 1.0);
        g.d_nbar = (n_bar > 0.0 ? sum_n / n_bar : 0.0) - (sum_n + sum) * inv;
        g.d_omega = dtheta * 0.5 * t;
        return g;
    }

private:
    double eta_;
    std::vector<double> c_;
};

inline RabiDataset synthesize_rabi(const RabiModel& model, double n_bar, double rabi_frequency,
                                   const std::vector<double>& times, long shots, Rng& rng) {
    require(shots >= 1, "shots must be >= 1");
    RabiDataset d;
    d.times = times;
    d.eta = model.eta();
    d.rabi_frequency = rabi_frequency;
    for (double t : times) {
        d.shots.push_back(shots);
        d.excited.push_back(rng.binomial(shots, model.excitation(t, n_bar, rabi_frequency)));
    }
    return d;
}

/// Binomial deviance residual.
inline double deviance_residual(long k, long s, double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    const double kk = static_cast<double>(k), ss = static_cast<double>(s);
    double dev = 0.0;
    if (k > 0) dev += kk * std::log(kk / (ss * p));
    if (k < s) dev += (ss - kk) * std::log((ss - kk) / (ss * (1.0 - p)));
    const double r = std::sqrt(std::max(0.0, 2.0 * dev));
    return kk >= ss * p ? r : -r;
}

/// d r / d p of the deviance residual.
inline double deviance_residual_slope(long k, long s, double p) {
    const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
    const double kk = static_cast<double>(k), ss = static_cast<double>(s);
    const double r = deviance_residual(k, s, pc);
    if (std::abs(r) < 1e-6) return -ss / std::sqrt(ss * pc * (1.0 - pc));
    const double dD = -kk / pc + (ss - kk) / (1.0 - pc);
    return dD / r;
}

/// Maximum-likelihood n_bar (and a Rabi-frequency scale factor) from
/// carrier flops. Parameters: "n_bar", "rabi_scale".
inline FitResult fit_rabi_nbar(const RabiDataset& data, const RabiModel& model,
                               const LmOptions& options = {}) {
    require(!data.times.empty() && data.times.size() == data.excited.size() &&
                data.times.size() == data.shots.size(),
            "Rabi dataset arrays differ in length");
    require(data.rabi_frequency > 0.0, "Rabi frequency must be > 0");
    require(std::abs(data.eta - model.eta()) < 1e-15, "dataset and model Lamb-Dicke parameters differ");
    for (std::size_t k = 0; k < data.times.size(); ++k)
        require(data.shots[k] >= 1 && data.excited[k] >= 0 && data.excited[k] <= data.shots[k],
                "excited counts must lie in [0, shots]");
    const std::size_t m = data.times.size();
    require(model.max_nbar() > 0.0, "Rabi model has too few levels for fitting");
    const double log_max = std::log(0.999 * model.max_nbar());
    const double log_min = std::log(1e-3);

    auto residuals = [&](const Eigen::VectorXd& p) {
        const double n_bar = std::exp(p[0]);
        Eigen::VectorXd r(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double prob = model.excitation(data.times[k], n_bar, data.rabi_frequency * p[1]);
            r[static_cast<Eigen::Index>(k)] = deviance_residual(data.excited[k], data.shots[k], prob);
        }
        return r;
    };

    // Grid seed over log n_bar at the nominal Rabi frequency, ascending.
    // Cost grows with n_bar, so the scan stops once the deviance has risen
    // well above the best node for three consecutive nodes.
    Eigen::VectorXd seed(2);
    seed << std::log(0.01), 1.0;
    double best = std::numeric_limits<double>::infinity();
    int rising = 0;
    for (int k = 0; k <= 48 && rising < 3; ++k) {
        Eigen::VectorXd p(2);
        p << std::log(0.01) + (std::log(1e4) - std::log(0.01)) * k / 48.0, 1.0;
        if (p[0] > log_max) break;
        const double c = residuals(p).squaredNorm();
        if (c < best) {
            best = c;
            seed = p;
            rising = 0;
        } else if (c > 1.5 * best + 10.0) {
            ++rising;
        }
    }
    auto jacobian = [&](const Eigen::VectorXd& p, const Eigen::VectorXd&) {
        const double n_bar = std::exp(p[0]);
        Eigen::MatrixXd J(m, 2);
        for (std::size_t k = 0; k < m; ++k) {
            const auto g = model.excitation_gradient(data.times[k], n_bar, data.rabi_frequency * p[1]);
            const double slope = deviance_residual_slope(data.excited[k], data.shots[k], g.p);
            const auto row = static_cast<Eigen::Index>(k);
            J(row, 0) = slope * g.d_nbar * n_bar;
            J(row, 1) = slope * g.d_omega * data.rabi_frequency;
        }
        return J;
    };
    LmOptions opt = options;
    opt.project = [=](Eigen::VectorXd& p) {
        p[0] = std::clamp(p[0], log_min, log_max);
        p[1] = std::clamp(p[1], 0.5, 1.5);
    };
    const auto out = levenberg_marquardt(residuals, jacobian, seed, opt);
    // Deviance residuals are unit-variance; J^T J approximates the Fisher
    // information directly.
    const auto sig = parameter_sigmas(out, false);
    const double n_bar = std::exp(out.params[0]);

    FitResult f;
    f.model = "thermal_carrier_flop";
    f.names = {"n_bar", "rabi_scale"};
    f.values = {n_bar, out.params[1]};
    f.sigmas = {n_bar * sig[0], sig[1]};
    f.residual_norm = std::sqrt(out.cost);
    const double dof = static_cast<double>(m) - 2.0;
    f.reduced_chi2 = dof > 0 ? out.cost / dof : 0.0;
    f.iterations = out.iterations;
    f.converged = out.converged;
    f.init_policy = "grid_log_nbar";
    return f;
}

}  // namespace ionwire::analysis
