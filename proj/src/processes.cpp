#include "qtel/processes.hpp"

#include "qtel/errors.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/optim.hpp"
#include "qtel/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

namespace qtel::processes {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

void TelegraphParams::validate() const {
    require(std::isfinite(gamma0) && gamma0 > 0.0, "TelegraphParams: gamma0 must be > 0");
    require(std::isfinite(gamma1) && gamma1 > 0.0, "TelegraphParams: gamma1 must be > 0");
}

void PoissonResetParams::validate() const {
    require(std::isfinite(gamma) && gamma > 0.0, "PoissonResetParams: gamma must be > 0");
    require(std::isfinite(sigma) && sigma >= 0.0, "PoissonResetParams: sigma must be >= 0");
}

void LorentzianNoise::validate() const {
    require(std::isfinite(amplitude_A) && amplitude_A >= 0.0,
            "LorentzianNoise: amplitude must be >= 0");
    require(std::isfinite(alpha) && alpha > 0.0, "LorentzianNoise: alpha must be > 0");
}

LorentzianNoise LorentzianNoise::from_telegraph(const TelegraphParams& p) {
    p.validate();
    const double sum = p.gamma0 + p.gamma1;
    return {p.gamma0 * p.gamma1 / (sum * sum), sum};
}

LorentzianNoise LorentzianNoise::from_poisson_reset(const PoissonResetParams& p) {
    p.validate();
    return {p.sigma * p.sigma, p.gamma};
}

double LevelPath::value_at(double t) const {
    if (segment_starts.empty() || t < 0.0 || t > t_end)
        throw std::out_of_range("LevelPath::value_at: t outside path");
    auto it = std::upper_bound(segment_starts.begin(), segment_starts.end(), t);
    return levels[static_cast<std::size_t>(it - segment_starts.begin()) - 1];
}

std::vector<double> LevelPath::sample(double dt) const {
    require(dt > 0.0, "LevelPath::sample: dt must be > 0");
    const auto n = static_cast<std::size_t>(t_end / dt);
    std::vector<double> out;
    out.reserve(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        while (seg + 1 < segment_starts.size() && segment_starts[seg + 1] <= t) ++seg;
        out.push_back(levels[seg]);
    }
    return out;
}

double LevelPath::time_average() const {
    if (segment_starts.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < segment_starts.size(); ++i) {
        const double t0 = segment_starts[i];
        const double t1 = (i + 1 < segment_starts.size()) ? segment_starts[i + 1] : t_end;
        acc += levels[i] * (t1 - t0);
    }
    return acc / t_end;
}

LevelPath simulate_telegraph(const TelegraphParams& params, double duration,
                             std::uint64_t seed) {
    params.validate();
    require(std::isfinite(duration) && duration > 0.0,
            "simulate_telegraph: duration must be > 0");

    util::Rng rng = util::make_rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::exponential_distribution<double> exp0(params.gamma0);
    std::exponential_distribution<double> exp1(params.gamma1);

    int state = uni(rng) < params.stationary_occupancy() ? 1 : 0;
    LevelPath path;
    path.t_end = duration;
    path.segment_starts.push_back(0.0);
    path.levels.push_back(static_cast<double>(state));

    double t = 0.0;
    while (true) {
        t += (state == 0) ? exp0(rng) : exp1(rng);
        if (t >= duration) break;
        state ^= 1;
        path.segment_starts.push_back(t);
        path.levels.push_back(static_cast<double>(state));
    }
    return path;
}

LevelPath simulate_poisson_reset(const PoissonResetParams& params, double duration,
                                 std::uint64_t seed) {
    params.validate();
    require(std::isfinite(duration) && duration > 0.0,
            "simulate_poisson_reset: duration must be > 0");

    util::Rng rng = util::make_rng(seed);
    std::exponential_distribution<double> gap(params.gamma);
    std::normal_distribution<double> level(0.0, params.sigma > 0.0 ? params.sigma : 1.0);
    const auto draw_level = [&] { return params.sigma > 0.0 ? level(rng) : 0.0; };

    LevelPath path;
    path.t_end = duration;
    path.segment_starts.push_back(0.0);
    path.levels.push_back(draw_level()); // stationary: levels are i.i.d.

    double t = 0.0;
    while (true) {
        t += gap(rng);
        if (t >= duration) break;
        path.segment_starts.push_back(t);
        path.levels.push_back(draw_level());
    }
    return path;
}

double analytic_autocorrelation(const LorentzianNoise& noise, double tau) {
    noise.validate();
    return noise.amplitude_A * std::exp(-noise.alpha * std::fabs(tau));
}

double analytic_psd(const LorentzianNoise& noise, double omega) {
    noise.validate();
    return 2.0 * noise.amplitude_A * noise.alpha /
           (noise.alpha * noise.alpha + omega * omega);
}

namespace detail {

double adev_kernel_closed(double u) {
    // 4 e^{-u} - e^{-2u} + 2u - 3 rewritten via a = e^{-u} - 1 as
    // 2(a + u) - a^2, which cancels the constant and linear terms exactly.
    const double a = std::expm1(-u);
    const double f = 2.0 * (a + u) - a * a;
    return std::max(f, 0.0);
}

double adev_kernel_series(double u) {
    // 4 e^{-u} - e^{-2u} + 2u - 3 = (2/3)u^3 - (1/2)u^4 + (7/30)u^5 - ...
    const double u2 = u * u;
    return u * u2 *
           (2.0 / 3.0 +
            u * (-0.5 + u * (7.0 / 30.0 + u * (-1.0 / 12.0 + u * (31.0 / 1260.0)))));
}

} // namespace detail

double analytic_adev(const LorentzianNoise& noise, double tau) {
    noise.validate();
    require(std::isfinite(tau) && tau > 0.0, "analytic_adev: tau must be > 0");
    if (noise.amplitude_A == 0.0) return 0.0;
    const double u = noise.alpha * tau;
    const double f = (u < detail::kAdevSeriesThreshold) ? detail::adev_kernel_series(u)
                                                        : detail::adev_kernel_closed(u);
    return std::sqrt(noise.amplitude_A * f) / u;
}

AdevCurve empirical_adev(std::span<const double> series, double dt,
                         std::span<const double> taus,
                         std::vector<double>* omitted) {
    require(dt > 0.0, "empirical_adev: dt must be > 0");
    require(series.size() >= 2, "empirical_adev: series too short");
    const std::size_t n = series.size();

    // prefix sums of the offset-removed series; window averages come out as
    // sum differences, and a constant series stays exactly zero
    const double offset = series[0];
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (series[i] - offset);

    AdevCurve curve;
    for (double tau : taus) {
        require(tau > 0.0, "empirical_adev: tau must be > 0");
        const double ratio = tau / dt;
        const double m_real = std::round(ratio);
        if (std::fabs(ratio - m_real) > 1e-6 * std::max(1.0, ratio))
            throw std::invalid_argument("empirical_adev: tau is not a multiple of dt");
        const auto m = static_cast<std::size_t>(m_real);
        if (m == 0 || n < 2 * m) {
            if (omitted) omitted->push_back(tau);
            continue;
        }
        const std::size_t pairs = n - 2 * m + 1;
        double acc = 0.0;
        const double* s = prefix.data();
        for (std::size_t i = 0; i < pairs; ++i) {
            const double d = s[i + 2 * m] - 2.0 * s[i + m] + s[i];
            acc += d * d;
        }
        const double avar =
            acc / (2.0 * static_cast<double>(m) * static_cast<double>(m) *
                   static_cast<double>(pairs));
        curve.taus.push_back(m_real * dt);
        curve.sigmas.push_back(std::sqrt(avar));
        curve.counts.push_back(pairs);
    }
    return curve;
}

std::vector<double> log_tau_grid(double tau_min, double tau_max,
                                 int points_per_decade, double dt) {
    require(tau_min > 0.0 && tau_max > tau_min, "log_tau_grid: bad tau range");
    require(points_per_decade >= 1, "log_tau_grid: bad density");
    require(dt > 0.0, "log_tau_grid: dt must be > 0");
    std::vector<std::size_t> multiples;
    const double step = std::pow(10.0, 1.0 / points_per_decade);
    for (double tau = tau_min; tau <= tau_max * (1.0 + 1e-12); tau *= step) {
        const auto m = static_cast<std::size_t>(std::max(1.0, std::round(tau / dt)));
        multiples.push_back(m);
    }
    std::sort(multiples.begin(), multiples.end());
    multiples.erase(std::unique(multiples.begin(), multiples.end()), multiples.end());
    std::vector<double> out;
    out.reserve(multiples.size());
    for (auto m : multiples) out.push_back(static_cast<double>(m) * dt);
    return out;
}

double adev_model_value(const AdevModelFit& fit, double tau) {
    double v = fit.white_k * std::sqrt(1.0 / tau);
    if (fit.comp1.amplitude_A > 0.0) v += analytic_adev(fit.comp1, tau);
    if (fit.comp2.amplitude_A > 0.0) v += analytic_adev(fit.comp2, tau);
    return v;
}

namespace {

double model_sigma(const double* th, double tau) {
    // th = {log A1, log a1, log A2, log a2, log k}
    const double s1 = analytic_adev({std::exp(th[0]), std::exp(th[1])}, tau);
    const double s2 = analytic_adev({std::exp(th[2]), std::exp(th[3])}, tau);
    return s1 + s2 + std::exp(th[4]) / std::sqrt(tau);
}

} // namespace

AdevModelFit fit_adev_model(const AdevCurve& curve) {
    std::vector<double> taus, sigmas;
    for (std::size_t i = 0; i < curve.taus.size(); ++i) {
        if (curve.sigmas[i] > 0.0) {
            taus.push_back(curve.taus[i]);
            sigmas.push_back(curve.sigmas[i]);
        }
    }
    if (taus.empty()) throw FitError("fit_adev_model: degenerate curve (all zeros)");
    require(taus.size() >= 8, "fit_adev_model: need >= 8 positive points");
    require(taus.back() / taus.front() >= 100.0,
            "fit_adev_model: curve must span >= 2 decades");

    const double tau_min = taus.front();
    const double tau_max = taus.back();
    const double alpha_lo = 0.1 / tau_max;
    const double alpha_hi = 10.0 / tau_min;
    const double log_amp_lo = std::log(1e-12);
    const double log_amp_hi = std::log(1e12);

    const auto sigma_near = [&](double tau) {
        auto it = std::lower_bound(taus.begin(), taus.end(), tau);
        if (it == taus.end()) --it;
        return sigmas[static_cast<std::size_t>(it - taus.begin())];
    };

    util::LmOptions opts;
    opts.max_iter = 600;
    opts.lower = {log_amp_lo, std::log(alpha_lo), log_amp_lo, std::log(alpha_lo), log_amp_lo};
    opts.upper = {log_amp_hi, std::log(alpha_hi), log_amp_hi, std::log(alpha_hi), log_amp_hi};

    const auto residuals = [&](const std::vector<double>& th) {
        std::vector<double> r(taus.size());
        for (std::size_t i = 0; i < taus.size(); ++i) {
            const double mv = model_sigma(th.data(), taus[i]);
            r[i] = std::log(std::max(mv, 1e-300)) - std::log(sigmas[i]);
        }
        return r;
    };

    constexpr int kRestarts = 8;
    util::LmResult best;
    best.ssr = std::numeric_limits<double>::infinity();
    double best_minor = std::numeric_limits<double>::infinity();
    bool any_converged = false;

    // peak of one component is ~0.617*sqrt(A) at tau = 2/alpha
    const auto amp_for = [&](double alpha, double share) {
        const double s = share * sigma_near(std::clamp(2.0 / alpha, tau_min, tau_max));
        return std::max((s / 0.617) * (s / 0.617), 1e-12);
    };

    for (int restart = 0; restart < kRestarts; ++restart) {
        const double tau_mid = std::sqrt(tau_min * tau_max);
        const double k_full = std::max(sigma_near(tau_min) * std::sqrt(tau_min), 1e-12);
        std::vector<double> th0;
        if (restart == 6) {
            // single Lorentzian, no white noise
            th0 = {std::log(amp_for(2.0 / tau_mid, 1.0)), std::log(2.0 / tau_mid),
                   std::log(1e-12), std::log(alpha_hi * 0.5), std::log(1e-12)};
        } else if (restart == 7) {
            // pure white noise
            th0 = {std::log(1e-12), std::log(alpha_lo * 2.0), std::log(1e-12),
                   std::log(alpha_hi * 0.5), std::log(k_full)};
        } else {
            double a1, a2;
            if (restart == 0) {
                // corners at the outer thirds of the observed range
                a1 = 2.0 / (tau_max * 0.3);
                a2 = 2.0 / (tau_min * 3.0);
            } else {
                util::Rng rng = util::make_rng(0x5eedULL + restart);
                std::uniform_real_distribution<double> u(std::log(0.5 / tau_max),
                                                         std::log(5.0 / tau_min));
                a1 = std::exp(u(rng));
                a2 = std::exp(u(rng));
                if (a1 > a2) std::swap(a1, a2);
            }
            th0 = {std::log(amp_for(a1, 0.5)), std::log(a1), std::log(amp_for(a2, 0.5)),
                   std::log(a2), std::log(0.3 * k_full)};
        }
        const util::LmResult r = util::levenberg_marquardt(residuals, th0, opts);
        any_converged = any_converged || r.converged;
        if (!std::isfinite(r.ssr)) continue;
        // Fits within the window are ties, broken toward the smaller minor
        // component: a split of one Lorentzian across two equal corners (or
        // a white term traded against an off-grid Lorentzian tail) fits no
        // better in any meaningful sense.
        const double minor = std::min(r.x[0], r.x[2]);
        const double window = 1e-8 * static_cast<double>(taus.size()) +
                              1e-6 * std::max(r.ssr, best.ssr);
        const bool tie =
            std::isfinite(best.ssr) && std::fabs(r.ssr - best.ssr) <= window;
        if (tie ? minor < best_minor : r.ssr < best.ssr) {
            best = r;
            best_minor = minor;
        }
    }

    if (!std::isfinite(best.ssr))
        throw FitError("fit_adev_model: no restart produced a finite fit");
    // a residual this small is a perfect fit even when the optimizer never
    // formally stalls (the white term and an off-grid Lorentzian tail are
    // nearly degenerate, so it can keep polishing forever)
    if (std::sqrt(best.ssr / static_cast<double>(taus.size())) < 1e-4)
        any_converged = true;

    AdevModelFit fit;
    fit.comp1 = {std::exp(best.x[0]), std::exp(best.x[1])};
    fit.comp2 = {std::exp(best.x[2]), std::exp(best.x[3])};
    fit.white_k = std::exp(best.x[4]);
    fit.residual = best.ssr;
    if (fit.comp1.alpha > fit.comp2.alpha) std::swap(fit.comp1, fit.comp2);
    if (!any_converged)
        throw FitError("fit_adev_model: no convergence after 8 restarts; best residual " +
                       util::format_double(fit.residual) + " at A1=" +
                       util::format_double(fit.comp1.amplitude_A) + ", alpha1=" +
                       util::format_double(fit.comp1.alpha) + ", A2=" +
                       util::format_double(fit.comp2.amplitude_A) + ", alpha2=" +
                       util::format_double(fit.comp2.alpha) + ", k=" +
                       util::format_double(fit.white_k));
    return fit;
}

void write_series_csv(const std::filesystem::path& path,
                      std::span<const double> times, std::span<const double> values) {
    require(times.size() == values.size(), "write_series_csv: length mismatch");
    std::string out = "t,value\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        out += util::format_double(times[i]);
        out += ',';
        out += util::format_double(values[i]);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

std::pair<std::vector<double>, std::vector<double>>
read_series_csv(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path, "t,value");
    std::vector<double> t, v;
    t.reserve(rows.size());
    v.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != 2) throw DataError("series CSV: bad row in " + path.string());
        t.push_back(util::parse_double(row[0]));
        v.push_back(util::parse_double(row[1]));
    }
    return {std::move(t), std::move(v)};
}

void write_adev_csv(const std::filesystem::path& path, const AdevCurve& curve) {
    std::string out = "tau,sigma,count\n";
    for (std::size_t i = 0; i < curve.taus.size(); ++i) {
        out += util::format_double(curve.taus[i]);
        out += ',';
        out += util::format_double(curve.sigmas[i]);
        out += ',';
        out += std::to_string(curve.counts[i]);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

AdevCurve read_adev_csv(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path, "tau,sigma,count");
    AdevCurve curve;
    for (const auto& row : rows) {
        if (row.size() != 3) throw DataError("ADEV CSV: bad row in " + path.string());
        curve.taus.push_back(util::parse_double(row[0]));
        curve.sigmas.push_back(util::parse_double(row[1]));
        curve.counts.push_back(static_cast<std::size_t>(util::parse_double(row[2])));
    }
    return curve;
}

void write_fit_json(const std::filesystem::path& path, const AdevModelFit& fit) {
    nlohmann::ordered_json j;
    j["A1"] = fit.comp1.amplitude_A;
    j["alpha1"] = fit.comp1.alpha;
    j["A2"] = fit.comp2.amplitude_A;
    j["alpha2"] = fit.comp2.alpha;
    j["k"] = fit.white_k;
    j["residual"] = fit.residual;
    util::atomic_write_file(path, j.dump(2) + "\n");
}

AdevModelFit read_fit_json(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(util::read_file(path));
    AdevModelFit fit;
    fit.comp1 = {j.at("A1").get<double>(), j.at("alpha1").get<double>()};
    fit.comp2 = {j.at("A2").get<double>(), j.at("alpha2").get<double>()};
    fit.white_k = j.at("k").get<double>();
    fit.residual = j.at("residual").get<double>();
    return fit;
}

} // namespace qtel::processes
