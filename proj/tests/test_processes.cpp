#include <doctest.h>

#include "qtel/errors.hpp"
#include "qtel/processes.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/parallel.hpp"
#include "qtel/util/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

using namespace qtel;
using namespace qtel::processes;

namespace {

// Average Allan variance over independent realizations of a generator.
AdevCurve averaged_adev(int realizations, double dt,
                        const std::vector<double>& taus,
                        const std::function<std::vector<double>(std::uint64_t)>& make) {
    std::vector<AdevCurve> curves(realizations);
    util::parallel_for(realizations, 0, [&](std::size_t r) {
        curves[r] = empirical_adev(make(r), dt, taus);
    });
    AdevCurve avg = curves[0];
    std::vector<double> var(avg.sigmas.size(), 0.0);
    for (const auto& c : curves)
        for (std::size_t k = 0; k < var.size(); ++k) var[k] += c.sigmas[k] * c.sigmas[k];
    for (std::size_t k = 0; k < var.size(); ++k)
        avg.sigmas[k] = std::sqrt(var[k] / realizations);
    return avg;
}

} // namespace

TEST_CASE("telegraph occupancy: symmetric rates give one half") {
    const auto path = simulate_telegraph({1.0, 1.0}, 1e5, 42);
    CHECK(path.time_average() == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("telegraph occupancy: stationary formula gamma0/(gamma0+gamma1)") {
    const auto path = simulate_telegraph({3.0, 1.0}, 1e5, 7);
    CHECK(path.time_average() == doctest::Approx(0.75).epsilon(0.0134));
}

TEST_CASE("telegraph is deterministic given the seed") {
    const auto a = simulate_telegraph({2.0, 0.5}, 100.0, 1234);
    const auto b = simulate_telegraph({2.0, 0.5}, 100.0, 1234);
    REQUIRE(a.segment_starts.size() == b.segment_starts.size());
    for (std::size_t i = 0; i < a.segment_starts.size(); ++i) {
        CHECK(a.segment_starts[i] == b.segment_starts[i]);
        CHECK(a.levels[i] == b.levels[i]);
    }
    const auto c = simulate_telegraph({2.0, 0.5}, 100.0, 1235);
    CHECK(a.segment_starts != c.segment_starts);
}

TEST_CASE("telegraph rejects bad parameters") {
    CHECK_THROWS_AS(simulate_telegraph({0.0, 1.0}, 10.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(simulate_telegraph({1.0, -1.0}, 10.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(simulate_telegraph({1.0, 1.0}, 0.0, 1), std::invalid_argument);
}

TEST_CASE("telegraph occupancy property over random rates") {
    util::Rng rng = util::make_rng(99);
    std::uniform_real_distribution<double> logr(std::log(0.1), std::log(10.0));
    for (int trial = 0; trial < 10; ++trial) {
        const TelegraphParams params{std::exp(logr(rng)), std::exp(logr(rng))};
        const double T = 20000.0 / std::min(params.gamma0, params.gamma1);
        const auto path = simulate_telegraph(params, T, 1000 + trial);
        const auto noise = LorentzianNoise::from_telegraph(params);
        // variance of the time average of an exponentially correlated process
        const double stderr_occ = std::sqrt(2.0 * noise.amplitude_A / (noise.alpha * T));
        CHECK(std::fabs(path.time_average() - params.stationary_occupancy()) <
              3.0 * stderr_occ + 1e-12);
    }
}

TEST_CASE("poisson reset: zero sigma gives the zero path") {
    const auto path = simulate_poisson_reset({1.0, 0.0}, 500.0, 3);
    for (double v : path.levels) CHECK(v == 0.0);
    CHECK(path.value_at(250.0) == 0.0);
}

TEST_CASE("poisson reset: event count matches the Poisson mean") {
    const auto path = simulate_poisson_reset({2.0, 1.0}, 1e5, 11);
    const double events = static_cast<double>(path.segment_starts.size() - 1);
    CHECK(std::fabs(events - 2e5) < 3.0 * std::sqrt(2e5));
}

TEST_CASE("poisson reset: level variance approaches sigma^2") {
    const auto path = simulate_poisson_reset({5.0, 0.7}, 2e4, 21);
    double ss = 0.0;
    for (double v : path.levels) ss += v * v;
    const double var = ss / static_cast<double>(path.levels.size());
    CHECK(var == doctest::Approx(0.49).epsilon(0.05));
}

TEST_CASE("analytic autocorrelation closed form") {
    CHECK(analytic_autocorrelation({0.25, 2.0}, 0.0) == doctest::Approx(0.25));
    CHECK(analytic_autocorrelation({0.25, 2.0}, 1e9) == doctest::Approx(0.0));
    CHECK(analytic_autocorrelation({1.0, 1.0}, 1.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    // even in tau
    CHECK(analytic_autocorrelation({0.3, 1.7}, -2.5) ==
          doctest::Approx(analytic_autocorrelation({0.3, 1.7}, 2.5)));
}

TEST_CASE("analytic PSD values and Wiener-Khinchin normalization") {
    const LorentzianNoise noise{0.25, 2.0};
    CHECK(analytic_psd(noise, 0.0) == doctest::Approx(2.0 * 0.25 / 2.0));
    CHECK(analytic_psd(noise, noise.alpha) == doctest::Approx(0.25 / 2.0));
    CHECK(analytic_psd(noise, -3.0) == doctest::Approx(analytic_psd(noise, 3.0)));

    // quadrature oracle: integrate S over omega with the tan substitution
    // omega = alpha tan(theta); the integral must equal 2*pi*c(0)
    const int n = 20001;
    double integral = 0.0;
    const double h = (std::numbers::pi / 2.0) / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double theta = i * h;
        const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        if (i == n - 1) continue; // integrand -> finite limit; treat endpoint below
        const double omega = noise.alpha * std::tan(theta);
        const double jac = noise.alpha / std::cos(theta) / std::cos(theta);
        integral += w * analytic_psd(noise, omega) * jac;
    }
    // at theta = pi/2 the transformed integrand tends to 0 smoothly
    integral *= 2.0 * h / 3.0; // both half-axes
    const double expected = 2.0 * std::numbers::pi * analytic_autocorrelation(noise, 0.0);
    CHECK(integral == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("analytic ADEV closed form and limits") {
    CHECK(analytic_adev({0.0, 3.0}, 1.0) == 0.0);
    // exact arithmetic at alpha*tau = 100
    CHECK(analytic_adev({1.0, 1.0}, 100.0) ==
          doctest::Approx(std::sqrt(197.0) / 100.0).epsilon(1e-12));
    // small-tau series limit sqrt(2 A alpha tau / 3)
    CHECK(analytic_adev({1.0, 1.0}, 0.01) ==
          doctest::Approx(std::sqrt(2.0 * 0.01 / 3.0)).epsilon(0.005));
    // large-tau limit sqrt(2 A / (alpha tau))
    CHECK(analytic_adev({1.0, 1.0}, 1e4) ==
          doctest::Approx(std::sqrt(2.0 / 1e4)).epsilon(0.001));
    CHECK_THROWS_AS(analytic_adev({1.0, 1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(analytic_adev({1.0, 1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("ADEV branch continuity at the series threshold") {
    const double u = detail::kAdevSeriesThreshold;
    const double f_series = detail::adev_kernel_series(u);
    const double f_closed = detail::adev_kernel_closed(u);
    CHECK(std::fabs(std::sqrt(f_series) - std::sqrt(f_closed)) <=
          1e-9 * std::sqrt(f_closed));
}

TEST_CASE("Wiener-Khinchin: numeric inverse transform of the PSD") {
    const LorentzianNoise noise{0.6, 1.3};
    const double alpha = noise.alpha;
    // Riemann sum of (1/2pi) * S(omega) e^{i omega tau} over a wide grid
    const double omega_max = 1e4 * alpha;
    const double domega = 0.02 * alpha;
    for (double tau : {0.0, 1.0 / alpha, 5.0 / alpha}) {
        double acc = 0.0;
        for (double omega = domega / 2.0; omega < omega_max; omega += domega)
            acc += analytic_psd(noise, omega) * std::cos(omega * tau);
        const double c_num = acc * domega / std::numbers::pi; // both half-axes
        const double c_ref = analytic_autocorrelation(noise, tau);
        CHECK(std::fabs(c_num - c_ref) <= 1e-3 * c_ref);
    }
}

TEST_CASE("empirical ADEV of a constant series is zero") {
    std::vector<double> series(4000, 3.14);
    const auto curve = empirical_adev(series, 0.5, std::vector<double>{1.0, 2.0, 8.0});
    REQUIRE(curve.taus.size() == 3);
    for (double s : curve.sigmas) CHECK(s == 0.0);
}

TEST_CASE("empirical ADEV validates tau against dt") {
    std::vector<double> series(100, 0.0);
    CHECK_THROWS_AS(empirical_adev(series, 0.5, std::vector<double>{0.7}),
                    std::invalid_argument);
    // insufficient data is omitted, not an error
    std::vector<double> omitted;
    const auto curve =
        empirical_adev(series, 0.5, std::vector<double>{1.0, 1000.0}, &omitted);
    CHECK(curve.taus.size() == 1);
    REQUIRE(omitted.size() == 1);
    CHECK(omitted[0] == doctest::Approx(1000.0));
}

TEST_CASE("empirical ADEV counts overlapping pairs") {
    std::vector<double> series(100, 0.0);
    const auto curve = empirical_adev(series, 1.0, std::vector<double>{10.0});
    REQUIRE(curve.counts.size() == 1);
    CHECK(curve.counts[0] == 100 - 20 + 1);
}

TEST_CASE("white-noise ADEV follows the 1/sqrt(tau) law") {
    util::Rng rng = util::make_rng(5);
    std::normal_distribution<double> gauss(0.0, 1.5);
    std::vector<double> series(1 << 20);
    for (double& v : series) v = gauss(rng);
    const double dt = 0.01;
    const auto curve =
        empirical_adev(series, dt, std::vector<double>{0.1, 1.0, 10.0, 100.0});
    // sigma(tau) = sigma_sample * sqrt(dt / tau)
    for (std::size_t k = 0; k < curve.taus.size(); ++k) {
        const double expected = 1.5 * std::sqrt(dt / curve.taus[k]);
        CHECK(curve.sigmas[k] == doctest::Approx(expected).epsilon(0.05));
    }
}

TEST_CASE("telegraph ADEV converges to the analytic curve") {
    const TelegraphParams params{1.0, 1.0};
    const auto noise = LorentzianNoise::from_telegraph(params);
    const double dt = 0.01;
    const double duration = 5000.0;
    const auto taus = log_tau_grid(0.05, 5.0, 10, dt);
    const auto avg = averaged_adev(16, dt, taus, [&](std::uint64_t r) {
        return simulate_telegraph(params, duration, util::derive_seed(40, r)).sample(dt);
    });
    for (std::size_t k = 0; k < avg.taus.size(); ++k) {
        const double ref = analytic_adev(noise, avg.taus[k]);
        CHECK(std::fabs(avg.sigmas[k] - ref) <= 0.10 * ref);
    }
}

TEST_CASE("poisson-reset ADEV collapses onto the same analytic curve") {
    const PoissonResetParams params{2.0, 0.5};
    const auto noise = LorentzianNoise::from_poisson_reset(params);
    CHECK(noise.amplitude_A == doctest::Approx(0.25));
    CHECK(noise.alpha == doctest::Approx(2.0));
    const double dt = 0.01;
    const auto taus = log_tau_grid(0.05, 5.0, 10, dt);
    const auto avg = averaged_adev(16, dt, taus, [&](std::uint64_t r) {
        return simulate_poisson_reset(params, 5000.0, util::derive_seed(60, r)).sample(dt);
    });
    for (std::size_t k = 0; k < avg.taus.size(); ++k) {
        const double ref = analytic_adev(noise, avg.taus[k]);
        CHECK(std::fabs(avg.sigmas[k] - ref) <= 0.10 * ref);
    }
}

TEST_CASE("log tau grid snaps to multiples of dt") {
    const auto taus = log_tau_grid(0.05, 50.0, 10, 0.01);
    REQUIRE(taus.size() >= 8);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double m = taus[i] / 0.01;
        CHECK(std::fabs(m - std::round(m)) < 1e-9);
        if (i > 0) CHECK(taus[i] > taus[i - 1]);
    }
    CHECK(taus.front() == doctest::Approx(0.05));
    CHECK(taus.back() <= 50.0 + 1e-9);
}

TEST_CASE("ADEV model fit recovers synthetic parameters") {
    const LorentzianNoise c1{4e-4, 0.002};
    const LorentzianNoise c2{1e-4, 0.5};
    const double k_white = 2e-3;
    std::vector<double> taus, sigmas;
    util::Rng rng = util::make_rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double tau = 0.1; tau <= 2e4; tau *= std::pow(10.0, 0.1)) {
        taus.push_back(tau);
        const double sigma = analytic_adev(c1, tau) + analytic_adev(c2, tau) +
                             k_white / std::sqrt(tau);
        sigmas.push_back(sigma * (1.0 + 0.02 * gauss(rng)));
    }
    AdevCurve curve{taus, sigmas, std::vector<std::size_t>(taus.size(), 100)};
    const auto fit = fit_adev_model(curve);
    CHECK(fit.comp1.alpha == doctest::Approx(c1.alpha).epsilon(0.2));
    CHECK(fit.comp2.alpha == doctest::Approx(c2.alpha).epsilon(0.2));
    CHECK(fit.comp1.amplitude_A == doctest::Approx(c1.amplitude_A).epsilon(0.2));
    CHECK(fit.comp2.amplitude_A == doctest::Approx(c2.amplitude_A).epsilon(0.2));
    CHECK(fit.white_k == doctest::Approx(k_white).epsilon(0.2));
    CHECK(fit.comp1.alpha <= fit.comp2.alpha);
}

TEST_CASE("single-Lorentzian curve fits with a vanishing second component") {
    const LorentzianNoise c1{1e-2, 0.05};
    std::vector<double> taus, sigmas;
    for (double tau = 0.1; tau <= 1e4; tau *= std::pow(10.0, 0.1)) {
        taus.push_back(tau);
        sigmas.push_back(analytic_adev(c1, tau));
    }
    AdevCurve curve{taus, sigmas, std::vector<std::size_t>(taus.size(), 100)};
    const auto fit = fit_adev_model(curve);
    // compare peak sigma contributions of the two Lorentzian components
    double peak1 = 0.0, peak2 = 0.0;
    for (double tau : taus) {
        peak1 = std::max(peak1, analytic_adev(fit.comp1, tau));
        peak2 = std::max(peak2, analytic_adev(fit.comp2, tau));
    }
    const double major = std::max(peak1, peak2);
    const double minor = std::min(peak1, peak2);
    CHECK(minor < 0.05 * major);
    CHECK(major == doctest::Approx(analytic_adev(c1, 2.0 / c1.alpha)).epsilon(0.05));
}

TEST_CASE("pure white-noise curve fits with vanishing Lorentzians") {
    const double k_white = 0.03;
    std::vector<double> taus, sigmas;
    for (double tau = 0.1; tau <= 1e3; tau *= std::pow(10.0, 0.1)) {
        taus.push_back(tau);
        sigmas.push_back(k_white / std::sqrt(tau));
    }
    AdevCurve curve{taus, sigmas, std::vector<std::size_t>(taus.size(), 100)};
    const auto fit = fit_adev_model(curve);
    CHECK(fit.white_k == doctest::Approx(k_white).epsilon(0.05));
    for (double tau : taus) {
        const double white = fit.white_k / std::sqrt(tau);
        CHECK(analytic_adev(fit.comp1, tau) < 0.05 * white);
        CHECK(analytic_adev(fit.comp2, tau) < 0.05 * white);
    }
}

TEST_CASE("degenerate all-zero curve is a fit failure") {
    std::vector<double> taus, sigmas;
    for (double tau = 0.1; tau <= 1e3; tau *= 2.0) {
        taus.push_back(tau);
        sigmas.push_back(0.0);
    }
    AdevCurve curve{taus, sigmas, std::vector<std::size_t>(taus.size(), 1)};
    CHECK_THROWS_AS(fit_adev_model(curve), FitError);
}

TEST_CASE("series and ADEV CSV round trips; fit JSON field names") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "qtel_processes_io";
    fs::create_directories(dir);

    std::vector<double> t = {0.0, 0.5, 1.0};
    std::vector<double> v = {1.25, -0.5, 3.75};
    write_series_csv(dir / "series.csv", t, v);
    const auto [rt, rv] = read_series_csv(dir / "series.csv");
    CHECK(rt == t);
    CHECK(rv == v);

    AdevCurve curve{{1.0, 2.0}, {0.1, 0.2}, {10, 20}};
    write_adev_csv(dir / "adev.csv", curve);
    const auto rc = read_adev_csv(dir / "adev.csv");
    CHECK(rc.taus == curve.taus);
    CHECK(rc.sigmas == curve.sigmas);
    CHECK(rc.counts == curve.counts);

    AdevModelFit fit{{1e-3, 0.1}, {2e-3, 3.0}, 0.05, 1e-4};
    write_fit_json(dir / "fit.json", fit);
    const std::string text = util::read_file(dir / "fit.json");
    for (const char* key : {"\"A1\"", "\"alpha1\"", "\"A2\"", "\"alpha2\"", "\"k\"",
                            "\"residual\""})
        CHECK(text.find(key) != std::string::npos);
    const auto rf = read_fit_json(dir / "fit.json");
    CHECK(rf.comp1.amplitude_A == fit.comp1.amplitude_A);
    CHECK(rf.comp2.alpha == fit.comp2.alpha);
    CHECK(rf.white_k == fit.white_k);
    fs::remove_all(dir);
}
