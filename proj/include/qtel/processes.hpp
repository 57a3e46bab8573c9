#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace qtel::processes {

/// Two-level telegraph process. gamma0 is the 0 -> 1 transition rate,
/// gamma1 the 1 -> 0 rate, both in s^-1.
struct TelegraphParams {
    double gamma0 = 1.0;
    double gamma1 = 1.0;

    void validate() const;
    /// Stationary probability of being in state 1: gamma0 / (gamma0 + gamma1).
    double stationary_occupancy() const { return gamma0 / (gamma0 + gamma1); }
};

/// Piecewise-constant process whose level is redrawn from N(0, sigma^2) at
/// Poisson(gamma) event times.
struct PoissonResetParams {
    double gamma = 1.0;
    double sigma = 1.0;

    void validate() const;
};

/// Parameters of the shared Lorentzian statistics: autocorrelation
/// A*exp(-alpha*|tau|), PSD 2*A*alpha/(alpha^2 + omega^2).
/// Telegraph maps in as {A = g0*g1/(g0+g1)^2, alpha = g0+g1},
/// Poisson reset as {A = sigma^2, alpha = gamma}.
struct LorentzianNoise {
    double amplitude_A = 0.0;
    double alpha = 1.0;

    void validate() const;
    static LorentzianNoise from_telegraph(const TelegraphParams& p);
    static LorentzianNoise from_poisson_reset(const PoissonResetParams& p);
};

/// Piecewise-constant sample path: segment i holds `levels[i]` over
/// [segment_starts[i], segment_starts[i+1]), the last one up to t_end.
struct LevelPath {
    std::vector<double> segment_starts; // first entry is 0
    std::vector<double> levels;
    double t_end = 0.0;

    double value_at(double t) const;
    /// Samples at k*dt for k = 0 .. floor(t_end/dt)-1.
    std::vector<double> sample(double dt) const;
    /// Time average of the path over [0, t_end].
    double time_average() const;
};

struct AdevCurve {
    std::vector<double> taus;   // strictly increasing, seconds
    std::vector<double> sigmas; // ADEV in units of x
    std::vector<std::size_t> counts; // overlapping pairs averaged per tau
};

struct AdevModelFit {
    LorentzianNoise comp1; // canonical ordering: comp1.alpha <= comp2.alpha
    LorentzianNoise comp2;
    double white_k = 0.0;  // coefficient of sqrt(1/tau)
    double residual = 0.0; // achieved log-space loss
};

LevelPath simulate_telegraph(const TelegraphParams& params, double duration,
                             std::uint64_t seed);

LevelPath simulate_poisson_reset(const PoissonResetParams& params, double duration,
                                 std::uint64_t seed);

/// c_xx(tau) = A * exp(-alpha * |tau|)  (constant offset omitted).
double analytic_autocorrelation(const LorentzianNoise& noise, double tau);

/// S_xx(omega) = 2 * A * alpha / (alpha^2 + omega^2), omega in rad/s.
double analytic_psd(const LorentzianNoise& noise, double omega);

/// Closed-form Allan deviation
///   sigma_x(tau) = sqrt(A * (4 e^{-a t} - e^{-2 a t} + 2 a t - 3)) / (tau * alpha).
/// A series branch below alpha*tau = 1e-3 avoids catastrophic cancellation.
double analytic_adev(const LorentzianNoise& noise, double tau);

namespace detail {
/// Kernel f(u) = 4 e^{-u} - e^{-2u} + 2u - 3 with sigma = sqrt(A f(u)) / u.
/// Exposed so the branch-continuity contract can be checked directly.
double adev_kernel_closed(double u);
double adev_kernel_series(double u);
inline constexpr double kAdevSeriesThreshold = 1e-3;
} // namespace detail

/// Overlapping-estimator ADEV of a uniformly sampled series at the requested
/// averaging times. Each tau must be an integer multiple of dt; taus with
/// fewer than one overlapping pair are dropped and reported via `omitted`.
AdevCurve empirical_adev(std::span<const double> series, double dt,
                         std::span<const double> taus,
                         std::vector<double>* omitted = nullptr);

/// Log-spaced tau grid (points_per_decade per decade) snapped to integer
/// multiples of dt, deduplicated.
std::vector<double> log_tau_grid(double tau_min, double tau_max,
                                 int points_per_decade, double dt);

/// Fit sigma(tau) = adev(A1,a1) + adev(A2,a2) + k*sqrt(1/tau) by unweighted
/// least squares on log(sigma), with bounded multi-start (8 restarts).
AdevModelFit fit_adev_model(const AdevCurve& curve);

/// Model prediction for a fit result at one tau.
double adev_model_value(const AdevModelFit& fit, double tau);

// --- file formats ---

void write_series_csv(const std::filesystem::path& path,
                      std::span<const double> times, std::span<const double> values);
std::pair<std::vector<double>, std::vector<double>>
read_series_csv(const std::filesystem::path& path);

void write_adev_csv(const std::filesystem::path& path, const AdevCurve& curve);
AdevCurve read_adev_csv(const std::filesystem::path& path);

/// JSON record with fields A1, alpha1, A2, alpha2, k, residual.
void write_fit_json(const std::filesystem::path& path, const AdevModelFit& fit);
AdevModelFit read_fit_json(const std::filesystem::path& path);

} // namespace qtel::processes
