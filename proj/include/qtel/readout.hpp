#pragma once

#include "qtel/state.hpp"

#include <array>
#include <complex>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace qtel::readout {

/// CODATA h/k_B in kelvin per hertz; the single source for thermometry.
inline constexpr double kPlanckOverBoltzmann = 4.799243e-11;

/// Affine map applied to raw IQ before thresholding: v' = R * (v - offset),
/// with R orthogonal, det(R) = +1, and the largest-variance axis mapped to I.
struct PcaRotation {
    std::array<std::array<double, 2>, 2> matrix{{{1.0, 0.0}, {0.0, 1.0}}};
    std::array<double, 2> offset{0.0, 0.0};

    std::complex<double> apply(std::complex<double> z) const {
        const double x = z.real() - offset[0];
        const double y = z.imag() - offset[1];
        return {matrix[0][0] * x + matrix[0][1] * y,
                matrix[1][0] * x + matrix[1][1] * y};
    }
};

struct CalibrationResult {
    PcaRotation rotation;
    std::vector<double> means;   // per-state I, strictly increasing
    std::vector<double> sigmas;  // per-state widths
    std::vector<double> weights; // mixture weights, sum to 1
    std::vector<double> thresholds; // midpoints of adjacent means
};

struct Populations {
    std::array<double, 3> p{1.0, 0.0, 0.0}; // P_G, P_E, P_F
};

struct ErrorBudget {
    double sep_up = 0.0;
    double sep_down = 0.0;
    double flip_up_bound = 0.0;
    double flip_down_bound = 0.0;
};

struct BathEstimate {
    double gamma_ex = 0.0; // radiative coupling, s^-1
    double gamma_in = 0.0; // internal loss, s^-1
    double n_ex = 0.0;     // bath occupation
    double eta = 1.0;      // quantum efficiency
    double n_measured = 0.0; // eta * n_ex
};

/// Center the cloud and rotate so the largest-variance axis is I.
std::pair<std::vector<std::complex<double>>, PcaRotation>
pca_rotate(std::span<const std::complex<double>> iq);

/// Maximum-likelihood 1D Gaussian mixture (EM, k-means++ init, 20 restarts).
/// Components are sorted by mean; thresholds sit at midpoints. The result's
/// rotation is identity; `calibrate` fills it in.
CalibrationResult fit_gaussian_mixture(std::span<const double> samples_i,
                                       int n_components);

/// Full calibration: PCA, sign convention (heaviest component leftmost, so
/// G sits at the lowest I), then the mixture fit on I.
CalibrationResult calibrate(std::span<const std::complex<double>> iq, int n_components);

/// Threshold classification; a value exactly at a threshold goes to the
/// lower state.
std::vector<State> classify(std::span<const double> samples_i,
                            const CalibrationResult& cal);
std::vector<State> classify_iq(std::span<const std::complex<double>> iq,
                               const CalibrationResult& cal);

/// Separation errors eps = erfc(mu_bar / (sqrt(2) sigma)) / 2 with
/// mu_bar = |mu_E - mu_G| / 2; the pair uses (sigma_G, sigma_E).
std::pair<double, double> separation_errors(const CalibrationResult& cal);

/// Upper bounds on state-flip readout errors: Gamma * T_readout.
std::pair<double, double> flip_error_bounds(double gamma_up, double gamma_down,
                                            double t_readout);

/// Free-evolution rates Gamma_up = P_th/T1, Gamma_down = (1-P_th)/T1.
std::pair<double, double> free_evolution_rates(double p_th, double t1);

/// Boltzmann inversion T = (h/k_B) * f / ln(p_lower / p_upper), kelvin.
double effective_temperature(double p_upper, double p_lower, double transition_freq_hz);

/// Invert P_E = G_ex n / (G_ex (2n+1) + G_in) for the bath occupation.
double required_bath_occupation(double p_e, double gamma_ex, double gamma_in);

/// Forward evaluation of the same relation (round-trip checks).
double excited_probability_from_bath(double n_ex, double gamma_ex, double gamma_in);

/// Occupation seen through a chain of quantum efficiency eta.
double measured_occupation(double n_ex, double eta);

/// Mixture weights renormalized into state populations.
Populations populations_from_calibration(const CalibrationResult& cal);

void write_calibration_json(const std::filesystem::path& path,
                            const CalibrationResult& cal);
CalibrationResult read_calibration_json(const std::filesystem::path& path);

} // namespace qtel::readout
