#pragma once

#include "qtel/state.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace qtel::qubitsim {

struct VibrationTrace {
    double sample_rate = 0.0; // Hz
    double start_time = 0.0;  // seconds
    std::vector<double> samples; // acceleration, m/s^2
};

/// Damped ring-down emitted once per period at the shock time.
struct ShockTemplate {
    double amplitude = 0.0;     // m/s^2
    double ring_freq_hz = 0.0;  // Hz
    double damping_rate = 1.0;  // s^-1
};

struct VibrationSpec {
    double period = 1.0 / 1.4;          // pulse-tube fundamental, seconds
    std::vector<double> harmonic_amps;  // m/s^2, harmonic n at (n+1)/period
    std::vector<double> harmonic_phases; // radians, same length as amps
    double shock_time_in_period = 0.0;
    ShockTemplate shock;
    double noise_floor = 0.0; // m/s^2/sqrt(Hz)

    void validate() const;
};

/// Periodic modulation of the detailed-balance parameters: at each spike
/// onset n_eff (gamma_eff) jumps to baseline * boost and relaxes back with
/// rate spike_decay. Onsets repeat every vibration period.
struct RateProfile {
    double baseline_gamma_eff = 1.0; // s^-1
    double baseline_n_eff = 0.0;
    std::vector<double> spike_times_in_period; // seconds within [0, period)
    double n_eff_boost = 1.0;     // multiplicative, >= 1
    double gamma_eff_boost = 1.0; // multiplicative, >= 1
    double spike_decay = 1.0;     // s^-1

    void validate() const;

    double n_boost_factor_at(double t, double period) const;
    double gamma_boost_factor_at(double t, double period) const;
    double n_eff_at(double t, double period) const;
    double gamma_eff_at(double t, double period) const;
    double gamma_up_at(double t, double period) const;   // Gamma_eff * n_eff
    double gamma_down_at(double t, double period) const; // Gamma_eff * (n_eff + 1)

    /// Safe upper bounds over all t for the thinning sampler.
    double max_gamma_up(double period) const;
    double max_gamma_down(double period) const;
    double max_spike_factor(double period, double boost) const;
};

/// Stationary periodic boost factor: 1 + (boost-1) * sum over all past
/// onsets (spike times repeated with `period`) of exp(-decay * elapsed).
double spike_factor(std::span<const double> spike_times_in_period, double period,
                    double boost, double decay, double t);

/// Piecewise-constant state trajectory. states[i] holds over
/// [jump_times[i-1], jump_times[i]) with jump_times[-1] := 0; the final
/// state extends to t_end. states.size() == jump_times.size() + 1.
struct StatePath {
    std::vector<double> jump_times;
    std::vector<State> states;
    double t_end = 0.0;

    State state_at(double t) const;
};

/// Sequential O(1)-amortized sampling of a StatePath.
class PathCursor {
  public:
    explicit PathCursor(const StatePath& path) : path_(&path) {}
    /// t must be non-decreasing across calls.
    State state_at(double t);

  private:
    const StatePath* path_;
    std::size_t seg_ = 0;
};

struct ReadoutModel {
    std::array<std::complex<double>, 3> mean_iq{}; // cluster centers for G, E, F
    double sigma = 1.0;          // per-quadrature Gaussian width, same for all states
    double flip_down_prob = 0.0; // E -> G flip during one readout
    double flip_up_prob = 0.0;   // G -> E flip during one readout

    void validate() const;
};

struct ShotTrace {
    int qubit_id = 0;
    std::vector<double> shot_times;
    std::vector<std::complex<double>> iq;
    std::vector<State> labels; // empty until classified
};

/// Optional third level: E->F is driven like an excitation (scaled by the
/// n_eff boost factor), F->E like a decay (scaled by the gamma_eff factor).
struct ThreeLevelRates {
    double gamma_ef = 0.0; // s^-1
    double gamma_fe = 1.0; // s^-1
};

VibrationTrace synth_vibration(const VibrationSpec& spec, double duration,
                               double sample_rate, std::uint64_t seed);

/// Exact sampling of the time-inhomogeneous two-state (optionally
/// three-state) Markov process by thinning against the rate upper bound.
StatePath simulate_jump_trajectory(const RateProfile& profile, double vib_period,
                                   double duration, std::uint64_t seed,
                                   const std::optional<ThreeLevelRates>& three_level = {});

ShotTrace simulate_readout(const StatePath& path, std::span<const double> shot_times,
                           const ReadoutModel& model, std::uint64_t seed,
                           int qubit_id = 0);

enum class ScheduleMode { sparse, continuous };

/// Uniform schedule starting at 0: sparse models ~1 ms thermometry shots,
/// continuous the ~3 us successive monitoring.
std::vector<double> make_shot_schedule(ScheduleMode mode, double interval,
                                       std::size_t count);

// --- file formats ---

/// Little-endian float64 samples plus a JSON sidecar (suffix ".json") with
/// sample_rate, start_time, n.
void write_vibration_bin(const std::filesystem::path& path, const VibrationTrace& trace);
VibrationTrace read_vibration_bin(const std::filesystem::path& path);

void write_vibration_csv(const std::filesystem::path& path, const VibrationTrace& trace);

/// CSV `trace_id,shot_index,t,qubit,I,Q` over traces[trace_id][qubit].
void write_shots_csv(const std::filesystem::path& path,
                     const std::vector<std::vector<ShotTrace>>& traces);
std::vector<std::vector<ShotTrace>> read_shots_csv(const std::filesystem::path& path);

/// CSV `trace_id,qubit,t_start,t_end,state`, one row per path segment.
void write_paths_csv(const std::filesystem::path& path,
                     const std::vector<std::vector<StatePath>>& traces);
std::vector<std::vector<StatePath>> read_paths_csv(const std::filesystem::path& path);

} // namespace qtel::qubitsim
