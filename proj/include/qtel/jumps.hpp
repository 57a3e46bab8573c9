#pragma once

#include "qtel/qubitsim.hpp"
#include "qtel/sync.hpp"

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace qtel::jumps {

/// One maximal run in a binary (G vs not-G) record. event_time is the run
/// center; the first and last runs of a trace are censored and never
/// become events.
struct DwellEvent {
    State state = State::G; // G or E, where E stands for "not G"
    double event_time = 0.0; // seconds (absolute, or phase once folded)
    double dwell = 0.0;      // seconds
    int trace_id = 0;
};

struct ExpFitResult {
    double rate = 0.0;    // s^-1
    double stderr_ = 0.0; // asymptotic MLE standard error
    std::pair<double, double> fit_region{0.0, 0.0}; // dwell range used
    std::size_t n_used = 0;
};

struct RateEstimate {
    double phase_time = 0.0; // window center within the period
    double gamma_up = 0.0;
    double gamma_up_err = 0.0;
    double gamma_down = 0.0;
    double gamma_down_err = 0.0;
    double gamma_eff = 0.0; // NaN when the detailed balance is inverted
    double n_eff = 0.0;
    std::pair<double, double> fit_region{0.0, 0.0}; // G-dwell truncation used
};

struct CoherenceFit {
    enum class Kind { T1, Ramsey, Echo };
    Kind kind = Kind::T1;
    double time_constant = 0.0;
    double time_constant_err = 0.0;
    double frequency = 0.0; // Hz, Ramsey only
    double offset = 0.0;
    double amplitude = 0.0;
};

/// Causal boxcar; the leading edge averages the samples available so far.
std::vector<double> moving_average(std::span<const double> values, int window = 2);

/// Maximal runs of the binarized labels; first and last runs are censored.
std::vector<DwellEvent> extract_dwells(std::span<const State> labels, double dt,
                                       int trace_id);

/// Interior segments of a simulated path as dwell events (F counts as E).
std::vector<DwellEvent> dwells_from_path(const qubitsim::StatePath& path, int trace_id);

/// Replace absolute event times by the phase within the reference period,
/// using each trace's own alignment (indexed by trace_id).
std::vector<DwellEvent> fold_events(std::span<const DwellEvent> events,
                                    std::span<const sync::AlignmentResult> alignments);

struct DwellHistogram {
    std::vector<double> bin_edges;  // log spaced, size = counts.size() + 1
    std::vector<double> counts;
    std::vector<double> normalized; // counts / first-bin count, when requested
    std::size_t n_events = 0;
};

/// Histogram of dwells whose folded event time falls within
/// phase_center +- bin_width/2 (circular). Fewer than 50 events is an
/// insufficient-data error: the caller widens the bin.
DwellHistogram time_resolved_dwell_histogram(std::span<const DwellEvent> folded_events,
                                             State state, double phase_center,
                                             double bin_width, double period,
                                             int n_dwell_bins = 30,
                                             bool normalize_first_bin = false);

/// Truncated-exponential maximum likelihood on the dwell sample. The right
/// truncation point is chosen on a {50,60,...,90,95} percentile grid by
/// minimizing the relative standard error of the fitted rate.
ExpFitResult fit_exponential_rate(std::span<const double> dwells);

/// Detailed balance: gamma_eff = gd - gu, n_eff = gu / (gd - gu).
std::pair<double, double> rates_to_effective(double gamma_up, double gamma_down);

/// Adaptive phase walk: the step equals the local mean G dwell
/// (bootstrapped from a 10-bin pilot pass); both dwell histograms are
/// fitted per step, widening the window up to 4x when data is scarce.
std::vector<RateEstimate> time_resolved_rates(std::span<const DwellEvent> folded_events,
                                              double period);

/// Least squares a*exp(-t/T1) + c.
CoherenceFit fit_decay(std::span<const double> times, std::span<const double> probs);

/// Damped cosine a*exp(-t/T2)*cos(2*pi*f*t + phi) + c; the frequency is
/// seeded from the dominant periodogram bin. Falls back to a pure decay
/// when no oscillation is present.
CoherenceFit fit_ramsey(std::span<const double> times, std::span<const double> probs);

void write_dwells_csv(const std::filesystem::path& path,
                      std::span<const DwellEvent> events);
std::vector<DwellEvent> read_dwells_csv(const std::filesystem::path& path);
void write_rates_csv(const std::filesystem::path& path,
                     std::span<const RateEstimate> estimates);

} // namespace qtel::jumps
