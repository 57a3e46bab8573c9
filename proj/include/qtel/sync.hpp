#pragma once

#include "qtel/qubitsim.hpp"

#include <complex>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace qtel::sync {

struct AlignmentResult {
    double lag = 0.0;              // seconds in [0, reference_period)
    double peak_correlation = 0.0; // normalized, in [-1, 1]
    double reference_period = 0.0; // seconds
    bool low_confidence = false;   // peak_correlation < 0.2
};

/// Phase of an absolute timestamp under an alignment: (t - lag) mod period.
double phase_of(double t, const AlignmentResult& alignment);

/// Per-phase-bin statistic within one reference period. Empty bins carry
/// NaN values and zero counts, never zero values.
struct FoldedSeries {
    double period = 0.0;
    double smoothing_window = 0.0;    // seconds, 0 = no smoothing
    std::vector<double> phase_bins;   // bin centers, seconds in [0, period)
    std::vector<double> values;
    std::vector<std::size_t> counts;
};

struct Spectrum {
    std::vector<double> freqs; // Hz, non-negative, increasing
    std::vector<double> asd;   // input units per sqrt(Hz)
};

/// Circular lag maximizing the normalized cross-correlation between the
/// trace's folded average and the one-period reference. FFT based.
AlignmentResult align_to_reference(const qubitsim::VibrationTrace& trace,
                                   const qubitsim::VibrationTrace& reference);

/// Excitation probability P(label != G) per phase bin. Smoothing is a
/// centered circular boxcar applied to the binned counts.
FoldedSeries fold_shots(const qubitsim::ShotTrace& shots,
                        const AlignmentResult& alignment, double bin_width,
                        double smoothing_window = 0.0);

/// Multi-trace folding; per-trace partial sums are merged in trace order.
FoldedSeries fold_shots(std::span<const qubitsim::ShotTrace> traces,
                        std::span<const AlignmentResult> alignments,
                        double bin_width, double smoothing_window = 0.0);

/// Welch-averaged one-sided amplitude spectral density (Hann window, 50%
/// overlap, 8 segments by default). The series mean is removed first.
Spectrum asd(std::span<const double> series, double sample_rate, int n_segments = 8);

/// Per-bin |mean| of the coherent pulse normalized by the global |mean|
/// (transmission ratio), and per-bin complex variance normalized by the
/// global variance and rescaled so the global value maps to the vacuum
/// level 1/2 (background noise, photon units).
std::pair<FoldedSeries, FoldedSeries> time_resolved_microwave_stats(
    std::span<const qubitsim::ShotTrace> traces,
    std::span<const AlignmentResult> alignments, double bin_width);

void write_folded_csv(const std::filesystem::path& path, const FoldedSeries& series);
FoldedSeries read_folded_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum);
void write_alignment_json(const std::filesystem::path& path, const AlignmentResult& a);
AlignmentResult read_alignment_json(const std::filesystem::path& path);

} // namespace qtel::sync
