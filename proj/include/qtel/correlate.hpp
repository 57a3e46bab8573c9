#pragma once

#include "qtel/qubitsim.hpp"
#include "qtel/sync.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace qtel::correlate {

struct JointDistribution {
    std::vector<std::string> labels_x;
    std::vector<std::string> labels_y;
    std::vector<double> p; // row-major |x| * |y|, sums to 1
    std::size_t n_samples = 0;

    double at(std::size_t i, std::size_t j) const { return p[i * labels_y.size() + j]; }
    void validate() const;
};

/// Mutual information in bits; zero-probability cells contribute nothing
/// (the p log p -> 0 limit).
double mutual_information(const JointDistribution& joint);

/// Plug-in empirical joint of index-paired labels. With coarse = true the
/// labels are collapsed to {G, nG}; otherwise the full {G,E,F} grid is used.
JointDistribution joint_from_shots(std::span<const State> labels_a,
                                   std::span<const State> labels_b,
                                   bool coarse = true);

/// Collapse a {G,E,F} x {G,E,F} joint onto {G, nG} x {G, nG}.
JointDistribution coarsen_to_gbar(const JointDistribution& joint);

/// MI computed separately within each phase bin of the paired shots.
sync::FoldedSeries time_resolved_mi(std::span<const qubitsim::ShotTrace> traces_a,
                                    std::span<const qubitsim::ShotTrace> traces_b,
                                    std::span<const sync::AlignmentResult> alignments,
                                    double bin_width);

/// 16-event distribution over non-overlapping windows of a continuous
/// 2-qubit record: initial state {GG,GE,EG,EE} x error pattern
/// {--, -x, x-, xx}, where "x" is at least one label change within the
/// window. Stored row-major: p[initial * 4 + pattern].
struct ErrorEventMatrix {
    double interval = 0.0;
    std::array<double, 16> p{};
    std::size_t n_windows = 0;
};

ErrorEventMatrix error_event_matrix(
    std::span<const std::vector<State>> records_a,
    std::span<const std::vector<State>> records_b, double dt, double interval);

/// The 16-event matrix re-indexed as a joint of X = (initial_a, flip_a) and
/// Y = (initial_b, flip_b), each over {G-, Gx, E-, Ex}.
JointDistribution error_matrix_as_joint(const ErrorEventMatrix& matrix);

struct MiCurve {
    std::vector<double> intervals;
    std::vector<double> mi_bits;
    std::size_t argmax = 0;
};

MiCurve mi_vs_interval(std::span<const std::vector<State>> records_a,
                       std::span<const std::vector<State>> records_b, double dt,
                       std::span<const double> intervals);

/// Miller-Madow-scale bound used as the analytic null band:
/// 3 |X||Y| / (2 n ln 2) bits.
double mi_null_bound(std::size_t n_labels_x, std::size_t n_labels_y,
                     std::size_t n_samples);

/// Quantile of the plug-in MI under random re-pairings of the two label
/// streams (the permutation null).
double permutation_null_quantile(std::span<const State> labels_a,
                                 std::span<const State> labels_b, double quantile,
                                 int n_permutations, std::uint64_t seed,
                                 bool coarse = true);

void write_joint_json(const std::filesystem::path& path, const JointDistribution& joint);
void write_error_matrix_json(const std::filesystem::path& path,
                             const ErrorEventMatrix& matrix);
void write_mi_curve_csv(const std::filesystem::path& path, const MiCurve& curve);

} // namespace qtel::correlate
