#include "qtel/correlate.hpp"

#include "qtel/errors.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qtel::correlate {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mi_bits_from_counts(const std::vector<double>& counts, std::size_t nx,
                           std::size_t ny, double total) {
    if (total <= 0.0) return 0.0;
    std::vector<double> px(nx, 0.0), py(ny, 0.0);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            px[i] += counts[i * ny + j];
            py[j] += counts[i * ny + j];
        }
    double mi = 0.0;
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const double c = counts[i * ny + j];
            if (c <= 0.0) continue;
            mi += c / total * std::log2(c * total / (px[i] * py[j]));
        }
    return mi;
}

std::size_t coarse_index(State s) { return s == State::G ? 0 : 1; }

} // namespace

void JointDistribution::validate() const {
    require(!labels_x.empty() && !labels_y.empty(), "JointDistribution: empty labels");
    require(p.size() == labels_x.size() * labels_y.size(),
            "JointDistribution: matrix size mismatch");
    double total = 0.0;
    for (double v : p) {
        require(v >= 0.0, "JointDistribution: negative probability");
        total += v;
    }
    require(std::fabs(total - 1.0) <= 1e-9, "JointDistribution: does not sum to 1");
}

double mutual_information(const JointDistribution& joint) {
    joint.validate();
    const std::size_t nx = joint.labels_x.size();
    const std::size_t ny = joint.labels_y.size();
    return mi_bits_from_counts(joint.p, nx, ny, 1.0);
}

JointDistribution joint_from_shots(std::span<const State> labels_a,
                                   std::span<const State> labels_b, bool coarse) {
    if (labels_a.size() != labels_b.size())
        throw std::invalid_argument("joint_from_shots: length mismatch");
    require(!labels_a.empty(), "joint_from_shots: empty input");

    JointDistribution joint;
    if (coarse) {
        joint.labels_x = {"G", "nG"};
        joint.labels_y = {"G", "nG"};
        std::vector<double> counts(4, 0.0);
        for (std::size_t i = 0; i < labels_a.size(); ++i)
            counts[coarse_index(labels_a[i]) * 2 + coarse_index(labels_b[i])] += 1.0;
        joint.p = counts;
    } else {
        joint.labels_x = {"G", "E", "F"};
        joint.labels_y = {"G", "E", "F"};
        std::vector<double> counts(9, 0.0);
        for (std::size_t i = 0; i < labels_a.size(); ++i)
            counts[static_cast<std::size_t>(labels_a[i]) * 3 +
                   static_cast<std::size_t>(labels_b[i])] += 1.0;
        joint.p = counts;
    }
    const auto total = static_cast<double>(labels_a.size());
    for (double& v : joint.p) v /= total;
    joint.n_samples = labels_a.size();
    return joint;
}

JointDistribution coarsen_to_gbar(const JointDistribution& joint) {
    joint.validate();
    require(joint.labels_x.size() == 3 && joint.labels_y.size() == 3,
            "coarsen_to_gbar: expected a 3x3 joint");
    JointDistribution out;
    out.labels_x = {"G", "nG"};
    out.labels_y = {"G", "nG"};
    out.p.assign(4, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            out.p[(i == 0 ? 0 : 1) * 2 + (j == 0 ? 0 : 1)] += joint.at(i, j);
    out.n_samples = joint.n_samples;
    return out;
}

sync::FoldedSeries time_resolved_mi(std::span<const qubitsim::ShotTrace> traces_a,
                                    std::span<const qubitsim::ShotTrace> traces_b,
                                    std::span<const sync::AlignmentResult> alignments,
                                    double bin_width) {
    require(traces_a.size() == traces_b.size() && traces_a.size() == alignments.size(),
            "time_resolved_mi: trace/alignment count mismatch");
    require(!traces_a.empty(), "time_resolved_mi: no traces");
    const double period = alignments[0].reference_period;
    require(bin_width > 0.0, "time_resolved_mi: bin_width must be > 0");
    const double ratio = period / bin_width;
    const auto n_bins = static_cast<std::size_t>(std::round(ratio));
    require(n_bins >= 1 && std::fabs(ratio - static_cast<double>(n_bins)) <
                               1e-6 * std::max(1.0, ratio),
            "time_resolved_mi: bin_width must divide the period");

    std::vector<std::vector<double>> counts(n_bins, std::vector<double>(4, 0.0));
    std::vector<std::size_t> totals(n_bins, 0);
    for (std::size_t ti = 0; ti < traces_a.size(); ++ti) {
        const auto& a = traces_a[ti];
        const auto& b = traces_b[ti];
        require(a.labels.size() == a.shot_times.size() &&
                    b.labels.size() == b.shot_times.size() &&
                    a.labels.size() == b.labels.size(),
                "time_resolved_mi: traces must be labeled and index paired");
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            const double phase = sync::phase_of(a.shot_times[i], alignments[ti]);
            std::size_t bin = static_cast<std::size_t>(phase / bin_width);
            if (bin >= n_bins) bin = n_bins - 1;
            counts[bin][coarse_index(a.labels[i]) * 2 + coarse_index(b.labels[i])] += 1.0;
            totals[bin] += 1;
        }
    }

    sync::FoldedSeries out;
    out.period = period;
    out.phase_bins.resize(n_bins);
    out.values.resize(n_bins);
    out.counts = totals;
    for (std::size_t j = 0; j < n_bins; ++j) {
        out.phase_bins[j] = (static_cast<double>(j) + 0.5) * bin_width;
        out.values[j] = totals[j] > 0
                            ? mi_bits_from_counts(counts[j], 2, 2,
                                                  static_cast<double>(totals[j]))
                            : kNaN;
    }
    return out;
}

ErrorEventMatrix error_event_matrix(std::span<const std::vector<State>> records_a,
                                    std::span<const std::vector<State>> records_b,
                                    double dt, double interval) {
    require(records_a.size() == records_b.size(),
            "error_event_matrix: record count mismatch");
    require(dt > 0.0, "error_event_matrix: dt must be > 0");
    const double ratio = interval / dt;
    const auto shots_per_window = static_cast<std::size_t>(std::round(ratio));
    if (shots_per_window < 2 ||
        std::fabs(ratio - static_cast<double>(shots_per_window)) > 1e-6 * ratio)
        throw std::invalid_argument(
            "error_event_matrix: interval must be a multiple of the shot spacing "
            "and cover >= 2 shots");

    ErrorEventMatrix matrix;
    matrix.interval = static_cast<double>(shots_per_window) * dt;
    std::array<double, 16> counts{};
    std::size_t n_windows = 0;

    for (std::size_t rec = 0; rec < records_a.size(); ++rec) {
        const auto& a = records_a[rec];
        const auto& b = records_b[rec];
        require(a.size() == b.size(), "error_event_matrix: record length mismatch");
        const std::size_t windows = a.size() / shots_per_window;
        for (std::size_t w = 0; w < windows; ++w) {
            const std::size_t begin = w * shots_per_window;
            const std::size_t end = begin + shots_per_window;
            const std::size_t init =
                coarse_index(a[begin]) * 2 + coarse_index(b[begin]);
            bool flip_a = false, flip_b = false;
            for (std::size_t i = begin + 1; i < end; ++i) {
                flip_a = flip_a || coarse_index(a[i]) != coarse_index(a[i - 1]);
                flip_b = flip_b || coarse_index(b[i]) != coarse_index(b[i - 1]);
            }
            const std::size_t pattern =
                (flip_a ? 2u : 0u) + (flip_b ? 1u : 0u); // --, -x, x-, xx
            counts[init * 4 + pattern] += 1.0;
            ++n_windows;
        }
    }
    require(n_windows > 0, "error_event_matrix: records shorter than the interval");
    for (std::size_t i = 0; i < 16; ++i)
        matrix.p[i] = counts[i] / static_cast<double>(n_windows);
    matrix.n_windows = n_windows;
    return matrix;
}

JointDistribution error_matrix_as_joint(const ErrorEventMatrix& matrix) {
    JointDistribution joint;
    joint.labels_x = {"G-", "Gx", "E-", "Ex"};
    joint.labels_y = {"G-", "Gx", "E-", "Ex"};
    joint.p.assign(16, 0.0);
    for (std::size_t init = 0; init < 4; ++init) {
        const std::size_t ia = init / 2; // qubit A initial, 0 = G
        const std::size_t ib = init % 2;
        for (std::size_t pattern = 0; pattern < 4; ++pattern) {
            const std::size_t fa = pattern / 2;
            const std::size_t fb = pattern % 2;
            const std::size_t x = ia * 2 + fa; // (initial, flip) of qubit A
            const std::size_t y = ib * 2 + fb;
            joint.p[x * 4 + y] += matrix.p[init * 4 + pattern];
        }
    }
    joint.n_samples = matrix.n_windows;
    return joint;
}

MiCurve mi_vs_interval(std::span<const std::vector<State>> records_a,
                       std::span<const std::vector<State>> records_b, double dt,
                       std::span<const double> intervals) {
    require(!intervals.empty(), "mi_vs_interval: no intervals");
    MiCurve curve;
    for (double interval : intervals) {
        const ErrorEventMatrix matrix =
            error_event_matrix(records_a, records_b, dt, interval);
        curve.intervals.push_back(matrix.interval);
        curve.mi_bits.push_back(mutual_information(error_matrix_as_joint(matrix)));
    }
    curve.argmax = static_cast<std::size_t>(
        std::max_element(curve.mi_bits.begin(), curve.mi_bits.end()) -
        curve.mi_bits.begin());
    return curve;
}

double mi_null_bound(std::size_t n_labels_x, std::size_t n_labels_y,
                     std::size_t n_samples) {
    require(n_samples > 0, "mi_null_bound: n_samples must be > 0");
    return 3.0 * static_cast<double>(n_labels_x) * static_cast<double>(n_labels_y) /
           (2.0 * static_cast<double>(n_samples) * std::numbers::ln2);
}

double permutation_null_quantile(std::span<const State> labels_a,
                                 std::span<const State> labels_b, double quantile,
                                 int n_permutations, std::uint64_t seed, bool coarse) {
    require(labels_a.size() == labels_b.size() && !labels_a.empty(),
            "permutation_null_quantile: bad inputs");
    require(n_permutations >= 1 && quantile >= 0.0 && quantile <= 1.0,
            "permutation_null_quantile: bad parameters");

    std::vector<State> shuffled(labels_b.begin(), labels_b.end());
    util::Rng rng = util::make_rng(seed);
    std::vector<double> mis(n_permutations);
    for (int p = 0; p < n_permutations; ++p) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        mis[p] = mutual_information(joint_from_shots(labels_a, shuffled, coarse));
    }
    std::sort(mis.begin(), mis.end());
    const double pos = quantile * static_cast<double>(mis.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, mis.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return mis[lo] * (1.0 - frac) + mis[hi] * frac;
}

void write_joint_json(const std::filesystem::path& path, const JointDistribution& joint) {
    nlohmann::ordered_json j;
    j["labels_x"] = joint.labels_x;
    j["labels_y"] = joint.labels_y;
    nlohmann::ordered_json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < joint.labels_x.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::json::array();
        for (std::size_t jj = 0; jj < joint.labels_y.size(); ++jj)
            row.push_back(joint.at(i, jj));
        rows.push_back(row);
    }
    j["p"] = rows;
    j["n_samples"] = joint.n_samples;
    j["mi_bits"] = mutual_information(joint);
    util::atomic_write_file(path, j.dump(2) + "\n");
}

void write_error_matrix_json(const std::filesystem::path& path,
                             const ErrorEventMatrix& matrix) {
    nlohmann::ordered_json j;
    j["interval_s"] = matrix.interval;
    j["initial_states"] = {"GG", "GE", "EG", "EE"};
    j["error_patterns"] = {"--", "-x", "x-", "xx"};
    nlohmann::ordered_json rows = nlohmann::json::array();
    for (std::size_t init = 0; init < 4; ++init) {
        nlohmann::ordered_json row = nlohmann::json::array();
        for (std::size_t pattern = 0; pattern < 4; ++pattern)
            row.push_back(matrix.p[init * 4 + pattern]);
        rows.push_back(row);
    }
    j["p"] = rows;
    j["n_windows"] = matrix.n_windows;
    j["mi_bits"] = mutual_information(error_matrix_as_joint(matrix));
    util::atomic_write_file(path, j.dump(2) + "\n");
}

void write_mi_curve_csv(const std::filesystem::path& path, const MiCurve& curve) {
    std::string out = "interval_s,mi_bits\n";
    for (std::size_t i = 0; i < curve.intervals.size(); ++i) {
        out += util::format_double(curve.intervals[i]);
        out += ',';
        out += util::format_double(curve.mi_bits[i]);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

} // namespace qtel::correlate
