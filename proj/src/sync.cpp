#include "qtel/sync.hpp"

#include "qtel/errors.hpp"
#include "qtel/util/fft.hpp"
#include "qtel/util/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qtel::sync {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLowConfidence = 0.2;

struct BinAccumulator {
    std::vector<double> num;   // statistic numerator per bin
    std::vector<std::size_t> cnt;

    explicit BinAccumulator(std::size_t n) : num(n, 0.0), cnt(n, 0) {}
};

std::size_t bin_count(double period, double bin_width, double tolerance) {
    require(bin_width > 0.0, "fold: bin_width must be > 0");
    const double ratio = period / bin_width;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::fabs(period - rounded * bin_width) > tolerance)
        throw std::invalid_argument("fold: bin_width must divide the period");
    return static_cast<std::size_t>(rounded);
}

double min_shot_gap(const qubitsim::ShotTrace& shots) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < shots.shot_times.size(); ++i)
        gap = std::min(gap, shots.shot_times[i] - shots.shot_times[i - 1]);
    return std::isfinite(gap) ? gap : 0.0;
}

FoldedSeries finish_ratio_series(const BinAccumulator& acc, double period,
                                 double bin_width, double smoothing_window) {
    const std::size_t n = acc.cnt.size();
    FoldedSeries out;
    out.period = period;
    out.smoothing_window = smoothing_window;
    out.phase_bins.resize(n);
    out.values.resize(n);
    out.counts = acc.cnt;
    for (std::size_t j = 0; j < n; ++j)
        out.phase_bins[j] = (static_cast<double>(j) + 0.5) * bin_width;

    std::vector<double> num = acc.num;
    std::vector<double> den(n);
    for (std::size_t j = 0; j < n; ++j) den[j] = static_cast<double>(acc.cnt[j]);

    if (smoothing_window > 0.0) {
        // circular centered boxcar on the raw counts, then take the ratio
        const auto half = static_cast<long>(std::round(smoothing_window / (2.0 * bin_width)));
        std::vector<double> snum(n, 0.0), sden(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (long o = -half; o <= half; ++o) {
                const std::size_t jj =
                    static_cast<std::size_t>((static_cast<long>(j) + o +
                                              static_cast<long>(n) * 4) %
                                             static_cast<long>(n));
                snum[j] += num[jj];
                sden[j] += den[jj];
            }
        }
        num = std::move(snum);
        den = std::move(sden);
    }
    for (std::size_t j = 0; j < n; ++j)
        out.values[j] = den[j] > 0.0 ? num[j] / den[j] : kNaN;
    return out;
}

} // namespace

double phase_of(double t, const AlignmentResult& alignment) {
    double phase = std::fmod(t - alignment.lag, alignment.reference_period);
    if (phase < 0.0) phase += alignment.reference_period;
    return phase;
}

AlignmentResult align_to_reference(const qubitsim::VibrationTrace& trace,
                                   const qubitsim::VibrationTrace& reference) {
    require(reference.sample_rate > 0.0 && !reference.samples.empty(),
            "align_to_reference: empty reference");
    if (std::fabs(trace.sample_rate - reference.sample_rate) >
        1e-9 * reference.sample_rate)
        throw std::invalid_argument("align_to_reference: sample-rate mismatch");
    const std::size_t n = reference.samples.size();
    require(trace.samples.size() >= 2 * n,
            "align_to_reference: trace must cover >= 2 reference periods");

    // fold the trace into one period (full periods only)
    const std::size_t periods = trace.samples.size() / n;
    std::vector<double> folded(n, 0.0);
    for (std::size_t p = 0; p < periods; ++p)
        for (std::size_t i = 0; i < n; ++i) folded[i] += trace.samples[p * n + i];
    for (double& v : folded) v /= static_cast<double>(periods);

    // normalized circular cross-correlation against the reference
    std::vector<double> a = folded, b(reference.samples);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] -= ma;
        b[i] -= mb;
        va += a[i] * a[i];
        vb += b[i] * b[i];
    }
    const double norm = std::sqrt(va * vb);

    AlignmentResult result;
    result.reference_period = static_cast<double>(n) / reference.sample_rate;
    if (norm <= 0.0) {
        result.lag = 0.0;
        result.peak_correlation = 0.0;
        result.low_confidence = true;
        return result;
    }

    const std::vector<double> corr = util::circular_cross_correlation(a, b);
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (corr[k] > corr[best]) best = k;

    result.lag = static_cast<double>(best) / reference.sample_rate;
    result.peak_correlation = corr[best] / norm;
    result.low_confidence = result.peak_correlation < kLowConfidence;
    return result;
}

FoldedSeries fold_shots(const qubitsim::ShotTrace& shots,
                        const AlignmentResult& alignment, double bin_width,
                        double smoothing_window) {
    return fold_shots(std::span<const qubitsim::ShotTrace>(&shots, 1),
                      std::span<const AlignmentResult>(&alignment, 1), bin_width,
                      smoothing_window);
}

FoldedSeries fold_shots(std::span<const qubitsim::ShotTrace> traces,
                        std::span<const AlignmentResult> alignments,
                        double bin_width, double smoothing_window) {
    require(traces.size() == alignments.size(),
            "fold_shots: traces/alignments length mismatch");
    require(!traces.empty(), "fold_shots: no traces");
    const double period = alignments[0].reference_period;
    double tolerance = 0.0;
    for (const auto& t : traces) tolerance = std::max(tolerance, min_shot_gap(t));
    const std::size_t n = bin_count(period, bin_width, std::max(tolerance, 1e-12));

    BinAccumulator acc(n);
    for (std::size_t ti = 0; ti < traces.size(); ++ti) {
        const auto& shots = traces[ti];
        require(shots.labels.size() == shots.shot_times.size(),
                "fold_shots: shots must be labeled");
        for (std::size_t i = 0; i < shots.shot_times.size(); ++i) {
            const double phase = phase_of(shots.shot_times[i], alignments[ti]);
            std::size_t j = static_cast<std::size_t>(phase / bin_width);
            if (j >= n) j = n - 1;
            acc.num[j] += shots.labels[i] != State::G ? 1.0 : 0.0;
            acc.cnt[j] += 1;
        }
    }
    return finish_ratio_series(acc, period, bin_width, smoothing_window);
}

Spectrum asd(std::span<const double> series, double sample_rate, int n_segments) {
    require(sample_rate > 0.0, "asd: sample_rate must be > 0");
    require(n_segments >= 1, "asd: n_segments must be >= 1");
    if (series.size() < 16) throw std::invalid_argument("asd: series too short (< 16)");

    std::size_t seg_len = 2 * series.size() / static_cast<std::size_t>(n_segments + 1);
    if (seg_len < 16) seg_len = std::min<std::size_t>(series.size(), 16);
    const std::size_t hop = std::max<std::size_t>(seg_len / 2, 1);

    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(series.size());

    std::vector<double> window(seg_len);
    double window_power = 0.0;
    for (std::size_t i = 0; i < seg_len; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                          static_cast<double>(i) /
                                          static_cast<double>(seg_len)));
        window_power += window[i] * window[i];
    }

    const std::size_t n_bins = seg_len / 2 + 1;
    std::vector<double> psd(n_bins, 0.0);
    std::vector<double> buf(seg_len);
    std::size_t segments = 0;
    for (std::size_t start = 0; start + seg_len <= series.size(); start += hop) {
        for (std::size_t i = 0; i < seg_len; ++i)
            buf[i] = (series[start + i] - mean) * window[i];
        const auto spec = util::rfft(buf);
        for (std::size_t k = 0; k < n_bins; ++k) psd[k] += std::norm(spec[k]);
        ++segments;
    }

    Spectrum out;
    out.freqs.resize(n_bins);
    out.asd.resize(n_bins);
    const double scale = 1.0 / (sample_rate * window_power * static_cast<double>(segments));
    for (std::size_t k = 0; k < n_bins; ++k) {
        out.freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(seg_len);
        double p = psd[k] * scale;
        const bool interior = k != 0 && !(seg_len % 2 == 0 && k == n_bins - 1);
        if (interior) p *= 2.0; // one-sided
        out.asd[k] = std::sqrt(p);
    }
    return out;
}

std::pair<FoldedSeries, FoldedSeries> time_resolved_microwave_stats(
    std::span<const qubitsim::ShotTrace> traces,
    std::span<const AlignmentResult> alignments, double bin_width) {
    require(traces.size() == alignments.size(),
            "time_resolved_microwave_stats: traces/alignments length mismatch");
    require(!traces.empty(), "time_resolved_microwave_stats: no traces");
    const double period = alignments[0].reference_period;
    double tolerance = 0.0;
    for (const auto& t : traces) tolerance = std::max(tolerance, min_shot_gap(t));
    const std::size_t n = bin_count(period, bin_width, std::max(tolerance, 1e-12));

    std::vector<std::complex<double>> sum(n, 0.0);
    std::vector<double> sum_sq(n, 0.0); // sum of |z|^2
    std::vector<std::size_t> cnt(n, 0);
    std::complex<double> gsum = 0.0;
    double gsum_sq = 0.0;
    std::size_t gcnt = 0;

    for (std::size_t ti = 0; ti < traces.size(); ++ti) {
        const auto& shots = traces[ti];
        for (std::size_t i = 0; i < shots.shot_times.size(); ++i) {
            const double phase = phase_of(shots.shot_times[i], alignments[ti]);
            std::size_t j = static_cast<std::size_t>(phase / bin_width);
            if (j >= n) j = n - 1;
            const std::complex<double> z = shots.iq[i];
            sum[j] += z;
            sum_sq[j] += std::norm(z);
            cnt[j] += 1;
            gsum += z;
            gsum_sq += std::norm(z);
            gcnt += 1;
        }
    }
    require(gcnt >= 2, "time_resolved_microwave_stats: no shots");

    const std::complex<double> gmean = gsum / static_cast<double>(gcnt);
    const double gvar =
        (gsum_sq - std::norm(gmean) * static_cast<double>(gcnt)) /
        static_cast<double>(gcnt - 1);
    const double gabs = std::abs(gmean);
    require(gabs > 0.0 && gvar > 0.0,
            "time_resolved_microwave_stats: degenerate pulse statistics");

    FoldedSeries trans, noise;
    for (FoldedSeries* s : {&trans, &noise}) {
        s->period = period;
        s->smoothing_window = 0.0;
        s->phase_bins.resize(n);
        s->values.assign(n, kNaN);
        s->counts.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j)
            s->phase_bins[j] = (static_cast<double>(j) + 0.5) * bin_width;
    }
    for (std::size_t j = 0; j < n; ++j) {
        trans.counts[j] = noise.counts[j] = cnt[j];
        if (cnt[j] == 0) continue;
        const std::complex<double> mean = sum[j] / static_cast<double>(cnt[j]);
        trans.values[j] = std::abs(mean) / gabs;
        if (cnt[j] >= 2) {
            const double var =
                (sum_sq[j] - std::norm(mean) * static_cast<double>(cnt[j])) /
                static_cast<double>(cnt[j] - 1);
            noise.values[j] = 0.5 * var / gvar; // global value maps to the vacuum 1/2
        }
    }
    return {std::move(trans), std::move(noise)};
}

void write_folded_csv(const std::filesystem::path& path, const FoldedSeries& series) {
    std::string out = "phase_s,value,count\n";
    for (std::size_t j = 0; j < series.phase_bins.size(); ++j) {
        out += util::format_double(series.phase_bins[j]);
        out += ',';
        out += std::isnan(series.values[j]) ? "" : util::format_double(series.values[j]);
        out += ',';
        out += std::to_string(series.counts[j]);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

FoldedSeries read_folded_csv(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path, "phase_s,value,count");
    FoldedSeries series;
    for (const auto& row : rows) {
        if (row.size() != 3) throw DataError("folded CSV: bad row in " + path.string());
        series.phase_bins.push_back(util::parse_double(row[0]));
        series.values.push_back(row[1].empty() ? kNaN : util::parse_double(row[1]));
        series.counts.push_back(static_cast<std::size_t>(util::parse_double(row[2])));
    }
    if (series.phase_bins.size() >= 2)
        series.period = series.phase_bins.back() + series.phase_bins.front();
    return series;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum) {
    std::string out = "freq_hz,asd\n";
    for (std::size_t k = 0; k < spectrum.freqs.size(); ++k) {
        out += util::format_double(spectrum.freqs[k]);
        out += ',';
        out += util::format_double(spectrum.asd[k]);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

void write_alignment_json(const std::filesystem::path& path, const AlignmentResult& a) {
    nlohmann::ordered_json j;
    j["lag"] = a.lag;
    j["peak_correlation"] = a.peak_correlation;
    j["reference_period"] = a.reference_period;
    j["low_confidence"] = a.low_confidence;
    util::atomic_write_file(path, j.dump(2) + "\n");
}

AlignmentResult read_alignment_json(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(util::read_file(path));
    AlignmentResult a;
    a.lag = j.at("lag").get<double>();
    a.peak_correlation = j.at("peak_correlation").get<double>();
    a.reference_period = j.at("reference_period").get<double>();
    a.low_confidence = j.at("low_confidence").get<bool>();
    return a;
}

} // namespace qtel::sync
