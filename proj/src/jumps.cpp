#include "qtel/jumps.hpp"

#include "qtel/errors.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/optim.hpp"
#include "qtel/util/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qtel::jumps {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinEventsPerFit = 50;

double circular_distance(double a, double b, double period) {
    double d = std::fabs(a - b);
    d = std::fmod(d, period);
    return std::min(d, period - d);
}

// Truncated-exponential MLE: solve 1/lambda - T/(e^{lambda T}-1) = mean.
struct TruncatedMle {
    double rate = 0.0;
    double stderr_ = 0.0;
    bool ok = false;
};

TruncatedMle truncated_exp_mle(double mean, double t_max, std::size_t n) {
    TruncatedMle out;
    if (n < 2 || mean <= 0.0 || mean >= 0.5 * t_max) return out;
    const auto h = [&](double lambda) {
        return 1.0 / lambda - t_max / std::expm1(lambda * t_max) - mean;
    };
    const double lo = 1e-9 / mean;
    const double hi = 1e9 / mean;
    if (h(lo) <= 0.0 || h(hi) >= 0.0) return out;
    const double lambda = util::bisect(h, lo, hi);
    // Fisher information per sample: 1/l^2 - T^2 / (2 sinh(l T / 2))^2
    const double sh = 2.0 * std::sinh(0.5 * lambda * t_max);
    const double info = 1.0 / (lambda * lambda) - t_max * t_max / (sh * sh);
    if (info <= 0.0) return out;
    out.rate = lambda;
    out.stderr_ = 1.0 / std::sqrt(static_cast<double>(n) * info);
    out.ok = true;
    return out;
}

} // namespace

std::vector<double> moving_average(std::span<const double> values, int window) {
    require(window >= 1, "moving_average: window must be >= 1");
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= static_cast<std::size_t>(window)) acc -= values[i - window];
        const std::size_t used = std::min<std::size_t>(i + 1, window);
        out[i] = acc / static_cast<double>(used);
    }
    return out;
}

std::vector<DwellEvent> extract_dwells(std::span<const State> labels, double dt,
                                       int trace_id) {
    require(dt > 0.0, "extract_dwells: dt must be > 0");
    std::vector<DwellEvent> events;
    if (labels.empty()) return events;

    // run-length encode the binarized record
    std::vector<std::pair<std::size_t, std::size_t>> runs; // (start, length)
    std::vector<bool> excited;
    std::size_t start = 0;
    bool cur = labels[0] != State::G;
    for (std::size_t i = 1; i <= labels.size(); ++i) {
        const bool x = i < labels.size() ? labels[i] != State::G : !cur;
        if (x != cur) {
            runs.emplace_back(start, i - start);
            excited.push_back(cur);
            start = i;
            cur = x;
        }
    }
    if (runs.size() <= 2) return events; // everything censored

    events.reserve(runs.size() - 2);
    for (std::size_t r = 1; r + 1 < runs.size(); ++r) {
        DwellEvent ev;
        ev.state = excited[r] ? State::E : State::G;
        ev.dwell = static_cast<double>(runs[r].second) * dt;
        ev.event_time =
            (static_cast<double>(runs[r].first) + static_cast<double>(runs[r].second) / 2.0) * dt;
        ev.trace_id = trace_id;
        events.push_back(ev);
    }
    return events;
}

std::vector<DwellEvent> dwells_from_path(const qubitsim::StatePath& path, int trace_id) {
    std::vector<DwellEvent> events;
    const std::size_t n_seg = path.states.size();
    if (n_seg <= 2) return events;
    events.reserve(n_seg - 2);
    for (std::size_t seg = 1; seg + 1 < n_seg; ++seg) {
        const double t0 = path.jump_times[seg - 1];
        const double t1 = path.jump_times[seg];
        DwellEvent ev;
        ev.state = path.states[seg] == State::G ? State::G : State::E;
        ev.dwell = t1 - t0;
        ev.event_time = 0.5 * (t0 + t1);
        ev.trace_id = trace_id;
        events.push_back(ev);
    }
    return events;
}

std::vector<DwellEvent> fold_events(std::span<const DwellEvent> events,
                                    std::span<const sync::AlignmentResult> alignments) {
    std::vector<DwellEvent> folded;
    folded.reserve(events.size());
    for (const DwellEvent& ev : events) {
        const auto idx = static_cast<std::size_t>(ev.trace_id);
        if (idx >= alignments.size())
            throw std::invalid_argument("fold_events: trace without alignment");
        DwellEvent out = ev;
        out.event_time = sync::phase_of(ev.event_time, alignments[idx]);
        folded.push_back(out);
    }
    return folded;
}

DwellHistogram time_resolved_dwell_histogram(std::span<const DwellEvent> folded_events,
                                             State state, double phase_center,
                                             double bin_width, double period,
                                             int n_dwell_bins, bool normalize_first_bin) {
    require(period > 0.0 && bin_width > 0.0 && n_dwell_bins >= 2,
            "time_resolved_dwell_histogram: bad parameters");

    std::vector<double> dwells;
    for (const DwellEvent& ev : folded_events) {
        if (ev.state != state) continue;
        if (circular_distance(ev.event_time, phase_center, period) <= bin_width / 2.0)
            dwells.push_back(ev.dwell);
    }
    if (dwells.size() < kMinEventsPerFit)
        throw InsufficientDataError(
            "time_resolved_dwell_histogram: fewer than 50 events in window");

    const auto [mn, mx] = std::minmax_element(dwells.begin(), dwells.end());
    const double lo = *mn;
    const double hi = std::max(*mx, lo * (1.0 + 1e-12));

    DwellHistogram hist;
    hist.n_events = dwells.size();
    hist.bin_edges.resize(n_dwell_bins + 1);
    hist.counts.assign(n_dwell_bins, 0.0);
    const double log_lo = std::log(lo);
    const double log_step = (std::log(hi) - log_lo) / n_dwell_bins;
    for (int b = 0; b <= n_dwell_bins; ++b)
        hist.bin_edges[b] = std::exp(log_lo + b * log_step);
    for (double d : dwells) {
        auto b = static_cast<std::size_t>((std::log(d) - log_lo) / log_step);
        if (b >= static_cast<std::size_t>(n_dwell_bins)) b = n_dwell_bins - 1;
        hist.counts[b] += 1.0;
    }
    if (normalize_first_bin) {
        double first = 0.0;
        for (double c : hist.counts)
            if (c > 0.0) {
                first = c;
                break;
            }
        hist.normalized.resize(hist.counts.size());
        for (std::size_t b = 0; b < hist.counts.size(); ++b)
            hist.normalized[b] = first > 0.0 ? hist.counts[b] / first : 0.0;
    }
    return hist;
}

ExpFitResult fit_exponential_rate(std::span<const double> dwells) {
    if (dwells.size() < 2)
        throw InsufficientDataError("fit_exponential_rate: need >= 2 dwells");
    std::vector<double> sorted(dwells.begin(), dwells.end());
    std::sort(sorted.begin(), sorted.end());
    require(sorted.front() > 0.0, "fit_exponential_rate: dwells must be > 0");
    if (sorted.front() == sorted.back())
        throw FitError("fit_exponential_rate: all dwells equal (degenerate)");

    std::vector<double> prefix(sorted.size() + 1, 0.0);
    for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];

    // right-truncation grid; keep the cut with minimum relative stderr
    constexpr double kPercentiles[] = {50.0, 60.0, 70.0, 80.0, 90.0, 95.0};
    ExpFitResult best;
    double best_rel = std::numeric_limits<double>::infinity();
    for (double pct : kPercentiles) {
        const auto idx = static_cast<std::size_t>(
            pct / 100.0 * static_cast<double>(sorted.size() - 1));
        const double t_max = sorted[idx];
        const std::size_t n_used = idx + 1;
        const double mean = prefix[n_used] / static_cast<double>(n_used);
        const TruncatedMle mle = truncated_exp_mle(mean, t_max, n_used);
        if (!mle.ok) continue;
        const double rel = mle.stderr_ / mle.rate;
        if (rel < best_rel) {
            best_rel = rel;
            best.rate = mle.rate;
            best.stderr_ = mle.stderr_;
            best.fit_region = {0.0, t_max};
            best.n_used = n_used;
        }
    }
    if (best.n_used == 0)
        throw FitError("fit_exponential_rate: no truncation point admits a solution");
    return best;
}

std::pair<double, double> rates_to_effective(double gamma_up, double gamma_down) {
    require(gamma_up >= 0.0, "rates_to_effective: gamma_up must be >= 0");
    if (!(gamma_down > gamma_up))
        throw InvertedBathError(
            "rates_to_effective: gamma_up >= gamma_down (population inversion)");
    const double gamma_eff = gamma_down - gamma_up;
    return {gamma_eff, gamma_up / gamma_eff};
}

namespace {

// Events of one state sorted by folded phase, with binary-search windowing.
struct PhaseIndex {
    std::vector<double> phases;
    std::vector<double> dwells;

    void build(std::span<const DwellEvent> events, State state) {
        std::vector<std::pair<double, double>> tmp;
        for (const DwellEvent& ev : events)
            if (ev.state == state) tmp.emplace_back(ev.event_time, ev.dwell);
        std::sort(tmp.begin(), tmp.end());
        phases.reserve(tmp.size());
        dwells.reserve(tmp.size());
        for (const auto& [p, d] : tmp) {
            phases.push_back(p);
            dwells.push_back(d);
        }
    }

    std::vector<double> window(double center, double half_width, double period) const {
        std::vector<double> out;
        const auto take = [&](double lo, double hi) {
            const auto i0 = static_cast<std::size_t>(
                std::lower_bound(phases.begin(), phases.end(), lo) - phases.begin());
            const auto i1 = static_cast<std::size_t>(
                std::upper_bound(phases.begin(), phases.end(), hi) - phases.begin());
            for (std::size_t i = i0; i < i1; ++i) out.push_back(dwells[i]);
        };
        double lo = center - half_width;
        double hi = center + half_width;
        if (2.0 * half_width >= period) {
            take(0.0, period);
            return out;
        }
        if (lo < 0.0) {
            take(0.0, hi);
            take(lo + period, period);
        } else if (hi > period) {
            take(lo, period);
            take(0.0, hi - period);
        } else {
            take(lo, hi);
        }
        return out;
    }
};

} // namespace

std::vector<RateEstimate> time_resolved_rates(std::span<const DwellEvent> folded_events,
                                              double period) {
    require(period > 0.0, "time_resolved_rates: period must be > 0");

    PhaseIndex g_index, e_index;
    g_index.build(folded_events, State::G);
    e_index.build(folded_events, State::E);
    if (g_index.phases.empty() || e_index.phases.empty())
        throw InsufficientDataError("time_resolved_rates: missing G or E events");

    // pilot pass: 10 uniform phase bins of mean G dwell seed the step size
    constexpr std::size_t kPilotBins = 10;
    std::vector<double> pilot_sum(kPilotBins, 0.0);
    std::vector<std::size_t> pilot_cnt(kPilotBins, 0);
    for (std::size_t i = 0; i < g_index.phases.size(); ++i) {
        auto b = static_cast<std::size_t>(g_index.phases[i] / period *
                                          static_cast<double>(kPilotBins));
        if (b >= kPilotBins) b = kPilotBins - 1;
        pilot_sum[b] += g_index.dwells[i];
        pilot_cnt[b] += 1;
    }
    const double global_mean =
        util::mean(std::span<const double>(g_index.dwells.data(), g_index.dwells.size()));
    const auto pilot_mean = [&](double phase) {
        auto b = static_cast<std::size_t>(phase / period * static_cast<double>(kPilotBins));
        if (b >= kPilotBins) b = kPilotBins - 1;
        return pilot_cnt[b] > 0 ? pilot_sum[b] / static_cast<double>(pilot_cnt[b])
                                : global_mean;
    };

    std::vector<RateEstimate> estimates;
    double phase = 0.0;
    while (phase < period * (1.0 - 1e-9)) {
        double width = std::clamp(pilot_mean(phase), period * 1e-5, period / 4.0);
        if (phase + width > period) width = period - phase;
        const double center = phase + width / 2.0;

        // widen up to 4x around the same center when a state lacks events
        ExpFitResult g_fit{}, e_fit{};
        bool ok = false;
        for (double widen : {1.0, 2.0, 4.0}) {
            const auto g_dwells = g_index.window(center, widen * width / 2.0, period);
            const auto e_dwells = e_index.window(center, widen * width / 2.0, period);
            if (g_dwells.size() < kMinEventsPerFit || e_dwells.size() < kMinEventsPerFit)
                continue;
            try {
                g_fit = fit_exponential_rate(g_dwells);
                e_fit = fit_exponential_rate(e_dwells);
                ok = true;
            } catch (const FitError&) {
                ok = false;
            }
            if (ok) break;
        }
        if (ok) {
            RateEstimate est;
            est.phase_time = center;
            est.gamma_up = g_fit.rate; // leaving G happens at Gamma_up
            est.gamma_up_err = g_fit.stderr_;
            est.gamma_down = e_fit.rate;
            est.gamma_down_err = e_fit.stderr_;
            est.fit_region = g_fit.fit_region;
            if (est.gamma_down > est.gamma_up) {
                const auto [geff, neff] = rates_to_effective(est.gamma_up, est.gamma_down);
                est.gamma_eff = geff;
                est.n_eff = neff;
            } else {
                est.gamma_eff = kNaN;
                est.n_eff = kNaN;
            }
            estimates.push_back(est);
        }
        phase += width;
    }
    return estimates;
}

namespace {

// stderr of one parameter from the numeric Jacobian at the solution
double parameter_stderr(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    const std::vector<double>& x, double ssr, std::size_t param) {
    const std::size_t n = x.size();
    const std::vector<double> r0 = residuals(x);
    const std::size_t m = r0.size();
    if (m <= n) return 0.0;
    std::vector<double> jac(m * n);
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-7 * std::max(1.0, std::fabs(x[j]));
        std::vector<double> xp = x;
        xp[j] += h;
        const auto rp = residuals(xp);
        for (std::size_t i = 0; i < m; ++i) jac[j * m + i] = (rp[i] - r0[i]) / h;
    }
    std::vector<double> jtj(n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += jac[j * m + i] * jac[k * m + i];
            jtj[j * n + k] = s;
        }
    // invert via Gauss-Jordan
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t rr = col + 1; rr < n; ++rr)
            if (std::fabs(jtj[rr * n + col]) > std::fabs(jtj[piv * n + col])) piv = rr;
        if (jtj[piv * n + col] == 0.0) return 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(jtj[piv * n + c], jtj[col * n + c]);
            std::swap(inv[piv * n + c], inv[col * n + c]);
        }
        const double d = jtj[col * n + col];
        for (std::size_t c = 0; c < n; ++c) {
            jtj[col * n + c] /= d;
            inv[col * n + c] /= d;
        }
        for (std::size_t rr = 0; rr < n; ++rr) {
            if (rr == col) continue;
            const double f = jtj[rr * n + col];
            for (std::size_t c = 0; c < n; ++c) {
                jtj[rr * n + c] -= f * jtj[col * n + c];
                inv[rr * n + c] -= f * inv[col * n + c];
            }
        }
    }
    const double s2 = ssr / static_cast<double>(m - n);
    const double var = inv[param * n + param] * s2;
    return var > 0.0 ? std::sqrt(var) : 0.0;
}

} // namespace

CoherenceFit fit_decay(std::span<const double> times, std::span<const double> probs) {
    require(times.size() == probs.size(), "fit_decay: length mismatch");
    require(times.size() >= 5, "fit_decay: need >= 5 points");
    if (*std::max_element(probs.begin(), probs.end()) ==
        *std::min_element(probs.begin(), probs.end()))
        throw FitError("fit_decay: constant series");

    const double span = times.back() - times.front();
    require(span > 0.0, "fit_decay: zero time span");

    // parameters {a, log T1, c}
    const auto residuals = [&](const std::vector<double>& p) {
        std::vector<double> r(times.size());
        const double t1 = std::exp(p[1]);
        for (std::size_t i = 0; i < times.size(); ++i)
            r[i] = p[0] * std::exp(-times[i] / t1) + p[2] - probs[i];
        return r;
    };

    util::LmResult best;
    best.ssr = std::numeric_limits<double>::infinity();
    for (double t0 : {span / 5.0, span, span / 20.0}) {
        std::vector<double> p0 = {probs.front() - probs.back(), std::log(t0),
                                  probs.back()};
        const auto fit = util::levenberg_marquardt(residuals, p0);
        if (fit.converged && fit.ssr < best.ssr) best = fit;
    }
    if (!std::isfinite(best.ssr)) throw FitError("fit_decay: no convergence");

    CoherenceFit out;
    out.kind = CoherenceFit::Kind::T1;
    out.amplitude = best.x[0];
    out.time_constant = std::exp(best.x[1]);
    out.offset = best.x[2];
    out.time_constant_err =
        out.time_constant * parameter_stderr(residuals, best.x, best.ssr, 1);
    return out;
}

CoherenceFit fit_ramsey(std::span<const double> times, std::span<const double> probs) {
    require(times.size() == probs.size(), "fit_ramsey: length mismatch");
    require(times.size() >= 10, "fit_ramsey: need >= 10 points");
    if (*std::max_element(probs.begin(), probs.end()) ==
        *std::min_element(probs.begin(), probs.end()))
        throw FitError("fit_ramsey: constant series");

    const double span = times.back() - times.front();
    require(span > 0.0, "fit_ramsey: zero time span");
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < times.size(); ++i)
        min_gap = std::min(min_gap, times[i] - times[i - 1]);
    require(min_gap > 0.0, "fit_ramsey: times must be strictly increasing");

    // periodogram on a frequency grid up to Nyquist of the closest spacing
    const double y_mean = util::mean(probs);
    const double f_max = 0.5 / min_gap;
    const double df = 1.0 / (4.0 * span);
    double best_f = 0.0, best_p = 0.0;
    std::vector<double> powers;
    for (double f = df; f <= f_max; f += df) {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double arg = 2.0 * std::numbers::pi * f * times[i];
            re += (probs[i] - y_mean) * std::cos(arg);
            im += (probs[i] - y_mean) * std::sin(arg);
        }
        const double p = re * re + im * im;
        powers.push_back(p);
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    const double median_p =
        util::percentile(std::span<const double>(powers.data(), powers.size()), 50.0);

    if (best_p < 5.0 * median_p || best_f * span < 1.0) {
        // no dominant oscillation (or less than one full cycle in the span):
        // degenerate to the pure decay
        CoherenceFit decay = fit_decay(times, probs);
        decay.kind = CoherenceFit::Kind::Ramsey;
        decay.frequency = 0.0;
        return decay;
    }

    // parameters {a, log T2, f, phi, c}
    const auto residuals = [&](const std::vector<double>& p) {
        std::vector<double> r(times.size());
        const double t2 = std::exp(p[1]);
        for (std::size_t i = 0; i < times.size(); ++i)
            r[i] = p[0] * std::exp(-times[i] / t2) *
                       std::cos(2.0 * std::numbers::pi * p[2] * times[i] + p[3]) +
                   p[4] - probs[i];
        return r;
    };

    double y_lo = probs[0], y_hi = probs[0];
    for (double y : probs) {
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
    }
    util::LmResult best;
    best.ssr = std::numeric_limits<double>::infinity();
    for (double phi0 : {0.0, std::numbers::pi / 2.0, std::numbers::pi,
                        3.0 * std::numbers::pi / 2.0}) {
        std::vector<double> p0 = {(y_hi - y_lo) / 2.0, std::log(span / 2.0), best_f,
                                  phi0, y_mean};
        const auto fit = util::levenberg_marquardt(residuals, p0);
        if (fit.converged && fit.ssr < best.ssr) best = fit;
    }
    if (!std::isfinite(best.ssr)) throw FitError("fit_ramsey: no convergence");

    CoherenceFit out;
    out.kind = CoherenceFit::Kind::Ramsey;
    out.amplitude = best.x[0];
    out.time_constant = std::exp(best.x[1]);
    out.frequency = std::fabs(best.x[2]);
    out.offset = best.x[4];
    out.time_constant_err =
        out.time_constant * parameter_stderr(residuals, best.x, best.ssr, 1);
    return out;
}

void write_dwells_csv(const std::filesystem::path& path,
                      std::span<const DwellEvent> events) {
    std::string out = "trace_id,state,event_time,dwell\n";
    for (const DwellEvent& ev : events) {
        out += std::to_string(ev.trace_id);
        out += ',';
        out += to_char(ev.state);
        out += ',';
        out += util::format_double(ev.event_time);
        out += ',';
        out += util::format_double(ev.dwell);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

std::vector<DwellEvent> read_dwells_csv(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path, "trace_id,state,event_time,dwell");
    std::vector<DwellEvent> events;
    events.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != 4 || row[1].size() != 1)
            throw DataError("dwells CSV: bad row in " + path.string());
        DwellEvent ev;
        ev.trace_id = std::stoi(row[0]);
        ev.state = state_from_char(row[1][0]);
        ev.event_time = util::parse_double(row[2]);
        ev.dwell = util::parse_double(row[3]);
        events.push_back(ev);
    }
    return events;
}

void write_rates_csv(const std::filesystem::path& path,
                     std::span<const RateEstimate> estimates) {
    std::string out = "phase,gamma_up,gu_err,gamma_down,gd_err,gamma_eff,n_eff\n";
    for (const RateEstimate& est : estimates) {
        out += util::format_double(est.phase_time);
        out += ',';
        out += util::format_double(est.gamma_up);
        out += ',';
        out += util::format_double(est.gamma_up_err);
        out += ',';
        out += util::format_double(est.gamma_down);
        out += ',';
        out += util::format_double(est.gamma_down_err);
        out += ',';
        out += util::format_double(est.gamma_eff);
        out += ',';
        out += util::format_double(est.n_eff);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

} // namespace qtel::jumps
