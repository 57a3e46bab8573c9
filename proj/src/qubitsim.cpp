#include "qtel/qubitsim.hpp"

#include "qtel/errors.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qtel::qubitsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

void VibrationSpec::validate() const {
    require(std::isfinite(period) && period > 0.0, "VibrationSpec: period must be > 0");
    require(harmonic_phases.size() == harmonic_amps.size(),
            "VibrationSpec: amps/phases length mismatch");
    require(shock_time_in_period >= 0.0 && shock_time_in_period < period,
            "VibrationSpec: shock time outside [0, period)");
    require(noise_floor >= 0.0, "VibrationSpec: noise floor must be >= 0");
    require(shock.damping_rate > 0.0, "VibrationSpec: shock damping must be > 0");
}

void RateProfile::validate() const {
    require(std::isfinite(baseline_gamma_eff) && baseline_gamma_eff > 0.0,
            "RateProfile: baseline_gamma_eff must be > 0");
    require(std::isfinite(baseline_n_eff) && baseline_n_eff >= 0.0,
            "RateProfile: baseline_n_eff must be >= 0");
    require(n_eff_boost >= 1.0, "RateProfile: n_eff_boost must be >= 1");
    require(gamma_eff_boost >= 1.0, "RateProfile: gamma_eff_boost must be >= 1");
    require(spike_decay > 0.0, "RateProfile: spike_decay must be > 0");
}

double spike_factor(std::span<const double> spike_times_in_period, double period,
                    double boost, double decay, double t) {
    if (boost == 1.0 || spike_times_in_period.empty()) return 1.0;
    // Sum over the infinite train of past onsets: geometric series in
    // exp(-decay*period), so the modulation is exactly periodic.
    const double geo = -std::expm1(-decay * period); // 1 - e^{-decay*period}
    double sum = 0.0;
    for (double s : spike_times_in_period) {
        double elapsed = std::fmod(t - s, period);
        if (elapsed < 0.0) elapsed += period;
        sum += std::exp(-decay * elapsed) / geo;
    }
    return 1.0 + (boost - 1.0) * sum;
}

double RateProfile::n_boost_factor_at(double t, double period) const {
    return spike_factor(spike_times_in_period, period, n_eff_boost, spike_decay, t);
}

double RateProfile::gamma_boost_factor_at(double t, double period) const {
    return spike_factor(spike_times_in_period, period, gamma_eff_boost, spike_decay, t);
}

double RateProfile::n_eff_at(double t, double period) const {
    return baseline_n_eff * n_boost_factor_at(t, period);
}

double RateProfile::gamma_eff_at(double t, double period) const {
    return baseline_gamma_eff * gamma_boost_factor_at(t, period);
}

double RateProfile::gamma_up_at(double t, double period) const {
    return gamma_eff_at(t, period) * n_eff_at(t, period);
}

double RateProfile::gamma_down_at(double t, double period) const {
    return gamma_eff_at(t, period) * (n_eff_at(t, period) + 1.0);
}

double RateProfile::max_spike_factor(double period, double boost) const {
    if (boost == 1.0 || spike_times_in_period.empty()) return 1.0;
    const double geo = -std::expm1(-spike_decay * period);
    return 1.0 + (boost - 1.0) * static_cast<double>(spike_times_in_period.size()) / geo;
}

double RateProfile::max_gamma_up(double period) const {
    return baseline_gamma_eff * max_spike_factor(period, gamma_eff_boost) *
           baseline_n_eff * max_spike_factor(period, n_eff_boost);
}

double RateProfile::max_gamma_down(double period) const {
    return baseline_gamma_eff * max_spike_factor(period, gamma_eff_boost) *
           (baseline_n_eff * max_spike_factor(period, n_eff_boost) + 1.0);
}

State StatePath::state_at(double t) const {
    if (states.empty() || t < 0.0 || t > t_end)
        throw std::out_of_range("StatePath::state_at: t outside path");
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return states[static_cast<std::size_t>(it - jump_times.begin())];
}

State PathCursor::state_at(double t) {
    if (t < 0.0 || t > path_->t_end)
        throw std::out_of_range("PathCursor::state_at: t outside path");
    while (seg_ < path_->jump_times.size() && path_->jump_times[seg_] <= t) ++seg_;
    return path_->states[seg_];
}

void ReadoutModel::validate() const {
    require(std::isfinite(sigma) && sigma > 0.0, "ReadoutModel: sigma must be > 0");
    require(flip_down_prob >= 0.0 && flip_down_prob < 1.0,
            "ReadoutModel: flip_down_prob outside [0,1)");
    require(flip_up_prob >= 0.0 && flip_up_prob < 1.0,
            "ReadoutModel: flip_up_prob outside [0,1)");
}

VibrationTrace synth_vibration(const VibrationSpec& spec, double duration,
                               double sample_rate, std::uint64_t seed) {
    spec.validate();
    require(duration >= spec.period, "synth_vibration: duration must cover one period");
    require(sample_rate > 0.0, "synth_vibration: sample_rate must be > 0");
    const double highest =
        static_cast<double>(spec.harmonic_amps.size()) / spec.period;
    if (sample_rate < 4.0 * highest)
        throw std::invalid_argument(
            "synth_vibration: sample_rate below 4x highest harmonic (aliasing)");

    util::Rng rng = util::make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double noise_sigma = spec.noise_floor * std::sqrt(sample_rate / 2.0);

    VibrationTrace trace;
    trace.sample_rate = sample_rate;
    trace.start_time = 0.0;
    const auto n = static_cast<std::size_t>(duration * sample_rate);
    trace.samples.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double v = 0.0;
        for (std::size_t h = 0; h < spec.harmonic_amps.size(); ++h) {
            v += spec.harmonic_amps[h] *
                 std::sin(kTwoPi * static_cast<double>(h + 1) * t / spec.period +
                          spec.harmonic_phases[h]);
        }
        if (spec.shock.amplitude != 0.0) {
            // ring-down from the onset in this period and the previous one
            double elapsed = std::fmod(t - spec.shock_time_in_period, spec.period);
            if (elapsed < 0.0) elapsed += spec.period;
            for (int back = 0; back < 2; ++back) {
                const double dt_on = elapsed + back * spec.period;
                v += spec.shock.amplitude * std::exp(-spec.shock.damping_rate * dt_on) *
                     std::sin(kTwoPi * spec.shock.ring_freq_hz * dt_on);
            }
        }
        if (noise_sigma > 0.0) v += noise_sigma * gauss(rng);
        trace.samples[i] = v;
    }
    return trace;
}

StatePath simulate_jump_trajectory(const RateProfile& profile, double vib_period,
                                   double duration, std::uint64_t seed,
                                   const std::optional<ThreeLevelRates>& three_level) {
    profile.validate();
    require(std::isfinite(duration) && duration > 0.0,
            "simulate_jump_trajectory: duration must be > 0");
    require(vib_period > 0.0, "simulate_jump_trajectory: period must be > 0");
    if (three_level) {
        require(three_level->gamma_ef >= 0.0 && three_level->gamma_fe > 0.0,
                "simulate_jump_trajectory: bad three-level rates");
    }

    const double max_nf = profile.max_spike_factor(vib_period, profile.n_eff_boost);
    const double max_gf = profile.max_spike_factor(vib_period, profile.gamma_eff_boost);
    const double up_bound = profile.max_gamma_up(vib_period);
    const double down_bound = profile.max_gamma_down(vib_period);
    const double ef_bound = three_level ? three_level->gamma_ef * max_nf : 0.0;
    const double fe_bound = three_level ? three_level->gamma_fe * max_gf : 0.0;

    util::Rng rng = util::make_rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // initial state from the instantaneous stationary law at t = 0
    State state;
    {
        const double up0 = profile.gamma_up_at(0.0, vib_period);
        const double down0 = profile.gamma_down_at(0.0, vib_period);
        double w_g = 1.0;
        double w_e = up0 / down0;
        double w_f = 0.0;
        if (three_level && three_level->gamma_ef > 0.0) {
            w_f = w_e * (three_level->gamma_ef * profile.n_boost_factor_at(0.0, vib_period)) /
                  (three_level->gamma_fe * profile.gamma_boost_factor_at(0.0, vib_period));
        }
        const double u = uni(rng) * (w_g + w_e + w_f);
        state = u < w_g ? State::G : (u < w_g + w_e ? State::E : State::F);
    }

    StatePath path;
    path.t_end = duration;
    path.states.push_back(state);

    double t = 0.0;
    while (true) {
        double bound = 0.0;
        switch (state) {
            case State::G: bound = up_bound; break;
            case State::E: bound = down_bound + ef_bound; break;
            case State::F: bound = fe_bound; break;
        }
        if (bound <= 0.0) break; // absorbing (e.g. n_eff = 0 and state G)

        std::exponential_distribution<double> wait(bound);
        t += wait(rng);
        if (t >= duration) break;

        double r1 = 0.0, r2 = 0.0;
        State target1 = State::G, target2 = State::G;
        switch (state) {
            case State::G:
                r1 = profile.gamma_up_at(t, vib_period);
                target1 = State::E;
                break;
            case State::E:
                r1 = profile.gamma_down_at(t, vib_period);
                target1 = State::G;
                if (three_level) {
                    r2 = three_level->gamma_ef * profile.n_boost_factor_at(t, vib_period);
                    target2 = State::F;
                }
                break;
            case State::F:
                r1 = three_level->gamma_fe * profile.gamma_boost_factor_at(t, vib_period);
                target1 = State::E;
                break;
        }
        if (r1 + r2 > bound * (1.0 + 1e-9))
            throw std::logic_error("simulate_jump_trajectory: rate exceeded thinning bound");

        const double u = uni(rng) * bound;
        if (u < r1) {
            state = target1;
        } else if (u < r1 + r2) {
            state = target2;
        } else {
            continue; // thinned candidate, no jump
        }
        path.jump_times.push_back(t);
        path.states.push_back(state);
    }
    return path;
}

ShotTrace simulate_readout(const StatePath& path, std::span<const double> shot_times,
                           const ReadoutModel& model, std::uint64_t seed, int qubit_id) {
    model.validate();
    for (std::size_t i = 1; i < shot_times.size(); ++i)
        require(shot_times[i] > shot_times[i - 1],
                "simulate_readout: shot times must be strictly increasing");

    util::Rng rng = util::make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    ShotTrace trace;
    trace.qubit_id = qubit_id;
    trace.shot_times.assign(shot_times.begin(), shot_times.end());
    trace.iq.reserve(shot_times.size());

    PathCursor cursor(path);
    for (double t : shot_times) {
        State s = cursor.state_at(t); // throws out_of_range if t outside path
        // state flip during the readout happens before emission, so the
        // emitted cluster is the flipped one
        if (s == State::G && model.flip_up_prob > 0.0 && uni(rng) < model.flip_up_prob)
            s = State::E;
        else if (s == State::E && model.flip_down_prob > 0.0 &&
                 uni(rng) < model.flip_down_prob)
            s = State::G;
        const std::complex<double> noise(gauss(rng), gauss(rng));
        trace.iq.push_back(model.mean_iq[static_cast<std::size_t>(s)] +
                           model.sigma * noise);
    }
    return trace;
}

std::vector<double> make_shot_schedule(ScheduleMode /*mode*/, double interval,
                                       std::size_t count) {
    require(interval > 0.0, "make_shot_schedule: interval must be > 0");
    require(count > 0, "make_shot_schedule: count must be > 0");
    std::vector<double> times(count);
    for (std::size_t i = 0; i < count; ++i)
        times[i] = static_cast<double>(i) * interval;
    return times;
}

void write_vibration_bin(const std::filesystem::path& path, const VibrationTrace& trace) {
    std::string bytes(trace.samples.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), trace.samples.data(), bytes.size());
    util::atomic_write_file(path, bytes);
    nlohmann::ordered_json j;
    j["sample_rate"] = trace.sample_rate;
    j["start_time"] = trace.start_time;
    j["n"] = trace.samples.size();
    util::atomic_write_file(path.string() + ".json", j.dump(2) + "\n");
}

VibrationTrace read_vibration_bin(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(util::read_file(path.string() + ".json"));
    VibrationTrace trace;
    trace.sample_rate = j.at("sample_rate").get<double>();
    trace.start_time = j.at("start_time").get<double>();
    const auto n = j.at("n").get<std::size_t>();
    const std::string bytes = util::read_file(path);
    if (bytes.size() != n * sizeof(double))
        throw DataError("vibration file size does not match sidecar: " + path.string());
    trace.samples.resize(n);
    std::memcpy(trace.samples.data(), bytes.data(), bytes.size());
    return trace;
}

void write_vibration_csv(const std::filesystem::path& path, const VibrationTrace& trace) {
    std::string out = "t,value\n";
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        out += util::format_double(trace.start_time +
                                   static_cast<double>(i) / trace.sample_rate);
        out += ',';
        out += util::format_double(trace.samples[i]);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

void write_shots_csv(const std::filesystem::path& path,
                     const std::vector<std::vector<ShotTrace>>& traces) {
    std::string out = "trace_id,shot_index,t,qubit,I,Q\n";
    for (std::size_t trace_id = 0; trace_id < traces.size(); ++trace_id) {
        for (const ShotTrace& st : traces[trace_id]) {
            for (std::size_t i = 0; i < st.shot_times.size(); ++i) {
                out += std::to_string(trace_id);
                out += ',';
                out += std::to_string(i);
                out += ',';
                out += util::format_double(st.shot_times[i]);
                out += ',';
                out += std::to_string(st.qubit_id);
                out += ',';
                out += util::format_double(st.iq[i].real());
                out += ',';
                out += util::format_double(st.iq[i].imag());
                out += '\n';
            }
        }
    }
    util::atomic_write_file(path, out);
}

std::vector<std::vector<ShotTrace>> read_shots_csv(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path, "trace_id,shot_index,t,qubit,I,Q");
    std::map<std::pair<std::size_t, int>, ShotTrace> grouped;
    for (const auto& row : rows) {
        if (row.size() != 6) throw DataError("shots CSV: bad row in " + path.string());
        const auto trace_id = static_cast<std::size_t>(std::stoull(row[0]));
        const int qubit = std::stoi(row[3]);
        ShotTrace& st = grouped[{trace_id, qubit}];
        st.qubit_id = qubit;
        st.shot_times.push_back(util::parse_double(row[2]));
        st.iq.emplace_back(util::parse_double(row[4]), util::parse_double(row[5]));
    }
    std::vector<std::vector<ShotTrace>> traces;
    for (auto& [key, st] : grouped) {
        if (key.first >= traces.size()) traces.resize(key.first + 1);
        traces[key.first].push_back(std::move(st));
    }
    return traces;
}

void write_paths_csv(const std::filesystem::path& path,
                     const std::vector<std::vector<StatePath>>& traces) {
    std::string out = "trace_id,qubit,t_start,t_end,state\n";
    for (std::size_t trace_id = 0; trace_id < traces.size(); ++trace_id) {
        for (std::size_t qubit = 0; qubit < traces[trace_id].size(); ++qubit) {
            const StatePath& p = traces[trace_id][qubit];
            for (std::size_t seg = 0; seg < p.states.size(); ++seg) {
                const double t0 = seg == 0 ? 0.0 : p.jump_times[seg - 1];
                const double t1 =
                    seg < p.jump_times.size() ? p.jump_times[seg] : p.t_end;
                out += std::to_string(trace_id);
                out += ',';
                out += std::to_string(qubit);
                out += ',';
                out += util::format_double(t0);
                out += ',';
                out += util::format_double(t1);
                out += ',';
                out += to_char(p.states[seg]);
                out += '\n';
            }
        }
    }
    util::atomic_write_file(path, out);
}

std::vector<std::vector<StatePath>> read_paths_csv(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path, "trace_id,qubit,t_start,t_end,state");
    std::map<std::pair<std::size_t, std::size_t>, StatePath> grouped;
    for (const auto& row : rows) {
        if (row.size() != 5 || row[4].size() != 1)
            throw DataError("paths CSV: bad row in " + path.string());
        const auto key = std::make_pair(static_cast<std::size_t>(std::stoull(row[0])),
                                        static_cast<std::size_t>(std::stoull(row[1])));
        StatePath& p = grouped[key];
        const double t0 = util::parse_double(row[2]);
        if (!p.states.empty()) p.jump_times.push_back(t0);
        p.states.push_back(state_from_char(row[4][0]));
        p.t_end = util::parse_double(row[3]);
    }
    std::vector<std::vector<StatePath>> traces;
    for (auto& [key, p] : grouped) {
        if (key.first >= traces.size()) traces.resize(key.first + 1);
        auto& per_trace = traces[key.first];
        if (key.second >= per_trace.size()) per_trace.resize(key.second + 1);
        per_trace[key.second] = std::move(p);
    }
    return traces;
}

} // namespace qtel::qubitsim
