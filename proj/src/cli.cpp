#include "qtel/cli.hpp"

#include "qtel/correlate.hpp"
#include "qtel/errors.hpp"
#include "qtel/jumps.hpp"
#include "qtel/readout.hpp"
#include "qtel/sync.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/parallel.hpp"
#include "qtel/util/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace qtel::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---- strict JSON access -------------------------------------------------

void check_keys(const json& obj, const std::string& context,
                const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key))
            throw ConfigError(context + ": unknown key '" + key + "'");
    }
}

const json& need(const json& obj, const std::string& context, const std::string& key) {
    if (!obj.contains(key))
        throw ConfigError(context + ": missing required key '" + key + "'");
    return obj.at(key);
}

double num(const json& v, const std::string& context) {
    if (!v.is_number()) throw ConfigError(context + ": expected a number");
    return v.get<double>();
}

std::vector<double> num_array(const json& v, const std::string& context) {
    if (!v.is_array()) throw ConfigError(context + ": expected an array");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(num(e, context));
    return out;
}

std::complex<double> iq_pair(const json& v, const std::string& context) {
    const auto pair = num_array(v, context);
    if (pair.size() != 2) throw ConfigError(context + ": expected [I, Q]");
    return {pair[0], pair[1]};
}

// ---- scenario parsing ---------------------------------------------------

qubitsim::VibrationSpec parse_vibration(const json& v) {
    check_keys(v, "vibration",
               {"period_s", "harmonic_amps", "harmonic_phases", "shock_time_in_period_s",
                "shock", "noise_floor"});
    qubitsim::VibrationSpec spec;
    spec.period = num(need(v, "vibration", "period_s"), "vibration.period_s");
    if (v.contains("harmonic_amps"))
        spec.harmonic_amps = num_array(v.at("harmonic_amps"), "vibration.harmonic_amps");
    if (v.contains("harmonic_phases"))
        spec.harmonic_phases =
            num_array(v.at("harmonic_phases"), "vibration.harmonic_phases");
    else
        spec.harmonic_phases.assign(spec.harmonic_amps.size(), 0.0);
    if (v.contains("shock_time_in_period_s"))
        spec.shock_time_in_period =
            num(v.at("shock_time_in_period_s"), "vibration.shock_time_in_period_s");
    if (v.contains("shock")) {
        const json& s = v.at("shock");
        check_keys(s, "vibration.shock", {"amplitude", "ring_freq_hz", "damping_rate"});
        spec.shock.amplitude = num(need(s, "shock", "amplitude"), "shock.amplitude");
        spec.shock.ring_freq_hz =
            num(need(s, "shock", "ring_freq_hz"), "shock.ring_freq_hz");
        spec.shock.damping_rate =
            num(need(s, "shock", "damping_rate"), "shock.damping_rate");
    }
    if (v.contains("noise_floor"))
        spec.noise_floor = num(v.at("noise_floor"), "vibration.noise_floor");
    return spec;
}

Scenario::QubitSpec parse_qubit(const json& v, const std::string& context) {
    check_keys(v, context,
               {"rate_profile", "readout", "three_level", "frequency_hz",
                "anharmonicity_hz"});
    Scenario::QubitSpec q;

    const json& rp = need(v, context, "rate_profile");
    check_keys(rp, context + ".rate_profile",
               {"baseline_gamma_eff", "baseline_n_eff", "spike_times_in_period",
                "n_eff_boost", "gamma_eff_boost", "spike_decay"});
    q.profile.baseline_gamma_eff =
        num(need(rp, context, "baseline_gamma_eff"), context + ".baseline_gamma_eff");
    q.profile.baseline_n_eff =
        num(need(rp, context, "baseline_n_eff"), context + ".baseline_n_eff");
    if (rp.contains("spike_times_in_period"))
        q.profile.spike_times_in_period =
            num_array(rp.at("spike_times_in_period"), context + ".spike_times_in_period");
    if (rp.contains("n_eff_boost"))
        q.profile.n_eff_boost = num(rp.at("n_eff_boost"), context + ".n_eff_boost");
    if (rp.contains("gamma_eff_boost"))
        q.profile.gamma_eff_boost =
            num(rp.at("gamma_eff_boost"), context + ".gamma_eff_boost");
    if (rp.contains("spike_decay"))
        q.profile.spike_decay = num(rp.at("spike_decay"), context + ".spike_decay");

    const json& ro = need(v, context, "readout");
    check_keys(ro, context + ".readout",
               {"mean_iq", "sigma", "flip_up_prob", "flip_down_prob"});
    const json& means = need(ro, context, "mean_iq");
    if (!means.is_array() || means.empty() || means.size() > 3)
        throw ConfigError(context + ".readout.mean_iq: expected 1-3 [I,Q] pairs");
    for (std::size_t s = 0; s < means.size(); ++s)
        q.readout.mean_iq[s] = iq_pair(means[s], context + ".readout.mean_iq");
    q.readout.sigma = num(need(ro, context, "sigma"), context + ".readout.sigma");
    if (ro.contains("flip_up_prob"))
        q.readout.flip_up_prob = num(ro.at("flip_up_prob"), context + ".flip_up_prob");
    if (ro.contains("flip_down_prob"))
        q.readout.flip_down_prob =
            num(ro.at("flip_down_prob"), context + ".flip_down_prob");

    if (v.contains("three_level")) {
        const json& tl = v.at("three_level");
        check_keys(tl, context + ".three_level", {"gamma_ef", "gamma_fe"});
        qubitsim::ThreeLevelRates rates;
        rates.gamma_ef = num(need(tl, context, "gamma_ef"), context + ".gamma_ef");
        rates.gamma_fe = num(need(tl, context, "gamma_fe"), context + ".gamma_fe");
        q.three_level = rates;
    }
    if (v.contains("frequency_hz"))
        q.frequency_hz = num(v.at("frequency_hz"), context + ".frequency_hz");
    if (v.contains("anharmonicity_hz"))
        q.anharmonicity_hz = num(v.at("anharmonicity_hz"), context + ".anharmonicity_hz");
    return q;
}

Scenario parse_scenario(const json& root) {
    check_keys(root, "scenario",
               {"name", "seed", "vibration", "vibration_sample_rate_hz", "qubits",
                "schedule", "traces", "random_trace_phase", "adev_processes",
                "microwave_pulse", "analysis"});
    Scenario sc;
    sc.name = need(root, "scenario", "name").get<std::string>();
    const json& seed = need(root, "scenario", "seed");
    if (!seed.is_number_unsigned())
        throw ConfigError("scenario.seed: expected a non-negative integer");
    sc.seed = seed.get<std::uint64_t>();

    if (root.contains("vibration")) sc.vibration = parse_vibration(root.at("vibration"));
    if (root.contains("vibration_sample_rate_hz"))
        sc.vibration_sample_rate =
            num(root.at("vibration_sample_rate_hz"), "vibration_sample_rate_hz");

    if (root.contains("qubits")) {
        const json& qs = root.at("qubits");
        if (!qs.is_array()) throw ConfigError("scenario.qubits: expected an array");
        for (std::size_t i = 0; i < qs.size(); ++i)
            sc.qubits.push_back(parse_qubit(qs[i], "qubits[" + std::to_string(i) + "]"));
    }

    if (root.contains("schedule")) {
        const json& s = root.at("schedule");
        check_keys(s, "schedule", {"mode", "interval_s", "count"});
        const std::string mode = need(s, "schedule", "mode").get<std::string>();
        if (mode == "sparse")
            sc.schedule_mode = qubitsim::ScheduleMode::sparse;
        else if (mode == "continuous")
            sc.schedule_mode = qubitsim::ScheduleMode::continuous;
        else
            throw ConfigError("schedule.mode: expected 'sparse' or 'continuous'");
        sc.schedule_interval = num(need(s, "schedule", "interval_s"), "schedule.interval_s");
        sc.schedule_count =
            static_cast<std::size_t>(num(need(s, "schedule", "count"), "schedule.count"));
    }
    if (root.contains("traces"))
        sc.n_traces = static_cast<std::size_t>(num(root.at("traces"), "traces"));
    if (root.contains("random_trace_phase")) {
        if (!root.at("random_trace_phase").is_boolean())
            throw ConfigError("random_trace_phase: expected a boolean");
        sc.random_trace_phase = root.at("random_trace_phase").get<bool>();
    }

    if (root.contains("adev_processes")) {
        const json& a = root.at("adev_processes");
        check_keys(a, "adev_processes",
                   {"telegraph", "poisson_reset", "duration_s", "dt_s", "realizations"});
        Scenario::AdevProcesses ap;
        if (a.contains("telegraph")) {
            const json& t = a.at("telegraph");
            check_keys(t, "adev_processes.telegraph", {"gamma0", "gamma1"});
            ap.telegraph = processes::TelegraphParams{
                num(need(t, "telegraph", "gamma0"), "telegraph.gamma0"),
                num(need(t, "telegraph", "gamma1"), "telegraph.gamma1")};
        }
        if (a.contains("poisson_reset")) {
            const json& p = a.at("poisson_reset");
            check_keys(p, "adev_processes.poisson_reset", {"gamma", "sigma"});
            ap.poisson_reset = processes::PoissonResetParams{
                num(need(p, "poisson_reset", "gamma"), "poisson_reset.gamma"),
                num(need(p, "poisson_reset", "sigma"), "poisson_reset.sigma")};
        }
        ap.duration = num(need(a, "adev_processes", "duration_s"), "adev.duration_s");
        ap.dt = num(need(a, "adev_processes", "dt_s"), "adev.dt_s");
        if (a.contains("realizations"))
            ap.realizations = static_cast<int>(num(a.at("realizations"), "realizations"));
        sc.adev = ap;
    }

    if (root.contains("microwave_pulse")) {
        const json& m = root.at("microwave_pulse");
        check_keys(m, "microwave_pulse", {"mean", "sigma"});
        Scenario::MicrowavePulse mp;
        mp.mean = iq_pair(need(m, "microwave_pulse", "mean"), "microwave_pulse.mean");
        mp.sigma = num(need(m, "microwave_pulse", "sigma"), "microwave_pulse.sigma");
        sc.microwave = mp;
    }

    if (root.contains("analysis")) {
        const json& a = root.at("analysis");
        check_keys(a, "analysis",
                   {"calibration_components", "fold_bin_width_s", "smoothing_window_s",
                    "mi_bin_width_s", "mi_intervals_s", "adev_tau_min_s",
                    "adev_tau_max_s"});
        if (a.contains("calibration_components"))
            sc.analysis.calibration_components =
                static_cast<int>(num(a.at("calibration_components"),
                                     "analysis.calibration_components"));
        if (a.contains("fold_bin_width_s"))
            sc.analysis.fold_bin_width =
                num(a.at("fold_bin_width_s"), "analysis.fold_bin_width_s");
        if (a.contains("smoothing_window_s"))
            sc.analysis.smoothing_window =
                num(a.at("smoothing_window_s"), "analysis.smoothing_window_s");
        if (a.contains("mi_bin_width_s"))
            sc.analysis.mi_bin_width = num(a.at("mi_bin_width_s"), "analysis.mi_bin_width_s");
        if (a.contains("mi_intervals_s"))
            sc.analysis.mi_intervals =
                num_array(a.at("mi_intervals_s"), "analysis.mi_intervals_s");
        if (a.contains("adev_tau_min_s"))
            sc.analysis.adev_tau_min = num(a.at("adev_tau_min_s"), "analysis.adev_tau_min_s");
        if (a.contains("adev_tau_max_s"))
            sc.analysis.adev_tau_max = num(a.at("adev_tau_max_s"), "analysis.adev_tau_max_s");
    }
    return sc;
}

// ---- phase-shifted local views -----------------------------------------

// A trace whose local time starts at absolute phase `offset` sees shifted
// harmonic phases and shifted spike/shock onsets; both shifts are exact.
qubitsim::VibrationSpec shifted_spec(const qubitsim::VibrationSpec& spec, double offset) {
    qubitsim::VibrationSpec out = spec;
    for (std::size_t h = 0; h < out.harmonic_phases.size(); ++h)
        out.harmonic_phases[h] +=
            2.0 * std::numbers::pi * static_cast<double>(h + 1) * offset / spec.period;
    out.shock_time_in_period = std::fmod(spec.shock_time_in_period - offset, spec.period);
    if (out.shock_time_in_period < 0.0) out.shock_time_in_period += spec.period;
    return out;
}

qubitsim::RateProfile shifted_profile(const qubitsim::RateProfile& profile, double offset,
                                      double period) {
    qubitsim::RateProfile out = profile;
    for (double& s : out.spike_times_in_period) {
        s = std::fmod(s - offset, period);
        if (s < 0.0) s += period;
    }
    return out;
}

// ---- manifest -----------------------------------------------------------

void write_manifest(const fs::path& dir, const json& scenario_json) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename() == "manifest.json") continue;
        files.push_back(fs::relative(entry.path(), dir));
    }
    std::sort(files.begin(), files.end());
    ordered_json m;
    m["scenario"] = scenario_json;
    ordered_json list = json::array();
    for (const auto& rel : files) {
        const std::string bytes = util::read_file(dir / rel);
        ordered_json f;
        f["path"] = rel.generic_string();
        f["bytes"] = bytes.size();
        f["fnv1a64"] = util::fnv1a64_hex(bytes);
        list.push_back(f);
    }
    m["files"] = list;
    util::atomic_write_file(dir / "manifest.json", m.dump(2) + "\n");
}

struct Dataset {
    fs::path dir;
    Scenario scenario;
    json manifest;
};

Dataset open_dataset(const fs::path& dir) {
    Dataset ds;
    ds.dir = dir;
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw DataError("no manifest.json in " + dir.string());
    ds.manifest = json::parse(util::read_file(manifest_path));
    for (const auto& f : ds.manifest.at("files")) {
        const fs::path rel = f.at("path").get<std::string>();
        const std::string bytes = util::read_file(dir / rel);
        if (util::fnv1a64_hex(bytes) != f.at("fnv1a64").get<std::string>())
            throw DataError("manifest hash mismatch for " + rel.generic_string() +
                            " (dataset was modified)");
    }
    ds.scenario = parse_scenario(ds.manifest.at("scenario"));
    return ds;
}

// ---- simulation ---------------------------------------------------------

std::vector<double> trace_phase_offsets(const Scenario& sc) {
    std::vector<double> offsets(sc.n_traces, 0.0);
    if (!sc.random_trace_phase || !sc.vibration) return offsets;
    util::Rng rng = util::make_rng(util::derive_seed(sc.seed, 0x0ff5e7));
    std::uniform_real_distribution<double> uni(0.0, sc.vibration->period);
    for (auto& o : offsets) o = uni(rng);
    return offsets;
}

void simulate_qubit_dataset(const Scenario& sc, const fs::path& out, unsigned threads) {
    const auto& spec = *sc.vibration;
    const double period = spec.period;
    const double fs_vib = sc.vibration_sample_rate;
    const auto schedule =
        qubitsim::make_shot_schedule(sc.schedule_mode, sc.schedule_interval,
                                     sc.schedule_count);
    const double shot_span = schedule.back() + sc.schedule_interval;
    const double vib_duration = std::max(shot_span, 2.0 * period) + 1.0 / fs_vib;

    const auto offsets = trace_phase_offsets(sc);
    fs::create_directories(out / "vib");

    // reference period at phase zero, with its own noise realization
    const auto reference = qubitsim::synth_vibration(
        spec, period, fs_vib, util::derive_seed(sc.seed, 0x5ef));
    qubitsim::write_vibration_bin(out / "reference.bin", reference);

    struct TraceResult {
        qubitsim::VibrationTrace vib;
        std::vector<qubitsim::StatePath> paths;
        std::vector<qubitsim::ShotTrace> shots;
    };
    std::vector<TraceResult> results(sc.n_traces);

    util::parallel_for(sc.n_traces, threads, [&](std::size_t ti) {
        TraceResult& r = results[ti];
        const double off = offsets[ti];
        r.vib = qubitsim::synth_vibration(shifted_spec(spec, off), vib_duration, fs_vib,
                                          util::derive_seed(sc.seed, 100 + ti));
        for (std::size_t q = 0; q < sc.qubits.size(); ++q) {
            const auto& qs = sc.qubits[q];
            const auto profile = shifted_profile(qs.profile, off, period);
            const auto path = qubitsim::simulate_jump_trajectory(
                profile, period, shot_span,
                util::derive_seed(sc.seed, 10000 + ti * 64 + q), qs.three_level);
            r.shots.push_back(qubitsim::simulate_readout(
                path, schedule, qs.readout,
                util::derive_seed(sc.seed, 20000 + ti * 64 + q), static_cast<int>(q)));
            r.paths.push_back(path);
        }
    });

    std::vector<std::vector<qubitsim::ShotTrace>> all_shots;
    std::vector<std::vector<qubitsim::StatePath>> all_paths;
    for (std::size_t ti = 0; ti < sc.n_traces; ++ti) {
        char name[32];
        std::snprintf(name, sizeof(name), "trace_%04zu.bin", ti);
        qubitsim::write_vibration_bin(out / "vib" / name, results[ti].vib);
        all_shots.push_back(std::move(results[ti].shots));
        all_paths.push_back(std::move(results[ti].paths));
    }
    qubitsim::write_shots_csv(out / "shots.csv", all_shots);
    qubitsim::write_paths_csv(out / "paths.csv", all_paths);

    ordered_json gt;
    gt["trace_phase_offsets"] = offsets;
    ordered_json per_qubit = json::array();
    for (const auto& qs : sc.qubits) {
        ordered_json g;
        g["baseline_gamma_up"] = qs.profile.baseline_gamma_eff * qs.profile.baseline_n_eff;
        g["baseline_gamma_down"] =
            qs.profile.baseline_gamma_eff * (qs.profile.baseline_n_eff + 1.0);
        per_qubit.push_back(g);
    }
    gt["qubits"] = per_qubit;
    util::atomic_write_file(out / "ground_truth.json", gt.dump(2) + "\n");
}

void simulate_microwave_dataset(const Scenario& sc, const fs::path& out,
                                unsigned threads) {
    const auto& spec = *sc.vibration;
    const double period = spec.period;
    const double fs_vib = sc.vibration_sample_rate;
    const auto schedule =
        qubitsim::make_shot_schedule(sc.schedule_mode, sc.schedule_interval,
                                     sc.schedule_count);
    const double shot_span = schedule.back() + sc.schedule_interval;
    const double vib_duration = std::max(shot_span, 2.0 * period) + 1.0 / fs_vib;
    const auto offsets = trace_phase_offsets(sc);

    fs::create_directories(out / "vib");
    const auto reference = qubitsim::synth_vibration(
        spec, period, fs_vib, util::derive_seed(sc.seed, 0x5ef));
    qubitsim::write_vibration_bin(out / "reference.bin", reference);

    std::vector<qubitsim::VibrationTrace> vibs(sc.n_traces);
    std::vector<std::vector<qubitsim::ShotTrace>> pulses(sc.n_traces);
    util::parallel_for(sc.n_traces, threads, [&](std::size_t ti) {
        vibs[ti] = qubitsim::synth_vibration(shifted_spec(spec, offsets[ti]), vib_duration,
                                             fs_vib, util::derive_seed(sc.seed, 100 + ti));
        // a stationary coherent pulse: constant-G path through the cluster model
        qubitsim::StatePath still;
        still.states = {State::G};
        still.t_end = shot_span;
        qubitsim::ReadoutModel model;
        model.mean_iq[0] = sc.microwave->mean;
        model.sigma = sc.microwave->sigma;
        pulses[ti].push_back(qubitsim::simulate_readout(
            still, schedule, model, util::derive_seed(sc.seed, 30000 + ti), 0));
    });

    for (std::size_t ti = 0; ti < sc.n_traces; ++ti) {
        char name[32];
        std::snprintf(name, sizeof(name), "trace_%04zu.bin", ti);
        qubitsim::write_vibration_bin(out / "vib" / name, vibs[ti]);
    }
    qubitsim::write_shots_csv(out / "pulses.csv", pulses);

    ordered_json gt;
    gt["trace_phase_offsets"] = offsets;
    util::atomic_write_file(out / "ground_truth.json", gt.dump(2) + "\n");
}

void simulate_adev_dataset(const Scenario& sc, const fs::path& out, unsigned threads) {
    const auto& ap = *sc.adev;
    if (ap.duration <= 0.0 || ap.dt <= 0.0)
        throw ConfigError("adev_processes: duration_s and dt_s must be > 0");
    fs::create_directories(out / "series");

    const auto write_realizations = [&](const std::string& stem, auto&& simulate) {
        std::vector<std::vector<double>> series(ap.realizations);
        util::parallel_for(ap.realizations, threads,
                           [&](std::size_t r) { series[r] = simulate(r); });
        for (int r = 0; r < ap.realizations; ++r) {
            char name[48];
            std::snprintf(name, sizeof(name), "%s_%03d.csv", stem.c_str(), r);
            std::vector<double> times(series[r].size());
            for (std::size_t i = 0; i < times.size(); ++i)
                times[i] = static_cast<double>(i) * ap.dt;
            processes::write_series_csv(out / "series" / name, times, series[r]);
        }
    };

    ordered_json gt;
    if (ap.telegraph) {
        write_realizations("telegraph", [&](std::size_t r) {
            return processes::simulate_telegraph(*ap.telegraph, ap.duration,
                                                 util::derive_seed(sc.seed, r))
                .sample(ap.dt);
        });
        const auto ln = processes::LorentzianNoise::from_telegraph(*ap.telegraph);
        gt["telegraph"] = {{"A", ln.amplitude_A}, {"alpha", ln.alpha}};
    }
    if (ap.poisson_reset) {
        write_realizations("poisson", [&](std::size_t r) {
            return processes::simulate_poisson_reset(*ap.poisson_reset, ap.duration,
                                                     util::derive_seed(sc.seed, 5000 + r))
                .sample(ap.dt);
        });
        const auto ln = processes::LorentzianNoise::from_poisson_reset(*ap.poisson_reset);
        gt["poisson_reset"] = {{"A", ln.amplitude_A}, {"alpha", ln.alpha}};
    }
    util::atomic_write_file(out / "ground_truth.json", gt.dump(2) + "\n");
}

// ---- analysis helpers ---------------------------------------------------

std::vector<sync::AlignmentResult> align_all_traces(const Dataset& ds,
                                                    unsigned threads) {
    const auto reference = qubitsim::read_vibration_bin(ds.dir / "reference.bin");
    std::vector<sync::AlignmentResult> alignments(ds.scenario.n_traces);
    util::parallel_for(ds.scenario.n_traces, threads, [&](std::size_t ti) {
        char name[32];
        std::snprintf(name, sizeof(name), "trace_%04zu.bin", ti);
        const auto vib = qubitsim::read_vibration_bin(ds.dir / "vib" / name);
        alignments[ti] = sync::align_to_reference(vib, reference);
    });
    return alignments;
}

// shots.csv regrouped per qubit, indexed [qubit][trace]
std::vector<std::vector<qubitsim::ShotTrace>> shots_by_qubit(
    const std::vector<std::vector<qubitsim::ShotTrace>>& traces, std::size_t n_qubits) {
    std::vector<std::vector<qubitsim::ShotTrace>> per_qubit(n_qubits);
    for (const auto& trace : traces) {
        for (const auto& st : trace) {
            const auto q = static_cast<std::size_t>(st.qubit_id);
            if (q >= n_qubits) throw DataError("shots.csv: unexpected qubit id");
            per_qubit[q].push_back(st);
        }
    }
    return per_qubit;
}

readout::CalibrationResult calibrate_qubit(
    const std::vector<qubitsim::ShotTrace>& traces, int components) {
    std::vector<std::complex<double>> all;
    for (const auto& st : traces) all.insert(all.end(), st.iq.begin(), st.iq.end());
    return readout::calibrate(all, components);
}

// classify with the 2-point moving average applied to the rotated I
void label_traces(std::vector<qubitsim::ShotTrace>& traces,
                  const readout::CalibrationResult& cal, bool average) {
    for (auto& st : traces) {
        std::vector<double> proj(st.iq.size());
        for (std::size_t i = 0; i < st.iq.size(); ++i)
            proj[i] = cal.rotation.apply(st.iq[i]).real();
        if (average) proj = jumps::moving_average(proj, 2);
        st.labels = readout::classify(proj, cal);
    }
}

std::string format_line(const char* fmt, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), fmt, a, b, c);
    return std::string(buf);
}

// ---- pipelines ----------------------------------------------------------

void pipeline_thermometry(const Dataset& ds, const fs::path& out) {
    if (ds.scenario.qubits.empty())
        throw DataError("thermometry: dataset has no qubits");
    const auto traces = qubitsim::read_shots_csv(ds.dir / "shots.csv");
    const auto per_qubit = shots_by_qubit(traces, ds.scenario.qubits.size());

    std::string summary = "pipeline: thermometry\n";
    for (std::size_t q = 0; q < per_qubit.size(); ++q) {
        const auto& qs = ds.scenario.qubits[q];
        const int components = qs.three_level ? 3 : ds.scenario.analysis.calibration_components;
        const auto cal = calibrate_qubit(per_qubit[q], components);
        readout::write_calibration_json(
            out / ("calibration_q" + std::to_string(q) + ".json"), cal);
        const auto pops = readout::populations_from_calibration(cal);

        ordered_json j;
        j["populations"] = pops.p;
        const auto [sep_up, sep_down] = readout::separation_errors(cal);
        j["separation_errors"] = {sep_up, sep_down};
        if (qs.frequency_hz > 0.0 && pops.p[1] > 0.0) {
            j["t_eff_ge_K"] =
                readout::effective_temperature(pops.p[1], pops.p[0], qs.frequency_hz);
            summary += format_line("qubit %.0f: T_eff(G-E) = %.4f K\n",
                                   static_cast<double>(q), j["t_eff_ge_K"].get<double>());
        }
        if (components == 3 && qs.anharmonicity_hz > 0.0 && pops.p[2] > 0.0) {
            j["t_eff_ef_K"] = readout::effective_temperature(
                pops.p[2], pops.p[1], qs.frequency_hz - qs.anharmonicity_hz);
        }
        util::atomic_write_file(out / ("thermometry_q" + std::to_string(q) + ".json"),
                                j.dump(2) + "\n");
        summary += format_line("qubit %.0f: P_G=%.6f P_E=%.6f",
                               static_cast<double>(q), pops.p[0], pops.p[1]);
        summary += format_line(" P_F=%.6f\n", pops.p[2]);
    }
    util::atomic_write_file(out / "summary_thermometry.txt", summary);
}

void pipeline_fold(const Dataset& ds, const fs::path& out, unsigned threads) {
    if (ds.scenario.qubits.empty()) throw DataError("fold: dataset has no qubits");
    const auto alignments = align_all_traces(ds, threads);
    auto traces = qubitsim::read_shots_csv(ds.dir / "shots.csv");
    auto per_qubit = shots_by_qubit(traces, ds.scenario.qubits.size());

    std::string summary = "pipeline: fold\n";
    for (std::size_t q = 0; q < per_qubit.size(); ++q) {
        const int components = ds.scenario.qubits[q].three_level
                                   ? 3
                                   : ds.scenario.analysis.calibration_components;
        const auto cal = calibrate_qubit(per_qubit[q], components);
        label_traces(per_qubit[q], cal, false);
        const auto folded =
            sync::fold_shots(per_qubit[q], alignments, ds.scenario.analysis.fold_bin_width,
                             ds.scenario.analysis.smoothing_window);
        sync::write_folded_csv(out / ("folded_q" + std::to_string(q) + ".csv"), folded);

        double peak = 0.0, base = 1.0;
        std::vector<double> finite;
        for (double v : folded.values)
            if (std::isfinite(v)) finite.push_back(v);
        if (!finite.empty()) {
            peak = *std::max_element(finite.begin(), finite.end());
            std::nth_element(finite.begin(), finite.begin() + finite.size() / 2,
                             finite.end());
            base = std::max(finite[finite.size() / 2], 1e-12);
        }
        summary += format_line("qubit %.0f: folded P_E peak/median = %.1f\n",
                               static_cast<double>(q), peak / base);
    }
    for (std::size_t ti = 0; ti < alignments.size(); ++ti)
        sync::write_alignment_json(
            out / ("alignment_" + std::to_string(ti) + ".json"), alignments[ti]);
    util::atomic_write_file(out / "summary_fold.txt", summary);
}

void pipeline_jumps(const Dataset& ds, const fs::path& out, unsigned threads) {
    if (ds.scenario.qubits.empty()) throw DataError("jumps: dataset has no qubits");
    const auto alignments = align_all_traces(ds, threads);
    auto traces = qubitsim::read_shots_csv(ds.dir / "shots.csv");
    auto per_qubit = shots_by_qubit(traces, ds.scenario.qubits.size());
    const double period = alignments[0].reference_period;

    std::string summary = "pipeline: jumps\n";
    for (std::size_t q = 0; q < per_qubit.size(); ++q) {
        const auto cal = calibrate_qubit(per_qubit[q], 2);
        label_traces(per_qubit[q], cal, true);

        std::vector<jumps::DwellEvent> events;
        for (std::size_t ti = 0; ti < per_qubit[q].size(); ++ti) {
            const auto ev = jumps::extract_dwells(per_qubit[q][ti].labels,
                                                  ds.scenario.schedule_interval,
                                                  static_cast<int>(ti));
            events.insert(events.end(), ev.begin(), ev.end());
        }
        jumps::write_dwells_csv(out / ("dwells_q" + std::to_string(q) + ".csv"), events);

        const auto folded = jumps::fold_events(events, alignments);
        const auto estimates = jumps::time_resolved_rates(folded, period);
        jumps::write_rates_csv(out / ("rates_q" + std::to_string(q) + ".csv"), estimates);

        double n_max = 0.0;
        std::vector<double> n_all;
        for (const auto& est : estimates)
            if (std::isfinite(est.n_eff)) {
                n_max = std::max(n_max, est.n_eff);
                n_all.push_back(est.n_eff);
            }
        if (!n_all.empty()) {
            std::nth_element(n_all.begin(), n_all.begin() + n_all.size() / 2, n_all.end());
            summary += format_line("qubit %.0f: n_eff max/median = %.1f over %.0f steps\n",
                                   static_cast<double>(q),
                                   n_max / std::max(n_all[n_all.size() / 2], 1e-12),
                                   static_cast<double>(estimates.size()));
        }
    }
    util::atomic_write_file(out / "summary_jumps.txt", summary);
}

void pipeline_mi(const Dataset& ds, const fs::path& out, unsigned threads) {
    if (ds.scenario.qubits.size() < 2)
        throw DataError("mi: dataset needs two qubits");
    const auto alignments = align_all_traces(ds, threads);
    auto traces = qubitsim::read_shots_csv(ds.dir / "shots.csv");
    auto per_qubit = shots_by_qubit(traces, ds.scenario.qubits.size());
    for (std::size_t q = 0; q < 2; ++q) {
        const auto cal = calibrate_qubit(per_qubit[q], 2);
        label_traces(per_qubit[q], cal, false);
    }

    std::vector<State> a, b;
    for (std::size_t ti = 0; ti < per_qubit[0].size(); ++ti) {
        a.insert(a.end(), per_qubit[0][ti].labels.begin(), per_qubit[0][ti].labels.end());
        b.insert(b.end(), per_qubit[1][ti].labels.begin(), per_qubit[1][ti].labels.end());
    }
    const auto joint = correlate::joint_from_shots(a, b);
    correlate::write_joint_json(out / "joint.json", joint);
    const double mi = correlate::mutual_information(joint);
    const double null99 =
        correlate::permutation_null_quantile(a, b, 0.99, 100, ds.scenario.seed + 77);

    const auto folded_mi = correlate::time_resolved_mi(
        per_qubit[0], per_qubit[1], alignments, ds.scenario.analysis.mi_bin_width);
    sync::write_folded_csv(out / "mi_folded.csv", folded_mi);

    std::string summary = "pipeline: mi\n";
    summary += format_line("pooled MI = %.3e bit (permutation null 99%% = %.3e)\n", mi,
                           null99);

    if (!ds.scenario.analysis.mi_intervals.empty()) {
        std::vector<std::vector<State>> rec_a, rec_b;
        for (std::size_t ti = 0; ti < per_qubit[0].size(); ++ti) {
            rec_a.push_back(per_qubit[0][ti].labels);
            rec_b.push_back(per_qubit[1][ti].labels);
        }
        const auto curve =
            correlate::mi_vs_interval(rec_a, rec_b, ds.scenario.schedule_interval,
                                      ds.scenario.analysis.mi_intervals);
        correlate::write_mi_curve_csv(out / "mi_curve.csv", curve);
        const auto matrix = correlate::error_event_matrix(
            rec_a, rec_b, ds.scenario.schedule_interval, curve.intervals[curve.argmax]);
        correlate::write_error_matrix_json(out / "error_matrix.json", matrix);
        summary += format_line("16-event MI peaks at interval %.4g s (%.3e bit)\n",
                               curve.intervals[curve.argmax], curve.mi_bits[curve.argmax]);
    }
    util::atomic_write_file(out / "summary_mi.txt", summary);
}

void pipeline_adev(const Dataset& ds, const fs::path& out, unsigned threads) {
    if (!ds.scenario.adev) throw DataError("adev: dataset has no adev_processes");
    const auto& ap = *ds.scenario.adev;
    const double dt = ap.dt;
    double tau_min = ds.scenario.analysis.adev_tau_min;
    double tau_max = ds.scenario.analysis.adev_tau_max;
    if (tau_min <= 0.0) tau_min = 5.0 * dt;
    if (tau_max <= 0.0) tau_max = ap.duration / 20.0;
    const auto taus = processes::log_tau_grid(tau_min, tau_max, 10, dt);

    const json gt = json::parse(util::read_file(ds.dir / "ground_truth.json"));

    std::string summary = "pipeline: adev\n";
    const auto analyze_stem = [&](const std::string& stem) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(ds.dir / "series")) {
            const std::string name = entry.path().filename().string();
            if (name.rfind(stem + "_", 0) == 0) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) return;

        std::vector<processes::AdevCurve> curves(files.size());
        util::parallel_for(files.size(), threads, [&](std::size_t i) {
            const auto [times, values] = processes::read_series_csv(files[i]);
            (void)times;
            curves[i] = processes::empirical_adev(values, dt, taus);
        });
        // average the Allan variances over realizations
        processes::AdevCurve avg = curves[0];
        std::vector<double> var(avg.sigmas.size());
        for (std::size_t k = 0; k < var.size(); ++k)
            var[k] = avg.sigmas[k] * avg.sigmas[k];
        for (std::size_t i = 1; i < curves.size(); ++i)
            for (std::size_t k = 0; k < var.size(); ++k) {
                var[k] += curves[i].sigmas[k] * curves[i].sigmas[k];
                avg.counts[k] += curves[i].counts[k];
            }
        for (std::size_t k = 0; k < var.size(); ++k)
            avg.sigmas[k] = std::sqrt(var[k] / static_cast<double>(curves.size()));

        processes::write_adev_csv(out / ("adev_" + stem + ".csv"), avg);
        const auto fit = processes::fit_adev_model(avg);
        processes::write_fit_json(out / ("adev_" + stem + "_fit.json"), fit);

        if (gt.contains(stem == "poisson" ? "poisson_reset" : "telegraph")) {
            const auto& g = gt.at(stem == "poisson" ? "poisson_reset" : "telegraph");
            const processes::LorentzianNoise truth{g.at("A").get<double>(),
                                                   g.at("alpha").get<double>()};
            double worst = 0.0;
            for (std::size_t k = 0; k < avg.taus.size(); ++k) {
                const double ref = processes::analytic_adev(truth, avg.taus[k]);
                worst = std::max(worst, std::fabs(avg.sigmas[k] - ref) / ref);
            }
            summary += stem;
            summary += format_line(": worst |empirical-analytic|/analytic = %.3f "
                                   "over %.0f taus\n",
                                   worst, static_cast<double>(avg.taus.size()));
        }
    };
    analyze_stem("telegraph");
    analyze_stem("poisson");
    util::atomic_write_file(out / "summary_adev.txt", summary);
}

void pipeline_microwave(const Dataset& ds, const fs::path& out, unsigned threads) {
    if (!ds.scenario.microwave) throw DataError("microwave: dataset has no pulses");
    const auto alignments = align_all_traces(ds, threads);
    const auto traces = qubitsim::read_shots_csv(ds.dir / "pulses.csv");
    std::vector<qubitsim::ShotTrace> pulses;
    for (const auto& trace : traces)
        for (const auto& st : trace) pulses.push_back(st);

    const auto [trans, noise] = sync::time_resolved_microwave_stats(
        pulses, alignments, ds.scenario.analysis.fold_bin_width);
    sync::write_folded_csv(out / "transmission.csv", trans);
    sync::write_folded_csv(out / "background_noise.csv", noise);

    double worst_t = 0.0, worst_n = 0.0;
    for (double v : trans.values)
        if (std::isfinite(v)) worst_t = std::max(worst_t, std::fabs(v - 1.0));
    for (double v : noise.values)
        if (std::isfinite(v)) worst_n = std::max(worst_n, std::fabs(v - 0.5));
    std::string summary = "pipeline: microwave\n";
    summary += format_line("max |transmission-1| = %.4f, max |background-0.5| = %.4f\n",
                           worst_t, worst_n);
    util::atomic_write_file(out / "summary_microwave.txt", summary);
}

} // namespace

Scenario load_scenario(const fs::path& path) {
    json root;
    try {
        root = json::parse(util::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse scenario " + path.string() + ": " + e.what());
    }
    return parse_scenario(root);
}

void cmd_simulate(const Scenario& scenario, const fs::path& out_dir, unsigned threads) {
    fs::create_directories(out_dir);
    // reconstructing the JSON keeps the manifest self-contained
    ordered_json sj;
    sj["name"] = scenario.name;
    sj["seed"] = scenario.seed;
    if (scenario.vibration) {
        const auto& v = *scenario.vibration;
        ordered_json vj;
        vj["period_s"] = v.period;
        vj["harmonic_amps"] = v.harmonic_amps;
        vj["harmonic_phases"] = v.harmonic_phases;
        vj["shock_time_in_period_s"] = v.shock_time_in_period;
        vj["shock"] = {{"amplitude", v.shock.amplitude},
                       {"ring_freq_hz", v.shock.ring_freq_hz},
                       {"damping_rate", v.shock.damping_rate}};
        vj["noise_floor"] = v.noise_floor;
        sj["vibration"] = vj;
        sj["vibration_sample_rate_hz"] = scenario.vibration_sample_rate;
    }
    if (!scenario.qubits.empty()) {
        ordered_json qs = json::array();
        for (const auto& q : scenario.qubits) {
            ordered_json qj;
            qj["rate_profile"] = {{"baseline_gamma_eff", q.profile.baseline_gamma_eff},
                                  {"baseline_n_eff", q.profile.baseline_n_eff},
                                  {"spike_times_in_period", q.profile.spike_times_in_period},
                                  {"n_eff_boost", q.profile.n_eff_boost},
                                  {"gamma_eff_boost", q.profile.gamma_eff_boost},
                                  {"spike_decay", q.profile.spike_decay}};
            ordered_json means = json::array();
            for (const auto& m : q.readout.mean_iq)
                means.push_back({m.real(), m.imag()});
            qj["readout"] = {{"mean_iq", means},
                             {"sigma", q.readout.sigma},
                             {"flip_up_prob", q.readout.flip_up_prob},
                             {"flip_down_prob", q.readout.flip_down_prob}};
            if (q.three_level)
                qj["three_level"] = {{"gamma_ef", q.three_level->gamma_ef},
                                     {"gamma_fe", q.three_level->gamma_fe}};
            if (q.frequency_hz > 0.0) qj["frequency_hz"] = q.frequency_hz;
            if (q.anharmonicity_hz > 0.0) qj["anharmonicity_hz"] = q.anharmonicity_hz;
            qs.push_back(qj);
        }
        sj["qubits"] = qs;
        sj["schedule"] = {
            {"mode",
             scenario.schedule_mode == qubitsim::ScheduleMode::sparse ? "sparse"
                                                                      : "continuous"},
            {"interval_s", scenario.schedule_interval},
            {"count", scenario.schedule_count}};
        sj["traces"] = scenario.n_traces;
        sj["random_trace_phase"] = scenario.random_trace_phase;
    }
    if (scenario.adev) {
        ordered_json aj;
        if (scenario.adev->telegraph)
            aj["telegraph"] = {{"gamma0", scenario.adev->telegraph->gamma0},
                               {"gamma1", scenario.adev->telegraph->gamma1}};
        if (scenario.adev->poisson_reset)
            aj["poisson_reset"] = {{"gamma", scenario.adev->poisson_reset->gamma},
                                   {"sigma", scenario.adev->poisson_reset->sigma}};
        aj["duration_s"] = scenario.adev->duration;
        aj["dt_s"] = scenario.adev->dt;
        aj["realizations"] = scenario.adev->realizations;
        sj["adev_processes"] = aj;
    }
    if (scenario.microwave) {
        sj["microwave_pulse"] = {
            {"mean", {scenario.microwave->mean.real(), scenario.microwave->mean.imag()}},
            {"sigma", scenario.microwave->sigma}};
        sj["schedule"] = {
            {"mode",
             scenario.schedule_mode == qubitsim::ScheduleMode::sparse ? "sparse"
                                                                      : "continuous"},
            {"interval_s", scenario.schedule_interval},
            {"count", scenario.schedule_count}};
        sj["traces"] = scenario.n_traces;
        sj["random_trace_phase"] = scenario.random_trace_phase;
    }
    {
        ordered_json an;
        an["calibration_components"] = scenario.analysis.calibration_components;
        an["fold_bin_width_s"] = scenario.analysis.fold_bin_width;
        an["smoothing_window_s"] = scenario.analysis.smoothing_window;
        an["mi_bin_width_s"] = scenario.analysis.mi_bin_width;
        if (!scenario.analysis.mi_intervals.empty())
            an["mi_intervals_s"] = scenario.analysis.mi_intervals;
        if (scenario.analysis.adev_tau_min > 0.0)
            an["adev_tau_min_s"] = scenario.analysis.adev_tau_min;
        if (scenario.analysis.adev_tau_max > 0.0)
            an["adev_tau_max_s"] = scenario.analysis.adev_tau_max;
        sj["analysis"] = an;
    }

    if (scenario.adev) {
        simulate_adev_dataset(scenario, out_dir, threads);
    } else if (scenario.microwave) {
        if (!scenario.vibration)
            throw ConfigError("microwave scenarios need a vibration block");
        simulate_microwave_dataset(scenario, out_dir, threads);
    } else if (!scenario.qubits.empty()) {
        if (!scenario.vibration)
            throw ConfigError("qubit scenarios need a vibration block");
        if (scenario.schedule_count == 0)
            throw ConfigError("qubit scenarios need a schedule block");
        simulate_qubit_dataset(scenario, out_dir, threads);
    } else {
        throw ConfigError("scenario defines nothing to simulate");
    }
    write_manifest(out_dir, sj);
}

void cmd_analyze(const fs::path& dataset_dir, const std::string& pipeline,
                 const fs::path& out_dir, unsigned threads) {
    const Dataset ds = open_dataset(dataset_dir);
    fs::create_directories(out_dir);
    if (pipeline == "thermometry")
        pipeline_thermometry(ds, out_dir);
    else if (pipeline == "fold")
        pipeline_fold(ds, out_dir, threads);
    else if (pipeline == "jumps")
        pipeline_jumps(ds, out_dir, threads);
    else if (pipeline == "mi")
        pipeline_mi(ds, out_dir, threads);
    else if (pipeline == "adev")
        pipeline_adev(ds, out_dir, threads);
    else if (pipeline == "microwave")
        pipeline_microwave(ds, out_dir, threads);
    else
        throw ConfigError("unknown pipeline '" + pipeline +
                          "'; valid: thermometry, fold, jumps, mi, adev, microwave");
}

std::string cmd_report(const fs::path& dataset_dir) {
    const Dataset ds = open_dataset(dataset_dir);
    std::ostringstream out;
    out << "dataset: " << ds.scenario.name << " (seed " << ds.scenario.seed << ")\n";
    out << "manifest: all hashes verified\n";
    for (const auto& f : ds.manifest.at("files"))
        out << "  " << f.at("path").get<std::string>() << "  "
            << f.at("bytes").get<std::size_t>() << " bytes\n";
    return out.str();
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Synthetic qubit telemetry simulator and analysis toolkit"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker thread cap (0 = hardware)");

    std::string scenario_path, out_dir, dataset_dir, pipeline;
    auto* sim = app.add_subcommand("simulate", "generate a dataset from a scenario");
    sim->fallthrough();
    sim->add_option("--scenario", scenario_path, "scenario JSON")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    auto* analyze = app.add_subcommand("analyze", "run an analysis pipeline");
    analyze->fallthrough();
    analyze->add_option("--dataset", dataset_dir, "dataset directory")->required();
    analyze->add_option("--pipeline", pipeline, "pipeline name")->required();
    analyze->add_option("--out", out_dir, "output directory")->required();

    std::string shots_path, cal_path, align_path, trace_path, ref_path, series_path;
    int qubit = 0, components = 2;
    double bin_width = 5e-3, smoothing = 0.0, tau_min = 0.0, tau_max = 0.0;

    auto* calib = app.add_subcommand("calibrate", "fit a readout calibration");
    calib->fallthrough();
    calib->add_option("--shots", shots_path, "ShotTrace CSV")->required();
    calib->add_option("--qubit", qubit, "qubit id");
    calib->add_option("--components", components, "mixture components (2 or 3)");
    calib->add_option("--out", out_dir, "calibration JSON path")->required();

    auto* align_cmd = app.add_subcommand("align", "align a trace to a reference period");
    align_cmd->fallthrough();
    align_cmd->add_option("--trace", trace_path, "vibration trace (.bin)")->required();
    align_cmd->add_option("--reference", ref_path, "one-period reference (.bin)")
        ->required();
    align_cmd->add_option("--out", out_dir, "alignment JSON path")->required();

    auto* fold_cmd = app.add_subcommand("fold", "fold labeled shots by phase");
    fold_cmd->fallthrough();
    fold_cmd->add_option("--shots", shots_path, "ShotTrace CSV")->required();
    fold_cmd->add_option("--cal", cal_path, "calibration JSON")->required();
    fold_cmd->add_option("--align", align_path, "alignment JSON")->required();
    fold_cmd->add_option("--qubit", qubit, "qubit id");
    fold_cmd->add_option("--bin-width", bin_width, "phase bin width (s)");
    fold_cmd->add_option("--smoothing", smoothing, "boxcar window (s)");
    fold_cmd->add_option("--out", out_dir, "folded CSV path")->required();

    auto* jumps_cmd = app.add_subcommand("jumps", "dwell extraction and rate fits");
    jumps_cmd->fallthrough();
    jumps_cmd->add_option("--shots", shots_path, "ShotTrace CSV")->required();
    jumps_cmd->add_option("--cal", cal_path, "calibration JSON")->required();
    jumps_cmd->add_option("--align", align_path, "alignment JSON")->required();
    jumps_cmd->add_option("--qubit", qubit, "qubit id");
    jumps_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* mi_cmd = app.add_subcommand("mi", "mutual information of paired shots");
    mi_cmd->fallthrough();
    mi_cmd->add_option("--shots", shots_path, "2-qubit ShotTrace CSV")->required();
    mi_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* adev_cmd = app.add_subcommand("adev", "Allan deviation of a series");
    adev_cmd->fallthrough();
    adev_cmd->add_option("--series", series_path, "series CSV (t,value)")->required();
    adev_cmd->add_option("--tau-min", tau_min, "smallest tau (s)");
    adev_cmd->add_option("--tau-max", tau_max, "largest tau (s)");
    adev_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* mw_cmd = app.add_subcommand("microwave", "time-resolved pulse statistics");
    mw_cmd->fallthrough();
    mw_cmd->add_option("--shots", shots_path, "pulse ShotTrace CSV")->required();
    mw_cmd->add_option("--align", align_path, "alignment JSON")->required();
    mw_cmd->add_option("--bin-width", bin_width, "phase bin width (s)");
    mw_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "verify and describe a dataset");
    report_cmd->fallthrough();
    report_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();

    try {
        app.parse(argc, argv);

        if (sim->parsed()) {
            cmd_simulate(load_scenario(scenario_path), out_dir, threads);
        } else if (analyze->parsed()) {
            cmd_analyze(dataset_dir, pipeline, out_dir, threads);
        } else if (calib->parsed()) {
            const auto traces = qubitsim::read_shots_csv(shots_path);
            std::vector<std::complex<double>> iq;
            for (const auto& trace : traces)
                for (const auto& st : trace)
                    if (st.qubit_id == qubit)
                        iq.insert(iq.end(), st.iq.begin(), st.iq.end());
            if (iq.empty()) throw DataError("calibrate: no shots for that qubit");
            readout::write_calibration_json(out_dir, readout::calibrate(iq, components));
        } else if (align_cmd->parsed()) {
            const auto trace = qubitsim::read_vibration_bin(trace_path);
            const auto reference = qubitsim::read_vibration_bin(ref_path);
            sync::write_alignment_json(out_dir,
                                       sync::align_to_reference(trace, reference));
        } else if (fold_cmd->parsed()) {
            const auto traces = qubitsim::read_shots_csv(shots_path);
            const auto cal = readout::read_calibration_json(cal_path);
            const auto alignment = sync::read_alignment_json(align_path);
            std::vector<qubitsim::ShotTrace> mine;
            for (const auto& trace : traces)
                for (const auto& st : trace)
                    if (st.qubit_id == qubit) mine.push_back(st);
            label_traces(mine, cal, false);
            std::vector<sync::AlignmentResult> alignments(mine.size(), alignment);
            sync::write_folded_csv(
                out_dir, sync::fold_shots(mine, alignments, bin_width, smoothing));
        } else if (jumps_cmd->parsed()) {
            const auto traces = qubitsim::read_shots_csv(shots_path);
            const auto cal = readout::read_calibration_json(cal_path);
            const auto alignment = sync::read_alignment_json(align_path);
            std::vector<qubitsim::ShotTrace> mine;
            for (const auto& trace : traces)
                for (const auto& st : trace)
                    if (st.qubit_id == qubit) mine.push_back(st);
            if (mine.empty()) throw DataError("jumps: no shots for that qubit");
            label_traces(mine, cal, true);
            std::vector<jumps::DwellEvent> events;
            for (std::size_t ti = 0; ti < mine.size(); ++ti) {
                const double dt = mine[ti].shot_times.size() > 1
                                      ? mine[ti].shot_times[1] - mine[ti].shot_times[0]
                                      : 1.0;
                const auto ev =
                    jumps::extract_dwells(mine[ti].labels, dt, static_cast<int>(ti));
                events.insert(events.end(), ev.begin(), ev.end());
            }
            fs::create_directories(out_dir);
            jumps::write_dwells_csv(fs::path(out_dir) / "dwells.csv", events);
            std::vector<sync::AlignmentResult> alignments(mine.size(), alignment);
            const auto folded = jumps::fold_events(events, alignments);
            jumps::write_rates_csv(
                fs::path(out_dir) / "rates.csv",
                jumps::time_resolved_rates(folded, alignment.reference_period));
        } else if (mi_cmd->parsed()) {
            const auto traces = qubitsim::read_shots_csv(shots_path);
            std::vector<qubitsim::ShotTrace> q0, q1;
            for (const auto& trace : traces)
                for (const auto& st : trace) {
                    if (st.qubit_id == 0) q0.push_back(st);
                    if (st.qubit_id == 1) q1.push_back(st);
                }
            if (q0.empty() || q1.empty()) throw DataError("mi: need qubits 0 and 1");
            const auto cal0 = calibrate_qubit(q0, 2);
            const auto cal1 = calibrate_qubit(q1, 2);
            label_traces(q0, cal0, false);
            label_traces(q1, cal1, false);
            std::vector<State> a, b;
            for (const auto& st : q0) a.insert(a.end(), st.labels.begin(), st.labels.end());
            for (const auto& st : q1) b.insert(b.end(), st.labels.begin(), st.labels.end());
            fs::create_directories(out_dir);
            correlate::write_joint_json(fs::path(out_dir) / "joint.json",
                                        correlate::joint_from_shots(a, b));
        } else if (adev_cmd->parsed()) {
            const auto [times, values] = processes::read_series_csv(series_path);
            if (times.size() < 2) throw DataError("adev: series too short");
            const double dt = times[1] - times[0];
            if (tau_min <= 0.0) tau_min = 5.0 * dt;
            if (tau_max <= 0.0)
                tau_max = (times.back() - times.front()) / 20.0;
            const auto taus = processes::log_tau_grid(tau_min, tau_max, 10, dt);
            const auto curve = processes::empirical_adev(values, dt, taus);
            fs::create_directories(out_dir);
            processes::write_adev_csv(fs::path(out_dir) / "adev.csv", curve);
            processes::write_fit_json(fs::path(out_dir) / "adev_fit.json",
                                      processes::fit_adev_model(curve));
        } else if (mw_cmd->parsed()) {
            const auto traces = qubitsim::read_shots_csv(shots_path);
            const auto alignment = sync::read_alignment_json(align_path);
            std::vector<qubitsim::ShotTrace> pulses;
            for (const auto& trace : traces)
                for (const auto& st : trace) pulses.push_back(st);
            std::vector<sync::AlignmentResult> alignments(pulses.size(), alignment);
            const auto [trans, noise] =
                sync::time_resolved_microwave_stats(pulses, alignments, bin_width);
            fs::create_directories(out_dir);
            sync::write_folded_csv(fs::path(out_dir) / "transmission.csv", trans);
            sync::write_folded_csv(fs::path(out_dir) / "background_noise.csv", noise);
        } else if (report_cmd->parsed()) {
            std::cout << cmd_report(dataset_dir);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const InsufficientDataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::out_of_range& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const FitError& e) {
        std::cerr << "fit failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace qtel::cli
