#pragma once

#include "qtel/processes.hpp"
#include "qtel/qubitsim.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qtel::cli {

/// One self-contained simulation + analysis recipe. Loaded from JSON with
/// strict key checking: unknown keys are config errors.
struct Scenario {
    std::string name;
    std::uint64_t seed = 0;

    // qubit-telemetry scenarios
    std::optional<qubitsim::VibrationSpec> vibration;
    double vibration_sample_rate = 2000.0;
    struct QubitSpec {
        qubitsim::RateProfile profile;
        qubitsim::ReadoutModel readout;
        std::optional<qubitsim::ThreeLevelRates> three_level;
        double frequency_hz = 0.0;
        double anharmonicity_hz = 0.0;
    };
    std::vector<QubitSpec> qubits;
    qubitsim::ScheduleMode schedule_mode = qubitsim::ScheduleMode::sparse;
    double schedule_interval = 1e-3;
    std::size_t schedule_count = 0;
    std::size_t n_traces = 1;
    bool random_trace_phase = false;

    // stochastic-process (ADEV) scenarios
    struct AdevProcesses {
        std::optional<processes::TelegraphParams> telegraph;
        std::optional<processes::PoissonResetParams> poisson_reset;
        double duration = 0.0;
        double dt = 0.0;
        int realizations = 1;
    };
    std::optional<AdevProcesses> adev;

    // microwave-bath scenarios (coherent pulses, no qubit)
    struct MicrowavePulse {
        std::complex<double> mean;
        double sigma = 1.0;
    };
    std::optional<MicrowavePulse> microwave;

    struct Analysis {
        int calibration_components = 2;
        double fold_bin_width = 5e-3;
        double smoothing_window = 0.0;
        double mi_bin_width = 5e-3;
        std::vector<double> mi_intervals;
        double adev_tau_min = 0.0; // 0 = derive from dt/duration
        double adev_tau_max = 0.0;
    };
    Analysis analysis;
};

Scenario load_scenario(const std::filesystem::path& path);

/// Generate the dataset files plus manifest.json with per-file hashes.
void cmd_simulate(const Scenario& scenario, const std::filesystem::path& out_dir,
                  unsigned threads = 0);

/// Run one named pipeline over a simulated dataset; verifies manifest
/// hashes first. Pipelines: thermometry, fold, jumps, mi, adev, microwave.
void cmd_analyze(const std::filesystem::path& dataset_dir, const std::string& pipeline,
                 const std::filesystem::path& out_dir, unsigned threads = 0);

/// Verify a dataset and list its contents and analysis outputs.
std::string cmd_report(const std::filesystem::path& dataset_dir);

/// Full command-line front end; returns the process exit code
/// (0 ok, 2 config error, 3 data error, 4 fit failure).
int run_cli(int argc, char** argv);

} // namespace qtel::cli
