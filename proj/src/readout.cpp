#include "qtel/readout.hpp"

#include "qtel/errors.hpp"
#include "qtel/util/io.hpp"
#include "qtel/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qtel::readout {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

constexpr int kEmRestarts = 20;
constexpr int kEmMaxIters = 1000;
constexpr double kEmRelTol = 1e-9;
constexpr int kHistBins = 4096;
constexpr std::uint64_t kEmBaseSeed = 0x9e3779b97f4a7c15ULL;

struct Component {
    double weight, mean, sigma;
};

// EM on a histogram of the (sorted) samples. Binning makes the fit cheap,
// order independent, and deterministic; with 4096 bins the discretization
// is far below the cluster widths we care about.
struct Histogram {
    std::vector<double> centers;
    std::vector<double> counts;
    double total = 0.0;
    double bin_width = 0.0;
};

Histogram build_histogram(std::span<const double> samples) {
    const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *mn_it;
    const double hi = *mx_it;
    if (!(hi > lo)) throw FitError("fit_gaussian_mixture: zero-variance input");
    const double width = (hi - lo) / kHistBins;
    Histogram h;
    h.bin_width = width;
    h.centers.resize(kHistBins);
    h.counts.assign(kHistBins, 0.0);
    for (int b = 0; b < kHistBins; ++b)
        h.centers[b] = lo + (static_cast<double>(b) + 0.5) * width;
    for (double x : samples) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        if (b >= kHistBins) b = kHistBins - 1;
        h.counts[b] += 1.0;
    }
    h.total = static_cast<double>(samples.size());
    return h;
}

double log_normal_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// k-means++ seeding on the histogram, then a few Lloyd sweeps.
std::vector<Component> kmeans_init(const Histogram& h, int k, util::Rng& rng) {
    const std::size_t nb = h.centers.size();
    std::vector<double> centers;
    std::discrete_distribution<std::size_t> first(h.counts.begin(), h.counts.end());
    centers.push_back(h.centers[first(rng)]);
    std::vector<double> d2(nb);
    while (static_cast<int>(centers.size()) < k) {
        for (std::size_t b = 0; b < nb; ++b) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers)
                best = std::min(best, (h.centers[b] - c) * (h.centers[b] - c));
            d2[b] = best * h.counts[b];
        }
        std::discrete_distribution<std::size_t> pick(d2.begin(), d2.end());
        centers.push_back(h.centers[pick(rng)]);
    }
    std::sort(centers.begin(), centers.end());

    std::vector<double> sum_w(k), sum_x(k), sum_xx(k);
    for (int sweep = 0; sweep < 10; ++sweep) {
        std::fill(sum_w.begin(), sum_w.end(), 0.0);
        std::fill(sum_x.begin(), sum_x.end(), 0.0);
        std::fill(sum_xx.begin(), sum_xx.end(), 0.0);
        for (std::size_t b = 0; b < nb; ++b) {
            if (h.counts[b] == 0.0) continue;
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                const double d = std::fabs(h.centers[b] - centers[j]);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            sum_w[best] += h.counts[b];
            sum_x[best] += h.counts[b] * h.centers[b];
            sum_xx[best] += h.counts[b] * h.centers[b] * h.centers[b];
        }
        for (int j = 0; j < k; ++j)
            if (sum_w[j] > 0.0) centers[j] = sum_x[j] / sum_w[j];
        std::sort(centers.begin(), centers.end());
    }

    const double span = h.centers.back() - h.centers.front();
    std::vector<Component> comps(k);
    for (int j = 0; j < k; ++j) {
        const double w = sum_w[j] > 0.0 ? sum_w[j] / h.total : 1e-6;
        double var = sum_w[j] > 0.0 ? sum_xx[j] / sum_w[j] - centers[j] * centers[j] : 0.0;
        var = std::max(var, span * span * 1e-8);
        comps[j] = {w, centers[j], std::sqrt(var)};
    }
    return comps;
}

struct EmFit {
    std::vector<Component> comps;
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
};

EmFit run_em(const Histogram& h, std::vector<Component> comps, double sigma_floor) {
    const std::size_t nb = h.centers.size();
    const int k = static_cast<int>(comps.size());
    std::vector<double> resp(nb * k);
    EmFit fit;

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kEmMaxIters; ++iter) {
        // E step with a log-sum-exp guard: far tails underflow otherwise
        double ll = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            if (h.counts[b] == 0.0) continue;
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                const double lp = std::log(std::max(comps[j].weight, 1e-300)) +
                                  log_normal_pdf(h.centers[b], comps[j].mean,
                                                 comps[j].sigma);
                resp[b * k + j] = lp;
                mx = std::max(mx, lp);
            }
            double denom = 0.0;
            for (int j = 0; j < k; ++j) denom += std::exp(resp[b * k + j] - mx);
            ll += h.counts[b] * (mx + std::log(denom));
            for (int j = 0; j < k; ++j)
                resp[b * k + j] = std::exp(resp[b * k + j] - mx) / denom;
        }

        // M step
        for (int j = 0; j < k; ++j) {
            double sw = 0.0, sx = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                const double r = h.counts[b] * resp[b * k + j];
                sw += r;
                sx += r * h.centers[b];
            }
            const double mean = sw > 0.0 ? sx / sw : comps[j].mean;
            double svar = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                const double r = h.counts[b] * resp[b * k + j];
                svar += r * (h.centers[b] - mean) * (h.centers[b] - mean);
            }
            comps[j].weight = sw / h.total;
            comps[j].mean = mean;
            comps[j].sigma = std::sqrt(std::max(
                sw > 0.0 ? svar / sw : 0.0, sigma_floor * sigma_floor));
        }

        fit.loglik = ll;
        if (iter > 0 && std::fabs(ll - prev_ll) <=
                            kEmRelTol * std::max(1.0, std::fabs(ll))) {
            fit.converged = true;
            break;
        }
        prev_ll = ll;
    }
    fit.comps = std::move(comps);
    std::sort(fit.comps.begin(), fit.comps.end(),
              [](const Component& a, const Component& b) { return a.mean < b.mean; });
    return fit;
}

} // namespace

std::pair<std::vector<std::complex<double>>, PcaRotation>
pca_rotate(std::span<const std::complex<double>> iq) {
    require(iq.size() >= 2, "pca_rotate: need >= 2 samples");

    double mx = 0.0, my = 0.0;
    for (const auto& z : iq) {
        mx += z.real();
        my += z.imag();
    }
    mx /= static_cast<double>(iq.size());
    my /= static_cast<double>(iq.size());

    double cxx = 0.0, cxy = 0.0, cyy = 0.0;
    for (const auto& z : iq) {
        const double x = z.real() - mx;
        const double y = z.imag() - my;
        cxx += x * x;
        cxy += x * y;
        cyy += y * y;
    }
    if (cxx + cyy <= 0.0)
        throw FitError("pca_rotate: zero-variance input");

    // principal axis of the 2x2 covariance; rotate it onto the real axis
    const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    const double c = std::cos(theta);
    const double s = std::sin(theta);

    PcaRotation rot;
    rot.offset = {mx, my};
    rot.matrix = {{{c, s}, {-s, c}}}; // det = +1

    std::vector<std::complex<double>> out;
    out.reserve(iq.size());
    for (const auto& z : iq) out.push_back(rot.apply(z));
    return {std::move(out), rot};
}

CalibrationResult fit_gaussian_mixture(std::span<const double> samples_i,
                                       int n_components) {
    require(n_components == 2 || n_components == 3,
            "fit_gaussian_mixture: n_components must be 2 or 3");
    require(samples_i.size() >= 1000, "fit_gaussian_mixture: need >= 1000 samples");

    const Histogram h = build_histogram(samples_i);
    const double span = h.centers.back() - h.centers.front();
    const double sigma_floor = std::max(span * 1e-9, h.bin_width * 0.25);

    EmFit best;
    for (int restart = 0; restart < kEmRestarts; ++restart) {
        util::Rng rng = util::make_rng(kEmBaseSeed + static_cast<std::uint64_t>(restart));
        EmFit fit = run_em(h, kmeans_init(h, n_components, rng), sigma_floor);
        if (fit.loglik > best.loglik) best = fit;
    }
    if (!best.converged)
        throw FitError("fit_gaussian_mixture: EM did not converge in any restart");
    for (const Component& cmp : best.comps) {
        if (cmp.weight > 1e-3 && cmp.sigma <= sigma_floor * (1.0 + 1e-12))
            throw FitError("fit_gaussian_mixture: component collapsed below resolution");
    }

    // Components whose means sit within ~2.5 widths are not resolvable
    // states: EM splits a single population into overlapping twins of
    // roughly that separation. Pool them and pad with zero-weight
    // placeholders beyond the data so the means stay strictly ordered and
    // thresholds stay out of the cluster.
    auto& comps = best.comps;
    bool merged = true;
    while (merged && comps.size() > 1) {
        merged = false;
        for (std::size_t j = 0; j + 1 < comps.size(); ++j) {
            const double gap = comps[j + 1].mean - comps[j].mean;
            if (gap <= 2.5 * std::max(comps[j].sigma, comps[j + 1].sigma)) {
                const double w = comps[j].weight + comps[j + 1].weight;
                const double m = (comps[j].weight * comps[j].mean +
                                  comps[j + 1].weight * comps[j + 1].mean) / w;
                const double ex2 =
                    (comps[j].weight * (comps[j].sigma * comps[j].sigma +
                                        comps[j].mean * comps[j].mean) +
                     comps[j + 1].weight * (comps[j + 1].sigma * comps[j + 1].sigma +
                                            comps[j + 1].mean * comps[j + 1].mean)) / w;
                comps[j] = {w, m, std::sqrt(std::max(ex2 - m * m, sigma_floor * sigma_floor))};
                comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(j) + 1);
                merged = true;
                break;
            }
        }
    }
    while (static_cast<int>(comps.size()) < n_components) {
        const Component& last = comps.back();
        comps.push_back({0.0, last.mean + 8.0 * last.sigma, last.sigma});
    }

    CalibrationResult cal;
    double wsum = 0.0;
    for (const Component& cmp : best.comps) wsum += cmp.weight;
    for (const Component& cmp : best.comps) {
        cal.means.push_back(cmp.mean);
        cal.sigmas.push_back(cmp.sigma);
        cal.weights.push_back(cmp.weight / wsum);
    }
    for (std::size_t j = 0; j + 1 < cal.means.size(); ++j)
        cal.thresholds.push_back(0.5 * (cal.means[j] + cal.means[j + 1]));
    return cal;
}

CalibrationResult calibrate(std::span<const std::complex<double>> iq, int n_components) {
    auto [rotated, rot] = pca_rotate(iq);
    std::vector<double> proj(rotated.size());
    for (std::size_t i = 0; i < rotated.size(); ++i) proj[i] = rotated[i].real();

    CalibrationResult cal = fit_gaussian_mixture(proj, n_components);
    const auto heaviest = static_cast<std::size_t>(
        std::max_element(cal.weights.begin(), cal.weights.end()) - cal.weights.begin());
    if (heaviest != 0) {
        // flip by a pi rotation so the dominant (thermal ground) cluster
        // sits at the lowest I; det stays +1
        for (auto& row : rot.matrix)
            for (auto& v : row) v = -v;
        std::reverse(cal.means.begin(), cal.means.end());
        std::reverse(cal.sigmas.begin(), cal.sigmas.end());
        std::reverse(cal.weights.begin(), cal.weights.end());
        for (auto& m : cal.means) m = -m;
        cal.thresholds.clear();
        for (std::size_t j = 0; j + 1 < cal.means.size(); ++j)
            cal.thresholds.push_back(0.5 * (cal.means[j] + cal.means[j + 1]));
    }
    cal.rotation = rot;
    return cal;
}

std::vector<State> classify(std::span<const double> samples_i,
                            const CalibrationResult& cal) {
    require(!cal.thresholds.empty(), "classify: calibration has no thresholds");
    std::vector<State> labels;
    labels.reserve(samples_i.size());
    for (double x : samples_i) {
        std::size_t j = 0;
        while (j < cal.thresholds.size() && x > cal.thresholds[j]) ++j;
        labels.push_back(static_cast<State>(j));
    }
    return labels;
}

std::vector<State> classify_iq(std::span<const std::complex<double>> iq,
                               const CalibrationResult& cal) {
    std::vector<double> proj(iq.size());
    for (std::size_t i = 0; i < iq.size(); ++i)
        proj[i] = cal.rotation.apply(iq[i]).real();
    return classify(proj, cal);
}

std::pair<double, double> separation_errors(const CalibrationResult& cal) {
    require(cal.means.size() >= 2, "separation_errors: need two calibrated components");
    const double mu_bar = std::fabs(cal.means[1] - cal.means[0]) / 2.0;
    const double sep_up = 0.5 * std::erfc(mu_bar / (std::sqrt(2.0) * cal.sigmas[0]));
    const double sep_down = 0.5 * std::erfc(mu_bar / (std::sqrt(2.0) * cal.sigmas[1]));
    return {sep_up, sep_down};
}

std::pair<double, double> flip_error_bounds(double gamma_up, double gamma_down,
                                            double t_readout) {
    require(t_readout > 0.0, "flip_error_bounds: t_readout must be > 0");
    require(gamma_up >= 0.0 && gamma_down >= 0.0, "flip_error_bounds: negative rate");
    return {gamma_up * t_readout, gamma_down * t_readout};
}

std::pair<double, double> free_evolution_rates(double p_th, double t1) {
    require(p_th >= 0.0 && p_th < 1.0, "free_evolution_rates: p_th outside [0,1)");
    require(t1 > 0.0, "free_evolution_rates: t1 must be > 0");
    return {p_th / t1, (1.0 - p_th) / t1};
}

double effective_temperature(double p_upper, double p_lower,
                             double transition_freq_hz) {
    require(transition_freq_hz > 0.0, "effective_temperature: frequency must be > 0");
    require(p_upper > 0.0, "effective_temperature: p_upper must be > 0");
    if (p_upper >= p_lower)
        throw NonthermalInversionError(
            "effective_temperature: p_upper >= p_lower (population inversion, "
            "negative-temperature condition)");
    return kPlanckOverBoltzmann * transition_freq_hz / std::log(p_lower / p_upper);
}

double required_bath_occupation(double p_e, double gamma_ex, double gamma_in) {
    require(gamma_ex > 0.0, "required_bath_occupation: gamma_ex must be > 0");
    require(gamma_in >= 0.0, "required_bath_occupation: gamma_in must be >= 0");
    require(p_e >= 0.0, "required_bath_occupation: p_e must be >= 0");
    if (p_e >= 0.5)
        throw NoSolutionError(
            "required_bath_occupation: p_e >= 0.5 has no finite bath occupation");
    return p_e * (gamma_ex + gamma_in) / (gamma_ex * (1.0 - 2.0 * p_e));
}

double excited_probability_from_bath(double n_ex, double gamma_ex, double gamma_in) {
    return gamma_ex * n_ex / (gamma_ex * (2.0 * n_ex + 1.0) + gamma_in);
}

double measured_occupation(double n_ex, double eta) {
    require(eta > 0.0 && eta <= 1.0, "measured_occupation: eta outside (0,1]");
    require(n_ex >= 0.0, "measured_occupation: n_ex must be >= 0");
    return eta * n_ex;
}

Populations populations_from_calibration(const CalibrationResult& cal) {
    Populations pops;
    pops.p = {0.0, 0.0, 0.0};
    double total = 0.0;
    for (double w : cal.weights) total += w;
    for (std::size_t j = 0; j < cal.weights.size() && j < 3; ++j)
        pops.p[j] = cal.weights[j] / total;
    return pops;
}

void write_calibration_json(const std::filesystem::path& path,
                            const CalibrationResult& cal) {
    nlohmann::ordered_json j;
    j["rotation"] = {{"matrix", cal.rotation.matrix}, {"offset", cal.rotation.offset}};
    j["means"] = cal.means;
    j["sigmas"] = cal.sigmas;
    j["weights"] = cal.weights;
    j["thresholds"] = cal.thresholds;
    util::atomic_write_file(path, j.dump(2) + "\n");
}

CalibrationResult read_calibration_json(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(util::read_file(path));
    CalibrationResult cal;
    cal.rotation.matrix = j.at("rotation").at("matrix");
    cal.rotation.offset = j.at("rotation").at("offset");
    cal.means = j.at("means").get<std::vector<double>>();
    cal.sigmas = j.at("sigmas").get<std::vector<double>>();
    cal.weights = j.at("weights").get<std::vector<double>>();
    cal.thresholds = j.at("thresholds").get<std::vector<double>>();
    return cal;
}

} // namespace qtel::readout
