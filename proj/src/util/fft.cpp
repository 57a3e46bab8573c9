#include "qtel/util/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace qtel::util {

namespace {
// FFTW plan creation/destruction is not thread safe; executions are.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
    if (x.empty()) throw std::invalid_argument("fft: empty input");
    std::vector<std::complex<double>> out(x.size());
    auto* in_p = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(x.data()));
    auto* out_p = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(x.size()), in_p, out_p,
                                FFTW_FORWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x) {
    if (x.empty()) throw std::invalid_argument("ifft: empty input");
    std::vector<std::complex<double>> out(x.size());
    auto* in_p = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(x.data()));
    auto* out_p = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(x.size()), in_p, out_p,
                                FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(x.size());
    for (auto& v : out) v *= scale;
    return out;
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("rfft: empty input");
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    auto* out_p = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(x.size()),
                                    const_cast<double*>(x.data()), out_p,
                                    FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<double> circular_cross_correlation(const std::vector<double>& a,
                                               const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("circular_cross_correlation: size mismatch");
    const std::size_t n = a.size();
    std::vector<std::complex<double>> ca(n), cb(n);
    for (std::size_t i = 0; i < n; ++i) {
        ca[i] = a[i];
        cb[i] = b[i];
    }
    const auto fa = fft(ca);
    const auto fb = fft(cb);
    std::vector<std::complex<double>> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = fa[i] * std::conj(fb[i]);
    const auto c = ifft(prod);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = c[i].real();
    return out;
}

} // namespace qtel::util
