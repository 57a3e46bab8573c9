#include "qtel/util/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qtel::util {

namespace {

double ssr_of(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

void clamp_to_box(std::vector<double>& x, const LmOptions& o) {
    if (o.lower.size() == x.size())
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(x[i], o.lower[i]);
    if (o.upper.size() == x.size())
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::min(x[i], o.upper[i]);
}

// Solve A * x = b in place for a small symmetric positive definite A
// (Cholesky without pivoting). Returns false if not SPD.
bool solve_spd(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (sum <= 0.0) return false;
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[j * n + i] = sum / a[i * n + i];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
        b[i] = sum / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * b[k];
        b[ii] = sum / a[ii * n + ii];
    }
    return true;
}

} // namespace

LmResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    std::vector<double> x0, const LmOptions& opts) {
    const std::size_t n = x0.size();
    clamp_to_box(x0, opts);

    std::vector<double> r = residuals(x0);
    const std::size_t m = r.size();
    double ssr = ssr_of(r);
    double lambda = opts.lambda0;

    LmResult res;
    res.x = x0;
    res.ssr = ssr;

    std::vector<double> jac(m * n);          // column-major: jac[j*m + i]
    std::vector<double> jtj(n * n), jtr(n);
    std::vector<double> a(n * n), rhs(n);
    double last_rel = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        res.iters = iter + 1;

        // forward-difference Jacobian at the current point
        for (std::size_t j = 0; j < n; ++j) {
            const double h = 1e-8 * std::max(1.0, std::fabs(res.x[j]));
            std::vector<double> xp = res.x;
            xp[j] += h;
            const std::vector<double> rp = residuals(xp);
            for (std::size_t i = 0; i < m; ++i) jac[j * m + i] = (rp[i] - r[i]) / h;
        }
        for (std::size_t j = 0; j < n; ++j) {
            jtr[j] = 0.0;
            for (std::size_t i = 0; i < m; ++i) jtr[j] += jac[j * m + i] * r[i];
            for (std::size_t k = j; k < n; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += jac[j * m + i] * jac[k * m + i];
                jtj[j * n + k] = jtj[k * n + j] = s;
            }
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            a = jtj;
            for (std::size_t j = 0; j < n; ++j)
                a[j * n + j] += lambda * std::max(jtj[j * n + j], 1e-30);
            for (std::size_t j = 0; j < n; ++j) rhs[j] = -jtr[j];
            if (!solve_spd(a, rhs, n)) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> xt = res.x;
            for (std::size_t j = 0; j < n; ++j) xt[j] += rhs[j];
            clamp_to_box(xt, opts);
            const std::vector<double> rt = residuals(xt);
            const double st = ssr_of(rt);
            if (std::isfinite(st) && st < ssr) {
                const double rel = (ssr - st) / std::max(ssr, 1e-300);
                res.x = xt;
                r = rt;
                ssr = st;
                res.ssr = st;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                last_rel = rel;
                if (rel < opts.tol) res.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (res.converged || !stepped) {
            if (!stepped) {
                // no downhill step exists: a (possibly bound-constrained)
                // minimum, or the damping blew up
                res.converged = ssr <= 0.0 || lambda > 1e8;
            }
            break;
        }
    }
    // ran out of iterations while the improvements had already stalled
    if (!res.converged && last_rel < 1e-8) res.converged = true;
    return res;
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              int max_iter) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("bisect: endpoints do not bracket a root");
    for (int i = 0; i < max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace qtel::util
