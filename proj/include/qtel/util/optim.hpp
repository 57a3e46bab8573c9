#pragma once

#include <functional>
#include <vector>

namespace qtel::util {

struct LmOptions {
    int max_iter = 300;
    double tol = 1e-14;      // relative decrease of the SSR to call converged
    double lambda0 = 1e-3;   // initial damping
    std::vector<double> lower; // optional box, empty = unbounded
    std::vector<double> upper;
};

struct LmResult {
    std::vector<double> x;
    double ssr = 0.0;
    int iters = 0;
    bool converged = false;
};

/// Damped least squares (Levenberg-Marquardt) with a forward-difference
/// Jacobian. `residuals` maps parameters to the residual vector; the box,
/// when given, is enforced by clamping after every accepted step.
LmResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    std::vector<double> x0, const LmOptions& opts = {});

/// Bisection root find for a continuous monotone function on [lo, hi].
/// Requires f(lo) and f(hi) to bracket zero.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              int max_iter = 200);

} // namespace qtel::util
