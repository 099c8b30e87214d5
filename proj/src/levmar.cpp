#include "shelvesim/levmar.hpp"

#include <cmath>
#include <stdexcept>

namespace shelvesim::fit {

bool solve_spd(std::vector<double> a, std::vector<double> b, std::vector<double>& x, size_t n) {
    // Cholesky A = L L^T
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (sum <= 0.0) return false;
                a[i * n + j] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    // forward then backward substitution
    for (size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
        b[i] = sum / a[i * n + i];
    }
    x.assign(n, 0.0);
    for (size_t ii = n; ii-- > 0;) {
        double sum = b[ii];
        for (size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * x[k];
        x[ii] = sum / a[ii * n + ii];
    }
    return true;
}

namespace {

double ssr_of(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

// inverse of SPD matrix via Cholesky column solves
bool invert_spd(const std::vector<double>& a, std::vector<double>& inv, size_t n) {
    inv.assign(n * n, 0.0);
    for (size_t col = 0; col < n; ++col) {
        std::vector<double> e(n, 0.0);
        e[col] = 1.0;
        std::vector<double> x;
        if (!solve_spd(a, e, x, n)) return false;
        for (size_t i = 0; i < n; ++i) inv[i * n + col] = x[i];
    }
    return true;
}

}  // namespace

LevMarResult levmar(const ResidualFn& residuals, const JacobianFn& jacobian,
                    std::vector<double> initial, size_t n_residuals, const LevMarOptions& opts) {
    const size_t n = initial.size();
    const size_t m = n_residuals;
    if (m < n) throw std::invalid_argument("levmar: fewer residuals than parameters");

    LevMarResult res;
    res.params = std::move(initial);

    std::vector<double> r(m), jac(m * n);
    residuals(res.params, r);
    double ssr = ssr_of(r);
    double lambda = opts.lambda_init;

    std::vector<double> jtj(n * n), jtr(n), step, trial(n), r_trial(m);

    for (int it = 0; it < opts.max_iterations; ++it) {
        res.iterations = it + 1;
        jacobian(res.params, jac);

        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        for (size_t i = 0; i < m; ++i) {
            for (size_t a = 0; a < n; ++a) {
                const double ja = jac[i * n + a];
                jtr[a] += ja * r[i];
                for (size_t b = 0; b <= a; ++b) jtj[a * n + b] += ja * jac[i * n + b];
            }
        }
        for (size_t a = 0; a < n; ++a)
            for (size_t b = a + 1; b < n; ++b) jtj[a * n + b] = jtj[b * n + a];

        bool accepted = false;
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
            std::vector<double> damped = jtj;
            for (size_t a = 0; a < n; ++a) damped[a * n + a] *= 1.0 + lambda;
            std::vector<double> rhs(n);
            for (size_t a = 0; a < n; ++a) rhs[a] = -jtr[a];
            if (!solve_spd(damped, rhs, step, n)) {
                lambda *= opts.lambda_up;
                continue;
            }
            for (size_t a = 0; a < n; ++a) trial[a] = res.params[a] + step[a];
            residuals(trial, r_trial);
            const double ssr_trial = ssr_of(r_trial);
            if (std::isfinite(ssr_trial) && ssr_trial <= ssr) {
                double step_norm = 0.0, p_norm = 0.0;
                for (size_t a = 0; a < n; ++a) {
                    step_norm += step[a] * step[a];
                    p_norm += res.params[a] * res.params[a];
                }
                const double rel_impr = (ssr - ssr_trial) / std::max(ssr, 1e-300);
                res.params = trial;
                r = r_trial;
                const double prev = ssr;
                ssr = ssr_trial;
                lambda = std::max(lambda * opts.lambda_down, 1e-14);
                accepted = true;
                if (rel_impr < opts.ftol || step_norm <= opts.xtol * opts.xtol * (p_norm + 1e-30) ||
                    prev == 0.0) {
                    res.converged = true;
                }
            } else {
                lambda *= opts.lambda_up;
            }
        }
        if (!accepted) {
            // no downhill step found; treat current point as stationary
            res.converged = ssr < 1e-300 || it > 0;
            break;
        }
        if (res.converged) break;
    }

    res.ssr = ssr;

    // asymptotic standard errors
    res.std_errors.assign(n, 0.0);
    std::vector<double> inv;
    jacobian(res.params, jac);
    std::fill(jtj.begin(), jtj.end(), 0.0);
    for (size_t i = 0; i < m; ++i)
        for (size_t a = 0; a < n; ++a)
            for (size_t b = 0; b <= a; ++b) jtj[a * n + b] += jac[i * n + a] * jac[i * n + b];
    for (size_t a = 0; a < n; ++a)
        for (size_t b = a + 1; b < n; ++b) jtj[a * n + b] = jtj[b * n + a];
    const double dof = static_cast<double>(m > n ? m - n : 1);
    if (invert_spd(jtj, inv, n)) {
        const double s2 = ssr / dof;
        for (size_t a = 0; a < n; ++a) res.std_errors[a] = std::sqrt(std::max(0.0, s2 * inv[a * n + a]));
    }
    return res;
}

}  // namespace shelvesim::fit
