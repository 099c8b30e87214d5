#pragma once

#include <functional>
#include <vector>

namespace shelvesim::fit {

struct LevMarOptions {
    int max_iterations = 200;
    double ftol = 1e-14;       // relative SSR improvement
    double xtol = 1e-14;       // relative step size
    double lambda_init = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
};

struct LevMarResult {
    std::vector<double> params;
    std::vector<double> std_errors;  // asymptotic, from s^2 (J^T J)^-1
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

// residuals(p, r): fills r with model - data (length m)
// jacobian(p, J): fills row-major m x n Jacobian d r_i / d p_j
using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;
using JacobianFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

LevMarResult levmar(const ResidualFn& residuals, const JacobianFn& jacobian,
                    std::vector<double> initial, size_t n_residuals,
                    const LevMarOptions& opts = {});

// Solves A x = b for small dense symmetric positive definite A (in place
// Cholesky); returns false if not SPD.
bool solve_spd(std::vector<double> a, std::vector<double> b, std::vector<double>& x, size_t n);

}  // namespace shelvesim::fit
