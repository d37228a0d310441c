#pragma once

#include <cstdint>
#include <vector>

#include "confeig/manifold.hpp"
#include "confeig/sobolev.hpp"

namespace confeig {

struct MinimizerOptions {
    int max_iterations = 5000;
    double el_residual_tol = 1e-9;
    double initial_step = 1.0;
    double backtracking_factor = 0.5;
    double sufficient_decrease = 1e-4; // Armijo constant
    bool precondition = true;
    int restarts = 5; // constant start plus random log-normal perturbations
    std::uint64_t seed = 1234567;
    double positivity_floor = 1e-14;
    double blowup_ratio = 1e4; // max(u)/mean(u) beyond this flags concentration
    double cg_tol = 1e-8;      // preconditioner solve tolerance
    int cg_max_iterations = 2000;

    void validate() const;
};

struct RestartSummary {
    int index = 0;
    double J_value = 0.0;
    double el_residual = 0.0;
    bool converged = false;
    int iterations = 0;
    double sup_distance_to_best = 0.0;
};

struct MinimizerState {
    ScalarField u;            // positive, sum w u^{2*} = 1
    double J_value = 0.0;
    double alpha = 0.0;       // -J_value at convergence
    double el_residual = 0.0; // w-weighted L2 norm of the Euler-Lagrange residual
    int iterations = 0;
    bool converged = false;
    bool blowup_flag = false;
    std::vector<double> trace; // J per accepted step, non-increasing
    std::vector<RestartSummary> restarts; // all restarts, best first marked by index
};

/// Rescale |u| so that sum w |u|^{2*} = 1.
ScalarField normalize_critical(const DiscreteManifold& m, const ScalarField& u);

/// Minimize J_{g,h} over positive fields with sum w u^{2*} = 1 by
/// Sobolev-preconditioned projected gradient descent with Armijo
/// backtracking; returns the best state over all restarts.
MinimizerState minimize_J(const DiscreteManifold& m, const ScalarField& h,
                          const MinimizerOptions& options = {});

/// w-weighted L2 norm of r_i = (K u)_i / w_i + (h_i + alpha) u_i - K_n^{-2} u_i^{2*-1}.
double euler_lagrange_residual(const DiscreteManifold& m, const ScalarField& h, double alpha,
                               const ScalarField& u);

/// Second variation of J at (u, alpha) in direction v (perturbation u(1+tv)):
///   Q(v) = (uv)^T K (uv) + sum w (h+alpha) u^2 v^2
///          - K_n^{-2}(2*-1) sum w v^2 u^{2*} + K_n^{-2}(2*-2) (sum w v u^{2*})^2.
double second_variation_form(const DiscreteManifold& m, const ScalarField& h, double alpha,
                             const ScalarField& u, const ScalarField& v);

/// Upper bound on the Yamabe invariant: minimizes the Yamabe quotient with
/// the same descent machinery (critical term dropped from J, h replaced by
/// the curvature term). Any reached state bounds mu from above.
double estimate_mu_upper_bound(const DiscreteManifold& m, double scalar_curvature,
                               const MinimizerOptions& options = {});

} // namespace confeig
