#pragma once

#include "confeig/manifold.hpp"

namespace confeig {

/// Dimensional constants of the critical Sobolev embedding in dimension n.
struct SobolevConstants {
    int n = 0;
    double two_star = 0.0;     // 2n/(n-2)
    double omega_n = 0.0;      // volume of the standard n-sphere
    double K_n = 0.0;          // sharp Sobolev constant
    double K_n_inv_sq = 0.0;   // K_n^{-2}
    double sphere_bound = 0.0; // n * omega_n^{2/n}
};

/// Requires n >= 3. omega_n = 2 pi^{(n+1)/2} / Gamma((n+1)/2) and
/// K_n = (2 / sqrt(n(n-2))) omega_n^{-1/n}; K_n^{-2} (2*-2) = n omega_n^{2/n}.
SobolevConstants constants(int n);

/// The sharp-Sobolev functional
///   J(u) = [u^T K u + sum w h u^2 - K_n^{-2} (sum w |u|^{2*})^{2/2*}] / sum w u^2.
/// Scale invariant in u; throws DegenerateInputError for u == 0.
double evaluate_J(const DiscreteManifold& m, const ScalarField& h, const ScalarField& u);

/// alpha(g,h) = -inf J.
double alpha_from_minimum(double J_min);

/// Yamabe quotient at the trial field u on a manifold of constant scalar
/// curvature S_g:
///   (u^T K u + (n-2)/(4(n-1)) S_g sum w u^2) / (sum w |u|^{2*})^{2/2*}.
double yamabe_quotient(const DiscreteManifold& m, double scalar_curvature,
                       const ScalarField& u);

struct AdmissibilityReport {
    double mu_estimate = 0.0; // upper bound on the Yamabe invariant
    double K_inv_sq = 0.0;
    bool aubin_ok = false; // mu_estimate < K_n^{-2}
    double h_center = 0.0; // (n-2)/(4(n-1)) * S_g
    double h_norm_gap = 0.0; // || h - h_center ||_inf
    bool h_ok = false; // h_norm_gap <= (K_inv_sq - mu_estimate)/2
};

/// Evaluates both admissibility conditions; reports booleans, never throws
/// on violations.
AdmissibilityReport check_admissibility(const DiscreteManifold& m, double scalar_curvature,
                                        const ScalarField& h, double mu_estimate);

} // namespace confeig
