#pragma once

#include "confeig/eigensolver.hpp"
#include "confeig/manifold.hpp"
#include "confeig/sobolev.hpp"

namespace confeig {

/// Spectrum of the Laplacian of the conformal metric u^{4/(n-2)} g.
struct SpectralReport {
    Eigen::VectorXd eigenvalues;  // ascending, eigenvalues[0] ~ 0 (constant mode)
    Eigen::MatrixXd eigenfields;  // columns, M_u-orthonormal
    Eigen::VectorXd residuals;    // relative eigen-residuals from the solver
    double vol_gtilde = 0.0;      // sum w u^{2*}
    double lambda1 = 0.0;
    double normalized_lambda1 = 0.0; // lambda1 * vol_gtilde^{2/n}
    int multiplicity = 0;            // cluster size of lambda1 at rel. tolerance
    double sphere_bound = 0.0;       // n omega_n^{2/n}
    double gap_to_sphere_bound = 0.0;
    double multiplicity_rel_tol = 0.0;
};

struct SpectrumOptions {
    double multiplicity_rel_tol = 1e-3;
    EigenSolveOptions eig;
};

/// Smallest k eigenpairs (constant mode included) of K_u phi = lambda M_u phi.
SpectralReport conformal_spectrum(const DiscreteManifold& m, const ScalarField& u, int k,
                                  const SpectrumOptions& options = {});

/// w-weighted L2 norm of the discrete defect of the conformal Laplacian
/// identity u^{2*-1} lap_gtilde(v) - lap_g(u v) + v lap_g(u), with the strong
/// forms M_u^{-1} K_u and diag(w)^{-1} K; a pure discretization artifact.
double conformal_identity_residual(const DiscreteManifold& m, const ScalarField& u,
                                   const ScalarField& v);

/// Linearization of the Euler-Lagrange map at (u, beta) in the field
/// direction: A theta = lap_g theta + (h+beta) theta - (2*-1) K_n^{-2} u^{2*-2} theta.
struct LinearizationReport {
    Eigen::VectorXd singular_values; // ascending, W-metric
    int kernel_dim = 0;
    // Per eigenpair of the conformal spectrum: || A(u phi) ||_w, the gap
    // |lambda - n omega_n^{2/n}|, and the defect of A(u phi) against
    // (lambda - n omega_n^{2/n}) u^{2*-1} phi.
    Eigen::VectorXd image_norms;
    Eigen::VectorXd eigen_gaps;
    Eigen::VectorXd correspondence_residuals;
    double augmented_min_singular_value = 0.0; // smallest singular value of [A | u]
};

struct LinearizationOptions {
    int num_eigenpairs = 8;     // conformal eigenpairs for the correspondence check
    int num_singular_values = 6;
    double stale_tol = 1e-6;    // EL residual bound for accepting (u, beta, h)
    double kernel_tol = 1e-6;   // singular values below kernel_tol*sphere_bound count as kernel
    SpectrumOptions spectrum;
};

LinearizationReport linearized_operator_report(const DiscreteManifold& m, const ScalarField& h,
                                               double beta, const ScalarField& u,
                                               const LinearizationOptions& options = {});

/// sum w u^2 phi for each eigenfield phi in the lambda1 cluster.
std::vector<double> transversality_integrals(const DiscreteManifold& m, const ScalarField& u,
                                             const SpectralReport& report);

/// Cluster size {lambda_i <= lambda_1 (1+rel_tol)} of a sorted list of
/// nonnegative eigenvalues with the constant mode already removed.
int multiplicity_estimate(const std::vector<double>& eigenvalues, double rel_tol);

} // namespace confeig
