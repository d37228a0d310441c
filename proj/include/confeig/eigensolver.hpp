#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>

#include "confeig/manifold.hpp"

namespace confeig {

/// Deterministic CG solver for sparse SPD systems, preconditioned with an
/// incomplete Cholesky factorization. Wraps the matrix by value so callers
/// can hand over temporaries.
class SpdSolver {
public:
    explicit SpdSolver(SparseMatrix matrix);
    ~SpdSolver();
    SpdSolver(SpdSolver&&) noexcept;
    SpdSolver& operator=(SpdSolver&&) noexcept;

    /// Solves A x = b to the given relative tolerance; optional warm start.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double tol, int max_iterations,
                          const Eigen::VectorXd* guess = nullptr) const;

    const SparseMatrix& matrix() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct EigenSolveOptions {
    double tol = 1e-9;        // relative eigen-residual for convergence
    int max_iterations = 400; // outer subspace iterations
    int block_extra = 6;      // guard vectors beyond the requested count
    double shift_scale = 1e-3;
    double cg_tol_floor = 1e-12;
    int cg_max_iterations = 4000;
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    // When set, the constant field is removed from the iteration space and
    // reported as pair 0; disable for operators without a constant kernel.
    bool deflate_constant = true;
};

struct EigenSolveResult {
    Eigen::VectorXd eigenvalues;  // ascending; [0] is the constant mode
    Eigen::MatrixXd eigenvectors; // columns, M-orthonormal, deterministic sign
    Eigen::VectorXd residuals;    // relative eigen-residuals
    int iterations = 0;
    bool converged = false;
};

/// Smallest `num_pairs` eigenpairs (the constant mode included as pair 0) of
/// the symmetric generalized problem K x = lambda M x with diagonal positive
/// mass M, via blocked shift-invert subspace iteration with the constant mode
/// deflated explicitly. Throws NumericalFailureError when the requested
/// residual is not reached.
EigenSolveResult smallest_eigenpairs(const SparseMatrix& stiffness,
                                     const Eigen::VectorXd& mass, int num_pairs,
                                     const EigenSolveOptions& options = {});

} // namespace confeig
