#include "confeig/eigensolver.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <random>

#include "confeig/errors.hpp"

namespace confeig {

struct SpdSolver::Impl {
    SparseMatrix matrix;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
};

SpdSolver::SpdSolver(SparseMatrix matrix) : impl_(std::make_unique<Impl>()) {
    impl_->matrix = std::move(matrix);
    impl_->cg.compute(impl_->matrix);
    if (impl_->cg.info() != Eigen::Success)
        throw NumericalFailureError("SpdSolver: incomplete Cholesky setup failed");
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

const SparseMatrix& SpdSolver::matrix() const { return impl_->matrix; }

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs, double tol, int max_iterations,
                                 const Eigen::VectorXd* guess) const {
    impl_->cg.setTolerance(tol);
    impl_->cg.setMaxIterations(max_iterations);
    Eigen::VectorXd x = guess ? impl_->cg.solveWithGuess(rhs, *guess).eval()
                              : impl_->cg.solve(rhs).eval();
    if (!x.allFinite()) throw NumericalFailureError("SpdSolver: CG produced non-finite values");
    return x;
}

namespace {

// M-orthonormalize the columns of X in place (two rounds of modified
// Gram-Schmidt); drops nothing, columns that collapse are re-randomized by
// the caller on the next iteration.
void m_orthonormalize(Eigen::MatrixXd& x, const Eigen::VectorXd& mass) {
    for (int round = 0; round < 2; ++round) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            for (Eigen::Index i = 0; i < j; ++i) {
                const double proj = x.col(i).dot(mass.cwiseProduct(x.col(j)));
                x.col(j) -= proj * x.col(i);
            }
            const double norm = std::sqrt(x.col(j).dot(mass.cwiseProduct(x.col(j))));
            if (norm > 0.0) x.col(j) /= norm;
        }
    }
}

void deflate_constant(Eigen::MatrixXd& x, const Eigen::VectorXd& constant_mode,
                      const Eigen::VectorXd& mass) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double proj = constant_mode.dot(mass.cwiseProduct(x.col(j)));
        x.col(j) -= proj * constant_mode;
    }
}

// Deterministic sign convention: the entry of largest magnitude is positive.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index at = 0;
    double best = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > best + 1e-300) {
            best = a;
            at = i;
        }
    }
    if (v[at] < 0.0) v = -v;
}

} // namespace

EigenSolveResult smallest_eigenpairs(const SparseMatrix& stiffness, const Eigen::VectorXd& mass,
                                     int num_pairs, const EigenSolveOptions& options) {
    const Eigen::Index n = stiffness.rows();
    if (stiffness.cols() != n || mass.size() != n)
        throw DimensionError("eigensolver: stiffness/mass size mismatch");
    if (num_pairs < 2) throw InvalidSpecError("eigensolver: need at least 2 eigenpairs");
    if (num_pairs > n) throw InvalidSpecError("eigensolver: more eigenpairs than nodes");
    if ((mass.array() <= 0.0).any())
        throw PositivityError("eigensolver: mass diagonal must be positive");

    // Constant mode, M-normalized; handled by explicit deflation.
    const bool deflate = options.deflate_constant;
    Eigen::VectorXd constant_mode = Eigen::VectorXd::Ones(n) / std::sqrt(mass.sum());

    const int wanted = deflate ? num_pairs - 1 : num_pairs;
    const int block =
        std::min<Eigen::Index>(wanted + std::max(1, options.block_extra), deflate ? n - 1 : n);

    // Diagonal means set the scale of the spectrum's upper end; a small
    // positive shift keeps K + sigma M definite despite the constant kernel.
    double diag_k = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) diag_k += stiffness.coeff(i, i);
    const double scale = diag_k / mass.sum();
    const double sigma = std::max(options.shift_scale * scale, 1e-12 * scale);

    SparseMatrix shifted = stiffness;
    shifted.diagonal() += sigma * mass;
    SpdSolver solver(std::move(shifted));

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd x(n, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = gauss(rng);
    if (deflate) deflate_constant(x, constant_mode, mass);
    m_orthonormalize(x, mass);

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(block);
    Eigen::VectorXd rel_res = Eigen::VectorXd::Constant(block, 1.0);
    int locked = 0; // leading converged columns; skipped in the solve phase
    int iterations = 0;
    bool converged = false;

    for (int it = 0; it < options.max_iterations; ++it) {
        iterations = it + 1;
        // Inverse iteration sweep: x_j <- (K + sigma M)^{-1} M x_j.
        for (int j = locked; j < block; ++j) {
            const double inner_tol =
                std::max(options.cg_tol_floor, std::min(1e-4, 1e-3 * rel_res[j]));
            Eigen::VectorXd rhs = mass.cwiseProduct(x.col(j));
            Eigen::VectorXd guess = x.col(j) / std::max(theta[j] + sigma, sigma);
            x.col(j) = solver.solve(rhs, inner_tol, options.cg_max_iterations, &guess);
        }
        if (deflate) deflate_constant(x, constant_mode, mass);
        m_orthonormalize(x, mass);

        // Rayleigh-Ritz on the block.
        Eigen::MatrixXd kx = stiffness * x;
        Eigen::MatrixXd small = x.transpose() * kx;
        small = 0.5 * (small + small.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(small);
        if (ritz.info() != Eigen::Success)
            throw NumericalFailureError("eigensolver: Rayleigh-Ritz factorization failed");
        x = (x * ritz.eigenvectors()).eval();
        theta = ritz.eigenvalues();

        // Relative eigen-residuals in the M^{-1} norm.
        kx = stiffness * x;
        for (int j = 0; j < block; ++j) {
            Eigen::VectorXd r = kx.col(j) - theta[j] * mass.cwiseProduct(x.col(j));
            const double rnorm = std::sqrt(r.dot(r.cwiseQuotient(mass)));
            rel_res[j] = rnorm / std::max(std::abs(theta[j]), 1e-12 * std::max(scale, 1.0));
        }
        locked = 0;
        while (locked < wanted && rel_res[locked] <= options.tol) ++locked;
        if (locked >= wanted) {
            converged = true;
            break;
        }
    }

    if (!converged) {
        throw NumericalFailureError(
            "eigensolver: did not reach residual " + std::to_string(options.tol) + " after " +
            std::to_string(iterations) + " iterations (worst residual " +
            std::to_string(rel_res.head(wanted).maxCoeff()) + ")");
    }

    EigenSolveResult result;
    result.eigenvalues.resize(num_pairs);
    result.eigenvectors.resize(n, num_pairs);
    result.residuals.resize(num_pairs);
    result.iterations = iterations;
    result.converged = true;

    int offset = 0;
    if (deflate) {
        // Pair 0: the constant mode, with its measured Rayleigh quotient.
        result.eigenvectors.col(0) = constant_mode;
        result.eigenvalues[0] = constant_mode.dot(stiffness * constant_mode);
        result.residuals[0] = 0.0;
        offset = 1;
    }
    for (int j = 0; j + offset < num_pairs; ++j) {
        result.eigenvalues[j + offset] = theta[j];
        result.eigenvectors.col(j + offset) = x.col(j);
        result.residuals[j + offset] = rel_res[j];
    }
    for (Eigen::Index j = 0; j < num_pairs; ++j) fix_sign(result.eigenvectors.col(j));
    return result;
}

} // namespace confeig
