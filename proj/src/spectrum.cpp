#include "confeig/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "confeig/minimizer.hpp"

namespace confeig {

SpectralReport conformal_spectrum(const DiscreteManifold& m, const ScalarField& u, int k,
                                  const SpectrumOptions& options) {
    if (k < 2) throw InvalidSpecError("conformal_spectrum: k must be >= 2");
    const WeightedOperators ops = assemble_weighted_operators(m, u);
    const EigenSolveResult eig = smallest_eigenpairs(ops.stiffness, ops.mass, k, options.eig);

    SpectralReport report;
    report.eigenvalues = eig.eigenvalues;
    report.eigenfields = eig.eigenvectors;
    report.residuals = eig.residuals;
    report.vol_gtilde = ops.mass.sum();
    report.lambda1 = eig.eigenvalues[1];
    report.normalized_lambda1 =
        report.lambda1 * std::pow(report.vol_gtilde, 2.0 / m.dimension());
    std::vector<double> nonzero(eig.eigenvalues.data() + 1,
                                eig.eigenvalues.data() + eig.eigenvalues.size());
    report.multiplicity = multiplicity_estimate(nonzero, options.multiplicity_rel_tol);
    report.multiplicity_rel_tol = options.multiplicity_rel_tol;
    report.sphere_bound = constants(m.dimension()).sphere_bound;
    report.gap_to_sphere_bound = report.normalized_lambda1 - report.sphere_bound;
    return report;
}

double conformal_identity_residual(const DiscreteManifold& m, const ScalarField& u,
                                   const ScalarField& v) {
    validate_field(m, u);
    validate_field(m, v);
    const WeightedOperators ops = assemble_weighted_operators(m, u); // checks u > 0
    const double two_star = 2.0 * m.dimension() / (m.dimension() - 2.0);
    const Eigen::VectorXd& w = m.weights();

    const Eigen::VectorXd lap_conf_v = (ops.stiffness * v).cwiseQuotient(ops.mass);
    const Eigen::VectorXd lap_uv = (m.stiffness() * u.cwiseProduct(v)).cwiseQuotient(w);
    const Eigen::VectorXd lap_u = (m.stiffness() * u).cwiseQuotient(w);

    const Eigen::VectorXd defect = u.array().pow(two_star - 1.0).matrix().cwiseProduct(lap_conf_v)
                                   - lap_uv + v.cwiseProduct(lap_u);
    return std::sqrt(w.dot(defect.cwiseAbs2()));
}

int multiplicity_estimate(const std::vector<double>& eigenvalues, double rel_tol) {
    if (eigenvalues.empty())
        throw DegenerateInputError("multiplicity_estimate: empty eigenvalue list");
    if (!(rel_tol >= 0.0)) throw InvalidSpecError("multiplicity_estimate: rel_tol must be >= 0");
    const double lambda1 = eigenvalues.front();
    int count = 0;
    for (double lam : eigenvalues) {
        if (lam <= lambda1 * (1.0 + rel_tol)) ++count;
    }
    return count;
}

std::vector<double> transversality_integrals(const DiscreteManifold& m, const ScalarField& u,
                                             const SpectralReport& report) {
    validate_field(m, u);
    if (report.eigenfields.rows() != m.num_nodes())
        throw StaleStateError("transversality_integrals: report was not computed on this manifold");
    const Eigen::VectorXd wu2 = m.weights().cwiseProduct(u.cwiseAbs2());
    std::vector<double> integrals;
    integrals.reserve(report.multiplicity);
    for (int i = 1; i <= report.multiplicity && i < report.eigenfields.cols(); ++i)
        integrals.push_back(wu2.dot(report.eigenfields.col(i)));
    return integrals;
}

namespace {

// Smallest eigenvalue of (S + a a^T) x = s W x by shift-inverted subspace
// iteration, the rank-one term applied through the Sherman-Morrison identity.
double smallest_eigenvalue_rank1(const SparseMatrix& s, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& mass, std::uint64_t seed) {
    const Eigen::Index n = s.rows();
    double diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) diag += s.coeff(i, i);
    const double scale = diag / mass.sum();
    const double sigma = std::max(1e-6 * scale, 1e-300);

    SparseMatrix shifted = s;
    shifted.diagonal() += sigma * mass;
    SpdSolver solver(std::move(shifted));
    const Eigen::VectorXd base_a = solver.solve(a, 1e-12, 4000);
    const double denom = 1.0 + a.dot(base_a);
    auto apply_inverse = [&](const Eigen::VectorXd& b) {
        Eigen::VectorXd y = solver.solve(b, 1e-10, 4000);
        return (y - base_a * (a.dot(y) / denom)).eval();
    };
    auto apply_forward = [&](const Eigen::VectorXd& x) {
        return (s * x + a * a.dot(x)).eval();
    };

    const int block = std::min<Eigen::Index>(3, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd x(n, block);
    for (int j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = gauss(rng);

    double best = 0.0;
    for (int it = 0; it < 100; ++it) {
        for (int j = 0; j < block; ++j) x.col(j) = apply_inverse(mass.cwiseProduct(x.col(j)));
        // M-orthonormalize
        for (int j = 0; j < block; ++j) {
            for (int i = 0; i < j; ++i)
                x.col(j) -= x.col(i).dot(mass.cwiseProduct(x.col(j))) * x.col(i);
            const double norm = std::sqrt(x.col(j).dot(mass.cwiseProduct(x.col(j))));
            if (norm > 0.0) x.col(j) /= norm;
        }
        Eigen::MatrixXd small(block, block);
        Eigen::MatrixXd sx(n, block);
        for (int j = 0; j < block; ++j) sx.col(j) = apply_forward(x.col(j));
        small = x.transpose() * sx;
        small = 0.5 * (small + small.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(small);
        x = (x * ritz.eigenvectors()).eval();
        const double theta = ritz.eigenvalues()[0];
        Eigen::VectorXd r = apply_forward(x.col(0)) - theta * mass.cwiseProduct(x.col(0));
        const double res = std::sqrt(r.dot(r.cwiseQuotient(mass)));
        best = theta;
        if (res <= 1e-6 * std::max(std::abs(theta), 1e-12 * scale)) break;
    }
    return best;
}

} // namespace

LinearizationReport linearized_operator_report(const DiscreteManifold& m, const ScalarField& h,
                                               double beta, const ScalarField& u,
                                               const LinearizationOptions& options) {
    validate_field(m, h);
    validate_field(m, u);
    if ((u.array() <= 0.0).any())
        throw PositivityError("linearized_operator_report: u must be positive");
    const double el = euler_lagrange_residual(m, h, beta, u);
    if (el > options.stale_tol)
        throw StaleStateError("linearized_operator_report: (u, beta, h) has EL residual " +
                              std::to_string(el) + " above " + std::to_string(options.stale_tol));

    const SobolevConstants c = constants(m.dimension());
    const Eigen::VectorXd& w = m.weights();

    // A theta = W^{-1} K theta + potential .* theta, W-self-adjoint through
    // H = K + W diag(potential).
    const Eigen::VectorXd potential =
        (h.array() + beta - (c.two_star - 1.0) * c.K_n_inv_sq * u.array().pow(c.two_star - 2.0))
            .matrix();
    SparseMatrix h_op = m.stiffness();
    h_op.diagonal() += w.cwiseProduct(potential);
    auto apply_a = [&](const Eigen::VectorXd& theta) {
        return ((m.stiffness() * theta).cwiseQuotient(w) + potential.cwiseProduct(theta)).eval();
    };

    LinearizationReport report;

    // Conformal eigenpair correspondence: A(u phi) = (lambda - n omega^{2/n}) u^{2*-1} phi
    // holds exactly in the continuum; the defect is the discretization error.
    SpectrumOptions spec_opts = options.spectrum;
    const SpectralReport spec = conformal_spectrum(m, u, options.num_eigenpairs, spec_opts);
    const Eigen::VectorXd u_crit = u.array().pow(c.two_star - 1.0).matrix();
    report.image_norms.resize(spec.eigenvalues.size());
    report.eigen_gaps.resize(spec.eigenvalues.size());
    report.correspondence_residuals.resize(spec.eigenvalues.size());
    for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
        const Eigen::VectorXd image = apply_a(u.cwiseProduct(spec.eigenfields.col(i)));
        const Eigen::VectorXd expected =
            (spec.eigenvalues[i] - c.sphere_bound) * u_crit.cwiseProduct(spec.eigenfields.col(i));
        report.image_norms[i] = std::sqrt(w.dot(image.cwiseAbs2()));
        report.eigen_gaps[i] = std::abs(spec.eigenvalues[i] - c.sphere_bound);
        report.correspondence_residuals[i] =
            std::sqrt(w.dot((image - expected).cwiseAbs2()));
    }

    // Singular values of A in the W metric: sqrt of the spectrum of the SPD
    // pencil (H W^{-1} H, W).
    SparseMatrix winv_h = h_op;
    for (Eigen::Index col = 0; col < winv_h.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(winv_h, col); it; ++it)
            it.valueRef() /= w[it.row()];
    SparseMatrix squared = (h_op * winv_h).pruned();
    squared.makeCompressed();

    EigenSolveOptions sv_opts = options.spectrum.eig;
    sv_opts.deflate_constant = false;
    sv_opts.tol = std::max(sv_opts.tol, 1e-8);
    const int nsv = std::min<int>(options.num_singular_values,
                                  static_cast<int>(m.num_nodes()) - 1);
    const EigenSolveResult sq = smallest_eigenpairs(squared, w, nsv, sv_opts);
    report.singular_values = sq.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    const double kernel_cut = options.kernel_tol * c.sphere_bound;
    report.kernel_dim = static_cast<int>(
        (report.singular_values.array() < kernel_cut).count());

    // Full row rank test of the augmented operator [A | u]: smallest singular
    // value = sqrt of the smallest eigenvalue of (H W^{-1} H + (Wu)(Wu)^T, W).
    const Eigen::VectorXd wu = w.cwiseProduct(u);
    const double aug = smallest_eigenvalue_rank1(squared, wu, w, sv_opts.seed ^ 0x5bf0a8b1ULL);
    report.augmented_min_singular_value = std::sqrt(std::max(aug, 0.0));
    return report;
}

} // namespace confeig
