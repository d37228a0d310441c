#include "confeig/sobolev.hpp"

#include <cmath>

namespace confeig {

SobolevConstants constants(int n) {
    if (n < 3)
        throw UnsupportedDimensionError("constants: the critical exponent needs n >= 3");
    SobolevConstants c;
    c.n = n;
    c.two_star = 2.0 * n / (n - 2.0);
    c.omega_n = 2.0 * std::pow(M_PI, (n + 1) / 2.0) / std::tgamma((n + 1) / 2.0);
    c.K_n = 2.0 / std::sqrt(double(n) * (n - 2.0)) * std::pow(c.omega_n, -1.0 / n);
    c.K_n_inv_sq = 1.0 / (c.K_n * c.K_n);
    c.sphere_bound = n * std::pow(c.omega_n, 2.0 / n);
    return c;
}

double evaluate_J(const DiscreteManifold& m, const ScalarField& h, const ScalarField& u) {
    validate_field(m, h);
    validate_field(m, u);
    const SobolevConstants c = constants(m.dimension());
    const Eigen::VectorXd& w = m.weights();
    const double denom = w.dot(u.cwiseAbs2());
    if (denom <= 0.0) throw DegenerateInputError("evaluate_J: u is identically zero");
    const double energy = u.dot(m.stiffness() * u);
    const double h_term = w.dot(h.cwiseProduct(u.cwiseAbs2()));
    const double crit = w.dot(u.array().abs().pow(c.two_star).matrix());
    return (energy + h_term - c.K_n_inv_sq * std::pow(crit, 2.0 / c.two_star)) / denom;
}

double alpha_from_minimum(double J_min) { return -J_min; }

double yamabe_quotient(const DiscreteManifold& m, double scalar_curvature,
                       const ScalarField& u) {
    validate_field(m, u);
    const SobolevConstants c = constants(m.dimension());
    const Eigen::VectorXd& w = m.weights();
    const double crit = w.dot(u.array().abs().pow(c.two_star).matrix());
    if (crit <= 0.0) throw DegenerateInputError("yamabe_quotient: u is identically zero");
    const double cn = (c.n - 2.0) / (4.0 * (c.n - 1.0));
    const double numer = u.dot(m.stiffness() * u) + cn * scalar_curvature * w.dot(u.cwiseAbs2());
    return numer / std::pow(crit, 2.0 / c.two_star);
}

AdmissibilityReport check_admissibility(const DiscreteManifold& m, double scalar_curvature,
                                        const ScalarField& h, double mu_estimate) {
    validate_field(m, h);
    const SobolevConstants c = constants(m.dimension());
    AdmissibilityReport report;
    report.mu_estimate = mu_estimate;
    report.K_inv_sq = c.K_n_inv_sq;
    report.aubin_ok = mu_estimate < c.K_n_inv_sq;
    report.h_center = (c.n - 2.0) / (4.0 * (c.n - 1.0)) * scalar_curvature;
    report.h_norm_gap = (h.array() - report.h_center).abs().maxCoeff();
    report.h_ok = report.h_norm_gap <= 0.5 * (c.K_n_inv_sq - mu_estimate);
    return report;
}

} // namespace confeig
