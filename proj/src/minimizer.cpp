#include "confeig/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "confeig/eigensolver.hpp"

namespace confeig {

void MinimizerOptions::validate() const {
    if (max_iterations < 1) throw InvalidSpecError("minimizer: max_iterations must be >= 1");
    if (!(el_residual_tol > 0.0)) throw InvalidSpecError("minimizer: el_residual_tol must be > 0");
    if (!(initial_step > 0.0)) throw InvalidSpecError("minimizer: initial_step must be > 0");
    if (!(backtracking_factor > 0.0 && backtracking_factor < 1.0))
        throw InvalidSpecError("minimizer: backtracking_factor must lie in (0,1)");
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
        throw InvalidSpecError("minimizer: sufficient_decrease must lie in (0,1)");
    if (restarts < 1) throw InvalidSpecError("minimizer: restart count must be >= 1");
}

ScalarField normalize_critical(const DiscreteManifold& m, const ScalarField& u) {
    validate_field(m, u);
    const double two_star = 2.0 * m.dimension() / (m.dimension() - 2.0);
    ScalarField a = u.cwiseAbs();
    const double mass = m.weights().dot(a.array().pow(two_star).matrix());
    if (mass <= 0.0) throw DegenerateInputError("normalize_critical: u is identically zero");
    return a * std::pow(mass, -1.0 / two_star);
}

double euler_lagrange_residual(const DiscreteManifold& m, const ScalarField& h, double alpha,
                               const ScalarField& u) {
    validate_field(m, h);
    validate_field(m, u);
    if ((u.array() <= 0.0).any())
        throw PositivityError("euler_lagrange_residual: u must be positive");
    const SobolevConstants c = constants(m.dimension());
    const Eigen::VectorXd& w = m.weights();
    Eigen::VectorXd r = (m.stiffness() * u).cwiseQuotient(w) +
                        (h.array() + alpha).matrix().cwiseProduct(u) -
                        c.K_n_inv_sq * u.array().pow(c.two_star - 1.0).matrix();
    return std::sqrt(w.dot(r.cwiseAbs2()));
}

double second_variation_form(const DiscreteManifold& m, const ScalarField& h, double alpha,
                             const ScalarField& u, const ScalarField& v) {
    validate_field(m, h);
    validate_field(m, u);
    validate_field(m, v);
    if ((u.array() <= 0.0).any())
        throw PositivityError("second_variation_form: u must be positive");
    const SobolevConstants c = constants(m.dimension());
    const Eigen::VectorXd& w = m.weights();
    const Eigen::VectorXd uv = u.cwiseProduct(v);
    const Eigen::VectorXd u_crit = u.array().pow(c.two_star).matrix();
    const double energy = uv.dot(m.stiffness() * uv);
    const double mass_term = w.dot((h.array() + alpha).matrix().cwiseProduct(uv.cwiseAbs2()));
    const double crit_term = w.dot(v.cwiseAbs2().cwiseProduct(u_crit));
    const double mean_term = w.dot(v.cwiseProduct(u_crit));
    return energy + mass_term - c.K_n_inv_sq * (c.two_star - 1.0) * crit_term +
           c.K_n_inv_sq * (c.two_star - 2.0) * mean_term * mean_term;
}

namespace {

// Both descent targets are scale-invariant ratios; they differ only in the
// residual field whose w-weighted norm doubles as the convergence measure.
struct DescentProblem {
    const DiscreteManifold& m;
    const Eigen::VectorXd* h = nullptr; // J mode
    double scalar_curvature = 0.0;      // Yamabe mode
    bool yamabe_mode = false;
    SobolevConstants c;

    double value(const ScalarField& u) const {
        if (yamabe_mode) return yamabe_quotient(m, scalar_curvature, u);
        return evaluate_J(m, *h, u);
    }

    // Strong-form residual; vanishes exactly at critical points of the ratio.
    Eigen::VectorXd residual(const ScalarField& u, double f) const {
        Eigen::VectorXd r = (m.stiffness() * u).cwiseQuotient(m.weights());
        if (yamabe_mode) {
            const double cn = (c.n - 2.0) / (4.0 * (c.n - 1.0));
            r += cn * scalar_curvature * u - f * u.array().pow(c.two_star - 1.0).matrix();
        } else {
            r += (h->array() - f).matrix().cwiseProduct(u) -
                 c.K_n_inv_sq * u.array().pow(c.two_star - 1.0).matrix();
        }
        return r;
    }
};

struct RestartResult {
    ScalarField u;
    double value = 0.0;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;
};

RestartResult run_descent(const DescentProblem& problem, ScalarField u,
                          const MinimizerOptions& opts, const SpdSolver* preconditioner) {
    const DiscreteManifold& m = problem.m;
    const Eigen::VectorXd& w = m.weights();

    RestartResult out;
    double f = problem.value(u);
    out.trace.push_back(f);
    double step = opts.initial_step;

    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd r = problem.residual(u, f);
        out.residual = std::sqrt(w.dot(r.cwiseAbs2()));
        if (out.residual <= opts.el_residual_tol) {
            out.converged = true;
            break;
        }

        Eigen::VectorXd grad = w.cwiseProduct(r);
        Eigen::VectorXd dir = preconditioner
                                  ? preconditioner->solve(grad, opts.cg_tol, opts.cg_max_iterations)
                                  : r;
        const double slope = grad.dot(dir);
        if (!(slope > 0.0) || !std::isfinite(slope)) break; // stationary to round-off

        // Cap the trial step so u - tau * dir cannot overflow.
        const double cap = 1e3 * u.cwiseAbs().maxCoeff() / std::max(dir.cwiseAbs().maxCoeff(), 1e-300);
        double tau = std::min(2.0 * step, cap);
        bool accepted = false;
        ScalarField trial;
        double f_trial = 0.0;
        while (tau > 1e-18 * step) {
            trial = (u - tau * dir).cwiseAbs().cwiseMax(opts.positivity_floor);
            trial = normalize_critical(m, trial);
            f_trial = problem.value(trial);
            if (std::isnan(f_trial))
                throw NumericalFailureError("minimizer: NaN in line search");
            if (f_trial <= f - opts.sufficient_decrease * tau * slope) {
                accepted = true;
                break;
            }
            tau *= opts.backtracking_factor;
        }
        if (!accepted) break; // no decrease direction left at this scale

        u = trial;
        f = f_trial;
        step = tau;
        out.trace.push_back(f);
        out.iterations = it + 1;
    }

    // Final residual at the returned state.
    Eigen::VectorXd r = problem.residual(u, f);
    out.residual = std::sqrt(w.dot(r.cwiseAbs2()));
    out.converged = out.residual <= opts.el_residual_tol;
    out.u = std::move(u);
    out.value = f;
    return out;
}

ScalarField restart_field(const DiscreteManifold& m, int index, std::uint64_t seed) {
    const Eigen::Index n = m.num_nodes();
    if (index == 0) return normalize_critical(m, Eigen::VectorXd::Ones(n));
    std::seed_seq seq{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ScalarField u(n);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = std::exp(0.3 * gauss(rng));
    return normalize_critical(m, u);
}

std::vector<RestartResult> run_restarts(const DescentProblem& problem,
                                        const MinimizerOptions& opts) {
    const DiscreteManifold& m = problem.m;
    std::unique_ptr<SpdSolver> preconditioner;
    if (opts.precondition) {
        SparseMatrix a = m.stiffness();
        a.diagonal() += m.weights();
        preconditioner = std::make_unique<SpdSolver>(std::move(a));
    }
    std::vector<RestartResult> results;
    results.reserve(opts.restarts);
    for (int rstart = 0; rstart < opts.restarts; ++rstart)
        results.push_back(run_descent(problem, restart_field(m, rstart, opts.seed), opts,
                                      preconditioner.get()));
    return results;
}

// Deterministic ordering: converged beats unconverged, then lower value,
// then lower restart index.
int best_restart(const std::vector<RestartResult>& results) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(results.size()); ++i) {
        const auto& a = results[i];
        const auto& b = results[best];
        if (a.converged != b.converged) {
            if (a.converged) best = i;
        } else if (a.value < b.value) {
            best = i;
        }
    }
    return best;
}

} // namespace

MinimizerState minimize_J(const DiscreteManifold& m, const ScalarField& h,
                          const MinimizerOptions& options) {
    options.validate();
    validate_field(m, h);
    DescentProblem problem{m, &h, 0.0, false, constants(m.dimension())};
    std::vector<RestartResult> results = run_restarts(problem, options);
    const int best = best_restart(results);

    MinimizerState state;
    state.u = results[best].u;
    state.J_value = results[best].value;
    state.alpha = alpha_from_minimum(state.J_value);
    state.el_residual = results[best].residual;
    state.iterations = results[best].iterations;
    state.converged = results[best].converged;
    state.trace = results[best].trace;

    const double mean = integrate(m, state.u) / m.volume();
    state.blowup_flag = state.u.maxCoeff() / mean > options.blowup_ratio;

    for (int i = 0; i < static_cast<int>(results.size()); ++i) {
        RestartSummary s;
        s.index = i;
        s.J_value = results[i].value;
        s.el_residual = results[i].residual;
        s.converged = results[i].converged;
        s.iterations = results[i].iterations;
        s.sup_distance_to_best = (results[i].u - state.u).cwiseAbs().maxCoeff();
        state.restarts.push_back(s);
    }
    return state;
}

double estimate_mu_upper_bound(const DiscreteManifold& m, double scalar_curvature,
                               const MinimizerOptions& options) {
    options.validate();
    const SobolevConstants c = constants(m.dimension());
    DescentProblem problem{m, nullptr, scalar_curvature, true, c};
    std::vector<RestartResult> results = run_restarts(problem, options);
    double best = yamabe_quotient(m, scalar_curvature,
                                  normalize_critical(m, Eigen::VectorXd::Ones(m.num_nodes())));
    for (const auto& r : results) best = std::min(best, r.value);
    return best;
}

} // namespace confeig
