#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <string>
#include <vector>

#include "confeig/errors.hpp"

namespace confeig {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// A node-sampled real function on a manifold; one value per node.
using ScalarField = Eigen::VectorXd;

/// One undirected edge of the stiffness graph with its coefficient, so that
/// f^T K f = sum_e c_e (f_a - f_b)^2. Conformal reweighting reassembles K
/// from this list with per-edge factors.
struct Edge {
    int a;
    int b;
    double coeff;
};

enum class ManifoldFamily { FlatTorus, Circle, RoundSphere2, Product };

std::string family_name(ManifoldFamily family);

/// Declarative description of a manifold build, parsed from lab configs.
struct ManifoldSpec {
    ManifoldFamily family = ManifoldFamily::FlatTorus;
    int dimension = 0;                 // flat torus only
    std::vector<double> lengths;       // flat torus: per-axis periods; circle: 1 entry
    std::vector<int> resolution;       // flat torus / circle
    double radius = 1.0;               // sphere
    int level = 3;                     // sphere refinement level
    std::vector<ManifoldSpec> factors; // product: exactly two
    bool normalize_volume = false;

    /// Compact resolution tag, e.g. "32x32x32", "level5", "64*level3".
    std::string resolution_tag() const;
};

/// Discrete (M, g): nodes with quadrature weights, the stiffness operator,
/// and the edge list it is assembled from. Immutable after construction and
/// safe to share read-only.
class DiscreteManifold {
public:
    int dimension() const { return dimension_; }
    Eigen::Index num_nodes() const { return weights_.size(); }
    /// Volume quadrature weights w_i > 0.
    const Eigen::VectorXd& weights() const { return weights_; }
    /// Symmetric PSD stiffness K with constants in its kernel.
    const SparseMatrix& stiffness() const { return stiffness_; }
    const std::vector<Edge>& edges() const { return edges_; }
    double volume() const { return volume_; }
    /// Constant scalar curvature of the family (analytic, not estimated).
    double scalar_curvature() const { return scalar_curvature_; }
    /// Node coordinates: torus axes use chart coordinates in [0, L_a),
    /// spheres the ambient embedding, products the concatenation of both.
    const Eigen::MatrixXd& positions() const { return positions_; }
    const std::string& family() const { return family_; }
    const ManifoldSpec& spec() const { return spec_; }

    /// Product factors; empty unless family == "product".
    const std::vector<std::shared_ptr<const DiscreteManifold>>& factors() const {
        return factors_;
    }

    DiscreteManifold(int dimension, Eigen::VectorXd weights, std::vector<Edge> edges,
                     Eigen::MatrixXd positions, double scalar_curvature,
                     std::string family, ManifoldSpec spec,
                     std::vector<std::shared_ptr<const DiscreteManifold>> factors = {});

private:
    int dimension_ = 0;
    Eigen::VectorXd weights_;
    std::vector<Edge> edges_;
    SparseMatrix stiffness_;
    Eigen::MatrixXd positions_;
    double volume_ = 0.0;
    double scalar_curvature_ = 0.0;
    std::string family_;
    ManifoldSpec spec_;
    std::vector<std::shared_ptr<const DiscreteManifold>> factors_;
};

using ManifoldPtr = std::shared_ptr<const DiscreteManifold>;

/// Periodic second-order finite differences on an n-torus with the given
/// per-axis periods and resolutions. Requires n >= 2 and resolutions >= 4.
ManifoldPtr build_flat_torus(int n, const std::vector<double>& lengths,
                             const std::vector<int>& resolution,
                             bool normalize_volume = false);

/// One-dimensional periodic grid, used as a product factor.
ManifoldPtr build_circle(double length, int resolution);

/// Icosahedral triangulation of S^2(radius) refined `level` times, with the
/// piecewise-linear cotangent stiffness and lumped (barycentric) mass.
ManifoldPtr build_round_sphere2(double radius, int level, bool normalize_volume = false);

/// Cartesian product: K = K_a (x) diag(w_b) + diag(w_a) (x) K_b, w = w_a (x) w_b.
/// Node (i, j) of the product has index i * N_b + j.
ManifoldPtr build_product(const ManifoldPtr& a, const ManifoldPtr& b,
                          bool normalize_volume = false);

/// Dispatch on a ManifoldSpec (recursively for products).
ManifoldPtr build_manifold(const ManifoldSpec& spec);

/// integral of f over M: sum_i w_i f_i.
double integrate(const DiscreteManifold& m, const ScalarField& f);

/// Dirichlet energy f^T K f >= 0; zero iff f is constant.
double dirichlet_energy(const DiscreteManifold& m, const ScalarField& f);

/// Stiffness and mass of the conformal metric u^{4/(n-2)} g. The gradient
/// weight u^2 is evaluated per edge as the squared arithmetic mean of the
/// endpoint values; the mass is diag(w_i u_i^{2*}).
struct WeightedOperators {
    SparseMatrix stiffness;
    Eigen::VectorXd mass;
};

WeightedOperators assemble_weighted_operators(const DiscreteManifold& m,
                                              const ScalarField& u);

/// Throws DimensionError / DegenerateInputError when f cannot live on m.
void validate_field(const DiscreteManifold& m, const ScalarField& f);

} // namespace confeig
