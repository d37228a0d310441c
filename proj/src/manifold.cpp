#include "confeig/manifold.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

namespace confeig {

namespace {

SparseMatrix assemble_stiffness(Eigen::Index n, const std::vector<Edge>& edges) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges.size() * 4);
    for (const Edge& e : edges) {
        trips.emplace_back(e.a, e.a, e.coeff);
        trips.emplace_back(e.b, e.b, e.coeff);
        trips.emplace_back(e.a, e.b, -e.coeff);
        trips.emplace_back(e.b, e.a, -e.coeff);
    }
    SparseMatrix k(n, n);
    k.setFromTriplets(trips.begin(), trips.end());
    k.makeCompressed();
    return k;
}

// Metric rescaling g -> c^2 g with c = Vol^{-1/n}: weights scale by 1/Vol,
// stiffness coefficients by Vol^{-(n-2)/n}, scalar curvature by Vol^{2/n}.
void normalize_to_unit_volume(int n, Eigen::VectorXd& weights, std::vector<Edge>& edges,
                              double& scalar_curvature) {
    const double vol = weights.sum();
    if (vol <= 0.0) throw NumericalFailureError("manifold has non-positive volume");
    const double stiff_scale = std::pow(vol, -double(n - 2) / double(n));
    weights /= vol;
    for (Edge& e : edges) e.coeff *= stiff_scale;
    scalar_curvature *= std::pow(vol, 2.0 / double(n));
}

ManifoldPtr make_torus_like(int n, const std::vector<double>& lengths,
                            const std::vector<int>& resolution, bool normalize_volume,
                            ManifoldFamily family) {
    if (static_cast<int>(lengths.size()) != n || static_cast<int>(resolution.size()) != n)
        throw InvalidSpecError("flat torus: lengths and resolution must each have n entries");
    for (double len : lengths)
        if (!(len > 0.0)) throw InvalidSpecError("flat torus: lengths must be positive");
    for (int r : resolution)
        if (r < 4) throw InvalidSpecError("flat torus: resolution must be >= 4 on every axis");

    Eigen::Index num_nodes = 1;
    for (int r : resolution) num_nodes *= r;

    std::vector<double> dx(n);
    double cell = 1.0;
    for (int a = 0; a < n; ++a) {
        dx[a] = lengths[a] / resolution[a];
        cell *= dx[a];
    }

    // Lexicographic index, axis 0 slowest; strides[a] jumps one step on axis a.
    std::vector<Eigen::Index> strides(n);
    strides[n - 1] = 1;
    for (int a = n - 2; a >= 0; --a) strides[a] = strides[a + 1] * resolution[a + 1];

    Eigen::MatrixXd positions(num_nodes, n);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(num_nodes) * n);
    std::vector<int> idx(n, 0);
    for (Eigen::Index p = 0; p < num_nodes; ++p) {
        for (int a = 0; a < n; ++a) {
            positions(p, a) = idx[a] * dx[a];
            // forward neighbour along axis a, wrapping periodically
            Eigen::Index q = p + ((idx[a] + 1 == resolution[a]) ? strides[a] * (1 - resolution[a])
                                                                : strides[a]);
            edges.push_back({static_cast<int>(p), static_cast<int>(q), cell / (dx[a] * dx[a])});
        }
        for (int a = n - 1; a >= 0; --a) {
            if (++idx[a] < resolution[a]) break;
            idx[a] = 0;
        }
    }

    Eigen::VectorXd weights = Eigen::VectorXd::Constant(num_nodes, cell);
    double curvature = 0.0;
    if (normalize_volume) normalize_to_unit_volume(n, weights, edges, curvature);

    ManifoldSpec spec;
    spec.family = family;
    spec.dimension = n;
    spec.lengths = lengths;
    spec.resolution = resolution;
    spec.normalize_volume = normalize_volume;
    return std::make_shared<DiscreteManifold>(n, std::move(weights), std::move(edges),
                                              std::move(positions), curvature,
                                              family_name(family), std::move(spec));
}

struct Tri {
    int v0, v1, v2;
};

} // namespace

std::string family_name(ManifoldFamily family) {
    switch (family) {
    case ManifoldFamily::FlatTorus: return "flat-torus";
    case ManifoldFamily::Circle: return "circle";
    case ManifoldFamily::RoundSphere2: return "round-sphere-2";
    case ManifoldFamily::Product: return "product";
    }
    return "unknown";
}

std::string ManifoldSpec::resolution_tag() const {
    std::ostringstream out;
    switch (family) {
    case ManifoldFamily::FlatTorus:
    case ManifoldFamily::Circle:
        for (std::size_t i = 0; i < resolution.size(); ++i) {
            if (i) out << 'x';
            out << resolution[i];
        }
        break;
    case ManifoldFamily::RoundSphere2:
        out << "level" << level;
        break;
    case ManifoldFamily::Product:
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (i) out << '*';
            out << factors[i].resolution_tag();
        }
        break;
    }
    return out.str();
}

DiscreteManifold::DiscreteManifold(int dimension, Eigen::VectorXd weights,
                                   std::vector<Edge> edges, Eigen::MatrixXd positions,
                                   double scalar_curvature, std::string family,
                                   ManifoldSpec spec, std::vector<ManifoldPtr> factors)
    : dimension_(dimension),
      weights_(std::move(weights)),
      edges_(std::move(edges)),
      positions_(std::move(positions)),
      scalar_curvature_(scalar_curvature),
      family_(std::move(family)),
      spec_(std::move(spec)),
      factors_(std::move(factors)) {
    if (weights_.size() == 0) throw InvalidSpecError("manifold has no nodes");
    if ((weights_.array() <= 0.0).any())
        throw NumericalFailureError("manifold has non-positive quadrature weights");
    stiffness_ = assemble_stiffness(weights_.size(), edges_);
    volume_ = weights_.sum();
}

ManifoldPtr build_flat_torus(int n, const std::vector<double>& lengths,
                             const std::vector<int>& resolution, bool normalize_volume) {
    if (n < 2) throw InvalidSpecError("flat torus: dimension must be >= 2");
    return make_torus_like(n, lengths, resolution, normalize_volume, ManifoldFamily::FlatTorus);
}

ManifoldPtr build_circle(double length, int resolution) {
    return make_torus_like(1, {length}, {resolution}, false, ManifoldFamily::Circle);
}

ManifoldPtr build_round_sphere2(double radius, int level, bool normalize_volume) {
    if (!(radius > 0.0)) throw InvalidSpecError("sphere: radius must be positive");
    if (level < 2) throw InvalidSpecError("sphere: refinement level must be >= 2");
    if (level > 10) throw InvalidSpecError("sphere: refinement level > 10 is not supported");

    // Icosahedron, then `level` rounds of 1->4 triangle subdivision, vertices
    // projected to the sphere after every round.
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts) v.normalize();
    std::vector<Tri> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int round = 0; round < level; ++round) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int i, int j) {
            auto key = std::minmax(i, j);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Eigen::Vector3d m = (verts[i] + verts[j]).normalized();
            verts.push_back(m);
            int id = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Tri> next;
        next.reserve(faces.size() * 4);
        for (const Tri& t : faces) {
            int m01 = mid(t.v0, t.v1), m12 = mid(t.v1, t.v2), m20 = mid(t.v2, t.v0);
            next.push_back({t.v0, m01, m20});
            next.push_back({t.v1, m12, m01});
            next.push_back({t.v2, m20, m12});
            next.push_back({m01, m12, m20});
        }
        faces = std::move(next);
    }

    const Eigen::Index num_nodes = static_cast<Eigen::Index>(verts.size());
    Eigen::MatrixXd positions(num_nodes, 3);
    for (Eigen::Index i = 0; i < num_nodes; ++i) positions.row(i) = radius * verts[i].transpose();

    // Cotangent stiffness with barycentric lumped mass.
    Eigen::VectorXd weights = Eigen::VectorXd::Zero(num_nodes);
    std::map<std::pair<int, int>, double> edge_coeffs;
    for (const Tri& t : faces) {
        const Eigen::Vector3d p0 = positions.row(t.v0), p1 = positions.row(t.v1),
                              p2 = positions.row(t.v2);
        const Eigen::Vector3d e0 = p2 - p1, e1 = p0 - p2, e2 = p1 - p0;
        const double area = 0.5 * e1.cross(-e0).norm();
        if (!(area > 0.0)) throw NumericalFailureError("sphere: degenerate triangle");
        // cot of the angle opposite each edge
        const double cot0 = (-e1).dot(e2) / (2.0 * area);
        const double cot1 = (-e2).dot(e0) / (2.0 * area);
        const double cot2 = (-e0).dot(e1) / (2.0 * area);
        auto add = [&](int i, int j, double c) {
            edge_coeffs[std::minmax(i, j)] += 0.5 * c;
        };
        add(t.v1, t.v2, cot0);
        add(t.v2, t.v0, cot1);
        add(t.v0, t.v1, cot2);
        const double third = area / 3.0;
        weights[t.v0] += third;
        weights[t.v1] += third;
        weights[t.v2] += third;
    }
    std::vector<Edge> edges;
    edges.reserve(edge_coeffs.size());
    for (const auto& [key, coeff] : edge_coeffs) edges.push_back({key.first, key.second, coeff});

    double curvature = 2.0 / (radius * radius);
    if (normalize_volume) normalize_to_unit_volume(2, weights, edges, curvature);

    ManifoldSpec spec;
    spec.family = ManifoldFamily::RoundSphere2;
    spec.radius = radius;
    spec.level = level;
    spec.normalize_volume = normalize_volume;
    return std::make_shared<DiscreteManifold>(2, std::move(weights), std::move(edges),
                                              std::move(positions), curvature,
                                              family_name(ManifoldFamily::RoundSphere2),
                                              std::move(spec));
}

ManifoldPtr build_product(const ManifoldPtr& a, const ManifoldPtr& b, bool normalize_volume) {
    if (!a || !b) throw InvalidSpecError("product: both factors must be built");
    const Eigen::Index na = a->num_nodes(), nb = b->num_nodes();
    const int dim = a->dimension() + b->dimension();

    Eigen::VectorXd weights(na * nb);
    for (Eigen::Index i = 0; i < na; ++i)
        for (Eigen::Index j = 0; j < nb; ++j) weights[i * nb + j] = a->weights()[i] * b->weights()[j];

    std::vector<Edge> edges;
    edges.reserve(a->edges().size() * nb + b->edges().size() * na);
    for (const Edge& e : a->edges())
        for (Eigen::Index j = 0; j < nb; ++j)
            edges.push_back({static_cast<int>(e.a * nb + j), static_cast<int>(e.b * nb + j),
                             e.coeff * b->weights()[j]});
    for (Eigen::Index i = 0; i < na; ++i)
        for (const Edge& e : b->edges())
            edges.push_back({static_cast<int>(i * nb + e.a), static_cast<int>(i * nb + e.b),
                             a->weights()[i] * e.coeff});

    const Eigen::Index ca = a->positions().cols(), cb = b->positions().cols();
    Eigen::MatrixXd positions(na * nb, ca + cb);
    for (Eigen::Index i = 0; i < na; ++i)
        for (Eigen::Index j = 0; j < nb; ++j) {
            positions.row(i * nb + j).head(ca) = a->positions().row(i);
            positions.row(i * nb + j).tail(cb) = b->positions().row(j);
        }

    double curvature = a->scalar_curvature() + b->scalar_curvature();
    if (normalize_volume) normalize_to_unit_volume(dim, weights, edges, curvature);

    ManifoldSpec spec;
    spec.family = ManifoldFamily::Product;
    spec.dimension = dim;
    spec.factors = {a->spec(), b->spec()};
    spec.normalize_volume = normalize_volume;
    return std::make_shared<DiscreteManifold>(dim, std::move(weights), std::move(edges),
                                              std::move(positions), curvature,
                                              family_name(ManifoldFamily::Product),
                                              std::move(spec), std::vector<ManifoldPtr>{a, b});
}

ManifoldPtr build_manifold(const ManifoldSpec& spec) {
    switch (spec.family) {
    case ManifoldFamily::FlatTorus:
        return build_flat_torus(spec.dimension, spec.lengths, spec.resolution,
                                spec.normalize_volume);
    case ManifoldFamily::Circle:
        if (spec.lengths.size() != 1 || spec.resolution.size() != 1)
            throw InvalidSpecError("circle: needs exactly one length and one resolution");
        return build_circle(spec.lengths[0], spec.resolution[0]);
    case ManifoldFamily::RoundSphere2:
        return build_round_sphere2(spec.radius, spec.level, spec.normalize_volume);
    case ManifoldFamily::Product: {
        if (spec.factors.size() != 2)
            throw InvalidSpecError("product: composes exactly two manifolds");
        ManifoldPtr a = build_manifold(spec.factors[0]);
        ManifoldPtr b = build_manifold(spec.factors[1]);
        if (spec.dimension != 0 && spec.dimension != a->dimension() + b->dimension())
            throw InvalidSpecError("product: declared dimension does not match factors");
        return build_product(a, b, spec.normalize_volume);
    }
    }
    throw InvalidSpecError("unknown manifold family");
}

void validate_field(const DiscreteManifold& m, const ScalarField& f) {
    if (f.size() != m.num_nodes())
        throw DimensionError("field has " + std::to_string(f.size()) + " values, manifold has " +
                             std::to_string(m.num_nodes()) + " nodes");
    if (!f.allFinite()) throw DegenerateInputError("field contains non-finite values");
}

double integrate(const DiscreteManifold& m, const ScalarField& f) {
    validate_field(m, f);
    return m.weights().dot(f);
}

double dirichlet_energy(const DiscreteManifold& m, const ScalarField& f) {
    validate_field(m, f);
    return f.dot(m.stiffness() * f);
}

WeightedOperators assemble_weighted_operators(const DiscreteManifold& m, const ScalarField& u) {
    validate_field(m, u);
    if ((u.array() <= 0.0).any())
        throw PositivityError("conformal factor must be positive at every node");
    if (m.dimension() < 3)
        throw UnsupportedDimensionError("conformal operators need dimension >= 3");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m.edges().size() * 4);
    for (const Edge& e : m.edges()) {
        const double mean = 0.5 * (u[e.a] + u[e.b]);
        const double c = e.coeff * mean * mean;
        trips.emplace_back(e.a, e.a, c);
        trips.emplace_back(e.b, e.b, c);
        trips.emplace_back(e.a, e.b, -c);
        trips.emplace_back(e.b, e.a, -c);
    }
    WeightedOperators ops;
    ops.stiffness.resize(m.num_nodes(), m.num_nodes());
    ops.stiffness.setFromTriplets(trips.begin(), trips.end());
    ops.stiffness.makeCompressed();

    const double two_star = 2.0 * m.dimension() / (m.dimension() - 2.0);
    ops.mass = m.weights().array() * u.array().pow(two_star);
    return ops;
}

} // namespace confeig
