#include "anisoflow/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace anisoflow {

namespace {

Element make_simplex(const Grid& grid, std::array<int, 3> nodes)
{
    const int d = grid.dim();
    Element e;
    e.nodes = nodes;
    // Rows of `edges` are x_k - x_0; hat gradients solve edges * g_k = e_k.
    SpaceMatrix edges(d, d);
    const SpaceVector x0 = grid.node(nodes[0]);
    for (int k = 0; k < d; ++k) {
        edges.row(k) = (grid.node(nodes[k + 1]) - x0).transpose();
    }
    const double det = edges.determinant();
    e.measure = std::abs(det) / (d == 1 ? 1.0 : 2.0);
    const SpaceMatrix inv = edges.inverse();
    SpaceVector sum = SpaceVector::Zero(d);
    for (int k = 0; k < d; ++k) {
        e.hat_gradients[k + 1] = inv.col(k);
        sum += inv.col(k);
    }
    e.hat_gradients[0] = -sum;
    if (d == 1) {
        e.hat_gradients[2] = SpaceVector::Zero(1);
    }
    return e;
}

}  // namespace

Grid::Grid(int dim, std::vector<int> nodes_per_axis, std::vector<double> lengths)
    : dim_(dim), nodes_per_axis_(std::move(nodes_per_axis)), lengths_(std::move(lengths))
{
    if (dim_ != 1 && dim_ != 2) {
        throw std::invalid_argument("grid: dim must be 1 or 2, got " + std::to_string(dim_));
    }
    if (static_cast<int>(nodes_per_axis_.size()) != dim_ || static_cast<int>(lengths_.size()) != dim_) {
        throw std::invalid_argument("grid: need one node count and one length per axis");
    }
    node_count_ = 1;
    for (int k = 0; k < dim_; ++k) {
        if (nodes_per_axis_[k] < 2) {
            throw std::invalid_argument("grid: need at least 2 nodes per axis, got "
                                        + std::to_string(nodes_per_axis_[k]));
        }
        if (!(lengths_[k] > 0.0) || !std::isfinite(lengths_[k])) {
            throw std::invalid_argument("grid: axis lengths must be positive and finite");
        }
        spacing_.push_back(lengths_[k] / (nodes_per_axis_[k] - 1));
        node_count_ *= nodes_per_axis_[k];
    }

    if (dim_ == 1) {
        const int n = nodes_per_axis_[0];
        elements_.reserve(n - 1);
        for (int i = 0; i + 1 < n; ++i) {
            elements_.push_back(make_simplex(*this, {i, i + 1, 0}));
        }
    } else {
        const int nx = nodes_per_axis_[0];
        const int ny = nodes_per_axis_[1];
        elements_.reserve(2 * (nx - 1) * (ny - 1));
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                const int a = i + nx * j;
                const int b = a + 1;
                const int c = a + nx;
                const int d = c + 1;
                elements_.push_back(make_simplex(*this, {a, b, d}));
                elements_.push_back(make_simplex(*this, {a, d, c}));
            }
        }
    }

    weights_ = Eigen::VectorXd::Zero(node_count_);
    // Row sum of the P1 mass matrix on a simplex is |e|/(d+1) per vertex.
    for (const Element& e : elements_) {
        for (int k = 0; k <= dim_; ++k) {
            weights_[e.nodes[k]] += e.measure / (dim_ + 1);
        }
    }
}

double Grid::volume() const noexcept
{
    return std::accumulate(lengths_.begin(), lengths_.end(), 1.0, std::multiplies<>());
}

SpaceVector Grid::node(int i) const
{
    SpaceVector x(dim_);
    const int ix = i % nodes_per_axis_[0];
    x[0] = ix * spacing_[0];
    if (dim_ == 2) {
        x[1] = (i / nodes_per_axis_[0]) * spacing_[1];
    }
    return x;
}

bool Grid::same_shape(const Grid& other) const noexcept
{
    return dim_ == other.dim_ && nodes_per_axis_ == other.nodes_per_axis_ && lengths_ == other.lengths_;
}

void Grid::check_field(const Field& f, const char* what) const
{
    if (f.size() != node_count_) {
        throw std::invalid_argument(std::string(what) + ": field has " + std::to_string(f.size())
                                    + " values, grid has " + std::to_string(node_count_) + " nodes");
    }
}

Grid build_grid(int dim, std::vector<int> nodes_per_axis, std::vector<double> lengths)
{
    return Grid(dim, std::move(nodes_per_axis), std::move(lengths));
}

Eigen::VectorXd lumped_mass(const Grid& grid)
{
    return grid.weights();
}

std::vector<SpaceVector> element_gradients(const Grid& grid, const Field& field)
{
    grid.check_field(field, "element_gradients");
    const int d = grid.dim();
    std::vector<SpaceVector> grads;
    grads.reserve(grid.elements().size());
    for (const Element& e : grid.elements()) {
        SpaceVector g = SpaceVector::Zero(d);
        for (int k = 0; k <= d; ++k) {
            g += field[e.nodes[k]] * e.hat_gradients[k];
        }
        grads.push_back(g);
    }
    return grads;
}

Eigen::VectorXd assemble_flux_divergence(const Grid& grid, std::span<const SpaceVector> flux)
{
    const auto elements = grid.elements();
    if (flux.size() != elements.size()) {
        throw std::invalid_argument("assemble_flux_divergence: got " + std::to_string(flux.size())
                                    + " fluxes for " + std::to_string(elements.size()) + " elements");
    }
    const int d = grid.dim();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.node_count());
    for (std::size_t m = 0; m < elements.size(); ++m) {
        const Element& e = elements[m];
        for (int k = 0; k <= d; ++k) {
            out[e.nodes[k]] += e.measure * flux[m].dot(e.hat_gradients[k]);
        }
    }
    return out;
}

SparseMatrix assemble_weighted_stiffness(const Grid& grid, std::span<const SpaceMatrix> element_matrices)
{
    const auto elements = grid.elements();
    if (element_matrices.size() != elements.size()) {
        throw std::invalid_argument("assemble_weighted_stiffness: element matrix count mismatch");
    }
    const int d = grid.dim();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(elements.size() * (d + 1) * (d + 1));
    for (std::size_t m = 0; m < elements.size(); ++m) {
        const Element& e = elements[m];
        for (int a = 0; a <= d; ++a) {
            const SpaceVector mg = element_matrices[m] * e.hat_gradients[a];
            for (int b = 0; b <= d; ++b) {
                triplets.emplace_back(e.nodes[b], e.nodes[a], e.measure * e.hat_gradients[b].dot(mg));
            }
        }
    }
    SparseMatrix k(grid.node_count(), grid.node_count());
    k.setFromTriplets(triplets.begin(), triplets.end());
    return k;
}

SparseMatrix assemble_stiffness(const Grid& grid)
{
    const std::vector<SpaceMatrix> identity(grid.elements().size(),
                                            SpaceMatrix::Identity(grid.dim(), grid.dim()));
    return assemble_weighted_stiffness(grid, identity);
}

FieldNorms norms(const Grid& grid, const Field& field)
{
    grid.check_field(field, "norms");
    FieldNorms n;
    n.l2 = std::sqrt(grid.weights().dot(field.cwiseAbs2()));
    double semi = 0.0;
    const auto grads = element_gradients(grid, field);
    const auto elements = grid.elements();
    for (std::size_t m = 0; m < elements.size(); ++m) {
        semi += elements[m].measure * grads[m].squaredNorm();
    }
    n.h1_semi = std::sqrt(semi);
    n.linf = field.size() > 0 ? field.cwiseAbs().maxCoeff() : 0.0;
    return n;
}

double h1_norm(const Grid& grid, const Field& field)
{
    const FieldNorms n = norms(grid, field);
    return std::hypot(n.l2, n.h1_semi);
}

double l2_dot(const Grid& grid, const Field& a, const Field& b)
{
    grid.check_field(a, "l2_dot");
    grid.check_field(b, "l2_dot");
    return (grid.weights().array() * a.array() * b.array()).sum();
}

double dual_norm(const Grid& grid, const Field& f, double rel_tol)
{
    grid.check_field(f, "dual_norm");
    SparseMatrix riesz = assemble_stiffness(grid);
    for (int i = 0; i < grid.node_count(); ++i) {
        riesz.coeffRef(i, i) += grid.weights()[i];
    }
    const Eigen::VectorXd rhs = grid.weights().cwiseProduct(f);
    const Eigen::VectorXd z = solve_spd(riesz, rhs, rel_tol, 20 * grid.node_count() + 100, "dual_norm");
    return std::sqrt(std::max(0.0, rhs.dot(z)));
}

}  // namespace anisoflow
