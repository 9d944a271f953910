#pragma once

#include "anisoflow/linalg.hpp"

#include <array>
#include <span>
#include <vector>

namespace anisoflow {

/// One P1 simplex: an interval in 1D, a triangle in 2D.
struct Element {
    std::array<int, 3> nodes{};              ///< first dim+1 entries are used
    std::array<SpaceVector, 3> hat_gradients; ///< constant gradient of each local hat function
    double measure = 0.0;
};

/// Uniform mesh of the box (0,L_1) x ... with P1 elements. Nodes are ordered
/// lexicographically with x fastest; in 2D each square cell is split along
/// its (i,j)-(i+1,j+1) diagonal.
class Grid {
public:
    Grid(int dim, std::vector<int> nodes_per_axis, std::vector<double> lengths);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<int>& nodes_per_axis() const noexcept { return nodes_per_axis_; }
    [[nodiscard]] const std::vector<double>& lengths() const noexcept { return lengths_; }
    [[nodiscard]] const std::vector<double>& spacing() const noexcept { return spacing_; }
    [[nodiscard]] int node_count() const noexcept { return node_count_; }
    [[nodiscard]] std::span<const Element> elements() const noexcept { return elements_; }
    [[nodiscard]] double volume() const noexcept;

    /// Coordinates of node i.
    [[nodiscard]] SpaceVector node(int i) const;

    /// Lumped mass as computed at construction.
    [[nodiscard]] const Eigen::VectorXd& weights() const noexcept { return weights_; }

    [[nodiscard]] bool same_shape(const Grid& other) const noexcept;

    /// Throws std::invalid_argument unless f has node_count() entries.
    void check_field(const Field& f, const char* what) const;

private:
    int dim_;
    std::vector<int> nodes_per_axis_;
    std::vector<double> lengths_;
    std::vector<double> spacing_;
    int node_count_ = 0;
    std::vector<Element> elements_;
    Eigen::VectorXd weights_;
};

Grid build_grid(int dim, std::vector<int> nodes_per_axis, std::vector<double> lengths);

/// Row sums of the exact P1 mass matrix.
Eigen::VectorXd lumped_mass(const Grid& grid);

/// Element-constant gradient of the piecewise linear interpolant of `field`.
std::vector<SpaceVector> element_gradients(const Grid& grid, const Field& field);

/// out_i = sum_e |e| q_e . grad(phi_i)|_e
Eigen::VectorXd assemble_flux_divergence(const Grid& grid, std::span<const SpaceVector> flux);

/// Sparse matrix with entries sum_e |e| grad(phi_i)^T M_e grad(phi_k), one
/// symmetric d x d matrix M_e per element.
SparseMatrix assemble_weighted_stiffness(const Grid& grid, std::span<const SpaceMatrix> element_matrices);

/// Standard P1 stiffness matrix (M_e = identity).
SparseMatrix assemble_stiffness(const Grid& grid);

struct FieldNorms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double linf = 0.0;
};

FieldNorms norms(const Grid& grid, const Field& field);

/// sqrt(l2^2 + h1_semi^2)
double h1_norm(const Grid& grid, const Field& field);

/// Lumped L2 inner product sum_i w_i a_i b_i.
double l2_dot(const Grid& grid, const Field& a, const Field& b);

/// Norm of the functional phi -> (f, phi) on H^1, through the discrete Riesz
/// problem (grad z, grad phi) + (z, phi) = (f, phi).
double dual_norm(const Grid& grid, const Field& f, double rel_tol = 1e-10);

}  // namespace anisoflow
