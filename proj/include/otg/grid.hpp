#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace otg {

using Vec = Eigen::VectorXd;
using MultiIndex = std::vector<int>;

enum class Boundary { NoFlux, Periodic };

/**
 * Uniform lattice on the box [lower, upper]^dim with `cells` cells per axis,
 * i.e. cells + 1 nodes per axis and (cells + 1)^dim nodes in total.
 *
 * Flat indices are row-major with axis 0 (x1) slowest. Periodic grids wrap
 * axis indices modulo cells + 1.
 */
class LatticeGrid {
 public:
  LatticeGrid(int dim, int cells, double lower, double upper, Boundary boundary = Boundary::NoFlux);
  // One cell on [0, 1]; placeholder for default-constructed fields.
  LatticeGrid() : LatticeGrid(1, 1, 0.0, 1.0) {}

  int dim() const { return dim_; }
  int cells() const { return cells_; }
  int nodes_per_axis() const { return cells_ + 1; }
  std::size_t node_count() const { return node_count_; }
  double spacing() const { return spacing_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  Boundary boundary() const { return boundary_; }
  // dx^d, the quadrature weight of one node.
  double cell_volume() const { return cell_volume_; }

  bool contains(std::span<const int> index) const;
  std::size_t flat(std::span<const int> index) const;
  MultiIndex multi(std::size_t flat) const;
  double coordinate(std::size_t flat, int axis) const;
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  friend bool operator==(const LatticeGrid& a, const LatticeGrid& b);

 private:
  int dim_;
  int cells_;
  double lower_;
  double upper_;
  Boundary boundary_;
  double spacing_;
  double cell_volume_;
  std::size_t node_count_;
  std::vector<std::size_t> strides_;
};

// Undirected lattice edge stored in forward orientation: head = tail + e_axis
// (modulo the period for wrap edges).
struct Edge {
  std::size_t tail;
  std::size_t head;
  int axis;
  bool wraps;
};

/// Axis neighbors of `node`. NoFlux omits out-of-range indices; Periodic wraps.
/// When cells == 1 under Periodic the left and right neighbors coincide and are
/// reported once, so such a node has d neighbors instead of 2d.
std::vector<MultiIndex> neighbors(const LatticeGrid& grid, std::span<const int> node);

/// Flat-index version of `neighbors`, same ordering and multiplicity rules.
std::vector<std::size_t> neighbor_nodes(const LatticeGrid& grid, std::size_t node);

/// Every undirected edge once, ordered by tail then axis.
std::vector<Edge> edge_list(const LatticeGrid& grid);

/// The N-1 free components of a potential-generated edge field: one value per
/// generator edge, v̂_w = S[head_w] - S[tail_w].
struct ReducedVelocity {
  Vec values;

  ReducedVelocity() = default;
  explicit ReducedVelocity(Vec v) : values(std::move(v)) {}
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct Generator {
  std::size_t tail;
  std::size_t head;
};

struct ExpansionTerm {
  std::size_t slot;
  int coeff;  // -1 or +1; zero coefficients are not stored
};

/**
 * Spanning tree of the lattice whose N-1 edges carry the reduced velocity.
 *
 * Construction follows the column recipe: generators along the last axis for
 * every column, then the column anchors (last index 0) are joined with the
 * (d-1)-dimensional recipe, down to axis 0. The tree is rooted at node 0 and
 * every generator points away from the root. Periodic grids use the same tree;
 * wrap edges are only ever expanded.
 *
 * Every lattice edge carries a signed expansion over generator slots with
 * coefficients in {-1, +1} (slots with coefficient 0 are omitted).
 */
class SpanningPath {
 public:
  explicit SpanningPath(const LatticeGrid& grid);

  const LatticeGrid& grid() const { return grid_; }
  std::size_t size() const { return generators_.size(); }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Generator slots in an order where every tail is reached before its head.
  const std::vector<std::size_t>& reconstruction_order() const { return order_; }

  std::span<const ExpansionTerm> expansion(std::size_t edge) const;
  // Index into edges() of the lattice edge {i, j}, or -1 if there is none.
  // `reversed` is set when (i, j) runs against the stored orientation.
  long find_edge(std::size_t i, std::size_t j, bool* reversed = nullptr) const;

 private:
  LatticeGrid grid_;
  std::vector<Generator> generators_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> expansion_offsets_;
  std::vector<ExpansionTerm> expansion_terms_;
  // Per node, the edges incident to it (index into edges_).
  std::vector<std::vector<std::size_t>> incident_;
};

SpanningPath build_spanning_path(const LatticeGrid& grid);

/// S on every node with S[root] = anchor_value, walking S[head] = S[tail] + v̂.
Vec reconstruct_potential(const SpanningPath& path, const ReducedVelocity& vhat, double anchor_value);

/// Inverse of reconstruct_potential up to the anchor: v̂_w = S[head_w] - S[tail_w].
ReducedVelocity restrict_potential(const SpanningPath& path, const Vec& potential);

/// v_ij = S_j - S_i expressed through the generators. Antisymmetric in (i, j).
double expand_velocity(const SpanningPath& path, const ReducedVelocity& vhat, std::size_t i, std::size_t j);

}  // namespace otg
