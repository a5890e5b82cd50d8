#include "otg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "otg/errors.hpp"

namespace otg {

LatticeGrid::LatticeGrid(int dim, int cells, double lower, double upper, Boundary boundary)
    : dim_(dim), cells_(cells), lower_(lower), upper_(upper), boundary_(boundary) {
  if (dim < 1) throw DimensionMismatch("grid dimension must be >= 1");
  if (cells < 1) throw DimensionMismatch("grid needs at least one cell per axis");
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw NonFiniteValue("grid bounds must be finite with lower < upper");
  }
  spacing_ = (upper - lower) / cells;
  cell_volume_ = std::pow(spacing_, dim);
  strides_.assign(static_cast<std::size_t>(dim), 1);
  std::size_t count = 1;
  for (int axis = dim - 1; axis >= 0; --axis) {
    strides_[static_cast<std::size_t>(axis)] = count;
    count *= static_cast<std::size_t>(cells + 1);
  }
  node_count_ = count;
}

bool LatticeGrid::contains(std::span<const int> index) const {
  if (index.size() != static_cast<std::size_t>(dim_)) return false;
  return std::all_of(index.begin(), index.end(), [&](int i) { return i >= 0 && i <= cells_; });
}

std::size_t LatticeGrid::flat(std::span<const int> index) const {
  if (!contains(index)) throw OutOfBounds("multi-index outside the lattice");
  std::size_t f = 0;
  for (std::size_t a = 0; a < index.size(); ++a) f += static_cast<std::size_t>(index[a]) * strides_[a];
  return f;
}

MultiIndex LatticeGrid::multi(std::size_t flat) const {
  if (flat >= node_count_) throw OutOfBounds("flat index " + std::to_string(flat) + " outside the lattice");
  MultiIndex idx(static_cast<std::size_t>(dim_));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    idx[a] = static_cast<int>(flat / strides_[a]);
    flat %= strides_[a];
  }
  return idx;
}

double LatticeGrid::coordinate(std::size_t flat, int axis) const {
  const auto idx = multi(flat);
  return lower_ + spacing_ * idx[static_cast<std::size_t>(axis)];
}

bool operator==(const LatticeGrid& a, const LatticeGrid& b) {
  return a.dim_ == b.dim_ && a.cells_ == b.cells_ && a.lower_ == b.lower_ && a.upper_ == b.upper_ &&
         a.boundary_ == b.boundary_;
}

std::vector<MultiIndex> neighbors(const LatticeGrid& grid, std::span<const int> node) {
  if (!grid.contains(node)) throw OutOfBounds("neighbors: node outside the lattice");
  const int period = grid.nodes_per_axis();
  const bool periodic = grid.boundary() == Boundary::Periodic;
  std::vector<MultiIndex> out;
  for (int axis = 0; axis < grid.dim(); ++axis) {
    for (int step : {-1, +1}) {
      MultiIndex j(node.begin(), node.end());
      int& c = j[static_cast<std::size_t>(axis)];
      c += step;
      if (c < 0 || c >= period) {
        if (!periodic) continue;
        c = (c + period) % period;
      }
      if (std::find(out.begin(), out.end(), j) == out.end()) out.push_back(std::move(j));
    }
  }
  return out;
}

std::vector<std::size_t> neighbor_nodes(const LatticeGrid& grid, std::size_t node) {
  const auto idx = grid.multi(node);
  std::vector<std::size_t> out;
  for (const auto& j : neighbors(grid, idx)) out.push_back(grid.flat(j));
  return out;
}

std::vector<Edge> edge_list(const LatticeGrid& grid) {
  const int n = grid.cells();
  const bool periodic = grid.boundary() == Boundary::Periodic;
  std::vector<Edge> edges;
  edges.reserve(grid.node_count() * static_cast<std::size_t>(grid.dim()));
  for (std::size_t f = 0; f < grid.node_count(); ++f) {
    const auto idx = grid.multi(f);
    for (int axis = 0; axis < grid.dim(); ++axis) {
      const int c = idx[static_cast<std::size_t>(axis)];
      const std::size_t s = grid.stride(axis);
      if (c < n) {
        edges.push_back({f, f + s, axis, false});
      } else if (periodic && n > 1) {
        // n == 1 would duplicate the forward edge of the 2-node ring
        edges.push_back({f, f - static_cast<std::size_t>(n) * s, axis, true});
      }
    }
  }
  return edges;
}

namespace {

// Generators of the column recipe, highest axis first.
std::vector<Generator> column_recipe(const LatticeGrid& grid) {
  const int d = grid.dim();
  const int n = grid.cells();
  std::vector<Generator> gens;
  gens.reserve(grid.node_count() - 1);
  for (int axis = d - 1; axis >= 0; --axis) {
    // Axes before `axis` span the full range, `axis` runs 0..n-1, later axes are 0.
    MultiIndex idx(static_cast<std::size_t>(d), 0);
    const std::size_t span_count = static_cast<std::size_t>(std::pow(n + 1, axis));
    for (std::size_t outer = 0; outer < span_count; ++outer) {
      std::size_t rem = outer;
      for (int a = axis - 1; a >= 0; --a) {
        idx[static_cast<std::size_t>(a)] = static_cast<int>(rem % static_cast<std::size_t>(n + 1));
        rem /= static_cast<std::size_t>(n + 1);
      }
      for (int c = 0; c < n; ++c) {
        idx[static_cast<std::size_t>(axis)] = c;
        const std::size_t tail = grid.flat(idx);
        gens.push_back({tail, tail + grid.stride(axis)});
      }
      idx[static_cast<std::size_t>(axis)] = 0;
    }
  }
  return gens;
}

}  // namespace

SpanningPath::SpanningPath(const LatticeGrid& grid)
    : grid_(grid), generators_(column_recipe(grid)), edges_(edge_list(grid)) {
  const std::size_t N = grid.node_count();

  // Tree structure: parent slot of each node, root is node 0.
  std::vector<long> parent_slot(N, -1);
  std::vector<std::vector<std::size_t>> children(N);
  for (std::size_t w = 0; w < generators_.size(); ++w) {
    parent_slot[generators_[w].head] = static_cast<long>(w);
    children[generators_[w].tail].push_back(w);
  }
  std::vector<std::size_t> depth(N, 0);
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t node = queue.front();
    queue.pop_front();
    for (std::size_t w : children[node]) {
      order_.push_back(w);
      depth[generators_[w].head] = depth[node] + 1;
      queue.push_back(generators_[w].head);
    }
  }

  incident_.assign(N, {});
  expansion_offsets_.reserve(edges_.size() + 1);
  expansion_offsets_.push_back(0);
  std::vector<ExpansionTerm> up_a;
  std::vector<ExpansionTerm> up_b;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& edge = edges_[e];
    incident_[edge.tail].push_back(e);
    incident_[edge.head].push_back(e);
    // v_ab = S_b - S_a: climb both ends to their common ancestor.
    std::size_t a = edge.tail;
    std::size_t b = edge.head;
    up_a.clear();
    up_b.clear();
    while (a != b) {
      if (depth[a] >= depth[b]) {
        const auto w = static_cast<std::size_t>(parent_slot[a]);
        up_a.push_back({w, -1});
        a = generators_[w].tail;
      } else {
        const auto w = static_cast<std::size_t>(parent_slot[b]);
        up_b.push_back({w, +1});
        b = generators_[w].tail;
      }
    }
    expansion_terms_.insert(expansion_terms_.end(), up_a.begin(), up_a.end());
    expansion_terms_.insert(expansion_terms_.end(), up_b.rbegin(), up_b.rend());
    expansion_offsets_.push_back(expansion_terms_.size());
  }
}

std::span<const ExpansionTerm> SpanningPath::expansion(std::size_t edge) const {
  const std::size_t begin = expansion_offsets_.at(edge);
  const std::size_t end = expansion_offsets_.at(edge + 1);
  return {expansion_terms_.data() + begin, end - begin};
}

long SpanningPath::find_edge(std::size_t i, std::size_t j, bool* reversed) const {
  if (i >= incident_.size() || j >= incident_.size()) return -1;
  for (std::size_t e : incident_[i]) {
    if (edges_[e].tail == i && edges_[e].head == j) {
      if (reversed) *reversed = false;
      return static_cast<long>(e);
    }
    if (edges_[e].tail == j && edges_[e].head == i) {
      if (reversed) *reversed = true;
      return static_cast<long>(e);
    }
  }
  return -1;
}

SpanningPath build_spanning_path(const LatticeGrid& grid) { return SpanningPath(grid); }

Vec reconstruct_potential(const SpanningPath& path, const ReducedVelocity& vhat, double anchor_value) {
  if (vhat.size() != path.size()) throw DimensionMismatch("reduced velocity length must be N-1");
  Vec S(static_cast<Eigen::Index>(path.grid().node_count()));
  S[0] = anchor_value;
  const auto& gens = path.generators();
  for (std::size_t w : path.reconstruction_order()) {
    S[static_cast<Eigen::Index>(gens[w].head)] = S[static_cast<Eigen::Index>(gens[w].tail)] + vhat.values[static_cast<Eigen::Index>(w)];
  }
  return S;
}

ReducedVelocity restrict_potential(const SpanningPath& path, const Vec& potential) {
  if (static_cast<std::size_t>(potential.size()) != path.grid().node_count()) {
    throw DimensionMismatch("potential must have one value per node");
  }
  const auto& gens = path.generators();
  Vec v(static_cast<Eigen::Index>(gens.size()));
  for (std::size_t w = 0; w < gens.size(); ++w) {
    v[static_cast<Eigen::Index>(w)] =
        potential[static_cast<Eigen::Index>(gens[w].head)] - potential[static_cast<Eigen::Index>(gens[w].tail)];
  }
  return ReducedVelocity(std::move(v));
}

double expand_velocity(const SpanningPath& path, const ReducedVelocity& vhat, std::size_t i, std::size_t j) {
  if (vhat.size() != path.size()) throw DimensionMismatch("reduced velocity length must be N-1");
  bool reversed = false;
  const long e = path.find_edge(i, j, &reversed);
  if (e < 0) throw NotAnEdge("(" + std::to_string(i) + "," + std::to_string(j) + ") is not a lattice edge");
  double v = 0.0;
  for (const auto& term : path.expansion(static_cast<std::size_t>(e))) {
    v += term.coeff * vhat.values[static_cast<Eigen::Index>(term.slot)];
  }
  return reversed ? -v : v;
}

}  // namespace otg
