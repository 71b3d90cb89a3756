#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace riskmap {

// Undirected areal neighbourhood structure. Vertices are dense indices
// 0..n-1 in a canonical order; external string ids are kept for I/O.
// Immutable once built, so instances can be shared across concurrent fits.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;

  // Canonical order follows `area_ids`. Edges are given as id pairs;
  // duplicates and reversed duplicates collapse to a single edge.
  // Throws DataError on unknown ids, self-loops, or an empty id list.
  static AdjacencyGraph from_edges(
      const std::vector<std::string>& area_ids,
      const std::vector<std::pair<std::string, std::string>>& edges);

  // Index-based construction for programmatic use; ids become "0","1",...
  static AdjacencyGraph from_index_edges(
      int n, const std::vector<std::pair<int, int>>& edges);

  // Regular rows x cols lattice with 4-neighbour adjacency, row-major ids.
  static AdjacencyGraph lattice(int rows, int cols);

  int size() const { return n_; }
  int edge_count() const { return static_cast<int>(adj_.size()) / 2; }
  int degree(int v) const { return adj_ptr_[v + 1] - adj_ptr_[v]; }
  std::span<const int> neighbors(int v) const {
    return {adj_.data() + adj_ptr_[v],
            static_cast<size_t>(adj_ptr_[v + 1] - adj_ptr_[v])};
  }
  bool has_edge(int i, int j) const;
  const std::vector<std::string>& area_ids() const { return ids_; }
  int index_of(const std::string& id) const;  // -1 if unknown

  // Vertices with no neighbours (w_{i+} = 0); permitted but flagged.
  const std::vector<int>& isolated() const { return isolated_; }

  // Maximal connected vertex sets, each sorted ascending, ordered by
  // smallest member.
  std::vector<std::vector<int>> connected_components() const;

  // Subgraph over `vertices` keeping exactly the edges with both endpoints
  // inside. Local indices follow the input order; local id strings are the
  // originals, so the local->global map is recoverable via index_of.
  AdjacencyGraph induced_subgraph(const std::vector<int>& vertices) const;

 private:
  void finalize(std::vector<std::pair<int, int>> edges);

  int n_ = 0;
  std::vector<int> adj_ptr_;  // CSR offsets, size n+1
  std::vector<int> adj_;      // sorted neighbour lists
  std::vector<std::string> ids_;
  std::vector<int> isolated_;
};

// Assignment of areas to subregions, either disjoint or overlapping after
// k-order expansion.
struct DomainPartition {
  enum class Mode { disjoint, overlapping };

  Mode mode = Mode::disjoint;
  int order = 0;  // expansion order k when overlapping
  std::vector<std::vector<int>> members;  // per subregion, ordered

  int count() const { return static_cast<int>(members.size()); }
  // Throws DataError if the invariants for the mode are violated
  // (coverage, disjointness, non-empty subregions).
  void validate(int n_areas) const;
};

// Single subregion containing every area; the degenerate partition used by
// the global model.
DomainPartition single_partition(int n_areas);

// Grows every subregion of a disjoint partition by the vertices at graph
// distance <= k (breadth-first from the member set). Original members keep
// their order; added vertices follow by ascending distance, then index.
DomainPartition k_order_expand(const AdjacencyGraph& g,
                               const DomainPartition& p, int k);

// Bins areas by centroid (one row per area, columns x and y) into a
// rows x cols grid over the bounding box; empty cells are dropped. Throws
// DataError on non-finite coordinates.
DomainPartition grid_partition(const Eigen::MatrixXd& coords, int rows, int cols);

// --- text formats (External Interfaces) ---

// One id per line, '#' comments, blank lines ignored.
std::vector<std::string> parse_id_manifest(std::istream& in);

// Lines `id_a<TAB>id_b` (any run of blanks accepted), '#' comments.
AdjacencyGraph parse_edge_list(std::istream& in,
                               const std::vector<std::string>& area_ids);

// CSV `area_id,subregion_id` with header optional; subregions ordered by
// first appearance, members by canonical area index.
DomainPartition parse_partition_csv(std::istream& in,
                                    const AdjacencyGraph& g);

}  // namespace riskmap
