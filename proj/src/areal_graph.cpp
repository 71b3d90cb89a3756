#include "riskmap/areal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "riskmap/errors.hpp"

namespace riskmap {

namespace {

std::unordered_map<std::string, int> make_index(
    const std::vector<std::string>& ids) {
  std::unordered_map<std::string, int> index;
  index.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = index.emplace(ids[i], static_cast<int>(i));
    if (!inserted) throw DataError("duplicate area id '" + ids[i] + "'");
  }
  return index;
}

}  // namespace

void AdjacencyGraph::finalize(std::vector<std::pair<int, int>> edges) {
  for (auto& e : edges) {
    if (e.first == e.second)
      throw DataError("self-loop at area " + ids_[e.first]);
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<int> deg(n_, 0);
  for (const auto& e : edges) {
    ++deg[e.first];
    ++deg[e.second];
  }
  adj_ptr_.assign(n_ + 1, 0);
  for (int v = 0; v < n_; ++v) adj_ptr_[v + 1] = adj_ptr_[v] + deg[v];
  adj_.assign(adj_ptr_[n_], 0);
  std::vector<int> cursor(adj_ptr_.begin(), adj_ptr_.end() - 1);
  for (const auto& e : edges) {
    adj_[cursor[e.first]++] = e.second;
    adj_[cursor[e.second]++] = e.first;
  }
  for (int v = 0; v < n_; ++v)
    std::sort(adj_.begin() + adj_ptr_[v], adj_.begin() + adj_ptr_[v + 1]);

  isolated_.clear();
  for (int v = 0; v < n_; ++v)
    if (degree(v) == 0) isolated_.push_back(v);
}

AdjacencyGraph AdjacencyGraph::from_edges(
    const std::vector<std::string>& area_ids,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  if (area_ids.empty()) throw DataError("empty area id list");
  AdjacencyGraph g;
  g.ids_ = area_ids;
  g.n_ = static_cast<int>(area_ids.size());
  auto index = make_index(area_ids);
  std::vector<std::pair<int, int>> idx_edges;
  idx_edges.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end()) throw DataError("unknown area id '" + a + "'");
    if (ib == index.end()) throw DataError("unknown area id '" + b + "'");
    idx_edges.emplace_back(ia->second, ib->second);
  }
  g.finalize(std::move(idx_edges));
  return g;
}

AdjacencyGraph AdjacencyGraph::from_index_edges(
    int n, const std::vector<std::pair<int, int>>& edges) {
  if (n <= 0) throw DataError("graph must have at least one area");
  AdjacencyGraph g;
  g.n_ = n;
  g.ids_.resize(n);
  for (int i = 0; i < n; ++i) g.ids_[i] = std::to_string(i);
  for (const auto& e : edges)
    if (e.first < 0 || e.first >= n || e.second < 0 || e.second >= n)
      throw DataError("edge endpoint out of range");
  g.finalize(edges);
  return g;
}

AdjacencyGraph AdjacencyGraph::lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw DataError("lattice needs rows, cols >= 1");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(rows) * cols * 2);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int v = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(v, v + 1);
      if (r + 1 < rows) edges.emplace_back(v, v + cols);
    }
  return from_index_edges(rows * cols, edges);
}

bool AdjacencyGraph::has_edge(int i, int j) const {
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

int AdjacencyGraph::index_of(const std::string& id) const {
  for (size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return static_cast<int>(i);
  return -1;
}

std::vector<std::vector<int>> AdjacencyGraph::connected_components() const {
  std::vector<int> label(n_, -1);
  std::vector<std::vector<int>> comps;
  std::deque<int> queue;
  for (int start = 0; start < n_; ++start) {
    if (label[start] >= 0) continue;
    int id = static_cast<int>(comps.size());
    comps.emplace_back();
    label[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      comps[id].push_back(v);
      for (int w : neighbors(v))
        if (label[w] < 0) {
          label[w] = id;
          queue.push_back(w);
        }
    }
    std::sort(comps[id].begin(), comps[id].end());
  }
  return comps;
}

AdjacencyGraph AdjacencyGraph::induced_subgraph(
    const std::vector<int>& vertices) const {
  std::vector<int> local(n_, -1);
  for (size_t i = 0; i < vertices.size(); ++i) {
    int v = vertices[i];
    if (v < 0 || v >= n_) throw DataError("subgraph vertex out of range");
    if (local[v] >= 0) throw DataError("duplicate subgraph vertex");
    local[v] = static_cast<int>(i);
  }
  AdjacencyGraph g;
  g.n_ = static_cast<int>(vertices.size());
  g.ids_.reserve(vertices.size());
  for (int v : vertices) g.ids_.push_back(ids_[v]);
  std::vector<std::pair<int, int>> edges;
  for (int v : vertices)
    for (int w : neighbors(v))
      if (local[w] >= 0 && v < w) edges.emplace_back(local[v], local[w]);
  g.finalize(std::move(edges));
  return g;
}

void DomainPartition::validate(int n_areas) const {
  if (members.empty()) throw DataError("partition has no subregions");
  std::vector<int> cover(n_areas, 0);
  for (size_t d = 0; d < members.size(); ++d) {
    if (members[d].empty())
      throw DataError("subregion " + std::to_string(d) + " is empty");
    std::vector<int> seen;
    for (int v : members[d]) {
      if (v < 0 || v >= n_areas)
        throw DataError("partition member out of range");
      ++cover[v];
      seen.push_back(v);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw DataError("subregion " + std::to_string(d) +
                      " lists an area twice");
  }
  for (int v = 0; v < n_areas; ++v) {
    if (cover[v] == 0)
      throw DataError("area " + std::to_string(v) + " not covered");
    if (mode == Mode::disjoint && cover[v] != 1)
      throw DataError("area " + std::to_string(v) +
                      " covered more than once in a disjoint partition");
  }
}

DomainPartition single_partition(int n_areas) {
  DomainPartition p;
  p.members.emplace_back();
  p.members[0].resize(n_areas);
  for (int i = 0; i < n_areas; ++i) p.members[0][i] = i;
  return p;
}

DomainPartition k_order_expand(const AdjacencyGraph& g,
                               const DomainPartition& p, int k) {
  if (p.mode != DomainPartition::Mode::disjoint)
    throw DataError("k_order_expand expects a disjoint partition");
  if (k < 0) throw DataError("expansion order must be >= 0");
  p.validate(g.size());
  if (k == 0) return p;

  DomainPartition out;
  out.mode = DomainPartition::Mode::overlapping;
  out.order = k;
  out.members.resize(p.members.size());
  std::vector<int> dist(g.size());
  for (size_t d = 0; d < p.members.size(); ++d) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<int> queue;
    for (int v : p.members[d]) {
      dist[v] = 0;
      queue.push_back(v);
    }
    // multi-source BFS up to depth k
    std::vector<std::pair<int, int>> added;  // (distance, vertex)
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      if (dist[v] == k) continue;
      for (int w : g.neighbors(v))
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          added.emplace_back(dist[w], w);
          queue.push_back(w);
        }
    }
    std::sort(added.begin(), added.end());
    out.members[d] = p.members[d];
    for (const auto& [dd, w] : added) out.members[d].push_back(w);
  }
  out.validate(g.size());
  return out;
}

DomainPartition grid_partition(const Eigen::MatrixXd& coords, int rows, int cols) {
  if (rows < 1 || cols < 1) throw DataError("grid needs rows, cols >= 1");
  if (coords.rows() == 0) throw DataError("no centroids given");
  if (coords.cols() != 2) throw DataError("centroids need x and y columns");
  const int n = static_cast<int>(coords.rows());
  double xmin = coords(0, 0), xmax = coords(0, 0);
  double ymin = coords(0, 1), ymax = coords(0, 1);
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(coords(i, 0)) || !std::isfinite(coords(i, 1)))
      throw DataError("non-finite centroid coordinate");
    xmin = std::min(xmin, coords(i, 0));
    xmax = std::max(xmax, coords(i, 0));
    ymin = std::min(ymin, coords(i, 1));
    ymax = std::max(ymax, coords(i, 1));
  }
  double xspan = xmax - xmin, yspan = ymax - ymin;
  auto bin = [](double v, double lo, double span, int cells) {
    if (span <= 0.0) return 0;
    int b = static_cast<int>(std::floor((v - lo) / span * cells));
    return std::clamp(b, 0, cells - 1);
  };
  std::vector<std::vector<int>> cells(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < n; ++i) {
    int cx = bin(coords(i, 0), xmin, xspan, cols);
    int cy = bin(coords(i, 1), ymin, yspan, rows);
    cells[static_cast<size_t>(cy) * cols + cx].push_back(i);
  }
  DomainPartition p;
  for (auto& cell : cells)
    if (!cell.empty()) p.members.push_back(std::move(cell));
  p.validate(n);
  return p;
}

namespace {

// strips comments and surrounding blanks; returns false for skippable lines
bool clean_line(std::string& line) {
  auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  auto first = line.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return false;
  auto last = line.find_last_not_of(" \t\r\n");
  line = line.substr(first, last - first + 1);
  return true;
}

}  // namespace

std::vector<std::string> parse_id_manifest(std::istream& in) {
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!clean_line(line)) continue;
    ids.push_back(line);
  }
  if (ids.empty()) throw DataError("area id manifest is empty");
  return ids;
}

AdjacencyGraph parse_edge_list(std::istream& in,
                               const std::vector<std::string>& area_ids) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!clean_line(line)) continue;
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a >> b))
      throw DataError("edge list line " + std::to_string(lineno) +
                      ": expected two ids");
    if (ss >> extra)
      throw DataError("edge list line " + std::to_string(lineno) +
                      ": trailing tokens");
    edges.emplace_back(a, b);
  }
  return AdjacencyGraph::from_edges(area_ids, edges);
}

DomainPartition parse_partition_csv(std::istream& in,
                                    const AdjacencyGraph& g) {
  std::unordered_map<std::string, int> area_index;
  for (int i = 0; i < g.size(); ++i) area_index[g.area_ids()[i]] = i;

  std::unordered_map<std::string, int> sub_index;
  std::vector<std::vector<int>> members;
  std::vector<bool> seen(g.size(), false);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!clean_line(line)) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("partition line " + std::to_string(lineno) +
                      ": expected `area_id,subregion_id`");
    std::string area = line.substr(0, comma);
    std::string sub = line.substr(comma + 1);
    if (lineno == 1 && area == "area_id") continue;  // header
    auto it = area_index.find(area);
    if (it == area_index.end())
      throw DataError("partition line " + std::to_string(lineno) +
                      ": unknown area '" + area + "'");
    if (seen[it->second])
      throw DataError("area '" + area + "' assigned twice");
    seen[it->second] = true;
    auto [sit, inserted] =
        sub_index.emplace(sub, static_cast<int>(members.size()));
    if (inserted) members.emplace_back();
    members[sit->second].push_back(it->second);
  }
  DomainPartition p;
  p.members = std::move(members);
  for (auto& m : p.members) std::sort(m.begin(), m.end());
  p.validate(g.size());
  return p;
}

}  // namespace riskmap
