#include "kronmem/cortex.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace kronmem::cortex {

namespace {

constexpr Index kUnreached = std::numeric_limits<Index>::max();

std::vector<Index> bfs_distances(const CortexGraph& graph, Index source) {
    std::vector<Index> dist(static_cast<std::size_t>(graph.size()), kUnreached);
    std::deque<Index> queue{source};
    dist[static_cast<std::size_t>(source)] = 0;
    while (!queue.empty()) {
        const Index u = queue.front();
        queue.pop_front();
        for (Index w : graph.neighbors(u)) {
            if (dist[static_cast<std::size_t>(w)] != kUnreached) continue;
            dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
            queue.push_back(w);
        }
    }
    return dist;
}

}  // namespace

Mesh make_icosphere(int subdivisions) {
    if (subdivisions < 0) throw std::invalid_argument("make_icosphere: negative subdivision count");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<std::array<double, 3>> verts = {
        {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    std::vector<std::array<Index, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

    auto normalize = [](std::array<double, 3>& v) {
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        for (double& c : v) c /= n;
    };
    for (auto& v : verts) normalize(v);

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<Index, Index>, Index> midpoint;
        auto mid = [&](Index a, Index b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            std::array<double, 3> m{};
            for (int c = 0; c < 3; ++c)
                m[static_cast<std::size_t>(c)] =
                    0.5 * (verts[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)] +
                           verts[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)]);
            normalize(m);
            const auto idx = static_cast<Index>(verts.size());
            verts.push_back(m);
            midpoint.emplace(key, idx);
            return idx;
        };

        std::vector<std::array<Index, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const Index ab = mid(f[0], f[1]);
            const Index bc = mid(f[1], f[2]);
            const Index ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    Mesh mesh;
    mesh.vertices.resize(static_cast<Index>(verts.size()), 3);
    for (Index i = 0; i < mesh.vertices.rows(); ++i)
        for (Index c = 0; c < 3; ++c)
            mesh.vertices(i, c) = verts[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    mesh.faces = std::move(faces);
    return mesh;
}

Mesh load_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_off: cannot open " + path);

    // Tokenize with comments stripped; OFF files are whitespace-shaped but
    // tools disagree about where the counts line starts.
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    std::size_t pos = 0;
    auto next = [&]() -> const std::string& {
        if (pos >= tokens.size()) throw std::runtime_error("load_off: truncated file " + path);
        return tokens[pos++];
    };

    if (tokens.empty()) throw std::runtime_error("load_off: empty file " + path);
    if (tokens[0] == "OFF") ++pos;

    const auto nv = std::stoll(next());
    const auto nf = std::stoll(next());
    next();  // edge count, unused
    if (nv < 1 || nf < 0) throw std::runtime_error("load_off: bad counts in " + path);

    Mesh mesh;
    mesh.vertices.resize(static_cast<Index>(nv), 3);
    for (Index i = 0; i < mesh.vertices.rows(); ++i)
        for (Index c = 0; c < 3; ++c) mesh.vertices(i, c) = std::stod(next());
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long long f = 0; f < nf; ++f) {
        if (std::stoll(next()) != 3) throw std::runtime_error("load_off: non-triangle face in " + path);
        std::array<Index, 3> face{};
        for (auto& v : face) {
            v = static_cast<Index>(std::stoll(next()));
            if (v < 0 || v >= mesh.vertices.rows())
                throw std::runtime_error("load_off: face index out of range in " + path);
        }
        mesh.faces.push_back(face);
    }
    return mesh;
}

void save_off(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_off: cannot open " + path);
    out << "OFF\n" << mesh.vertices.rows() << ' ' << mesh.faces.size() << " 0\n";
    char buf[96];
    for (Index i = 0; i < mesh.vertices.rows(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", mesh.vertices(i, 0),
                      mesh.vertices(i, 1), mesh.vertices(i, 2));
        out << buf;
    }
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    if (!out) throw std::runtime_error("save_off: write failed for " + path);
}

void CortexGraph::finalize(Index n_vertices, Matrix positions) {
    if (positions.size() != 0 && positions.rows() != n_vertices)
        throw std::invalid_argument("CortexGraph: positions do not match the vertex count");
    positions_ = positions.size() == 0 ? Matrix(0, 3) : std::move(positions);

    for (auto& nbrs : adjacency_) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }

    std::vector<Eigen::Triplet<double>> trips;
    for (Index u = 0; u < n_vertices; ++u) {
        const auto& nbrs = adjacency_[static_cast<std::size_t>(u)];
        trips.emplace_back(u, u, static_cast<double>(nbrs.size()));
        for (Index w : nbrs) trips.emplace_back(u, w, -1.0);
    }
    laplacian_.resize(n_vertices, n_vertices);
    laplacian_.setFromTriplets(trips.begin(), trips.end());
}

CortexGraph CortexGraph::from_mesh(const Mesh& mesh) {
    std::vector<std::pair<Index, Index>> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        edges.emplace_back(f[0], f[1]);
        edges.emplace_back(f[1], f[2]);
        edges.emplace_back(f[2], f[0]);
    }
    return from_edges(mesh.vertices.rows(), edges, mesh.vertices);
}

CortexGraph CortexGraph::from_edges(Index n_vertices,
                                    const std::vector<std::pair<Index, Index>>& edges,
                                    Matrix positions) {
    if (n_vertices < 1) throw std::invalid_argument("CortexGraph: no vertices");
    CortexGraph graph;
    graph.adjacency_.resize(static_cast<std::size_t>(n_vertices));
    for (const auto& [u, w] : edges) {
        if (u < 0 || u >= n_vertices || w < 0 || w >= n_vertices)
            throw std::invalid_argument("CortexGraph: edge endpoint out of range");
        if (u == w) throw std::invalid_argument("CortexGraph: self loop");
        graph.adjacency_[static_cast<std::size_t>(u)].push_back(w);
        graph.adjacency_[static_cast<std::size_t>(w)].push_back(u);
    }
    graph.finalize(n_vertices, std::move(positions));
    return graph;
}

const std::vector<Index>& CortexGraph::neighbors(Index v) const {
    if (v < 0 || v >= size()) throw std::out_of_range("CortexGraph: vertex out of range");
    return adjacency_[static_cast<std::size_t>(v)];
}

Parcellation parcellate(const CortexGraph& graph, int n_parcels) {
    if (n_parcels < 1 || static_cast<Index>(n_parcels) > graph.size())
        throw std::invalid_argument("parcellate: parcel count out of range");

    std::vector<Index> seeds{0};
    std::vector<Index> nearest = bfs_distances(graph, 0);
    while (static_cast<int>(seeds.size()) < n_parcels) {
        Index best = -1;
        Index best_dist = -1;
        for (Index v = 0; v < graph.size(); ++v) {
            const Index d = nearest[static_cast<std::size_t>(v)];
            if (d != kUnreached && d > best_dist) {
                best_dist = d;
                best = v;
            }
        }
        if (best < 0 || best_dist == 0)
            throw std::invalid_argument("parcellate: fewer reachable vertices than parcels");
        seeds.push_back(best);
        const std::vector<Index> d = bfs_distances(graph, best);
        for (Index v = 0; v < graph.size(); ++v)
            nearest[static_cast<std::size_t>(v)] =
                std::min(nearest[static_cast<std::size_t>(v)], d[static_cast<std::size_t>(v)]);
    }
    return parcellate_from_seeds(graph, seeds);
}

Parcellation parcellate_from_seeds(const CortexGraph& graph, const std::vector<Index>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("parcellate_from_seeds: no seeds");
    Parcellation out;
    out.labels.assign(static_cast<std::size_t>(graph.size()), -1);
    out.parcels.resize(seeds.size());
    out.seeds = seeds;

    // One breadth-first flood from all seeds at once. FIFO order makes the
    // assignment nearest-seed with ties going to the earlier seed.
    std::deque<Index> queue;
    for (std::size_t p = 0; p < seeds.size(); ++p) {
        const Index s = seeds[p];
        if (s < 0 || s >= graph.size())
            throw std::invalid_argument("parcellate_from_seeds: seed out of range");
        if (out.labels[static_cast<std::size_t>(s)] != -1)
            throw std::invalid_argument("parcellate_from_seeds: duplicate seed");
        out.labels[static_cast<std::size_t>(s)] = static_cast<int>(p);
        queue.push_back(s);
    }
    while (!queue.empty()) {
        const Index u = queue.front();
        queue.pop_front();
        for (Index w : graph.neighbors(u)) {
            if (out.labels[static_cast<std::size_t>(w)] != -1) continue;
            out.labels[static_cast<std::size_t>(w)] = out.labels[static_cast<std::size_t>(u)];
            queue.push_back(w);
        }
    }
    for (Index v = 0; v < graph.size(); ++v) {
        const int p = out.labels[static_cast<std::size_t>(v)];
        if (p == -1)
            throw std::invalid_argument("parcellate_from_seeds: vertex unreachable from every seed");
        out.parcels[static_cast<std::size_t>(p)].push_back(v);
    }
    return out;
}

SpdMatrix parcel_covariance(const CortexGraph& graph, const std::vector<Index>& members,
                            double rho) {
    if (members.empty()) throw std::invalid_argument("parcel_covariance: empty parcel");
    if (!(rho >= 0.0)) throw std::invalid_argument("parcel_covariance: rho must be >= 0");

    std::map<Index, Index> local;
    for (Index v : members) {
        if (v < 0 || v >= graph.size())
            throw std::invalid_argument("parcel_covariance: member out of range");
        if (!local.emplace(v, static_cast<Index>(local.size())).second)
            throw std::invalid_argument("parcel_covariance: duplicate member");
    }

    const auto k = static_cast<Index>(members.size());
    Matrix lap = Matrix::Zero(k, k);
    for (Index v : members) {
        const Index lv = local.at(v);
        for (Index w : graph.neighbors(v)) {
            const auto it = local.find(w);
            if (it == local.end()) continue;
            lap(lv, it->second) = -1.0;
            lap(lv, lv) += 1.0;
        }
    }
    return matrix_exp(-rho * lap);
}

std::vector<Index> grow_patch(const CortexGraph& graph, Index seed, Index size, Rng& rng) {
    if (seed < 0 || seed >= graph.size()) throw std::invalid_argument("grow_patch: seed out of range");
    if (size < 1 || size > graph.size()) throw std::invalid_argument("grow_patch: size out of range");

    std::vector<bool> seen(static_cast<std::size_t>(graph.size()), false);
    std::vector<Index> frontier{seed};
    std::vector<Index> patch;
    patch.reserve(static_cast<std::size_t>(size));
    seen[static_cast<std::size_t>(seed)] = true;

    while (static_cast<Index>(patch.size()) < size && !frontier.empty()) {
        const std::size_t pick = rng.uniform_index(frontier.size());
        const Index u = frontier[pick];
        frontier[pick] = frontier.back();
        frontier.pop_back();
        patch.push_back(u);
        for (Index w : graph.neighbors(u)) {
            if (seen[static_cast<std::size_t>(w)]) continue;
            seen[static_cast<std::size_t>(w)] = true;
            frontier.push_back(w);
        }
    }
    if (static_cast<Index>(patch.size()) < size)
        throw std::invalid_argument("grow_patch: component smaller than the requested size");
    std::sort(patch.begin(), patch.end());
    return patch;
}

}  // namespace kronmem::cortex
