#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace ratelab {

// ---------- compensated summation ----------

// Neumaier variant of Kahan summation. All quadrature sums go through this so
// the error stays at a few ulps of the term magnitudes regardless of the node
// count; several identities in the test suite are checked at 1e-12 or better.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// ---------- grid ----------

// Uniform quadrature grid on [0,1]: m cells, nodes at the cell midpoints
// (i + 1/2)/m, equal weight 1/m per node. Densities, likelihoods and all
// divergences live on these nodes; integrals are plain weighted sums.
struct Grid {
    int m = 0;
    std::vector<double> nodes;
    double weight = 0.0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int m) {
    if (m < 2)
        throw std::invalid_argument("make_grid: need at least 2 cells, got " +
                                    std::to_string(m));
    auto g = std::make_shared<Grid>();
    g->m = m;
    g->weight = 1.0 / static_cast<double>(m);
    g->nodes.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        g->nodes[static_cast<std::size_t>(i)] = (i + 0.5) / static_cast<double>(m);
    return g;
}

// Two grids index the same function space iff they have the same cell count;
// the node layout is determined by m.
inline bool same_layout(const Grid& a, const Grid& b) { return a.m == b.m; }

inline void require_same_layout(const Grid& a, const Grid& b, const char* where) {
    if (!same_layout(a, b))
        throw std::invalid_argument(std::string(where) + ": grids differ (" +
                                    std::to_string(a.m) + " vs " +
                                    std::to_string(b.m) + " cells)");
}

// ---------- quadrature ----------

inline double integrate(const Grid& grid, const std::vector<double>& h) {
    if (static_cast<int>(h.size()) != grid.m)
        throw std::invalid_argument("integrate: got " + std::to_string(h.size()) +
                                    " values for a " + std::to_string(grid.m) +
                                    "-cell grid");
    CompensatedSum acc;
    for (int i = 0; i < grid.m; ++i) {
        double v = h[static_cast<std::size_t>(i)];
        if (!std::isfinite(v))
            throw std::domain_error("integrate: non-finite value at node " +
                                    std::to_string(i));
        acc.add(v);
    }
    return acc.value() * grid.weight;
}

template <std::invocable<double> F>
inline double integrate(const Grid& grid, F&& h) {
    CompensatedSum acc;
    for (int i = 0; i < grid.m; ++i) {
        double v = h(grid.nodes[static_cast<std::size_t>(i)]);
        if (!std::isfinite(v))
            throw std::domain_error("integrate: non-finite value at node " +
                                    std::to_string(i));
        acc.add(v);
    }
    return acc.value() * grid.weight;
}

// ---------- densities ----------

// Probability density sampled at the grid nodes. Invariants: every value is
// >= floor (>= 0) and the quadrature integral is 1 within 1e-12. `clamped`
// records whether normalization had to raise any node to the floor, which the
// divergence report surfaces to the caller.
struct GridDensity {
    GridPtr grid;
    std::vector<double> values;
    double floor = 0.0;
    bool clamped = false;
};

inline double integrate(const GridDensity& f) { return integrate(*f.grid, f.values); }

// Clamp below at `floor`, rescale to unit integral. Rescaling can drag the
// floored nodes back under the floor when the clamp removed mass, so the pair
// of steps is iterated to its fixpoint; the clamped mass is at most `floor`,
// hence the deficit shrinks by a factor of about `floor` per round and the
// loop settles in a handful of iterations for any sane floor.
inline GridDensity normalize(std::vector<double> values, GridPtr grid,
                             double floor = 0.0) {
    if (!grid)
        throw std::invalid_argument("normalize: null grid");
    if (static_cast<int>(values.size()) != grid->m)
        throw std::invalid_argument("normalize: got " + std::to_string(values.size()) +
                                    " values for a " + std::to_string(grid->m) +
                                    "-cell grid");
    if (!std::isfinite(floor) || floor < 0.0 || floor >= 1.0)
        throw std::invalid_argument("normalize: floor must lie in [0,1), got " +
                                    std::to_string(floor));
    bool any_positive = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument(
                "normalize: value at node " + std::to_string(i) +
                " must be finite and nonnegative");
        if (v > 0.0) any_positive = true;
    }
    if (!any_positive && floor == 0.0)
        throw std::invalid_argument("normalize: all values are zero");

    GridDensity out;
    out.grid = std::move(grid);
    out.floor = floor;

    for (int round = 0; round < 200; ++round) {
        if (floor > 0.0) {
            for (double& v : values)
                if (v < floor) {
                    v = floor;
                    out.clamped = true;
                }
        }
        CompensatedSum acc;
        for (double v : values) acc.add(v);
        double s = acc.value() * out.grid->weight;
        if (!(s > 0.0))
            throw std::invalid_argument("normalize: all values are zero");
        for (double& v : values) v /= s;
        if (floor == 0.0 || *std::min_element(values.begin(), values.end()) >= floor)
            break;
    }
    if (floor > 0.0 && *std::min_element(values.begin(), values.end()) < floor)
        throw std::runtime_error("normalize: floor " + std::to_string(floor) +
                                 " cannot be met by a unit-integral density");
    out.values = std::move(values);
    return out;
}

// ---------- number formatting for data files ----------

// Shortest round-trip decimal form, locale independent. All CSV/JSON data
// files use this so reruns are byte identical.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const char* where) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double out = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc() || res.ptr != e)
        throw std::invalid_argument(std::string(where) + ": bad number '" + s + "'");
    return out;
}

// ---------- CSV persistence ----------

// Layout: header "node,value", one row per cell in node order. The node
// column is redundant (the midpoint layout is fixed by the row count) but is
// kept for human inspection and verified on load.
inline void save_density_csv(const GridDensity& f, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("save_density_csv: cannot open " + path);
    out << "node,value\n";
    for (int i = 0; i < f.grid->m; ++i)
        out << format_double(f.grid->nodes[static_cast<std::size_t>(i)]) << ','
            << format_double(f.values[static_cast<std::size_t>(i)]) << '\n';
    if (!out)
        throw std::runtime_error("save_density_csv: write failed for " + path);
}

inline GridDensity load_density_csv(const std::string& path, double floor = 0.0) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_density_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "node,value")
        throw std::runtime_error("load_density_csv: " + path +
                                 " missing 'node,value' header");
    std::vector<double> nodes;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("load_density_csv: malformed row '" + line + "'");
        nodes.push_back(parse_double(line.substr(0, comma), "load_density_csv"));
        values.push_back(parse_double(line.substr(comma + 1), "load_density_csv"));
    }
    if (nodes.size() < 2)
        throw std::runtime_error("load_density_csv: " + path +
                                 " holds fewer than 2 rows");
    auto grid = make_grid(static_cast<int>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (std::abs(nodes[i] - grid->nodes[i]) > 1e-9)
            throw std::runtime_error("load_density_csv: node column mismatch at row " +
                                     std::to_string(i));
    return normalize(std::move(values), std::move(grid), floor);
}

} // namespace ratelab
