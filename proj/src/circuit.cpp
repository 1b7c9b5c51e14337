#include "tectum/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tectum/errors.hpp"
#include "tectum/random.hpp"

namespace tectum {

using nlohmann::json;

Circuit::Circuit(std::vector<std::string> node_names, Matrix matrix,
                 std::map<std::string, std::string> metadata)
    : names_(std::move(node_names)), matrix_(std::move(matrix)), metadata_(std::move(metadata))
{
    if (matrix_.rows() != matrix_.cols()) {
        throw DataError("connection matrix is not square: " + std::to_string(matrix_.rows()) + "x" +
                        std::to_string(matrix_.cols()));
    }
    if (static_cast<std::size_t>(matrix_.rows()) != names_.size()) {
        throw DataError("matrix side " + std::to_string(matrix_.rows()) + " does not match " +
                        std::to_string(names_.size()) + " node names");
    }
    for (std::size_t k = 0; k < names_.size(); ++k) {
        if (!index_.emplace(names_[k], k).second) {
            throw DataError("duplicate node name '" + names_[k] + "' at position " + std::to_string(k));
        }
    }
    for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix_.cols(); ++j) {
            const double v = matrix_(i, j);
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                std::ostringstream os;
                os << "probability out of range at row " << i << " (" << names_[i] << "), column " << j
                   << " (" << names_[j] << "): " << v;
                throw DataError(os.str());
            }
        }
    }
}

std::optional<std::size_t> Circuit::index_of(const std::string &name) const
{
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Circuit::require_index(const std::string &name) const
{
    auto idx = index_of(name);
    if (!idx) throw DataError("unknown node name '" + name + "'");
    return *idx;
}

Circuit Circuit::with_metadata(const std::string &key, const std::string &value) const
{
    auto meta = metadata_;
    meta[key] = value;
    return Circuit(names_, matrix_, std::move(meta));
}

bool Circuit::operator==(const Circuit &other) const
{
    return names_ == other.names_ && metadata_ == other.metadata_ && matrix_ == other.matrix_;
}

Circuit circuit_from_json(const json &doc)
{
    if (!doc.is_object()) throw DataError("connection matrix document must be an object");
    if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw DataError("missing 'nodes' array");
    if (!doc.contains("matrix") || !doc["matrix"].is_array()) throw DataError("missing 'matrix' array");

    std::vector<std::string> names;
    for (std::size_t k = 0; k < doc["nodes"].size(); ++k) {
        const auto &n = doc["nodes"][k];
        if (!n.is_string()) throw DataError("node " + std::to_string(k) + " is not a string");
        names.push_back(n.get<std::string>());
    }

    const auto &rows = doc["matrix"];
    const auto n_rows = rows.size();
    if (n_rows != names.size()) {
        throw DataError("matrix has " + std::to_string(n_rows) + " rows but " + std::to_string(names.size()) +
                        " nodes are declared");
    }
    Matrix m(n_rows, n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        if (!rows[i].is_array() || rows[i].size() != n_rows) {
            throw DataError("matrix is not square: row " + std::to_string(i) + " has " +
                            std::to_string(rows[i].is_array() ? rows[i].size() : 0) + " entries, expected " +
                            std::to_string(n_rows));
        }
        for (std::size_t j = 0; j < n_rows; ++j) {
            if (!rows[i][j].is_number()) {
                throw DataError("non-numeric entry at row " + std::to_string(i) + ", column " + std::to_string(j));
            }
            m(i, j) = rows[i][j].get<double>();
        }
    }

    std::map<std::string, std::string> meta;
    if (doc.contains("metadata")) {
        for (const auto &[k, v] : doc["metadata"].items()) {
            meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    }
    return Circuit(std::move(names), std::move(m), std::move(meta));
}

Circuit load_circuit(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) throw DataError("file not found: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error &e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
    try {
        return circuit_from_json(doc);
    } catch (const DataError &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

json circuit_to_json(const Circuit &c)
{
    json rows = json::array();
    const auto &m = c.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return json{{"nodes", c.node_names()}, {"matrix", std::move(rows)}, {"metadata", c.metadata()}};
}

void save_circuit(const Circuit &c, const std::filesystem::path &path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << circuit_to_json(c).dump(1) << '\n';
}

double spectral_radius(const Matrix &m)
{
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalue decomposition failed");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

GraphStats graph_stats(const Circuit &c)
{
    GraphStats s;
    s.n = c.size();
    const auto &m = c.matrix();
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        if (v > 0.0) {
            ++s.nonzero_edges;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    s.density = s.n == 0 ? 0.0 : static_cast<double>(s.nonzero_edges) / static_cast<double>(s.n * s.n);
    s.spectral_radius = spectral_radius(m);
    if (s.nonzero_edges > 0) {
        s.prob_min = lo;
        s.prob_max = hi;
    }
    return s;
}

json to_json(const GraphStats &s)
{
    return json{{"n", s.n},
                {"nonzero_edges", s.nonzero_edges},
                {"density", s.density},
                {"spectral_radius", s.spectral_radius},
                {"prob_min", s.prob_min},
                {"prob_max", s.prob_max}};
}

namespace {

std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

Matrix place(std::size_t n, const std::vector<std::size_t> &cells, const std::vector<double> &values)
{
    Matrix m = Matrix::Zero(n, n);
    for (std::size_t e = 0; e < cells.size(); ++e) m(cells[e] / n, cells[e] % n) = values[e];
    return m;
}

} // namespace

Circuit synthesize_circuit(const SynthesisSpec &spec)
{
    const std::size_t n = spec.n;
    if (n == 0) throw DataError("synthesis needs at least one node");
    if (!(spec.prob_low > 0.0 && spec.prob_low <= spec.prob_high && spec.prob_high <= 1.0)) {
        throw DataError("invalid probability range");
    }
    if (!(spec.target_spectral_radius > 0.0)) throw DataError("target spectral radius must be positive");

    std::vector<std::string> names = spec.node_names;
    if (names.empty()) {
        for (std::size_t k = 0; k < n; ++k) names.push_back("node_" + std::to_string(k));
    }
    if (names.size() != n) throw DataError("synthesis node_names length does not match n");

    std::vector<bool> loop_free(n, false);
    for (auto r : spec.no_self_loop) {
        if (r >= n) throw DataError("no_self_loop row " + std::to_string(r) + " out of range");
        loop_free[r] = true;
    }
    std::vector<std::size_t> cells;
    cells.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j && loop_free[i]) continue;
            cells.push_back(i * n + j);
        }
    }
    if (spec.nonzero_edges > cells.size()) {
        throw DataError("infeasible synthesis: " + std::to_string(spec.nonzero_edges) + " edges requested but only " +
                        std::to_string(cells.size()) + " cells are available");
    }

    Rng rng(spec.seed);
    // Partial Fisher-Yates: the first k cells are a uniform sample without replacement.
    for (std::size_t e = 0; e < spec.nonzero_edges; ++e) {
        std::swap(cells[e], cells[e + rng.below(cells.size() - e)]);
    }
    cells.resize(spec.nonzero_edges);
    std::vector<double> u(cells.size());
    for (auto &x : u) x = rng.uniform();

    const double log_span = std::log(spec.prob_high / spec.prob_low);
    std::map<std::string, std::string> meta{
        {"source", "synthesized"},
        {"seed", std::to_string(spec.seed)},
        {"target_spectral_radius", format_double(spec.target_spectral_radius)},
    };

    if (cells.empty()) return Circuit(std::move(names), Matrix::Zero(n, n), std::move(meta));

    Matrix m;
    if (spec.rescale == RescaleMode::multiplicative) {
        std::vector<double> p(u.size());
        for (std::size_t e = 0; e < u.size(); ++e) p[e] = spec.prob_low * std::exp(u[e] * log_span);
        m = place(n, cells, p);
        const double rho = spectral_radius(m);
        if (rho <= 0.0) throw DataError("infeasible synthesis: sampled graph has zero spectral radius");
        const double factor = spec.target_spectral_radius / rho;
        m *= factor;
        meta["rescale"] = "multiplicative";
        meta["rescale_factor"] = format_double(factor);
        if (m.maxCoeff() > 1.0) {
            m = m.cwiseMin(1.0);
            meta["clamped"] = "true";
        }
    } else {
        // Stretch u so the smallest and largest draws land on the range endpoints,
        // then bisect the exponent of u^gamma; the radius is monotone in gamma.
        const auto [umin, umax] = std::minmax_element(u.begin(), u.end());
        const double lo = *umin, span = *umax - *umin;
        for (auto &x : u) x = span > 0.0 ? (x - lo) / span : 1.0;
        auto build = [&](double gamma) {
            std::vector<double> p(u.size());
            for (std::size_t e = 0; e < u.size(); ++e) p[e] = spec.prob_low * std::exp(std::pow(u[e], gamma) * log_span);
            return place(n, cells, p);
        };
        double lg_lo = std::log(1e-4), lg_hi = std::log(1e4);
        const double rho_max = spectral_radius(build(std::exp(lg_lo)));
        const double rho_min = spectral_radius(build(std::exp(lg_hi)));
        if (spec.target_spectral_radius > rho_max || spec.target_spectral_radius < rho_min) {
            throw DataError("infeasible synthesis: target spectral radius outside the attainable range [" +
                            format_double(rho_min) + ", " + format_double(rho_max) + "]");
        }
        for (int it = 0; it < 200 && lg_hi - lg_lo > 1e-15; ++it) {
            const double mid = 0.5 * (lg_lo + lg_hi);
            if (spectral_radius(build(std::exp(mid))) > spec.target_spectral_radius) {
                lg_lo = mid;
            } else {
                lg_hi = mid;
            }
        }
        const double gamma = std::exp(0.5 * (lg_lo + lg_hi));
        m = build(gamma);
        meta["rescale"] = "range_preserving";
        meta["warp_exponent"] = format_double(gamma);
    }
    meta["spectral_radius"] = format_double(spectral_radius(m));
    return Circuit(std::move(names), std::move(m), std::move(meta));
}

Circuit ablate(const Circuit &c, const NodeSet &group)
{
    Matrix m = c.matrix();
    for (const auto &name : group) {
        const auto k = static_cast<Eigen::Index>(c.require_index(name));
        m.row(k).setZero();
        m.col(k).setZero();
    }
    return Circuit(c.node_names(), std::move(m), c.metadata());
}

Matrix topology_features(const Circuit &c)
{
    const auto &m = c.matrix();
    const auto n = m.rows();
    Matrix f(n, 4);
    for (Eigen::Index k = 0; k < n; ++k) {
        f(k, 0) = static_cast<double>((m.row(k).array() > 0.0).count());
        f(k, 1) = static_cast<double>((m.col(k).array() > 0.0).count());
        f(k, 2) = m.row(k).sum();
        f(k, 3) = m.col(k).sum();
    }
    return f;
}

std::vector<std::vector<std::string>> cluster_communities(const Circuit &c, std::size_t k)
{
    const std::size_t n = c.size();
    if (k < 1 || k > n) {
        throw ConfigError("cluster count " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }

    Matrix f = topology_features(c);
    for (Eigen::Index col = 0; col < f.cols(); ++col) {
        const double mean = f.col(col).mean();
        const double var = (f.col(col).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (sd > 0.0) {
            f.col(col) = (f.col(col).array() - mean) / sd;
        } else {
            f.col(col).setZero();
        }
    }

    Matrix dist(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) dist(a, b) = (f.row(a) - f.row(b)).norm();
    }

    // Each cluster keeps its members sorted; clusters stay sorted by their lowest member.
    std::vector<std::vector<std::size_t>> clusters(n);
    for (std::size_t a = 0; a < n; ++a) clusters[a] = {a};

    auto linkage = [&](const std::vector<std::size_t> &x, const std::vector<std::size_t> &y) {
        double sum = 0.0;
        for (auto i : x) {
            for (auto j : y) sum += dist(i, j);
        }
        return sum / static_cast<double>(x.size() * y.size());
    };

    while (clusters.size() > k) {
        std::size_t best_a = 0, best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                const double d = linkage(clusters[a], clusters[b]);
                // Strict comparison keeps the lexicographically first pair on ties.
                if (d < best) {
                    best = d;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        auto &dst = clusters[best_a];
        dst.insert(dst.end(), clusters[best_b].begin(), clusters[best_b].end());
        std::sort(dst.begin(), dst.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    }

    std::vector<std::vector<std::string>> out;
    for (const auto &cl : clusters) {
        std::vector<std::string> names;
        for (auto i : cl) names.push_back(c.node_names()[i]);
        out.push_back(std::move(names));
    }
    return out;
}

} // namespace tectum
