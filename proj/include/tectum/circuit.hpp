#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace tectum {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using NodeSet = std::set<std::string>;

/**
 * Directed connection-probability graph over named node categories.
 *
 * Entry (i, j) of the matrix is the probability of a projection from
 * presynaptic node j onto postsynaptic node i, so rows are targets and
 * columns are sources. Instances are validated on construction and never
 * mutated afterwards; every transformation returns a new Circuit.
 */
class Circuit {
public:
    /// Throws DataError if the matrix is not square, sizes disagree, an entry
    /// is outside [0, 1] (or non-finite), or a node name repeats.
    Circuit(std::vector<std::string> node_names, Matrix matrix,
            std::map<std::string, std::string> metadata = {});

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string> &node_names() const { return names_; }
    const Matrix &matrix() const { return matrix_; }
    const std::map<std::string, std::string> &metadata() const { return metadata_; }

    /// Index of a node, or nullopt if absent.
    std::optional<std::size_t> index_of(const std::string &name) const;
    /// Index of a node; throws DataError if absent.
    std::size_t require_index(const std::string &name) const;

    Circuit with_metadata(const std::string &key, const std::string &value) const;

    bool operator==(const Circuit &other) const;

private:
    std::vector<std::string> names_;
    Matrix matrix_;
    std::map<std::string, std::string> metadata_;
    std::map<std::string, std::size_t> index_;
};

struct GraphStats {
    std::size_t n = 0;
    std::size_t nonzero_edges = 0;
    double density = 0.0;
    double spectral_radius = 0.0;
    // Over strictly positive entries; both zero for an empty graph.
    double prob_min = 0.0;
    double prob_max = 0.0;
};

enum class RescaleMode {
    /// Multiply every entry by one factor so the radius hits the target.
    multiplicative,
    /// Warp log-magnitudes with a power law, keeping prob_range endpoints fixed.
    range_preserving,
};

struct SynthesisSpec {
    std::size_t n = 52;
    std::size_t nonzero_edges = 938;
    double prob_low = 0.000271;
    double prob_high = 0.285035;
    double target_spectral_radius = 1.5173;
    std::uint64_t seed = 42;
    RescaleMode rescale = RescaleMode::multiplicative;
    /// Optional node names; defaults to node_0 .. node_{n-1}.
    std::vector<std::string> node_names;
    /// Rows (nodes) that may not carry a self-loop, e.g. input ports.
    std::vector<std::size_t> no_self_loop;
};

Circuit load_circuit(const std::filesystem::path &path);
Circuit circuit_from_json(const nlohmann::json &doc);
nlohmann::json circuit_to_json(const Circuit &c);
void save_circuit(const Circuit &c, const std::filesystem::path &path);

Circuit synthesize_circuit(const SynthesisSpec &spec);

/// Largest eigenvalue magnitude of a general real square matrix.
double spectral_radius(const Matrix &m);
GraphStats graph_stats(const Circuit &c);
nlohmann::json to_json(const GraphStats &s);

/// Zeroes every row and column belonging to `group`. Throws DataError on an
/// unknown node name.
Circuit ablate(const Circuit &c, const NodeSet &group);

/// Average-linkage agglomerative clustering of z-scored degree/strength
/// features. Clusters are returned ordered by their lowest node index and list
/// members in node order.
std::vector<std::vector<std::string>> cluster_communities(const Circuit &c, std::size_t k);

/// Per-node feature rows: in-degree, out-degree, in-strength, out-strength.
Matrix topology_features(const Circuit &c);

} // namespace tectum
