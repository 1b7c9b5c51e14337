#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tectum/circuit.hpp"

namespace tectum {

enum class PortKind { internal, input, output };

std::string to_string(PortKind p);
PortKind port_from_string(const std::string &s);

/// Named node sets (mesoscopic substructures) with a port role each.
class GroupConfig {
public:
    GroupConfig() = default;

    /// Throws DataError on an empty group.
    void add(const std::string &name, NodeSet nodes, PortKind port = PortKind::internal);

    bool contains(const std::string &name) const { return groups_.count(name) != 0; }
    /// Throws DataError for unknown names.
    const NodeSet &resolve(const std::string &name) const;
    PortKind port(const std::string &name) const;

    std::vector<std::string> names() const;
    std::vector<std::string> names_with_port(PortKind p) const;
    /// Union of all groups carrying port `p`.
    NodeSet nodes_with_port(PortKind p) const;

    /// Throws DataError if any group references a node missing from `c`.
    void validate_against(const Circuit &c) const;

private:
    std::map<std::string, NodeSet> groups_;
    std::map<std::string, PortKind> ports_;
};

const NodeSet &resolve_group(const GroupConfig &gc, const std::string &name);

GroupConfig groups_from_json(const nlohmann::json &doc);
nlohmann::json groups_to_json(const GroupConfig &gc);
GroupConfig load_groups(const std::filesystem::path &path);

/// The 52 built-in node categories in canonical order: retinal inputs first,
/// then tectal interneurons by stratum, ns_TIN, SINs, projection neurons,
/// motor-related units and the task readout.
const std::vector<std::string> &default_node_names();

/// Built-in substructure definitions over default_node_names().
GroupConfig default_groups();

/// Synthesis targets for the reference graph statistics, over the built-in
/// node list with self-loops excluded on input-port rows.
SynthesisSpec default_synthesis_spec(std::uint64_t seed = 42);

/// A named source->target pair of groups used by the propagation check.
struct Pathway {
    std::string name;
    std::string source;
    std::string target;
};

/// R2O (retina to TPN-O) and R2E (retina to TPN-E).
const std::vector<Pathway> &default_pathways();
const Pathway &find_pathway(const std::string &name);

} // namespace tectum
