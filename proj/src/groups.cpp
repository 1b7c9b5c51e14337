#include "tectum/groups.hpp"

#include <fstream>

#include "tectum/errors.hpp"

namespace tectum {

using nlohmann::json;

std::string to_string(PortKind p)
{
    switch (p) {
    case PortKind::input: return "input";
    case PortKind::output: return "output";
    case PortKind::internal: break;
    }
    return "internal";
}

PortKind port_from_string(const std::string &s)
{
    if (s == "internal") return PortKind::internal;
    if (s == "input") return PortKind::input;
    if (s == "output") return PortKind::output;
    throw DataError("unknown port kind '" + s + "' (expected internal, input or output)");
}

void GroupConfig::add(const std::string &name, NodeSet nodes, PortKind port)
{
    if (nodes.empty()) throw DataError("group '" + name + "' is empty");
    groups_[name] = std::move(nodes);
    ports_[name] = port;
}

const NodeSet &GroupConfig::resolve(const std::string &name) const
{
    auto it = groups_.find(name);
    if (it == groups_.end()) throw DataError("unknown group '" + name + "'");
    return it->second;
}

PortKind GroupConfig::port(const std::string &name) const
{
    auto it = ports_.find(name);
    if (it == ports_.end()) throw DataError("unknown group '" + name + "'");
    return it->second;
}

std::vector<std::string> GroupConfig::names() const
{
    std::vector<std::string> out;
    for (const auto &[k, _] : groups_) out.push_back(k);
    return out;
}

std::vector<std::string> GroupConfig::names_with_port(PortKind p) const
{
    std::vector<std::string> out;
    for (const auto &[k, v] : ports_) {
        if (v == p) out.push_back(k);
    }
    return out;
}

NodeSet GroupConfig::nodes_with_port(PortKind p) const
{
    NodeSet out;
    for (const auto &name : names_with_port(p)) {
        const auto &g = groups_.at(name);
        out.insert(g.begin(), g.end());
    }
    return out;
}

void GroupConfig::validate_against(const Circuit &c) const
{
    for (const auto &[name, nodes] : groups_) {
        for (const auto &node : nodes) {
            if (!c.index_of(node)) {
                throw DataError("group '" + name + "' references unknown node '" + node + "'");
            }
        }
    }
}

const NodeSet &resolve_group(const GroupConfig &gc, const std::string &name) { return gc.resolve(name); }

GroupConfig groups_from_json(const json &doc)
{
    if (!doc.is_object()) throw DataError("group document must be an object of group definitions");
    GroupConfig gc;
    for (const auto &[name, def] : doc.items()) {
        if (!def.is_object() || !def.contains("nodes") || !def["nodes"].is_array()) {
            throw DataError("group '" + name + "' needs a 'nodes' array");
        }
        NodeSet nodes;
        for (const auto &n : def["nodes"]) {
            if (!n.is_string()) throw DataError("group '" + name + "' has a non-string node");
            nodes.insert(n.get<std::string>());
        }
        const PortKind port = def.contains("port") ? port_from_string(def["port"].get<std::string>()) : PortKind::internal;
        gc.add(name, std::move(nodes), port);
    }
    return gc;
}

json groups_to_json(const GroupConfig &gc)
{
    json doc = json::object();
    for (const auto &name : gc.names()) {
        doc[name] = json{{"nodes", gc.resolve(name)}, {"port", to_string(gc.port(name))}};
    }
    return doc;
}

GroupConfig load_groups(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) throw DataError("file not found: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error &e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
    return groups_from_json(doc);
}

namespace {

// Stratum-resolved interneuron types; each appears as an excitatory and an
// inhibitory category.
const std::vector<std::string> kS12Types = {"PVIN_a", "PVIN_b", "SGC", "SAC", "bistrat", "mono"};
const std::vector<std::string> kS34Types = {"PVIN_a", "PVIN_b", "SGC", "SAC", "bistrat"};
const std::vector<std::string> kS56Types = {"PVIN_a", "PVIN_b", "SGC", "SAC"};

std::vector<std::string> tin_nodes(const std::string &stratum, const std::vector<std::string> &types)
{
    std::vector<std::string> out;
    for (const auto &t : types) {
        out.push_back("e_" + stratum + "_" + t);
        out.push_back("i_" + stratum + "_" + t);
    }
    return out;
}

const std::vector<std::string> kRgc = {"RGC_SO_A",   "RGC_SO_B",   "RGC_SFGS_A",    "RGC_SFGS_B",
                                       "RGC_SFGS_C", "RGC_SFGS_D", "RGC_SGC_SAC_P", "RGC_SAC_D"};
const std::vector<std::string> kSin = {"i_SIN_SO", "i_SIN_SFGS_a", "i_SIN_SFGS_b"};
const std::vector<std::string> kTpn = {"TPN_O", "TPN_E", "TPN_SGC", "TPN_SAC", "TPN_PVPN"};
const std::vector<std::string> kMotor = {"motor_nMLF", "motor_RS", "motor_tegmentum"};

} // namespace

const std::vector<std::string> &default_node_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v = kRgc;
        for (const auto &s : tin_nodes("S12", kS12Types)) v.push_back(s);
        for (const auto &s : tin_nodes("S34", kS34Types)) v.push_back(s);
        for (const auto &s : tin_nodes("S56", kS56Types)) v.push_back(s);
        v.push_back("e_ns_TIN");
        v.push_back("i_ns_TIN");
        for (const auto &s : kSin) v.push_back(s);
        for (const auto &s : kTpn) v.push_back(s);
        for (const auto &s : kMotor) v.push_back(s);
        v.push_back("readout_task");
        return v;
    }();
    return names;
}

GroupConfig default_groups()
{
    const auto s12 = tin_nodes("S12", kS12Types);
    const auto s34 = tin_nodes("S34", kS34Types);
    const auto s56 = tin_nodes("S56", kS56Types);
    auto set_of = [](std::initializer_list<const std::vector<std::string> *> parts) {
        NodeSet out;
        for (const auto *p : parts) out.insert(p->begin(), p->end());
        return out;
    };
    const std::vector<std::string> ns = {"e_ns_TIN", "i_ns_TIN"};
    std::vector<std::string> all_tin = s12;
    all_tin.insert(all_tin.end(), s34.begin(), s34.end());
    all_tin.insert(all_tin.end(), s56.begin(), s56.end());
    all_tin.insert(all_tin.end(), ns.begin(), ns.end());

    NodeSet excit, inhib;
    for (const auto &t : all_tin) (t[0] == 'e' ? excit : inhib).insert(t);

    NodeSet sgc{"RGC_SGC_SAC_P", "TPN_SGC"}, sac{"RGC_SAC_D", "TPN_SAC"};
    for (const auto &t : all_tin) {
        if (t.ends_with("_SGC")) sgc.insert(t);
        if (t.ends_with("_SAC")) sac.insert(t);
    }

    const std::vector<std::string> tpn_hub = {"TPN_O", "TPN_E"};
    const std::vector<std::string> readout = {"readout_task"};

    GroupConfig gc;
    gc.add("RGC_input", set_of({&kRgc}), PortKind::input);
    gc.add("TPN_output", set_of({&kTpn}), PortKind::output);
    gc.add("excitatory_TIN", excit);
    gc.add("inhibitory_TIN", inhib);
    gc.add("S12_group", set_of({&s12}));
    gc.add("S34_group", set_of({&s34}));
    NodeSet s56_group = set_of({&s56});
    s56_group.insert("TPN_PVPN");
    gc.add("S56_group", s56_group);
    gc.add("superficial_TIN", set_of({&s12, &s34}));
    gc.add("deep_TIN", set_of({&s56}));
    gc.add("ns_TIN", set_of({&ns}));
    gc.add("SGC_group", sgc);
    gc.add("SAC_group", sac);
    gc.add("SIN_hub", set_of({&kSin}));
    gc.add("TPN_hub", set_of({&tpn_hub}));
    gc.add("integration_hubs", set_of({&kSin, &tpn_hub, &kMotor, &readout}));
    gc.add("TPN_O", {"TPN_O"});
    gc.add("TPN_E", {"TPN_E"});
    return gc;
}

SynthesisSpec default_synthesis_spec(std::uint64_t seed)
{
    SynthesisSpec spec;
    spec.seed = seed;
    spec.node_names = default_node_names();
    spec.n = spec.node_names.size();
    for (std::size_t k = 0; k < kRgc.size(); ++k) spec.no_self_loop.push_back(k);
    return spec;
}

const std::vector<Pathway> &default_pathways()
{
    static const std::vector<Pathway> p = {
        {"R2O", "RGC_input", "TPN_O"},
        {"R2E", "RGC_input", "TPN_E"},
    };
    return p;
}

const Pathway &find_pathway(const std::string &name)
{
    for (const auto &p : default_pathways()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown pathway '" + name + "' (known: R2O, R2E)");
}

} // namespace tectum
