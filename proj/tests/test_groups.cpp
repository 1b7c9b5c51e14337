#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tectum/errors.hpp"
#include "tectum/groups.hpp"
#include "test_util.hpp"

using namespace tectum;

TEST_CASE("named groups resolve with the expected sizes")
{
    const GroupConfig gc = default_groups();
    CHECK(resolve_group(gc, "ns_TIN") == NodeSet{"e_ns_TIN", "i_ns_TIN"});
    CHECK(resolve_group(gc, "superficial_TIN").size() == 22);
    CHECK_THROWS_AS(resolve_group(gc, "no_such_group"), DataError);

    for (const char *name : {"RGC_input", "TPN_output", "excitatory_TIN", "inhibitory_TIN", "S12_group", "S34_group",
                             "S56_group", "superficial_TIN", "deep_TIN", "SGC_group", "SAC_group", "SIN_hub",
                             "TPN_hub", "integration_hubs"}) {
        CAPTURE(name);
        CHECK(gc.contains(name));
    }
    CHECK(gc.port("RGC_input") == PortKind::input);
    CHECK(gc.port("TPN_output") == PortKind::output);
    CHECK(gc.port("ns_TIN") == PortKind::internal);
}

TEST_CASE("built-in node list and groups are consistent")
{
    const auto &nodes = default_node_names();
    CHECK(nodes.size() == 52);
    CHECK(NodeSet(nodes.begin(), nodes.end()).size() == 52);

    const GroupConfig gc = default_groups();
    CHECK_NOTHROW(gc.validate_against(Circuit(nodes, Matrix::Zero(52, 52))));

    // Excitatory and inhibitory TIN populations split by name prefix.
    for (const auto &n : gc.resolve("excitatory_TIN")) CHECK(n.rfind("e_", 0) == 0);
    for (const auto &n : gc.resolve("inhibitory_TIN")) CHECK(n.rfind("i_", 0) == 0);

    // Superficial and deep TINs are disjoint.
    for (const auto &n : gc.resolve("deep_TIN")) CHECK(gc.resolve("superficial_TIN").count(n) == 0);
}

TEST_CASE("group documents round-trip and the bundled fixture matches the built-ins")
{
    const GroupConfig gc = default_groups();
    CHECK(groups_to_json(groups_from_json(groups_to_json(gc))) == groups_to_json(gc));
    CHECK(groups_to_json(load_groups(testutil::fixture("groups.json"))) == groups_to_json(gc));
}

TEST_CASE("group validation errors")
{
    GroupConfig gc;
    CHECK_THROWS_AS(gc.add("empty", {}), DataError);

    gc.add("g", {"a", "ghost"});
    CHECK_THROWS_AS(gc.validate_against(Circuit({"a", "b"}, Matrix::Zero(2, 2))), DataError);

    CHECK_THROWS_AS(groups_from_json(nlohmann::json::array()), DataError);
    CHECK_THROWS_AS(groups_from_json(nlohmann::json{{"g", {{"port", "input"}}}}), DataError);
    CHECK_THROWS_AS(groups_from_json(nlohmann::json{{"g", {{"nodes", {"a"}}, {"port", "sideways"}}}}), DataError);
    CHECK_THROWS_AS(load_groups("/definitely/not/here.json"), DataError);
}

TEST_CASE("pathways")
{
    CHECK(find_pathway("R2O").source == "RGC_input");
    CHECK(find_pathway("R2O").target == "TPN_O");
    CHECK(find_pathway("R2E").target == "TPN_E");
    CHECK_THROWS_AS(find_pathway("R2X"), ConfigError);
}
