#include <gtest/gtest.h>

#include "pmig/topology.hpp"

using namespace pmig;

TEST(Topology, DualSocketIsValid) {
    const auto t = presets::dual_socket(64);
    EXPECT_EQ(t.node_count(), 2u);
    EXPECT_EQ(t.core_count(), 40u);
    EXPECT_EQ(t.latency(0, 0), 100);
    EXPECT_EQ(t.latency(0, 1), 400);
    EXPECT_EQ(t.latency(1, 0), 400);
}

TEST(Topology, UmaDegenerateCase) {
    const auto t = presets::uma(16);
    EXPECT_EQ(t.node_count(), 1u);
    EXPECT_EQ(t.core_count(), 4u);
    EXPECT_EQ(t.latency(0, 0), 100);
}

TEST(Topology, TieredHasCorelessCxlNode) {
    const auto t = presets::tiered(16);
    EXPECT_EQ(t.node(1).kind, NodeKind::Cxl);
    for (const auto& c : t.cores()) EXPECT_EQ(c.node, 0);
    EXPECT_EQ(t.latency(0, 1), 500);
}

TEST(Topology, ParsesJsonWithFlatMatrix) {
    const auto t = parse_topology(R"({
        "nodes": [{"id": 0, "frames": 8}, {"id": 1, "frames": 8, "kind": "cxl"}],
        "cores": [{"id": 0, "node": 0}],
        "latency_ns": [100, 500, 500, 100],
        "tlb_miss_ns": 20
    })");
    EXPECT_EQ(t.latency(0, 1), 500);
    EXPECT_EQ(t.tlb_miss_ns(), 20);
    EXPECT_EQ(t.node(1).kind, NodeKind::Cxl);
}

TEST(Topology, ParseErrorsNameTheKey) {
    auto message = [](const char* text) {
        try {
            parse_topology(text);
        } catch (const MalformedConfig& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message(R"({"nodes":[{"id":0,"frames":1}],"cores":[{"id":0,"node":0}],"latency_ns":[[100,1]]})")
                  .find("latency_ns[0]"),
              std::string::npos);
    EXPECT_NE(message(R"({"nodes":[{"id":0}],"cores":[],"latency_ns":[[1]]})").find("frames"), std::string::npos);
    EXPECT_NE(message(R"({"nodes":[{"id":0,"frames":1}],"cores":[{"id":0,"node":0}],"latency_ns":[[0]]})")
                  .find("positive"),
              std::string::npos);
    EXPECT_NE(message(R"({"nodes":[{"id":0,"frames":1}],"cores":[{"id":0,"node":3}],"latency_ns":[[1]]})")
                  .find("cores[0].node"),
              std::string::npos);
    EXPECT_NE(message("{not json").find("topology"), std::string::npos);
}

TEST(Topology, RejectsLocalSlowerThanRemote) {
    TopologyConfig cfg;
    cfg.nodes = {{0, 4, NodeKind::Dram}, {1, 4, NodeKind::Dram}};
    cfg.cores = {{0, 0}};
    cfg.latency_ns = {{400, 100}, {100, 100}};
    EXPECT_THROW(Topology::create(cfg), MalformedConfig);
}

TEST(Topology, SpreadCoreAlternatesNodes) {
    const auto t = presets::dual_socket(8);
    EXPECT_EQ(t.core_node(t.spread_core(0)), 0);
    EXPECT_EQ(t.core_node(t.spread_core(1)), 1);
    EXPECT_NE(t.spread_core(0), t.spread_core(2));
}
