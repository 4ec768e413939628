#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

#include "turbomem/affinity.hpp"

namespace turbomem {
namespace {

namespace fs = std::filesystem;

TEST(CpuList, ParsesRangesAndSingles) {
  EXPECT_EQ(parse_cpu_list("0-3,8,10-11\n"), (std::vector<int>{0, 1, 2, 3, 8, 10, 11}));
  EXPECT_EQ(parse_cpu_list("0"), (std::vector<int>{0}));
  EXPECT_TRUE(parse_cpu_list("").empty());
  EXPECT_EQ(parse_cpu_list("x,2,3-y, 5"), (std::vector<int>{2, 5}));
  EXPECT_EQ(parse_cpu_list("3,1,1-2"), (std::vector<int>{1, 2, 3}));
}

class FakeSysfs : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("turbomem_sysfs_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root / "cpu");
  }
  void TearDown() override { fs::remove_all(root); }
  void write(const fs::path& rel, const std::string& text) {
    fs::create_directories((root / rel).parent_path());
    std::ofstream(root / rel) << text;
  }
  fs::path root;
};

TEST_F(FakeSysfs, TwoNodes) {
  write("cpu/online", "0-7\n");
  write("node/node0/cpulist", "0-3\n");
  write("node/node1/cpulist", "4-7\n");
  write("node/possible", "0-1\n");
  const Topology t = enumerate_topology(root);
  EXPECT_EQ(t.cores.size(), 8u);
  EXPECT_EQ(t.nodes, (std::vector<int>{0, 1}));
  EXPECT_EQ(t.node_of(5), 1);
  EXPECT_EQ(t.cores_of(0), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(t.has_node(1));
  EXPECT_FALSE(t.has_node(2));
}

TEST_F(FakeSysfs, OfflineCoresAreExcluded) {
  write("cpu/online", "0-2\n");
  write("node/node0/cpulist", "0-3\n");
  const Topology t = enumerate_topology(root);
  EXPECT_EQ(t.cores, (std::vector<int>{0, 1, 2}));
  EXPECT_FALSE(t.has_core(3));
}

TEST_F(FakeSysfs, MissingNodeDirectoryMeansNodeZero) {
  write("cpu/online", "0-1\n");
  const Topology t = enumerate_topology(root);
  EXPECT_EQ(t.nodes, (std::vector<int>{0}));
  EXPECT_EQ(t.node_of(1), 0);
}

TEST_F(FakeSysfs, MissingEverythingFallsBack) {
  const Topology t = enumerate_topology(root / "nope");
  EXPECT_FALSE(t.cores.empty());
  EXPECT_EQ(t.nodes, (std::vector<int>{0}));
}

TEST(Pinning, PinsToFirstAllowedCoreAndReadsBack) {
  const Topology topo = enumerate_topology();
  const auto allowed = current_thread_affinity();
  ASSERT_FALSE(allowed.empty());
  std::thread t([&] {
    const int core = allowed.front();
    if (!topo.has_core(core)) GTEST_SKIP() << "core " << core << " not online";
    EXPECT_EQ(pin_current_thread(core, topo), PinOutcome::Pinned);
    EXPECT_EQ(current_thread_affinity(), std::vector<int>{core});
  });
  t.join();
}

TEST(Pinning, UnknownCoreThrows) {
  const Topology topo = enumerate_topology();
  try {
    pin_current_thread(100000, topo);
    ADD_FAILURE() << "expected invalid_core";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_core);
  }
}

TEST(Pinning, GuardRestoresMask) {
  const auto original = current_thread_affinity();
  {
    AffinityGuard guard;
    pin_current_thread(original.front());
  }
  EXPECT_EQ(current_thread_affinity(), original);
}

}  // namespace
}  // namespace turbomem
