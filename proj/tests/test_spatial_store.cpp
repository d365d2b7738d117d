#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <map>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "cubemesh/spatial_store.hpp"

using namespace cubemesh;

namespace {

// Hash recomputed from its definition: the 32-bit two's complement images
// of x, y, z times three primes, xor-folded, reduced modulo 2^20.
std::size_t reference_hash(long long x, long long y, long long z) {
  auto wrap = [](long long v) { return static_cast<unsigned long long>(v) & 0xFFFFFFFFull; };
  const unsigned long long h = (wrap(x) * 73856093ull) ^ (wrap(y) * 19349663ull) ^ (wrap(z) * 83492791ull);
  return static_cast<std::size_t>(h % (1ull << 20));
}

}  // namespace

TEST_CASE("block hash is deterministic and matches its definition") {
  const std::size_t n = std::size_t{1} << 20;
  CHECK(BlockTable::hash({0, 0, 0}, n) == BlockTable::hash({0, 0, 0}, n));
  CHECK(BlockTable::hash({0, 0, 0}, n) == 0);
  // 73856093 mod 2^20 and 19349663 mod 2^20
  CHECK(BlockTable::hash({1, 0, 0}, n) == 73856093 % (1 << 20));
  CHECK(BlockTable::hash({0, 1, 0}, n) == 19349663 % (1 << 20));
  CHECK(BlockTable::hash({1, 0, 0}, n) != BlockTable::hash({0, 1, 0}, n));
  for (const BlockCoord c : {BlockCoord{-1, 2, -3}, BlockCoord{64, -64, 7}, BlockCoord{-64, -64, -64}}) {
    CHECK(BlockTable::hash(c, n) == reference_hash(c.x, c.y, c.z));
  }
}

TEST_CASE("random coordinates spread with small bucket load") {
  const std::size_t n = std::size_t{1} << 20;
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> coord(-64, 64);
  std::set<std::tuple<int, int, int>> unique;
  while (unique.size() < 10000) unique.insert({coord(rng), coord(rng), coord(rng)});
  std::map<std::size_t, int> load;
  for (const auto& [x, y, z] : unique) ++load[BlockTable::hash({x, y, z}, n)];
  int max_load = 0;
  for (const auto& [bucket, count] : load) max_load = std::max(max_load, count);
  CHECK(max_load <= 8);

  BlockTable table(n, 1u << 15);
  for (const auto& [x, y, z] : unique) table.get_or_allocate({x, y, z});
  CHECK(table.size() == unique.size());
  CHECK(table.mean_probe_length() < 2.0);
  for (const auto& [x, y, z] : unique) {
    const Block* b = table.find({x, y, z});
    REQUIRE(b != nullptr);
    CHECK(b->coord == BlockCoord{x, y, z});
  }
}

TEST_CASE("get_or_allocate is idempotent and initializes cubes") {
  SpatialStore store;
  Block& a = store.get_or_allocate_block({0, 0, 0});
  Block& b = store.get_or_allocate_block({0, 0, 0});
  CHECK(&a == &b);
  CHECK(store.block_table().size() == 1);
  for (const Cube& c : a.cubes) {
    CHECK(c.weight == 0);
    CHECK(c.type_prev == 0);
    CHECK(c.type_curr == 0);
    for (const auto& slot : c.edge_vertex) CHECK(slot.load() == kNone);
    for (const TriangleId t : c.triangles) CHECK(t == kNone);
  }
  CHECK(store.find_block({1, 0, 0}) == nullptr);
}

TEST_CASE("concurrent allocation of one coordinate has a single winner") {
  for (int round = 0; round < 20; ++round) {
    BlockTable table(1u << 10, 64);
    std::atomic<int> go{0};
    std::vector<Block*> seen(8, nullptr);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        while (go.load() == 0) std::this_thread::yield();
        seen[t] = &table.get_or_allocate({3, -2, 5});
      });
    }
    go = 1;
    for (auto& th : threads) th.join();
    CHECK(table.size() == 1);
    for (Block* b : seen) CHECK(b == seen[0]);
  }
}

TEST_CASE("block capacity exhaustion is reported") {
  BlockTable table(1u << 4, 2);
  table.get_or_allocate({0, 0, 0});
  table.get_or_allocate({1, 0, 0});
  CHECK_THROWS_AS(table.get_or_allocate({2, 0, 0}), CapacityError);
  CHECK(table.find({0, 0, 0}) != nullptr);
  CHECK(table.find({2, 0, 0}) == nullptr);
}

TEST_CASE("world points map to floor(p / (B l))") {
  SpatialStore store({.cube_size = 0.03});
  CHECK(store.block_extent() == doctest::Approx(0.24));
  CHECK(store.block_of_point({0.0, 0.0, 0.0}) == BlockCoord{0, 0, 0});
  CHECK(store.block_of_point({0.25, -0.01, 0.95}) == BlockCoord{1, -1, 3});
  CHECK(store.block_of_point({-0.24, 0.48, 1.06}) == BlockCoord{-1, 2, 4});
}

TEST_CASE("cube coordinates carry across block borders") {
  const CubeCoord c = CubeCoord::from_local({1, -1, 0}, 7, 0, 3);
  CHECK(c.x == 15);
  CHECK(c.y == -8);
  CHECK(c.z == 3);
  CHECK(c.block() == BlockCoord{1, -1, 0});
  const CubeCoord right = c.offset(1, 0, 0);
  CHECK(right.block() == BlockCoord{2, -1, 0});
  CHECK(right.local_x() == 0);
  const CubeCoord below = c.offset(0, -1, 0);
  CHECK(below.block() == BlockCoord{1, -2, 0});
  CHECK(below.local_y() == 7);
  CHECK(CubeCoord::from_local({0, 0, 0}, 1, 2, 3).local_index() == 1 + 8 * 2 + 64 * 3);
}

TEST_CASE("resolve_edge finds the owning cube") {
  SpatialStore store;
  Block& b0 = store.get_or_allocate_block({0, 0, 0});
  Block& b1 = store.get_or_allocate_block({1, 0, 0});

  SUBCASE("owned edge") {
    const EdgeKey k{CubeCoord::from_local({0, 0, 0}, 0, 0, 0), Axis::X};
    CHECK(store.resolve_edge(k) == &b0.at(0, 0, 0).edge_vertex[0]);
  }
  SUBCASE("+X face vertical edge of local (7,3,3) belongs to (0,3,3) of block (1,0,0)") {
    // That edge runs along Y from corner (8,3,3): its minimal endpoint is
    // the corner of cube (8,3,3), which is local (0,3,3) in block (1,0,0).
    const CubeCoord c = CubeCoord::from_local({0, 0, 0}, 7, 3, 3);
    const EdgeKey k{c.offset(1, 0, 0), Axis::Y};
    CHECK(k.cube.block() == BlockCoord{1, 0, 0});
    CHECK(store.resolve_edge(k) == &b1.at(0, 3, 3).edge_vertex[1]);
  }
  SUBCASE("distinct edges give distinct slots") {
    std::set<const void*> slots;
    for (int x = 0; x < 10; ++x) {
      for (int a = 0; a < 3; ++a) {
        slots.insert(store.resolve_edge({CubeCoord{x, 2, 2}, static_cast<Axis>(a)}));
      }
    }
    CHECK(slots.size() == 30);
    CHECK(slots.count(nullptr) == 0);
  }
  SUBCASE("absent owner block") {
    CHECK(store.resolve_edge({CubeCoord{-1, 0, 0}, Axis::Z}) == nullptr);
  }
}

TEST_CASE("corner samples are seam consistent") {
  SpatialStore store;
  CHECK(store.corner_sample({5, 5, 5}).weight == 0);
  Block& b1 = store.get_or_allocate_block({1, 0, 0});
  store.get_or_allocate_block({0, 0, 0});
  b1.at(0, 2, 2).tsdf = 0.5;
  b1.at(0, 2, 2).weight = 1;
  // The corner at global (8,2,2) seen as corner 1 of cube (7,2,2) and corner 0 of cube (8,2,2).
  const CubeCoord left = CubeCoord::from_local({0, 0, 0}, 7, 2, 2);
  const CornerSample a = store.corner_sample(left.offset(1, 0, 0));
  const CornerSample b = store.corner_sample(CubeCoord::from_local({1, 0, 0}, 0, 2, 2));
  CHECK(a.tsdf == 0.5);
  CHECK(a.weight == 1);
  CHECK(a.tsdf == b.tsdf);
  CHECK(a.weight == b.weight);
}

TEST_CASE("pool reuses the most recently freed slot") {
  Pool<Vertex> pool(16, "vertices");
  const auto a = pool.allocate();
  const auto b = pool.allocate();
  pool.release(a);
  CHECK(pool.allocate() == a);
  CHECK(pool.allocated_total() == 2);
  pool.release(b);
  CHECK_THROWS_AS(pool.release(b), ConsistencyError);
  CHECK_THROWS_AS(pool.release(99), ConsistencyError);
}

TEST_CASE("pool grows by at most N for N allocations") {
  Pool<Triangle> pool(1000);
  std::vector<std::uint32_t> ids;
  for (int i = 0; i < 100; ++i) ids.push_back(pool.allocate());
  for (const auto id : ids) pool.release(id);
  for (int i = 0; i < 100; ++i) pool.allocate();
  CHECK(pool.allocated_total() == 100);
  CHECK(pool.live_count() == 100);
  CHECK(pool.released_total() == 100);
}

TEST_CASE("pool capacity is enforced") {
  Pool<Vertex> pool(2);
  pool.allocate();
  pool.allocate();
  CHECK_THROWS_AS(pool.allocate(), CapacityError);
}

TEST_CASE("concurrent alloc/free storm conserves counts") {
  Pool<Vertex> pool(1u << 16);
  constexpr int kThreads = 8;
  constexpr int kOps = 10000 / kThreads;
  std::vector<std::vector<std::uint32_t>> kept(kThreads);
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937 rng(t);
      std::vector<std::uint32_t>& mine = kept[t];
      for (int i = 0; i < kOps; ++i) {
        if (mine.empty() || rng() % 3 != 0) {
          mine.push_back(pool.allocate());
        } else {
          pool.release(mine.back());
          mine.pop_back();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  std::set<std::uint32_t> live;
  for (const auto& v : kept) live.insert(v.begin(), v.end());
  std::size_t held = 0;
  for (const auto& v : kept) held += v.size();
  CHECK(live.size() == held);  // no handle given to two owners
  CHECK(pool.live_count() == held);
  CHECK(pool.allocated_total() == pool.live_count() + pool.free_count());
  std::size_t scanned = 0;
  pool.for_each_live([&](std::uint32_t id, const Vertex&) {
    ++scanned;
    CHECK(live.count(id) == 1);
  });
  CHECK(scanned == held);
}

TEST_CASE("free_vertex refuses referenced vertices") {
  SpatialStore store;
  const VertexId v = store.allocate_vertex();
  store.vertices()[v].refcount = 1;
  CHECK_THROWS_AS(store.free_vertex(v), ConsistencyError);
  store.vertices()[v].refcount = 0;
  store.free_vertex(v);
  CHECK_FALSE(store.vertices().is_live(v));
}

TEST_CASE("compact mesh of an empty store is empty") {
  SpatialStore store;
  const CompactMesh m = store.compact_mesh(0);
  CHECK(m.positions.empty());
  CHECK(m.normals.empty());
  CHECK(m.ages.empty());
  CHECK(m.indices.empty());
}

TEST_CASE("compact mesh remaps two triangles sharing an edge") {
  SpatialStore store;
  Block& b = store.get_or_allocate_block({0, 0, 0});
  std::array<VertexId, 4> v{};
  for (int i = 0; i < 4; ++i) {
    v[i] = store.allocate_vertex();
    Vertex& vx = store.vertices()[v[i]];
    vx.edge = {CubeCoord{i, 0, 0}, Axis::X};
    vx.position = Eigen::Vector3f(static_cast<float>(i), 0, 0);
    vx.birth_frame = i;
    b.at(i, 0, 0).edge_vertex[0] = v[i];
  }
  const TriangleId t0 = store.triangles().allocate();
  const TriangleId t1 = store.triangles().allocate();
  store.triangles()[t0].v = {v[0], v[1], v[2]};
  store.triangles()[t1].v = {v[2], v[1], v[3]};
  b.at(0, 0, 0).triangles[0] = t0;
  b.at(1, 0, 0).triangles[0] = t1;

  const CompactMesh m = store.compact_mesh(5);
  CHECK(m.vertex_count() == 4);
  CHECK(m.indices.size() == 6);
  CHECK(m.indices == std::vector<std::uint32_t>{0, 1, 2, 2, 1, 3});
  CHECK(m.ages == std::vector<std::int32_t>{5, 4, 3, 2});
}

TEST_CASE("cube footprints are reported") {
  CHECK(SpatialStore::kCubeBytes == sizeof(Cube));
  CHECK(SpatialStore::kCompactCubeBytes == 24);
  CHECK(sizeof(Cube) <= 56);
}
