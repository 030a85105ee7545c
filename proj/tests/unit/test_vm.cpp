#include <catch_amalgamated.hpp>

#include <random>

#include "wcfuzz/vm/execution.hpp"
#include "wcfuzz/vm/program.hpp"

using namespace wcfuzz::vm;

namespace {

Bytes bytes(std::initializer_list<int> values) {
  Bytes out;
  for (int v : values) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

// Sums user costs given as signed bytes.
constexpr const char* kCostSum = R"(
.program cost_sum
.input amounts count=3 width=8 signed
.locals i
    push 0
    store i
loop:
    load i
    push 3
    jge done
    load i
    in
    cost
    load i
    push 1
    add
    store i
    jmp loop
done:
    halt
)";

}  // namespace

TEST_CASE("bitmap_index follows the shifted xor scheme", "[vm][bitmap]") {
  CHECK(bitmap_index(0x0003, 0x0001) == 0x0002);
  // Tight loop on block 6: 6 ^ (6 >> 1) = 5.
  CHECK(bitmap_index(6, 6 >> 1) == 5);
  // a -> b and b -> a are distinct for a = 8, b = 2.
  CHECK(bitmap_index(2, 8 >> 1) == 6);
  CHECK(bitmap_index(8, 2 >> 1) == 9);
}

TEST_CASE("Bitmap::record saturates and shifts", "[vm][bitmap]") {
  Bitmap map;
  STATIC_REQUIRE(sizeof(map.cells) == 65536);
  for (int k = 0; k < 300; ++k) map.record(0);
  CHECK(map.cells[0] == 0xff);
  CHECK(map.transitions == 300);
  map.record(10);
  CHECK(map.prev_location == 5);
  map.clear();
  CHECK(map.transitions == 0);
  CHECK(map.prev_location == 0);
}

TEST_CASE("load_program accepts the minimal program", "[vm][parse]") {
  auto p = load_program(".input b count=1\nhalt\n");
  CHECK(p.code.size() == 1);
  CHECK(p.block_count() == 1);
  CHECK(p.input_layout.byte_length() == 1);
  auto r = execute(p, bytes({0}), CostModel::jumps);
  CHECK(r.status == Status::ok);
  CHECK(r.cost == 1);
}

TEST_CASE("load_program reports errors with positions", "[vm][parse]") {
  SECTION("undefined label") {
    try {
      load_program(".input b count=1\n  jmp nowhere\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() == 7);
    }
  }
  SECTION("duplicate label") {
    CHECK_THROWS_AS(load_program(".input b count=1\na: halt\na: halt\n"), ParseError);
  }
  SECTION("missing layout") {
    CHECK_THROWS_WITH(load_program("halt\n"), Catch::Matchers::ContainsSubstring("missing .input"));
  }
  SECTION("undeclared local") {
    CHECK_THROWS_AS(load_program(".input b count=1\nload x\nhalt\n"), ParseError);
  }
  SECTION("bad width") {
    CHECK_THROWS_AS(load_program(".input b count=1 width=12\nhalt\n"), ParseError);
  }
  SECTION("range outside width") {
    CHECK_THROWS_AS(load_program(".input b count=1 width=8 signed min=-200\nhalt\n"), ParseError);
  }
}

TEST_CASE("block ids are stable for a fixed seed", "[vm][parse]") {
  auto a = load_program(kCostSum, 42);
  auto b = load_program(kCostSum, 42);
  CHECK(a.block_ids == b.block_ids);
  CHECK(a.block_at == b.block_at);
  // entry, loop, fall-through after jge, done
  CHECK(a.block_count() == 4);
}

TEST_CASE("input layout folds raw bytes into the declared range", "[vm][layout]") {
  auto p = load_program(".input v count=2 width=8 signed min=-10 max=10\n.input w count=1 width=16\nhalt\n");
  const auto& layout = p.input_layout;
  REQUIRE(layout.byte_length() == 4);
  REQUIRE(layout.value_count() == 3);
  CHECK(layout.domain(0) == Interval{-10, 10});
  auto v = layout.decode(bytes({5, 0xf6, 0x34, 0x12}));
  CHECK(v == std::vector<std::int64_t>{5, -10, 0x1234});
  // 11 folds to -10, -11 folds to 10.
  v = layout.decode(bytes({11, 0xf5, 0, 0}));
  CHECK(v[0] == -10);
  CHECK(v[1] == 10);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 1000; ++k) {
    std::vector<std::int64_t> values{static_cast<std::int64_t>(rng() % 21) - 10,
                                     static_cast<std::int64_t>(rng() % 21) - 10,
                                     static_cast<std::int64_t>(rng() % 65536)};
    CHECK(layout.decode(layout.encode(values)) == values);
  }
  std::vector<std::int64_t> bad{11, 0, 0};
  CHECK_THROWS_AS(layout.encode(bad), std::out_of_range);
}

TEST_CASE("user-defined cost adds operands and floors the total", "[vm][cost]") {
  auto p = load_program(kCostSum);
  CHECK(execute(p, bytes({5, 7, 0}), CostModel::user_defined).cost == 12);
  CHECK(execute(p, bytes({5, 0, 0}), CostModel::user_defined).cost == 5);
  CHECK(execute(p, bytes({0, 0, 0}), CostModel::user_defined).cost == 0);
  // 3 + (-10) floors at 0.
  CHECK(execute(p, bytes({3, 0xf6, 0}), CostModel::user_defined).cost == 0);
}

TEST_CASE("jump cost counts block entries and equals bitmap increments", "[vm][cost]") {
  auto p = load_program(kCostSum, 7);
  auto r = execute(p, bytes({1, 2, 3}), CostModel::jumps);
  REQUIRE(r.status == Status::ok);
  // entry, 4x loop head, 3x fall-through body, done
  CHECK(r.cost == 9);
  CHECK(r.jumps == r.cost);
  std::uint64_t total = 0;
  for (auto c : r.bitmap->cells) total += c;
  CHECK(total == r.jumps);
}

TEST_CASE("peak allocation tracks the live maximum", "[vm][cost]") {
  auto p = load_program(R"(
.input b count=1
    push 10
    alloc
    push 4
    free
    push 3
    alloc
    push 20
    free
    push 2
    alloc
    halt
)");
  auto r = execute(p, bytes({0}), CostModel::peak_alloc);
  CHECK(r.cost == 10);
}

TEST_CASE("faults and timeouts are statuses, not exceptions", "[vm][status]") {
  SECTION("out-of-bounds memory") {
    auto p = load_program(".input b count=1\n.memory 4\npush 9\nld\nhalt\n");
    auto r = execute(p, bytes({0}), CostModel::jumps);
    CHECK(r.status == Status::error);
    CHECK_THAT(r.fault, Catch::Matchers::ContainsSubstring("line 4"));
  }
  SECTION("division by zero") {
    auto p = load_program(".input b count=1\npush 1\npush 0\ndiv\nhalt\n");
    CHECK(execute(p, bytes({0}), CostModel::jumps).status == Status::error);
  }
  SECTION("infinite loop hits the budget") {
    auto p = load_program(".input b count=1\nspin: jmp spin\n");
    auto r = execute(p, bytes({0}), CostModel::jumps, 1000);
    CHECK(r.status == Status::timeout);
    CHECK(r.instructions == 1000);
  }
  SECTION("short input") {
    auto p = load_program(".input b count=4\nhalt\n");
    CHECK(execute(p, bytes({0}), CostModel::jumps).status == Status::error);
  }
  SECTION("excess bytes are ignored") {
    auto p = load_program(".input b count=1\nhalt\n");
    CHECK(execute(p, bytes({0, 1, 2}), CostModel::jumps).status == Status::ok);
  }
}

TEST_CASE("execution is deterministic and serializable", "[vm]") {
  auto p = load_program(kCostSum, 11);
  auto a = execute(p, bytes({9, 0x80, 4}), CostModel::user_defined);
  auto b = execute(p, bytes({9, 0x80, 4}), CostModel::user_defined);
  CHECK(serialize(a, true) == serialize(b, true));

  auto record = serialize(a, false);
  auto back = deserialize_result(record);
  CHECK(back.bitmap == nullptr);
  CHECK(back.cost == a.cost);
  CHECK(back.decoded_input == a.decoded_input);
  CHECK(serialize(back) == record);

  auto full = deserialize_result(serialize(a, true));
  REQUIRE(full.bitmap != nullptr);
  CHECK(full.bitmap->cells == a.bitmap->cells);

  record.push_back(0);
  CHECK_THROWS(deserialize_result(record));
}

TEST_CASE("Interpreter matches execute", "[vm]") {
  auto p = load_program(kCostSum, 5);
  Interpreter interp(p, CostModel::jumps);
  Bitmap map;
  for (int k = 0; k < 3; ++k) {
    auto s = interp.run(bytes({1, 2, 3}), &map);
    auto r = execute(p, bytes({1, 2, 3}), CostModel::jumps);
    CHECK(s.cost == r.cost);
    CHECK(map.cells == r.bitmap->cells);
  }
}
