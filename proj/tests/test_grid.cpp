#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "cctune/grid.hpp"

using namespace cctune;

namespace {

const char* kTwoBus = R"(base 100
bus 1 0
bus 2 100
line 1 2 0.1 200
gen 1 0 300 0.01 20 5
)";

std::string rts_path() { return std::string(CCTUNE_DATA_DIR) + "/rts24.case"; }

}  // namespace

TEST(ParseCase, TwoBusMinimal) {
  const GridCase g = parse_case(kTwoBus);
  EXPECT_EQ(g.bus_count(), 2u);
  EXPECT_EQ(g.line_count(), 1u);
  EXPECT_DOUBLE_EQ(g.buses[1].load, 1.0);
  EXPECT_DOUBLE_EQ(g.lines[0].capacity, 2.0);
  EXPECT_DOUBLE_EQ(g.lines[0].reactance, 0.1);
  EXPECT_DOUBLE_EQ(g.generators[0].p_max, 3.0);
  // c2 per MW^2 -> per pu^2, c1 per MW -> per pu
  EXPECT_DOUBLE_EQ(g.generators[0].cost_quadratic, 0.01 * 100 * 100);
  EXPECT_DOUBLE_EQ(g.generators[0].cost_linear, 20.0 * 100);
  EXPECT_DOUBLE_EQ(g.generators[0].cost_constant, 5.0);
  // implicit placeholder at bus 2
  EXPECT_TRUE(g.generators[1].is_degenerate());
  EXPECT_EQ(g.generators[1].bus, 2);
}

TEST(ParseCase, RtsDimensions) {
  const GridCase g = load_case_file(rts_path());
  EXPECT_EQ(g.bus_count(), 24u);
  EXPECT_EQ(g.line_count(), 38u);
  EXPECT_NEAR(g.total_load() * g.base_mva, 2850.0, 1e-9);
  EXPECT_NEAR(g.total_capacity() * g.base_mva, 3405.0, 1e-9);
  EXPECT_TRUE(g.uncertain_buses().empty());
}

TEST(ParseCase, UndefinedBusReportsLine) {
  const std::string text = "base 100\nbus 1 0\nbus 2 10\nline 1 2 0.1 50\nline 99 2 0.1 50\ngen 1 0 100 0 1 0\n";
  try {
    parse_case(text);
    FAIL() << "expected CaseError";
  } catch (const CaseError& e) {
    ASSERT_TRUE(e.line().has_value());
    EXPECT_EQ(*e.line(), 5u);
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
}

TEST(ParseCase, Errors) {
  EXPECT_THROW(parse_case("base 100\nbus 1 0\nbus 2 1\nline 1 2 0 10\ngen 1 0 5 0 1 0\n"), CaseError);
  EXPECT_THROW(parse_case("base 100\nbus 1 0\nbus 2 1\nline 1 2 -0.1 10\ngen 1 0 5 0 1 0\n"), CaseError);
  EXPECT_THROW(parse_case("base 100\nbus 1 0\nbus 1 1\nline 1 1 0.1 10\n"), CaseError);
  EXPECT_THROW(parse_case("base 100\nbranch 1 2\n"), CaseError);
  EXPECT_THROW(parse_case("base 100\nbus 1 0\nbus 2 1\nline 1 2 0.1 x\n"), CaseError);
  // capacity below load
  EXPECT_THROW(parse_case("base 100\nbus 1 0\nbus 2 10\nline 1 2 0.1 10\ngen 1 0 5 0 1 0\n"), CaseError);
}

TEST(ParseCase, DisconnectedNamesIsland) {
  const char* text = "base 100\nbus 1 0\nbus 2 1\nbus 3 1\nbus 4 0\nline 1 2 0.1 10\nline 3 4 0.1 10\n"
                     "gen 1 0 5 0 1 0\n";
  try {
    parse_case(text);
    FAIL() << "expected CaseError";
  } catch (const CaseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("disconnected"), std::string::npos);
    EXPECT_NE(what.find('3'), std::string::npos);
    EXPECT_NE(what.find('4'), std::string::npos);
  }
}

TEST(ParseCase, CommentsAndCrlf) {
  const GridCase a = parse_case(kTwoBus);
  std::string crlf;
  for (char c : std::string("# header\r\n") + kTwoBus) {
    if (c == '\n' && (crlf.empty() || crlf.back() != '\r')) crlf += '\r';
    crlf += c;
  }
  EXPECT_EQ(parse_case(crlf), a);
}

TEST(ParseCase, RenumbersNonContiguousIds) {
  const GridCase g = parse_case("base 100\nbus 10 0\nbus 30 5 uncertain\nline 30 10 0.2 100\ngen 10 0 50 0 1 0\n");
  EXPECT_EQ(g.buses[0].id, 1);
  EXPECT_EQ(g.buses[0].original_id, 10);
  EXPECT_EQ(g.buses[1].original_id, 30);
  EXPECT_EQ(g.lines[0].from_bus, 2);
  EXPECT_EQ(g.lines[0].to_bus, 1);
  EXPECT_EQ(g.uncertain_buses(), std::vector<int>{2});
}

TEST(RtsModifications, ScalesLimits) {
  const GridCase g = load_case_file(rts_path());
  const GridCase m = apply_rts_modifications(g);
  for (std::size_t k = 0; k < g.line_count(); ++k) EXPECT_NEAR(m.lines[k].capacity, 0.7 * g.lines[k].capacity, 1e-12);
  // first line of the case is rated 175 MW
  EXPECT_NEAR(m.lines[0].capacity * 100, 122.5, 1e-12);
  for (std::size_t i = 0; i < g.bus_count(); ++i) {
    EXPECT_EQ(m.generators[i].p_min, 0.0);
    EXPECT_NEAR(m.generators[i].p_max, 2.0 * g.generators[i].p_max, 1e-12);
  }
}

TEST(RtsModifications, NotIdempotent) {
  const GridCase g = load_case_file(rts_path());
  const GridCase twice = apply_rts_modifications(apply_rts_modifications(g));
  for (std::size_t k = 0; k < g.line_count(); ++k)
    EXPECT_NEAR(twice.lines[k].capacity, 0.49 * g.lines[k].capacity, 1e-12);
}

TEST(RtsModifications, UncertaintyOnBuses8And15) {
  const GridCase m = apply_rts_modifications(load_case_file(rts_path()));
  EXPECT_EQ(m.uncertain_buses(), (std::vector<int>{8, 15}));
  EXPECT_NEAR(m.total_capacity(), 2.0 * load_case_file(rts_path()).total_capacity(), 1e-12);
}

TEST(Aggregation, SingleUnitPassesThrough) {
  const GeneratorRecord u{3, 10, 50, 0.02, 15, 7};
  const GeneratorRecord a = aggregate_generators({u});
  EXPECT_EQ(a.p_min_mw, 10);
  EXPECT_EQ(a.p_max_mw, 50);
  EXPECT_EQ(a.c2, 0.02);
  EXPECT_EQ(a.c1, 15);
  EXPECT_EQ(a.c0, 7);
}

TEST(Aggregation, ParallelRuleAndCapacityWeightedLinear) {
  const GeneratorRecord a = aggregate_generators({{1, 0, 100, 0.02, 10, 1}, {1, 5, 300, 0.04, 30, 2}});
  EXPECT_DOUBLE_EQ(a.p_max_mw, 400);
  EXPECT_DOUBLE_EQ(a.p_min_mw, 5);
  EXPECT_DOUBLE_EQ(a.c0, 3);
  EXPECT_NEAR(a.c2, 1.0 / (1.0 / 0.02 + 1.0 / 0.04), 1e-15);
  EXPECT_NEAR(a.c1, (100 * 10 + 300 * 30) / 400.0, 1e-12);
}

TEST(Aggregation, AnyLinearUnitDropsQuadratic) {
  const GeneratorRecord a = aggregate_generators({{1, 0, 100, 0.02, 10, 0}, {1, 0, 100, 0.0, 30, 0}});
  EXPECT_EQ(a.c2, 0.0);
  EXPECT_NEAR(a.c1, 20.0, 1e-12);
}

TEST(Aggregation, PreservesTotalCapacityProperty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cap(0.0, 400.0), cost(0.0, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GeneratorRecord> units;
    double total = 0.0;
    const int k = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < k; ++i) {
      const double pmax = cap(rng);
      units.push_back({1, 0.0, pmax, cost(rng), 100 * cost(rng), cost(rng)});
      total += pmax;
    }
    EXPECT_NEAR(aggregate_generators(units).p_max_mw, total, 1e-9 * (1 + total));
  }
}

TEST(Aggregation, CaseTotalCapacityMatchesRecords) {
  // RTS file: sum of all unit records equals aggregated GridCase capacity.
  std::ifstream in(rts_path());
  std::string line;
  double total = 0.0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key != "gen") continue;
    double bus, pmin, pmax;
    fields >> bus >> pmin >> pmax;
    total += pmax;
  }
  EXPECT_NEAR(load_case_file(rts_path()).total_capacity() * 100, total, 1e-9);
}

TEST(Serialize, RoundTripRts) {
  const GridCase g = load_case_file(rts_path());
  EXPECT_EQ(parse_case(serialize_case(g)), g);
  const GridCase m = apply_rts_modifications(g);
  EXPECT_EQ(parse_case(serialize_case(m)), m);
}

TEST(Serialize, RoundTripRandomCases) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 6);
    std::ostringstream text;
    text << "base " << (50 + 100 * u(rng)) << "\n";
    double load = 0.0;
    for (int i = 1; i <= m; ++i) {
      const double d = 200 * u(rng);
      load += d;
      text << "bus " << 3 * i << " " << d << (u(rng) < 0.3 ? " uncertain" : "") << "\n";
    }
    for (int i = 2; i <= m; ++i)
      text << "line " << 3 * (1 + rng() % (i - 1)) << " " << 3 * i << " " << 0.01 + u(rng) << " " << 1 + 500 * u(rng)
           << "\n";
    text << "gen 3 0 " << load + 10 << " " << 0.1 * u(rng) << " " << 50 * u(rng) << " " << 100 * u(rng) << "\n";
    text << "gen 3 0 " << 100 * u(rng) << " " << 0.1 * u(rng) << " " << 50 * u(rng) << " " << 100 * u(rng) << "\n";
    const GridCase g = parse_case(text.str());
    EXPECT_EQ(parse_case(serialize_case(g)), g) << text.str();
  }
}

TEST(Serialize, PerUnitConversionExact) {
  const GridCase g = parse_case("base 100\nbus 1 0\nbus 2 37.5\nline 1 2 0.1 12.5\ngen 1 0 250 0 1 0\n");
  EXPECT_EQ(g.buses[1].load, 37.5 / 100);
  EXPECT_EQ(g.lines[0].capacity, 12.5 / 100);
  EXPECT_EQ(g.generators[0].p_max, 250.0 / 100);
}

TEST(Validate, RejectsStructuralProblems) {
  GridCase g = parse_case(kTwoBus);
  GridCase bad = g;
  bad.lines[0].to_bus = 1;
  EXPECT_THROW(validate_case(bad), CaseError);
  bad = g;
  bad.lines[0].to_bus = 7;
  EXPECT_THROW(validate_case(bad), CaseError);
  bad = g;
  bad.generators[0].cost_quadratic = -1;
  EXPECT_THROW(validate_case(bad), CaseError);
  bad = g;
  bad.generators[0].p_min = 4;
  EXPECT_THROW(validate_case(bad), CaseError);
  EXPECT_NO_THROW(validate_case(g));
}

TEST(Grid, WithUncertainBuses) {
  const GridCase g = with_uncertain_buses(load_case_file(rts_path()), {3, 20});
  EXPECT_EQ(g.uncertain_buses(), (std::vector<int>{3, 20}));
  EXPECT_THROW(with_uncertain_buses(g, {25}), CaseError);
}
