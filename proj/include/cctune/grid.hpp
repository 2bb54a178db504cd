#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cctune {

/// Raised for malformed or structurally invalid case data. Carries the
/// 1-based line number of the offending record when one is known.
class CaseError : public std::runtime_error {
 public:
  explicit CaseError(const std::string& what, std::optional<std::size_t> line = std::nullopt);

  std::optional<std::size_t> line() const { return line_; }

 private:
  std::optional<std::size_t> line_;
};

// All electrical quantities below are per unit on GridCase::base_mva.
// Cost coefficients are expressed against per-unit output as well, so that
// cost = cost_quadratic * p^2 + cost_linear * p + cost_constant for p in pu.

struct Bus {
  int id = 0;           // contiguous 1..m
  int original_id = 0;  // id as written in the case file
  double load = 0.0;
  bool has_uncertainty = false;

  bool operator==(const Bus&) const = default;
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;
  double capacity = 0.0;

  bool operator==(const Line&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_quadratic = 0.0;
  double cost_linear = 0.0;
  double cost_constant = 0.0;

  /// Zero-capacity units (synchronous condensers, implicit placeholders) are
  /// pinned at zero output and never participate in balancing.
  bool is_degenerate() const { return p_max <= 0.0 && p_min == p_max; }

  bool operator==(const Generator&) const = default;
};

/// Physical system after normalization: buses are numbered 1..m in
/// ascending order of their original ids, and `generators[i]` is the aggregated unit
/// at bus i+1 (an all-zero placeholder when the bus has none).
struct GridCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;

  std::size_t bus_count() const { return buses.size(); }
  std::size_t line_count() const { return lines.size(); }

  double total_load() const;
  double total_capacity() const;
  std::vector<int> uncertain_buses() const;

  bool operator==(const GridCase&) const = default;
};

/// One generator record in MW units as it appears in a case file, before
/// per-bus aggregation.
struct GeneratorRecord {
  int bus = 0;
  double p_min_mw = 0.0;
  double p_max_mw = 0.0;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
};

/// Combines several units at one bus into a single equivalent unit (MW
/// units). Capacities and constant costs add; the linear coefficient is the
/// capacity-weighted mean; quadratic coefficients combine like parallel
/// conductances, 1/c2 = sum 1/c2_i, collapsing to 0 when any unit is linear.
GeneratorRecord aggregate_generators(const std::vector<GeneratorRecord>& units);

/// Parses the line-oriented case format:
///   base <mva>
///   bus <id> <load_mw> [uncertain]
///   line <from> <to> <x_pu> <cap_mw>
///   gen <bus> <pmin_mw> <pmax_mw> <c2> <c1> <c0>
/// `#` starts a comment. LF and CRLF line endings are accepted.
GridCase parse_case(std::string_view text);
GridCase load_case_file(const std::string& path);

/// Writes `grid` back out in the case format (MW units, one aggregated `gen`
/// line per bus with capacity). Parsing the result reproduces `grid` exactly.
std::string serialize_case(const GridCase& grid);

/// Checks every structural invariant; throws CaseError on the first failure.
void validate_case(const GridCase& grid);

/// Connected components of the bus graph, each a sorted list of bus ids.
std::vector<std::vector<int>> connected_components(const GridCase& grid);

/// Derates every line to 70% of its capacity, releases all minimum outputs
/// to zero, doubles every maximum output and places uncertainty sources on
/// buses 8 and 15. Not idempotent: apply exactly once.
GridCase apply_rts_modifications(const GridCase& grid);

/// Replaces the set of buses carrying uncertainty sources.
GridCase with_uncertain_buses(GridCase grid, const std::vector<int>& bus_ids);

}  // namespace cctune
