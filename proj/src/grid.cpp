#include "cctune/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

namespace cctune {

CaseError::CaseError(const std::string& what, std::optional<std::size_t> line)
    : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + what : what), line_(line) {}

double GridCase::total_load() const {
  double total = 0.0;
  for (const auto& b : buses) total += b.load;
  return total;
}

double GridCase::total_capacity() const {
  double total = 0.0;
  for (const auto& g : generators) total += g.p_max;
  return total;
}

std::vector<int> GridCase::uncertain_buses() const {
  std::vector<int> ids;
  for (const auto& b : buses)
    if (b.has_uncertainty) ids.push_back(b.id);
  return ids;
}

GeneratorRecord aggregate_generators(const std::vector<GeneratorRecord>& units) {
  if (units.empty()) return {};
  GeneratorRecord out;
  out.bus = units.front().bus;
  bool all_quadratic = true;
  double inverse_c2 = 0.0;
  for (const auto& u : units) {
    out.p_min_mw += u.p_min_mw;
    out.p_max_mw += u.p_max_mw;
    out.c0 += u.c0;
    if (u.c2 > 0.0)
      inverse_c2 += 1.0 / u.c2;
    else
      all_quadratic = false;
  }
  out.c2 = all_quadratic ? 1.0 / inverse_c2 : 0.0;

  if (units.size() == 1) {
    out.c1 = units.front().c1;
    out.c2 = units.front().c2;
  } else if (out.p_max_mw > 0.0) {
    double weighted = 0.0;
    for (const auto& u : units) weighted += u.p_max_mw * u.c1;
    out.c1 = weighted / out.p_max_mw;
  } else {
    double sum = 0.0;
    for (const auto& u : units) sum += u.c1;
    out.c1 = sum / static_cast<double>(units.size());
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\f\v");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view s) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) fields.push_back(s.substr(i, j - i));
    i = j;
  }
  return fields;
}

double to_real(std::string_view field, std::size_t line_no, const char* what) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw CaseError("expected a number for " + std::string(what) + ", got '" + std::string(field) + "'",
                    line_no);
  return value;
}

int to_int(std::string_view field, std::size_t line_no, const char* what) {
  int value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw CaseError("expected an integer for " + std::string(what) + ", got '" + std::string(field) + "'",
                    line_no);
  return value;
}

void expect_fields(const std::vector<std::string_view>& f, std::size_t lo, std::size_t hi, std::size_t line_no) {
  if (f.size() < lo || f.size() > hi)
    throw CaseError("'" + std::string(f.front()) + "' record expects " + std::to_string(lo - 1) +
                        (hi != lo ? "-" + std::to_string(hi - 1) : std::string()) + " fields, got " +
                        std::to_string(f.size() - 1),
                    line_no);
}

struct RawLine {
  int from = 0;
  int to = 0;
  double x = 0.0;
  double cap_mw = 0.0;
  std::size_t line_no = 0;
};

struct RawBus {
  int id = 0;
  double load_mw = 0.0;
  bool uncertain = false;
  std::size_t line_no = 0;
};

// Shortest round-trippable text for the external (MW-style) value whose
// conversion to internal units reproduces `internal` exactly. The exact
// preimage sits within a few ulps of `estimate` whenever `internal` came
// from a parse; otherwise the estimate itself is written.
template <typename ToInternal>
std::string external_text(double internal, double estimate, ToInternal to_internal) {
  auto find_preimage = [&]() {
    double up = estimate;
    double down = estimate;
    for (int step = 0; step <= 64; ++step) {
      if (to_internal(up) == internal) return up;
      if (to_internal(down) == internal) return down;
      up = std::nextafter(up, INFINITY);
      down = std::nextafter(down, -INFINITY);
    }
    return estimate;
  };
  const double value = find_preimage();
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    double back = 0.0;
    std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
    if (back == value) break;
  }
  return buf;
}

}  // namespace

std::vector<std::vector<int>> connected_components(const GridCase& grid) {
  const std::size_t m = grid.bus_count();
  std::vector<std::vector<int>> adjacency(m);
  for (const auto& l : grid.lines) {
    adjacency[l.from_bus - 1].push_back(l.to_bus - 1);
    adjacency[l.to_bus - 1].push_back(l.from_bus - 1);
  }
  std::vector<int> label(m, -1);
  std::vector<std::vector<int>> components;
  for (std::size_t start = 0; start < m; ++start) {
    if (label[start] >= 0) continue;
    const int c = static_cast<int>(components.size());
    components.emplace_back();
    std::queue<int> frontier;
    frontier.push(static_cast<int>(start));
    label[start] = c;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      components[c].push_back(v + 1);
      for (int w : adjacency[v]) {
        if (label[w] < 0) {
          label[w] = c;
          frontier.push(w);
        }
      }
    }
    std::sort(components[c].begin(), components[c].end());
  }
  return components;
}

void validate_case(const GridCase& grid) {
  if (!(grid.base_mva > 0.0)) throw CaseError("base MVA must be positive");
  if (grid.buses.empty()) throw CaseError("case has no buses");
  const int m = static_cast<int>(grid.bus_count());
  for (int i = 0; i < m; ++i) {
    if (grid.buses[i].id != i + 1) throw CaseError("bus ids are not contiguous 1..m");
    if (grid.buses[i].load < 0.0) throw CaseError("bus " + std::to_string(grid.buses[i].original_id) + " has negative load");
  }
  for (std::size_t k = 0; k < grid.lines.size(); ++k) {
    const auto& l = grid.lines[k];
    const std::string name = "line " + std::to_string(k + 1);
    if (l.from_bus < 1 || l.from_bus > m || l.to_bus < 1 || l.to_bus > m)
      throw CaseError(name + " references an undefined bus");
    if (l.from_bus == l.to_bus) throw CaseError(name + " connects a bus to itself");
    if (!(l.reactance > 0.0)) throw CaseError(name + " has nonpositive reactance");
    if (!(l.capacity > 0.0)) throw CaseError(name + " has nonpositive capacity");
  }
  if (static_cast<int>(grid.generators.size()) != m) throw CaseError("expected one generator slot per bus");
  for (int i = 0; i < m; ++i) {
    const auto& g = grid.generators[i];
    if (g.bus != i + 1) throw CaseError("generator slots are not aligned with buses");
    if (g.p_min > g.p_max)
      throw CaseError("generator at bus " + std::to_string(grid.buses[i].original_id) + " has p_min > p_max");
    if (g.cost_quadratic < 0.0)
      throw CaseError("generator at bus " + std::to_string(grid.buses[i].original_id) +
                      " has a negative quadratic cost");
  }
  const auto components = connected_components(grid);
  if (components.size() > 1) {
    std::string ids;
    for (int b : components[1]) ids += (ids.empty() ? "" : ",") + std::to_string(grid.buses[b - 1].original_id);
    throw CaseError("network is disconnected: buses {" + ids + "} are islanded from bus " +
                    std::to_string(grid.buses[0].original_id));
  }
  if (grid.total_capacity() < grid.total_load())
    throw CaseError("total generation capacity is below total load");
}

GridCase parse_case(std::string_view text) {
  double base = 100.0;
  std::vector<RawBus> raw_buses;
  std::vector<RawLine> raw_lines;
  std::vector<std::pair<GeneratorRecord, std::size_t>> raw_gens;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const auto& key = f.front();

    if (key == "base") {
      expect_fields(f, 2, 2, line_no);
      base = to_real(f[1], line_no, "base MVA");
      if (!(base > 0.0)) throw CaseError("base MVA must be positive", line_no);
    } else if (key == "bus") {
      expect_fields(f, 3, 4, line_no);
      RawBus b{to_int(f[1], line_no, "bus id"), to_real(f[2], line_no, "load"), false, line_no};
      if (f.size() == 4) {
        if (f[3] != "uncertain") throw CaseError("unknown bus flag '" + std::string(f[3]) + "'", line_no);
        b.uncertain = true;
      }
      if (b.load_mw < 0.0) throw CaseError("negative load", line_no);
      raw_buses.push_back(b);
    } else if (key == "line") {
      expect_fields(f, 5, 5, line_no);
      RawLine l{to_int(f[1], line_no, "from bus"), to_int(f[2], line_no, "to bus"),
                to_real(f[3], line_no, "reactance"), to_real(f[4], line_no, "capacity"), line_no};
      if (!(l.x > 0.0)) throw CaseError("nonpositive reactance", line_no);
      if (!(l.cap_mw > 0.0)) throw CaseError("nonpositive line capacity", line_no);
      if (l.from == l.to) throw CaseError("line connects a bus to itself", line_no);
      raw_lines.push_back(l);
    } else if (key == "gen") {
      expect_fields(f, 7, 7, line_no);
      GeneratorRecord g{to_int(f[1], line_no, "generator bus"), to_real(f[2], line_no, "p_min"),
                        to_real(f[3], line_no, "p_max"),        to_real(f[4], line_no, "c2"),
                        to_real(f[5], line_no, "c1"),           to_real(f[6], line_no, "c0")};
      if (g.p_min_mw > g.p_max_mw) throw CaseError("p_min exceeds p_max", line_no);
      if (g.c2 < 0.0) throw CaseError("negative quadratic cost coefficient", line_no);
      raw_gens.emplace_back(g, line_no);
    } else {
      throw CaseError("unknown record '" + std::string(key) + "'", line_no);
    }
  }

  std::map<int, std::size_t> index;  // original id -> position in sorted order
  for (const auto& b : raw_buses) {
    if (index.contains(b.id)) throw CaseError("duplicate bus " + std::to_string(b.id), b.line_no);
    index[b.id] = 0;
  }
  {
    std::size_t k = 0;
    for (auto& [id, pos_] : index) pos_ = k++;
  }

  GridCase grid;
  grid.base_mva = base;
  grid.buses.resize(raw_buses.size());
  for (const auto& b : raw_buses) {
    const auto k = index.at(b.id);
    grid.buses[k] = Bus{static_cast<int>(k + 1), b.id, b.load_mw / base, b.uncertain};
  }
  auto resolve = [&](int original, std::size_t ln) {
    const auto it = index.find(original);
    if (it == index.end()) throw CaseError("reference to undefined bus " + std::to_string(original), ln);
    return static_cast<int>(it->second + 1);
  };
  for (const auto& l : raw_lines)
    grid.lines.push_back(Line{resolve(l.from, l.line_no), resolve(l.to, l.line_no), l.x, l.cap_mw / base});

  std::vector<std::vector<GeneratorRecord>> per_bus(grid.bus_count());
  for (auto [g, ln] : raw_gens) {
    const int bus = resolve(g.bus, ln);
    g.bus = bus;
    per_bus[bus - 1].push_back(g);
  }
  grid.generators.resize(grid.bus_count());
  for (std::size_t i = 0; i < grid.bus_count(); ++i) {
    const auto agg = aggregate_generators(per_bus[i]);
    auto& g = grid.generators[i];
    g.bus = static_cast<int>(i + 1);
    g.p_min = agg.p_min_mw / base;
    g.p_max = agg.p_max_mw / base;
    g.cost_quadratic = agg.c2 * base * base;
    g.cost_linear = agg.c1 * base;
    g.cost_constant = agg.c0;
  }

  validate_case(grid);
  return grid;
}

GridCase load_case_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CaseError("cannot open case file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

std::string serialize_case(const GridCase& grid) {
  const double base = grid.base_mva;
  auto per_unit = [base](double internal) {
    return external_text(internal, internal * base, [base](double w) { return w / base; });
  };
  auto quadratic = [base](double internal) {
    return external_text(internal, internal / base / base, [base](double w) { return w * base * base; });
  };
  auto linear = [base](double internal) {
    return external_text(internal, internal / base, [base](double w) { return w * base; });
  };
  auto plain = [](double v) { return external_text(v, v, [](double w) { return w; }); };

  std::ostringstream out;
  out << "base " << plain(base) << "\n";
  for (const auto& b : grid.buses)
    out << "bus " << b.original_id << " " << per_unit(b.load) << (b.has_uncertainty ? " uncertain" : "") << "\n";
  for (const auto& l : grid.lines)
    out << "line " << grid.buses[l.from_bus - 1].original_id << " " << grid.buses[l.to_bus - 1].original_id << " "
        << plain(l.reactance) << " " << per_unit(l.capacity) << "\n";
  for (const auto& g : grid.generators) {
    if (g == Generator{g.bus}) continue;
    out << "gen " << grid.buses[g.bus - 1].original_id << " " << per_unit(g.p_min) << " " << per_unit(g.p_max)
        << " " << quadratic(g.cost_quadratic) << " " << linear(g.cost_linear) << " " << plain(g.cost_constant)
        << "\n";
  }
  return out.str();
}

GridCase apply_rts_modifications(const GridCase& grid) {
  GridCase out = grid;
  for (auto& l : out.lines) l.capacity *= 0.70;
  for (auto& g : out.generators) {
    g.p_min = 0.0;
    g.p_max *= 2.0;
  }
  return with_uncertain_buses(std::move(out), {8, 15});
}

GridCase with_uncertain_buses(GridCase grid, const std::vector<int>& bus_ids) {
  for (auto& b : grid.buses) b.has_uncertainty = false;
  for (int id : bus_ids) {
    if (id < 1 || id > static_cast<int>(grid.bus_count()))
      throw CaseError("uncertainty source on undefined bus " + std::to_string(id));
    grid.buses[id - 1].has_uncertainty = true;
  }
  return grid;
}

}  // namespace cctune
