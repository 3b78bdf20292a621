#ifndef C2EDEN_ALGORITHMS_TRACE_HPP
#define C2EDEN_ALGORITHMS_TRACE_HPP

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/numkit.hpp"
#include "c2eden/protocol/ledger.hpp"

namespace c2eden {

enum class Method { C2EDEN, NewtonC2EDEN, GD, AGD, GIANT, LCRN };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::C2EDEN: return "c2eden";
    case Method::NewtonC2EDEN: return "c2eden_newton";
    case Method::GD: return "gd";
    case Method::AGD: return "agd";
    case Method::GIANT: return "giant";
    case Method::LCRN: return "lcrn";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (Method m : {Method::C2EDEN, Method::NewtonC2EDEN, Method::GD, Method::AGD, Method::GIANT, Method::LCRN})
    if (s == to_string(m)) return m;
  throw Error("unknown method '" + std::string(s) +
              "' (expected c2eden, c2eden_newton, gd, agd, giant or lcrn)");
}

enum class TransportKind { InProcess, Tcp };

struct RunConfig {
  Method method = Method::C2EDEN;
  double M = 1.0;
  double eta = 0.1;
  double beta = 0.9;
  std::uint32_t K = 100;
  double grad_tol = 1e-12;
  std::uint64_t seed = 0;  // in-process arrival shuffling
  TransportKind transport = TransportKind::InProcess;
  std::uint16_t port = 0;  // tcp: 0 picks an ephemeral port
  std::uint32_t warmup_gd_steps = 20;  // GIANT
  double newton_switch_grad = 0.0;     // C2EDEN: switch to M = 0 below this gradient norm
  bool record_curvature = false;       // fill gamma and lambda_min columns
  double gamma_M = 0.0;                // M used for the gamma column; 0 means cfg.M
  bool record_wall = false;
  std::optional<Vec> x0;               // default: zero vector
};

struct TraceRow {
  std::int64_t k = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  std::optional<double> gamma;
  std::optional<double> lambda_min;
  std::uint64_t up_scalars = 0;
  std::uint64_t down_scalars = 0;
  std::optional<double> wall_ms;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct IterationTrace {
  std::vector<TraceRow> rows;
  std::vector<Vec> iterates;  // aligned with rows
  bool divergent = false;
  bool stopped_early = false;  // gradient tolerance reached before K
  protocol::CommLedger ledger;

  /// First row index k with grad_norm <= tol.
  std::optional<std::int64_t> rounds_to(double tol) const {
    for (const auto& r : rows)
      if (r.grad_norm <= tol) return r.k;
    return std::nullopt;
  }
};

inline constexpr std::string_view kTraceHeader = "k,f,grad_norm,gamma,lambda_min,up_scalars,down_scalars,wall_ms";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& out, const IterationTrace& t) {
  out << kTraceHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : t.rows) {
    out << r.k << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ',' << opt(r.gamma) << ','
        << opt(r.lambda_min) << ',' << r.up_scalars << ',' << r.down_scalars << ',' << opt(r.wall_ms) << '\n';
  }
}

inline std::string trace_csv(const IterationTrace& t) {
  std::ostringstream os;
  write_trace_csv(os, t);
  return os.str();
}

/// Parses a trace CSV. Only rows are recovered; iterates and the ledger are
/// not part of the file.
inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError(1, "unexpected trace header '" + line + "'");
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw ParseError(lineno, "expected 8 columns, got " + std::to_string(cells.size()));
    auto num = [&](const std::string& c, const char* name) {
      // strtod rather than stod: subnormals round-trip instead of raising ERANGE.
      char* end = nullptr;
      const double v = c.empty() ? 0.0 : std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || std::isspace(static_cast<unsigned char>(c[0])))
        throw ParseError(lineno, std::string("bad ") + name + " '" + c + "'");
      return v;
    };
    auto opt = [&](const std::string& c, const char* name) -> std::optional<double> {
      if (c.empty()) return std::nullopt;
      return num(c, name);
    };
    auto count = [&](const std::string& c, const char* name) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc() || ptr != c.data() + c.size())
        throw ParseError(lineno, std::string("bad ") + name + " '" + c + "'");
      return v;
    };
    TraceRow r;
    r.k = static_cast<std::int64_t>(count(cells[0], "k"));
    r.f = num(cells[1], "f");
    r.grad_norm = num(cells[2], "grad_norm");
    r.gamma = opt(cells[3], "gamma");
    r.lambda_min = opt(cells[4], "lambda_min");
    r.up_scalars = count(cells[5], "up_scalars");
    r.down_scalars = count(cells[6], "down_scalars");
    r.wall_ms = opt(cells[7], "wall_ms");
    if (!rows.empty() && r.k <= rows.back().k) throw ParseError(lineno, "rows are not strictly ordered by k");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_TRACE_HPP
