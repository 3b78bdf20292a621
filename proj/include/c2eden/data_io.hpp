#ifndef C2EDEN_DATA_IO_HPP
#define C2EDEN_DATA_IO_HPP

// LIBSVM text ingestion and deterministic partitioning across clients.
//
// Partitioning shuffles sample indices with SplitMix64 and deals them
// round-robin. The generator and the bounded draw are fully specified here so
// another implementation can reproduce the shards bit for bit:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Fisher-Yates runs i = N-1 down to 1. The swap partner j is uniform on
// [0, i]: with bound = i + 1, draws below (2^64 - bound) mod bound are
// rejected and j = draw mod bound. Position p of the shuffled order goes to
// client p mod n, keeping shuffled order within each shard.

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/rng.hpp"

namespace c2eden {

struct SparseEntry {
  std::uint32_t index;  // zero-based column
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

using SparseRow = std::vector<SparseEntry>;

struct Dataset {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  std::uint32_t d = 0;

  std::size_t samples() const noexcept { return rows.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace detail

/// Parses "label idx:val idx:val ..." lines. Indices in the file are
/// 1-based and strictly increasing. d is the largest index seen, or
/// `min_dim` if that is larger; it is at least 1.
inline Dataset parse_libsvm(std::istream& in, std::uint32_t min_dim = 0) {
  Dataset ds;
  std::uint32_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest(line);
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < rest.size()) {
      while (pos < rest.size() && detail::is_space(rest[pos])) ++pos;
      std::size_t end = pos;
      while (end < rest.size() && !detail::is_space(rest[end])) ++end;
      if (end > pos) tokens.push_back(rest.substr(pos, end - pos));
      pos = end;
    }
    if (tokens.empty()) continue;

    double label = 0.0;
    if (!detail::parse_double(tokens[0], label) || !std::isfinite(label))
      throw ParseError(lineno, "bad label '" + std::string(tokens[0]) + "'");

    SparseRow row;
    row.reserve(tokens.size() - 1);
    std::uint64_t prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError(lineno, "malformed feature token '" + std::string(tok) + "'");
      std::uint64_t idx = 0;
      auto [iptr, iec] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (iec != std::errc() || iptr != tok.data() + colon || idx == 0 || idx > 0xFFFFFFFFull)
        throw ParseError(lineno, "bad feature index in '" + std::string(tok) + "'");
      if (idx <= prev)
        throw ParseError(lineno, "feature indices must be strictly increasing (" +
                                     std::to_string(idx) + " after " + std::to_string(prev) + ")");
      double v = 0.0;
      if (!detail::parse_double(tok.substr(colon + 1), v) || !std::isfinite(v))
        throw ParseError(lineno, "non-numeric feature value in '" + std::string(tok) + "'");
      prev = idx;
      row.push_back({static_cast<std::uint32_t>(idx - 1), v});
    }
    if (prev > max_index) max_index = static_cast<std::uint32_t>(prev);
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  ds.d = std::max({max_index, min_dim, std::uint32_t{1}});
  return ds;
}

inline Dataset parse_libsvm(std::string_view text, std::uint32_t min_dim = 0) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, min_dim);
}

/// Writes a dataset back out; doubles are printed with 17 significant
/// digits so parse(serialize(ds)) == ds.
inline void write_libsvm(std::ostream& out, const Dataset& ds) {
  char buf[64];
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.labels[r]);
    out << buf;
    for (const auto& e : ds.rows[r]) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", e.index + 1, e.value);
      out << buf;
    }
    out << '\n';
  }
}

inline bool has_gzip_magic(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  unsigned char m[2] = {0, 0};
  f.read(reinterpret_cast<char*>(m), 2);
  return f.gcount() == 2 && m[0] == 0x1f && m[1] == 0x8b;
}

/// Reads a plain or gzip-compressed LIBSVM file.
inline Dataset load_libsvm_file(const std::string& path, std::uint32_t min_dim = 0) {
  {
    std::ifstream probe(path);
    if (!probe) throw Error("cannot open dataset '" + path + "'");
  }
  if (!has_gzip_magic(path)) {
    std::ifstream in(path);
    return parse_libsvm(in, min_dim);
  }
  gzFile gz = gzopen(path.c_str(), "rb");
  if (gz == nullptr) throw Error("cannot open gzip dataset '" + path + "'");
  std::string text;
  char buf[1 << 16];
  int got = 0;
  while ((got = gzread(gz, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(got));
  const bool failed = got < 0;
  gzclose(gz);
  if (failed) throw Error("gzip decompression failed for '" + path + "'");
  return parse_libsvm(text, min_dim);
}

/// Maps the larger of two raw label values to +1 and the smaller to -1.
/// A single-class dataset is accepted only if it is already +/-1.
inline Dataset normalize_labels(Dataset ds) {
  std::vector<double> distinct;
  for (double l : ds.labels) {
    if (std::find(distinct.begin(), distinct.end(), l) == distinct.end()) distinct.push_back(l);
    if (distinct.size() > 2)
      throw Error("normalize_labels: more than two distinct labels");
  }
  if (distinct.empty()) return ds;
  if (distinct.size() == 1) {
    if (distinct[0] != 1.0 && distinct[0] != -1.0)
      throw Error("normalize_labels: single label class that is not +/-1");
    return ds;
  }
  const double hi = std::max(distinct[0], distinct[1]);
  for (double& l : ds.labels) l = (l == hi) ? 1.0 : -1.0;
  return ds;
}

struct PartitionPlan {
  std::uint32_t n = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> order;       // shuffled sample indices
  std::vector<std::uint32_t> assignment;  // sample -> client

  /// Sample indices owned by `client`, in dealing order.
  std::vector<std::uint32_t> members(std::uint32_t client) const {
    std::vector<std::uint32_t> out;
    for (std::size_t p = client; p < order.size(); p += n) out.push_back(order[p]);
    return out;
  }
};

inline PartitionPlan make_partition_plan(std::size_t samples, std::uint32_t n, std::uint64_t seed) {
  if (n < 1) throw Error("partition: need at least one client");
  if (n > samples)
    throw Error("partition: " + std::to_string(n) + " clients but only " + std::to_string(samples) +
                " samples");
  PartitionPlan plan;
  plan.n = n;
  plan.seed = seed;
  plan.order.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) plan.order[i] = static_cast<std::uint32_t>(i);
  SplitMix64 rng(seed);
  for (std::size_t i = samples - 1; i >= 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(plan.order[i], plan.order[j]);
  }
  plan.assignment.resize(samples);
  for (std::size_t p = 0; p < samples; ++p) plan.assignment[plan.order[p]] = static_cast<std::uint32_t>(p % n);
  return plan;
}

/// Densifies the given rows of `ds` into a shard.
inline ClientShard make_shard(const Dataset& ds, const std::vector<std::uint32_t>& rows, double lambda,
                              Regularizer reg) {
  FeatureMatrix a = FeatureMatrix::Zero(static_cast<Index>(rows.size()), ds.d);
  Vec b(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& e : ds.rows[rows[r]]) {
      if (e.index >= ds.d) throw Error("make_shard: feature index beyond dataset dimension");
      a(static_cast<Index>(r), e.index) = e.value;
    }
    b[static_cast<Index>(r)] = ds.labels[rows[r]];
  }
  return ClientShard(std::move(a), std::move(b), lambda, reg);
}

inline std::vector<ClientShard> partition(const Dataset& ds, std::uint32_t n, std::uint64_t seed,
                                          double lambda = kDefaultLambda,
                                          Regularizer reg = Regularizer::L2) {
  const PartitionPlan plan = make_partition_plan(ds.samples(), n, seed);
  std::vector<ClientShard> shards;
  shards.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) shards.push_back(make_shard(ds, plan.members(i), lambda, reg));
  return shards;
}

}  // namespace c2eden

#endif  // C2EDEN_DATA_IO_HPP
