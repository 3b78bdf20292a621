// c2eden: experiment runner.
//
//   c2eden run <config.json>     one trace per (method, grid point)
//   c2eden compare <dir>         rounds/scalars to gradient thresholds, gaps to f-hat
//   c2eden check [config.json]   invariant battery
//
// Exit codes: 0 ok, 1 failed run or invariant, 2 usage/config/input error.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "c2eden.hpp"
#include "c2eden/invariants.hpp"
#include "experiment.hpp"

namespace fs = std::filesystem;
using namespace c2eden;
using namespace c2eden::cli;

namespace {

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void symlink_atomic(const std::string& target, const fs::path& link) {
  const fs::path tmp = link.string() + ".tmp." + std::to_string(::getpid());
  fs::remove(tmp);
  fs::create_symlink(target, tmp);
  fs::rename(tmp, link);
}

// TCP clients as forked processes; each serves the shard matching the id it
// is assigned at Start.
ClientLauncher fork_launcher(std::span<const ClientShard> shards) {
  return [shards](std::uint16_t port) -> std::function<void()> {
    std::vector<pid_t> pids;
    std::fflush(nullptr);
    for (std::size_t i = 0; i < shards.size(); ++i) {
      const pid_t pid = ::fork();
      if (pid < 0) throw Error("fork failed while starting TCP clients");
      if (pid == 0) {
        int code = 0;
        try {
          protocol::run_tcp_client("127.0.0.1", port, [&](protocol::ClientId id) -> const ClientShard& {
            if (id >= shards.size()) throw Error("assigned client id out of range");
            return shards[id];
          });
        } catch (const std::exception& e) {
          std::fprintf(stderr, "tcp client: %s\n", e.what());
          code = 1;
        }
        std::fflush(stderr);
        ::_exit(code);
      }
      pids.push_back(pid);
    }
    return [pids] {
      int failed = 0;
      for (pid_t p : pids) {
        int status = 0;
        while (::waitpid(p, &status, 0) < 0 && errno == EINTR) {
        }
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failed;
      }
      if (failed) throw Error(std::to_string(failed) + " TCP client process(es) failed");
    };
  };
}

struct LoadedData {
  Dataset ds;
  std::string fingerprint;
};

LoadedData load_dataset(const ExperimentConfig& c) {
  LoadedData out;
  out.fingerprint = file_fingerprint(c.dataset);
  try {
    out.ds = normalize_labels(load_libsvm_file(c.dataset, c.dim));
  } catch (const ParseError& e) {
    throw UsageError("dataset '" + c.dataset + "': " + e.what());
  } catch (const Error& e) {
    throw UsageError("dataset '" + c.dataset + "': " + e.what());
  }
  if (out.ds.samples() == 0) throw UsageError("dataset '" + c.dataset + "' has no samples");
  return out;
}

json dataset_json(const ExperimentConfig& c, const LoadedData& data) {
  std::size_t pos = 0;
  for (double l : data.ds.labels) pos += l > 0;
  return json{{"path", c.dataset},
              {"fingerprint", data.fingerprint},
              {"samples", data.ds.samples()},
              {"d", data.ds.d},
              {"positives", pos},
              {"negatives", data.ds.samples() - pos},
              {"regularizer", std::string(to_string(c.regularizer))},
              {"lambda", c.lambda},
              {"n", c.n},
              {"partition_seed", c.seed}};
}

void apply_overrides(ExperimentConfig& c, const std::string& transport, const std::optional<std::uint64_t>& seed,
                     const std::string& out) {
  if (!transport.empty()) c.transport = parse_transport(transport);
  if (seed) c.seed = *seed;
  if (!out.empty()) c.output = out;
}

std::string g17(double v) { return format_double(v); }

// ----------------------------------------------------------------- run

struct Finished {
  std::string label;
  Method method;
  std::optional<std::int64_t> rounds_to_tol;
  double final_grad = 0.0;
  bool ok = false;
};

// Fewest rounds to grad_tol; ties and runs that never reach it fall back to
// the smallest final gradient norm.
bool better(const Finished& a, const Finished& b) {
  if (a.rounds_to_tol != b.rounds_to_tol) {
    if (!a.rounds_to_tol) return false;
    if (!b.rounds_to_tol) return true;
    return *a.rounds_to_tol < *b.rounds_to_tol;
  }
  const double fa = std::isfinite(a.final_grad) ? a.final_grad : INFINITY;
  const double fb = std::isfinite(b.final_grad) ? b.final_grad : INFINITY;
  return fa < fb;
}

int cmd_run(ExperimentConfig c) {
  if (c.methods.empty()) throw UsageError("config: 'methods' is empty; nothing to run");
  const LoadedData data = load_dataset(c);
  const auto shards = partition(data.ds, c.n, c.seed, c.lambda, c.regularizer);
  const fs::path dir(c.output);
  fs::create_directories(dir);
  write_atomic(dir / "run.json", to_json(c).dump(2) + "\n");
  const json ds_json = dataset_json(c, data);

  std::vector<Finished> done;
  bool any_failed = false;
  for (const auto& spec : c.methods) {
    for (const auto& point : expand(c, spec)) {
      Finished f{point.label, spec.method, {}, 0.0, false};
      json side{{"trace", point.label + ".csv"},
                {"method", std::string(to_string(spec.method))},
                {"params", point.params},
                {"K", c.K},
                {"grad_tol", c.grad_tol},
                {"seed", c.seed},
                {"transport", spec.method == Method::C2EDEN || spec.method == Method::NewtonC2EDEN
                                  ? to_string(c.transport)
                                  : std::string("simulated")},
                {"dataset", ds_json}};
      try {
        const IterationTrace t = run_method(point.run, shards, fork_launcher(shards));
        write_atomic(dir / (point.label + ".csv"), trace_csv(t));
        f.rounds_to_tol = t.rounds_to(c.grad_tol);
        f.final_grad = t.rows.back().grad_norm;
        f.ok = true;
        side["result"] = json{{"last_round", t.rows.back().k},
                              {"final_f", t.rows.back().f},
                              {"final_grad_norm", t.rows.back().grad_norm},
                              {"rounds_to_grad_tol", f.rounds_to_tol ? json(*f.rounds_to_tol) : json(nullptr)},
                              {"stopped_early", t.stopped_early},
                              {"divergent", t.divergent},
                              {"up_scalars", t.ledger.total().up_scalars},
                              {"down_scalars", t.ledger.total().down_scalars},
                              {"setup_down_scalars", t.ledger.setup().down_scalars}};
        std::printf("%-32s rounds %-6lld ||grad|| %-12.4e%s\n", point.label.c_str(),
                    static_cast<long long>(t.rows.back().k), t.rows.back().grad_norm,
                    t.divergent ? "  (diverged)" : "");
      } catch (const Error& e) {
        any_failed = true;
        side["error"] = e.what();
        std::fprintf(stderr, "error: %s: %s\n", point.label.c_str(), e.what());
      }
      write_atomic(dir / (point.label + ".json"), side.dump(2) + "\n");
      done.push_back(f);
    }
  }

  json best = json::object();
  for (const auto& spec : c.methods) {
    const Finished* pick = nullptr;
    for (const auto& f : done)
      if (f.ok && f.method == spec.method && (!pick || better(f, *pick))) pick = &f;
    if (!pick) continue;
    const std::string name(to_string(spec.method));
    symlink_atomic(pick->label + ".csv", dir / (name + "_best.csv"));
    best[name] = pick->label;
    std::printf("best %-12s %s\n", name.c_str(), pick->label.c_str());
  }
  write_atomic(dir / "best.json", best.dump(2) + "\n");
  return any_failed ? 1 : 0;
}

// ------------------------------------------------------------- compare

struct LoadedTrace {
  std::string name;
  std::string method;
  std::vector<TraceRow> rows;
  json dataset;
};

int cmd_compare(const fs::path& dir, const std::string& out_dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: '" + dir.string() + "'");
  std::vector<fs::path> sidecars;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json" && e.is_regular_file()) sidecars.push_back(e.path());
  std::sort(sidecars.begin(), sidecars.end());

  std::vector<LoadedTrace> traces;
  for (const auto& p : sidecars) {
    std::ifstream in(p);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError(p.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("trace") || j.contains("error")) continue;
    const fs::path csv = dir / j["trace"].get<std::string>();
    std::ifstream cin(csv);
    if (!cin) throw UsageError("missing trace file '" + csv.string() + "'");
    LoadedTrace t;
    t.name = csv.stem().string();
    t.method = j.value("method", "?");
    try {
      t.rows = read_trace_csv(cin);
    } catch (const ParseError& e) {
      throw UsageError(csv.string() + ": " + e.what());
    }
    t.dataset = j.value("dataset", json::object());
    if (!t.rows.empty()) traces.push_back(std::move(t));
  }
  if (traces.empty()) throw UsageError("no traces found in '" + dir.string() + "'");

  // Gaps against a common f-hat only make sense for one objective.
  const auto key = [](const json& d) {
    return d.value("fingerprint", std::string()) + "|" + d.value("regularizer", std::string()) + "|" +
           (d.contains("lambda") ? format_double(d["lambda"].get<double>()) : std::string());
  };
  for (const auto& t : traces)
    if (key(t.dataset) != key(traces.front().dataset))
      throw UsageError("mixed datasets or objectives in one bundle: '" + t.name + "' differs from '" +
                       traces.front().name + "'");

  double f_hat = INFINITY;
  for (const auto& t : traces)
    for (const auto& r : t.rows)
      if (std::isfinite(r.f)) f_hat = std::min(f_hat, r.f);

  const std::vector<double> thresholds{1e-2, 1e-4, 1e-6};
  std::ostringstream csv, gaps;
  csv << "trace,method,rows,final_grad_norm,final_gap";
  for (double th : thresholds) csv << ",rounds_to_" << short_num(th);
  for (double th : thresholds) csv << ",scalars_to_" << short_num(th);
  csv << '\n';
  gaps << "trace,k,f_gap,grad_norm,up_scalars,down_scalars\n";

  std::printf("f_hat = %s over %zu traces\n", g17(f_hat).c_str(), traces.size());
  std::printf("%-32s %-14s %-12s", "trace", "method", "final_gap");
  for (double th : thresholds) std::printf(" rounds@%-7s", short_num(th).c_str());
  for (double th : thresholds) std::printf(" scalars@%-8s", short_num(th).c_str());
  std::printf("\n");

  for (const auto& t : traces) {
    const TraceRow& last = t.rows.back();
    csv << t.name << ',' << t.method << ',' << t.rows.size() << ',' << g17(last.grad_norm) << ','
        << g17(last.f - f_hat);
    std::printf("%-32s %-14s %-12.4e", t.name.c_str(), t.method.c_str(), last.f - f_hat);
    std::vector<std::string> rounds, scalars;
    for (double th : thresholds) {
      const auto it = std::find_if(t.rows.begin(), t.rows.end(), [&](const TraceRow& r) { return r.grad_norm <= th; });
      rounds.push_back(it == t.rows.end() ? "" : std::to_string(it->k));
      scalars.push_back(it == t.rows.end() ? "" : std::to_string(it->up_scalars + it->down_scalars));
    }
    for (const auto& r : rounds) {
      csv << ',' << r;
      std::printf(" %-14s", r.empty() ? "-" : r.c_str());
    }
    for (const auto& s : scalars) {
      csv << ',' << s;
      std::printf(" %-16s", s.empty() ? "-" : s.c_str());
    }
    csv << '\n';
    std::printf("\n");
    for (const auto& r : t.rows)
      gaps << t.name << ',' << r.k << ',' << g17(r.f - f_hat) << ',' << g17(r.grad_norm) << ',' << r.up_scalars
           << ',' << r.down_scalars << '\n';
  }

  const fs::path out = out_dir.empty() ? dir : fs::path(out_dir);
  fs::create_directories(out);
  write_atomic(out / "summary.csv", csv.str());
  write_atomic(out / "gaps.csv", gaps.str());
  std::printf("wrote %s and %s\n", (out / "summary.csv").c_str(), (out / "gaps.csv").c_str());
  return 0;
}

// --------------------------------------------------------------- check

int cmd_check(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedData data = load_dataset(c);
  const auto shards = partition(data.ds, c.n, c.seed, c.lambda, c.regularizer);
  const auto d = static_cast<std::uint32_t>(data.ds.d);
  std::printf("dataset %s: %zu samples, d=%u, n=%u, %s lambda=%g\n", c.dataset.c_str(), data.ds.samples(), d, c.n,
              std::string(to_string(c.regularizer)).c_str(), c.lambda);

  int failed = 0;
  auto report = [&](const char* name, const std::function<invariants::Verdict()>& fn) {
    invariants::Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.ok) ++failed;
    std::printf("%s %s: %s\n", v.ok ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  };

  const std::uint32_t K = std::max(c.K, 5 * d);
  report("oracles", [&] { return invariants::oracles(shards, 20, c.seed); });
  report("cubic solver", [&] { return invariants::cubic_solver(300, 5, 1e-3, c.seed); });
  report("snapshot staleness", [&] { return invariants::staleness(shards, 5 * d, 1.0); });
  report("ledger law", [&] { return invariants::ledger_law(shards, K, c.transport.kind); });
  report("cross-transport equality", [&] { return invariants::cross_transport(shards, K, 1.0); });
  report("descent inequality (synthetic d=5)", [&] {
    const auto syn = invariants::synthetic_problem(5, 4, 50, 0.5, c.seed);
    return invariants::descent_inequality(syn, invariants::theory_run(syn, 100, c.seed));
  });
  std::printf("%s: %d failed, %.1f s\n", failed ? "FAILED" : "all invariants hold", failed,
              invariants::seconds_since(t0));
  return failed ? 1 : 0;
}

ExperimentConfig default_check_config() {
  ExperimentConfig c;
  c.dataset = "data/toy.libsvm";
  c.n = 4;
  c.lambda = 1e-3;
  c.regularizer = Regularizer::SmoothNonconvex;
  c.K = 60;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C2EDEN experiment runner"};
  app.require_subcommand(1);
  std::string transport, out;
  std::optional<std::uint64_t> seed;
  app.add_option("--transport", transport, "inproc, tcp or tcp:PORT (overrides the config)");
  app.add_option("--seed", seed, "partition and arrival-order seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");

  std::string run_config, compare_dir, check_config;
  auto* run = app.add_subcommand("run", "run every (method, grid point) of a config");
  run->add_option("config", run_config, "experiment config JSON")->required();
  auto* compare = app.add_subcommand("compare", "summarize a directory of traces");
  compare->add_option("dir", compare_dir, "trace directory")->required();
  auto* check = app.add_subcommand("check", "run the invariant battery");
  check->add_option("config", check_config, "config JSON (default: bundled toy dataset)");
  for (auto* sub : {run, compare, check}) {
    sub->add_option("--transport", transport, "inproc, tcp or tcp:PORT");
    sub->add_option("--seed", seed, "partition and arrival-order seed");
    sub->add_option("--out", out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      ExperimentConfig c = load_config(run_config);
      apply_overrides(c, transport, seed, out);
      return cmd_run(c);
    }
    if (*compare) return cmd_compare(compare_dir, out);
    ExperimentConfig c = check_config.empty() ? default_check_config() : load_config(check_config);
    apply_overrides(c, transport, seed, "");
    return cmd_check(c);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
