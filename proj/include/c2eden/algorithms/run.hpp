#ifndef C2EDEN_ALGORITHMS_RUN_HPP
#define C2EDEN_ALGORITHMS_RUN_HPP

#include <span>

#include "c2eden/algorithms/baselines.hpp"
#include "c2eden/algorithms/c2eden_run.hpp"
#include "c2eden/algorithms/trace.hpp"

namespace c2eden {

inline IterationTrace run_method(const RunConfig& cfg, std::span<const ClientShard> shards,
                                 ClientLauncher launcher = {}) {
  switch (cfg.method) {
    case Method::C2EDEN:
    case Method::NewtonC2EDEN: return run_c2eden(cfg, shards, nullptr, std::move(launcher));
    case Method::GD: return run_gd(cfg, shards);
    case Method::AGD: return run_agd(cfg, shards);
    case Method::GIANT: return run_giant(cfg, shards);
    case Method::LCRN: return run_lcrn(cfg, shards);
  }
  throw Error("run_method: unknown method");
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_RUN_HPP
