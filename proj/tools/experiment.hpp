#ifndef C2EDEN_TOOLS_EXPERIMENT_HPP
#define C2EDEN_TOOLS_EXPERIMENT_HPP

// Experiment configuration for the c2eden CLI. See configs/README.md for the
// schema.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "c2eden.hpp"
#include "json.hpp"

namespace c2eden::cli {

using json = nlohmann::ordered_json;

/// Bad configuration or command line; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct MethodSpec {
  Method method = Method::C2EDEN;
  std::vector<double> M;
  std::vector<double> eta;
  std::vector<double> beta;
  double newton_switch_grad = 0.0;
  std::uint32_t warmup_gd_steps = 20;
};

struct Transport {
  TransportKind kind = TransportKind::InProcess;
  std::uint16_t port = 0;
};

struct ExperimentConfig {
  std::string dataset;
  std::uint32_t dim = 0;  // minimum feature dimension; 0 takes the file's
  Regularizer regularizer = Regularizer::L2;
  double lambda = kDefaultLambda;
  std::uint32_t n = 1;
  std::uint64_t seed = 1;
  std::uint32_t K = 100;
  double grad_tol = 1e-12;
  Transport transport;
  std::string output = "runs";
  bool record_curvature = false;
  bool record_wall = false;
  double gamma_M = 0.0;
  std::vector<MethodSpec> methods;
};

inline Transport parse_transport(const std::string& s) {
  if (s == "inproc") return {};
  if (s == "tcp") return {TransportKind::Tcp, 0};
  if (s.rfind("tcp:", 0) == 0) {
    const std::string p = s.substr(4);
    char* end = nullptr;
    const unsigned long v = std::strtoul(p.c_str(), &end, 10);
    if (p.empty() || *end != '\0' || v > 65535) throw UsageError("bad transport port in '" + s + "'");
    return {TransportKind::Tcp, static_cast<std::uint16_t>(v)};
  }
  throw UsageError("unknown transport '" + s + "' (expected inproc, tcp or tcp:PORT)");
}

inline std::string to_string(const Transport& t) {
  if (t.kind == TransportKind::InProcess) return "inproc";
  return t.port == 0 ? "tcp" : "tcp:" + std::to_string(t.port);
}

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* a : keys) known = known || k == a;
    if (!known) throw UsageError(where + ": unknown key '" + k + "'");
  }
}

inline double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw UsageError(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

inline std::uint64_t count(const json& j, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned()) throw UsageError(where + ": '" + key + "' must be a non-negative integer");
  return j[key].get<std::uint64_t>();
}

inline std::vector<double> grid(const json& j, const char* key, std::vector<double> fallback,
                                const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& g = j[key];
  std::vector<double> out;
  if (g.is_number()) {
    out.push_back(g.get<double>());
  } else if (g.is_array()) {
    for (const auto& v : g) {
      if (!v.is_number()) throw UsageError(where + ": '" + key + "' entries must be numbers");
      out.push_back(v.get<double>());
    }
  } else {
    throw UsageError(where + ": '" + key + "' must be a number or a list of numbers");
  }
  if (out.empty()) throw UsageError(where + ": '" + key + "' grid is empty");
  return out;
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

}  // namespace detail

inline MethodSpec parse_method(const json& j, std::size_t index) {
  const std::string where = "methods[" + std::to_string(index) + "]";
  if (!j.is_object() || !j.contains("method") || !j["method"].is_string())
    throw UsageError(where + ": expected an object with a \"method\" string");
  MethodSpec m;
  try {
    m.method = method_from_string(j["method"].get<std::string>());
  } catch (const Error& e) {
    throw UsageError(where + ": " + e.what());
  }
  const std::vector<double> default_eta{1e-1, 1e-2, 1e-3}, default_M{1.0, 10.0, 100.0}, default_beta{0.9, 0.99, 0.999};
  using detail::require;
  switch (m.method) {
    case Method::C2EDEN:
      detail::only_keys(j, {"method", "M", "newton_switch_grad"}, where);
      m.M = detail::grid(j, "M", default_M, where);
      m.newton_switch_grad = detail::number(j, "newton_switch_grad", 0.0, where);
      for (double v : m.M) require(v > 0.0 && std::isfinite(v), where + ": M must be positive (use c2eden_newton)");
      require(m.newton_switch_grad >= 0.0, where + ": newton_switch_grad must be >= 0");
      break;
    case Method::NewtonC2EDEN:
      detail::only_keys(j, {"method"}, where);
      m.M = {0.0};
      break;
    case Method::GD:
      detail::only_keys(j, {"method", "eta"}, where);
      m.eta = detail::grid(j, "eta", default_eta, where);
      break;
    case Method::AGD:
      detail::only_keys(j, {"method", "eta", "beta"}, where);
      m.eta = detail::grid(j, "eta", default_eta, where);
      m.beta = detail::grid(j, "beta", default_beta, where);
      for (double b : m.beta) require(b >= 0.0 && b < 1.0, where + ": beta must lie in [0, 1)");
      break;
    case Method::GIANT:
      detail::only_keys(j, {"method", "eta", "warmup_gd_steps"}, where);
      m.eta = detail::grid(j, "eta", default_eta, where);
      m.warmup_gd_steps = static_cast<std::uint32_t>(detail::count(j, "warmup_gd_steps", 20, where));
      break;
    case Method::LCRN:
      detail::only_keys(j, {"method", "M"}, where);
      m.M = detail::grid(j, "M", default_M, where);
      for (double v : m.M) require(v > 0.0 && std::isfinite(v), where + ": M must be positive");
      break;
  }
  for (double e : m.eta) require(e > 0.0 && std::isfinite(e), where + ": eta must be positive");
  return m;
}

inline ExperimentConfig parse_config(const json& j) {
  using detail::require;
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  detail::only_keys(j,
                    {"dataset", "dim", "regularizer", "lambda", "n", "seed", "K", "grad_tol", "transport", "output",
                     "record_curvature", "record_wall", "gamma_M", "methods"},
                    "config");
  ExperimentConfig c;
  require(j.contains("dataset") && j["dataset"].is_string(), "config: 'dataset' path is required");
  c.dataset = j["dataset"].get<std::string>();
  c.dim = static_cast<std::uint32_t>(detail::count(j, "dim", 0, "config"));
  if (j.contains("regularizer")) {
    require(j["regularizer"].is_string(), "config: 'regularizer' must be a string");
    try {
      c.regularizer = regularizer_from_string(j["regularizer"].get<std::string>());
    } catch (const Error& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  }
  c.lambda = detail::number(j, "lambda", kDefaultLambda, "config");
  require(c.lambda >= 0.0 && std::isfinite(c.lambda), "config: lambda must be finite and >= 0");
  c.n = static_cast<std::uint32_t>(detail::count(j, "n", 1, "config"));
  require(c.n >= 1, "config: n must be at least 1");
  c.seed = detail::count(j, "seed", 1, "config");
  c.K = static_cast<std::uint32_t>(detail::count(j, "K", 100, "config"));
  require(c.K >= 1, "config: K must be at least 1");
  c.grad_tol = detail::number(j, "grad_tol", 1e-12, "config");
  require(c.grad_tol >= 0.0, "config: grad_tol must be >= 0");
  if (j.contains("transport")) {
    require(j["transport"].is_string(), "config: 'transport' must be a string");
    c.transport = parse_transport(j["transport"].get<std::string>());
  }
  if (j.contains("output")) {
    require(j["output"].is_string(), "config: 'output' must be a string");
    c.output = j["output"].get<std::string>();
  }
  for (const char* key : {"record_curvature", "record_wall"})
    if (j.contains(key)) require(j[key].is_boolean(), std::string("config: '") + key + "' must be true or false");
  c.record_curvature = j.value("record_curvature", false);
  c.record_wall = j.value("record_wall", false);
  c.gamma_M = detail::number(j, "gamma_M", 0.0, "config");
  require(c.gamma_M >= 0.0, "config: gamma_M must be >= 0");
  if (j.contains("methods")) {
    require(j["methods"].is_array(), "config: 'methods' must be a list");
    for (std::size_t i = 0; i < j["methods"].size(); ++i) c.methods.push_back(parse_method(j["methods"][i], i));
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

inline json method_json(const MethodSpec& m) {
  json j;
  j["method"] = std::string(to_string(m.method));
  switch (m.method) {
    case Method::C2EDEN:
      j["M"] = m.M;
      j["newton_switch_grad"] = m.newton_switch_grad;
      break;
    case Method::NewtonC2EDEN: break;
    case Method::GD: j["eta"] = m.eta; break;
    case Method::AGD:
      j["eta"] = m.eta;
      j["beta"] = m.beta;
      break;
    case Method::GIANT:
      j["eta"] = m.eta;
      j["warmup_gd_steps"] = m.warmup_gd_steps;
      break;
    case Method::LCRN: j["M"] = m.M; break;
  }
  return j;
}

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["dim"] = c.dim;
  j["regularizer"] = std::string(to_string(c.regularizer));
  j["lambda"] = c.lambda;
  j["n"] = c.n;
  j["seed"] = c.seed;
  j["K"] = c.K;
  j["grad_tol"] = c.grad_tol;
  j["transport"] = to_string(c.transport);
  j["output"] = c.output;
  j["record_curvature"] = c.record_curvature;
  j["record_wall"] = c.record_wall;
  j["gamma_M"] = c.gamma_M;
  j["methods"] = json::array();
  for (const auto& m : c.methods) j["methods"].push_back(method_json(m));
  return j;
}

inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct GridPoint {
  std::string label;  // file stem, e.g. "agd_eta0.1_beta0.9"
  RunConfig run;
  json params;
};

inline std::vector<GridPoint> expand(const ExperimentConfig& c, const MethodSpec& m) {
  RunConfig base;
  base.method = m.method;
  base.K = c.K;
  base.grad_tol = c.grad_tol;
  base.seed = c.seed;
  base.transport = c.transport.kind;
  base.port = c.transport.port;
  base.record_curvature = c.record_curvature;
  base.record_wall = c.record_wall;
  base.gamma_M = c.gamma_M;
  const std::string name(to_string(m.method));
  std::vector<GridPoint> out;
  switch (m.method) {
    case Method::C2EDEN:
    case Method::LCRN:
      for (double M : m.M) {
        GridPoint p{name + "_M" + short_num(M), base, json{{"M", M}}};
        p.run.M = M;
        if (m.method == Method::C2EDEN) {
          p.run.newton_switch_grad = m.newton_switch_grad;
          p.params["newton_switch_grad"] = m.newton_switch_grad;
        }
        out.push_back(std::move(p));
      }
      break;
    case Method::NewtonC2EDEN: {
      GridPoint p{name, base, json::object()};
      p.run.M = 0.0;
      out.push_back(std::move(p));
      break;
    }
    case Method::GD:
    case Method::GIANT:
      for (double eta : m.eta) {
        GridPoint p{name + "_eta" + short_num(eta), base, json{{"eta", eta}}};
        p.run.eta = eta;
        if (m.method == Method::GIANT) {
          p.run.warmup_gd_steps = m.warmup_gd_steps;
          p.params["warmup_gd_steps"] = m.warmup_gd_steps;
        }
        out.push_back(std::move(p));
      }
      break;
    case Method::AGD:
      for (double eta : m.eta)
        for (double beta : m.beta) {
          GridPoint p{name + "_eta" + short_num(eta) + "_beta" + short_num(beta), base,
                      json{{"eta", eta}, {"beta", beta}}};
          p.run.eta = eta;
          p.run.beta = beta;
          out.push_back(std::move(p));
        }
      break;
  }
  return out;
}

/// FNV-1a over the raw file bytes; identifies the dataset in sidecars.
inline std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open dataset '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[20];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace c2eden::cli

#endif  // C2EDEN_TOOLS_EXPERIMENT_HPP
