#ifndef C2EDEN_ALGORITHMS_SCHEDULE_HPP
#define C2EDEN_ALGORITHMS_SCHEDULE_HPP

#include <cstdint>
#include <string>

#include "c2eden/error.hpp"

namespace c2eden {

namespace detail {
inline void require_main_round(std::int64_t k, std::int64_t d, const char* what) {
  if (d <= 0) throw Error(std::string(what) + ": d must be positive");
  if (k < d)
    throw Error(std::string(what) + ": k = " + std::to_string(k) + " precedes the first epoch (d = " +
                std::to_string(d) + ")");
}
}  // namespace detail

/// Round whose iterate the active snapshot Hessian was built at.
inline std::int64_t tau(std::int64_t k, std::int64_t d) {
  detail::require_main_round(k, d, "tau");
  return d * (k / d - 1);
}

/// Exponent h(k) of the local gradient bound ||grad f(x_k)|| <= c (1/2)^h(k).
/// With t = k / d and p = k % d: ((1+d)^(t%2) + p) (1+d)^(t/2 - 1).
/// Not monotone for d > 1: the last round of an odd epoch t = 2s+1 gives
/// 2d (1+d)^(s-1), the first round of the next epoch gives (1+d)^s.
inline double h_exponent(std::int64_t k, std::int64_t d) {
  detail::require_main_round(k, d, "h_exponent");
  const std::int64_t t = k / d;
  const std::int64_t p = k % d;
  const double base = 1.0 + static_cast<double>(d);
  const double lead = (t % 2 == 1 ? base : 1.0) + static_cast<double>(p);
  const std::int64_t e = t / 2 - 1;
  if (e < 0) return lead / base;
  // Repeated products keep base * base^(e-1) == base^e bit for bit.
  double power = 1.0;
  for (std::int64_t i = 0; i < e; ++i) power *= base;
  return lead * power;
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_SCHEDULE_HPP
