#pragma once

#include <stdexcept>
#include <string>

namespace equidiv {

enum class Errc {
  bad_decimal,
  non_coprime_moduli,
  modulus_not_prime,
  singular_lift,
  s_not_odd,
  budget_exhausted,
  window_too_large,
  inconsistent_congruences,
  tau_mismatch,
  unknown_modulus_factorization,
  malformed_certificate,
  schema_violation,
  bound_conflict,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace equidiv
