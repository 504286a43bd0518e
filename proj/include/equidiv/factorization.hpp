#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "equidiv/natural.hpp"

namespace equidiv {

struct PrimeFactor {
  Natural prime;
  std::uint32_t exponent = 1;

  friend bool operator==(const PrimeFactor&, const PrimeFactor&) = default;
};

/// Prime factorization with strictly increasing primes and exponents >= 1.
/// The empty factorization represents 1.
struct Factorization {
  std::vector<PrimeFactor> factors;

  Natural value() const;

  /// Merges (p, e) into the factorization, keeping primes sorted.
  void multiply(const Natural& p, std::uint32_t e);

  /// Structural validation: ascending primes, exponents >= 1, primes >= 2.
  /// Does not test primality. Throws Error(schema_violation) on failure.
  void validate() const;

  friend bool operator==(const Factorization&, const Factorization&) = default;
};

/// Number of divisors from a factorization: product of (exponent + 1).
std::uint64_t tau_of(const Factorization& f);

/// JSON form: [{"p": "<decimal>", "e": <int>}, ...] sorted by p ascending.
void to_json(nlohmann::json& j, const Factorization& f);
void from_json(const nlohmann::json& j, Factorization& f);

}  // namespace equidiv
