#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "equidiv/factorization.hpp"
#include "equidiv/natural.hpp"

namespace equidiv {

enum class Primality { prime_deterministic, prime_probabilistic, composite };

struct PrimalityVerdict {
  Primality status = Primality::composite;
  std::optional<Natural> witness;  // a proper factor, when one is known

  bool is_prime() const { return status != Primality::composite; }
};

/// Effort limits for factoring. Wall-clock and iteration limits apply to the
/// Pollard-rho phase; trial division always runs up to its limit.
struct FactorBudget {
  Natural trial_division_limit = 100000;
  std::uint64_t rho_iteration_limit = 20'000'000;
  std::uint64_t wall_clock_ms = 30'000;

  static FactorBudget unbounded();
};

/// Result of factoring: the fully factored part plus, when the budget ran
/// out, the remaining composite cofactor. complete() means cofactor == 1.
struct FactorResult {
  Factorization factors;
  Natural cofactor = 1;
  std::optional<PrimalityVerdict> cofactor_verdict;

  bool complete() const { return cofactor == 1; }
};

/// Primality test. Verdicts below 2^64 are always deterministic. Above,
/// the default is 40 strong-pseudoprime rounds plus a strong Lucas check;
/// deterministic=true runs a Pocklington N-1 proof instead (can be slow).
PrimalityVerdict is_prime(const Natural& n, bool deterministic = false);

/// Trial division up to the budget limit, then Brent-cycle Pollard rho with
/// randomized restarts, recursing on composite cofactors. The seeded overload
/// makes rho restarts reproducible for a given seed.
FactorResult factorize(const Natural& n, const FactorBudget& budget = {});
FactorResult factorize(const Natural& n, const FactorBudget& budget, std::uint64_t seed);

/// Can a number whose factorization is `found` times an unfactored coprime
/// `cofactor` have exactly `target` divisors? `exact` settles it positively;
/// `completed` carries the full factorization when the answer implies one
/// (cofactor 1, prime, or a prime power).
enum class TauFit { impossible, exact, open };
struct TauFeasibility {
  TauFit fit = TauFit::open;
  std::optional<Factorization> completed;
};
TauFeasibility tau_feasible(const Factorization& found, const Natural& cofactor,
                            std::uint64_t target);

/// Divisor count via factorization. Throws Error(budget_exhausted) when the
/// budget does not suffice to finish factoring.
std::uint64_t tau(const Natural& n, const FactorBudget& budget = {});

/// Returns the square root when n is a perfect square.
std::optional<Natural> perfect_square_root(const Natural& n);

struct Congruence {
  Natural remainder;
  Natural modulus;
};

/// Combines congruences with pairwise coprime moduli. Throws
/// Error(non_coprime_moduli) naming the offending pair and their gcd.
Congruence crt_combine(std::span<const Congruence> congruences);

/// All x in [0, p) with x^2 = a (mod p), p an odd prime. Empty set for
/// non-residues. Throws Error(modulus_not_prime).
std::vector<Natural> sqrt_mod_prime(const Natural& a, const Natural& p);

/// Lifts a square root mod p to mod p^e (Newton iteration). Requires
/// root^2 = a (mod p) and p not dividing 2*root, else Error(singular_lift).
Natural hensel_lift_sqrt(const Natural& a, const Natural& p, std::uint32_t e,
                         const Natural& root_mod_p);

/// Complete solution set of x^2 = a (mod p^e), including singular cases
/// (a divisible by p, a = 0) and p = 2. Residues returned sorted.
std::vector<Natural> sqrt_all_mod_prime_power(const Natural& a, const Natural& p,
                                              std::uint32_t e);

struct RepunitGcds {
  Natural g_minus;  // gcd(n-1, 1 + n + ... + n^(s-1))
  Natural g_plus;   // gcd(n+1, n^(s-1) - n^(s-2) + ... + 1)
};

/// Both outputs divide s (s odd, n > 1). Throws Error(s_not_odd).
RepunitGcds repunit_gcds(const Natural& n, std::uint64_t s);

namespace detail {

/// Probabilistic core with caller-controlled base seeding (used by the
/// search pipeline for reproducibility). Deterministic below 2^64.
bool probable_prime(const Natural& n, std::uint64_t seed, int rounds = 40);

}  // namespace detail

}  // namespace equidiv
