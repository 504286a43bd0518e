#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "equidiv/arith.hpp"
#include "equidiv/records.hpp"
#include "equidiv/scan.hpp"

namespace equidiv::search {

enum class CofactorShape { prime, semiprime_distinct, prime_power, any_with_tau };

const char* shape_name(CofactorShape s);
CofactorShape shape_from_name(const std::string& name);

/// Divisibility constraint on one offset of the run: the member at this
/// offset is fixed_part * cofactor with the cofactor coprime to the fixed
/// part and contributing cofactor_tau = k / tau(fixed_part) divisors.
struct TermConstraint {
  std::uint32_t offset = 0;
  Factorization fixed_part;  // empty = unconstrained (cofactor is the member)
  std::uint64_t cofactor_tau = 0;
  CofactorShape shape = CofactorShape::any_with_tau;
};

/// Arithmetic progression n_j = a*(s0 + j*m) whose run offsets carry forced
/// prime-power parts for every j >= 0.
struct ProgressionTemplate {
  std::uint64_t k = 0;
  std::uint32_t run_length = 1;
  Natural a = 1;
  Natural s0 = 0;
  Natural m = 1;
  std::vector<TermConstraint> terms;  // one per offset 0..run_length-1

  Natural member(const Natural& j, std::uint32_t offset) const;

  /// cofactor at offset i as a linear function of j: base + j * step.
  struct CofactorLine {
    Natural base;
    Natural step;
  };
  CofactorLine cofactor_line(const TermConstraint& term) const;

  /// Re-checks the CRT construction: every fixed part divides its member for
  /// all j, tau(fixed) * cofactor_tau = k. Throws on violation.
  void validate() const;
};

void to_json(nlohmann::json& j, const ProgressionTemplate& t);
void from_json(const nlohmann::json& j, ProgressionTemplate& t);

ProgressionTemplate load_template(const std::string& path);
void save_template(const ProgressionTemplate& t, const std::string& path);

/// Builds the progression from per-offset fixed parts: a is the offset-0
/// fixed part, s0/m come from the combined congruence system, with the index
/// step doubled once when that pins the 2-exponent of every even term.
/// Throws Error(inconsistent_congruences) when no progression satisfies the
/// assignment and Error(tau_mismatch) when tau(fixed_part) does not divide k.
ProgressionTemplate build_template(
    std::uint64_t k, std::uint32_t run_length,
    const std::vector<std::pair<std::uint32_t, Factorization>>& assignments);

/// scale * x^2 + offset = 0 (mod modulus); modulus a product of known prime
/// powers, moduli of distinct equations pairwise coprime.
struct QcEquation {
  Natural scale;
  mpz_class offset;  // may be negative
  Natural modulus;
  std::optional<Factorization> modulus_factors;
};

struct QuadraticCongruenceSystem {
  std::vector<QcEquation> equations;
};

struct QcSolution {
  Natural modulus;              // product of all equation moduli
  std::vector<Natural> roots;   // sorted; every root satisfies every equation
};

/// Solves per prime power (square roots + Hensel lifts) and combines by CRT.
/// Factors moduli on demand; Error(unknown_modulus_factorization) when a
/// modulus cannot be factored within the default budget.
QcSolution solve_quadratic_system(const QuadraticCongruenceSystem& sys);

/// The one fully specified instance used for runs of five consecutive
/// integers with 6p divisors: q0=7, q2=3, q3=5, q4=11, r0=17, r2=19, r4=29,
/// free odd primes p and q1.
QuadraticCongruenceSystem system7_preset(std::uint64_t p, std::uint64_t q1);

struct PipelineStats {
  std::uint64_t examined = 0;
  std::uint64_t rejected_presieve = 0;
  std::uint64_t rejected_primality = 0;
  std::uint64_t rejected_partial_factor = 0;
  std::uint64_t rejected_full_factor = 0;
  std::uint64_t hits = 0;
  std::uint64_t undecided = 0;
  std::uint64_t seed = 0;

  PipelineStats& operator+=(const PipelineStats& o);
};

void to_json(nlohmann::json& j, const PipelineStats& s);

struct JRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;  // exclusive
};

/// Residue-class model of the pre-sieve: candidate j is rejected when the
/// cofactor of some term would gain an extra power of a fixed-part prime.
/// Classes live purely in index space; no big-integer work per candidate.
struct PresieveModel {
  struct PrimeClasses {
    std::uint64_t prime;
    std::vector<std::uint64_t> rejected;  // distinct residues mod prime
  };
  std::vector<PrimeClasses> classes;

  bool alive(std::uint64_t j) const;
  /// 1 - prod over primes of (1 - |rejected|/p).
  double analytic_rejection() const;
};

PresieveModel presieve_model(const ProgressionTemplate& t);

std::vector<std::uint64_t> presieve(const ProgressionTemplate& t, JRange range,
                                    PipelineStats& stats);

/// Keeps j iff every prime-shaped cofactor passes probabilistic primality.
/// One-sided: a j whose prime-shaped cofactors are all prime is never lost.
std::vector<std::uint64_t> primality_stage(const ProgressionTemplate& t,
                                           std::span<const std::uint64_t> js,
                                           PipelineStats& stats, std::uint64_t seed);

/// Peels primes up to the budget's trial limit from composite-shaped
/// cofactors and rejects j only when the partial structure already
/// contradicts cofactor_tau; ambiguity keeps the candidate.
std::vector<std::uint64_t> partial_factor_stage(const ProgressionTemplate& t,
                                                std::span<const std::uint64_t> js,
                                                const FactorBudget& budget,
                                                PipelineStats& stats);

struct PipelineResult {
  std::vector<scan::RunRecord> records;
  std::vector<records::RunCertificate> certificates;  // parallel to records
  std::vector<std::uint64_t> undecided;               // parked j values
  PipelineStats stats;
};

/// Fully factorizes every member of each surviving candidate and emits a
/// record + certificate when all members have tau = k. Budget exhaustion
/// parks the candidate as undecided, never drops it.
PipelineResult full_verify_stage(const ProgressionTemplate& t,
                                 std::span<const std::uint64_t> js,
                                 const FactorBudget& budget, PipelineStats stats,
                                 std::uint64_t seed);

/// The four stages composed over a j-range. Deterministic for a fixed seed
/// and range; j-chunks run in parallel and merge in index order.
PipelineResult run_pipeline(const ProgressionTemplate& t, JRange range,
                            const FactorBudget& budget, std::uint64_t seed,
                            unsigned threads = 1);

}  // namespace equidiv::search
