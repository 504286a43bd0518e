#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "equidiv/arith.hpp"
#include "equidiv/scan.hpp"

namespace equidiv::records {

/// A verifiable claim: k consecutive-divisor-count, start, length, and
/// optionally one factorization per member.
struct RunCertificate {
  std::uint64_t k = 0;
  Natural start;
  std::uint64_t length = 0;
  std::optional<std::vector<Factorization>> members;
  std::string provenance;
};

void to_json(nlohmann::json& j, const RunCertificate& c);
void from_json(const nlohmann::json& j, RunCertificate& c);

RunCertificate load_certificate(const std::string& path);
void save_certificate(const RunCertificate& cert, const std::string& path);

enum class Verdict { valid, invalid, undecided };
const char* verdict_name(Verdict v);

struct MemberReport {
  std::uint64_t index = 0;
  Verdict verdict = Verdict::valid;
  std::string detail;
};

struct VerifyReport {
  Verdict verdict = Verdict::valid;
  std::vector<MemberReport> members;

  nlohmann::json to_json() const;
};

/// Checks a certificate with supplied factorizations: per member, product
/// reconstruction, strictly increasing primes, primality of every listed
/// prime, and tau = k. deterministic=true proves primality of every factor
/// (slow above 2^64). Throws Error(malformed_certificate) when members are
/// absent or the count does not match length.
VerifyReport verify_certificate(const RunCertificate& cert, bool deterministic = false);

/// Factorizes each of start..start+length-1 within the budget and checks
/// tau = k. Members the budget cannot settle yield verdict `undecided`
/// unless the partial factorization already contradicts tau = k.
VerifyReport verify_run(std::uint64_t k, const Natural& start, std::uint64_t length,
                        const FactorBudget& budget = {});

/// Catalog row: best known bounds (or exact value) for M at one k.
struct CatalogEntry {
  std::uint64_t k = 0;
  std::optional<std::uint64_t> exact;
  std::uint64_t lower = 1;
  std::uint64_t upper = 0;
  std::optional<Natural> witness_start;
  std::vector<Natural> alt_witnesses;
  std::string source;
  bool adhoc_tightening = false;  // upper is tighter than the rule engine proves
};

void to_json(nlohmann::json& j, const CatalogEntry& e);
void from_json(const nlohmann::json& j, CatalogEntry& e);

class Catalog {
 public:
  static Catalog load(const std::string& path);
  void save(const std::string& path) const;

  std::optional<CatalogEntry> query(std::uint64_t k) const;

  /// Inserts or replaces a whole entry (validated).
  void upsert(const CatalogEntry& entry);

  /// Folds a verified run into the catalog: raises `lower` to the run length
  /// and refuses lengths above the proven upper bound with
  /// Error(bound_conflict).
  void upsert(const scan::RunRecord& record);

  /// lower <= upper, exact coherence, upper <= rule_bound(k) with any strict
  /// tightening flagged. Throws Error(schema_violation | bound_conflict).
  void consistency_check() const;

  const std::vector<CatalogEntry>& entries() const { return entries_; }

 private:
  std::vector<CatalogEntry> entries_;  // file order preserved

  CatalogEntry* find(std::uint64_t k);
  const CatalogEntry* find(std::uint64_t k) const;
  static void validate_entry(const CatalogEntry& e);
};

}  // namespace equidiv::records
