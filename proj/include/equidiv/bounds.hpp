#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "equidiv/natural.hpp"

namespace equidiv::bounds {

enum class RuleId {
  ODD_K,
  LEMMA1,
  LEMMA2,
  LEMMA3,
  THEOREM1,
  LEMMA4,
  THEOREM2,
  DE_2P,
  LEMMA6_K12,
  LEMMA7_K36,
  LEMMA8_K48,
  LEMMA9_K24,
  BASE_M2,
  BASE_M4,
};

const char* rule_name(RuleId id);
std::optional<RuleId> rule_from_name(const std::string& name);
const char* rule_citation(RuleId id);

struct FiredRule {
  RuleId id;
  Natural bound;  // exact; can exceed 64 bits (2-adic rule for large valuations)
};

struct BoundResult {
  std::uint64_t k = 0;
  std::uint64_t upper = 0;  // min over fired rules; always fits
  std::vector<FiredRule> fired;
};

/// Every rule whose hypothesis holds for k, with the bound it contributes.
std::vector<FiredRule> applicable_rules(std::uint64_t k);

/// Proven upper bound on the maximal run length for divisor count k:
/// the minimum over all applicable rules. k >= 1.
BoundResult rule_bound(std::uint64_t k);

/// {"k": int, "upper": int, "rules": [{"id": str, "bound": int}]}
/// Bounds above 2^63 serialize as decimal strings.
void to_json(nlohmann::json& j, const BoundResult& r);

}  // namespace equidiv::bounds
