#include "equidiv/bounds.hpp"

#include <array>
#include <numeric>

#include "equidiv/arith.hpp"
#include "equidiv/error.hpp"

namespace equidiv::bounds {

namespace {

struct RuleInfo {
  RuleId id;
  const char* name;
  const char* citation;
};

constexpr std::array<RuleInfo, 14> kRules{{
    {RuleId::ODD_K, "ODD_K", "runs of odd divisor count have length 1"},
    {RuleId::LEMMA1, "LEMMA1", "p smallest prime not dividing k: M(k) <= 2^p - 1"},
    {RuleId::LEMMA2, "LEMMA2", "2^s || k: M(k) <= 2^(2^s+1) - 1"},
    {RuleId::LEMMA3, "LEMMA3", "k = 2 or 10 (mod 12): M(k) <= 5"},
    {RuleId::THEOREM1, "THEOREM1", "k = 6p, p an odd prime or 9: M(k) <= 5"},
    {RuleId::LEMMA4, "LEMMA4", "k = 2pq, primes p,q > 3: M(k) <= 4"},
    {RuleId::THEOREM2, "THEOREM2", "k = 2pq, gcd(p-1,q-1) > 4: M(k) <= 3"},
    {RuleId::DE_2P, "DE_2P", "k = 2p, prime p > 3: M(k) <= 3 (Duentsch-Eggleton)"},
    {RuleId::LEMMA6_K12, "LEMMA6_K12", "M(12) <= 15"},
    {RuleId::LEMMA7_K36, "LEMMA7_K36", "M(36) <= 15"},
    {RuleId::LEMMA8_K48, "LEMMA8_K48", "M(48) <= 31"},
    {RuleId::LEMMA9_K24, "LEMMA9_K24", "M(24) <= 31"},
    {RuleId::BASE_M2, "BASE_M2", "M(2) = 2"},
    {RuleId::BASE_M4, "BASE_M4", "M(4) = 3"},
}};

bool is_prime_u64_small(std::uint64_t v) { return equidiv::is_prime(from_u64(v)).is_prime(); }

// k = p*q with p, q prime (not necessarily distinct)? Returns the pair.
std::optional<std::pair<std::uint64_t, std::uint64_t>> as_semiprime(std::uint64_t k) {
  if (k < 4) return std::nullopt;
  FactorResult f = factorize(from_u64(k), FactorBudget::unbounded());
  std::uint64_t total = 0;
  for (const auto& pf : f.factors.factors) total += pf.exponent;
  if (total != 2) return std::nullopt;
  if (f.factors.factors.size() == 1) {
    std::uint64_t p = to_u64(f.factors.factors[0].prime);
    return std::make_pair(p, p);
  }
  return std::make_pair(to_u64(f.factors.factors[0].prime),
                        to_u64(f.factors.factors[1].prime));
}

}  // namespace

const char* rule_name(RuleId id) {
  for (const auto& r : kRules) {
    if (r.id == id) return r.name;
  }
  return "?";
}

std::optional<RuleId> rule_from_name(const std::string& name) {
  for (const auto& r : kRules) {
    if (name == r.name) return r.id;
  }
  return std::nullopt;
}

const char* rule_citation(RuleId id) {
  for (const auto& r : kRules) {
    if (r.id == id) return r.citation;
  }
  return "?";
}

std::vector<FiredRule> applicable_rules(std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("applicable_rules: k must be >= 1");
  std::vector<FiredRule> fired;

  if (k % 2 == 1) fired.push_back({RuleId::ODD_K, 1});

  if (k > 1) {
    // smallest prime not dividing k; at most 53 for any 64-bit k
    std::uint64_t p = 2;
    while (k % p == 0) {
      do {
        ++p;
      } while (!is_prime_u64_small(p));
    }
    Natural bound = (Natural(1) << static_cast<unsigned long>(p)) - 1;
    fired.push_back({RuleId::LEMMA1, bound});
  }

  if (k % 2 == 0) {
    unsigned s = 0;
    std::uint64_t kk = k;
    while (kk % 2 == 0) {
      kk >>= 1;
      ++s;
    }
    // 2-adic valuations past 20 would need megabit bound values; the rule is
    // never the minimum there (LEMMA1 caps at 2^53 - 1 already)
    if (s <= 20) {
      Natural bound = (Natural(1) << ((std::uint64_t{1} << s) + 1)) - 1;
      fired.push_back({RuleId::LEMMA2, bound});
    }
  }

  if (k % 12 == 2 || k % 12 == 10) fired.push_back({RuleId::LEMMA3, 5});

  if (k % 6 == 0) {
    std::uint64_t p = k / 6;
    if (p == 9 || (p % 2 == 1 && is_prime_u64_small(p))) {
      fired.push_back({RuleId::THEOREM1, 5});
    }
  }

  if (k % 2 == 0 && k > 2) {
    if (auto pq = as_semiprime(k / 2)) {
      auto [p, q] = *pq;
      if (p > 3 && q > 3) fired.push_back({RuleId::LEMMA4, 4});
      if (std::gcd(p - 1, q - 1) > 4) fired.push_back({RuleId::THEOREM2, 3});
    }
    std::uint64_t half = k / 2;
    if (half > 3 && is_prime_u64_small(half)) fired.push_back({RuleId::DE_2P, 3});
  }

  switch (k) {
    case 2: fired.push_back({RuleId::BASE_M2, 2}); break;
    case 4: fired.push_back({RuleId::BASE_M4, 3}); break;
    case 12: fired.push_back({RuleId::LEMMA6_K12, 15}); break;
    case 24: fired.push_back({RuleId::LEMMA9_K24, 31}); break;
    case 36: fired.push_back({RuleId::LEMMA7_K36, 15}); break;
    case 48: fired.push_back({RuleId::LEMMA8_K48, 31}); break;
    default: break;
  }

  return fired;
}

BoundResult rule_bound(std::uint64_t k) {
  BoundResult result;
  result.k = k;
  result.fired = applicable_rules(k);
  Natural best = result.fired.front().bound;
  for (const auto& r : result.fired) best = std::min(best, r.bound);
  result.upper = to_u64(best);  // the minimum is always small (<= 2^53 - 1)
  return result;
}

void to_json(nlohmann::json& j, const BoundResult& r) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& f : r.fired) {
    nlohmann::json bound;
    if (f.bound < Natural(1) << 63) {
      bound = to_u64(f.bound);
    } else {
      bound = to_decimal(f.bound);
    }
    rules.push_back({{"id", rule_name(f.id)}, {"bound", bound}});
  }
  j = {{"k", r.k}, {"upper", r.upper}, {"rules", rules}};
}

}  // namespace equidiv::bounds
