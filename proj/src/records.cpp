#include "equidiv/records.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "equidiv/bounds.hpp"
#include "equidiv/error.hpp"

namespace equidiv::records {

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::schema_violation, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::schema_violation, path + ": " + e.what());
  }
  return j;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::valid: return "valid";
    case Verdict::invalid: return "invalid";
    case Verdict::undecided: return "undecided";
  }
  return "?";
}

void to_json(nlohmann::json& j, const RunCertificate& c) {
  j = {{"k", c.k},
       {"start", to_decimal(c.start)},
       {"length", c.length},
       {"provenance", c.provenance}};
  if (c.members) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : *c.members) members.push_back(m);
    j["members"] = members;
  }
}

void from_json(const nlohmann::json& j, RunCertificate& c) {
  if (!j.is_object()) fail(Errc::schema_violation, "certificate: expected object");
  for (const char* key : {"k", "start", "length"}) {
    if (!j.contains(key)) fail(Errc::schema_violation, std::string("certificate: missing ") + key);
  }
  c.k = j["k"].get<std::uint64_t>();
  c.start = parse_decimal(j["start"].get<std::string>());
  c.length = j["length"].get<std::uint64_t>();
  c.provenance = j.value("provenance", std::string{});
  c.members.reset();
  if (j.contains("members")) {
    std::vector<Factorization> members;
    for (const auto& m : j["members"]) members.push_back(m.get<Factorization>());
    c.members = std::move(members);
  }
}

RunCertificate load_certificate(const std::string& path) {
  return read_json_file(path).get<RunCertificate>();
}

void save_certificate(const RunCertificate& cert, const std::string& path) {
  write_json_file(nlohmann::json(cert), path);
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json members_json = nlohmann::json::array();
  for (const auto& m : members) {
    members_json.push_back(
        {{"index", m.index}, {"verdict", verdict_name(m.verdict)}, {"detail", m.detail}});
  }
  return {{"verdict", verdict_name(verdict)}, {"members", members_json}};
}

VerifyReport verify_certificate(const RunCertificate& cert, bool deterministic) {
  if (!cert.members) fail(Errc::malformed_certificate, "certificate carries no factorizations");
  if (cert.members->size() != cert.length) {
    fail(Errc::malformed_certificate,
         "certificate claims length " + std::to_string(cert.length) + " but carries " +
             std::to_string(cert.members->size()) + " members");
  }
  if (cert.length < 1) fail(Errc::malformed_certificate, "certificate length must be >= 1");

  VerifyReport report;
  for (std::uint64_t i = 0; i < cert.length; ++i) {
    const Factorization& f = (*cert.members)[i];
    MemberReport mr;
    mr.index = i;
    Natural expected = cert.start + i;

    auto flag = [&](const std::string& why) {
      mr.verdict = Verdict::invalid;
      mr.detail = why;
    };

    bool ordered = true;
    for (std::size_t a = 1; a < f.factors.size(); ++a) {
      if (!(f.factors[a - 1].prime < f.factors[a].prime)) ordered = false;
    }
    if (!ordered) {
      flag("primes not strictly increasing");
    } else if (f.value() != expected) {
      flag("product " + to_decimal(f.value()) + " != " + to_decimal(expected));
    } else {
      std::uint64_t t = tau_of(f);
      if (t != cert.k) {
        flag("tau = " + std::to_string(t) + " != " + std::to_string(cert.k));
      } else {
        for (const auto& pf : f.factors) {
          if (pf.exponent < 1) {
            flag("exponent < 1");
            break;
          }
          PrimalityVerdict pv = is_prime(pf.prime, deterministic);
          if (!pv.is_prime()) {
            flag("listed factor " + to_decimal(pf.prime) + " is not prime");
            break;
          }
        }
      }
    }
    if (mr.verdict == Verdict::valid) mr.detail = "ok";
    report.members.push_back(std::move(mr));
  }

  report.verdict = Verdict::valid;
  for (const auto& m : report.members) {
    if (m.verdict == Verdict::invalid) report.verdict = Verdict::invalid;
  }
  return report;
}

VerifyReport verify_run(std::uint64_t k, const Natural& start, std::uint64_t length,
                        const FactorBudget& budget) {
  if (length < 1) throw std::invalid_argument("verify_run: length must be >= 1");
  VerifyReport report;
  bool any_undecided = false, any_invalid = false;
  for (std::uint64_t i = 0; i < length; ++i) {
    Natural n = start + i;
    MemberReport mr;
    mr.index = i;
    FactorResult fr = factorize(n, budget);
    if (fr.complete()) {
      std::uint64_t t = tau_of(fr.factors);
      if (t == k) {
        mr.verdict = Verdict::valid;
        mr.detail = "tau = " + std::to_string(t);
      } else {
        mr.verdict = Verdict::invalid;
        mr.detail = "tau(" + to_decimal(n) + ") = " + std::to_string(t) + " != " +
                    std::to_string(k);
      }
    } else {
      switch (tau_feasible(fr.factors, fr.cofactor, k).fit) {
        case TauFit::impossible:
          mr.verdict = Verdict::invalid;
          mr.detail = "partial factorization already rules out tau = " + std::to_string(k);
          break;
        case TauFit::exact:
          mr.verdict = Verdict::valid;
          mr.detail = "settled by partial factorization";
          break;
        case TauFit::open:
          mr.verdict = Verdict::undecided;
          mr.detail = "unfactored cofactor " + to_decimal(fr.cofactor);
          break;
      }
    }
    any_invalid |= mr.verdict == Verdict::invalid;
    any_undecided |= mr.verdict == Verdict::undecided;
    report.members.push_back(std::move(mr));
  }
  report.verdict = any_invalid ? Verdict::invalid
                               : (any_undecided ? Verdict::undecided : Verdict::valid);
  return report;
}

// ---- catalog ----

void to_json(nlohmann::json& j, const CatalogEntry& e) {
  j = {{"k", e.k}, {"lower", e.lower}, {"upper", e.upper}, {"source", e.source}};
  if (e.exact) j["exact"] = *e.exact;
  if (e.witness_start) j["witness_start"] = to_decimal(*e.witness_start);
  if (!e.alt_witnesses.empty()) {
    nlohmann::json alts = nlohmann::json::array();
    for (const auto& w : e.alt_witnesses) alts.push_back(to_decimal(w));
    j["alt_witnesses"] = alts;
  }
  if (e.adhoc_tightening) j["adhoc_tightening"] = true;
}

void from_json(const nlohmann::json& j, CatalogEntry& e) {
  if (!j.is_object()) fail(Errc::schema_violation, "catalog entry: expected object");
  for (const char* key : {"k", "lower", "upper", "source"}) {
    if (!j.contains(key)) fail(Errc::schema_violation, std::string("catalog entry: missing ") + key);
  }
  e.k = j["k"].get<std::uint64_t>();
  e.lower = j["lower"].get<std::uint64_t>();
  e.upper = j["upper"].get<std::uint64_t>();
  e.source = j["source"].get<std::string>();
  e.exact.reset();
  if (j.contains("exact")) e.exact = j["exact"].get<std::uint64_t>();
  e.witness_start.reset();
  if (j.contains("witness_start")) e.witness_start = parse_decimal(j["witness_start"].get<std::string>());
  e.alt_witnesses.clear();
  if (j.contains("alt_witnesses")) {
    for (const auto& w : j["alt_witnesses"]) e.alt_witnesses.push_back(parse_decimal(w.get<std::string>()));
  }
  e.adhoc_tightening = j.value("adhoc_tightening", false);
}

void Catalog::validate_entry(const CatalogEntry& e) {
  if (e.k < 1) fail(Errc::schema_violation, "catalog entry: k must be >= 1");
  if (e.lower > e.upper) {
    fail(Errc::schema_violation, "catalog entry k=" + std::to_string(e.k) + ": lower " +
                                     std::to_string(e.lower) + " > upper " + std::to_string(e.upper));
  }
  if (e.exact && (*e.exact != e.lower || *e.exact != e.upper)) {
    fail(Errc::schema_violation,
         "catalog entry k=" + std::to_string(e.k) + ": exact value disagrees with bounds");
  }
}

Catalog Catalog::load(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (!j.is_array()) fail(Errc::schema_violation, path + ": catalog must be a JSON array");
  Catalog cat;
  for (const auto& item : j) {
    CatalogEntry e = item.get<CatalogEntry>();
    validate_entry(e);
    if (cat.find(e.k)) fail(Errc::schema_violation, "duplicate catalog entry for k=" + std::to_string(e.k));
    cat.entries_.push_back(std::move(e));
  }
  return cat;
}

void Catalog::save(const std::string& path) const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries_) j.push_back(e);
  write_json_file(j, path);
}

CatalogEntry* Catalog::find(std::uint64_t k) {
  for (auto& e : entries_) {
    if (e.k == k) return &e;
  }
  return nullptr;
}

const CatalogEntry* Catalog::find(std::uint64_t k) const {
  for (const auto& e : entries_) {
    if (e.k == k) return &e;
  }
  return nullptr;
}

std::optional<CatalogEntry> Catalog::query(std::uint64_t k) const {
  const CatalogEntry* e = find(k);
  if (!e) return std::nullopt;
  return *e;
}

void Catalog::upsert(const CatalogEntry& entry) {
  validate_entry(entry);
  if (CatalogEntry* existing = find(entry.k)) {
    *existing = entry;
  } else {
    entries_.push_back(entry);
  }
}

void Catalog::upsert(const scan::RunRecord& record) {
  CatalogEntry* existing = find(record.k);
  std::uint64_t proven_upper = existing ? existing->upper : bounds::rule_bound(record.k).upper;
  if (record.length > proven_upper) {
    fail(Errc::bound_conflict, "run of length " + std::to_string(record.length) + " for k=" +
                                   std::to_string(record.k) + " exceeds the proven upper bound " +
                                   std::to_string(proven_upper));
  }
  if (existing) {
    if (record.length > existing->lower) {
      existing->lower = record.length;
      existing->witness_start = record.start;
      if (existing->lower == existing->upper) existing->exact = existing->lower;
    }
  } else {
    CatalogEntry e;
    e.k = record.k;
    e.lower = record.length;
    e.upper = bounds::rule_bound(record.k).upper;
    if (e.lower == e.upper) e.exact = e.lower;
    e.witness_start = record.start;
    e.source = std::string("run found by ") + scan::run_source_name(record.source);
    entries_.push_back(std::move(e));
  }
}

void Catalog::consistency_check() const {
  for (const auto& e : entries_) {
    validate_entry(e);
    std::uint64_t proven = bounds::rule_bound(e.k).upper;
    if (e.upper > proven) {
      fail(Errc::bound_conflict, "catalog entry k=" + std::to_string(e.k) + ": upper " +
                                     std::to_string(e.upper) + " exceeds the rule bound " +
                                     std::to_string(proven));
    }
    if (e.upper < proven && !e.adhoc_tightening) {
      fail(Errc::bound_conflict,
           "catalog entry k=" + std::to_string(e.k) + ": upper " + std::to_string(e.upper) +
               " is tighter than the rule bound " + std::to_string(proven) +
               " but is not flagged adhoc_tightening");
    }
  }
}

}  // namespace equidiv::records
