#include "equidiv/arith.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "equidiv/error.hpp"

namespace equidiv {

namespace {

constexpr std::uint64_t kDefaultSeed = 0x5eed0fda7a5eedULL;

const std::vector<std::uint32_t>& small_primes() {
  static const std::vector<std::uint32_t> primes = [] {
    constexpr std::uint32_t limit = 1'000'000;
    std::vector<bool> composite(limit + 1, false);
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 2; i <= limit; ++i) {
      if (!composite[i]) {
        out.push_back(i);
        for (std::uint64_t j = std::uint64_t{i} * i; j <= limit; j += i) composite[j] = true;
      }
    }
    return out;
  }();
  return primes;
}

// ---- 64-bit primitives ----

std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

std::uint64_t powmod_u64(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = m > 1 ? 1 : 0;
  a %= m;
  while (e > 0) {
    if (e & 1) r = mulmod_u64(r, a, m);
    a = mulmod_u64(a, a, m);
    e >>= 1;
  }
  return r;
}

// strong probable prime test to base a; n odd >= 3
bool sprp_u64(std::uint64_t n, std::uint64_t a) {
  a %= n;
  if (a == 0) return true;
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  std::uint64_t x = powmod_u64(a, d, n);
  if (x == 1 || x == n - 1) return true;
  for (int i = 1; i < s; ++i) {
    x = mulmod_u64(x, x, n);
    if (x == n - 1) return true;
  }
  return false;
}

// deterministic for all n < 2^64
bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  for (std::uint64_t a : {2, 325, 9375, 28178, 450775, 9780504, 1795265022}) {
    if (!sprp_u64(n, a)) return false;
  }
  return true;
}

struct EffortTracker {
  std::chrono::steady_clock::time_point deadline;
  std::uint64_t iterations_left;
  bool out_of_time = false;

  explicit EffortTracker(const FactorBudget& budget)
      : deadline(std::chrono::steady_clock::now() + std::chrono::milliseconds(budget.wall_clock_ms)),
        iterations_left(budget.rho_iteration_limit) {}

  bool exhausted() {
    if (iterations_left == 0) return true;
    if (out_of_time) return true;
    return false;
  }

  // returns false when the budget ran out mid-consume
  bool consume(std::uint64_t n) {
    if (n >= iterations_left) {
      iterations_left = 0;
      return false;
    }
    iterations_left -= n;
    if (std::chrono::steady_clock::now() >= deadline) {
      out_of_time = true;
      return false;
    }
    return true;
  }
};

std::uint64_t rho_brent_u64(std::uint64_t n, EffortTracker& effort, std::mt19937_64& rng) {
  // n odd composite, no factors below the trial limit
  while (!effort.exhausted()) {
    std::uint64_t c = rng() % (n - 2) + 1;
    std::uint64_t y = rng() % n;
    std::uint64_t g = 1, r = 1, q = 1, x = 0, ys = 0;
    const std::uint64_t batch = 128;
    while (g == 1) {
      x = y;
      for (std::uint64_t i = 0; i < r; ++i) y = (mulmod_u64(y, y, n) + c) % n;
      std::uint64_t k = 0;
      while (k < r && g == 1) {
        ys = y;
        std::uint64_t steps = std::min(batch, r - k);
        for (std::uint64_t i = 0; i < steps; ++i) {
          y = (mulmod_u64(y, y, n) + c) % n;
          q = mulmod_u64(q, x > y ? x - y : y - x, n);
        }
        g = std::gcd(q, n);
        k += steps;
        if (!effort.consume(steps)) return 0;
      }
      r <<= 1;
    }
    if (g == n) {
      g = 1;
      while (g == 1) {
        ys = (mulmod_u64(ys, ys, n) + c) % n;
        g = std::gcd(x > ys ? x - ys : ys - x, n);
        if (!effort.consume(1)) return 0;
      }
    }
    if (g != n) return g;
  }
  return 0;
}

// ---- arbitrary-precision primitives ----

std::uint64_t mix_seed(const Natural& n, std::uint64_t seed) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  h ^= mpz_fdiv_ui(n.get_mpz_t(), 0xfffffffbu);
  h *= 0xff51afd7ed558ccdULL;
  h ^= mpz_sizeinbase(n.get_mpz_t(), 2);
  return h;
}

struct GmpRng {
  gmp_randstate_t state;
  explicit GmpRng(std::uint64_t seed) {
    gmp_randinit_mt(state);
    gmp_randseed_ui(state, static_cast<unsigned long>(seed));
  }
  ~GmpRng() { gmp_randclear(state); }
  GmpRng(const GmpRng&) = delete;
  GmpRng& operator=(const GmpRng&) = delete;

  Natural below(const Natural& n) {
    Natural r;
    mpz_urandomm(r.get_mpz_t(), state, n.get_mpz_t());
    return r;
  }
};

bool sprp_mpz(const Natural& n, const Natural& base) {
  Natural a = base % n;
  if (a == 0) return true;
  Natural d = n - 1;
  unsigned long s = mpz_scan1(d.get_mpz_t(), 0);
  mpz_fdiv_q_2exp(d.get_mpz_t(), d.get_mpz_t(), s);
  Natural x;
  mpz_powm(x.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
  Natural nm1 = n - 1;
  if (x == 1 || x == nm1) return true;
  for (unsigned long i = 1; i < s; ++i) {
    mpz_mul(x.get_mpz_t(), x.get_mpz_t(), x.get_mpz_t());
    mpz_mod(x.get_mpz_t(), x.get_mpz_t(), n.get_mpz_t());
    if (x == nm1) return true;
  }
  return false;
}

// halve mod odd n
void half_mod(Natural& x, const Natural& n) {
  if (mpz_odd_p(x.get_mpz_t())) x += n;
  mpz_fdiv_q_2exp(x.get_mpz_t(), x.get_mpz_t(), 1);
}

// strong Lucas probable prime test, Selfridge parameters. n odd >= 3,
// not a perfect square.
bool strong_lucas_prp(const Natural& n) {
  long d = 5;
  while (true) {
    int j = mpz_si_kronecker(d, n.get_mpz_t());
    if (j == -1) break;
    if (j == 0) return n == static_cast<unsigned long>(d < 0 ? -d : d);
    d = d > 0 ? -(d + 2) : -(d - 2);
  }
  const long D = d;
  mpz_class Q((1 - D) / 4);

  Natural dd = n + 1;
  unsigned long s = mpz_scan1(dd.get_mpz_t(), 0);
  mpz_fdiv_q_2exp(dd.get_mpz_t(), dd.get_mpz_t(), s);

  // ladder for U_dd, V_dd, Q^dd (P = 1)
  Natural U = 1, V = 1;
  mpz_class qk = Q % n;
  if (qk < 0) qk += n;
  long bits = static_cast<long>(mpz_sizeinbase(dd.get_mpz_t(), 2));
  Natural t;
  for (long i = bits - 2; i >= 0; --i) {
    // double
    U = U * V % n;
    V = V * V % n;
    V -= 2 * qk;
    mpz_mod(V.get_mpz_t(), V.get_mpz_t(), n.get_mpz_t());
    qk = qk * qk % n;
    if (mpz_tstbit(dd.get_mpz_t(), static_cast<unsigned long>(i))) {
      t = U + V;
      half_mod(t, n);
      V = D * U + V;
      mpz_mod(V.get_mpz_t(), V.get_mpz_t(), n.get_mpz_t());
      half_mod(V, n);
      U = t % n;
      qk = qk * (Q % n) % n;
      if (qk < 0) qk += n;
    }
  }
  if (U == 0 || V == 0) return true;
  for (unsigned long r = 1; r < s; ++r) {
    V = V * V % n;
    V -= 2 * qk;
    mpz_mod(V.get_mpz_t(), V.get_mpz_t(), n.get_mpz_t());
    if (V == 0) return true;
    qk = qk * qk % n;
  }
  return false;
}

// base-2 strong test + seeded random strong rounds + strong Lucas
bool probable_prime_mpz(const Natural& n, std::uint64_t seed, int rounds) {
  if (!sprp_mpz(n, 2)) return false;
  if (mpz_perfect_square_p(n.get_mpz_t())) return false;
  GmpRng rng(mix_seed(n, seed));
  Natural span = n - 4;
  for (int i = 0; i < rounds; ++i) {
    Natural base = rng.below(span) + 2;
    if (!sprp_mpz(n, base)) return false;
  }
  return strong_lucas_prp(n);
}

struct FactorContext {
  EffortTracker effort;
  std::mt19937_64 rng;
  std::map<Natural, std::uint32_t> primes;
  std::vector<std::pair<Natural, std::uint32_t>> parked;

  FactorContext(const FactorBudget& budget, std::uint64_t seed)
      : effort(budget), rng(seed) {}

  void add_prime(const Natural& p, std::uint32_t mult) { primes[p] += mult; }
};

bool probable_prime_for_factoring(const Natural& n, FactorContext& ctx) {
  if (fits_u64(n)) return is_prime_u64(to_u64(n));
  return probable_prime_mpz(n, ctx.rng(), 24);
}

Natural rho_brent_mpz(const Natural& n, FactorContext& ctx) {
  const unsigned long batch = 128;
  Natural x, y, ys, q, g, diff;
  while (!ctx.effort.exhausted()) {
    Natural c = GmpRng(ctx.rng()).below(n - 3) + 1;
    y = GmpRng(ctx.rng()).below(n);
    g = 1;
    q = 1;
    std::uint64_t r = 1;
    while (g == 1) {
      x = y;
      for (std::uint64_t i = 0; i < r; ++i) {
        mpz_mul(y.get_mpz_t(), y.get_mpz_t(), y.get_mpz_t());
        mpz_add(y.get_mpz_t(), y.get_mpz_t(), c.get_mpz_t());
        mpz_mod(y.get_mpz_t(), y.get_mpz_t(), n.get_mpz_t());
      }
      std::uint64_t k = 0;
      while (k < r && g == 1) {
        ys = y;
        std::uint64_t steps = std::min<std::uint64_t>(batch, r - k);
        for (std::uint64_t i = 0; i < steps; ++i) {
          mpz_mul(y.get_mpz_t(), y.get_mpz_t(), y.get_mpz_t());
          mpz_add(y.get_mpz_t(), y.get_mpz_t(), c.get_mpz_t());
          mpz_mod(y.get_mpz_t(), y.get_mpz_t(), n.get_mpz_t());
          mpz_sub(diff.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t());
          mpz_abs(diff.get_mpz_t(), diff.get_mpz_t());
          mpz_mul(q.get_mpz_t(), q.get_mpz_t(), diff.get_mpz_t());
          mpz_mod(q.get_mpz_t(), q.get_mpz_t(), n.get_mpz_t());
        }
        mpz_gcd(g.get_mpz_t(), q.get_mpz_t(), n.get_mpz_t());
        k += steps;
        if (!ctx.effort.consume(steps)) return 0;
      }
      r <<= 1;
    }
    if (g == n) {
      g = 1;
      while (g == 1) {
        mpz_mul(ys.get_mpz_t(), ys.get_mpz_t(), ys.get_mpz_t());
        mpz_add(ys.get_mpz_t(), ys.get_mpz_t(), c.get_mpz_t());
        mpz_mod(ys.get_mpz_t(), ys.get_mpz_t(), n.get_mpz_t());
        mpz_sub(diff.get_mpz_t(), x.get_mpz_t(), ys.get_mpz_t());
        mpz_abs(diff.get_mpz_t(), diff.get_mpz_t());
        mpz_gcd(g.get_mpz_t(), diff.get_mpz_t(), n.get_mpz_t());
        if (!ctx.effort.consume(1)) return 0;
      }
    }
    if (g != n && g != 1) return g;
  }
  return 0;
}

void factor_composite(const Natural& value, std::uint32_t mult, FactorContext& ctx);

void factor_piece(const Natural& value, std::uint32_t mult, FactorContext& ctx) {
  if (value == 1) return;
  if (probable_prime_for_factoring(value, ctx)) {
    ctx.add_prime(value, mult);
    return;
  }
  if (mpz_perfect_power_p(value.get_mpz_t())) {
    Natural root;
    for (unsigned long e = 2; e <= mpz_sizeinbase(value.get_mpz_t(), 2); ++e) {
      if (mpz_root(root.get_mpz_t(), value.get_mpz_t(), e) != 0) {
        factor_piece(root, mult * static_cast<std::uint32_t>(e), ctx);
        return;
      }
    }
  }
  factor_composite(value, mult, ctx);
}

void factor_composite(const Natural& value, std::uint32_t mult, FactorContext& ctx) {
  Natural d;
  if (fits_u64(value)) {
    std::uint64_t f = rho_brent_u64(to_u64(value), ctx.effort, ctx.rng);
    d = from_u64(f);
  } else {
    d = rho_brent_mpz(value, ctx);
  }
  if (d == 0) {
    ctx.parked.emplace_back(value, mult);
    return;
  }
  factor_piece(d, mult, ctx);
  factor_piece(Natural(value / d), mult, ctx);
}

PrimalityVerdict pocklington_prove(const Natural& n);

}  // namespace

FactorBudget FactorBudget::unbounded() {
  FactorBudget b;
  b.trial_division_limit = 10'000'000;
  b.rho_iteration_limit = std::numeric_limits<std::uint64_t>::max();
  b.wall_clock_ms = std::numeric_limits<std::uint64_t>::max() / 4;
  return b;
}

PrimalityVerdict is_prime(const Natural& n, bool deterministic) {
  if (sgn(n) < 0) throw std::invalid_argument("is_prime: negative input");
  if (n < 2) return {Primality::composite, std::nullopt};
  if (fits_u64(n)) {
    std::uint64_t v = to_u64(n);
    if (is_prime_u64(v)) return {Primality::prime_deterministic, std::nullopt};
    for (std::uint32_t p : small_primes()) {
      if (std::uint64_t{p} * p > v) break;
      if (v % p == 0) return {Primality::composite, from_u64(p)};
    }
    return {Primality::composite, std::nullopt};
  }
  for (std::uint32_t p : small_primes()) {
    if (p > 10000) break;
    if (mpz_divisible_ui_p(n.get_mpz_t(), p)) return {Primality::composite, from_u64(p)};
  }
  if (mpz_perfect_square_p(n.get_mpz_t())) return {Primality::composite, isqrt(n)};
  if (!probable_prime_mpz(n, kDefaultSeed, 40)) return {Primality::composite, std::nullopt};
  if (deterministic) return pocklington_prove(n);
  return {Primality::prime_probabilistic, std::nullopt};
}

FactorResult factorize(const Natural& n, const FactorBudget& budget) {
  return factorize(n, budget, kDefaultSeed);
}

FactorResult factorize(const Natural& n, const FactorBudget& budget, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("factorize: input must be >= 1");
  FactorResult result;
  if (n == 1) return result;

  FactorContext ctx(budget, mix_seed(n, seed));

  Natural remaining = n;
  std::uint64_t trial_limit = fits_u64(budget.trial_division_limit)
                                  ? to_u64(budget.trial_division_limit)
                                  : std::numeric_limits<std::uint64_t>::max();
  for (std::uint32_t p : small_primes()) {
    if (p > trial_limit) break;
    if (Natural(std::uint64_t{p} * p) > remaining) break;
    if (mpz_divisible_ui_p(remaining.get_mpz_t(), p)) {
      std::uint32_t e = 0;
      do {
        mpz_divexact_ui(remaining.get_mpz_t(), remaining.get_mpz_t(), p);
        ++e;
      } while (mpz_divisible_ui_p(remaining.get_mpz_t(), p));
      ctx.add_prime(from_u64(p), e);
    }
  }
  // wheel past the precomputed table, for generous trial limits
  if (trial_limit > 1'000'000) {
    for (std::uint64_t p = 1'000'003; p <= trial_limit; p += 2) {
      if (Natural(p) * Natural(p) > remaining) break;
      if (mpz_divisible_ui_p(remaining.get_mpz_t(), p)) {
        std::uint32_t e = 0;
        do {
          mpz_divexact_ui(remaining.get_mpz_t(), remaining.get_mpz_t(), p);
          ++e;
        } while (mpz_divisible_ui_p(remaining.get_mpz_t(), p));
        ctx.add_prime(from_u64(p), e);
      }
    }
  }
  if (remaining > 1) factor_piece(remaining, 1, ctx);

  for (const auto& [p, e] : ctx.primes) result.factors.factors.push_back({p, e});
  if (!ctx.parked.empty()) {
    Natural cofactor = 1;
    for (const auto& [v, mult] : ctx.parked) {
      Natural powed;
      mpz_pow_ui(powed.get_mpz_t(), v.get_mpz_t(), mult);
      cofactor *= powed;
    }
    result.cofactor = cofactor;
    PrimalityVerdict verdict{Primality::composite, std::nullopt};
    if (ctx.parked.size() > 1 || ctx.parked.front().second > 1) {
      verdict.witness = ctx.parked.front().first;
    }
    result.cofactor_verdict = verdict;
  }
  return result;
}

TauFeasibility tau_feasible(const Factorization& found, const Natural& cofactor,
                            std::uint64_t target) {
  std::uint64_t t = tau_of(found);
  if (cofactor == 1) {
    if (t != target) return {TauFit::impossible, std::nullopt};
    return {TauFit::exact, found};
  }
  if (t > target || target % t != 0) return {TauFit::impossible, std::nullopt};
  std::uint64_t need = target / t;
  if (is_prime(cofactor).is_prime()) {
    if (need != 2) return {TauFit::impossible, std::nullopt};
    Factorization full = found;
    full.multiply(cofactor, 1);
    return {TauFit::exact, full};
  }
  // composite cofactor contributes at least 3 divisors
  if (need < 3) return {TauFit::impossible, std::nullopt};
  if (need == 3) {
    auto root = perfect_square_root(cofactor);
    if (!root || !is_prime(*root).is_prime()) return {TauFit::impossible, std::nullopt};
    Factorization full = found;
    full.multiply(*root, 2);
    return {TauFit::exact, full};
  }
  if (mpz_perfect_power_p(cofactor.get_mpz_t())) {
    Natural root;
    for (unsigned long e = 2; e <= mpz_sizeinbase(cofactor.get_mpz_t(), 2); ++e) {
      if (mpz_root(root.get_mpz_t(), cofactor.get_mpz_t(), e) != 0) {
        if (is_prime(root).is_prime()) {
          if (need != e + 1) return {TauFit::impossible, std::nullopt};
          Factorization full = found;
          full.multiply(root, static_cast<std::uint32_t>(e));
          return {TauFit::exact, full};
        }
        break;  // power of a composite: structure still open
      }
    }
  }
  return {TauFit::open, std::nullopt};
}

std::uint64_t tau(const Natural& n, const FactorBudget& budget) {
  FactorResult r = factorize(n, budget);
  if (!r.complete()) {
    fail(Errc::budget_exhausted,
         "tau(" + to_decimal(n) + "): unfactored cofactor " + to_decimal(r.cofactor));
  }
  return tau_of(r.factors);
}

std::optional<Natural> perfect_square_root(const Natural& n) {
  if (sgn(n) < 0) throw std::invalid_argument("perfect_square_root: negative input");
  if (!mpz_perfect_square_p(n.get_mpz_t())) return std::nullopt;
  return isqrt(n);
}

Congruence crt_combine(std::span<const Congruence> congruences) {
  Congruence acc{0, 1};
  for (std::size_t i = 0; i < congruences.size(); ++i) {
    const Natural& mi = congruences[i].modulus;
    if (mi < 1) throw std::invalid_argument("crt_combine: modulus must be >= 1");
    Natural g;
    mpz_gcd(g.get_mpz_t(), acc.modulus.get_mpz_t(), mi.get_mpz_t());
    if (g != 1) {
      for (std::size_t j = 0; j < i; ++j) {
        Natural gj;
        mpz_gcd(gj.get_mpz_t(), congruences[j].modulus.get_mpz_t(), mi.get_mpz_t());
        if (gj != 1) {
          fail(Errc::non_coprime_moduli,
               "crt_combine: moduli " + to_decimal(congruences[j].modulus) + " (index " +
                   std::to_string(j) + ") and " + to_decimal(mi) + " (index " + std::to_string(i) +
                   ") share gcd " + to_decimal(gj));
        }
      }
    }
    Natural ri = congruences[i].remainder % mi;
    // x = acc.r + acc.m * t with t = (ri - acc.r) / acc.m mod mi
    Natural inv;
    if (mpz_invert(inv.get_mpz_t(), acc.modulus.get_mpz_t(), mi.get_mpz_t()) == 0 && mi != 1) {
      fail(Errc::non_coprime_moduli, "crt_combine: modulus not invertible");
    }
    Natural t = (ri - acc.remainder % mi + mi) % mi * inv % mi;
    acc.remainder += acc.modulus * t;
    acc.modulus *= mi;
    acc.remainder %= acc.modulus;
  }
  return acc;
}

std::vector<Natural> sqrt_mod_prime(const Natural& a_in, const Natural& p) {
  if (p < 3 || mpz_even_p(p.get_mpz_t()) || !is_prime(p).is_prime()) {
    fail(Errc::modulus_not_prime, "sqrt_mod_prime: " + to_decimal(p) + " is not an odd prime");
  }
  Natural a = a_in % p;
  if (a == 0) return {Natural(0)};
  if (mpz_legendre(a.get_mpz_t(), p.get_mpz_t()) == -1) return {};

  Natural r;
  if (mpz_fdiv_ui(p.get_mpz_t(), 4) == 3) {
    Natural e = (p + 1) / 4;
    mpz_powm(r.get_mpz_t(), a.get_mpz_t(), e.get_mpz_t(), p.get_mpz_t());
  } else {
    // Tonelli-Shanks
    Natural q = p - 1;
    unsigned long s = mpz_scan1(q.get_mpz_t(), 0);
    mpz_fdiv_q_2exp(q.get_mpz_t(), q.get_mpz_t(), s);
    Natural z = 2;
    while (mpz_legendre(z.get_mpz_t(), p.get_mpz_t()) != -1) ++z;
    Natural c, t;
    mpz_powm(c.get_mpz_t(), z.get_mpz_t(), q.get_mpz_t(), p.get_mpz_t());
    mpz_powm(t.get_mpz_t(), a.get_mpz_t(), q.get_mpz_t(), p.get_mpz_t());
    Natural e = (q + 1) / 2;
    mpz_powm(r.get_mpz_t(), a.get_mpz_t(), e.get_mpz_t(), p.get_mpz_t());
    unsigned long m = s;
    while (t != 1) {
      Natural tt = t;
      unsigned long i = 0;
      while (tt != 1) {
        tt = tt * tt % p;
        ++i;
      }
      Natural b = c;
      for (unsigned long j = 0; j + i + 1 < m; ++j) b = b * b % p;
      r = r * b % p;
      c = b * b % p;
      t = t * c % p;
      m = i;
    }
  }
  Natural other = p - r;
  if (r == other) return {r};
  if (r > other) std::swap(r, other);
  return {r, other};
}

Natural hensel_lift_sqrt(const Natural& a, const Natural& p, std::uint32_t e,
                         const Natural& root_mod_p) {
  if (e == 0) throw std::invalid_argument("hensel_lift_sqrt: e must be >= 1");
  if ((root_mod_p * root_mod_p - a) % p != 0) {
    throw std::invalid_argument("hensel_lift_sqrt: root^2 != a (mod p)");
  }
  if (p == 2 || mpz_divisible_p(root_mod_p.get_mpz_t(), p.get_mpz_t())) {
    fail(Errc::singular_lift, "hensel_lift_sqrt: p divides 2*root, lift not unique");
  }
  Natural pe;
  mpz_pow_ui(pe.get_mpz_t(), p.get_mpz_t(), e);
  Natural modulus = p;
  Natural x = root_mod_p % p;
  std::uint32_t prec = 1;
  while (prec < e) {
    prec = std::min(prec * 2, e);
    mpz_pow_ui(modulus.get_mpz_t(), p.get_mpz_t(), prec);
    Natural two_x = 2 * x % modulus;
    Natural inv;
    if (mpz_invert(inv.get_mpz_t(), two_x.get_mpz_t(), modulus.get_mpz_t()) == 0) {
      fail(Errc::singular_lift, "hensel_lift_sqrt: non-invertible derivative");
    }
    Natural fx = (x * x - a % modulus + modulus * modulus) % modulus;
    x = (x - fx * inv % modulus + modulus) % modulus;
  }
  return x % pe;
}

namespace {

// all y with y^2 = a (mod 2^f), a odd, f >= 1
std::vector<Natural> sqrt_odd_mod_2exp(const Natural& a, std::uint32_t f) {
  Natural mod;
  mpz_pow_ui(mod.get_mpz_t(), Natural(2).get_mpz_t(), f);
  Natural ar = a % mod;
  if (f == 1) return {Natural(1)};
  if (f == 2) {
    if (ar % 4 == 1) return {Natural(1), Natural(3)};
    return {};
  }
  if (ar % 8 != 1) return {};
  Natural y = 1;
  for (std::uint32_t kbit = 3; kbit < f; ++kbit) {
    Natural delta = (y * y - ar) % mod;
    if (delta < 0) delta += mod;
    if (mpz_tstbit(delta.get_mpz_t(), kbit)) {
      Natural add;
      mpz_pow_ui(add.get_mpz_t(), Natural(2).get_mpz_t(), kbit - 1);
      y += add;
    }
  }
  Natural half;
  mpz_pow_ui(half.get_mpz_t(), Natural(2).get_mpz_t(), f - 1);
  std::vector<Natural> roots{y % mod, (mod - y) % mod, (y + half) % mod,
                             (mod - y + half) % mod};
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

}  // namespace

std::vector<Natural> sqrt_all_mod_prime_power(const Natural& a_in, const Natural& p,
                                              std::uint32_t e) {
  Natural pe;
  mpz_pow_ui(pe.get_mpz_t(), p.get_mpz_t(), e);
  Natural a = ((a_in % pe) + pe) % pe;

  std::vector<Natural> roots;
  if (a == 0) {
    // x must be divisible by p^ceil(e/2)
    std::uint32_t h = (e + 1) / 2;
    Natural step;
    mpz_pow_ui(step.get_mpz_t(), p.get_mpz_t(), h);
    for (Natural x = 0; x < pe; x += step) roots.push_back(x);
    return roots;
  }

  // strip the p-valuation of a; odd valuation has no solutions
  std::uint32_t v = 0;
  Natural core = a;
  while (mpz_divisible_p(core.get_mpz_t(), p.get_mpz_t())) {
    mpz_divexact(core.get_mpz_t(), core.get_mpz_t(), p.get_mpz_t());
    ++v;
  }
  if (v % 2 != 0) return {};
  std::uint32_t f = e - v;

  std::vector<Natural> base_roots;
  if (p == 2) {
    base_roots = sqrt_odd_mod_2exp(core, f);
  } else {
    std::vector<Natural> r1 = sqrt_mod_prime(core % p, p);
    if (r1.empty()) return {};
    Natural lifted = f == 1 ? r1.front() : hensel_lift_sqrt(core, p, f, r1.front());
    Natural pf;
    mpz_pow_ui(pf.get_mpz_t(), p.get_mpz_t(), f);
    base_roots = {lifted, (pf - lifted) % pf};
    std::sort(base_roots.begin(), base_roots.end());
    base_roots.erase(std::unique(base_roots.begin(), base_roots.end()), base_roots.end());
  }

  // x = p^(v/2) * y with y ranging over roots mod p^f; expand all lifts mod p^e
  Natural scale, wheel;
  mpz_pow_ui(scale.get_mpz_t(), p.get_mpz_t(), v / 2);
  mpz_pow_ui(wheel.get_mpz_t(), p.get_mpz_t(), e - v / 2);
  Natural count;
  mpz_pow_ui(count.get_mpz_t(), p.get_mpz_t(), v / 2);
  for (const Natural& y : base_roots) {
    for (Natural w = 0; w < count; ++w) {
      roots.push_back((scale * y + w * wheel) % pe);
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

RepunitGcds repunit_gcds(const Natural& n, std::uint64_t s) {
  if (s % 2 == 0) fail(Errc::s_not_odd, "repunit_gcds: s must be odd");
  if (n < 2) throw std::invalid_argument("repunit_gcds: n must be > 1");
  Natural ns;
  mpz_pow_ui(ns.get_mpz_t(), n.get_mpz_t(), s);
  Natural sum_minus, sum_plus;
  mpz_divexact(sum_minus.get_mpz_t(), Natural(ns - 1).get_mpz_t(), Natural(n - 1).get_mpz_t());
  mpz_divexact(sum_plus.get_mpz_t(), Natural(ns + 1).get_mpz_t(), Natural(n + 1).get_mpz_t());
  RepunitGcds out;
  mpz_gcd(out.g_minus.get_mpz_t(), Natural(n - 1).get_mpz_t(), sum_minus.get_mpz_t());
  mpz_gcd(out.g_plus.get_mpz_t(), Natural(n + 1).get_mpz_t(), sum_plus.get_mpz_t());
  return out;
}

// ---- N-1 primality proof ----

namespace {

// Pocklington-Lehmer: with n-1 = F*R, F fully factored and F > sqrt(n), n is
// prime iff for every prime q | F some a has a^(n-1) = 1 (mod n) and
// gcd(a^((n-1)/q) - 1, n) = 1.
PrimalityVerdict pocklington_prove(const Natural& n) {
  if (fits_u64(n)) {
    return is_prime_u64(to_u64(n)) ? PrimalityVerdict{Primality::prime_deterministic, std::nullopt}
                                   : PrimalityVerdict{Primality::composite, std::nullopt};
  }
  const Natural nm1 = n - 1;
  const Natural root = isqrt(n);

  std::map<Natural, std::uint32_t> factored;
  Natural factored_value = 1;
  std::vector<Natural> pending{nm1};

  auto absorb_prime = [&](const Natural& q) {
    std::uint32_t e = 0;
    Natural probe = nm1;
    while (mpz_divisible_p(probe.get_mpz_t(), q.get_mpz_t())) {
      mpz_divexact(probe.get_mpz_t(), probe.get_mpz_t(), q.get_mpz_t());
      ++e;
    }
    if (factored.emplace(q, e).second) {
      Natural powed;
      mpz_pow_ui(powed.get_mpz_t(), q.get_mpz_t(), e);
      factored_value *= powed;
    }
  };

  // peel small primes first
  {
    Natural rest = nm1;
    for (std::uint32_t p : small_primes()) {
      if (Natural(std::uint64_t{p} * p) > rest) break;
      if (mpz_divisible_ui_p(rest.get_mpz_t(), p)) {
        absorb_prime(from_u64(p));
        do {
          mpz_divexact_ui(rest.get_mpz_t(), rest.get_mpz_t(), p);
        } while (mpz_divisible_ui_p(rest.get_mpz_t(), p));
      }
    }
    pending.assign(1, rest);
    if (rest == 1) pending.clear();
  }

  FactorBudget chunk;
  chunk.trial_division_limit = 1;  // already done
  chunk.rho_iteration_limit = 1'000'000;
  chunk.wall_clock_ms = 60'000;

  std::mt19937_64 rng(0xbeefcafef00dULL);
  while (factored_value <= root && !pending.empty()) {
    Natural c = pending.back();
    pending.pop_back();
    if (c == 1) continue;
    bool c_prime = fits_u64(c) ? is_prime_u64(to_u64(c)) : probable_prime_mpz(c, rng(), 24);
    if (c_prime) {
      if (!fits_u64(c)) {
        // the proof must rest on proven primes only
        PrimalityVerdict sub = pocklington_prove(c);
        if (sub.status == Primality::composite) continue;  // extremely unlikely; retry below
      }
      absorb_prime(c);
      continue;
    }
    FactorContext ctx(chunk, rng());
    Natural d = fits_u64(c) ? from_u64(rho_brent_u64(to_u64(c), ctx.effort, ctx.rng))
                            : rho_brent_mpz(c, ctx);
    if (d == 0) {
      // grow the effort and retry; proofs are allowed to be slow
      chunk.rho_iteration_limit *= 2;
      pending.push_back(c);
      continue;
    }
    pending.push_back(d);
    pending.push_back(Natural(c / d));
  }

  if (factored_value <= root) {
    // cannot happen: the loop above only exits with enough factored mass
    fail(Errc::budget_exhausted, "pocklington: unable to factor n-1 far enough");
  }

  for (const auto& [q, e] : factored) {
    Natural exponent = nm1 / q;
    bool certified = false;
    for (std::uint32_t attempt = 0; attempt < 256 && !certified; ++attempt) {
      Natural a = attempt < small_primes().size() ? from_u64(small_primes()[attempt])
                                                  : GmpRng(rng()).below(n - 3) + 2;
      Natural g;
      mpz_gcd(g.get_mpz_t(), a.get_mpz_t(), n.get_mpz_t());
      if (g != 1) {
        if (g < n) return {Primality::composite, g};
        continue;
      }
      Natural x;
      mpz_powm(x.get_mpz_t(), a.get_mpz_t(), exponent.get_mpz_t(), n.get_mpz_t());
      Natural full;
      mpz_powm(full.get_mpz_t(), x.get_mpz_t(), q.get_mpz_t(), n.get_mpz_t());
      if (full != 1) return {Primality::composite, std::nullopt};  // Fermat witness
      mpz_gcd(g.get_mpz_t(), Natural(x - 1).get_mpz_t(), n.get_mpz_t());
      if (g == 1) {
        certified = true;
      } else if (g != n) {
        return {Primality::composite, g};
      }
    }
    if (!certified) {
      fail(Errc::budget_exhausted, "pocklington: no certifying base found for " + to_decimal(q));
    }
  }
  return {Primality::prime_deterministic, std::nullopt};
}

}  // namespace

// ---- Factorization type ----

Natural Factorization::value() const {
  Natural v = 1;
  for (const auto& [p, e] : factors) {
    Natural powed;
    mpz_pow_ui(powed.get_mpz_t(), p.get_mpz_t(), e);
    v *= powed;
  }
  return v;
}

void Factorization::multiply(const Natural& p, std::uint32_t e) {
  if (e == 0) return;
  auto it = std::lower_bound(factors.begin(), factors.end(), p,
                             [](const PrimeFactor& f, const Natural& v) { return f.prime < v; });
  if (it != factors.end() && it->prime == p) {
    it->exponent += e;
  } else {
    factors.insert(it, {p, e});
  }
}

void Factorization::validate() const {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].prime < 2) fail(Errc::schema_violation, "factorization: prime < 2");
    if (factors[i].exponent < 1) fail(Errc::schema_violation, "factorization: exponent < 1");
    if (i > 0 && !(factors[i - 1].prime < factors[i].prime)) {
      fail(Errc::schema_violation, "factorization: primes not strictly increasing");
    }
  }
}

std::uint64_t tau_of(const Factorization& f) {
  std::uint64_t t = 1;
  for (const auto& [p, e] : f.factors) {
    std::uint64_t term = std::uint64_t{e} + 1;
    if (t > std::numeric_limits<std::uint64_t>::max() / term) {
      throw std::overflow_error("tau_of: divisor count exceeds 64 bits");
    }
    t *= term;
  }
  return t;
}

void to_json(nlohmann::json& j, const Factorization& f) {
  j = nlohmann::json::array();
  for (const auto& [p, e] : f.factors) {
    j.push_back({{"p", to_decimal(p)}, {"e", e}});
  }
}

namespace detail {

bool probable_prime(const Natural& n, std::uint64_t seed, int rounds) {
  if (n < 2) return false;
  if (fits_u64(n)) return is_prime_u64(to_u64(n));
  if (mpz_even_p(n.get_mpz_t())) return false;
  return probable_prime_mpz(n, seed, rounds);
}

}  // namespace detail

void from_json(const nlohmann::json& j, Factorization& f) {
  if (!j.is_array()) fail(Errc::schema_violation, "factorization: expected array");
  f.factors.clear();
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("p") || !item.contains("e")) {
      fail(Errc::schema_violation, "factorization: expected {\"p\", \"e\"} objects");
    }
    if (!item["p"].is_string() || !item["e"].is_number_unsigned()) {
      fail(Errc::schema_violation, "factorization: p must be decimal string, e unsigned");
    }
    f.factors.push_back({parse_decimal(item["p"].get<std::string>()),
                         item["e"].get<std::uint32_t>()});
  }
  f.validate();
}

}  // namespace equidiv
