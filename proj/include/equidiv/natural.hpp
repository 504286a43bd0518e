#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

namespace equidiv {

/// Arbitrary-precision nonnegative integer. All external formats carry these
/// as exact decimal strings.
using Natural = mpz_class;

std::string to_decimal(const Natural& n);

/// Parses a canonical decimal string (digits only, no leading zeros except "0").
/// Throws Error(bad_decimal) otherwise.
Natural parse_decimal(const std::string& s);

bool fits_u64(const Natural& n);
std::uint64_t to_u64(const Natural& n);
Natural from_u64(std::uint64_t v);

/// floor(sqrt(n))
Natural isqrt(const Natural& n);

}  // namespace equidiv
