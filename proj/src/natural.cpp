#include "equidiv/natural.hpp"

#include "equidiv/error.hpp"

namespace equidiv {

std::string to_decimal(const Natural& n) { return n.get_str(10); }

Natural parse_decimal(const std::string& s) {
  if (s.empty()) fail(Errc::bad_decimal, "empty decimal string");
  if (s.size() > 1 && s[0] == '0') fail(Errc::bad_decimal, "leading zero in \"" + s + "\"");
  for (char c : s) {
    if (c < '0' || c > '9') fail(Errc::bad_decimal, "non-digit in \"" + s + "\"");
  }
  Natural n;
  if (n.set_str(s, 10) != 0) fail(Errc::bad_decimal, "unparsable \"" + s + "\"");
  return n;
}

bool fits_u64(const Natural& n) { return sgn(n) >= 0 && n.fits_ulong_p(); }

std::uint64_t to_u64(const Natural& n) {
  static_assert(sizeof(unsigned long) == 8, "64-bit unsigned long expected");
  return static_cast<std::uint64_t>(n.get_ui());
}

Natural from_u64(std::uint64_t v) { return Natural(static_cast<unsigned long>(v)); }

Natural isqrt(const Natural& n) {
  Natural r;
  mpz_sqrt(r.get_mpz_t(), n.get_mpz_t());
  return r;
}

}  // namespace equidiv
