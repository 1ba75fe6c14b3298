#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <string>

#include "corners/errors.hpp"

namespace corners {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

// Every finite double is m * 2^e with |m| < 2^53, so this is exact.
inline BigRat rational_from_double(double x) {
    if (!std::isfinite(x)) throw DomainError("cannot convert non-finite value to a rational");
    if (x == 0.0) return BigRat(0);
    int e = 0;
    const double m = std::frexp(x, &e);           // x = m * 2^e, |m| in [0.5, 1)
    const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));  // integer, exact
    e -= 53;
    if (e >= 0) return BigRat(BigInt(mant) << e);
    return BigRat(BigInt(mant), BigInt(1) << -e);
}

inline std::string format_rational(const BigRat& r) {
    const BigInt num = boost::multiprecision::numerator(r);
    const BigInt den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

}  // namespace corners
