#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <concepts>
#include <limits>
#include <string>

#include "qla/errors.hpp"

namespace qla {

// Precision tiers. Everything numeric is templated on the scalar type;
// `double` is the default working tier, the cpp_bin_float tiers back the
// high-precision mode used for asymptotic verification (the forward
// recursion for the infinite invariant measure amplifies rounding
// geometrically in the subcritical regimes).
using real50 = boost::multiprecision::cpp_bin_float_50;
using real100 = boost::multiprecision::cpp_bin_float_100;

template <class R>
concept Scalar = std::same_as<R, double> || std::same_as<R, real50> || std::same_as<R, real100>;

template <Scalar R>
inline constexpr int digits10_v = std::numeric_limits<R>::digits10;

template <Scalar R>
R machine_eps() {
    return std::numeric_limits<R>::epsilon();
}

template <Scalar R>
R infinity() {
    return std::numeric_limits<R>::infinity();
}

// Decimal-literal construction: cpp_bin_float parses the full string, so a
// config value like "0.6" lands on the tier's closest representation rather
// than a double-rounded one.
template <Scalar R>
R from_decimal(const std::string &text) {
    try {
        if constexpr (std::same_as<R, double>) {
            std::size_t pos = 0;
            double v = std::stod(text, &pos);
            if (pos != text.size()) throw InvalidConfig("trailing characters in number: " + text);
            return v;
        } else {
            return R(text);
        }
    } catch (const Error &) {
        throw;
    } catch (const std::exception &) {
        throw InvalidConfig("not a number: " + text);
    }
}

template <Scalar R>
bool is_finite(const R &x) {
    using std::isfinite;
    if constexpr (std::same_as<R, double>) return std::isfinite(x);
    else return isfinite(x);
}

}  // namespace qla
