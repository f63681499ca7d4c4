#pragma once
// Fixed-point score arithmetic.
//
// Scores are stored as integer hundredths of a point so that component sums
// are exact and comparisons are deterministic across platforms. Weighted
// quantities (test-case weights, regression weights, pass rates) are exact
// rationals; they only collapse to Points at report boundaries.

#include <cstdint>
#include <compare>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>

namespace htmlcure {

class Points {
public:
    constexpr Points() = default;

    static constexpr Points from_hundredths(std::int64_t h) {
        Points p;
        p.hundredths_ = h;
        return p;
    }

    // Round half away from zero; used when an exact rational leaves the
    // representable grid (e.g. 65 * 1/3).
    static Points from_double(double v) {
        return from_hundredths(static_cast<std::int64_t>(std::llround(v * 100.0)));
    }

    constexpr std::int64_t hundredths() const { return hundredths_; }
    double value() const { return static_cast<double>(hundredths_) / 100.0; }

    // "41.25", "10", "62.5" -- trailing zeros trimmed.
    std::string str() const {
        std::int64_t h = hundredths_ < 0 ? -hundredths_ : hundredths_;
        std::string out = hundredths_ < 0 ? "-" : "";
        out += std::to_string(h / 100);
        std::int64_t frac = h % 100;
        if (frac != 0) {
            out += '.';
            out += static_cast<char>('0' + frac / 10);
            if (frac % 10 != 0) out += static_cast<char>('0' + frac % 10);
        }
        return out;
    }

    constexpr Points operator+(Points o) const { return from_hundredths(hundredths_ + o.hundredths_); }
    constexpr Points operator-(Points o) const { return from_hundredths(hundredths_ - o.hundredths_); }
    constexpr Points& operator+=(Points o) { hundredths_ += o.hundredths_; return *this; }
    constexpr Points& operator-=(Points o) { hundredths_ -= o.hundredths_; return *this; }
    friend constexpr auto operator<=>(Points, Points) = default;

private:
    std::int64_t hundredths_ = 0;
};

inline constexpr Points kZeroPoints = Points::from_hundredths(0);

// Exact rational on int64 with normalized sign and gcd-reduced terms.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
        if (den_ == 0) throw std::invalid_argument("Rational: zero denominator");
        normalize();
    }
    static Rational integer(std::int64_t n) { return Rational(n, 1); }

    // Parses plain decimals ("0.5", "-2", "1.25") and exponent forms ("1e-3").
    static Rational from_decimal(const std::string& text);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    bool is_zero() const { return num_ == 0; }
    bool is_negative() const { return num_ < 0; }

    Rational operator+(const Rational& o) const {
        return Rational(checked(static_cast<__int128>(num_) * o.den_ +
                                static_cast<__int128>(o.num_) * den_),
                        checked(static_cast<__int128>(den_) * o.den_));
    }
    Rational operator-(const Rational& o) const {
        return Rational(checked(static_cast<__int128>(num_) * o.den_ -
                                static_cast<__int128>(o.num_) * den_),
                        checked(static_cast<__int128>(den_) * o.den_));
    }
    Rational operator*(const Rational& o) const {
        Rational a(num_, o.den_);
        Rational b(o.num_, den_);
        return Rational(checked(static_cast<__int128>(a.num_) * b.num_),
                        checked(static_cast<__int128>(a.den_) * b.den_));
    }
    Rational operator/(const Rational& o) const {
        if (o.num_ == 0) throw std::invalid_argument("Rational: division by zero");
        return *this * Rational(o.den_, o.num_);
    }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
        __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
        __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
        if (lhs < rhs) return std::strong_ordering::less;
        if (lhs > rhs) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

    // Nearest representable Points value, ties away from zero.
    Points round_to_points() const {
        __int128 scaled = static_cast<__int128>(num_) * 100;
        __int128 q = scaled / den_;
        __int128 r = scaled % den_;
        if (r * 2 >= den_) q += 1;
        else if (-r * 2 >= den_) q -= 1;
        return Points::from_hundredths(static_cast<std::int64_t>(q));
    }

    static Rational from_points(Points p) { return Rational(p.hundredths(), 100); }

private:
    void normalize() {
        if (den_ < 0) { num_ = -num_; den_ = -den_; }
        std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
        if (num_ == 0) den_ = 1;
    }
    static std::int64_t checked(__int128 v) {
        if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("Rational overflow");
        return static_cast<std::int64_t>(v);
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

} // namespace htmlcure
