#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <string_view>

#include "albench/error.hpp"

namespace albench {

/// Element symbol -> atom count (may be fractional, e.g. "Fe0.5Ni0.5").
using Composition = std::map<std::string, double, std::less<>>;

namespace detail {

class FormulaParser {
public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    Composition parse()
    {
        Composition out = group();
        if (pos_ != text_.size())
            fail("unexpected character");
        if (out.empty())
            fail("no elements");
        return out;
    }

private:
    Composition group()
    {
        Composition out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '(' || c == '[') {
                const char close = c == '(' ? ')' : ']';
                ++pos_;
                Composition inner = group();
                if (pos_ >= text_.size() || text_[pos_] != close)
                    fail("unbalanced bracket");
                ++pos_;
                const double mult = count();
                for (const auto& [el, n] : inner)
                    out[el] += n * mult;
            } else if (c == ')' || c == ']') {
                break;
            } else if (std::isupper(static_cast<unsigned char>(c))) {
                std::string symbol(1, c);
                ++pos_;
                while (pos_ < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_])))
                    symbol += text_[pos_++];
                out[symbol] += count();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                fail("unexpected character");
            }
        }
        return out;
    }

    double count()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (start == pos_)
            return 1.0;
        const std::string digits(text_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(digits.c_str(), &end);
        if (end != digits.c_str() + digits.size() || !(v > 0.0))
            fail("bad count '" + digits + "'");
        return v;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ValidationError("formula '" + std::string(text_) + "': " + what + " at position " +
                              std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parse a chemical formula such as "TiO2", "Ca(OH)2" or "Fe0.5Ni0.5".
inline Composition parse_formula(std::string_view formula)
{
    return detail::FormulaParser(formula).parse();
}

/// Canonical reduced formula: counts divided by their common divisor,
/// elements in alphabetical order, unit counts omitted ("O2Ti" -> "O2Ti", "C8" -> "C").
inline std::string reduced_formula(const Composition& comp)
{
    bool integral = true;
    for (const auto& [el, n] : comp)
        if (std::abs(n - std::round(n)) > 1e-8)
            integral = false;

    double divisor = 1.0;
    if (integral) {
        long long g = 0;
        for (const auto& [el, n] : comp)
            g = std::gcd(g, std::llround(n));
        if (g > 0)
            divisor = static_cast<double>(g);
    } else {
        double lo = 0.0;
        for (const auto& [el, n] : comp)
            lo = lo == 0.0 ? n : std::min(lo, n);
        divisor = lo;
    }

    std::string out;
    for (const auto& [el, n] : comp) {
        const double r = n / divisor;
        out += el;
        if (std::abs(r - 1.0) > 1e-8) {
            char buf[32];
            if (std::abs(r - std::round(r)) < 1e-8)
                std::snprintf(buf, sizeof buf, "%lld", std::llround(r));
            else
                std::snprintf(buf, sizeof buf, "%.6g", r);
            out += buf;
        }
    }
    return out;
}

inline std::string reduced_formula(std::string_view formula)
{
    return reduced_formula(parse_formula(formula));
}

} // namespace albench
