#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "stancectx/classify.hpp"
#include "stancectx/errors.hpp"

namespace stancectx {

struct OutcomeCounts {
    long long correct = 0;
    long long incorrect = 0;
    long long parse_failures = 0;
    long long backend_failures = 0;

    // Parse failures count as errors; backend failures are excluded because
    // the model never answered.
    long long denominator() const { return correct + incorrect + parse_failures; }
    long long instances() const { return denominator() + backend_failures; }

    void add(Outcome outcome) {
        switch (outcome) {
            case Outcome::Correct: ++correct; break;
            case Outcome::Incorrect: ++incorrect; break;
            case Outcome::ParseFailure: ++parse_failures; break;
            case Outcome::BackendFailure: ++backend_failures; break;
        }
    }
};

// Nearest integer to num/den with halves rounded away from zero, in exact
// integer arithmetic. den must be positive.
inline long long round_half_away(long long num, long long den) {
    if (den <= 0) throw UsageError("round_half_away requires a positive denominator");
    long long q = num / den;
    long long r = num % den;
    if (r < 0) r = -r;
    if (2 * r >= den) q += (num < 0 ? -1 : 1);
    return q;
}

// Accuracy in tenths of a percentage point: 71/200 -> 355 (i.e. 35.5%).
inline long long accuracy_pct_tenths(long long correct, long long denominator) {
    if (denominator <= 0)
        throw UsageError("accuracy undefined over an empty result set");
    return round_half_away(1000 * correct, denominator);
}

// (c2/d2 - c1/d1) in tenths of a point, computed on the exact rational
// difference so the rounding step is the only approximation.
inline long long improvement_tenths(long long correct_ctx, long long denom_ctx,
                                    long long correct_base, long long denom_base) {
    if (denom_ctx <= 0 || denom_base <= 0)
        throw UsageError("improvement undefined over an empty result set");
    return round_half_away(1000 * (correct_ctx * denom_base - correct_base * denom_ctx),
                           denom_ctx * denom_base);
}

inline std::string format_tenths(long long tenths) {
    char buf[32];
    long long whole = tenths / 10;
    long long frac = tenths % 10;
    if (frac < 0) frac = -frac;
    if (tenths < 0 && whole == 0)
        std::snprintf(buf, sizeof buf, "-0.%lld", frac);
    else
        std::snprintf(buf, sizeof buf, "%lld.%lld", whole, frac);
    return buf;
}

inline std::string format_signed_tenths(long long tenths) {
    if (tenths > 0) return "+" + format_tenths(tenths);
    return format_tenths(tenths);
}

inline double accuracy_fraction(const OutcomeCounts& counts) {
    return static_cast<double>(counts.correct) / static_cast<double>(counts.denominator());
}

}  // namespace stancectx
