#pragma once

#include <random>
#include <string>
#include <vector>

#include "bindertrace/parcel.hpp"

namespace bindertrace::testutil {

// Type-correct random argument generator used by the roundtrip properties.
inline ArgValue random_value(std::mt19937_64& rng, const TypeDescriptor& td,
                             const SignatureRegistry& reg) {
    using K = TypeDescriptor::Kind;
    switch (td.kind) {
        case K::Int32: return ArgValue::i32(static_cast<int32_t>(rng()));
        case K::Int64: return ArgValue::i64(static_cast<int64_t>(rng()));
        case K::Float32: return ArgValue::f32(static_cast<float>(rng() % 100000) / 7.0f);
        case K::Float64: return ArgValue::f64(static_cast<double>(rng() % 1000000) / 13.0);
        case K::Bool: return ArgValue::boolean(rng() % 2 == 0);
        case K::Str: {
            std::string s;
            size_t n = rng() % 24;
            for (size_t i = 0; i < n; ++i) {
                // mix ASCII with some non-ASCII code points
                uint32_t pick = rng() % 40;
                if (pick < 36) {
                    s.push_back(static_cast<char>('0' + pick));
                } else if (pick < 38) {
                    s += "\xc3\xa9";  // e acute
                } else {
                    s += "\xf0\x9f\x98\x80";  // emoji, surrogate pair on the wire
                }
            }
            return ArgValue::str(s);
        }
        case K::Bytes: {
            std::vector<uint8_t> b(rng() % 33);
            for (auto& x : b) x = static_cast<uint8_t>(rng());
            return ArgValue::bytes(std::move(b));
        }
        case K::Composite: {
            const auto* fields = reg.find_composite(td.composite_name);
            std::vector<ArgValue> vals;
            for (const auto& f : *fields) vals.push_back(random_value(rng, f, reg));
            return ArgValue::composite(td.composite_name, std::move(vals));
        }
    }
    return ArgValue::i32(0);
}

inline std::vector<ArgValue> random_args(std::mt19937_64& rng, const MethodSignature& sig,
                                         const SignatureRegistry& reg) {
    std::vector<ArgValue> out;
    for (const auto& t : sig.arg_types) out.push_back(random_value(rng, t, reg));
    return out;
}

}  // namespace bindertrace::testutil
