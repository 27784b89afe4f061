#include "bindertrace/events.hpp"

#include <chrono>
#include <sstream>

namespace bindertrace {

bool operator==(const CompositeValue& a, const CompositeValue& b) {
    return a.type_name == b.type_name && a.fields == b.fields;
}

bool operator==(const ArgValue& a, const ArgValue& b) { return a.v == b.v; }

std::string to_display_string(const ArgValue& v) {
    std::ostringstream os;
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>) {
                os << (x ? "true" : "false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                os << x;
            } else if constexpr (std::is_same_v<T, std::vector<uint8_t>>) {
                os << "<" << x.size() << " bytes>";
            } else if constexpr (std::is_same_v<T, CompositeValue>) {
                os << x.type_name << "{";
                for (size_t i = 0; i < x.fields.size(); ++i) {
                    if (i) os << ",";
                    os << to_display_string(x.fields[i]);
                }
                os << "}";
            } else {
                os << x;
            }
        },
        v.v);
    return os.str();
}

std::vector<std::string> validate_event(const SyscallEvent& e) {
    std::vector<std::string> out;
    if (e.kind == SyscallKind::Open) {
        if (e.path.empty()) out.push_back("empty path on Open");
        if (e.addr_family.has_value() || !e.addr.empty()) out.push_back("addr fields on Open");
    } else {
        if (!e.addr_family.has_value() || e.addr.empty()) out.push_back("missing addr fields on Connect");
        if (!e.path.empty()) out.push_back("path on Connect");
    }
    return out;
}

std::vector<std::string> validate_event(const BinderTransactionRecord& r) {
    std::vector<std::string> out;
    if (r.buffer.size() > BinderTransactionRecord::kMaxBufferLen) out.push_back("buffer exceeds 1 MiB cap");
    if (r.buffer.size() % 4 != 0) out.push_back("alignment");
    return out;
}

uint64_t monotonic_now_ns() {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now().time_since_epoch())
                                     .count());
}

}  // namespace bindertrace
