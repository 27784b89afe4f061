#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bindertrace {

/// Linux user ID identifying an app. Ordinary apps live at uid >= 10000;
/// smaller values are system senders and merely flagged, never rejected.
struct AppId {
    uint32_t uid = 0;

    bool is_system() const { return uid < 10000; }

    friend bool operator==(const AppId&, const AppId&) = default;
    friend auto operator<=>(const AppId&, const AppId&) = default;
};

enum class SyscallKind { Open, Connect };
enum class AddrFamily { Inet4, Inet6, Unix, Other };

struct SyscallEvent {
    SyscallKind kind = SyscallKind::Open;
    AppId uid;
    uint64_t timestamp_ns = 0;
    // Open only
    std::string path;
    // Connect only
    std::optional<AddrFamily> addr_family;
    std::string addr;

    friend bool operator==(const SyscallEvent&, const SyscallEvent&) = default;
};

/// Snapshot of a Binder transaction captured kernel-side before the
/// driver copies it into the target's address space.
struct BinderTransactionRecord {
    static constexpr size_t kMaxBufferLen = 1u << 20;  // 1 MiB

    AppId sender_euid;
    uint32_t code = 0;
    std::vector<uint8_t> buffer;
    uint64_t timestamp_ns = 0;

    friend bool operator==(const BinderTransactionRecord&, const BinderTransactionRecord&) = default;
};

struct ArgValue;

struct CompositeValue {
    std::string type_name;
    std::vector<ArgValue> fields;

    friend bool operator==(const CompositeValue&, const CompositeValue&);
};

/// One decoded method argument. Bool precedes the integer alternatives in
/// the variant so brace construction from a bool literal stays unambiguous.
struct ArgValue {
    using Storage = std::variant<bool, int32_t, int64_t, float, double,
                                 std::string, std::vector<uint8_t>, CompositeValue>;
    Storage v;

    static ArgValue i32(int32_t x) { return {Storage{std::in_place_type<int32_t>, x}}; }
    static ArgValue i64(int64_t x) { return {Storage{std::in_place_type<int64_t>, x}}; }
    static ArgValue f32(float x) { return {Storage{std::in_place_type<float>, x}}; }
    static ArgValue f64(double x) { return {Storage{std::in_place_type<double>, x}}; }
    static ArgValue boolean(bool x) { return {Storage{std::in_place_type<bool>, x}}; }
    static ArgValue str(std::string x) { return {Storage{std::in_place_type<std::string>, std::move(x)}}; }
    static ArgValue bytes(std::vector<uint8_t> x) {
        return {Storage{std::in_place_type<std::vector<uint8_t>>, std::move(x)}};
    }
    static ArgValue composite(std::string type_name, std::vector<ArgValue> fields) {
        return {Storage{std::in_place_type<CompositeValue>,
                        CompositeValue{std::move(type_name), std::move(fields)}}};
    }

    friend bool operator==(const ArgValue&, const ArgValue&);
};

/// Human-readable display form, used when lowering call arguments into
/// logical predicate values.
std::string to_display_string(const ArgValue& v);

struct DecodedCall {
    AppId sender;
    std::string interface_name;
    std::string method_name;
    std::vector<ArgValue> args;
    uint64_t timestamp_ns = 0;

    friend bool operator==(const DecodedCall&, const DecodedCall&) = default;
};

/// Total validation: returns every invariant violation, empty when well formed.
std::vector<std::string> validate_event(const SyscallEvent& e);
std::vector<std::string> validate_event(const BinderTransactionRecord& r);

/// Monotonic process-wide clock used for all event timestamps.
uint64_t monotonic_now_ns();

}  // namespace bindertrace
