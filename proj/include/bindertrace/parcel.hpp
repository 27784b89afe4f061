#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bindertrace/events.hpp"

namespace bindertrace {

// ---------------------------------------------------------------------------
// Errors

struct CodecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BufferUnderrun : CodecError {
    BufferUnderrun() : CodecError("buffer underrun") {}
    explicit BufferUnderrun(const std::string& what) : CodecError(what) {}
};

struct MalformedData : CodecError {
    explicit MalformedData(const std::string& what) : CodecError(what) {}
};

struct ArityMismatch : CodecError {
    explicit ArityMismatch(const std::string& what) : CodecError(what) {}
};

struct TypeMismatch : CodecError {
    explicit TypeMismatch(const std::string& what) : CodecError(what) {}
};

struct UnknownComposite : CodecError {
    explicit UnknownComposite(const std::string& type_name)
        : CodecError("unknown composite type: " + type_name), type_name(type_name) {}
    std::string type_name;
};

struct UnknownInterface : CodecError {
    explicit UnknownInterface(const std::string& name)
        : CodecError("unknown interface: " + name), interface_name(name) {}
    std::string interface_name;
};

struct UnknownCode : CodecError {
    UnknownCode(const std::string& iface, uint32_t code)
        : CodecError("unknown code " + std::to_string(code) + " under " + iface),
          interface_name(iface),
          code(code) {}
    std::string interface_name;
    uint32_t code;
};

/// Decoding stopped at argument `arg_index`; everything before it is in
/// `partial_args` and nothing after it is recoverable.
struct DecodeFailed : CodecError {
    DecodeFailed(size_t arg_index, std::vector<ArgValue> partial_args, const std::string& cause)
        : CodecError("decode failed at argument " + std::to_string(arg_index) + ": " + cause),
          arg_index(arg_index),
          partial_args(std::move(partial_args)),
          cause(cause) {}
    size_t arg_index;
    std::vector<ArgValue> partial_args;
    std::string cause;
};

struct DuplicateEntry : CodecError {
    explicit DuplicateEntry(const std::string& what) : CodecError(what) {}
};

struct CyclicComposite : CodecError {
    explicit CyclicComposite(const std::string& type_name)
        : CodecError("cyclic composite spec: " + type_name) {}
};

struct RegistryParseError : CodecError {
    RegistryParseError(int line_no, const std::string& what)
        : CodecError("registry line " + std::to_string(line_no) + ": " + what), line_no(line_no) {}
    int line_no;
};

// ---------------------------------------------------------------------------
// ParcelBuffer
//
// Wire layout: all scalars little-endian. int32/float32 take 4 bytes,
// int64/float64 take 8, bool is int32 0/1. String is int32 code-unit count +
// UTF-16LE units + 16-bit zero terminator + pad to 4. Byte array is int32
// length + bytes + pad to 4. Composites are their fields concatenated with
// no tag. Every write keeps the total length a multiple of 4.

class ParcelBuffer {
public:
    ParcelBuffer() = default;
    explicit ParcelBuffer(std::vector<uint8_t> data) : data_(std::move(data)) {}

    const std::vector<uint8_t>& data() const { return data_; }
    size_t size() const { return data_.size(); }
    size_t cursor() const { return cursor_; }
    void rewind() { cursor_ = 0; }
    size_t remaining() const { return data_.size() - cursor_; }

    void write_int32(int32_t v);
    void write_int64(int64_t v);
    void write_float32(float v);
    void write_float64(double v);
    void write_bool(bool v);
    void write_string(const std::string& utf8);
    void write_bytes(std::span<const uint8_t> bytes);

    int32_t read_int32();
    int64_t read_int64();
    float read_float32();
    double read_float64();
    bool read_bool();
    std::string read_string();
    std::vector<uint8_t> read_bytes();

private:
    void append_raw(const void* p, size_t n);
    void take_raw(void* p, size_t n);

    std::vector<uint8_t> data_;
    size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Signatures and registry

struct TypeDescriptor {
    enum class Kind { Int32, Int64, Float32, Float64, Bool, Str, Bytes, Composite };
    Kind kind = Kind::Int32;
    std::string composite_name;  // Kind::Composite only

    static TypeDescriptor composite(std::string name) {
        return {Kind::Composite, std::move(name)};
    }

    friend bool operator==(const TypeDescriptor&, const TypeDescriptor&) = default;
};

/// Parses the registry grammar's type token (i32, i64, f32, f64, bool, str,
/// bytes, composite:<Name>).
TypeDescriptor parse_type_token(const std::string& token);
std::string type_token(const TypeDescriptor& td);

struct MethodSignature {
    std::string interface_name;
    uint32_t code = 0;
    std::string method_name;
    std::vector<TypeDescriptor> arg_types;
};

/// (interface, code) -> method signature, plus registered composite layouts
/// standing in for createFromParcel(). Built once, then read-only.
class SignatureRegistry {
public:
    void register_signature(MethodSignature sig);
    void register_composite(const std::string& type_name, std::vector<TypeDescriptor> fields);

    const MethodSignature* find(const std::string& interface_name, uint32_t code) const;
    const std::vector<TypeDescriptor>* find_composite(const std::string& type_name) const;
    bool has_interface(const std::string& interface_name) const;

    std::vector<const MethodSignature*> signatures() const;

    /// Loads `sig <interface> <code> <method> <type>*` and
    /// `composite <type_name> <field_type>*` lines; '#' starts a comment.
    static SignatureRegistry load(std::istream& in);
    static SignatureRegistry load_file(const std::string& path);

private:
    void check_acyclic(const std::string& root) const;

    std::map<std::pair<std::string, uint32_t>, MethodSignature> sigs_;
    std::map<std::string, std::vector<TypeDescriptor>> composites_;
};

// ---------------------------------------------------------------------------
// Marshal / unmarshal

/// Encodes interface name first, then each argument in signature order.
ParcelBuffer marshal(const MethodSignature& sig, const std::vector<ArgValue>& args,
                     const SignatureRegistry& registry);

/// Decodes a captured transaction back into a human-readable call. Hostile
/// input is fine: throws UnknownInterface, UnknownCode, DecodeFailed,
/// BufferUnderrun or MalformedData, never crashes.
DecodedCall unmarshal(const BinderTransactionRecord& rec, const SignatureRegistry& registry);

}  // namespace bindertrace
