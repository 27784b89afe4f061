#include "bindertrace/parcel.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace bindertrace {

namespace {

// UTF-8 <-> UTF-16LE, surrogate pairs included. Invalid input raises
// MalformedData so fuzzed buffers surface as declared errors.

std::vector<uint16_t> utf8_to_utf16(const std::string& s) {
    std::vector<uint16_t> out;
    size_t i = 0;
    while (i < s.size()) {
        uint32_t cp = 0;
        unsigned char c = s[i];
        size_t extra = 0;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            extra = 2;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            extra = 3;
        } else {
            throw MalformedData("invalid UTF-8 lead byte");
        }
        if (i + extra >= s.size()) throw MalformedData("truncated UTF-8 sequence");
        for (size_t k = 1; k <= extra; ++k) {
            unsigned char cc = s[i + k];
            if ((cc & 0xC0) != 0x80) throw MalformedData("invalid UTF-8 continuation");
            cp = (cp << 6) | (cc & 0x3F);
        }
        i += extra + 1;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            throw MalformedData("invalid code point");
        if (cp >= 0x10000) {
            cp -= 0x10000;
            out.push_back(static_cast<uint16_t>(0xD800 | (cp >> 10)));
            out.push_back(static_cast<uint16_t>(0xDC00 | (cp & 0x3FF)));
        } else {
            out.push_back(static_cast<uint16_t>(cp));
        }
    }
    return out;
}

std::string utf16_to_utf8(const std::vector<uint16_t>& units) {
    std::string out;
    size_t i = 0;
    while (i < units.size()) {
        uint32_t cp = units[i];
        if (cp >= 0xD800 && cp <= 0xDBFF) {
            if (i + 1 >= units.size()) throw MalformedData("lone high surrogate");
            uint32_t lo = units[i + 1];
            if (lo < 0xDC00 || lo > 0xDFFF) throw MalformedData("invalid surrogate pair");
            cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
            i += 2;
        } else if (cp >= 0xDC00 && cp <= 0xDFFF) {
            throw MalformedData("lone low surrogate");
        } else {
            i += 1;
        }
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

}  // namespace

void ParcelBuffer::append_raw(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    data_.insert(data_.end(), b, b + n);
}

void ParcelBuffer::take_raw(void* p, size_t n) {
    if (remaining() < n) throw BufferUnderrun();
    std::memcpy(p, data_.data() + cursor_, n);
    cursor_ += n;
}

void ParcelBuffer::write_int32(int32_t v) { append_raw(&v, 4); }
void ParcelBuffer::write_int64(int64_t v) { append_raw(&v, 8); }
void ParcelBuffer::write_float32(float v) { append_raw(&v, 4); }
void ParcelBuffer::write_float64(double v) { append_raw(&v, 8); }
void ParcelBuffer::write_bool(bool v) { write_int32(v ? 1 : 0); }

void ParcelBuffer::write_string(const std::string& utf8) {
    auto units = utf8_to_utf16(utf8);
    write_int32(static_cast<int32_t>(units.size()));
    for (uint16_t u : units) append_raw(&u, 2);
    uint16_t term = 0;
    append_raw(&term, 2);
    while (data_.size() % 4 != 0) data_.push_back(0);
}

void ParcelBuffer::write_bytes(std::span<const uint8_t> bytes) {
    write_int32(static_cast<int32_t>(bytes.size()));
    append_raw(bytes.data(), bytes.size());
    while (data_.size() % 4 != 0) data_.push_back(0);
}

int32_t ParcelBuffer::read_int32() {
    int32_t v;
    take_raw(&v, 4);
    return v;
}

int64_t ParcelBuffer::read_int64() {
    int64_t v;
    take_raw(&v, 8);
    return v;
}

float ParcelBuffer::read_float32() {
    float v;
    take_raw(&v, 4);
    return v;
}

double ParcelBuffer::read_float64() {
    double v;
    take_raw(&v, 8);
    return v;
}

bool ParcelBuffer::read_bool() {
    int32_t v = read_int32();
    if (v != 0 && v != 1) throw MalformedData("bool field is not 0/1");
    return v == 1;
}

std::string ParcelBuffer::read_string() {
    int32_t count = read_int32();
    if (count < 0) throw MalformedData("negative string length");
    if (remaining() < (static_cast<size_t>(count) + 1) * 2) throw BufferUnderrun();
    std::vector<uint16_t> units(static_cast<size_t>(count));
    for (auto& u : units) take_raw(&u, 2);
    uint16_t term;
    take_raw(&term, 2);
    if (term != 0) throw MalformedData("missing string terminator");
    size_t pad = (4 - (4 + (static_cast<size_t>(count) + 1) * 2) % 4) % 4;
    if (remaining() < pad) throw BufferUnderrun();
    cursor_ += pad;
    return utf16_to_utf8(units);
}

std::vector<uint8_t> ParcelBuffer::read_bytes() {
    int32_t len = read_int32();
    if (len < 0) throw MalformedData("negative byte-array length");
    if (remaining() < static_cast<size_t>(len)) throw BufferUnderrun();
    std::vector<uint8_t> out(static_cast<size_t>(len));
    take_raw(out.data(), out.size());
    size_t pad = (4 - static_cast<size_t>(len) % 4) % 4;
    if (remaining() < pad) throw BufferUnderrun();
    cursor_ += pad;
    return out;
}

// ---------------------------------------------------------------------------

TypeDescriptor parse_type_token(const std::string& token) {
    using K = TypeDescriptor::Kind;
    if (token == "i32") return {K::Int32, {}};
    if (token == "i64") return {K::Int64, {}};
    if (token == "f32") return {K::Float32, {}};
    if (token == "f64") return {K::Float64, {}};
    if (token == "bool") return {K::Bool, {}};
    if (token == "str") return {K::Str, {}};
    if (token == "bytes") return {K::Bytes, {}};
    if (token.rfind("composite:", 0) == 0) {
        std::string name = token.substr(10);
        if (name.empty()) throw MalformedData("composite type token without a name");
        return TypeDescriptor::composite(std::move(name));
    }
    throw MalformedData("unknown type token: " + token);
}

std::string type_token(const TypeDescriptor& td) {
    using K = TypeDescriptor::Kind;
    switch (td.kind) {
        case K::Int32: return "i32";
        case K::Int64: return "i64";
        case K::Float32: return "f32";
        case K::Float64: return "f64";
        case K::Bool: return "bool";
        case K::Str: return "str";
        case K::Bytes: return "bytes";
        case K::Composite: return "composite:" + td.composite_name;
    }
    return "?";
}

void SignatureRegistry::register_signature(MethodSignature sig) {
    if (sig.method_name.empty()) throw MalformedData("empty method name");
    auto key = std::make_pair(sig.interface_name, sig.code);
    if (sigs_.count(key))
        throw DuplicateEntry("duplicate signature (" + sig.interface_name + ", " +
                             std::to_string(sig.code) + ")");
    sigs_.emplace(std::move(key), std::move(sig));
}

void SignatureRegistry::register_composite(const std::string& type_name,
                                           std::vector<TypeDescriptor> fields) {
    if (type_name.empty()) throw MalformedData("empty composite name");
    if (composites_.count(type_name)) throw DuplicateEntry("duplicate composite " + type_name);
    composites_.emplace(type_name, std::move(fields));
    try {
        check_acyclic(type_name);
    } catch (...) {
        composites_.erase(type_name);
        throw;
    }
}

void SignatureRegistry::check_acyclic(const std::string& root) const {
    // DFS over registered composite specs; unregistered names are leaves
    // until they get registered, at which point they are re-checked.
    std::set<std::string> on_path;
    auto visit = [&](auto&& self, const std::string& name) -> void {
        if (on_path.count(name)) throw CyclicComposite(name);
        auto it = composites_.find(name);
        if (it == composites_.end()) return;
        on_path.insert(name);
        for (const auto& f : it->second)
            if (f.kind == TypeDescriptor::Kind::Composite) self(self, f.composite_name);
        on_path.erase(name);
    };
    // A newly registered spec can close a cycle anywhere in the graph.
    for (const auto& [name, _] : composites_) visit(visit, name);
    (void)root;
}

const MethodSignature* SignatureRegistry::find(const std::string& interface_name,
                                               uint32_t code) const {
    auto it = sigs_.find({interface_name, code});
    return it == sigs_.end() ? nullptr : &it->second;
}

const std::vector<TypeDescriptor>* SignatureRegistry::find_composite(
    const std::string& type_name) const {
    auto it = composites_.find(type_name);
    return it == composites_.end() ? nullptr : &it->second;
}

bool SignatureRegistry::has_interface(const std::string& interface_name) const {
    auto it = sigs_.lower_bound({interface_name, 0});
    return it != sigs_.end() && it->first.first == interface_name;
}

std::vector<const MethodSignature*> SignatureRegistry::signatures() const {
    std::vector<const MethodSignature*> out;
    out.reserve(sigs_.size());
    for (const auto& [_, sig] : sigs_) out.push_back(&sig);
    return out;
}

SignatureRegistry SignatureRegistry::load(std::istream& in) {
    SignatureRegistry reg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        try {
            if (kw == "sig") {
                MethodSignature sig;
                if (!(ls >> sig.interface_name >> sig.code >> sig.method_name))
                    throw MalformedData("expected: sig <interface> <code> <method> <type>*");
                std::string tok;
                while (ls >> tok) sig.arg_types.push_back(parse_type_token(tok));
                reg.register_signature(std::move(sig));
            } else if (kw == "composite") {
                std::string name, tok;
                if (!(ls >> name))
                    throw MalformedData("expected: composite <type_name> <field_type>*");
                std::vector<TypeDescriptor> fields;
                while (ls >> tok) fields.push_back(parse_type_token(tok));
                reg.register_composite(name, std::move(fields));
            } else {
                throw MalformedData("unknown directive: " + kw);
            }
        } catch (const RegistryParseError&) {
            throw;
        } catch (const CodecError& e) {
            throw RegistryParseError(line_no, e.what());
        }
    }
    return reg;
}

SignatureRegistry SignatureRegistry::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CodecError("cannot open registry file: " + path);
    return load(in);
}

// ---------------------------------------------------------------------------

namespace {

void marshal_value(ParcelBuffer& buf, const TypeDescriptor& td, const ArgValue& v,
                   const SignatureRegistry& registry) {
    using K = TypeDescriptor::Kind;
    auto wrong = [&](const char* want) {
        throw TypeMismatch(std::string("expected ") + want + ", got " + to_display_string(v));
    };
    switch (td.kind) {
        case K::Int32:
            if (auto* p = std::get_if<int32_t>(&v.v)) buf.write_int32(*p);
            else wrong("i32");
            break;
        case K::Int64:
            if (auto* p = std::get_if<int64_t>(&v.v)) buf.write_int64(*p);
            else wrong("i64");
            break;
        case K::Float32:
            if (auto* p = std::get_if<float>(&v.v)) buf.write_float32(*p);
            else wrong("f32");
            break;
        case K::Float64:
            if (auto* p = std::get_if<double>(&v.v)) buf.write_float64(*p);
            else wrong("f64");
            break;
        case K::Bool:
            if (auto* p = std::get_if<bool>(&v.v)) buf.write_bool(*p);
            else wrong("bool");
            break;
        case K::Str:
            if (auto* p = std::get_if<std::string>(&v.v)) buf.write_string(*p);
            else wrong("str");
            break;
        case K::Bytes:
            if (auto* p = std::get_if<std::vector<uint8_t>>(&v.v)) buf.write_bytes(*p);
            else wrong("bytes");
            break;
        case K::Composite: {
            auto* p = std::get_if<CompositeValue>(&v.v);
            if (!p || p->type_name != td.composite_name) wrong(td.composite_name.c_str());
            const auto* fields = registry.find_composite(td.composite_name);
            if (!fields) throw UnknownComposite(td.composite_name);
            if (fields->size() != p->fields.size())
                throw ArityMismatch("composite " + td.composite_name + " expects " +
                                    std::to_string(fields->size()) + " fields, got " +
                                    std::to_string(p->fields.size()));
            for (size_t i = 0; i < fields->size(); ++i)
                marshal_value(buf, (*fields)[i], p->fields[i], registry);
            break;
        }
    }
}

ArgValue unmarshal_value(ParcelBuffer& buf, const TypeDescriptor& td,
                         const SignatureRegistry& registry) {
    using K = TypeDescriptor::Kind;
    switch (td.kind) {
        case K::Int32: return ArgValue::i32(buf.read_int32());
        case K::Int64: return ArgValue::i64(buf.read_int64());
        case K::Float32: return ArgValue::f32(buf.read_float32());
        case K::Float64: return ArgValue::f64(buf.read_float64());
        case K::Bool: return ArgValue::boolean(buf.read_bool());
        case K::Str: return ArgValue::str(buf.read_string());
        case K::Bytes: return ArgValue::bytes(buf.read_bytes());
        case K::Composite: {
            const auto* fields = registry.find_composite(td.composite_name);
            if (!fields) throw UnknownComposite(td.composite_name);
            std::vector<ArgValue> vals;
            vals.reserve(fields->size());
            for (const auto& f : *fields) vals.push_back(unmarshal_value(buf, f, registry));
            return ArgValue::composite(td.composite_name, std::move(vals));
        }
    }
    throw MalformedData("unreachable type kind");
}

}  // namespace

ParcelBuffer marshal(const MethodSignature& sig, const std::vector<ArgValue>& args,
                     const SignatureRegistry& registry) {
    if (args.size() != sig.arg_types.size())
        throw ArityMismatch(sig.method_name + " expects " + std::to_string(sig.arg_types.size()) +
                            " args, got " + std::to_string(args.size()));
    ParcelBuffer buf;
    buf.write_string(sig.interface_name);
    for (size_t i = 0; i < args.size(); ++i) marshal_value(buf, sig.arg_types[i], args[i], registry);
    return buf;
}

DecodedCall unmarshal(const BinderTransactionRecord& rec, const SignatureRegistry& registry) {
    ParcelBuffer buf(rec.buffer);
    // A failure here, before any argument, propagates as-is.
    std::string iface = buf.read_string();
    if (!registry.has_interface(iface)) throw UnknownInterface(iface);
    const MethodSignature* sig = registry.find(iface, rec.code);
    if (!sig) throw UnknownCode(iface, rec.code);

    DecodedCall call;
    call.sender = rec.sender_euid;
    call.interface_name = iface;
    call.method_name = sig->method_name;
    call.timestamp_ns = rec.timestamp_ns;
    for (size_t i = 0; i < sig->arg_types.size(); ++i) {
        try {
            call.args.push_back(unmarshal_value(buf, sig->arg_types[i], registry));
        } catch (const DecodeFailed&) {
            throw;
        } catch (const CodecError& e) {
            throw DecodeFailed(i, std::move(call.args), e.what());
        }
    }
    return call;
}

}  // namespace bindertrace
