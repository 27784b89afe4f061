#include "bindertrace/interceptor.hpp"

#include <fstream>
#include <sstream>

namespace bindertrace {

void Interceptor::attach_probe(ProbePoint point, Handler handler) {
    std::lock_guard lk(mu_);
    if (probes_.count(point)) throw AlreadyAttached();
    probes_.emplace(point, std::move(handler));
}

void Interceptor::detach_probe(ProbePoint point) {
    std::lock_guard lk(mu_);
    if (!probes_.erase(point)) throw NotAttached();
}

bool Interceptor::is_attached(ProbePoint point) const {
    std::lock_guard lk(mu_);
    return probes_.count(point) > 0;
}

bool Interceptor::gate(AppId uid, ProbePoint point) const {
    return globally_enabled_ && monitored_uids_.count(uid.uid) > 0 && probes_.count(point) > 0;
}

void Interceptor::fire(ProbePoint point, const RawEvent& e) {
    auto it = probes_.find(point);
    if (it != probes_.end() && it->second) it->second(e);
}

std::optional<SyscallEvent> Interceptor::on_sys_open(AppId uid, const std::string& path,
                                                     int /*flags*/) {
    std::lock_guard lk(mu_);
    if (!gate(uid, ProbePoint::SysOpen)) return std::nullopt;
    if (path.find(sdcard_substring_) == std::string::npos) return std::nullopt;
    SyscallEvent e;
    e.kind = SyscallKind::Open;
    e.uid = uid;
    e.timestamp_ns = monotonic_now_ns();
    e.path = path;
    fire(ProbePoint::SysOpen, e);
    return e;
}

std::optional<SyscallEvent> Interceptor::on_sys_connect(AppId uid, AddrFamily family,
                                                        const std::string& addr) {
    std::lock_guard lk(mu_);
    if (!gate(uid, ProbePoint::SysConnect)) return std::nullopt;
    if (family != AddrFamily::Inet4 && family != AddrFamily::Inet6) return std::nullopt;
    SyscallEvent e;
    e.kind = SyscallKind::Connect;
    e.uid = uid;
    e.timestamp_ns = monotonic_now_ns();
    e.addr_family = family;
    e.addr = addr;
    fire(ProbePoint::SysConnect, e);
    return e;
}

std::optional<BinderTransactionRecord> Interceptor::on_binder_write(
    BinderSignal signal, const BinderTransactionRecord& txn) {
    std::lock_guard lk(mu_);
    if (!gate(txn.sender_euid, ProbePoint::BinderThreadWrite)) return std::nullopt;
    if (signal != BinderSignal::BC_TRANSACTION) return std::nullopt;
    // Copy taken before the kernel would hand the buffer to the target, so
    // later mutation of the source cannot change the emitted record.
    BinderTransactionRecord snapshot = txn;
    if (snapshot.timestamp_ns == 0) snapshot.timestamp_ns = monotonic_now_ns();
    fire(ProbePoint::BinderThreadWrite, snapshot);
    return snapshot;
}

void Interceptor::set_monitored(AppId uid, bool on) {
    std::lock_guard lk(mu_);
    if (on)
        monitored_uids_.insert(uid.uid);
    else
        monitored_uids_.erase(uid.uid);
}

void Interceptor::set_global(bool on) {
    std::lock_guard lk(mu_);
    globally_enabled_ = on;
}

bool Interceptor::globally_enabled() const {
    std::lock_guard lk(mu_);
    return globally_enabled_;
}

bool Interceptor::is_monitored(AppId uid) const {
    std::lock_guard lk(mu_);
    return monitored_uids_.count(uid.uid) > 0;
}

void Interceptor::set_sdcard_substring(std::string s) {
    std::lock_guard lk(mu_);
    sdcard_substring_ = std::move(s);
}

std::string Interceptor::sdcard_substring() const {
    std::lock_guard lk(mu_);
    return sdcard_substring_;
}

namespace {

AddrFamily parse_family(const std::string& tok, int line_no) {
    if (tok == "inet4") return AddrFamily::Inet4;
    if (tok == "inet6") return AddrFamily::Inet6;
    if (tok == "unix") return AddrFamily::Unix;
    if (tok == "other") return AddrFamily::Other;
    throw TraceParseError(line_no, "unknown address family: " + tok);
}

std::vector<uint8_t> parse_hex(const std::string& hex, int line_no) {
    if (hex.size() % 2 != 0) throw TraceParseError(line_no, "odd-length hex payload");
    std::vector<uint8_t> out;
    out.reserve(hex.size() / 2);
    auto nib = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw TraceParseError(line_no, "invalid hex digit");
    };
    for (size_t i = 0; i < hex.size(); i += 2)
        out.push_back(static_cast<uint8_t>(nib(hex[i]) << 4 | nib(hex[i + 1])));
    return out;
}

}  // namespace

std::vector<RawEvent> Interceptor::replay(std::istream& in) {
    std::vector<RawEvent> emitted;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "open") {
            uint32_t uid;
            std::string path;
            if (!(ls >> uid >> path)) throw TraceParseError(line_no, "expected: open <uid> <path>");
            if (auto e = on_sys_open(AppId{uid}, path)) emitted.emplace_back(*e);
        } else if (kw == "connect") {
            uint32_t uid;
            std::string fam, addr;
            if (!(ls >> uid >> fam >> addr))
                throw TraceParseError(line_no, "expected: connect <uid> <family> <addr>");
            if (auto e = on_sys_connect(AppId{uid}, parse_family(fam, line_no), addr))
                emitted.emplace_back(*e);
        } else if (kw == "binder") {
            uint32_t uid, code;
            std::string iface, hex;
            if (!(ls >> uid >> iface >> code >> hex))
                throw TraceParseError(line_no, "expected: binder <uid> <interface> <code> <hex>");
            BinderTransactionRecord rec;
            rec.sender_euid = AppId{uid};
            rec.code = code;
            rec.buffer = parse_hex(hex, line_no);
            if (auto e = on_binder_write(BinderSignal::BC_TRANSACTION, rec))
                emitted.emplace_back(*e);
        } else {
            throw TraceParseError(line_no, "unknown directive: " + kw);
        }
    }
    return emitted;
}

std::vector<RawEvent> Interceptor::replay_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return replay(in);
}

}  // namespace bindertrace
