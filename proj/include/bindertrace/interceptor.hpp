#pragma once

#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>

#include "bindertrace/events.hpp"

namespace bindertrace {

enum class ProbePoint { SysOpen, SysConnect, BinderThreadWrite };

enum class BinderSignal { BC_TRANSACTION, BC_REPLY, Other };

using RawEvent = std::variant<SyscallEvent, BinderTransactionRecord>;

struct AlreadyAttached : std::runtime_error {
    AlreadyAttached() : std::runtime_error("probe already attached") {}
};

struct NotAttached : std::runtime_error {
    NotAttached() : std::runtime_error("probe not attached") {}
};

struct TraceParseError : std::runtime_error {
    TraceParseError(int line_no, const std::string& what)
        : std::runtime_error("trace line " + std::to_string(line_no) + ": " + what),
          line_no(line_no) {}
    int line_no;
};

/// Simulated kernel-side probe layer. Raw syscall/Binder activity is fed in
/// programmatically or via replay files; events that pass the filters and the
/// per-UID gate are handed to the attached probe handlers.
///
/// Feeding happens on a single thread; enable/disable may come from another
/// thread and takes effect before the next raw event.
class Interceptor {
public:
    using Handler = std::function<void(const RawEvent&)>;

    void attach_probe(ProbePoint point, Handler handler);
    void detach_probe(ProbePoint point);
    bool is_attached(ProbePoint point) const;

    /// Emits an Open event iff the path contains the sdcard substring.
    std::optional<SyscallEvent> on_sys_open(AppId uid, const std::string& path, int flags = 0);

    /// Emits a Connect event iff the address family is Inet4 or Inet6.
    std::optional<SyscallEvent> on_sys_connect(AppId uid, AddrFamily family,
                                               const std::string& addr);

    /// Emits a snapshot of the transaction iff the signal is BC_TRANSACTION.
    std::optional<BinderTransactionRecord> on_binder_write(BinderSignal signal,
                                                           const BinderTransactionRecord& txn);

    void set_monitored(AppId uid, bool on);
    void set_global(bool on);
    bool globally_enabled() const;
    bool is_monitored(AppId uid) const;

    void set_sdcard_substring(std::string s);
    std::string sdcard_substring() const;

    /// Feeds a trace file through the probes: `open <uid> <path>`,
    /// `connect <uid> <family> <addr>`, `binder <uid> <interface> <code> <hex>`.
    /// Returns the emitted events in input order.
    std::vector<RawEvent> replay(std::istream& in);
    std::vector<RawEvent> replay_file(const std::string& path);

private:
    bool gate(AppId uid, ProbePoint point) const;
    void fire(ProbePoint point, const RawEvent& e);

    mutable std::mutex mu_;
    bool globally_enabled_ = true;
    std::set<uint32_t> monitored_uids_;  // opt-in, default empty
    std::string sdcard_substring_ = "sdcard";
    std::map<ProbePoint, Handler> probes_;
};

}  // namespace bindertrace
