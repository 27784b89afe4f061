#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "bindertrace/bridge.hpp"
#include "bindertrace/parcel.hpp"

namespace bindertrace {

/// Delivered when a Binder payload could not be unmarshalled: the interaction
/// is still reported, with the codec error verbatim.
struct RawUndecoded {
    AppId uid;
    uint32_t code = 0;
    uint64_t timestamp_ns = 0;
    std::string error;
};

using ServiceEvent = std::variant<DecodedCall, SyscallEvent, RawUndecoded>;

struct Subscription {
    std::string client_id;
    std::optional<std::set<uint32_t>> uid_filter;  // nullopt = all uids
    std::function<void(const ServiceEvent&)> deliver;
};

struct DuplicateClient : std::runtime_error {
    explicit DuplicateClient(const std::string& id)
        : std::runtime_error("duplicate client: " + id) {}
};
struct UnknownClient : std::runtime_error {
    explicit UnknownClient(const std::string& id) : std::runtime_error("unknown client: " + id) {}
};

struct ServiceStats {
    uint64_t frames_in = 0;
    uint64_t decode_ok = 0;
    uint64_t decode_failed = 0;
    uint64_t delivered = 0;
};

/// User-space half of the pipeline: claims the bridge callback, unmarshals
/// Binder payloads through the registry, and fans events out to subscribers.
/// Decode and dispatch run on the bridge's consumer thread; subscription and
/// monitoring changes may come from any thread.
class TracerService {
public:
    TracerService(Bridge& bridge, const SignatureRegistry& registry);

    /// Registers on the bridge; throws CallbackAlreadySet if claimed.
    void start();

    void subscribe(Subscription sub);
    void unsubscribe(const std::string& client_id);

    /// Issues EnableUid/DisableUid downstream; returns after the Ack.
    void set_app_monitoring(AppId uid, bool on);

    ServiceStats stats() const;
    std::string stats_line() const;

private:
    void on_frame(const NetlinkFrame& f);
    void dispatch(uint32_t uid, const ServiceEvent& e);

    Bridge& bridge_;
    const SignatureRegistry& registry_;

    mutable std::mutex mu_;
    std::map<std::string, Subscription> subs_;

    std::atomic<uint64_t> frames_in_{0};
    std::atomic<uint64_t> decode_ok_{0};
    std::atomic<uint64_t> decode_failed_{0};
    std::atomic<uint64_t> delivered_{0};
};

}  // namespace bindertrace
