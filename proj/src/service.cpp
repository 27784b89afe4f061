#include "bindertrace/service.hpp"

#include <sstream>

namespace bindertrace {

TracerService::TracerService(Bridge& bridge, const SignatureRegistry& registry)
    : bridge_(bridge), registry_(registry) {}

void TracerService::start() {
    bridge_.register_callback([this](const NetlinkFrame& f) { on_frame(f); });
}

void TracerService::subscribe(Subscription sub) {
    std::lock_guard lk(mu_);
    if (subs_.count(sub.client_id)) throw DuplicateClient(sub.client_id);
    subs_.emplace(sub.client_id, std::move(sub));
}

void TracerService::unsubscribe(const std::string& client_id) {
    std::lock_guard lk(mu_);
    if (!subs_.erase(client_id)) throw UnknownClient(client_id);
}

void TracerService::set_app_monitoring(AppId uid, bool on) {
    bridge_.send_control(on ? MsgType::EnableUid : MsgType::DisableUid, uid.uid);
}

void TracerService::on_frame(const NetlinkFrame& f) {
    if (f.msg_type != MsgType::Event) return;
    frames_in_.fetch_add(1, std::memory_order_relaxed);
    RawEvent raw = decode_event_payload(f.payload);
    if (const auto* sys = std::get_if<SyscallEvent>(&raw)) {
        // Nothing to unmarshal; delivered as-is.
        decode_ok_.fetch_add(1, std::memory_order_relaxed);
        dispatch(sys->uid.uid, *sys);
        return;
    }
    const auto& rec = std::get<BinderTransactionRecord>(raw);
    try {
        DecodedCall call = unmarshal(rec, registry_);
        decode_ok_.fetch_add(1, std::memory_order_relaxed);
        dispatch(call.sender.uid, call);
    } catch (const CodecError& e) {
        decode_failed_.fetch_add(1, std::memory_order_relaxed);
        dispatch(rec.sender_euid.uid,
                 RawUndecoded{rec.sender_euid, rec.code, rec.timestamp_ns, e.what()});
    }
}

void TracerService::dispatch(uint32_t uid, const ServiceEvent& e) {
    std::lock_guard lk(mu_);
    for (auto& [_, sub] : subs_) {
        if (sub.uid_filter && !sub.uid_filter->count(uid)) continue;
        sub.deliver(e);
        delivered_.fetch_add(1, std::memory_order_relaxed);
    }
}

ServiceStats TracerService::stats() const {
    return {frames_in_.load(), decode_ok_.load(), decode_failed_.load(), delivered_.load()};
}

std::string TracerService::stats_line() const {
    ServiceStats s = stats();
    std::ostringstream os;
    os << "frames_in=" << s.frames_in << " decode_ok=" << s.decode_ok
       << " decode_failed=" << s.decode_failed << " delivered=" << s.delivered;
    return os.str();
}

}  // namespace bindertrace
