#include "bindertrace/bridge.hpp"

#include <zlib.h>

#include <cstring>

#include "bindertrace/parcel.hpp"

namespace bindertrace {

uint32_t frame_crc32(std::span<const uint8_t> bytes) {
    return static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::span<const uint8_t> b, size_t off) {
    return static_cast<uint32_t>(b[off]) | static_cast<uint32_t>(b[off + 1]) << 8 |
           static_cast<uint32_t>(b[off + 2]) << 16 | static_cast<uint32_t>(b[off + 3]) << 24;
}

bool known_msg_type(uint8_t t) { return t >= 0x01 && t <= 0x06; }

}  // namespace

std::vector<uint8_t> encode_frame(MsgType t, uint32_t uid, std::span<const uint8_t> payload) {
    std::vector<uint8_t> out;
    out.reserve(16 + payload.size());
    out.push_back(NetlinkFrame::kMagic0);
    out.push_back(NetlinkFrame::kMagic1);
    out.push_back(NetlinkFrame::kVersion);
    out.push_back(static_cast<uint8_t>(t));
    put_u32(out, uid);
    put_u32(out, static_cast<uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, frame_crc32(out));
    return out;
}

NetlinkFrame decode_frame(std::span<const uint8_t> bytes) {
    if (bytes.size() < 16) throw Truncated();
    if (bytes[0] != NetlinkFrame::kMagic0 || bytes[1] != NetlinkFrame::kMagic1) throw BadMagic();
    if (bytes[2] != NetlinkFrame::kVersion) throw BadVersion();
    uint32_t stored = get_u32(bytes, bytes.size() - 4);
    if (frame_crc32(bytes.first(bytes.size() - 4)) != stored) throw ChecksumMismatch();
    if (!known_msg_type(bytes[3])) throw UnknownMsgType();
    uint32_t len = get_u32(bytes, 8);
    if (len != bytes.size() - 16) throw Truncated();
    NetlinkFrame f;
    f.msg_type = static_cast<MsgType>(bytes[3]);
    f.uid = get_u32(bytes, 4);
    f.payload.assign(bytes.begin() + 12, bytes.end() - 4);
    return f;
}

std::vector<NetlinkFrame> decode_frame_stream(std::span<const uint8_t> bytes) {
    std::vector<NetlinkFrame> out;
    size_t off = 0;
    while (off < bytes.size()) {
        if (bytes.size() - off < 12) throw Truncated();
        uint32_t len = get_u32(bytes, off + 8);
        size_t total = 16 + static_cast<size_t>(len);
        if (bytes.size() - off < total) throw Truncated();
        out.push_back(decode_frame(bytes.subspan(off, total)));
        off += total;
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {
constexpr uint8_t kKindOpen = 0x00;
constexpr uint8_t kKindConnect = 0x01;
constexpr uint8_t kKindBinder = 0x02;

void put_parcel_string(std::vector<uint8_t>& out, const std::string& s) {
    ParcelBuffer pb;
    pb.write_string(s);
    out.insert(out.end(), pb.data().begin(), pb.data().end());
}
}  // namespace

std::vector<uint8_t> encode_event_payload(const RawEvent& e) {
    std::vector<uint8_t> out;
    if (const auto* rec = std::get_if<BinderTransactionRecord>(&e)) {
        out.push_back(kKindBinder);
        put_u32(out, rec->sender_euid.uid);
        put_u32(out, rec->code);
        put_u64(out, rec->timestamp_ns);
        put_u32(out, static_cast<uint32_t>(rec->buffer.size()));
        out.insert(out.end(), rec->buffer.begin(), rec->buffer.end());
        return out;
    }
    const auto& s = std::get<SyscallEvent>(e);
    out.push_back(s.kind == SyscallKind::Open ? kKindOpen : kKindConnect);
    put_u32(out, s.uid.uid);
    put_u64(out, s.timestamp_ns);
    if (s.kind == SyscallKind::Open) {
        put_parcel_string(out, s.path);
    } else {
        put_u32(out, static_cast<uint32_t>(s.addr_family.value_or(AddrFamily::Other)));
        put_parcel_string(out, s.addr);
    }
    return out;
}

RawEvent decode_event_payload(std::span<const uint8_t> payload) {
    if (payload.empty()) throw Truncated();
    uint8_t kind = payload[0];
    ParcelBuffer pb(std::vector<uint8_t>(payload.begin() + 1, payload.end()));
    auto read_u32 = [&] { return static_cast<uint32_t>(pb.read_int32()); };
    auto read_u64 = [&] {
        uint64_t lo = read_u32();
        uint64_t hi = read_u32();
        return lo | hi << 32;
    };
    if (kind == kKindBinder) {
        BinderTransactionRecord rec;
        rec.sender_euid = AppId{read_u32()};
        rec.code = read_u32();
        rec.timestamp_ns = read_u64();
        uint32_t len = read_u32();
        if (pb.remaining() < len) throw Truncated();
        rec.buffer.resize(len);
        std::memcpy(rec.buffer.data(), pb.data().data() + pb.cursor(), len);
        return rec;
    }
    SyscallEvent s;
    s.uid = AppId{read_u32()};
    s.timestamp_ns = read_u64();
    if (kind == kKindOpen) {
        s.kind = SyscallKind::Open;
        s.path = pb.read_string();
    } else if (kind == kKindConnect) {
        s.kind = SyscallKind::Connect;
        s.addr_family = static_cast<AddrFamily>(read_u32());
        s.addr = pb.read_string();
    } else {
        throw Truncated();
    }
    return s;
}

// ---------------------------------------------------------------------------

Bridge::Bridge(Interceptor& interceptor, size_t capacity)
    : interceptor_(interceptor), capacity_(capacity) {
    consumer_ = std::thread([this] { consumer_loop(); });
}

Bridge::~Bridge() {
    close();
    if (consumer_.joinable()) consumer_.join();
}

void Bridge::send_event(const RawEvent& e) {
    auto payload = encode_event_payload(e);
    uint32_t uid = std::holds_alternative<SyscallEvent>(e)
                       ? std::get<SyscallEvent>(e).uid.uid
                       : std::get<BinderTransactionRecord>(e).sender_euid.uid;
    auto frame = encode_frame(MsgType::Event, uid, payload);
    {
        std::lock_guard lk(mu_);
        if (closed_) throw ChannelClosed();
        if (queue_.size() >= capacity_) throw QueueFull();
        queue_.push_back(std::move(frame));
    }
    cv_.notify_one();
}

void Bridge::register_callback(Callback f) {
    {
        std::lock_guard lk(mu_);
        if (closed_) throw ChannelClosed();
        if (callback_) throw CallbackAlreadySet();
        callback_ = std::move(f);
    }
    cv_.notify_one();
}

NetlinkFrame Bridge::send_control(MsgType t, uint32_t uid) {
    // Round-trip through the wire format so control frames are exercised
    // bit-exactly, then apply to the interceptor before acking.
    auto bytes = encode_frame(t, uid, {});
    NetlinkFrame req = decode_frame(bytes);
    {
        std::lock_guard lk(mu_);
        if (closed_) throw ChannelClosed();
    }
    switch (req.msg_type) {
        case MsgType::EnableUid: interceptor_.set_monitored(AppId{req.uid}, true); break;
        case MsgType::DisableUid: interceptor_.set_monitored(AppId{req.uid}, false); break;
        case MsgType::GlobalOn: interceptor_.set_global(true); break;
        case MsgType::GlobalOff: interceptor_.set_global(false); break;
        default: throw FrameError("not a control message");
    }
    uint8_t echo = static_cast<uint8_t>(req.msg_type);
    return decode_frame(encode_frame(MsgType::Ack, uid, std::span<const uint8_t>(&echo, 1)));
}

void Bridge::close() {
    {
        std::lock_guard lk(mu_);
        closed_ = true;
    }
    cv_.notify_all();
    drained_cv_.notify_all();
}

bool Bridge::closed() const {
    std::lock_guard lk(mu_);
    return closed_;
}

void Bridge::drain() {
    std::unique_lock lk(mu_);
    drained_cv_.wait(lk, [this] { return closed_ || (queue_.empty() && in_flight_ == 0); });
}

void Bridge::consumer_loop() {
    for (;;) {
        std::vector<uint8_t> frame_bytes;
        Callback cb;
        {
            std::unique_lock lk(mu_);
            cv_.wait(lk, [this] { return closed_ || (!queue_.empty() && callback_); });
            if (closed_) return;
            frame_bytes = std::move(queue_.front());
            queue_.pop_front();
            cb = callback_;
            ++in_flight_;
        }
        NetlinkFrame f = decode_frame(frame_bytes);
        cb(f);
        {
            std::lock_guard lk(mu_);
            --in_flight_;
        }
        drained_cv_.notify_all();
    }
}

}  // namespace bindertrace
