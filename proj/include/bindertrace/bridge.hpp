#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "bindertrace/events.hpp"
#include "bindertrace/interceptor.hpp"

namespace bindertrace {

// ---------------------------------------------------------------------------
// Frames
//
// Layout, little-endian throughout:
//   magic   2 bytes  0x44 0x54
//   version 1 byte   0x01
//   msg_type 1 byte
//   uid     u32
//   payload_len u32
//   payload payload_len bytes
//   checksum u32, CRC-32 (IEEE) over all preceding bytes

enum class MsgType : uint8_t {
    Event = 0x01,
    EnableUid = 0x02,
    DisableUid = 0x03,
    GlobalOn = 0x04,
    GlobalOff = 0x05,
    Ack = 0x06,
};

struct NetlinkFrame {
    static constexpr uint8_t kMagic0 = 0x44;
    static constexpr uint8_t kMagic1 = 0x54;
    static constexpr uint8_t kVersion = 1;

    MsgType msg_type = MsgType::Event;
    uint32_t uid = 0;
    std::vector<uint8_t> payload;

    friend bool operator==(const NetlinkFrame&, const NetlinkFrame&) = default;
};

struct FrameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadMagic : FrameError { BadMagic() : FrameError("bad magic") {} };
struct BadVersion : FrameError { BadVersion() : FrameError("bad version") {} };
struct UnknownMsgType : FrameError { UnknownMsgType() : FrameError("unknown msg type") {} };
struct ChecksumMismatch : FrameError { ChecksumMismatch() : FrameError("checksum mismatch") {} };
struct Truncated : FrameError { Truncated() : FrameError("truncated frame") {} };

struct ChannelClosed : std::runtime_error {
    ChannelClosed() : std::runtime_error("channel closed") {}
};
struct QueueFull : std::runtime_error {
    QueueFull() : std::runtime_error("bridge queue full") {}
};
struct CallbackAlreadySet : std::runtime_error {
    CallbackAlreadySet() : std::runtime_error("callback already set") {}
};

uint32_t frame_crc32(std::span<const uint8_t> bytes);

std::vector<uint8_t> encode_frame(MsgType t, uint32_t uid, std::span<const uint8_t> payload);

/// Decodes exactly one frame occupying the whole buffer. CRC is verified
/// before the length-consistency check so corruption anywhere outside the
/// magic/version bytes reports ChecksumMismatch.
NetlinkFrame decode_frame(std::span<const uint8_t> bytes);

/// Splits a concatenation of frames, validating each; frames are
/// self-delimiting via payload_len.
std::vector<NetlinkFrame> decode_frame_stream(std::span<const uint8_t> bytes);

// ---------------------------------------------------------------------------
// Event payloads
//
// Kind byte first: 0x00 Open, 0x01 Connect, 0x02 Binder. Then:
//   Open:    uid u32, timestamp u64, path (parcel string layout)
//   Connect: uid u32, timestamp u64, family u32 (0 Inet4, 1 Inet6, 2 Unix,
//            3 Other), addr (parcel string layout)
//   Binder:  uid u32, code u32, timestamp u64, buffer_len u32, buffer bytes

std::vector<uint8_t> encode_event_payload(const RawEvent& e);
RawEvent decode_event_payload(std::span<const uint8_t> payload);

// ---------------------------------------------------------------------------
// Bridge

/// The kernel/user channel: event frames flow up through a bounded FIFO to a
/// single registered callback running on a dedicated consumer thread; control
/// frames flow down synchronously into the interceptor.
class Bridge {
public:
    static constexpr size_t kDefaultCapacity = 4096;

    using Callback = std::function<void(const NetlinkFrame&)>;

    explicit Bridge(Interceptor& interceptor, size_t capacity = kDefaultCapacity);
    ~Bridge();

    Bridge(const Bridge&) = delete;
    Bridge& operator=(const Bridge&) = delete;

    /// Enqueues an Event frame. Throws QueueFull instead of blocking.
    void send_event(const RawEvent& e);

    /// Frames sent before registration are buffered (up to capacity) and
    /// flushed in order once the callback is set.
    void register_callback(Callback f);

    /// Applies the control message to the interceptor and returns the Ack
    /// frame; payload byte 0 echoes the request type.
    NetlinkFrame send_control(MsgType t, uint32_t uid);

    void close();
    bool closed() const;

    /// Blocks until every queued frame has been handed to the callback.
    void drain();

private:
    void consumer_loop();

    Interceptor& interceptor_;
    const size_t capacity_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable drained_cv_;
    std::deque<std::vector<uint8_t>> queue_;
    Callback callback_;
    bool closed_ = false;
    size_t in_flight_ = 0;

    std::thread consumer_;
};

}  // namespace bindertrace
