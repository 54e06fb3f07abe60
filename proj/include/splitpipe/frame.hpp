#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace splitpipe {

// Wire format, all multi-byte fields big-endian:
//
//   offset  size  field
//   0       4     magic "PPIP" (50 50 49 50)
//   4       1     protocol version (0x01)
//   5       1     message type
//   6       2     flags
//   8       4     payload length
//   12      n     payload
enum class MsgType : std::uint8_t {
    hello = 1,
    assign = 2,
    batch = 3,
    activation = 4,
    result = 5,
    ack = 6,
    shutdown = 7,
    error = 8,
};

constexpr std::array<std::uint8_t, 4> kFrameMagic = {0x50, 0x50, 0x49, 0x50};
constexpr std::uint8_t kProtocolVersion = 0x01;
constexpr std::size_t kFrameHeaderBytes = 12;

// Flag bits (chatty baseline handshake; zero in the framed backend).
constexpr std::uint16_t kFlagChattyRequest = 0x0001;  // ack payload asks leave to send
constexpr std::uint16_t kFlagChattyGrant = 0x0002;    // ack payload grants it
constexpr std::uint16_t kFlagChattyDone = 0x0004;     // ack confirms delivery
constexpr std::uint16_t kFlagEnveloped = 0x0008;      // payload wrapped in a chatty envelope

const char* msg_type_name(MsgType t);
bool is_payload_type(MsgType t);  // batch/activation/result

struct Frame {
    MsgType type = MsgType::hello;
    std::uint16_t flags = 0;
    std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);

// Anything frames can be read from. read() returns the number of bytes
// placed in the buffer (may be short); 0 means end of stream.
struct ByteSource {
    virtual ~ByteSource() = default;
    virtual std::size_t read(std::uint8_t* buf, std::size_t len) = 0;
};

// Reads one frame. Returns nullopt on a clean close (end of stream exactly at
// a frame boundary). Throws ProtocolError for bad magic, version mismatch,
// unknown message type, or truncation mid-frame.
std::optional<Frame> decode_frame(ByteSource& source);

// In-memory source, for tests and for decoding buffered bytes.
struct BufferSource final : ByteSource {
    std::vector<std::uint8_t> data;
    std::size_t pos = 0;
    explicit BufferSource(std::vector<std::uint8_t> d) : data(std::move(d)) {}
    std::size_t read(std::uint8_t* buf, std::size_t len) override;
};

// Big-endian scalar helpers shared by payload codecs.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint16_t get_u16(const std::uint8_t* p);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);

}  // namespace splitpipe
