#include "splitpipe/frame.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

#include "splitpipe/errors.hpp"

namespace splitpipe {

const char* msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::hello: return "HELLO";
        case MsgType::assign: return "ASSIGN";
        case MsgType::batch: return "BATCH";
        case MsgType::activation: return "ACTIVATION";
        case MsgType::result: return "RESULT";
        case MsgType::ack: return "ACK";
        case MsgType::shutdown: return "SHUTDOWN";
        case MsgType::error: return "ERROR";
    }
    return "UNKNOWN";
}

bool is_payload_type(MsgType t) {
    return t == MsgType::batch || t == MsgType::activation || t == MsgType::result;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back((std::uint8_t)(v >> 8));
    out.push_back((std::uint8_t)v);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back((std::uint8_t)(v >> 24));
    out.push_back((std::uint8_t)(v >> 16));
    out.push_back((std::uint8_t)(v >> 8));
    out.push_back((std::uint8_t)v);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    put_u32(out, (std::uint32_t)(v >> 32));
    put_u32(out, (std::uint32_t)v);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return (std::uint16_t)((p[0] << 8) | p[1]);
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return ((std::uint32_t)p[0] << 24) | ((std::uint32_t)p[1] << 16) | ((std::uint32_t)p[2] << 8) |
           (std::uint32_t)p[3];
}

std::uint64_t get_u64(const std::uint8_t* p) {
    return ((std::uint64_t)get_u32(p) << 32) | get_u32(p + 4);
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    if (frame.payload.size() > std::numeric_limits<std::uint32_t>::max())
        throw ProtocolError("frame payload too large");
    std::uint8_t t = (std::uint8_t)frame.type;
    if (t < 1 || t > 8) throw ProtocolError("encode: unknown message type " + std::to_string(t));
    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderBytes + frame.payload.size());
    out.insert(out.end(), kFrameMagic.begin(), kFrameMagic.end());
    out.push_back(kProtocolVersion);
    out.push_back(t);
    put_u16(out, frame.flags);
    put_u32(out, (std::uint32_t)frame.payload.size());
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

namespace {

// Fills buf fully; returns false iff the stream ended before the first byte.
// Throws on a mid-read end of stream.
bool read_exact(ByteSource& src, std::uint8_t* buf, std::size_t len, const char* what) {
    std::size_t got = 0;
    while (got < len) {
        std::size_t n = src.read(buf + got, len - got);
        if (n == 0) {
            if (got == 0) return false;
            throw ProtocolError(std::string("truncated frame: stream ended inside ") + what +
                                " (" + std::to_string(got) + "/" + std::to_string(len) +
                                " bytes)");
        }
        got += n;
    }
    return true;
}

}  // namespace

std::optional<Frame> decode_frame(ByteSource& source) {
    std::uint8_t header[kFrameHeaderBytes];
    if (!read_exact(source, header, kFrameHeaderBytes, "header")) return std::nullopt;

    if (std::memcmp(header, kFrameMagic.data(), kFrameMagic.size()) != 0) {
        char hex[32];
        std::snprintf(hex, sizeof hex, "%02x %02x %02x %02x", header[0], header[1], header[2],
                      header[3]);
        throw ProtocolError(std::string("bad frame magic: ") + hex);
    }
    if (header[4] != kProtocolVersion)
        throw ProtocolError("unsupported protocol version " + std::to_string(header[4]));
    std::uint8_t t = header[5];
    if (t < 1 || t > 8) throw ProtocolError("unknown message type " + std::to_string(t));

    Frame frame;
    frame.type = (MsgType)t;
    frame.flags = get_u16(header + 6);
    std::uint32_t len = get_u32(header + 8);
    frame.payload.resize(len);
    if (len > 0 && !read_exact(source, frame.payload.data(), len, "payload"))
        throw ProtocolError("truncated frame: stream ended inside payload (0/" +
                            std::to_string(len) + " bytes)");
    return frame;
}

std::size_t BufferSource::read(std::uint8_t* buf, std::size_t len) {
    std::size_t n = std::min(len, data.size() - pos);
    std::memcpy(buf, data.data() + pos, n);
    pos += n;
    return n;
}

}  // namespace splitpipe
