#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitpipe/frame.hpp"
#include "splitpipe/netem.hpp"
#include "splitpipe/socket.hpp"

namespace splitpipe {

// framed: one frame per message, fire-and-forget writes, windowed pipelining.
// chatty: RPC-style baseline; every payload message needs a request/grant
// round trip first, is wrapped in a verbose self-describing envelope, and is
// acknowledged after delivery. Setup frames stay plain in both modes.
enum class BackendMode { framed, chatty };

BackendMode parse_backend(std::string_view text);
const char* backend_name(BackendMode mode);

constexpr std::uint32_t kDestOrchestrator = 0xFFFFFFFFu;

// Payload layout of BATCH/ACTIVATION/RESULT frames (big-endian):
//   u64 batch_id | u32 dest_stage | u32 report_len | report (JSON, UTF-8)
//   | u64 body_checksum (FNV-1a) | u32 body_len | body
struct PayloadMsg {
    std::uint64_t batch_id = 0;
    std::uint32_t dest_stage = 0;
    std::string report_json = "[]";
    std::vector<std::uint8_t> body;
};

std::vector<std::uint8_t> encode_payload_msg(const PayloadMsg& msg);
// Throws ProtocolError on malformed layout or checksum mismatch.
PayloadMsg decode_payload_msg(std::span<const std::uint8_t> payload);

struct ChannelCounters {
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    std::uint64_t control_round_trips = 0;
    std::uint64_t acks_sent = 0;
};

// One endpoint of a protocol connection. Owns the socket and the outbound
// shaping writer; implements the chatty handshake on both sides.
class Channel {
  public:
    Channel(Socket sock, BackendMode mode, ShapingConfig out_shaping = {});

    Channel(const Channel&) = delete;
    Channel& operator=(const Channel&) = delete;

    // Replaces the outbound shaper (used when the shaping config only becomes
    // known at ASSIGN time). Requires an empty shaping queue.
    void set_out_shaping(ShapingConfig cfg);
    void set_mode(BackendMode mode) { mode_ = mode; }
    BackendMode mode() const { return mode_; }

    // Plain single-frame send (HELLO/ASSIGN/SHUTDOWN/ERROR).
    void send_control(const Frame& frame);

    // Payload send honoring the backend contract. timeout_s bounds the chatty
    // handshake waits.
    void send_payload(Frame frame, double timeout_s);

    // One logical frame; chatty handshakes are handled internally (incoming
    // requests granted, envelopes stripped and acknowledged). nullopt on
    // clean close. Throws TimeoutError/ProtocolError/IoError.
    std::optional<Frame> recv(double timeout_s);

    // Chatty-only explicit control round trip (per-batch dispatch ping); no-op
    // in framed mode.
    void control_round_trip(const std::string& op, double timeout_s);

    bool wait_readable(double timeout_s) const { return sock_.wait_readable(timeout_s); }
    // Blocks until the shaping queue has drained.
    void flush();
    void close();

    Socket& socket() { return sock_; }
    const ChannelCounters& counters() const { return counters_; }

  private:
    void raw_send(const Frame& frame);
    std::optional<Frame> raw_recv(double deadline_abs);
    Frame await_ack(std::uint16_t want_flag, double deadline_abs, const char* what);

    Socket sock_;
    BackendMode mode_;
    std::unique_ptr<ShapedWriter> writer_;
    ChannelCounters counters_;
    std::uint64_t seq_ = 0;
};

// Chatty envelope helpers (exposed for tests): wrap_envelope produces
// a >= 64 byte self-describing JSON header followed by the original payload.
std::vector<std::uint8_t> wrap_envelope(MsgType type, std::uint64_t seq,
                                        std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> unwrap_envelope(std::span<const std::uint8_t> enveloped);
constexpr std::size_t kMinEnvelopeHeaderBytes = 64;

}  // namespace splitpipe
