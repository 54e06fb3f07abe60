#include "splitpipe/channel.hpp"

#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "splitpipe/checksum.hpp"
#include "splitpipe/errors.hpp"
#include "splitpipe/log.hpp"

namespace splitpipe {

using nlohmann::json;

BackendMode parse_backend(std::string_view text) {
    if (text == "framed") return BackendMode::framed;
    if (text == "chatty") return BackendMode::chatty;
    throw ParseError("unknown backend '" + std::string(text) + "' (expected framed|chatty)");
}

const char* backend_name(BackendMode mode) {
    return mode == BackendMode::framed ? "framed" : "chatty";
}

std::vector<std::uint8_t> encode_payload_msg(const PayloadMsg& msg) {
    std::vector<std::uint8_t> out;
    out.reserve(28 + msg.report_json.size() + msg.body.size());
    put_u64(out, msg.batch_id);
    put_u32(out, msg.dest_stage);
    put_u32(out, (std::uint32_t)msg.report_json.size());
    out.insert(out.end(), msg.report_json.begin(), msg.report_json.end());
    put_u64(out, fnv1a64(msg.body));
    put_u32(out, (std::uint32_t)msg.body.size());
    out.insert(out.end(), msg.body.begin(), msg.body.end());
    return out;
}

PayloadMsg decode_payload_msg(std::span<const std::uint8_t> payload) {
    auto need = [&](std::size_t pos, std::size_t n) {
        if (pos + n > payload.size())
            throw ProtocolError("payload message truncated (need " + std::to_string(pos + n) +
                                " bytes, have " + std::to_string(payload.size()) + ")");
    };
    PayloadMsg msg;
    std::size_t pos = 0;
    need(pos, 8);
    msg.batch_id = get_u64(payload.data() + pos);
    pos += 8;
    need(pos, 4);
    msg.dest_stage = get_u32(payload.data() + pos);
    pos += 4;
    need(pos, 4);
    std::uint32_t report_len = get_u32(payload.data() + pos);
    pos += 4;
    need(pos, report_len);
    msg.report_json.assign((const char*)payload.data() + pos, report_len);
    pos += report_len;
    need(pos, 8);
    std::uint64_t checksum = get_u64(payload.data() + pos);
    pos += 8;
    need(pos, 4);
    std::uint32_t body_len = get_u32(payload.data() + pos);
    pos += 4;
    need(pos, body_len);
    msg.body.assign(payload.begin() + pos, payload.begin() + pos + body_len);
    pos += body_len;
    if (pos != payload.size())
        throw ProtocolError("payload message has " + std::to_string(payload.size() - pos) +
                            " trailing bytes");
    std::uint64_t got = fnv1a64(msg.body);
    if (got != checksum) {
        char buf[96];
        std::snprintf(buf, sizeof buf,
                      "body checksum mismatch on batch %llu: expected %016llx, got %016llx",
                      (unsigned long long)msg.batch_id, (unsigned long long)checksum,
                      (unsigned long long)got);
        throw ProtocolError(buf);
    }
    return msg;
}

std::vector<std::uint8_t> wrap_envelope(MsgType type, std::uint64_t seq,
                                        std::span<const std::uint8_t> payload) {
    json header = {
        {"schema", "splitpipe.chatty.v1"},
        {"kind", msg_type_name(type)},
        {"content_length", payload.size()},
        {"content_encoding", "binary"},
        {"sequence", seq},
        {"checksum_fnv1a64", fnv1a64(payload)},
    };
    std::string text = header.dump();
    if (text.size() < kMinEnvelopeHeaderBytes) {
        header["padding"] = std::string(kMinEnvelopeHeaderBytes - text.size(), '.');
        text = header.dump();
    }
    std::vector<std::uint8_t> out;
    out.reserve(4 + text.size() + payload.size());
    put_u32(out, (std::uint32_t)text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::vector<std::uint8_t> unwrap_envelope(std::span<const std::uint8_t> enveloped) {
    if (enveloped.size() < 4) throw ProtocolError("chatty envelope truncated");
    std::uint32_t header_len = get_u32(enveloped.data());
    if (4 + (std::size_t)header_len > enveloped.size())
        throw ProtocolError("chatty envelope header overruns payload");
    std::string text((const char*)enveloped.data() + 4, header_len);
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("chatty envelope header is not valid JSON: ") + e.what());
    }
    std::vector<std::uint8_t> content(enveloped.begin() + 4 + header_len, enveloped.end());
    if (header.contains("content_length") &&
        header["content_length"].get<std::uint64_t>() != content.size())
        throw ProtocolError("chatty envelope content_length mismatch");
    if (header.contains("checksum_fnv1a64") &&
        header["checksum_fnv1a64"].get<std::uint64_t>() != fnv1a64(content))
        throw ProtocolError("chatty envelope checksum mismatch");
    return content;
}

Channel::Channel(Socket sock, BackendMode mode, ShapingConfig out_shaping)
    : sock_(std::move(sock)), mode_(mode) {
    Socket* raw = &sock_;
    writer_ = std::make_unique<ShapedWriter>(
        [raw](const std::uint8_t* buf, std::size_t len) { raw->write_all(buf, len); },
        out_shaping);
}

void Channel::set_out_shaping(ShapingConfig cfg) {
    writer_->close();
    Socket* raw = &sock_;
    writer_ = std::make_unique<ShapedWriter>(
        [raw](const std::uint8_t* buf, std::size_t len) { raw->write_all(buf, len); }, cfg);
}

void Channel::raw_send(const Frame& frame) {
    std::vector<std::uint8_t> bytes = encode_frame(frame);
    counters_.frames_sent++;
    counters_.bytes_sent += bytes.size();
    writer_->send(std::move(bytes));
}

std::optional<Frame> Channel::raw_recv(double deadline_abs) {
    SocketSource src(sock_, deadline_abs);
    std::optional<Frame> f = decode_frame(src);
    if (f) {
        counters_.frames_received++;
        counters_.bytes_received += kFrameHeaderBytes + f->payload.size();
    }
    return f;
}

void Channel::send_control(const Frame& frame) { raw_send(frame); }

Frame Channel::await_ack(std::uint16_t want_flag, double deadline_abs, const char* what) {
    for (;;) {
        std::optional<Frame> f = raw_recv(deadline_abs);
        if (!f) throw ProtocolError(std::string("connection closed while awaiting ") + what);
        if (f->type == MsgType::error) {
            std::string msg((const char*)f->payload.data(), f->payload.size());
            throw IoError("peer reported error while awaiting " + std::string(what) + ": " + msg);
        }
        if (f->type == MsgType::ack && (f->flags & want_flag)) return *f;
        throw ProtocolError(std::string("unexpected ") + msg_type_name(f->type) + " (flags " +
                            std::to_string(f->flags) + ") while awaiting " + what);
    }
}

void Channel::send_payload(Frame frame, double timeout_s) {
    if (!is_payload_type(frame.type))
        throw ProtocolError(std::string("send_payload: ") + msg_type_name(frame.type) +
                            " is not a payload type");
    if (mode_ == BackendMode::framed) {
        raw_send(frame);
        return;
    }
    double deadline = steady_now_s() + timeout_s;
    std::uint64_t seq = seq_++;

    json req = {{"op", "send"}, {"kind", msg_type_name(frame.type)}, {"sequence", seq}};
    Frame request{MsgType::ack, kFlagChattyRequest, {}};
    std::string req_text = req.dump();
    request.payload.assign(req_text.begin(), req_text.end());
    raw_send(request);
    await_ack(kFlagChattyGrant, deadline, "chatty grant");

    Frame enveloped{frame.type, (std::uint16_t)(frame.flags | kFlagEnveloped),
                    wrap_envelope(frame.type, seq, frame.payload)};
    raw_send(enveloped);
    await_ack(kFlagChattyDone, deadline, "chatty delivery ack");
}

std::optional<Frame> Channel::recv(double timeout_s) {
    double deadline = timeout_s < 0 ? -1 : steady_now_s() + timeout_s;
    for (;;) {
        std::optional<Frame> f = raw_recv(deadline);
        if (!f) return std::nullopt;
        if (f->type == MsgType::ack && (f->flags & kFlagChattyRequest)) {
            Frame grant{MsgType::ack, kFlagChattyGrant, {}};
            raw_send(grant);
            counters_.acks_sent++;
            continue;
        }
        if (is_payload_type(f->type) && mode_ == BackendMode::chatty) {
            if (!(f->flags & kFlagEnveloped))
                throw ProtocolError(std::string("chatty mode received bare ") +
                                    msg_type_name(f->type));
            f->payload = unwrap_envelope(f->payload);
            f->flags &= (std::uint16_t)~kFlagEnveloped;
            Frame done{MsgType::ack, kFlagChattyDone, {}};
            raw_send(done);
            counters_.acks_sent++;
        }
        return f;
    }
}

void Channel::control_round_trip(const std::string& op, double timeout_s) {
    if (mode_ == BackendMode::framed) return;
    double deadline = steady_now_s() + timeout_s;
    json req = {{"op", op}, {"sequence", seq_++}};
    Frame request{MsgType::ack, kFlagChattyRequest, {}};
    std::string text = req.dump();
    request.payload.assign(text.begin(), text.end());
    raw_send(request);
    await_ack(kFlagChattyGrant, deadline, "control grant");
    counters_.control_round_trips++;
}

void Channel::flush() { writer_->flush(); }

void Channel::close() {
    writer_->close();
    sock_.close();
}

}  // namespace splitpipe
