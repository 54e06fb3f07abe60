#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "splitpipe/errors.hpp"
#include "splitpipe/frame.hpp"

using namespace splitpipe;

namespace {

// 1-byte-at-a-time source: exercises short reads in the decoder.
struct TrickleSource final : ByteSource {
    std::vector<std::uint8_t> data;
    std::size_t pos = 0;
    explicit TrickleSource(std::vector<std::uint8_t> d) : data(std::move(d)) {}
    std::size_t read(std::uint8_t* buf, std::size_t len) override {
        if (pos >= data.size() || len == 0) return 0;
        buf[0] = data[pos++];
        return 1;
    }
};

}  // namespace

TEST_CASE("golden bytes: empty SHUTDOWN frame") {
    Frame f;
    f.type = MsgType::shutdown;
    auto bytes = encode_frame(f);
    const std::vector<std::uint8_t> want = {0x50, 0x50, 0x49, 0x50, 0x01, 0x07,
                                            0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
    CHECK(bytes == want);
}

TEST_CASE("golden bytes: ACK carrying \"OK\"") {
    Frame f;
    f.type = MsgType::ack;
    f.payload = {'O', 'K'};
    auto bytes = encode_frame(f);
    REQUIRE(bytes.size() == kFrameHeaderBytes + 2);
    const std::vector<std::uint8_t> want = {0x50, 0x50, 0x49, 0x50, 0x01, 0x06, 0x00,
                                            0x00, 0x00, 0x00, 0x00, 0x02, 0x4F, 0x4B};
    CHECK(bytes == want);
}

TEST_CASE("encode/decode round-trips arbitrary frames") {
    std::mt19937_64 rng(0x7a3f19c2u);
    for (int i = 0; i < 10000; ++i) {
        Frame f;
        f.type = static_cast<MsgType>(1 + rng() % 8);
        f.flags = static_cast<std::uint16_t>(rng());
        f.payload.resize(rng() % 300);
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());

        BufferSource src(encode_frame(f));
        auto back = decode_frame(src);
        REQUIRE(back.has_value());
        CHECK(back->type == f.type);
        CHECK(back->flags == f.flags);
        CHECK(back->payload == f.payload);
        CHECK(!decode_frame(src).has_value());
    }
}

TEST_CASE("multiple frames in one stream decode in order") {
    std::vector<std::uint8_t> wire;
    for (int i = 0; i < 5; ++i) {
        Frame f;
        f.type = MsgType::batch;
        f.flags = static_cast<std::uint16_t>(i);
        f.payload.assign(static_cast<std::size_t>(i) * 7, static_cast<std::uint8_t>(i));
        auto b = encode_frame(f);
        wire.insert(wire.end(), b.begin(), b.end());
    }
    TrickleSource src(wire);
    for (int i = 0; i < 5; ++i) {
        auto f = decode_frame(src);
        REQUIRE(f.has_value());
        CHECK(f->flags == i);
        CHECK(f->payload.size() == static_cast<std::size_t>(i) * 7);
    }
    CHECK(!decode_frame(src).has_value());
}

TEST_CASE("clean close at a frame boundary yields nullopt") {
    BufferSource empty({});
    CHECK(!decode_frame(empty).has_value());
}

TEST_CASE("corrupted magic is rejected, any position") {
    Frame f;
    f.type = MsgType::hello;
    auto good = encode_frame(f);
    for (std::size_t i = 0; i < 4; ++i) {
        auto bad = good;
        bad[i] ^= 0xFF;
        BufferSource src(bad);
        CHECK_THROWS_AS(decode_frame(src), ProtocolError);
    }
}

TEST_CASE("version and type are validated") {
    Frame f;
    f.type = MsgType::result;
    auto bytes = encode_frame(f);

    auto bad_version = bytes;
    bad_version[4] = 0x02;
    BufferSource s1(bad_version);
    CHECK_THROWS_AS(decode_frame(s1), ProtocolError);

    auto bad_type = bytes;
    bad_type[5] = 0x00;
    BufferSource s2(bad_type);
    CHECK_THROWS_AS(decode_frame(s2), ProtocolError);

    auto bad_type2 = bytes;
    bad_type2[5] = 0x09;
    BufferSource s3(bad_type2);
    CHECK_THROWS_AS(decode_frame(s3), ProtocolError);
}

TEST_CASE("truncation mid-frame throws") {
    Frame f;
    f.type = MsgType::activation;
    f.payload.assign(100, 0xAB);
    auto bytes = encode_frame(f);

    // inside the header
    BufferSource s1({bytes.begin(), bytes.begin() + 7});
    CHECK_THROWS_AS(decode_frame(s1), ProtocolError);

    // inside the payload
    BufferSource s2({bytes.begin(), bytes.end() - 1});
    CHECK_THROWS_AS(decode_frame(s2), ProtocolError);
}

TEST_CASE("big-endian scalar helpers") {
    std::vector<std::uint8_t> out;
    put_u16(out, 0x1234);
    put_u32(out, 0xDEADBEEF);
    put_u64(out, 0x0102030405060708ull);
    const std::vector<std::uint8_t> want = {0x12, 0x34, 0xDE, 0xAD, 0xBE, 0xEF, 0x01,
                                            0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08};
    CHECK(out == want);
    CHECK(get_u16(out.data()) == 0x1234);
    CHECK(get_u32(out.data() + 2) == 0xDEADBEEF);
    CHECK(get_u64(out.data() + 6) == 0x0102030405060708ull);
}

TEST_CASE("msg_type_name covers the protocol") {
    CHECK(std::string(msg_type_name(MsgType::hello)) == "HELLO");
    CHECK(std::string(msg_type_name(MsgType::shutdown)) == "SHUTDOWN");
    CHECK(is_payload_type(MsgType::batch));
    CHECK(is_payload_type(MsgType::activation));
    CHECK(is_payload_type(MsgType::result));
    CHECK(!is_payload_type(MsgType::ack));
    CHECK(!is_payload_type(MsgType::hello));
}
