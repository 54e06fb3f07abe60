#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "splitpipe/profiles.hpp"

namespace splitpipe {

// Sender-side link emulation. Applied where traffic leaves a process: the
// payload is serialized through a token bucket (bandwidth), then delivered
// after the propagation delay plus per-message overhead. The sender never
// blocks; a delivery thread writes each message at its scheduled time.
struct ShapingConfig {
    double one_way_delay_s = 0.0;
    std::optional<double> bandwidth_bps;
    double per_message_overhead_s = 0.0;
    // Bucket depth in bytes. 0 = use the default (one maximum frame).
    std::uint64_t bucket_depth_bytes = 0;

    bool enabled() const {
        return one_way_delay_s > 0 || bandwidth_bps.has_value() || per_message_overhead_s > 0;
    }
    void validate() const;
    static ShapingConfig from(const NetworkModel& net, std::uint64_t max_frame_bytes);
};

// Classic token bucket in bits. Starts full. The `last` timestamp records the
// completion time of the previous send, so refill never credits an interval
// the bucket already spent paying off a deficit.
class TokenBucket {
  public:
    TokenBucket(double rate_bps, double depth_bits);

    // Accounts for a message of `bits` arriving at `now_s` and returns the
    // time its serialization completes. Monotone in call order.
    double schedule(double now_s, double bits);

    double tokens_bits() const { return tokens_; }
    double last_completion_s() const { return last_; }

  private:
    double rate_;
    double depth_;
    double tokens_;
    double last_;
};

struct SendSchedule {
    double enqueued_s = 0.0;
    double serialization_done_s = 0.0;
    double deliver_at_s = 0.0;
};

// Pure shaping bookkeeping with an injectable clock value; no threads.
class Shaper {
  public:
    explicit Shaper(ShapingConfig cfg, std::uint64_t max_frame_bytes = kDefaultMaxFrameBytes);

    SendSchedule shape_send(std::uint64_t payload_bytes, double now_s);
    const ShapingConfig& config() const { return cfg_; }

    static constexpr std::uint64_t kDefaultMaxFrameBytes = 1 << 20;

  private:
    ShapingConfig cfg_;
    std::optional<TokenBucket> bucket_;
};

// Shaped byte sink backed by a delivery thread. With an unshaped config this
// is a strict pass-through: send() invokes the sink inline and no thread is
// started.
class ShapedWriter {
  public:
    using Sink = std::function<void(const std::uint8_t*, std::size_t)>;

    ShapedWriter(Sink sink, ShapingConfig cfg,
                 std::uint64_t max_frame_bytes = Shaper::kDefaultMaxFrameBytes);
    ~ShapedWriter();

    ShapedWriter(const ShapedWriter&) = delete;
    ShapedWriter& operator=(const ShapedWriter&) = delete;

    struct Receipt {
        double serialization_s = 0.0;  // bucket stall for this message
        double scheduled_delay_s = 0.0;
    };
    Receipt send(std::vector<std::uint8_t> bytes);

    // Blocks until every queued message has been written. Rethrows any sink
    // error raised by the delivery thread.
    void flush();
    // flush + stop the delivery thread. Idempotent.
    void close();

    bool shaped() const { return cfg_.enabled(); }
    const ShapingConfig& config() const { return cfg_; }
    std::uint64_t messages_sent() const;
    std::uint64_t bytes_sent() const;

  private:
    struct Pending {
        std::vector<std::uint8_t> bytes;
        double deliver_at_s;
    };

    void delivery_loop();
    void rethrow_if_failed_locked();

    Sink sink_;
    ShapingConfig cfg_;
    Shaper shaper_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Pending> queue_;
    bool stop_ = false;
    std::exception_ptr failure_;
    std::uint64_t messages_ = 0;
    std::uint64_t bytes_ = 0;
    std::size_t in_flight_ = 0;
    std::thread thread_;
};

// Nominal (configuration-derived) shaping components for a message of the
// given size: {bits/bandwidth, delay + overhead}. Used for in-payload timing
// reports, which must be computable before the payload is built.
std::pair<double, double> nominal_shaping_cost(const ShapingConfig& cfg, std::uint64_t bytes);

double steady_now_s();

}  // namespace splitpipe
