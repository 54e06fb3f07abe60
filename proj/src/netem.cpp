#include "splitpipe/netem.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "splitpipe/errors.hpp"

namespace splitpipe {

double steady_now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void ShapingConfig::validate() const {
    if (one_way_delay_s < 0 || !std::isfinite(one_way_delay_s))
        throw ValidationError("shaping: delay must be non-negative and finite");
    if (bandwidth_bps && (!(*bandwidth_bps > 0) || !std::isfinite(*bandwidth_bps)))
        throw ValidationError("shaping: bandwidth must be positive and finite");
    if (per_message_overhead_s < 0 || !std::isfinite(per_message_overhead_s))
        throw ValidationError("shaping: overhead must be non-negative and finite");
}

ShapingConfig ShapingConfig::from(const NetworkModel& net, std::uint64_t max_frame_bytes) {
    ShapingConfig cfg;
    cfg.one_way_delay_s = net.one_way_delay_s;
    cfg.bandwidth_bps = net.bandwidth_bps;
    cfg.per_message_overhead_s = net.per_message_overhead_s;
    cfg.bucket_depth_bytes = max_frame_bytes;
    cfg.validate();
    return cfg;
}

TokenBucket::TokenBucket(double rate_bps, double depth_bits)
    : rate_(rate_bps), depth_(depth_bits), tokens_(depth_bits), last_(0.0) {
    if (!(rate_bps > 0)) throw ValidationError("token bucket: rate must be positive");
    if (!(depth_bits >= 0)) throw ValidationError("token bucket: depth must be non-negative");
}

double TokenBucket::schedule(double now_s, double bits) {
    // Serialization is serial: a message can only start once the previous one
    // has fully left, so refill credit accrues from the previous completion.
    double start = std::max(now_s, last_);
    tokens_ = std::min(depth_, tokens_ + (start - last_) * rate_);
    double completion;
    if (bits <= tokens_) {
        tokens_ -= bits;
        completion = start;
    } else {
        double deficit = bits - tokens_;
        tokens_ = 0.0;
        completion = start + deficit / rate_;
    }
    last_ = completion;
    return completion;
}

Shaper::Shaper(ShapingConfig cfg, std::uint64_t max_frame_bytes) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.bucket_depth_bytes == 0) cfg_.bucket_depth_bytes = max_frame_bytes;
    if (cfg_.bandwidth_bps)
        bucket_.emplace(*cfg_.bandwidth_bps, (double)cfg_.bucket_depth_bytes * 8.0);
}

SendSchedule Shaper::shape_send(std::uint64_t payload_bytes, double now_s) {
    SendSchedule s;
    s.enqueued_s = now_s;
    s.serialization_done_s =
        bucket_ ? bucket_->schedule(now_s, (double)payload_bytes * 8.0) : now_s;
    s.deliver_at_s = s.serialization_done_s + cfg_.one_way_delay_s + cfg_.per_message_overhead_s;
    return s;
}

std::pair<double, double> nominal_shaping_cost(const ShapingConfig& cfg, std::uint64_t bytes) {
    double ser = cfg.bandwidth_bps ? (double)bytes * 8.0 / *cfg.bandwidth_bps : 0.0;
    return {ser, cfg.one_way_delay_s + cfg.per_message_overhead_s};
}

ShapedWriter::ShapedWriter(Sink sink, ShapingConfig cfg, std::uint64_t max_frame_bytes)
    : sink_(std::move(sink)), cfg_(cfg), shaper_(cfg, max_frame_bytes) {
    cfg_ = shaper_.config();
    if (cfg_.enabled()) thread_ = std::thread([this] { delivery_loop(); });
}

ShapedWriter::~ShapedWriter() {
    try {
        close();
    } catch (...) {
        // Destructor swallows late sink errors; callers that care call
        // flush()/close() explicitly.
    }
}

void ShapedWriter::rethrow_if_failed_locked() {
    if (failure_) {
        auto f = failure_;
        failure_ = nullptr;
        std::rethrow_exception(f);
    }
}

ShapedWriter::Receipt ShapedWriter::send(std::vector<std::uint8_t> bytes) {
    if (!cfg_.enabled()) {
        sink_(bytes.data(), bytes.size());
        std::lock_guard<std::mutex> lock(mu_);
        messages_++;
        bytes_ += bytes.size();
        return {};
    }
    std::unique_lock<std::mutex> lock(mu_);
    rethrow_if_failed_locked();
    if (stop_) throw IoError("shaped writer is closed");
    double now = steady_now_s();
    SendSchedule sched = shaper_.shape_send(bytes.size(), now);
    Receipt r{sched.serialization_done_s - sched.enqueued_s,
              cfg_.one_way_delay_s + cfg_.per_message_overhead_s};
    messages_++;
    bytes_ += bytes.size();
    queue_.push_back({std::move(bytes), sched.deliver_at_s});
    cv_.notify_all();
    return r;
}

void ShapedWriter::flush() {
    if (!cfg_.enabled()) return;
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return (queue_.empty() && in_flight_ == 0) || failure_ != nullptr; });
    rethrow_if_failed_locked();
}

void ShapedWriter::close() {
    if (!cfg_.enabled()) return;
    {
        std::unique_lock<std::mutex> lock(mu_);
        if (!stop_) {
            cv_.wait(lock,
                     [this] { return (queue_.empty() && in_flight_ == 0) || failure_ != nullptr; });
            stop_ = true;
            cv_.notify_all();
        }
    }
    if (thread_.joinable()) thread_.join();
    std::lock_guard<std::mutex> lock(mu_);
    rethrow_if_failed_locked();
}

std::uint64_t ShapedWriter::messages_sent() const {
    std::lock_guard<std::mutex> lock(mu_);
    return messages_;
}

std::uint64_t ShapedWriter::bytes_sent() const {
    std::lock_guard<std::mutex> lock(mu_);
    return bytes_;
}

void ShapedWriter::delivery_loop() {
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (queue_.empty()) {
            if (stop_) return;
            continue;
        }
        double deliver_at = queue_.front().deliver_at_s;
        double now = steady_now_s();
        if (now < deliver_at) {
            cv_.wait_for(lock, std::chrono::duration<double>(deliver_at - now));
            continue;
        }
        Pending item = std::move(queue_.front());
        queue_.pop_front();
        in_flight_++;
        lock.unlock();
        std::exception_ptr err;
        try {
            sink_(item.bytes.data(), item.bytes.size());
        } catch (...) {
            err = std::current_exception();
        }
        lock.lock();
        in_flight_--;
        if (err && !failure_) failure_ = err;
        cv_.notify_all();
        if (failure_ && stop_) return;
    }
}

}  // namespace splitpipe
