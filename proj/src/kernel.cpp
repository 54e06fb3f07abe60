#include "splitpipe/kernel.hpp"

#include <atomic>
#include <chrono>

#include "splitpipe/checksum.hpp"
#include "splitpipe/errors.hpp"

namespace splitpipe {

namespace {

std::atomic<std::uint64_t> g_sink{0};

using clk = std::chrono::steady_clock;

inline double now_s() {
    return std::chrono::duration<double>(clk::now().time_since_epoch()).count();
}

// One unit of work: advance an FNV state across a small scratch buffer.
// Returns the new state so the compiler cannot hoist it.
inline std::uint64_t churn(std::uint64_t state, std::uint64_t iters) {
    std::uint64_t h = state;
    for (std::uint64_t i = 0; i < iters; i++) {
        h ^= i;
        h *= kFnvPrime;
        h ^= h >> 32;
    }
    return h;
}

}  // namespace

KernelCalibration calibrate_kernel(double target_chunk_s, double budget_s) {
    if (!(target_chunk_s > 0)) throw ValidationError("calibrate_kernel: chunk target must be > 0");
    KernelCalibration cal;
    cal.chunk_target_s = target_chunk_s;

    std::uint64_t h = kFnvOffset;
    std::uint64_t iters = 4096;
    double deadline = now_s() + budget_s;
    double per_iter = 0;
    // Grow until one run takes a measurable slice, then estimate cost/iter.
    for (int round = 0; round < 40 && now_s() < deadline; round++) {
        double t0 = now_s();
        h = churn(h, iters);
        double dt = now_s() - t0;
        if (dt >= 20e-6) {
            per_iter = dt / (double)iters;
            break;
        }
        iters *= 4;
    }
    if (per_iter <= 0) per_iter = 1e-9;  // pessimistic fallback

    cal.iters_per_chunk = (std::uint64_t)(target_chunk_s / per_iter);
    if (cal.iters_per_chunk < 64) cal.iters_per_chunk = 64;

    // Refine once against a real chunk.
    double t0 = now_s();
    h = churn(h, cal.iters_per_chunk);
    cal.measured_chunk_s = now_s() - t0;
    if (cal.measured_chunk_s > 0) {
        double ratio = target_chunk_s / cal.measured_chunk_s;
        if (ratio > 0.1 && ratio < 10.0) {
            cal.iters_per_chunk = (std::uint64_t)((double)cal.iters_per_chunk * ratio);
            if (cal.iters_per_chunk < 64) cal.iters_per_chunk = 64;
        }
    }
    g_sink.fetch_add(h, std::memory_order_relaxed);
    return cal;
}

double busy_spin(double target_s, const KernelCalibration& cal) {
    double start = now_s();
    if (!(target_s > 0)) return 0.0;
    if (cal.iters_per_chunk == 0)
        throw ValidationError("busy_spin: kernel not calibrated");
    std::uint64_t h = kFnvOffset ^ (std::uint64_t)(target_s * 1e9);
    double deadline = start + target_s;
    while (now_s() < deadline) {
        h = churn(h, cal.iters_per_chunk);
    }
    g_sink.fetch_add(h, std::memory_order_relaxed);
    return now_s() - start;
}

std::uint64_t kernel_sink() { return g_sink.load(std::memory_order_relaxed); }

}  // namespace splitpipe
