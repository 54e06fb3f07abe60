#pragma once

#include <cstdint>

namespace splitpipe {

// Synthetic compute kernel. A stage "executes" a block by spinning on real
// checksum work until a wall-clock deadline. Work happens in calibrated
// chunks (~100 us each) so the clock is only consulted a few thousand times
// per second; the chunk size comes from a short startup calibration.
//
// Deadline-based (not iteration-count) on purpose: when two stages share a
// core the OS interleaves them and each still finishes at its own deadline,
// which is what a pipeline of distinct devices would do.
struct KernelCalibration {
    std::uint64_t iters_per_chunk = 0;  // checksum iterations per clock check
    double chunk_target_s = 0.0;        // requested chunk wall time
    double measured_chunk_s = 0.0;      // observed chunk wall time at calibration
};

// Measures how many checksum iterations fit in `target_chunk_s` of wall time.
// Spends at most ~`budget_s` calibrating.
KernelCalibration calibrate_kernel(double target_chunk_s = 100e-6, double budget_s = 0.05);

// Spins until `target_s` of wall time has passed (returns immediately when
// target_s <= 0). Returns measured elapsed seconds.
double busy_spin(double target_s, const KernelCalibration& cal);

// Accumulated checksum of all kernel work in this process. Read so the
// optimizer cannot discard the spin loops.
std::uint64_t kernel_sink();

}  // namespace splitpipe
