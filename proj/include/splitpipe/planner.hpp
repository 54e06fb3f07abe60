#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "splitpipe/profiles.hpp"

namespace splitpipe {

// A concrete partitioning of a model onto a device chain.
//
// split_indices lists the cut points (1-based block counts, strictly
// increasing): {p} puts blocks [0,p) on stage 0 and [p,N) on stage 1.
// stage_devices has split_indices.size()+1 entries. links has one entry per
// stage: links[k] carries stage k's output (inter-stage hop for k<K-1, the
// return hop to the orchestrator for k=K-1). dispatch_link, when set, models
// the orchestrator-to-first-stage input hop.
struct PartitionPlan {
    const ModelProfile* model = nullptr;
    std::vector<std::size_t> split_indices;
    std::vector<DeviceProfile> stage_devices;
    std::vector<NetworkModel> links;
    std::optional<NetworkModel> dispatch_link;

    std::size_t stage_count() const { return split_indices.size() + 1; }
    // Half-open block range [first, last) of stage k.
    std::pair<std::size_t, std::size_t> stage_range(std::size_t k) const;
    // Bytes stage k sends onward (activation size, final output for last stage).
    std::uint64_t stage_output_bytes(std::size_t k) const;
    // "P3", or "P3+P7" for multi-cut plans.
    std::string split_label() const;

    void validate() const;
};

struct PredictedMetrics {
    std::vector<double> stage_times_s;     // one per stage
    std::vector<double> transfer_times_s;  // one per link (last = return hop)
    double dispatch_time_s = 0.0;
    double latency_s = 0.0;
    double throughput_ips = 0.0;  // items (batch elements) per second
    double bottleneck_s = 0.0;
    std::string bottleneck;  // "stage1", "link1", "return", "dispatch"
};

// Analytic model:
//   stage_time[k]   = scale_k * sum(block exec on class_k)
//   transfer_time_l = delay_l + overhead_l + payload_bits / bandwidth_l
//   latency         = dispatch + sum(stage_times) + sum(transfer_times)
//   throughput      = batch_size / max(stage and transfer times)
PredictedMetrics predict(const PartitionPlan& plan);

// A (label, latency, throughput) point; the unit the Pareto front works on.
struct MetricPoint {
    std::string label;
    double latency_s = 0.0;
    double throughput_ips = 0.0;
};

// Weak Pareto dominance: a dominates b iff a.latency <= b.latency and
// a.throughput >= b.throughput with at least one strict.
bool dominates(const MetricPoint& a, const MetricPoint& b);

// Non-dominated subset, sorted by ascending latency. Points that tie exactly
// on both metrics are all retained.
std::vector<MetricPoint> pareto_front(std::vector<MetricPoint> points);

struct SweepEntry {
    PartitionPlan plan;
    PredictedMetrics metrics;
    MetricPoint point() const {
        return {plan.split_label(), metrics.latency_s, metrics.throughput_ips};
    }
};

// Predictions for every two-stage split p in 1..N-1, in split order.
// `model` must outlive the returned entries.
std::vector<SweepEntry> sweep_predict(const ModelProfile& model,
                                      const std::vector<DeviceProfile>& stage_devices,
                                      const NetworkModel& inter_stage_link,
                                      const NetworkModel& return_link,
                                      const std::optional<NetworkModel>& dispatch_link = {});

// Index of the entry with the highest predicted throughput; ties go to the
// earliest entry (lowest split index).
std::size_t best_throughput_index(const std::vector<SweepEntry>& entries);
std::size_t best_latency_index(const std::vector<SweepEntry>& entries);

}  // namespace splitpipe
