#include "splitpipe/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splitpipe/errors.hpp"

namespace splitpipe {

std::pair<std::size_t, std::size_t> PartitionPlan::stage_range(std::size_t k) const {
    std::size_t first = (k == 0) ? 0 : split_indices[k - 1];
    std::size_t last = (k == split_indices.size()) ? model->blocks.size() : split_indices[k];
    return {first, last};
}

std::uint64_t PartitionPlan::stage_output_bytes(std::size_t k) const {
    auto [first, last] = stage_range(k);
    (void)first;
    return model->blocks[last - 1].output_bytes;
}

std::string PartitionPlan::split_label() const {
    std::string out;
    for (std::size_t p : split_indices) {
        if (!out.empty()) out += "+";
        out += "P" + std::to_string(p);
    }
    return out.empty() ? "P0" : out;
}

void PartitionPlan::validate() const {
    if (!model) throw ValidationError("plan: model is null");
    model->validate();
    if (split_indices.empty()) throw ValidationError("plan: no split indices");
    std::size_t n = model->blocks.size();
    std::size_t prev = 0;
    for (std::size_t p : split_indices) {
        if (p < 1 || p >= n)
            throw ValidationError("plan: split index " + std::to_string(p) +
                                  " out of range 1.." + std::to_string(n - 1));
        if (p <= prev && prev != 0)
            throw ValidationError("plan: split indices must be strictly increasing");
        prev = p;
    }
    if (stage_devices.size() != stage_count())
        throw ValidationError("plan: " + std::to_string(stage_count()) + " stages but " +
                              std::to_string(stage_devices.size()) + " devices");
    if (links.size() != stage_count())
        throw ValidationError("plan: " + std::to_string(stage_count()) + " stages but " +
                              std::to_string(links.size()) +
                              " links (need one per stage, last = return hop)");
    for (const auto& d : stage_devices) {
        d.validate();
        for (const auto& b : model->blocks)
            b.exec_on(d.device_class);  // throws if the class is missing
    }
    for (const auto& l : links) l.validate();
    if (dispatch_link) dispatch_link->validate();
}

namespace {

double transfer_time(const NetworkModel& link, std::uint64_t payload_bytes) {
    double t = link.one_way_delay_s + link.per_message_overhead_s;
    if (link.bandwidth_bps) t += (double)payload_bytes * 8.0 / *link.bandwidth_bps;
    return t;
}

}  // namespace

PredictedMetrics predict(const PartitionPlan& plan) {
    plan.validate();
    const ModelProfile& m = *plan.model;
    std::size_t k_stages = plan.stage_count();

    PredictedMetrics out;
    out.stage_times_s.resize(k_stages);
    out.transfer_times_s.resize(k_stages);
    for (std::size_t k = 0; k < k_stages; k++) {
        auto [first, last] = plan.stage_range(k);
        double sum = 0;
        for (std::size_t i = first; i < last; i++)
            sum += m.blocks[i].exec_on(plan.stage_devices[k].device_class);
        out.stage_times_s[k] = plan.stage_devices[k].compute_scale * sum;
        out.transfer_times_s[k] = transfer_time(plan.links[k], plan.stage_output_bytes(k));
    }
    if (plan.dispatch_link)
        out.dispatch_time_s = transfer_time(*plan.dispatch_link, m.input_bytes);

    out.latency_s = out.dispatch_time_s;
    for (double t : out.stage_times_s) out.latency_s += t;
    for (double t : out.transfer_times_s) out.latency_s += t;

    out.bottleneck_s = 0.0;
    auto consider = [&](double t, const std::string& name) {
        if (t > out.bottleneck_s) {
            out.bottleneck_s = t;
            out.bottleneck = name;
        }
    };
    if (plan.dispatch_link) consider(out.dispatch_time_s, "dispatch");
    for (std::size_t k = 0; k < k_stages; k++)
        consider(out.stage_times_s[k], "stage" + std::to_string(k + 1));
    for (std::size_t k = 0; k + 1 < k_stages; k++)
        consider(out.transfer_times_s[k], "link" + std::to_string(k + 1));
    consider(out.transfer_times_s[k_stages - 1], "return");

    out.throughput_ips =
        out.bottleneck_s > 0 ? (double)m.batch_size / out.bottleneck_s
                             : std::numeric_limits<double>::infinity();
    return out;
}

bool dominates(const MetricPoint& a, const MetricPoint& b) {
    return a.latency_s <= b.latency_s && a.throughput_ips >= b.throughput_ips &&
           (a.latency_s < b.latency_s || a.throughput_ips > b.throughput_ips);
}

std::vector<MetricPoint> pareto_front(std::vector<MetricPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const MetricPoint& a, const MetricPoint& b) {
        if (a.latency_s != b.latency_s) return a.latency_s < b.latency_s;
        return a.throughput_ips > b.throughput_ips;
    });
    std::vector<MetricPoint> front;
    double best_thr = -std::numeric_limits<double>::infinity();
    for (auto& p : points) {
        bool better = p.throughput_ips > best_thr;
        bool exact_tie = !front.empty() && p.latency_s == front.back().latency_s &&
                         p.throughput_ips == front.back().throughput_ips;
        if (better || exact_tie) {
            best_thr = std::max(best_thr, p.throughput_ips);
            front.push_back(std::move(p));
        }
    }
    return front;
}

std::vector<SweepEntry> sweep_predict(const ModelProfile& model,
                                      const std::vector<DeviceProfile>& stage_devices,
                                      const NetworkModel& inter_stage_link,
                                      const NetworkModel& return_link,
                                      const std::optional<NetworkModel>& dispatch_link) {
    if (stage_devices.size() != 2)
        throw ValidationError("sweep_predict: exactly two stage devices required, got " +
                              std::to_string(stage_devices.size()));
    model.validate();
    if (model.blocks.size() < 2)
        throw ValidationError("sweep_predict: model '" + model.name +
                              "' needs at least 2 blocks to split");
    std::vector<SweepEntry> out;
    out.reserve(model.blocks.size() - 1);
    for (std::size_t p = 1; p < model.blocks.size(); p++) {
        SweepEntry e;
        e.plan.model = &model;
        e.plan.split_indices = {p};
        e.plan.stage_devices = stage_devices;
        e.plan.links = {inter_stage_link, return_link};
        e.plan.dispatch_link = dispatch_link;
        e.metrics = predict(e.plan);
        out.push_back(std::move(e));
    }
    return out;
}

std::size_t best_throughput_index(const std::vector<SweepEntry>& entries) {
    if (entries.empty()) throw ValidationError("best_throughput_index: empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); i++)
        if (entries[i].metrics.throughput_ips > entries[best].metrics.throughput_ips) best = i;
    return best;
}

std::size_t best_latency_index(const std::vector<SweepEntry>& entries) {
    if (entries.empty()) throw ValidationError("best_latency_index: empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); i++)
        if (entries[i].metrics.latency_s < entries[best].metrics.latency_s) best = i;
    return best;
}

}  // namespace splitpipe
