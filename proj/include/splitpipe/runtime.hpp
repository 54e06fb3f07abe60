#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splitpipe/channel.hpp"
#include "splitpipe/planner.hpp"
#include "splitpipe/profiles.hpp"

namespace splitpipe {

// Everything a worker needs to run one stage, resolved by the orchestrator.
// Travels as the JSON payload of an ASSIGN frame down the chain; each worker
// keeps the first ASSIGN it sees and forwards the rest.
struct ResolvedBlock {
    std::string name;
    double exec_s = 0.0;  // base time for the stage's device class, unscaled
    std::uint64_t out_bytes = 0;
};

struct StageAssignment {
    std::string model_name;
    std::uint32_t stage_index = 0;
    std::uint32_t first_block = 0;  // 0-based, inclusive
    std::uint32_t last_block = 0;   // 0-based, inclusive
    std::vector<ResolvedBlock> blocks;
    DeviceProfile device;
    // "host:port" for the next worker, "result:host:port" for the hop back to
    // the orchestrator.
    std::string next_hop;
    std::uint32_t window = 1;
    BackendMode backend = BackendMode::framed;
    std::uint32_t batch_size = 1;
    std::uint64_t seed = 0;
    std::optional<ShapingConfig> shaping;          // outbound hop
    std::optional<ShapingConfig> reverse_shaping;  // acks back up the inbound hop
    double io_timeout_s = 60.0;

    std::string to_json() const;
    static StageAssignment from_json(const std::string& text);
};

// Per-stage entry appended to the in-payload timing report as a message moves
// through the chain. exec is measured; ser/delay are the nominal shaping
// components of the outbound hop.
struct StageReport {
    std::uint32_t stage = 0;
    double exec_s = 0.0;
    double ser_s = 0.0;
    double delay_s = 0.0;
};

std::string append_stage_report(const std::string& report_json, const StageReport& entry);
std::vector<StageReport> parse_stage_reports(const std::string& report_json);

// Per-stage resource usage accumulated in the SHUTDOWN payload.
struct StageResources {
    std::uint32_t stage = 0;
    double cpu_s = 0.0;
    std::uint64_t max_rss_bytes = 0;
};

std::string append_stage_resources(const std::string& json_text, const StageResources& entry);
std::vector<StageResources> parse_stage_resources(const std::string& json_text);
StageResources sample_own_resources(std::uint32_t stage);

// ---- worker ----------------------------------------------------------------

struct WorkerOptions {
    std::string listen_host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 = ephemeral
    int serve_count = 1;     // connections to serve before exiting
    double accept_timeout_s = -1.0;
    // Stream that receives the single "LISTENING <host>:<port>" line.
    std::ostream* announce = nullptr;
};

// Serves one pipeline stage: accepts a connection, takes the first ASSIGN,
// forwards the rest, processes payload messages, and exits cleanly when the
// SHUTDOWN it forwarded has gone out. Returns a process exit code.
int run_worker(const WorkerOptions& options);

// ---- orchestrator -----------------------------------------------------------

struct MeasuredBatch {
    std::uint64_t batch_id = 0;
    double dispatch_s = 0.0;  // steady clock
    double result_s = 0.0;
    double latency_s = 0.0;
    std::vector<StageReport> reports;
    int phase = 0;
    bool recorded = true;  // false for warmup
};

// One phase of a run: `count` batches at `window` in flight.
struct PhaseSpec {
    std::uint32_t window = 1;
    std::uint32_t count = 1;
    // What the phase contributes to the aggregate record.
    bool use_for_latency = false;
    bool use_for_throughput = false;
    bool recorded = true;
};

struct OrchestratorOptions {
    const ModelProfile* model = nullptr;
    PartitionPlan plan;  // devices/links/splits; model pointer must match
    std::vector<std::string> worker_addrs;
    std::string result_host = "127.0.0.1";

    std::uint32_t n_batches = 8;
    std::uint32_t window = 0;  // 0 = stages + 1
    BackendMode backend = BackendMode::framed;
    std::uint64_t seed = 0;
    double result_timeout_s = 60.0;  // inactivity bound while waiting on results
    double connect_timeout_s = 5.0;
    std::uint32_t warmup_batches = 1;

    // Optional explicit measurement phases; when empty, one phase of
    // n_batches at `window` is run and used for both metrics.
    std::vector<PhaseSpec> phases;
};

struct RunRecord {
    std::string model_name;
    std::string split_label;
    std::vector<std::size_t> split_indices;
    std::string backend;
    std::uint32_t batch_size = 0;
    std::uint32_t window = 0;
    std::uint64_t seed = 0;

    std::vector<MeasuredBatch> batches;  // recorded batches only
    double mean_latency_s = 0.0;
    // Spec-pinned formula over the throughput phase:
    //   total items / (last result - first dispatch).
    double throughput_ips = 0.0;
    // Steady-state cadence over the throughput phase:
    //   (n-1) * batch / (last result - first result); equals throughput_ips
    // when the phase has a single batch.
    double steady_throughput_ips = 0.0;

    std::vector<double> stage_exec_means_s;
    double net_serialization_s = 0.0;  // nominal, sum over hops
    double net_wire_s = 0.0;           // nominal delay+overhead, sum over hops
    double net_total_s = 0.0;          // measured latency residual
    std::vector<StageResources> resources;

    bool complete = false;  // every dispatched batch returned exactly once
    std::uint64_t dispatched = 0;
    std::uint64_t returned = 0;
    std::uint64_t duplicate_results = 0;
    double run_wall_s = 0.0;
};

// Drives one full measurement run over an already-listening worker chain.
RunRecord run_orchestrator(const OrchestratorOptions& options);

// Builds the per-stage assignments for a plan (exposed for tests).
std::vector<StageAssignment> build_assignments(const OrchestratorOptions& options,
                                               const std::string& result_hostport);

}  // namespace splitpipe
