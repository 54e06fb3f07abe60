#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "splitpipe/planner.hpp"
#include "splitpipe/runtime.hpp"

namespace splitpipe {

// Device chain plus link models shared by every split in a sweep.
struct SweepTopology {
    std::vector<DeviceProfile> stage_devices;  // two for the standard sweep
    NetworkModel inter_stage_link;
    NetworkModel return_link;
    std::optional<NetworkModel> dispatch_link;

    std::string describe() const;
};

struct SweepConfig {
    int repetitions = 5;
    // Phase A (window 1) batches feed latency; phase B (windowed) batches
    // feed throughput.
    std::uint32_t latency_batches = 2;
    std::uint32_t throughput_batches = 5;
    std::uint32_t window = 0;  // 0 = stages + 1
    bool phased = true;        // false = one phase at `window` for both metrics
    std::uint32_t n_batches = 8;  // batch count in unphased mode
    std::uint32_t warmup_batches = 1;
    BackendMode backend = BackendMode::framed;
    std::uint64_t seed = 0;
    double timeout_s = 60.0;
    double connect_timeout_s = 5.0;
    double worker_exit_timeout_s = 5.0;

    // Which splits to measure; empty = every split 1..N-1.
    std::vector<std::size_t> splits;
    // Worker executable for locally spawned stages. Empty = the
    // SPLITPIPE_BIN environment variable, then /proc/self/exe.
    std::string worker_bin;
    // Pre-started worker addresses (one per stage). When set, no processes
    // are spawned; the workers must be serving enough connections for all
    // repetitions (`worker --serve N`).
    std::vector<std::string> worker_addrs;
};

struct MeasurementRecord {
    std::string model_name;
    std::string split_label;
    std::vector<std::size_t> split_indices;
    int repetitions = 0;

    double latency_s = 0.0;             // mean over repetitions of run mean latency
    double throughput_ips = 0.0;        // mean over repetitions of steady throughput
    double pinned_throughput_ips = 0.0; // mean over repetitions of the window-run formula
    std::vector<double> stage_exec_s;
    double net_serialization_s = 0.0;
    double net_wire_s = 0.0;
    double net_total_s = 0.0;
    std::vector<StageResources> resources;  // cpu averaged, rss maxed over reps

    bool failed = false;
    std::string error;
    std::vector<RunRecord> runs;

    std::size_t first_split() const { return split_indices.empty() ? 0 : split_indices[0]; }
};

// Worker lifecycle bookkeeping across every run of a sweep.
struct LifecycleStats {
    std::uint64_t runs = 0;
    std::uint64_t workers_spawned = 0;
    bool all_batches_complete = true;  // every dispatched batch returned exactly once
    bool all_workers_exited_clean = true;
    double max_worker_exit_s = 0.0;  // slowest SHUTDOWN-to-exit wall time
};

struct SweepReport {
    std::string model_name;
    std::string backend;
    std::uint32_t batch_size = 0;
    std::uint64_t seed = 0;
    int repetitions = 0;
    std::string environment;
    std::string topology;
    LifecycleStats lifecycle;
    std::vector<MeasurementRecord> records;
    std::vector<std::string> pareto_labels;
};

// Measures every requested split, aggregates repetitions, and marks the
// measured Pareto-optimal splits. A failing run marks its split failed and
// the sweep moves on; a sweep with no successful split throws.
SweepReport run_sweep(const ModelProfile& model, const SweepTopology& topology,
                      const SweepConfig& config);

// ---- model vs measurement ---------------------------------------------------

struct CompareRow {
    std::string label;
    double predicted_latency_s = 0.0;
    double measured_latency_s = 0.0;
    double latency_rel_err = 0.0;
    double predicted_throughput_ips = 0.0;
    double measured_throughput_ips = 0.0;
    double throughput_rel_err = 0.0;
};

struct CompareSummary {
    double threshold = 0.15;
    std::vector<CompareRow> rows;
    double frac_latency_within = 0.0;
    double frac_throughput_within = 0.0;
    double frac_both_within = 0.0;
};

// Joins predictions and measurements by split label (failed records are
// skipped). rel_err = |measured - predicted| / predicted.
CompareSummary compare_model_vs_measured(const std::vector<SweepEntry>& predicted,
                                         const SweepReport& measured, double threshold = 0.15);

// ---- report serialization ----------------------------------------------------

void emit_report_csv(const SweepReport& report, std::ostream& out);
void emit_report_json(const SweepReport& report, std::ostream& out);
SweepReport load_report_json(std::istream& in);

// JSON text for one run record (the `orchestrate` output format).
std::string run_record_json(const RunRecord& run);

struct CsvRecord {
    MeasurementRecord record;
    bool pareto = false;
};
std::vector<CsvRecord> load_report_csv(std::istream& in);

// ---- local worker processes ---------------------------------------------------

// Spawns `bin worker --listen 127.0.0.1:0 [extra args]`, reads the LISTENING
// line, and reaps the process on destruction (killing it if still alive).
class LocalWorker {
  public:
    LocalWorker(const std::string& bin, const std::vector<std::string>& extra_args,
                double announce_timeout_s = 10.0);
    ~LocalWorker();
    LocalWorker(const LocalWorker&) = delete;
    LocalWorker& operator=(const LocalWorker&) = delete;

    const std::string& address() const { return address_; }
    int pid() const { return pid_; }

    struct ExitInfo {
        bool exited = false;
        int code = -1;
        double waited_s = 0.0;
    };
    // Polls for exit until the deadline; does not kill on timeout.
    ExitInfo wait_exit(double timeout_s);
    void kill_now();

  private:
    int pid_ = -1;
    int stdout_fd_ = -1;
    std::string address_;
    bool reaped_ = false;
};

std::string default_worker_bin();
std::string describe_environment();

}  // namespace splitpipe
