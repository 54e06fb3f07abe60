// splitpipe: partition-point explorer and pipeline harness.
//
// One binary for everything so a worker deploys as a single file:
//   profile      validate / synth / show / microbench
//   plan         analytic prediction for every split
//   worker       one pipeline stage process
//   orchestrate  one measured run over a worker chain
//   sweep        measure every split, aggregate, mark the Pareto front
//   pareto       non-dominated subset of a label,latency,throughput CSV
//   report       reformat or compare a saved sweep report

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "splitpipe/errors.hpp"
#include "splitpipe/harness.hpp"
#include "splitpipe/kernel.hpp"
#include "splitpipe/planner.hpp"
#include "splitpipe/profiles.hpp"
#include "splitpipe/runtime.hpp"
#include "splitpipe/socket.hpp"
#include "splitpipe/units.hpp"

namespace sp = splitpipe;

namespace {

constexpr const char* kVersion = "0.1.0";

// Convenience device names usable without a device file. A device file
// entry with the same name takes precedence.
const std::map<std::string, sp::DeviceProfile> kBuiltinDevices = {
    {"pi", {"pi", "cpu", 1.0}},
    {"jetson", {"jetson", "gpu", 1.0}},
};

sp::DeviceProfile resolve_device(const std::string& spec,
                                 const std::map<std::string, sp::DeviceProfile>& named) {
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    double scale = 1.0;
    if (colon != std::string::npos) {
        try {
            std::size_t used = 0;
            scale = std::stod(spec.substr(colon + 1), &used);
            if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw sp::ParseError("bad device spec '" + spec + "'");
        }
    }
    auto apply = [&](sp::DeviceProfile d) {
        d.compute_scale *= scale;
        d.validate();
        return d;
    };
    if (auto it = named.find(name); it != named.end()) return apply(it->second);
    if (auto it = kBuiltinDevices.find(name); it != kBuiltinDevices.end())
        return apply(it->second);
    return sp::parse_device_spec(spec);
}

std::vector<sp::DeviceProfile> resolve_devices(const std::string& csv,
                                               const std::string& device_file) {
    std::map<std::string, sp::DeviceProfile> named;
    if (!device_file.empty())
        for (const auto& d : sp::load_device_profiles(device_file)) named[d.name] = d;
    std::vector<sp::DeviceProfile> out;
    std::istringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(resolve_device(part, named));
    if (out.empty()) throw sp::ParseError("no devices in '" + csv + "'");
    return out;
}

std::vector<std::string> split_csv_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(part);
    return out;
}

// Writes to `path`, or stdout when path is empty or "-".
class OutStream {
  public:
    explicit OutStream(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw sp::IoError("cannot open '" + path + "' for writing");
        }
    }
    std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

std::string fmt_ms(double seconds) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", seconds * 1e3);
    return buf;
}

std::string fmt2(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        if (width.size() < row.size()) width.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); i++)
            width[i] = std::max(width[i], row[i].size());
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); i++) {
            out << row[i];
            if (i + 1 < row.size())
                out << std::string(width[i] - row[i].size() + 2, ' ');
        }
        out << "\n";
    }
}

// ---- plan -----------------------------------------------------------------

struct PlanArgs {
    std::string model_path;
    std::string devices = "cpu,cpu";
    std::string device_file;
    std::string net = "none";
    std::string return_net = "none";
    std::string dispatch_net;
    std::vector<std::size_t> splits;
    bool as_json = false;
    std::string out_path;
};

int cmd_plan(const PlanArgs& args) {
    sp::ModelProfile model = sp::load_model_profile(args.model_path);
    model.validate();
    std::vector<sp::DeviceProfile> devices = resolve_devices(args.devices, args.device_file);
    if (devices.size() != 2)
        throw sp::ValidationError("plan sweeps two-stage splits; --devices needs 2 entries, got " +
                                  std::to_string(devices.size()));
    sp::NetworkModel inter = sp::parse_net_spec(args.net);
    sp::NetworkModel ret = sp::parse_net_spec(args.return_net);
    std::optional<sp::NetworkModel> dispatch;
    if (!args.dispatch_net.empty()) dispatch = sp::parse_net_spec(args.dispatch_net);

    std::vector<sp::SweepEntry> entries = sp::sweep_predict(model, devices, inter, ret, dispatch);
    if (!args.splits.empty()) {
        std::vector<sp::SweepEntry> keep;
        for (const auto& e : entries)
            for (std::size_t p : args.splits)
                if (e.plan.split_indices == std::vector<std::size_t>{p}) keep.push_back(e);
        entries = std::move(keep);
        if (entries.empty()) throw sp::ValidationError("no requested split is in range");
    }

    std::vector<sp::MetricPoint> points;
    for (const auto& e : entries) points.push_back(e.point());
    std::vector<sp::MetricPoint> front = sp::pareto_front(points);
    auto on_front = [&](const std::string& label) {
        for (const auto& p : front)
            if (p.label == label) return true;
        return false;
    };

    OutStream out(args.out_path);
    if (args.as_json) {
        out.get() << "[\n";
        for (std::size_t i = 0; i < entries.size(); i++) {
            const auto& e = entries[i];
            out.get() << "  {\"split\": \"" << e.plan.split_label() << "\""
                      << ", \"latency_s\": " << e.metrics.latency_s
                      << ", \"throughput_ips\": " << e.metrics.throughput_ips
                      << ", \"bottleneck\": \"" << e.metrics.bottleneck << "\""
                      << ", \"pareto\": " << (on_front(e.plan.split_label()) ? "true" : "false")
                      << "}" << (i + 1 < entries.size() ? "," : "") << "\n";
        }
        out.get() << "]\n";
        return sp::kExitOk;
    }

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"split", "latency_ms", "items_per_s", "stage1_ms", "stage2_ms",
                    "transfer_ms", "bottleneck", "pareto"});
    for (const auto& e : entries) {
        double xfer = 0;
        for (double t : e.metrics.transfer_times_s) xfer += t;
        rows.push_back({e.plan.split_label(), fmt_ms(e.metrics.latency_s),
                        fmt2(e.metrics.throughput_ips), fmt_ms(e.metrics.stage_times_s[0]),
                        fmt_ms(e.metrics.stage_times_s[1]), fmt_ms(xfer), e.metrics.bottleneck,
                        on_front(e.plan.split_label()) ? "*" : ""});
    }
    print_table(out.get(), rows);
    return sp::kExitOk;
}

// ---- orchestrate / sweep ----------------------------------------------------

struct RunArgs {
    std::string model_path;
    std::string devices = "cpu,cpu";
    std::string device_file;
    std::string net = "none";
    std::string return_net = "none";
    std::string dispatch_net;
    std::string backend = "framed";
    std::uint64_t seed = 0;
    std::string timeout = "60s";
    std::string connect_timeout = "5s";
    std::uint32_t window = 0;
    std::uint32_t warmup = 1;
};

sp::PartitionPlan build_plan(const sp::ModelProfile& model,
                             const std::vector<sp::DeviceProfile>& devices,
                             const RunArgs& args, const std::vector<std::size_t>& splits) {
    sp::PartitionPlan plan;
    plan.model = &model;
    plan.split_indices = splits;
    plan.stage_devices = devices;
    sp::NetworkModel inter = sp::parse_net_spec(args.net);
    for (std::size_t i = 0; i + 1 < devices.size(); i++) plan.links.push_back(inter);
    plan.links.push_back(sp::parse_net_spec(args.return_net));
    if (!args.dispatch_net.empty()) plan.dispatch_link = sp::parse_net_spec(args.dispatch_net);
    plan.validate();
    return plan;
}

int cmd_orchestrate(const RunArgs& args, const std::vector<std::size_t>& splits,
                    const std::string& workers, std::uint32_t batches,
                    const std::string& result_host, const std::string& out_path) {
    sp::ModelProfile model = sp::load_model_profile(args.model_path);
    model.validate();
    std::vector<sp::DeviceProfile> devices = resolve_devices(args.devices, args.device_file);
    if (splits.empty()) throw sp::ValidationError("--split is required");
    if (devices.size() != splits.size() + 1)
        throw sp::ValidationError(std::to_string(splits.size()) + " splits need " +
                                  std::to_string(splits.size() + 1) + " devices, got " +
                                  std::to_string(devices.size()));

    sp::OrchestratorOptions opts;
    opts.model = &model;
    opts.plan = build_plan(model, devices, args, splits);
    opts.worker_addrs = split_csv_list(workers);
    opts.result_host = result_host;
    opts.n_batches = batches;
    opts.window = args.window;
    opts.backend = sp::parse_backend(args.backend);
    opts.seed = args.seed;
    opts.result_timeout_s = sp::units::parse_duration(args.timeout);
    opts.connect_timeout_s = sp::units::parse_duration(args.connect_timeout);
    opts.warmup_batches = args.warmup;

    sp::RunRecord run = sp::run_orchestrator(opts);
    OutStream out(out_path);
    out.get() << sp::run_record_json(run) << "\n";
    return run.complete ? sp::kExitOk : sp::kExitRuntime;
}

void print_report_table(const sp::SweepReport& report, std::ostream& out) {
    auto on_front = [&](const std::string& label) {
        for (const auto& l : report.pareto_labels)
            if (l == label) return true;
        return false;
    };
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"split", "latency_ms", "items_per_s", "net_ms", "reps", "status", "pareto"});
    for (const auto& r : report.records) {
        rows.push_back({r.split_label,
                        r.failed ? "-" : fmt_ms(r.latency_s),
                        r.failed ? "-" : fmt2(r.throughput_ips),
                        r.failed ? "-" : fmt_ms(r.net_total_s),
                        std::to_string(r.repetitions),
                        r.failed ? ("failed: " + r.error) : "ok",
                        on_front(r.split_label) ? "*" : ""});
    }
    print_table(out, rows);
}

int cmd_sweep(const RunArgs& args, const sp::SweepConfig& base_config,
              const std::string& workers, const std::string& out_path,
              const std::string& csv_path, const std::string& json_path) {
    sp::ModelProfile model = sp::load_model_profile(args.model_path);
    model.validate();
    std::vector<sp::DeviceProfile> devices = resolve_devices(args.devices, args.device_file);
    if (devices.size() != 2)
        throw sp::ValidationError("sweep drives a two-stage chain; --devices needs 2 entries");

    sp::SweepTopology topo;
    topo.stage_devices = devices;
    topo.inter_stage_link = sp::parse_net_spec(args.net);
    topo.return_link = sp::parse_net_spec(args.return_net);
    if (!args.dispatch_net.empty()) topo.dispatch_link = sp::parse_net_spec(args.dispatch_net);

    sp::SweepConfig config = base_config;
    config.backend = sp::parse_backend(args.backend);
    config.seed = args.seed;
    config.timeout_s = sp::units::parse_duration(args.timeout);
    config.connect_timeout_s = sp::units::parse_duration(args.connect_timeout);
    config.window = args.window;
    config.warmup_batches = args.warmup;
    config.worker_addrs = split_csv_list(workers);

    sp::SweepReport report = sp::run_sweep(model, topo, config);

    if (!csv_path.empty()) {
        OutStream csv(csv_path);
        sp::emit_report_csv(report, csv.get());
    }
    if (!json_path.empty()) {
        OutStream json(json_path);
        sp::emit_report_json(report, json.get());
    }
    OutStream out(out_path);
    print_report_table(report, out.get());
    return sp::kExitOk;
}

// ---- pareto ------------------------------------------------------------------

int cmd_pareto(const std::string& in_path, const std::string& out_path) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (!in_path.empty() && in_path != "-") {
        file.open(in_path);
        if (!file) throw sp::IoError("cannot open '" + in_path + "'");
        in = &file;
    }
    std::vector<sp::MetricPoint> points;
    std::string header;
    std::string line;
    int lineno = 0;
    while (std::getline(*in, line)) {
        lineno++;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string label, lat, thr;
        if (!std::getline(ss, label, ',') || !std::getline(ss, lat, ',') ||
            !std::getline(ss, thr))
            throw sp::ParseError("line " + std::to_string(lineno) +
                                 ": expected label,latency,throughput");
        try {
            std::size_t used = 0;
            double lat_v = std::stod(lat, &used);
            double thr_v = std::stod(thr);
            (void)used;
            points.push_back({label, lat_v, thr_v});
        } catch (const std::exception&) {
            if (lineno == 1 && points.empty()) {
                header = line;  // tolerated header row, echoed back
                continue;
            }
            throw sp::ParseError("line " + std::to_string(lineno) + ": bad number in '" + line +
                                 "'");
        }
    }
    OutStream out(out_path);
    if (!header.empty()) out.get() << header << "\n";
    char buf[96];
    for (const auto& p : sp::pareto_front(points)) {
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g", p.label.c_str(), p.latency_s,
                      p.throughput_ips);
        out.get() << buf << "\n";
    }
    return sp::kExitOk;
}

// ---- report --------------------------------------------------------------------

int cmd_report(const std::string& report_path, const std::string& format,
               const std::string& out_path, const std::string& compare_model,
               const RunArgs& net_args, double threshold) {
    std::ifstream in(report_path);
    if (!in) throw sp::IoError("cannot open '" + report_path + "'");
    sp::SweepReport report = sp::load_report_json(in);

    OutStream out(out_path);
    if (format == "csv") {
        sp::emit_report_csv(report, out.get());
    } else if (format == "json") {
        sp::emit_report_json(report, out.get());
    } else {
        out.get() << "model " << report.model_name << " backend " << report.backend << " seed "
                  << report.seed << "\n"
                  << "topology " << report.topology << "\n"
                  << "environment " << report.environment << "\n";
        print_report_table(report, out.get());
    }

    if (!compare_model.empty()) {
        sp::ModelProfile model = sp::load_model_profile(compare_model);
        model.validate();
        std::vector<sp::DeviceProfile> devices =
            resolve_devices(net_args.devices, net_args.device_file);
        if (devices.size() != 2)
            throw sp::ValidationError("--compare needs a two-device chain");
        std::optional<sp::NetworkModel> dispatch;
        if (!net_args.dispatch_net.empty())
            dispatch = sp::parse_net_spec(net_args.dispatch_net);
        std::vector<sp::SweepEntry> predicted =
            sp::sweep_predict(model, devices, sp::parse_net_spec(net_args.net),
                              sp::parse_net_spec(net_args.return_net), dispatch);
        sp::CompareSummary cmp = sp::compare_model_vs_measured(predicted, report, threshold);
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"split", "pred_lat_ms", "meas_lat_ms", "lat_err", "pred_ips", "meas_ips",
                        "thr_err"});
        for (const auto& r : cmp.rows) {
            rows.push_back({r.label, fmt_ms(r.predicted_latency_s), fmt_ms(r.measured_latency_s),
                            fmt2(r.latency_rel_err * 100) + "%",
                            fmt2(r.predicted_throughput_ips), fmt2(r.measured_throughput_ips),
                            fmt2(r.throughput_rel_err * 100) + "%"});
        }
        out.get() << "\n";
        print_table(out.get(), rows);
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "within %.0f%%: latency %.0f%%, throughput %.0f%%, both %.0f%%\n",
                      threshold * 100, cmp.frac_latency_within * 100,
                      cmp.frac_throughput_within * 100, cmp.frac_both_within * 100);
        out.get() << buf;
    }
    return sp::kExitOk;
}

// ---- profile --------------------------------------------------------------------

int cmd_profile_validate(const std::string& path) {
    sp::ModelProfile model = sp::load_model_profile(path);
    model.validate();
    std::vector<std::string> classes = model.device_classes();
    std::cout << "ok: " << model.name << ", " << model.blocks.size() << " blocks, batch "
              << model.batch_size << ", classes";
    for (const auto& c : classes) std::cout << " " << c;
    std::cout << "\n";
    return sp::kExitOk;
}

int cmd_profile_show(const std::string& path) {
    sp::ModelProfile model = sp::load_model_profile(path);
    model.validate();
    std::cout << "model " << model.name << "  batch " << model.batch_size << "  input "
              << model.input_bytes << " bytes\n";
    if (model.meta) {
        std::cout << "meta ";
        if (model.meta->param_count) std::cout << "params=" << *model.meta->param_count << " ";
        if (model.meta->size_mb) std::cout << "size_mb=" << *model.meta->size_mb << " ";
        if (model.meta->block_count) std::cout << "blocks=" << *model.meta->block_count;
        std::cout << "\n";
    }
    std::vector<std::string> classes = model.device_classes();
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head = {"#", "block", "out_bytes"};
    for (const auto& c : classes) head.push_back(c + "_ms");
    rows.push_back(head);
    for (std::size_t i = 0; i < model.blocks.size(); i++) {
        const auto& b = model.blocks[i];
        std::vector<std::string> row = {std::to_string(i + 1), b.name,
                                        std::to_string(b.output_bytes)};
        for (const auto& c : classes) row.push_back(fmt_ms(b.exec_on(c)));
        rows.push_back(row);
    }
    print_table(std::cout, rows);
    return sp::kExitOk;
}

int cmd_profile_synth(const sp::SynthSpec& spec, const std::string& out_path) {
    sp::ModelProfile model = sp::synth_profile(spec);
    OutStream out(out_path);
    sp::write_model_profile(model, out.get());
    return sp::kExitOk;
}

int cmd_profile_microbench(const std::string& path, const std::string& device_spec, int reps) {
    sp::ModelProfile model = sp::load_model_profile(path);
    model.validate();
    sp::DeviceProfile device = resolve_device(device_spec, {});
    std::vector<double> measured = sp::microprofile_blocks(model, device, reps);
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"block", "target_ms", "measured_ms", "rel_err"});
    double worst = 0;
    for (std::size_t i = 0; i < model.blocks.size(); i++) {
        double target = model.blocks[i].exec_on(device.device_class) * device.compute_scale;
        double err = target > 0 ? std::fabs(measured[i] - target) / target : 0;
        worst = std::max(worst, err);
        rows.push_back({model.blocks[i].name, fmt_ms(target), fmt_ms(measured[i]),
                        fmt2(err * 100) + "%"});
    }
    print_table(std::cout, rows);
    std::cout << "worst rel_err " << fmt2(worst * 100) << "%\n";
    return sp::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"partition-point explorer and distributed pipeline harness"};
    app.set_version_flag("--version", std::string("splitpipe ") + kVersion);
    app.require_subcommand(1);

    // profile ------------------------------------------------------------
    auto* profile = app.add_subcommand("profile", "inspect, validate, or generate model profiles");
    profile->require_subcommand(1);

    std::string pv_path;
    auto* pv = profile->add_subcommand("validate", "check a profile against all invariants");
    pv->add_option("file", pv_path, "profile file")->required();

    std::string ps_path;
    auto* ps = profile->add_subcommand("show", "print a profile's block table");
    ps->add_option("file", ps_path, "profile file")->required();

    sp::SynthSpec synth_spec;
    std::string synth_shape = "uniform", synth_total = "1s", synth_out;
    std::uint64_t synth_input = synth_spec.input_bytes;
    auto* psy = profile->add_subcommand("synth", "generate a synthetic profile");
    psy->add_option("--blocks", synth_spec.n_blocks, "block count")->default_val(8);
    psy->add_option("--shape", synth_shape, "uniform | front_heavy | back_heavy");
    psy->add_option("--total", synth_total, "total forward time (duration)");
    psy->add_option("--decay", synth_spec.activation_decay, "per-block activation decay factor");
    psy->add_option("--input-bytes", synth_input, "input activation bytes");
    psy->add_option("--batch", synth_spec.batch_size, "batch size");
    psy->add_option("--class", synth_spec.device_class, "device class name");
    psy->add_option("--name", synth_spec.name, "model name");
    psy->add_option("-o,--out", synth_out, "output file (default stdout)");

    std::string pm_path, pm_device = "cpu";
    int pm_reps = 5;
    auto* pm = profile->add_subcommand("microbench",
                                       "run each block's kernel on this host and compare");
    pm->add_option("file", pm_path, "profile file")->required();
    pm->add_option("--device", pm_device, "device spec class[:scale]");
    pm->add_option("--reps", pm_reps, "repetitions per block");

    // plan ----------------------------------------------------------------
    PlanArgs plan_args;
    auto* plan = app.add_subcommand("plan", "predict latency/throughput for every split");
    plan->add_option("--model", plan_args.model_path, "model profile")->required();
    plan->add_option("--devices", plan_args.devices, "two specs, e.g. cpu,cpu:0.5 or pi,pi");
    plan->add_option("--device-file", plan_args.device_file, "named device definitions");
    plan->add_option("--net", plan_args.net, "inter-stage link, e.g. delay=100ms,bw=5Mbit");
    plan->add_option("--return-net", plan_args.return_net, "result link back (default none)");
    plan->add_option("--dispatch-net", plan_args.dispatch_net, "orchestrator-to-stage-1 link");
    plan->add_option("--split", plan_args.splits, "restrict to specific split indices");
    plan->add_flag("--json", plan_args.as_json, "emit JSON instead of a table");
    plan->add_option("-o,--out", plan_args.out_path, "output file (default stdout)");

    // worker ----------------------------------------------------------------
    std::string worker_listen = "127.0.0.1:0";
    int worker_serve = 1;
    std::string worker_accept_timeout;
    auto* worker = app.add_subcommand("worker", "run one pipeline stage");
    worker->add_option("--listen", worker_listen, "host:port to listen on (port 0 = ephemeral)");
    worker->add_option("--serve", worker_serve, "connections to serve before exiting");
    worker->add_option("--accept-timeout", worker_accept_timeout,
                       "give up if no connection arrives in this duration");

    // orchestrate -------------------------------------------------------------
    RunArgs run_args;
    std::vector<std::size_t> orch_splits;
    std::string orch_workers, orch_result_host = "127.0.0.1", orch_out;
    std::uint32_t orch_batches = 8;
    auto* orch = app.add_subcommand("orchestrate", "drive one measured run over a worker chain");
    orch->add_option("--model", run_args.model_path, "model profile")->required();
    orch->add_option("--split", orch_splits, "split indices (one per boundary)")->required();
    orch->add_option("--workers", orch_workers, "worker addresses, one per stage")->required();
    orch->add_option("--devices", run_args.devices, "device specs, one per stage");
    orch->add_option("--device-file", run_args.device_file, "named device definitions");
    orch->add_option("--net", run_args.net, "inter-stage link spec");
    orch->add_option("--return-net", run_args.return_net, "result link spec");
    orch->add_option("--dispatch-net", run_args.dispatch_net, "dispatch link spec");
    orch->add_option("--backend", run_args.backend, "framed | chatty");
    orch->add_option("--batches", orch_batches, "batches to measure");
    orch->add_option("--window", run_args.window, "max batches in flight (0 = stages+1)");
    orch->add_option("--warmup", run_args.warmup, "unrecorded warmup batches");
    orch->add_option("--seed", run_args.seed, "payload seed");
    orch->add_option("--timeout", run_args.timeout, "result inactivity timeout");
    orch->add_option("--connect-timeout", run_args.connect_timeout, "worker connect timeout");
    orch->add_option("--result-host", orch_result_host, "host workers reach this process on");
    orch->add_option("-o,--out", orch_out, "output file (default stdout)");

    // sweep ---------------------------------------------------------------------
    RunArgs sweep_args;
    sp::SweepConfig sweep_config;
    std::string sweep_workers, sweep_out, sweep_csv, sweep_json, sweep_worker_bin;
    std::vector<std::size_t> sweep_splits;
    bool sweep_unphased = false;
    auto* sweep = app.add_subcommand("sweep", "measure every split and mark the Pareto front");
    sweep->add_option("--model", sweep_args.model_path, "model profile")->required();
    sweep->add_option("--devices", sweep_args.devices, "two device specs");
    sweep->add_option("--device-file", sweep_args.device_file, "named device definitions");
    sweep->add_option("--net", sweep_args.net, "inter-stage link spec");
    sweep->add_option("--return-net", sweep_args.return_net, "result link spec");
    sweep->add_option("--dispatch-net", sweep_args.dispatch_net, "dispatch link spec");
    sweep->add_option("--splits", sweep_splits, "subset of splits (default all)");
    sweep->add_option("--reps", sweep_config.repetitions, "repetitions per split");
    sweep->add_option("--backend", sweep_args.backend, "framed | chatty");
    sweep->add_option("--seed", sweep_args.seed, "payload seed");
    sweep->add_option("--window", sweep_args.window, "throughput-phase window (0 = stages+1)");
    sweep->add_option("--latency-batches", sweep_config.latency_batches,
                      "window-1 batches per rep");
    sweep->add_option("--throughput-batches", sweep_config.throughput_batches,
                      "windowed batches per rep");
    sweep->add_flag("--unphased", sweep_unphased, "one phase at --window for both metrics");
    sweep->add_option("--batches", sweep_config.n_batches, "batch count in unphased mode");
    sweep->add_option("--warmup", sweep_args.warmup, "unrecorded warmup batches per rep");
    sweep->add_option("--timeout", sweep_args.timeout, "per-run inactivity timeout");
    sweep->add_option("--connect-timeout", sweep_args.connect_timeout, "worker connect timeout");
    sweep->add_option("--workers", sweep_workers,
                      "pre-started worker addresses (default: spawn locally)");
    sweep->add_option("--worker-bin", sweep_worker_bin,
                      "worker executable for local spawning (default: this binary)");
    sweep->add_option("--csv", sweep_csv, "also write the report as CSV to this file");
    sweep->add_option("--json", sweep_json, "also write the full report as JSON to this file");
    sweep->add_option("-o,--out", sweep_out, "table output (default stdout)");

    // pareto -----------------------------------------------------------------------
    std::string pareto_in, pareto_out;
    auto* pareto = app.add_subcommand("pareto",
                                      "filter a label,latency,throughput CSV to its Pareto front");
    pareto->add_option("file", pareto_in, "input CSV (default stdin)");
    pareto->add_option("-o,--out", pareto_out, "output file (default stdout)");

    // report ------------------------------------------------------------------------
    std::string report_path, report_format = "table", report_out, report_compare;
    RunArgs report_args;
    double report_threshold = 0.15;
    auto* report = app.add_subcommand("report", "reformat or compare a saved sweep report");
    report->add_option("file", report_path, "report JSON from sweep --json")->required();
    report->add_option("--format", report_format, "table | csv | json");
    report->add_option("-o,--out", report_out, "output file (default stdout)");
    report->add_option("--compare", report_compare,
                       "model profile; prints prediction vs measurement");
    report->add_option("--devices", report_args.devices, "device specs for --compare");
    report->add_option("--device-file", report_args.device_file, "named device definitions");
    report->add_option("--net", report_args.net, "inter-stage link for --compare");
    report->add_option("--return-net", report_args.return_net, "result link for --compare");
    report->add_option("--dispatch-net", report_args.dispatch_net, "dispatch link for --compare");
    report->add_option("--threshold", report_threshold, "relative error bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return sp::kExitUsage;
    }

    try {
        if (pv->parsed()) return cmd_profile_validate(pv_path);
        if (ps->parsed()) return cmd_profile_show(ps_path);
        if (psy->parsed()) {
            synth_spec.shape = sp::parse_synth_shape(synth_shape);
            synth_spec.total_time_s = sp::units::parse_duration(synth_total);
            synth_spec.input_bytes = synth_input;
            return cmd_profile_synth(synth_spec, synth_out);
        }
        if (pm->parsed()) return cmd_profile_microbench(pm_path, pm_device, pm_reps);
        if (plan->parsed()) return cmd_plan(plan_args);
        if (worker->parsed()) {
            auto [host, port] = sp::parse_hostport(worker_listen);
            sp::WorkerOptions opts;
            opts.listen_host = host;
            opts.port = port;
            opts.serve_count = worker_serve;
            if (!worker_accept_timeout.empty())
                opts.accept_timeout_s = sp::units::parse_duration(worker_accept_timeout);
            opts.announce = &std::cout;
            return sp::run_worker(opts);
        }
        if (orch->parsed())
            return cmd_orchestrate(run_args, orch_splits, orch_workers, orch_batches,
                                   orch_result_host, orch_out);
        if (sweep->parsed()) {
            sweep_config.phased = !sweep_unphased;
            sweep_config.splits = sweep_splits;
            sweep_config.worker_bin = sweep_worker_bin;
            return cmd_sweep(sweep_args, sweep_config, sweep_workers, sweep_out, sweep_csv,
                             sweep_json);
        }
        if (pareto->parsed()) return cmd_pareto(pareto_in, pareto_out);
        if (report->parsed())
            return cmd_report(report_path, report_format, report_out, report_compare,
                              report_args, report_threshold);
    } catch (const sp::TimeoutError& e) {
        std::cerr << "splitpipe: timeout: " << e.what() << "\n";
        return sp::kExitTimeout;
    } catch (const sp::ParseError& e) {
        std::cerr << "splitpipe: " << e.what() << "\n";
        return sp::kExitValidation;
    } catch (const sp::ValidationError& e) {
        std::cerr << "splitpipe: " << e.what() << "\n";
        return sp::kExitValidation;
    } catch (const sp::Error& e) {
        std::cerr << "splitpipe: " << e.what() << "\n";
        return sp::kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "splitpipe: " << e.what() << "\n";
        return sp::kExitRuntime;
    }
    return sp::kExitUsage;
}
