#include "splitpipe/harness.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "splitpipe/errors.hpp"
#include "splitpipe/log.hpp"
#include "splitpipe/netem.hpp"

namespace splitpipe {

using nlohmann::json;

namespace {

std::string fmt_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string net_desc(const NetworkModel& n) {
    std::ostringstream ss;
    ss << "{delay=" << fmt_g(n.one_way_delay_s);
    if (n.bandwidth_bps) ss << ",bw=" << fmt_g(*n.bandwidth_bps);
    ss << ",overhead=" << fmt_g(n.per_message_overhead_s) << "}";
    return ss.str();
}

}  // namespace

std::string SweepTopology::describe() const {
    std::ostringstream ss;
    ss << "stages=[";
    for (std::size_t i = 0; i < stage_devices.size(); i++) {
        if (i) ss << ",";
        ss << stage_devices[i].device_class << ":" << fmt_g(stage_devices[i].compute_scale);
    }
    ss << "] inter=" << net_desc(inter_stage_link) << " return=" << net_desc(return_link);
    if (dispatch_link) ss << " dispatch=" << net_desc(*dispatch_link);
    return ss.str();
}

std::string describe_environment() {
    utsname u{};
    std::ostringstream ss;
    if (uname(&u) == 0) ss << u.sysname << " " << u.release << " " << u.machine;
    long cores = sysconf(_SC_NPROCESSORS_ONLN);
    ss << ", " << cores << " core" << (cores == 1 ? "" : "s");
    return ss.str();
}

std::string default_worker_bin() {
    if (const char* env = std::getenv("SPLITPIPE_BIN")) {
        char resolved[4096];
        if (realpath(env, resolved)) return resolved;
        return env;
    }
    char buf[4096];
    ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) throw IoError("cannot resolve the worker binary; set SPLITPIPE_BIN");
    buf[n] = '\0';
    return buf;
}

// ---- LocalWorker -------------------------------------------------------------

LocalWorker::LocalWorker(const std::string& bin, const std::vector<std::string>& extra_args,
                         double announce_timeout_s) {
    int pipefd[2];
    if (pipe(pipefd) != 0) throw IoError("pipe failed");

    std::vector<std::string> args = {bin, "worker", "--listen", "127.0.0.1:0"};
    args.insert(args.end(), extra_args.begin(), extra_args.end());

    pid_t pid = fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        throw IoError("fork failed");
    }
    if (pid == 0) {
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        execv(bin.c_str(), argv.data());
        std::fprintf(stderr, "execv %s: %s\n", bin.c_str(), std::strerror(errno));
        _exit(127);
    }
    pid_ = pid;
    ::close(pipefd[1]);
    stdout_fd_ = pipefd[0];
    ::fcntl(stdout_fd_, F_SETFD, FD_CLOEXEC);

    // Read the announce line: "LISTENING <host>:<port>\n".
    std::string line;
    double deadline = steady_now_s() + announce_timeout_s;
    for (;;) {
        double remaining = deadline - steady_now_s();
        if (remaining <= 0) {
            kill_now();
            throw TimeoutError("worker did not announce a listening address in time");
        }
        pollfd p{stdout_fd_, POLLIN, 0};
        int rc = ::poll(&p, 1, (int)(remaining * 1000) + 1);
        if (rc < 0) {
            if (errno == EINTR) continue;
            kill_now();
            throw IoError("poll on worker stdout failed");
        }
        if (rc == 0) continue;
        char c;
        ssize_t n = ::read(stdout_fd_, &c, 1);
        if (n <= 0) {
            kill_now();
            throw IoError("worker exited before announcing a listening address");
        }
        if (c == '\n') break;
        line.push_back(c);
        if (line.size() > 512) {
            kill_now();
            throw ProtocolError("worker announce line too long");
        }
    }
    ::close(stdout_fd_);
    stdout_fd_ = -1;
    if (line.rfind("LISTENING ", 0) != 0)
        throw ProtocolError("unexpected worker announce line: '" + line + "'");
    address_ = line.substr(10);
    SPLITPIPE_LOG_DEBUG("spawned worker pid %d at %s", pid_, address_.c_str());
}

LocalWorker::~LocalWorker() {
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    if (pid_ > 0 && !reaped_) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        reaped_ = true;
    }
}

LocalWorker::ExitInfo LocalWorker::wait_exit(double timeout_s) {
    ExitInfo info;
    if (reaped_) {
        info.exited = true;
        info.code = 0;
        return info;
    }
    double start = steady_now_s();
    double deadline = start + timeout_s;
    for (;;) {
        int status = 0;
        pid_t rc = ::waitpid(pid_, &status, WNOHANG);
        if (rc == pid_) {
            reaped_ = true;
            info.exited = true;
            info.code = WIFEXITED(status) ? WEXITSTATUS(status)
                                          : (WIFSIGNALED(status) ? 128 + WTERMSIG(status) : -1);
            info.waited_s = steady_now_s() - start;
            return info;
        }
        if (rc < 0) {
            info.waited_s = steady_now_s() - start;
            return info;  // nothing to wait on
        }
        if (steady_now_s() >= deadline) {
            info.waited_s = steady_now_s() - start;
            return info;
        }
        usleep(5000);
    }
}

void LocalWorker::kill_now() {
    if (pid_ > 0 && !reaped_) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        reaped_ = true;
    }
}

// ---- sweep --------------------------------------------------------------------

SweepReport run_sweep(const ModelProfile& model, const SweepTopology& topology,
                      const SweepConfig& config) {
    model.validate();
    std::size_t k_stages = topology.stage_devices.size();
    if (k_stages != 2)
        throw ValidationError("run_sweep: the split sweep drives a two-stage chain; got " +
                              std::to_string(k_stages) + " devices");
    if (!config.worker_addrs.empty() && config.worker_addrs.size() != k_stages)
        throw ValidationError("run_sweep: " + std::to_string(config.worker_addrs.size()) +
                              " worker addresses for " + std::to_string(k_stages) + " stages");
    if (model.blocks.size() < 2)
        throw ValidationError("run_sweep: model '" + model.name + "' has nothing to split");

    std::vector<std::size_t> splits = config.splits;
    if (splits.empty())
        for (std::size_t p = 1; p < model.blocks.size(); p++) splits.push_back(p);
    for (std::size_t p : splits)
        if (p < 1 || p >= model.blocks.size())
            throw ValidationError("run_sweep: split " + std::to_string(p) + " out of range 1.." +
                                  std::to_string(model.blocks.size() - 1));

    bool external = !config.worker_addrs.empty();
    std::string bin = external ? std::string()
                               : (config.worker_bin.empty() ? default_worker_bin()
                                                            : config.worker_bin);
    std::uint32_t window =
        config.window == 0 ? (std::uint32_t)k_stages + 1 : config.window;

    SweepReport report;
    report.model_name = model.name;
    report.backend = backend_name(config.backend);
    report.batch_size = model.batch_size;
    report.seed = config.seed;
    report.repetitions = config.repetitions;
    report.environment = describe_environment();
    report.topology = topology.describe();

    for (std::size_t p : splits) {
        MeasurementRecord rec;
        rec.model_name = model.name;
        rec.split_indices = {p};
        rec.split_label = "P" + std::to_string(p);

        // One worker pair per split, serving every repetition in sequence.
        std::vector<std::unique_ptr<LocalWorker>> workers;
        std::vector<std::string> addrs;
        if (external) {
            addrs = config.worker_addrs;
        } else {
            try {
                std::vector<std::string> serve_args = {"--serve",
                                                       std::to_string(config.repetitions)};
                for (std::size_t k = 0; k < k_stages; k++) {
                    workers.push_back(std::make_unique<LocalWorker>(bin, serve_args));
                    addrs.push_back(workers.back()->address());
                    report.lifecycle.workers_spawned++;
                }
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
                SPLITPIPE_LOG_WARN("split P%zu worker spawn failed: %s", p, e.what());
            }
        }

        for (int rep_i = 0; rep_i < config.repetitions && !rec.failed; rep_i++) {
            try {
                OrchestratorOptions opts;
                opts.model = &model;
                opts.plan.model = &model;
                opts.plan.split_indices = {p};
                opts.plan.stage_devices = topology.stage_devices;
                opts.plan.links = {topology.inter_stage_link, topology.return_link};
                opts.plan.dispatch_link = topology.dispatch_link;
                opts.worker_addrs = addrs;
                opts.backend = config.backend;
                opts.seed = config.seed;
                opts.result_timeout_s = config.timeout_s;
                opts.connect_timeout_s = config.connect_timeout_s;
                opts.warmup_batches = config.warmup_batches;
                opts.window = window;
                if (config.phased) {
                    PhaseSpec lat;
                    lat.window = 1;
                    lat.count = config.latency_batches;
                    lat.use_for_latency = true;
                    PhaseSpec thr;
                    thr.window = window;
                    thr.count = config.throughput_batches;
                    thr.use_for_throughput = true;
                    opts.phases = {lat, thr};
                } else {
                    opts.n_batches = config.n_batches;
                }

                RunRecord run = run_orchestrator(opts);
                report.lifecycle.runs++;
                if (!run.complete) report.lifecycle.all_batches_complete = false;
                rec.runs.push_back(std::move(run));
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
                for (auto& w : workers) w->kill_now();
                SPLITPIPE_LOG_WARN("split P%zu rep %d failed: %s", p, rep_i, e.what());
            }
        }

        // The workers served their final connection; they should be gone
        // within the exit timeout.
        for (auto& w : workers) {
            LocalWorker::ExitInfo info = w->wait_exit(config.worker_exit_timeout_s);
            if (!info.exited) {
                if (!rec.failed) report.lifecycle.all_workers_exited_clean = false;
                w->kill_now();
            } else if (info.code != 0 && !rec.failed) {
                report.lifecycle.all_workers_exited_clean = false;
            }
            if (!rec.failed)
                report.lifecycle.max_worker_exit_s =
                    std::max(report.lifecycle.max_worker_exit_s, info.waited_s);
        }

        if (!rec.failed && !rec.runs.empty()) {
            rec.repetitions = (int)rec.runs.size();
            double lat = 0, thr = 0, pinned = 0, ser = 0, wire = 0, tot = 0;
            rec.stage_exec_s.assign(k_stages, 0.0);
            std::vector<double> cpu(k_stages, 0.0);
            std::vector<std::uint64_t> rss(k_stages, 0);
            std::vector<int> res_counts(k_stages, 0);
            for (const auto& run : rec.runs) {
                lat += run.mean_latency_s;
                thr += run.steady_throughput_ips;
                pinned += run.throughput_ips;
                ser += run.net_serialization_s;
                wire += run.net_wire_s;
                tot += run.net_total_s;
                for (std::size_t k = 0; k < k_stages && k < run.stage_exec_means_s.size(); k++)
                    rec.stage_exec_s[k] += run.stage_exec_means_s[k];
                for (const auto& r : run.resources) {
                    if (r.stage < k_stages) {
                        cpu[r.stage] += r.cpu_s;
                        rss[r.stage] = std::max(rss[r.stage], r.max_rss_bytes);
                        res_counts[r.stage]++;
                    }
                }
            }
            double n = (double)rec.runs.size();
            rec.latency_s = lat / n;
            rec.throughput_ips = thr / n;
            rec.pinned_throughput_ips = pinned / n;
            rec.net_serialization_s = ser / n;
            rec.net_wire_s = wire / n;
            rec.net_total_s = tot / n;
            for (auto& e : rec.stage_exec_s) e /= n;
            for (std::size_t k = 0; k < k_stages; k++) {
                if (res_counts[k] > 0) {
                    StageResources r;
                    r.stage = (std::uint32_t)k;
                    r.cpu_s = cpu[k] / res_counts[k];
                    r.max_rss_bytes = rss[k];
                    rec.resources.push_back(r);
                }
            }
        }
        report.records.push_back(std::move(rec));
    }

    bool any_ok = false;
    std::vector<MetricPoint> points;
    for (const auto& r : report.records) {
        if (r.failed) continue;
        any_ok = true;
        points.push_back({r.split_label, r.latency_s, r.throughput_ips});
    }
    if (!any_ok) throw IoError("sweep failed for every split");
    for (const auto& pt : pareto_front(points)) report.pareto_labels.push_back(pt.label);
    return report;
}

// ---- comparison ----------------------------------------------------------------

CompareSummary compare_model_vs_measured(const std::vector<SweepEntry>& predicted,
                                         const SweepReport& measured, double threshold) {
    CompareSummary summary;
    summary.threshold = threshold;
    std::map<std::string, const MeasurementRecord*> by_label;
    for (const auto& r : measured.records)
        if (!r.failed) by_label[r.split_label] = &r;

    int lat_ok = 0, thr_ok = 0, both_ok = 0;
    for (const auto& e : predicted) {
        auto it = by_label.find(e.plan.split_label());
        if (it == by_label.end()) continue;
        const MeasurementRecord& m = *it->second;
        CompareRow row;
        row.label = e.plan.split_label();
        row.predicted_latency_s = e.metrics.latency_s;
        row.measured_latency_s = m.latency_s;
        row.latency_rel_err = e.metrics.latency_s > 0
                                  ? std::fabs(m.latency_s - e.metrics.latency_s) /
                                        e.metrics.latency_s
                                  : 0;
        row.predicted_throughput_ips = e.metrics.throughput_ips;
        row.measured_throughput_ips = m.throughput_ips;
        row.throughput_rel_err =
            e.metrics.throughput_ips > 0
                ? std::fabs(m.throughput_ips - e.metrics.throughput_ips) /
                      e.metrics.throughput_ips
                : 0;
        bool l = row.latency_rel_err <= threshold;
        bool t = row.throughput_rel_err <= threshold;
        lat_ok += l;
        thr_ok += t;
        both_ok += l && t;
        summary.rows.push_back(std::move(row));
    }
    if (!summary.rows.empty()) {
        double n = (double)summary.rows.size();
        summary.frac_latency_within = lat_ok / n;
        summary.frac_throughput_within = thr_ok / n;
        summary.frac_both_within = both_ok / n;
    }
    return summary;
}

// ---- CSV ------------------------------------------------------------------------

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

// Reads one logical CSV record: newlines inside an open quote continue the
// record onto the next physical line.
bool csv_record(std::istream& in, std::string& rec) {
    if (!std::getline(in, rec)) return false;
    std::string cont;
    while (std::count(rec.begin(), rec.end(), '"') % 2 != 0 && std::getline(in, cont))
        rec += "\n" + cont;
    return true;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); i++) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    i++;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void emit_report_csv(const SweepReport& report, std::ostream& out) {
    std::size_t k_stages = 0;
    for (const auto& r : report.records) k_stages = std::max(k_stages, r.stage_exec_s.size());
    if (k_stages == 0) k_stages = 2;

    out << "model,split,split_index,repetitions,latency_s,throughput_ips,pinned_throughput_ips";
    for (std::size_t k = 1; k <= k_stages; k++) out << ",stage" << k << "_exec_s";
    out << ",net_serialization_s,net_wire_s,net_s";
    for (std::size_t k = 1; k <= k_stages; k++) out << ",stage" << k << "_cpu_s";
    for (std::size_t k = 1; k <= k_stages; k++) out << ",stage" << k << "_max_rss_bytes";
    out << ",failed,error,pareto\n";

    for (const auto& r : report.records) {
        bool pareto = std::find(report.pareto_labels.begin(), report.pareto_labels.end(),
                                r.split_label) != report.pareto_labels.end();
        out << csv_quote(r.model_name) << "," << r.split_label << "," << r.first_split() << ","
            << r.repetitions << "," << fmt_g(r.latency_s) << "," << fmt_g(r.throughput_ips) << ","
            << fmt_g(r.pinned_throughput_ips);
        for (std::size_t k = 0; k < k_stages; k++)
            out << "," << (k < r.stage_exec_s.size() ? fmt_g(r.stage_exec_s[k]) : "");
        out << "," << fmt_g(r.net_serialization_s) << "," << fmt_g(r.net_wire_s) << ","
            << fmt_g(r.net_total_s);
        for (std::size_t k = 0; k < k_stages; k++) {
            const StageResources* res = nullptr;
            for (const auto& s : r.resources)
                if (s.stage == k) res = &s;
            out << "," << (res ? fmt_g(res->cpu_s) : "");
        }
        for (std::size_t k = 0; k < k_stages; k++) {
            const StageResources* res = nullptr;
            for (const auto& s : r.resources)
                if (s.stage == k) res = &s;
            out << "," << (res ? std::to_string(res->max_rss_bytes) : "");
        }
        out << "," << (r.failed ? "true" : "false") << "," << csv_quote(r.error) << ","
            << (pareto ? "true" : "false") << "\n";
    }
}

std::vector<CsvRecord> load_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV report");
    std::vector<std::string> header = csv_split(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); i++) col[header[i]] = i;
    auto need = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw ParseError("CSV report missing column '" + name + "'");
        return it->second;
    };
    std::size_t c_model = need("model"), c_split = need("split"),
                c_reps = need("repetitions"), c_lat = need("latency_s"),
                c_thr = need("throughput_ips"), c_failed = need("failed"),
                c_pareto = need("pareto");

    std::vector<CsvRecord> out;
    int lineno = 1;
    while (csv_record(in, line)) {
        lineno++;
        if (line.empty()) continue;
        std::vector<std::string> f = csv_split(line);
        if (f.size() != header.size())
            throw ParseError("CSV row " + std::to_string(lineno) + " has " +
                             std::to_string(f.size()) + " fields, header has " +
                             std::to_string(header.size()));
        CsvRecord row;
        row.record.model_name = f[c_model];
        row.record.split_label = f[c_split];
        // "P3" or "P3+P7"
        std::istringstream labels(f[c_split]);
        std::string part;
        while (std::getline(labels, part, '+')) {
            if (part.size() < 2 || part[0] != 'P')
                throw ParseError("CSV row " + std::to_string(lineno) + ": bad split label '" +
                                 f[c_split] + "'");
            row.record.split_indices.push_back(std::stoull(part.substr(1)));
        }
        row.record.repetitions = std::stoi(f[c_reps]);
        row.record.latency_s = std::stod(f[c_lat]);
        row.record.throughput_ips = std::stod(f[c_thr]);
        if (col.count("pinned_throughput_ips"))
            row.record.pinned_throughput_ips = std::stod(f[col["pinned_throughput_ips"]]);
        for (std::size_t k = 1;; k++) {
            auto it = col.find("stage" + std::to_string(k) + "_exec_s");
            if (it == col.end()) break;
            if (f[it->second].empty()) break;
            row.record.stage_exec_s.push_back(std::stod(f[it->second]));
        }
        for (std::size_t k = 1;; k++) {
            auto cpu_it = col.find("stage" + std::to_string(k) + "_cpu_s");
            auto rss_it = col.find("stage" + std::to_string(k) + "_max_rss_bytes");
            if (cpu_it == col.end() || rss_it == col.end()) break;
            if (f[cpu_it->second].empty() && f[rss_it->second].empty()) break;
            StageResources res;
            res.stage = (std::uint32_t)(k - 1);
            if (!f[cpu_it->second].empty()) res.cpu_s = std::stod(f[cpu_it->second]);
            if (!f[rss_it->second].empty())
                res.max_rss_bytes = std::stoull(f[rss_it->second]);
            row.record.resources.push_back(res);
        }
        if (col.count("net_serialization_s"))
            row.record.net_serialization_s = std::stod(f[col["net_serialization_s"]]);
        if (col.count("net_wire_s")) row.record.net_wire_s = std::stod(f[col["net_wire_s"]]);
        if (col.count("net_s")) row.record.net_total_s = std::stod(f[col["net_s"]]);
        row.record.failed = f[c_failed] == "true";
        if (col.count("error")) row.record.error = f[col["error"]];
        row.pareto = f[c_pareto] == "true";
        out.push_back(std::move(row));
    }
    return out;
}

// ---- JSON -----------------------------------------------------------------------

namespace {

json resources_to_json(const std::vector<StageResources>& res) {
    json arr = json::array();
    for (const auto& r : res)
        arr.push_back(
            {{"stage", r.stage}, {"cpu_s", r.cpu_s}, {"max_rss_bytes", r.max_rss_bytes}});
    return arr;
}

std::vector<StageResources> resources_from_json(const json& arr) {
    std::vector<StageResources> out;
    for (const auto& e : arr) {
        StageResources r;
        r.stage = e.at("stage").get<std::uint32_t>();
        r.cpu_s = e.at("cpu_s").get<double>();
        r.max_rss_bytes = e.at("max_rss_bytes").get<std::uint64_t>();
        out.push_back(r);
    }
    return out;
}

json run_to_json(const RunRecord& run) {
    json batches = json::array();
    for (const auto& b : run.batches)
        batches.push_back({{"id", b.batch_id},
                           {"latency_s", b.latency_s},
                           {"dispatch_s", b.dispatch_s},
                           {"result_s", b.result_s},
                           {"phase", b.phase}});
    return json{{"model", run.model_name},
                {"split_label", run.split_label},
                {"split_indices", run.split_indices},
                {"backend", run.backend},
                {"batch_size", run.batch_size},
                {"window", run.window},
                {"seed", run.seed},
                {"mean_latency_s", run.mean_latency_s},
                {"throughput_ips", run.throughput_ips},
                {"steady_throughput_ips", run.steady_throughput_ips},
                {"stage_exec_means_s", run.stage_exec_means_s},
                {"net_serialization_s", run.net_serialization_s},
                {"net_wire_s", run.net_wire_s},
                {"net_total_s", run.net_total_s},
                {"resources", resources_to_json(run.resources)},
                {"complete", run.complete},
                {"dispatched", run.dispatched},
                {"returned", run.returned},
                {"duplicate_results", run.duplicate_results},
                {"run_wall_s", run.run_wall_s},
                {"batches", batches}};
}

RunRecord run_from_json(const json& j) {
    RunRecord run;
    run.model_name = j.at("model").get<std::string>();
    run.split_label = j.at("split_label").get<std::string>();
    run.split_indices = j.at("split_indices").get<std::vector<std::size_t>>();
    run.backend = j.at("backend").get<std::string>();
    run.batch_size = j.at("batch_size").get<std::uint32_t>();
    run.window = j.at("window").get<std::uint32_t>();
    run.seed = j.at("seed").get<std::uint64_t>();
    run.mean_latency_s = j.at("mean_latency_s").get<double>();
    run.throughput_ips = j.at("throughput_ips").get<double>();
    run.steady_throughput_ips = j.at("steady_throughput_ips").get<double>();
    run.stage_exec_means_s = j.at("stage_exec_means_s").get<std::vector<double>>();
    run.net_serialization_s = j.at("net_serialization_s").get<double>();
    run.net_wire_s = j.at("net_wire_s").get<double>();
    run.net_total_s = j.at("net_total_s").get<double>();
    run.resources = resources_from_json(j.at("resources"));
    run.complete = j.at("complete").get<bool>();
    run.dispatched = j.at("dispatched").get<std::uint64_t>();
    run.returned = j.at("returned").get<std::uint64_t>();
    run.duplicate_results = j.at("duplicate_results").get<std::uint64_t>();
    run.run_wall_s = j.at("run_wall_s").get<double>();
    for (const auto& bj : j.at("batches")) {
        MeasuredBatch b;
        b.batch_id = bj.at("id").get<std::uint64_t>();
        b.latency_s = bj.at("latency_s").get<double>();
        b.dispatch_s = bj.at("dispatch_s").get<double>();
        b.result_s = bj.at("result_s").get<double>();
        b.phase = bj.at("phase").get<int>();
        run.batches.push_back(std::move(b));
    }
    return run;
}

}  // namespace

std::string run_record_json(const RunRecord& run) { return run_to_json(run).dump(2); }

void emit_report_json(const SweepReport& report, std::ostream& out) {
    json records = json::array();
    for (const auto& r : report.records) {
        json runs = json::array();
        for (const auto& run : r.runs) runs.push_back(run_to_json(run));
        records.push_back({{"model", r.model_name},
                           {"split_label", r.split_label},
                           {"split_indices", r.split_indices},
                           {"repetitions", r.repetitions},
                           {"latency_s", r.latency_s},
                           {"throughput_ips", r.throughput_ips},
                           {"pinned_throughput_ips", r.pinned_throughput_ips},
                           {"stage_exec_s", r.stage_exec_s},
                           {"net_serialization_s", r.net_serialization_s},
                           {"net_wire_s", r.net_wire_s},
                           {"net_total_s", r.net_total_s},
                           {"resources", resources_to_json(r.resources)},
                           {"failed", r.failed},
                           {"error", r.error},
                           {"runs", runs}});
    }
    json j = {{"model", report.model_name},
              {"backend", report.backend},
              {"batch_size", report.batch_size},
              {"seed", report.seed},
              {"repetitions", report.repetitions},
              {"environment", report.environment},
              {"topology", report.topology},
              {"lifecycle",
               {{"runs", report.lifecycle.runs},
                {"workers_spawned", report.lifecycle.workers_spawned},
                {"all_batches_complete", report.lifecycle.all_batches_complete},
                {"all_workers_exited_clean", report.lifecycle.all_workers_exited_clean},
                {"max_worker_exit_s", report.lifecycle.max_worker_exit_s}}},
              {"records", records},
              {"pareto", report.pareto_labels}};
    out << j.dump(2) << "\n";
}

SweepReport load_report_json(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what());
    }
    try {
        SweepReport report;
        report.model_name = j.at("model").get<std::string>();
        report.backend = j.at("backend").get<std::string>();
        report.batch_size = j.at("batch_size").get<std::uint32_t>();
        report.seed = j.at("seed").get<std::uint64_t>();
        report.repetitions = j.at("repetitions").get<int>();
        report.environment = j.at("environment").get<std::string>();
        report.topology = j.at("topology").get<std::string>();
        const json& lc = j.at("lifecycle");
        report.lifecycle.runs = lc.at("runs").get<std::uint64_t>();
        report.lifecycle.workers_spawned = lc.at("workers_spawned").get<std::uint64_t>();
        report.lifecycle.all_batches_complete = lc.at("all_batches_complete").get<bool>();
        report.lifecycle.all_workers_exited_clean =
            lc.at("all_workers_exited_clean").get<bool>();
        report.lifecycle.max_worker_exit_s = lc.at("max_worker_exit_s").get<double>();
        for (const auto& rj : j.at("records")) {
            MeasurementRecord r;
            r.model_name = rj.at("model").get<std::string>();
            r.split_label = rj.at("split_label").get<std::string>();
            r.split_indices = rj.at("split_indices").get<std::vector<std::size_t>>();
            r.repetitions = rj.at("repetitions").get<int>();
            r.latency_s = rj.at("latency_s").get<double>();
            r.throughput_ips = rj.at("throughput_ips").get<double>();
            r.pinned_throughput_ips = rj.at("pinned_throughput_ips").get<double>();
            r.stage_exec_s = rj.at("stage_exec_s").get<std::vector<double>>();
            r.net_serialization_s = rj.at("net_serialization_s").get<double>();
            r.net_wire_s = rj.at("net_wire_s").get<double>();
            r.net_total_s = rj.at("net_total_s").get<double>();
            r.resources = resources_from_json(rj.at("resources"));
            r.failed = rj.at("failed").get<bool>();
            r.error = rj.at("error").get<std::string>();
            for (const auto& runj : rj.at("runs")) r.runs.push_back(run_from_json(runj));
            report.records.push_back(std::move(r));
        }
        report.pareto_labels = j.at("pareto").get<std::vector<std::string>>();
        return report;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report JSON missing field: ") + e.what());
    }
}

}  // namespace splitpipe
