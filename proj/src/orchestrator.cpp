#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <csignal>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "splitpipe/checksum.hpp"
#include "splitpipe/errors.hpp"
#include "splitpipe/log.hpp"
#include "splitpipe/runtime.hpp"

namespace splitpipe {

using nlohmann::json;

namespace {

struct BatchState {
    double dispatch_s = 0.0;
    double result_s = 0.0;
    std::string report_json;
    std::size_t phase = 0;
    bool recorded = true;
    bool returned = false;
};

struct SharedState {
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::uint64_t, BatchState> batches;
    std::uint64_t inflight = 0;
    std::uint64_t returned = 0;
    std::uint64_t duplicates = 0;
    bool shutdown_echo = false;
    std::string resources_json;
    bool aborted = false;
    bool abort_is_timeout = false;
    std::string abort_message;

    void abort(bool is_timeout, const std::string& message) {
        std::lock_guard<std::mutex> lock(mu);
        if (!aborted) {
            aborted = true;
            abort_is_timeout = is_timeout;
            abort_message = message;
        }
        cv.notify_all();
    }
};

std::uint64_t expected_final_checksum(std::uint64_t seed, std::uint64_t batch_id,
                                      std::uint32_t n_stages, std::uint64_t final_bytes) {
    std::vector<std::uint8_t> body(final_bytes);
    fill_payload(body, payload_seed(seed, batch_id, n_stages));
    return fnv1a64(body);
}

ShapingConfig link_shaping(const NetworkModel& net, std::uint64_t payload_bytes) {
    // Bucket depth defaults to one maximum frame on this hop.
    return ShapingConfig::from(net, payload_bytes + 4096);
}

}  // namespace

std::vector<StageAssignment> build_assignments(const OrchestratorOptions& options,
                                               const std::string& result_hostport) {
    const PartitionPlan& plan = options.plan;
    plan.validate();
    std::size_t k_stages = plan.stage_count();
    if (options.worker_addrs.size() != k_stages)
        throw ValidationError("orchestrator: plan has " + std::to_string(k_stages) +
                              " stages but " + std::to_string(options.worker_addrs.size()) +
                              " worker addresses were given");

    std::uint32_t window = options.window == 0 ? (std::uint32_t)k_stages + 1 : options.window;
    std::vector<StageAssignment> out;
    for (std::size_t k = 0; k < k_stages; k++) {
        auto [first, last] = plan.stage_range(k);
        StageAssignment a;
        a.model_name = plan.model->name;
        a.stage_index = (std::uint32_t)k;
        a.first_block = (std::uint32_t)first;
        a.last_block = (std::uint32_t)(last - 1);
        for (std::size_t i = first; i < last; i++) {
            const BlockProfile& b = plan.model->blocks[i];
            a.blocks.push_back(
                {b.name, b.exec_on(plan.stage_devices[k].device_class), b.output_bytes});
        }
        a.device = plan.stage_devices[k];
        a.next_hop = (k + 1 < k_stages) ? options.worker_addrs[k + 1]
                                        : ("result:" + result_hostport);
        a.window = window;
        a.backend = options.backend;
        a.batch_size = plan.model->batch_size;
        a.seed = options.seed;
        if (!plan.links[k].is_unshaped())
            a.shaping = link_shaping(plan.links[k], plan.stage_output_bytes(k));
        if (k == 0) {
            if (plan.dispatch_link && !plan.dispatch_link->is_unshaped())
                a.reverse_shaping = link_shaping(*plan.dispatch_link, 4096);
        } else if (!plan.links[k - 1].is_unshaped()) {
            a.reverse_shaping = link_shaping(plan.links[k - 1], 4096);
        }
        a.io_timeout_s = options.result_timeout_s;
        out.push_back(std::move(a));
    }
    return out;
}

RunRecord run_orchestrator(const OrchestratorOptions& options) {
    std::signal(SIGPIPE, SIG_IGN);
    if (!options.model || options.plan.model != options.model)
        throw ValidationError("orchestrator: plan does not reference the given model");
    const PartitionPlan& plan = options.plan;
    plan.validate();
    const ModelProfile& model = *options.model;
    std::size_t k_stages = plan.stage_count();
    double run_start = steady_now_s();

    Listener result_listener = Listener::bind_to(options.result_host, 0);
    std::string result_hostport =
        options.result_host + ":" + std::to_string(result_listener.port());

    auto [host0, port0] = parse_hostport(options.worker_addrs.at(0));
    Socket ctrl_sock = Socket::connect_to(host0, port0, options.connect_timeout_s);
    ShapingConfig dispatch_cfg;
    if (plan.dispatch_link && !plan.dispatch_link->is_unshaped())
        dispatch_cfg = link_shaping(*plan.dispatch_link, model.input_bytes + 4096);
    Channel ctrl(std::move(ctrl_sock), options.backend, dispatch_cfg);

    Frame hello{MsgType::hello, 0, {}};
    std::string hello_text = json{{"role", "orchestrator"},
                                  {"backend", backend_name(options.backend)},
                                  {"seed", options.seed}}
                                 .dump();
    hello.payload.assign(hello_text.begin(), hello_text.end());
    ctrl.send_control(hello);
    for (const auto& a : build_assignments(options, result_hostport)) {
        Frame af{MsgType::assign, 0, {}};
        std::string text = a.to_json();
        af.payload.assign(text.begin(), text.end());
        ctrl.send_control(af);
    }
    ctrl.flush();

    // Wait for the chain to ring back; surface worker setup errors promptly.
    Socket result_sock;
    {
        double deadline = steady_now_s() + options.result_timeout_s;
        for (;;) {
            if (steady_now_s() > deadline)
                throw TimeoutError("no result connection from the last stage within " +
                                   std::to_string(options.result_timeout_s) + " s");
            int mask =
                wait_readable_pair(result_listener.fd(), ctrl.socket().fd(), 0.1);
            if (mask & 1) {
                result_sock = result_listener.accept_conn(0.5);
                break;
            }
            if (mask & 2) {
                auto f = ctrl.recv(1.0);
                if (!f) throw IoError("first stage closed the connection during setup");
                if (f->type == MsgType::error)
                    throw IoError("worker error during setup: " +
                                  std::string((const char*)f->payload.data(),
                                              f->payload.size()));
                throw ProtocolError(std::string("unexpected ") + msg_type_name(f->type) +
                                    " on the control channel during setup");
            }
        }
    }
    ShapingConfig return_ack_cfg;
    if (options.backend == BackendMode::chatty && !plan.links.back().is_unshaped())
        return_ack_cfg = link_shaping(plan.links.back(), 4096);
    Channel result_chan(std::move(result_sock), options.backend, return_ack_cfg);
    {
        auto f = result_chan.recv(options.result_timeout_s);
        if (!f) throw IoError("result channel closed before HELLO");
        if (f->type == MsgType::hello) {
            // Chain is ready.
        } else if (f->type == MsgType::error) {
            throw IoError("worker error during setup: " +
                          std::string((const char*)f->payload.data(), f->payload.size()));
        } else {
            throw ProtocolError(std::string("expected HELLO on the result channel, got ") +
                                msg_type_name(f->type));
        }
    }

    SharedState st;
    std::uint64_t final_bytes = plan.stage_output_bytes(k_stages - 1);

    std::thread receiver([&] {
        try {
            for (;;) {
                auto f = result_chan.recv(options.result_timeout_s);
                if (!f) {
                    std::lock_guard<std::mutex> lock(st.mu);
                    if (!st.shutdown_echo && !st.aborted) {
                        st.aborted = true;
                        st.abort_message = "result channel closed unexpectedly";
                    }
                    st.cv.notify_all();
                    return;
                }
                if (f->type == MsgType::result) {
                    PayloadMsg msg = decode_payload_msg(f->payload);
                    double now = steady_now_s();
                    if (msg.body.size() != final_bytes)
                        throw ProtocolError("result body is " + std::to_string(msg.body.size()) +
                                            " bytes, expected " + std::to_string(final_bytes));
                    std::uint64_t expect = expected_final_checksum(
                        options.seed, msg.batch_id, (std::uint32_t)k_stages, final_bytes);
                    if (fnv1a64(msg.body) != expect)
                        throw ProtocolError("result body bytes for batch " +
                                            std::to_string(msg.batch_id) +
                                            " do not match the seeded stream");
                    std::lock_guard<std::mutex> lock(st.mu);
                    auto it = st.batches.find(msg.batch_id);
                    if (it == st.batches.end())
                        throw ProtocolError("result for unknown batch " +
                                            std::to_string(msg.batch_id));
                    if (it->second.returned) {
                        st.duplicates++;
                        throw ProtocolError("duplicate result for batch " +
                                            std::to_string(msg.batch_id));
                    }
                    it->second.returned = true;
                    it->second.result_s = now;
                    it->second.report_json = msg.report_json;
                    st.returned++;
                    if (st.inflight > 0) st.inflight--;
                    st.cv.notify_all();
                } else if (f->type == MsgType::shutdown) {
                    std::lock_guard<std::mutex> lock(st.mu);
                    st.shutdown_echo = true;
                    st.resources_json.assign((const char*)f->payload.data(), f->payload.size());
                    st.cv.notify_all();
                    return;
                } else if (f->type == MsgType::error) {
                    throw IoError("worker error: " + std::string((const char*)f->payload.data(),
                                                                 f->payload.size()));
                } else {
                    throw ProtocolError(std::string("unexpected ") + msg_type_name(f->type) +
                                        " on the result channel");
                }
            }
        } catch (const TimeoutError& e) {
            st.abort(true, e.what());
        } catch (const std::exception& e) {
            st.abort(false, e.what());
        }
    });

    // While the sender waits (for a window slot or a drain), keep an eye on
    // the control socket: a failed worker reports there.
    auto wait_while = [&](auto pred) {
        std::unique_lock<std::mutex> lock(st.mu);
        while (pred() && !st.aborted) {
            bool ctrl_ready = false;
            st.cv.wait_for(lock, std::chrono::milliseconds(50));
            if (pred() && !st.aborted) {
                lock.unlock();
                ctrl_ready = ctrl.wait_readable(0.0);
                if (ctrl_ready) {
                    try {
                        auto f = ctrl.recv(1.0);
                        if (!f)
                            st.abort(false, "first stage closed the control connection");
                        else if (f->type == MsgType::error)
                            st.abort(false,
                                     "worker error: " + std::string((const char*)f->payload.data(),
                                                                    f->payload.size()));
                        else
                            st.abort(false, std::string("unexpected ") +
                                                msg_type_name(f->type) +
                                                " on the control channel");
                    } catch (const std::exception& e) {
                        st.abort(false, e.what());
                    }
                }
                lock.lock();
            }
        }
        return !st.aborted;
    };

    std::vector<PhaseSpec> phases = options.phases;
    std::uint32_t default_window =
        options.window == 0 ? (std::uint32_t)k_stages + 1 : options.window;
    if (phases.empty()) {
        PhaseSpec main;
        main.window = default_window;
        main.count = options.n_batches;
        main.use_for_latency = true;
        main.use_for_throughput = true;
        phases.push_back(main);
    }
    if (options.warmup_batches > 0) {
        PhaseSpec warmup;
        warmup.window = 1;
        warmup.count = options.warmup_batches;
        warmup.recorded = false;
        phases.insert(phases.begin(), warmup);
    }

    std::uint64_t next_id = 0;
    for (std::size_t pi = 0; pi < phases.size() ; pi++) {
        const PhaseSpec& ph = phases[pi];
        for (std::uint32_t i = 0; i < ph.count; i++) {
            if (!wait_while([&] { return st.inflight >= ph.window; })) break;
            std::uint64_t id = next_id++;

            PayloadMsg pm;
            pm.batch_id = id;
            pm.dest_stage = 0;
            pm.report_json = "[]";
            pm.body.resize(model.input_bytes);
            fill_payload(pm.body, payload_seed(options.seed, id, 0));
            Frame bf{MsgType::batch, 0, encode_payload_msg(pm)};

            {
                std::lock_guard<std::mutex> lock(st.mu);
                if (st.aborted) break;
                BatchState bs;
                bs.phase = pi;
                bs.recorded = ph.recorded;
                bs.dispatch_s = steady_now_s();
                st.batches.emplace(id, bs);
                st.inflight++;
            }
            try {
                ctrl.control_round_trip("dispatch", options.result_timeout_s);
                ctrl.send_payload(std::move(bf), options.result_timeout_s);
            } catch (const std::exception& e) {
                st.abort(false, e.what());
                break;
            }
        }
        // Drain the phase so the next one starts from an empty pipeline.
        if (!wait_while([&] { return st.inflight > 0; })) break;
    }

    bool aborted_before_shutdown;
    {
        std::lock_guard<std::mutex> lock(st.mu);
        aborted_before_shutdown = st.aborted;
    }
    if (!aborted_before_shutdown) {
        Frame sf{MsgType::shutdown, 0, {}};
        std::string empty = "[]";
        sf.payload.assign(empty.begin(), empty.end());
        try {
            ctrl.send_control(sf);
            ctrl.flush();
        } catch (const std::exception& e) {
            st.abort(false, e.what());
        }
        std::unique_lock<std::mutex> lock(st.mu);
        double deadline = steady_now_s() + options.result_timeout_s;
        while (!st.shutdown_echo && !st.aborted) {
            if (steady_now_s() > deadline) {
                st.aborted = true;
                st.abort_is_timeout = true;
                st.abort_message = "no SHUTDOWN echo from the chain";
                break;
            }
            st.cv.wait_for(lock, std::chrono::milliseconds(50));
        }
    }

    // Unblock the receiver if it is still parked in recv().
    {
        std::lock_guard<std::mutex> lock(st.mu);
        if (st.aborted) result_chan.socket().shutdown_both();
    }
    receiver.join();

    {
        std::lock_guard<std::mutex> lock(st.mu);
        if (st.aborted) {
            if (st.abort_is_timeout) throw TimeoutError("run aborted: " + st.abort_message);
            throw IoError("run aborted: " + st.abort_message);
        }
    }
    ctrl.close();

    RunRecord rec;
    rec.model_name = model.name;
    rec.split_label = plan.split_label();
    rec.split_indices = plan.split_indices;
    rec.backend = backend_name(options.backend);
    rec.batch_size = model.batch_size;
    rec.window = default_window;
    rec.seed = options.seed;
    rec.resources = parse_stage_resources(st.resources_json);
    rec.run_wall_s = steady_now_s() - run_start;

    std::vector<const BatchState*> lat_batches, thr_batches;
    for (auto& [id, bs] : st.batches) {
        rec.dispatched++;
        if (bs.returned) rec.returned++;
        if (!bs.recorded || !bs.returned) continue;
        MeasuredBatch mb;
        mb.batch_id = id;
        mb.dispatch_s = bs.dispatch_s;
        mb.result_s = bs.result_s;
        mb.latency_s = bs.result_s - bs.dispatch_s;
        mb.reports = parse_stage_reports(bs.report_json);
        mb.phase = (int)bs.phase;
        rec.batches.push_back(std::move(mb));
        const PhaseSpec& ph = phases[bs.phase];
        if (ph.use_for_latency) lat_batches.push_back(&bs);
        if (ph.use_for_throughput) thr_batches.push_back(&bs);
    }
    rec.duplicate_results = st.duplicates;
    rec.complete = rec.dispatched == rec.returned && st.duplicates == 0;

    if (!lat_batches.empty()) {
        double sum = 0;
        for (auto* b : lat_batches) sum += b->result_s - b->dispatch_s;
        rec.mean_latency_s = sum / (double)lat_batches.size();
    }
    if (!thr_batches.empty()) {
        double first_dispatch = thr_batches.front()->dispatch_s;
        double first_result = thr_batches.front()->result_s;
        double last_result = thr_batches.front()->result_s;
        for (auto* b : thr_batches) {
            first_dispatch = std::min(first_dispatch, b->dispatch_s);
            first_result = std::min(first_result, b->result_s);
            last_result = std::max(last_result, b->result_s);
        }
        double span = last_result - first_dispatch;
        double items = (double)thr_batches.size() * model.batch_size;
        rec.throughput_ips = span > 0 ? items / span : 0.0;
        if (thr_batches.size() >= 2 && last_result > first_result) {
            rec.steady_throughput_ips =
                (double)(thr_batches.size() - 1) * model.batch_size / (last_result - first_result);
        } else {
            rec.steady_throughput_ips = rec.throughput_ips;
        }
    }

    rec.stage_exec_means_s.assign(k_stages, 0.0);
    std::vector<std::uint64_t> counts(k_stages, 0);
    for (const auto& mb : rec.batches) {
        for (const auto& rep : mb.reports) {
            if (rep.stage < k_stages) {
                rec.stage_exec_means_s[rep.stage] += rep.exec_s;
                counts[rep.stage]++;
            }
        }
    }
    for (std::size_t k = 0; k < k_stages; k++)
        if (counts[k] > 0) rec.stage_exec_means_s[k] /= (double)counts[k];

    if (plan.dispatch_link) {
        auto [ser, wire] =
            nominal_shaping_cost(ShapingConfig::from(*plan.dispatch_link, 1), model.input_bytes);
        rec.net_serialization_s += ser;
        rec.net_wire_s += wire;
    }
    for (std::size_t k = 0; k < k_stages; k++) {
        auto [ser, wire] = nominal_shaping_cost(ShapingConfig::from(plan.links[k], 1),
                                                plan.stage_output_bytes(k));
        rec.net_serialization_s += ser;
        rec.net_wire_s += wire;
    }
    double exec_total = 0;
    for (double e : rec.stage_exec_means_s) exec_total += e;
    rec.net_total_s = rec.mean_latency_s > 0 ? rec.mean_latency_s - exec_total : 0.0;
    return rec;
}

}  // namespace splitpipe
