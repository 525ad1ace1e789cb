// biokm: serve | load | analyze | tree | filter | queue | report
//
// Exit codes: 0 success, 1 module error, 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "biokm/capture.hpp"
#include "biokm/error.hpp"
#include "biokm/loadgen.hpp"
#include "biokm/phylo.hpp"
#include "biokm/queueing.hpp"
#include "biokm/report.hpp"
#include "biokm/route_filter.hpp"
#include "biokm/server.hpp"

namespace {

using namespace biokm;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Writes to `path`, or stdout when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    write(out);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    return in;
}

std::pair<std::uint16_t, std::uint16_t> parse_port_range(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) throw UsageError("--data-ports expects A-B, got '" + text + "'");
    try {
        const int a = std::stoi(text.substr(0, dash));
        const int b = std::stoi(text.substr(dash + 1));
        if (a < 1 || b > 65535 || a > b) throw UsageError("bad data port range '" + text + "'");
        return {static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b)};
    } catch (const std::logic_error&) {
        throw UsageError("bad data port range '" + text + "'");
    }
}

// ---------------------------------------------------------------- serve

struct ServeOpts {
    std::string bind = "127.0.0.1";
    int port = 6667;
    std::string data_ports;
    std::string log;
    double duration_s = 0.0;
};

int run_serve(const ServeOpts& o) {
    server::ServerConfig cfg;
    cfg.bind_address = o.bind;
    cfg.control_port = static_cast<std::uint16_t>(o.port);
    if (!o.data_ports.empty()) std::tie(cfg.data_port_first, cfg.data_port_last) = parse_port_range(o.data_ports);
    cfg.log_path = o.log;
    auto srv = server::Server::start(cfg);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("listening on %s:%u\n", o.bind.c_str(), srv->control_port());
    std::fflush(stdout);
    const auto began = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (o.duration_s > 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - began).count() >= o.duration_s) {
            break;
        }
    }
    srv->stop();
    const auto snap = srv->snapshot();
    std::printf("stopped: %llu logins, %llu departures, %llu transfers (%llu aborted)\n",
                static_cast<unsigned long long>(snap.logins), static_cast<unsigned long long>(snap.departures),
                static_cast<unsigned long long>(snap.transfers_completed),
                static_cast<unsigned long long>(snap.transfers_aborted));
    return 0;
}

// ----------------------------------------------------------------- load

struct LoadOpts {
    std::string server;
    bool local = false;
    std::string config;
    std::string mode;
    std::size_t clients = 0, messages = 0, files = 0, size = 0, message_size = 0, file_size = 0, chunk = 0;
    double gap_ms = 0, think_ms = 0;
    std::uint64_t seed = 0;
    unsigned probes = 0;
    std::string label;
    std::string out;
    bool print_schedule = false;
};

loadgen::ScenarioSpec build_spec(const LoadOpts& o, const CLI::App& cmd) {
    auto given = [&](const char* name) { return cmd.count(name) > 0; };
    std::string config_text;
    if (!o.config.empty()) {
        auto in = open_input(o.config);
        config_text.assign(std::istreambuf_iterator<char>(in), {});
    }
    // mode first: it picks the default work counts the rest overlays
    loadgen::Mode mode = loadgen::Mode::Ircd;
    if (!config_text.empty()) {
        std::istringstream probe(config_text);
        mode = loadgen::parse_config(probe, loadgen::defaults_for(mode)).mode;
    }
    if (given("--mode")) {
        auto m = loadgen::parse_mode(o.mode);
        if (!m) throw UsageError("--mode must be ircd, ftp or mixed");
        mode = *m;
    }
    loadgen::ScenarioSpec spec = loadgen::defaults_for(mode);
    if (!config_text.empty()) {
        std::istringstream in(config_text);
        spec = loadgen::parse_config(in, spec);
        spec.mode = mode;
    }
    if (given("--clients")) spec.clients = o.clients;
    if (given("--messages")) spec.messages_per_client = o.messages;
    if (given("--files")) spec.files_per_client = o.files;
    if (given("--size")) {
        if (mode != loadgen::Mode::Ftp) spec.message_size = o.size;
        if (mode != loadgen::Mode::Ircd) spec.file_size = o.size;
    }
    if (given("--message-size")) spec.message_size = o.message_size;
    if (given("--file-size")) spec.file_size = o.file_size;
    if (given("--chunk-size")) spec.chunk_size = o.chunk;
    if (given("--gap-ms")) spec.inter_event_gap_ms = o.gap_ms;
    if (given("--think-ms")) spec.think_time_ms = o.think_ms;
    if (given("--seed")) spec.seed = o.seed;
    if (given("--probes")) spec.probes = o.probes;
    if (given("--label")) spec.label = o.label;
    loadgen::validate(spec);
    return spec;
}

int run_load(const LoadOpts& o, const CLI::App& cmd) {
    const auto spec = build_spec(o, cmd);
    if (o.print_schedule) {
        std::cout << loadgen::schedule_text(loadgen::generate_schedule(spec));
        return 0;
    }
    if (o.local == !o.server.empty()) throw UsageError("give exactly one of --server HOST:PORT or --local");
    if (o.out.empty()) throw UsageError("--out is required");

    std::unique_ptr<server::Server> local;
    std::string host;
    std::uint16_t port = 0;
    if (o.local) {
        local = server::Server::start({});
        host = "127.0.0.1";
        port = local->control_port();
    } else {
        std::tie(host, port) = net::parse_host_port(o.server);
    }
    const auto cap = loadgen::run_scenario(spec, host, port);
    capture::write_capture(cap, std::filesystem::path(o.out));
    const auto m = capture::run_metrics(cap);
    std::printf("%s: %zu sessions, P=%.0f OPL=%.0f B, T_T=%.3f ms, TS=%.3f ms -> %s\n", m.label.c_str(),
                cap.sessions.size(), m.packets, m.opl_bytes, m.total_time_ms, m.service_time_ms, o.out.c_str());
    return 0;
}

// -------------------------------------------------------------- analyze

int run_analyze(const std::vector<std::string>& captures, const std::string& mode, const std::string& out) {
    std::vector<report::RunColumn> cols;
    for (const auto& p : captures) cols.push_back(report::column_from_capture(capture::read_capture(std::filesystem::path(p))));
    const auto result = report::analyze_runs(std::move(cols), mode == "table" ? report::Mode::TablePrecision
                                                                               : report::Mode::Exact);
    emit(out, [&](std::ostream& os) { report::write_metrics_csv(result.runs, os); });
    return 0;
}

// ----------------------------------------------------------------- tree

int run_tree(const std::string& matrix, const std::string& from_capture, const std::string& out,
             const std::string& matrix_out, bool plain) {
    if (matrix.empty() == from_capture.empty()) throw UsageError("give exactly one of --matrix or --from-capture");
    phylo::DistanceMatrix d = [&] {
        if (!matrix.empty()) {
            auto in = open_input(matrix);
            return phylo::read_matrix_csv(in);
        }
        const auto cap = capture::read_capture(std::filesystem::path(from_capture));
        std::map<std::string, double> rtt;
        for (const auto& s : cap.sessions) {
            if (!s.rtt_ms) throw Error(ErrorCode::ParseError, "session " + s.nick + " has no rtt_ms in the capture");
            rtt[s.nick] = *s.rtt_ms;
        }
        return phylo::star_distances(rtt);
    }();
    if (!matrix_out.empty()) emit(matrix_out, [&](std::ostream& os) { phylo::write_matrix_csv(d, os); });
    const auto tree = phylo::nj_build(d);
    const std::string nwk = phylo::to_newick(tree, !plain);
    emit(out, [&](std::ostream& os) { os << nwk << '\n'; });
    return 0;
}

// --------------------------------------------------------------- filter

std::string joined(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s.empty() ? "-" : s;
}

int run_filter(const std::string& matrix, const std::string& from_capture, const std::vector<std::string>& fail,
               bool range_domain, bool show_transpose, const std::string& out) {
    if (matrix.empty() == from_capture.empty()) throw UsageError("give exactly one of --matrix or --from-capture");
    route::FilterMatrix r = [&] {
        if (!matrix.empty()) {
            auto in = open_input(matrix);
            return route::read_filter_csv(in);
        }
        const auto cap = capture::read_capture(std::filesystem::path(from_capture));
        std::vector<std::string> clients;
        for (const auto& s : cap.sessions) clients.push_back(s.nick);
        return route::star_filter(clients);
    }();
    // queries always run against the links x paths form
    const route::FilterMatrix links_by_paths =
        r.orientation() == route::Orientation::LinksByPaths ? r : route::transpose(r);
    emit(out, [&](std::ostream& os) {
        route::write_filter_csv(links_by_paths, os);
        if (show_transpose) {
            os << '\n';
            route::write_filter_csv(route::transpose(links_by_paths), os);
        }
        if (range_domain) {
            os << "\nrange," << joined(route::relation_range(links_by_paths)) << '\n';
            os << "domain," << joined(route::relation_domain(links_by_paths)) << '\n';
        }
        if (!fail.empty()) {
            const std::set<std::string> failed(fail.begin(), fail.end());
            os << "\nfailed," << joined(std::vector<std::string>(failed.begin(), failed.end())) << '\n';
            os << "surviving," << joined(route::surviving_paths(links_by_paths, failed)) << '\n';
        }
    });
    return 0;
}

// ---------------------------------------------------------------- queue

struct QueueOpts {
    double lambda = 0, mu = 0;
    bool table = false;
    double epsilon = queueing::kDefaultEpsilon;
    std::size_t jmax = queueing::kDefaultJMax;
    bool simulate = false;
    double horizon = 3600.0;
    std::uint64_t seed = 1;
    std::string out;
};

int run_queue(const QueueOpts& o) {
    const auto s = queueing::mm1_stats(o.lambda, o.mu);
    std::printf("lambda %.9f\nmu     %.9f\nrho    %.9f\nL      %.9f\nLq     %.9f\nLs     %.9f\n"
                "W      %.9f\nWq     %.9f\nWs     %.9f\nidle   %.9f\n",
                s.lambda, s.mu, s.rho, s.L, s.Lq, s.Ls, s.W, s.Wq, s.Ws, s.idle);
    if (o.simulate) {
        const auto sim = queueing::simulate_mm1(o.lambda, o.mu, o.horizon, o.seed);
        std::printf("simulated over %.1f s (seed %llu): L %.6f  W %.6f  busy %.6f  lambda_hat %.6f  arrivals %llu\n",
                    o.horizon, static_cast<unsigned long long>(o.seed), sim.L, sim.W, sim.rho, sim.lambda_hat,
                    static_cast<unsigned long long>(sim.arrivals));
    }
    if (o.table || !o.out.empty()) {
        const auto rows = queueing::steady_state_table(o.lambda, o.mu, o.epsilon, o.jmax);
        if (o.out.empty()) std::cout << '\n';
        emit(o.out, [&](std::ostream& os) { queueing::write_steady_state_csv(rows, os); });
    }
    return 0;
}

// --------------------------------------------------------------- report

int run_report(const std::vector<std::string>& captures, const std::string& mode, const std::string& md,
               const std::string& csv, const std::string& metrics) {
    std::vector<std::filesystem::path> paths(captures.begin(), captures.end());
    const auto result =
        report::full_pipeline(paths, mode == "table" ? report::Mode::TablePrecision : report::Mode::Exact);
    report::write_reports(result, md, csv);
    if (!metrics.empty()) emit(metrics, [&](std::ostream& os) { report::write_metrics_csv(result.runs, os); });
    if (md.empty()) std::cout << report::render_markdown(result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"biokm: messenger workload, telemetry and bio-computing / Little's Law analysis"};
    app.require_subcommand(1);

    ServeOpts serve;
    auto* serve_cmd = app.add_subcommand("serve", "run the relay server");
    serve_cmd->add_option("--bind", serve.bind, "bind address")->capture_default_str();
    serve_cmd->add_option("--port", serve.port, "control port (0 = ephemeral)")->check(CLI::Range(0, 65535))->capture_default_str();
    serve_cmd->add_option("--data-ports", serve.data_ports, "data channel port range A-B (default: ephemeral)");
    serve_cmd->add_option("--log", serve.log, "JSON Lines event log");
    serve_cmd->add_option("--duration", serve.duration_s, "stop after N seconds (default: until SIGINT)");

    LoadOpts load;
    auto* load_cmd = app.add_subcommand("load", "run a scripted workload and write a capture");
    load_cmd->add_option("--server", load.server, "HOST:PORT");
    load_cmd->add_flag("--local", load.local, "start an in-process server on an ephemeral port");
    load_cmd->add_option("--config", load.config, "key = value scenario file");
    load_cmd->add_option("--mode", load.mode, "ircd|ftp|mixed");
    load_cmd->add_option("--clients", load.clients);
    load_cmd->add_option("--messages", load.messages, "messages per client");
    load_cmd->add_option("--files", load.files, "files per client");
    load_cmd->add_option("--size", load.size, "message size (ircd), file size (ftp), both (mixed)");
    load_cmd->add_option("--message-size", load.message_size);
    load_cmd->add_option("--file-size", load.file_size);
    load_cmd->add_option("--chunk-size", load.chunk);
    load_cmd->add_option("--gap-ms", load.gap_ms, "base inter-event gap");
    load_cmd->add_option("--think-ms", load.think_ms, "idle time before login");
    load_cmd->add_option("--seed", load.seed);
    load_cmd->add_option("--probes", load.probes, "PING probes per client (0 = none)");
    load_cmd->add_option("--label", load.label);
    load_cmd->add_option("--out", load.out, "capture.jsonl");
    load_cmd->add_flag("--print-schedule", load.print_schedule, "print the generated schedule and exit");

    std::vector<std::string> analyze_in;
    std::string analyze_out, analyze_mode = "exact";
    auto* analyze_cmd = app.add_subcommand("analyze", "derive per-run metrics from captures");
    analyze_cmd->add_option("captures", analyze_in)->required();
    analyze_cmd->add_option("--out", analyze_out, "metrics.csv (default stdout)");
    analyze_cmd->add_option("--mode", analyze_mode)->check(CLI::IsMember({"exact", "table"}));

    std::string tree_matrix, tree_capture, tree_out, tree_matrix_out;
    bool tree_plain = false;
    auto* tree_cmd = app.add_subcommand("tree", "neighbor-joining tree as Newick");
    tree_cmd->add_option("--matrix", tree_matrix, "distance matrix CSV");
    tree_cmd->add_option("--from-capture", tree_capture, "build star distances from a capture's rtt_ms");
    tree_cmd->add_option("--out", tree_out, "tree.nwk (default stdout)");
    tree_cmd->add_option("--write-matrix", tree_matrix_out, "also write the distance matrix CSV");
    tree_cmd->add_flag("--no-lengths", tree_plain, "topology only");

    std::string filter_matrix, filter_capture, filter_out;
    std::vector<std::string> filter_fail;
    bool filter_rd = false, filter_t = false;
    auto* filter_cmd = app.add_subcommand("filter", "filter matrix R, transpose and robustness queries");
    filter_cmd->add_option("--matrix", filter_matrix, "R or R^T CSV");
    filter_cmd->add_option("--from-capture", filter_capture, "star filter over a capture's clients");
    filter_cmd->add_option("--fail", filter_fail, "failed link (repeatable)");
    filter_cmd->add_flag("--print-range-domain", filter_rd);
    filter_cmd->add_flag("--transpose", filter_t, "also print R^T");
    filter_cmd->add_option("--out", filter_out);

    QueueOpts queue;
    auto* queue_cmd = app.add_subcommand("queue", "M/M/1 Little's Law analytics");
    queue_cmd->add_option("--lambda", queue.lambda)->required();
    queue_cmd->add_option("--mu", queue.mu)->required();
    queue_cmd->add_flag("--table", queue.table, "steady-state probability table");
    queue_cmd->add_option("--epsilon", queue.epsilon)->capture_default_str();
    queue_cmd->add_option("--jmax", queue.jmax)->capture_default_str();
    queue_cmd->add_flag("--simulate", queue.simulate, "run the discrete-event simulator");
    queue_cmd->add_option("--horizon", queue.horizon, "simulated seconds")->capture_default_str();
    queue_cmd->add_option("--seed", queue.seed)->capture_default_str();
    queue_cmd->add_option("--out", queue.out, "steady.csv");

    std::vector<std::string> report_in;
    std::string report_mode = "exact", report_md, report_csv, report_t2;
    auto* report_cmd = app.add_subcommand("report", "full pipeline: captures to comparison report");
    report_cmd->add_option("--captures", report_in)->required();
    report_cmd->add_option("--mode", report_mode)->check(CLI::IsMember({"exact", "table"}))->capture_default_str();
    report_cmd->add_option("--out", report_md, "report.md (default stdout)");
    report_cmd->add_option("--csv", report_csv, "report.csv");
    report_cmd->add_option("--metrics", report_t2, "per-run metrics CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*serve_cmd) return run_serve(serve);
        if (*load_cmd) return run_load(load, *load_cmd);
        if (*analyze_cmd) return run_analyze(analyze_in, analyze_mode, analyze_out);
        if (*tree_cmd) return run_tree(tree_matrix, tree_capture, tree_out, tree_matrix_out, tree_plain);
        if (*filter_cmd) return run_filter(filter_matrix, filter_capture, filter_fail, filter_rd, filter_t, filter_out);
        if (*queue_cmd) return run_queue(queue);
        if (*report_cmd) return run_report(report_in, report_mode, report_md, report_csv, report_t2);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
