// veft: validate, analyze, simulate, and synthesize dependency-aware
// communication traces on packet-level fabric models.
//
// Exit codes: 0 success, 1 findings or simulation failure, 2 usage/parse
// errors.

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "veft/experiment.hpp"
#include "veft/fabric.hpp"
#include "veft/static_analysis.hpp"
#include "veft/synthetic.hpp"
#include "veft/trace.hpp"

namespace {

void print_finding(const veft::Finding& f) {
    if (f.record_id >= 0)
        std::cerr << "finding: record " << f.record_id << ": " << f.message << '\n';
    else
        std::cerr << "finding: " << f.message << '\n';
}

std::optional<veft::Trace> load_trace(const std::string& path) {
    try {
        return veft::parse_trace_file(path);
    } catch (const veft::TraceParseError& e) {
        std::cerr << path << ':' << e.line() << ':' << e.column() << ": " << e.reason() << '\n';
        return std::nullopt;
    } catch (const std::exception& e) {
        std::cerr << path << ": " << e.what() << '\n';
        return std::nullopt;
    }
}

int cmd_validate(const std::string& path) {
    const auto trace = load_trace(path);
    if (!trace) return 2;
    const veft::ValidationReport rep = veft::validate_structure(*trace);
    if (!rep.ok()) {
        for (const auto& f : rep.findings) print_finding(f);
        return 1;
    }
    const veft::IdealReplayResult ir = veft::ideal_replay(*trace);
    if (!ir.findings.empty()) {
        for (const auto& f : ir.findings) print_finding(f);
        return 1;
    }
    std::cout << "OK: " << trace->header.num_tasks << " tasks, " << trace->comms.size()
              << " comms, " << trace->records.size() << " records, " << ir.events.size()
              << " messages, ideal duration " << ir.duration_ns << " ns\n";
    return 0;
}

int cmd_analyze(const std::string& path, const std::string& out_dir, std::int64_t bin_ns) {
    const auto trace = load_trace(path);
    if (!trace) return 2;
    const veft::IdealReplayResult ir = veft::ideal_replay(*trace);
    bool hard = false;
    for (const auto& f : ir.findings) {
        print_finding(f);
        if (f.message.rfind("replay stalled", 0) != 0) hard = true;
    }
    if (hard) return 1;  // structurally broken: no analysis possible
    const veft::OpStats ops = veft::count_by_operation(*trace);
    const std::int64_t bin = bin_ns > 0 ? bin_ns : veft::default_bin_width(ir.duration_ns);
    const veft::TimeSeries ts = veft::time_series(ir, bin);
    const veft::TrafficMatrix matrix = veft::traffic_matrix(*trace);
    const auto files = veft::emit_report(ops, ts, matrix, out_dir);
    const veft::OpEntry totals = ops.totals();
    std::cout << "analyzed " << path << ": duration " << ir.duration_ns << " ns, "
              << totals.calls << " calls, " << totals.wire_messages << " wire messages, "
              << totals.wire_bytes << " wire bytes; wrote " << files.size() << " files to "
              << out_dir << '\n';
    return ir.findings.empty() ? 0 : 1;
}

struct SimulateArgs {
    std::vector<std::string> configs;  // preset names or config file paths
    std::vector<std::string> traces;
    std::string topology;
    std::string mapping;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string incast;
    std::string out = "out";
    std::vector<std::string> sets;  // raw key=value overrides
    int jobs = 1;
};

veft::ExperimentConfig build_config(const SimulateArgs& a, const std::string& config_spec) {
    veft::ExperimentConfig cfg;
    if (!config_spec.empty()) {
        if (const auto preset = veft::preset_by_name(config_spec)) {
            cfg.net = *preset;
        } else if (std::filesystem::exists(config_spec)) {
            cfg = veft::parse_experiment_config_file(config_spec);
        } else {
            throw std::invalid_argument("--config '" + config_spec +
                                        "' is neither a preset nor an existing file");
        }
    }
    for (const auto& t : a.traces) veft::apply_config_pair(cfg, "trace", t);
    if (!a.topology.empty()) veft::apply_config_pair(cfg, "topology", a.topology);
    if (!a.mapping.empty()) veft::apply_config_pair(cfg, "mapping", a.mapping);
    if (a.seed_set) veft::apply_config_pair(cfg, "seed", std::to_string(a.seed));
    if (!a.incast.empty()) veft::apply_config_pair(cfg, "incast", a.incast);
    for (const auto& kv : a.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        veft::apply_config_pair(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::string config_label(const std::string& spec) {
    if (veft::preset_by_name(spec)) {
        return spec == "1" || spec == "config1" || spec == "Config1" ? "config1" : "config2";
    }
    return std::filesystem::path(spec).stem().string();
}

int run_one(const veft::ExperimentConfig& cfg, const std::string& label) {
    try {
        const veft::ExperimentResult res = veft::run_experiment(cfg);
        std::cout << (label.empty() ? std::string() : label + ": ") << "execution_time_ns="
                  << res.run.execution_time_ns << " mean_fct_ns=" << res.fct.mean_ns
                  << " max_fct_ns=" << res.fct.max_ns << " messages=" << res.fct.count << '\n';
        return 0;
    } catch (const veft::SimError& e) {
        std::cerr << (label.empty() ? std::string() : label + ": ") << "simulation failed: "
                  << e.what() << '\n';
        return 1;
    }
}

int cmd_simulate(const SimulateArgs& a) {
    std::vector<std::string> specs = a.configs;
    if (specs.empty()) specs.push_back("");  // defaults (CIOQ/PFC preset)

    std::vector<veft::ExperimentConfig> cfgs;
    std::vector<std::string> labels;
    for (const auto& spec : specs) {
        veft::ExperimentConfig cfg = build_config(a, spec);
        std::string label;
        if (specs.size() > 1) {
            label = config_label(spec);
            for (const auto& prev : labels)
                if (prev == label)
                    throw std::invalid_argument("config label '" + label +
                                                "' is not unique; rename config files");
            cfg.out_dir = (std::filesystem::path(a.out) / label).string();
        } else {
            cfg.out_dir = a.out;
        }
        cfgs.push_back(std::move(cfg));
        labels.push_back(label);
    }

    if (cfgs.size() > 1 && a.jobs > 1) {
        // One forked child per run; bundles land in disjoint directories.
        std::vector<pid_t> kids;
        int failures = 0;
        std::size_t next = 0;
        auto reap = [&]() {
            int status = 0;
            const pid_t pid = waitpid(-1, &status, 0);
            if (pid > 0 && (!WIFEXITED(status) || WEXITSTATUS(status) != 0)) ++failures;
            kids.erase(std::remove(kids.begin(), kids.end(), pid), kids.end());
        };
        while (next < cfgs.size() || !kids.empty()) {
            if (next < cfgs.size() && static_cast<int>(kids.size()) < a.jobs) {
                const pid_t pid = fork();
                if (pid == 0) std::exit(run_one(cfgs[next], labels[next]));
                kids.push_back(pid);
                ++next;
            } else {
                reap();
            }
        }
        return failures == 0 ? 0 : 1;
    }

    int rc = 0;
    for (std::size_t i = 0; i < cfgs.size(); ++i) rc = std::max(rc, run_one(cfgs[i], labels[i]));
    return rc;
}

int cmd_synth_incast(int sources, std::int64_t bytes, int dst, std::int64_t at,
                     const std::string& out) {
    veft::IncastSpec spec;
    spec.num_sources = sources;
    spec.dst_task = dst;
    spec.message_bytes = static_cast<std::uint64_t>(bytes);
    spec.start_time_ns = at;
    const veft::Trace t = veft::synth_incast(spec);
    veft::write_trace_file(t, out);
    std::cout << "wrote " << out << ": " << t.header.num_tasks << " tasks, "
              << t.records.size() << " sends of " << spec.message_bytes << " B to task "
              << spec.dst_task << " at " << spec.start_time_ns << " ns\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trace-driven interconnect traffic and congestion toolkit"};
    app.require_subcommand(1);

    // validate
    std::string v_trace;
    CLI::App* validate = app.add_subcommand("validate", "check a trace file for findings");
    validate->add_option("trace", v_trace, "trace file")->required();

    // analyze
    std::string a_trace, a_out = "analysis";
    std::int64_t a_bin = 0;
    CLI::App* analyze = app.add_subcommand("analyze", "offline trace characterization");
    analyze->add_option("trace", a_trace, "trace file")->required();
    analyze->add_option("--out", a_out, "output directory (default: analysis)");
    analyze->add_option("--bin-ns", a_bin, "time-series bin width in ns (default: duration/100)");

    // simulate
    SimulateArgs s;
    CLI::App* simulate = app.add_subcommand("simulate", "packet-level fabric simulation");
    simulate->add_option("--trace", s.traces, "trace file (repeatable; one session each)");
    simulate->add_option("--config", s.configs,
                         "network config: preset 1/2/config1/config2 or key=value file "
                         "(repeatable; each runs separately)");
    simulate->add_option("--topology", s.topology, "fat-tree-256 or megafly-288");
    simulate->add_option("--mapping", s.mapping, "linear, random, or explicit");
    simulate->add_option("--seed", s.seed, "mapping seed")->each([&](const std::string&) {
        s.seed_set = true;
    });
    simulate->add_option("--incast", s.incast,
                         "overlay burst: sources=N,bytes=B,dst=NODE,at=NS[,seed=S]");
    simulate->add_option("--out", s.out, "output directory (default: out)");
    simulate->add_option("--set", s.sets, "extra key=value config override (repeatable)");
    simulate->add_option("--jobs", s.jobs, "parallel processes for multi-config runs")
        ->check(CLI::PositiveNumber);

    // synth incast
    int si_sources = 64, si_dst = 0;
    std::int64_t si_bytes = 10485760, si_at = 0;
    std::string si_out = "incast.vef";
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic traces");
    synth->require_subcommand(1);
    CLI::App* incast = synth->add_subcommand("incast", "N-to-1 burst trace");
    incast->add_option("--sources", si_sources, "number of sources (default 64)");
    incast->add_option("--bytes", si_bytes, "message size in bytes (default 10485760)");
    incast->add_option("--dst", si_dst, "destination task id (default 0)");
    incast->add_option("--at", si_at, "eligibility time in ns (default 0)");
    incast->add_option("--out", si_out, "output trace file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (*validate) return cmd_validate(v_trace);
        if (*analyze) return cmd_analyze(a_trace, a_out, a_bin);
        if (*simulate) return cmd_simulate(s);
        if (*incast) return cmd_synth_incast(si_sources, si_bytes, si_dst, si_at, si_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
