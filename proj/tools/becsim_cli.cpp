// Command-line front end: region vertex dumps, single Monte Carlo runs,
// parameter sweeps, and the canned figure-data bundles. Exit codes follow
// the CI contract: 0 on success/pass, 1 on any configuration or I/O error,
// 2 when a simulation ran fine but missed its corner.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "becsim/regions.hpp"
#include "becsim/sim.hpp"
#include "json.hpp"

namespace {

using becsim::ChannelParams;
using becsim::RateRegion;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kComparisonFail = 2;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string out_dir_default() {
    const char* env = std::getenv("BECSIM_OUT_DIR");
    return (env != nullptr && *env != '\0') ? env : ".";
}

std::string resolve_out(const std::string& flag, const std::string& fallback_name) {
    if (!flag.empty()) return flag;
    return (std::filesystem::path(out_dir_default()) / fallback_name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed while writing: " + path);
}

RateRegion region_for_scenario(const std::string& scenario, const ChannelParams& p) {
    if (scenario == "nn-nonblind") return becsim::region_nn_nonblind(p);
    if (scenario == "dd-outer") return becsim::region_dd_outer(p);
    if (scenario == "nn-blind-inner") return becsim::region_nn_blind_inner(p);
    throw std::invalid_argument("unknown scenario: " + scenario);
}

becsim::ProtocolId protocol_or_throw(const std::string& name) {
    const std::optional<becsim::ProtocolId> id = becsim::protocol_from_name(name);
    if (!id) throw std::invalid_argument("unknown protocol: " + name);
    return *id;
}

std::string labeled_csv(const std::vector<std::pair<std::string, RateRegion>>& curves) {
    std::string csv = "label,r1,r2\n";
    for (const auto& [label, region] : curves) {
        RateRegion relabeled = region;
        relabeled.label = label;
        csv += becsim::region_csv(relabeled);
    }
    return csv;
}

// Flags shared by simulate and sweep beyond the channel parameters.
struct RunFlags {
    size_t m = 20000;
    size_t trials = 20;
    uint64_t seed = 1;
    double slack = 3.0;
    double tol = 0.03;
    std::string out;
};

void add_param_flags(CLI::App* cmd, ChannelParams& p) {
    cmd->add_option("--delta1", p.delta1, "erasure probability at receiver one");
    cmd->add_option("--delta2", p.delta2, "erasure probability at receiver two");
    cmd->add_option("--eps1", p.eps1, "fraction of message two NOT cached at receiver one");
    cmd->add_option("--eps2", p.eps2, "fraction of message one NOT cached at receiver two");
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--m", f.m, "base message size; the pair is derived from the corner ratio");
    cmd->add_option("--trials", f.trials, "number of independent trials");
    cmd->add_option("--seed", f.seed, "master seed; trials derive sub-seeds from it");
    cmd->add_option("--slack", f.slack, "slot-cushion coefficient for blind phase sizing");
    cmd->add_option("--tol", f.tol, "relative tolerance for the corner comparison");
}

int cmd_region(const std::string& scenario, const ChannelParams& p, const std::string& out) {
    const RateRegion region = region_for_scenario(scenario, p);
    const std::string path = resolve_out(out, "region_" + scenario + ".csv");
    write_file(path, "label,r1,r2\n" + becsim::region_csv(region));
    for (const becsim::HalfPlane& hp : region.halfplanes)
        std::cout << fmt(hp.c1) << "*R1 + " << fmt(hp.c2) << "*R2 <= " << fmt(hp.bound) << "\n";
    std::cout << "wrote " << path << "\n";
    return kOk;
}

int cmd_simulate(const std::string& protocol, const ChannelParams& p, const RunFlags& f) {
    becsim::SimConfig cfg;
    cfg.protocol = protocol_or_throw(protocol);
    cfg.params = p;
    cfg.m = f.m;
    cfg.slack_coeff = f.slack;
    cfg.trials = f.trials;
    cfg.seed = f.seed;
    const becsim::SimStats stats = becsim::run_trials(cfg);
    const becsim::ComparisonReport rep =
        becsim::compare_to_corner(stats, stats.corner, f.tol);

    nlohmann::json doc;
    doc["config"] = {{"protocol", protocol}, {"delta1", p.delta1}, {"delta2", p.delta2},
                     {"eps1", p.eps1},       {"eps2", p.eps2},     {"m", f.m},
                     {"trials", f.trials},   {"seed", f.seed},     {"slack", f.slack},
                     {"tol", f.tol}};
    doc["stats"] = nlohmann::json::parse(becsim::to_json(stats));
    doc["comparison"] = nlohmann::json::parse(becsim::to_json(rep));
    const std::string path = resolve_out(f.out, "simulate_" + protocol + ".json");
    write_file(path, doc.dump(2) + "\n");

    std::cout << (rep.pass ? "pass" : "fail") << ": mean rate (" << fmt(stats.mean_rate.r1)
              << ", " << fmt(stats.mean_rate.r2) << ") vs corner (" << fmt(stats.corner.r1)
              << ", " << fmt(stats.corner.r2) << "), failures " << stats.failures << "/"
              << stats.trials << ", wrote " << path << "\n";
    return rep.pass ? kOk : kComparisonFail;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> vals;
    size_t start = 0;
    while (start <= text.size()) {
        const size_t end = std::min(text.find(',', start), text.size());
        const std::string token = text.substr(start, end - start);
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || token.empty())
            throw std::invalid_argument(flag + ": not a number: '" + token + "'");
        vals.push_back(v);
        start = end + 1;
    }
    return vals;
}

// Sweep grids zip the four comma-separated lists; length-1 lists broadcast.
std::vector<ChannelParams> zip_grid(const std::string& d1, const std::string& d2,
                                    const std::string& e1, const std::string& e2) {
    const std::vector<std::vector<double>> lists = {
        parse_list(d1, "--delta1"), parse_list(d2, "--delta2"), parse_list(e1, "--eps1"),
        parse_list(e2, "--eps2")};
    size_t rows = 1;
    for (const auto& l : lists) rows = std::max(rows, l.size());
    for (const auto& l : lists)
        if (l.size() != rows && l.size() != 1)
            throw std::invalid_argument(
                "sweep lists must share one length (or be single values); got " +
                std::to_string(l.size()) + " vs " + std::to_string(rows));
    std::vector<ChannelParams> grid;
    grid.reserve(rows);
    for (size_t i = 0; i < rows; ++i) {
        const auto at = [&](size_t k) { return lists[k].size() == 1 ? lists[k][0] : lists[k][i]; };
        grid.push_back(ChannelParams{at(0), at(1), at(2), at(3)});
    }
    return grid;
}

int cmd_sweep(const std::string& protocol, const std::string& d1, const std::string& d2,
              const std::string& e1, const std::string& e2, const RunFlags& f) {
    const becsim::ProtocolId id = protocol_or_throw(protocol);
    becsim::SweepOptions opt;
    opt.m = f.m;
    opt.trials = f.trials;
    opt.seed = f.seed;
    opt.slack_coeff = f.slack;
    opt.rel_tol = f.tol;
    const std::vector<becsim::SweepRow> rows =
        becsim::sweep(zip_grid(d1, d2, e1, e2), id, opt);
    const std::string path = resolve_out(f.out, "sweep_" + protocol + ".csv");
    write_file(path, becsim::sweep_csv(rows));
    size_t passed = 0, errors = 0;
    for (const becsim::SweepRow& row : rows) {
        passed += row.pass ? 1 : 0;
        errors += row.error.empty() ? 0 : 1;
    }
    std::cout << rows.size() << " rows, " << passed << " pass, " << errors
              << " rejected, wrote " << path << "\n";
    return kOk;
}

int cmd_figure(const std::string& id, const ChannelParams& p, const std::string& out) {
    std::vector<std::pair<std::string, RateRegion>> curves;
    if (id == "2") {
        // Two-sided feedback region at delta = 0.5 across the caching range.
        for (const auto& [eps, tag] :
             {std::pair{0.0, "eps0"}, {0.5, "eps0.5"}, {1.0, "eps1"}})
            curves.emplace_back(std::string("dd-outer-") + tag,
                                becsim::region_dd_outer({0.5, 0.5, eps, eps}));
    } else if (id == "3a") {
        // No-feedback capacity at (0.5, 0.75): full side information at one
        // receiver, at both, and the no-cache benchmark.
        curves.emplace_back("no-side-info", becsim::region_nn_nonblind({0.5, 0.75, 1.0, 1.0}));
        curves.emplace_back("rx1-full", becsim::region_nn_nonblind({0.5, 0.75, 0.0, 1.0}));
        curves.emplace_back("rx2-full", becsim::region_nn_nonblind({0.5, 0.75, 1.0, 0.0}));
        curves.emplace_back("full-both", becsim::region_nn_nonblind({0.5, 0.75, 0.0, 0.0}));
    } else if (id == "3b") {
        // Same channel, receiver two keeps half its cache while receiver
        // one's cache grows from nothing to everything.
        for (const auto& [eps1, tag] : {std::pair{1.0, "1"}, {0.75, "0.75"}, {0.5, "0.5"},
                                        {0.25, "0.25"}, {0.0, "0"}})
            curves.emplace_back(std::string("eps1-") + tag,
                                becsim::region_nn_nonblind({0.5, 0.75, eps1, 0.5}));
    } else if (id == "4a") {
        curves.emplace_back("nn-nonblind", becsim::region_nn_nonblind(
                                               {1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0 / 6.0}));
    } else if (id == "4b") {
        // Symmetric no-feedback regions at delta = 0.5.
        for (const auto& [eps, tag] :
             {std::pair{0.0, "eps0"}, {0.5, "eps0.5"}, {1.0, "eps1"}})
            curves.emplace_back(std::string("sym-") + tag,
                                becsim::region_nn_nonblind({0.5, 0.5, eps, eps}));
    } else if (id == "5") {
        // Blind inner bound against the no-feedback outer bound; parameters
        // come from the flags, defaulting to (0.25, 0.5, 0, 0.5).
        curves.emplace_back("outer", becsim::region_nn_nonblind(p));
        curves.emplace_back("inner", becsim::region_nn_blind_inner(p));
    } else {
        throw std::invalid_argument("unknown figure id: " + id);
    }
    const std::string dir = out.empty() ? out_dir_default() : out;
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / ("figure" + id + ".csv")).string();
    write_file(path, labeled_csv(curves));
    std::cout << "wrote " << path << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-user broadcast erasure channel simulator with receiver-side caches"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value file mirroring the flags, one [section] per subcommand; "
                   "explicit flags win");

    auto* region = app.add_subcommand("region", "emit a rate region's vertices as CSV");
    std::string scenario;
    ChannelParams region_params;
    std::string region_out;
    region->add_option("--scenario", scenario, "nn-nonblind, dd-outer, or nn-blind-inner")
        ->required()
        ->check(CLI::IsMember({"nn-nonblind", "dd-outer", "nn-blind-inner"}));
    add_param_flags(region, region_params);
    region->add_option("--out", region_out, "output CSV path");

    auto* simulate = app.add_subcommand(
        "simulate", "run Monte Carlo trials of one scheme and compare to its corner");
    std::string sim_protocol;
    ChannelParams sim_params;
    RunFlags sim_flags;
    simulate->add_option("--protocol", sim_protocol, "scheme id; see README for the list")
        ->required();
    add_param_flags(simulate, sim_params);
    add_run_flags(simulate, sim_flags);
    simulate->add_option("--out", sim_flags.out, "output JSON path");

    auto* sweep = app.add_subcommand(
        "sweep", "run one scheme across a parameter grid (comma-separated lists, zipped)");
    std::string sweep_protocol, sweep_d1 = "0", sweep_d2 = "0", sweep_e1 = "0", sweep_e2 = "0";
    RunFlags sweep_flags;
    sweep_flags.m = 4000;
    sweep->add_option("--protocol", sweep_protocol, "scheme id; see README for the list")
        ->required();
    sweep->add_option("--delta1", sweep_d1, "list of erasure probabilities at receiver one");
    sweep->add_option("--delta2", sweep_d2, "list of erasure probabilities at receiver two");
    sweep->add_option("--eps1", sweep_e1, "list of uncached fractions at receiver one");
    sweep->add_option("--eps2", sweep_e2, "list of uncached fractions at receiver two");
    add_run_flags(sweep, sweep_flags);
    sweep->add_option("--out", sweep_flags.out, "output CSV path");

    auto* figure = app.add_subcommand("figure", "emit the data bundle behind one figure");
    std::string figure_id;
    ChannelParams figure_params{0.25, 0.5, 0.0, 0.5};
    std::string figure_out;
    figure->add_option("--figure", figure_id, "figure id")
        ->required()
        ->check(CLI::IsMember({"2", "3a", "3b", "4a", "4b", "5"}));
    add_param_flags(figure, figure_params);  // consulted by figure 5 only
    figure->add_option("--out", figure_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (region->parsed()) return cmd_region(scenario, region_params, region_out);
        if (simulate->parsed()) return cmd_simulate(sim_protocol, sim_params, sim_flags);
        if (sweep->parsed())
            return cmd_sweep(sweep_protocol, sweep_d1, sweep_d2, sweep_e1, sweep_e2, sweep_flags);
        if (figure->parsed()) return cmd_figure(figure_id, figure_params, figure_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    std::cerr << "error: no command given\n";
    return kConfigError;
}
