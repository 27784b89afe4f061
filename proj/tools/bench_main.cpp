#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "bindertrace/bench.hpp"

using namespace bindertrace;

namespace {

std::vector<bench::Workload> resolve_workloads(const std::string& spec) {
    std::vector<bench::Workload> out;
    if (spec == "all") return bench::workload_catalog();
    std::istringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        if (tok.find_first_not_of("0123456789") == std::string::npos)
            out.push_back(bench::workload_by_sort(std::stoi(tok)));
        else
            out.push_back(bench::workload_by_name(tok));
    }
    if (out.empty()) throw bench::UnknownWorkload(spec);
    return out;
}

std::vector<bench::Mode> resolve_modes(const std::string& spec) {
    std::vector<bench::Mode> out;
    std::istringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "baseline") out.push_back(bench::Mode::Baseline);
        else if (tok == "intercept") out.push_back(bench::Mode::InterceptOnly);
        else if (tok == "full") out.push_back(bench::Mode::FullPipeline);
        else throw CLI::ValidationError("--modes", "unknown mode: " + tok);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-pipeline overhead benchmark"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run workloads in the selected modes and report");
    std::string workloads = "all";
    std::string modes = "baseline,intercept,full";
    int runs = 30;
    uint64_t seed = 1;
    uint32_t count = 10000;
    std::string out_path;
    run->add_option("--workloads", workloads, "comma list of names/sorts, or 'all'");
    run->add_option("--runs", runs, "repetitions per (workload, mode)")->check(CLI::Range(2, 100000));
    run->add_option("--modes", modes, "comma list of baseline,intercept,full");
    run->add_option("--seed", seed, "workload generation seed");
    run->add_option("--count", count, "events per run (max 10000)");
    run->add_option("--out", out_path, "write the text report here (CSV beside it as .csv)");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a workload trace file");
    int sort = 4;
    uint32_t gen_count = 10000;
    uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--sort", sort, "workload sort 1..7")->required();
    gen->add_option("--count", gen_count, "number of events (max 10000)");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_out, "output trace file (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            bench::Workload w = bench::workload_by_sort(sort);
            w.event_count = gen_count;
            if (!gen_out.empty()) {
                std::ofstream f(gen_out);
                if (!f) throw std::runtime_error("cannot open " + gen_out);
                bench::generate_workload(w, gen_seed, f);
            } else {
                bench::generate_workload(w, gen_seed, std::cout);
            }
            return 0;
        }

        auto ws = resolve_workloads(workloads);
        for (auto& w : ws) w.event_count = count;
        auto ms = resolve_modes(modes);
        bench::BenchReport report = bench::run_bench(ws, runs, ms, seed);
        std::string text = bench::format_report(report);
        std::string csv = bench::format_report_csv(report);
        if (!out_path.empty()) {
            std::ofstream f(out_path);
            if (!f) throw std::runtime_error("cannot open " + out_path);
            f << text;
            std::ofstream fc(out_path + ".csv");
            fc << csv;
        }
        std::cout << text;
        for (const auto& row : report.rows) {
            if (!row.lossless) {
                std::cerr << "event loss detected in workload " << row.workload.name << "\n";
                return 1;
            }
        }
        return 0;
    } catch (const bench::UnknownWorkload& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}
