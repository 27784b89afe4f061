#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bindertrace/parcel.hpp"

namespace bindertrace::bench {

struct UnknownWorkload : std::runtime_error {
    explicit UnknownWorkload(const std::string& what)
        : std::runtime_error("unknown workload: " + what) {}
};

enum class Mode { Baseline, InterceptOnly, FullPipeline };

std::string mode_name(Mode m);

/// The seven workload sorts: device id, SIM serial, location request,
/// send SMS, installed apps, network info, SD-card file read.
struct Workload {
    int sort = 1;               // 1..7
    std::string name;           // stable CLI name
    std::string interface_name; // report row label ("syscall" for sort 7)
    std::string method;
    uint32_t event_count = 10000;  // capped at 10000 per run
    uint32_t uid = 10050;
};

const std::vector<Workload>& workload_catalog();
Workload workload_by_sort(int sort);
Workload workload_by_name(const std::string& name);

/// Registry the workloads marshal against; the shipped registry fixture is
/// the same set of entries in file form.
SignatureRegistry builtin_registry();

/// Writes a seed-stable trace file (same seed, byte-identical output).
void generate_workload(const Workload& w, uint64_t seed, std::ostream& out);

// ---------------------------------------------------------------------------
// Statistics

double sample_mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

/// Student's t upper quantile, e.g. t_quantile(0.975, runs - 1).
double t_quantile(double p, double df);

/// Half-width of the 95% confidence interval around the mean.
double margin_of_error_95(const std::vector<double>& xs);

struct WelchResult {
    double t = 0;
    double df = 0;
    double p_value = 1;
    bool significant = false;  // two-sided, alpha = 0.05
};

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Benchmark runs

struct BenchCell {
    Mode mode = Mode::Baseline;
    double mean_ms = 0;
    double moe_ms = 0;
    std::optional<double> overhead_pct;  // present iff significant vs baseline
    bool significant = false;
    std::vector<double> samples_ms;
};

struct BenchRow {
    Workload workload;
    std::vector<BenchCell> cells;  // in mode order requested
    bool lossless = true;          // full pipeline: decoded + failed == generated

    const BenchCell* cell(Mode m) const;
};

struct BenchReport {
    int runs = 0;
    uint64_t seed = 0;
    std::vector<BenchRow> rows;
};

/// Runs every workload in every requested mode, `runs` repetitions each,
/// interleaving modes round-robin to decorrelate clock drift. Timing covers
/// raw-event feed through subscriber delivery (FullPipeline), probe return
/// (InterceptOnly), or a no-op loop (Baseline); setup is excluded.
BenchReport run_bench(const std::vector<Workload>& workloads, int runs,
                      const std::vector<Mode>& modes, uint64_t seed);

/// Table-shaped text report; non-significant overhead cells stay empty.
std::string format_report(const BenchReport& report);

/// Machine-readable variant of the same data.
std::string format_report_csv(const BenchReport& report);

}  // namespace bindertrace::bench
