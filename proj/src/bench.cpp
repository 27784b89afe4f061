#include "bindertrace/bench.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <variant>

#include "bindertrace/bridge.hpp"
#include "bindertrace/interceptor.hpp"
#include "bindertrace/service.hpp"

namespace bindertrace::bench {

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Baseline: return "baseline";
        case Mode::InterceptOnly: return "intercept";
        case Mode::FullPipeline: return "full";
    }
    return "?";
}

const std::vector<Workload>& workload_catalog() {
    static const std::vector<Workload> catalog = {
        {1, "device_id", "com.android.internal.telephony.IPhoneSubInfo", "getDeviceId", 10000, 10050},
        {2, "sim_serial", "com.android.internal.telephony.IPhoneSubInfo", "getSimSerialNumber", 10000, 10050},
        {3, "location", "android.location.ILocationManager", "getLastKnownLocation", 10000, 10050},
        {4, "send_sms", "com.android.internal.telephony.ISms", "sendText", 10000, 10050},
        {5, "installed_apps", "android.content.pm.IPackageManager", "getInstalledApplications", 10000, 10050},
        {6, "network_info", "android.net.IConnectivityManager", "getAllNetworkInfo", 10000, 10050},
        {7, "sdcard_read", "syscall", "open", 10000, 10050},
    };
    return catalog;
}

Workload workload_by_sort(int sort) {
    for (const auto& w : workload_catalog())
        if (w.sort == sort) return w;
    throw UnknownWorkload("sort " + std::to_string(sort));
}

Workload workload_by_name(const std::string& name) {
    for (const auto& w : workload_catalog())
        if (w.name == name) return w;
    throw UnknownWorkload(name);
}

SignatureRegistry builtin_registry() {
    SignatureRegistry reg;
    using K = TypeDescriptor::Kind;
    auto td = [](K k) { return TypeDescriptor{k, {}}; };
    reg.register_composite("LocationRequest",
                           {td(K::Int32), td(K::Int64), td(K::Int64), td(K::Float32), td(K::Bool)});
    reg.register_signature({"com.android.internal.telephony.IPhoneSubInfo", 1, "getDeviceId", {}});
    reg.register_signature(
        {"com.android.internal.telephony.IPhoneSubInfo", 2, "getSimSerialNumber", {}});
    reg.register_signature({"android.location.ILocationManager", 3, "getLastKnownLocation",
                            {TypeDescriptor::composite("LocationRequest"), td(K::Str)}});
    reg.register_signature({"com.android.internal.telephony.ISms", 5, "sendText",
                            {td(K::Str), td(K::Str), td(K::Str), td(K::Str)}});
    reg.register_signature({"android.content.pm.IPackageManager", 7, "getInstalledApplications",
                            {td(K::Int32)}});
    reg.register_signature({"android.net.IConnectivityManager", 8, "getAllNetworkInfo", {}});
    return reg;
}

// ---------------------------------------------------------------------------
// Workload items

namespace {

struct OpenItem {
    uint32_t uid;
    std::string path;
};
struct BinderItem {
    uint32_t uid;
    std::string interface_name;
    uint32_t code;
    std::vector<uint8_t> payload;
};
using RawItem = std::variant<OpenItem, BinderItem>;

std::string hex_encode(const std::vector<uint8_t>& b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (uint8_t x : b) {
        out.push_back(digits[x >> 4]);
        out.push_back(digits[x & 0xF]);
    }
    return out;
}

std::vector<RawItem> make_items(const Workload& w, uint64_t seed,
                                const SignatureRegistry& reg) {
    if (w.event_count > 10000) throw UnknownWorkload("event_count above the 10000-per-run cap");
    std::mt19937_64 rng(seed * 1315423911u + static_cast<uint64_t>(w.sort));
    std::vector<RawItem> items;
    items.reserve(w.event_count);

    auto rand_digits = [&](size_t n) {
        std::string s;
        for (size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng() % 10));
        return s;
    };

    for (uint32_t i = 0; i < w.event_count; ++i) {
        if (w.sort == 7) {
            items.push_back(OpenItem{w.uid, "/mnt/sdcard/bench/file" + std::to_string(i) + ".dat"});
            continue;
        }
        const MethodSignature* sig = nullptr;
        std::vector<ArgValue> args;
        switch (w.sort) {
            case 1:
                sig = reg.find(w.interface_name, 1);
                break;
            case 2:
                sig = reg.find(w.interface_name, 2);
                break;
            case 3:
                sig = reg.find(w.interface_name, 3);
                args = {ArgValue::composite(
                            "LocationRequest",
                            {ArgValue::i32(static_cast<int32_t>(rng() % 4)),
                             ArgValue::i64(static_cast<int64_t>(rng() % 60000)),
                             ArgValue::i64(static_cast<int64_t>(rng() % 10000)),
                             ArgValue::f32(static_cast<float>(rng() % 1000) / 10.0f),
                             ArgValue::boolean(rng() % 2 == 0)}),
                        ArgValue::str("gps")};
                break;
            case 4:
                sig = reg.find(w.interface_name, 5);
                args = {ArgValue::str(rand_digits(10)), ArgValue::str(""),
                        ArgValue::str("msg " + std::to_string(i)), ArgValue::str("")};
                break;
            case 5:
                sig = reg.find(w.interface_name, 7);
                args = {ArgValue::i32(0)};
                break;
            case 6:
                sig = reg.find(w.interface_name, 8);
                break;
            default:
                throw UnknownWorkload("sort " + std::to_string(w.sort));
        }
        ParcelBuffer buf = marshal(*sig, args, reg);
        items.push_back(BinderItem{w.uid, sig->interface_name, sig->code, buf.data()});
    }
    return items;
}

}  // namespace

void generate_workload(const Workload& w, uint64_t seed, std::ostream& out) {
    SignatureRegistry reg = builtin_registry();
    for (const RawItem& item : make_items(w, seed, reg)) {
        if (const auto* o = std::get_if<OpenItem>(&item)) {
            out << "open " << o->uid << " " << o->path << "\n";
        } else {
            const auto& b = std::get<BinderItem>(item);
            out << "binder " << b.uid << " " << b.interface_name << " " << b.code << " "
                << hex_encode(b.payload) << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// Statistics

double sample_mean(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
    double m = sample_mean(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double t_quantile(double p, double df) {
    boost::math::students_t dist(df);
    return boost::math::quantile(dist, p);
}

double margin_of_error_95(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0;
    double n = static_cast<double>(xs.size());
    return t_quantile(0.975, n - 1) * sample_stddev(xs) / std::sqrt(n);
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    WelchResult r;
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double va = sample_stddev(a), vb = sample_stddev(b);
    va *= va;
    vb *= vb;
    double se2 = va / na + vb / nb;
    if (se2 <= 0) {
        // Zero variance on both sides: significant iff the means differ.
        bool differ = sample_mean(a) != sample_mean(b);
        r.t = differ ? INFINITY : 0;
        r.df = na + nb - 2;
        r.p_value = differ ? 0 : 1;
        r.significant = differ;
        return r;
    }
    r.t = (sample_mean(a) - sample_mean(b)) / std::sqrt(se2);
    r.df = se2 * se2 /
           (va * va / (na * na * (na - 1)) + vb * vb / (nb * nb * (nb - 1)));
    boost::math::students_t dist(r.df);
    r.p_value = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    r.significant = r.p_value < 0.05;
    return r;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

double run_baseline(const std::vector<RawItem>& items) {
    auto t0 = std::chrono::steady_clock::now();
    volatile size_t sink = 0;
    for (const RawItem& item : items) sink = sink + item.index();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void feed(Interceptor& ic, const RawItem& item) {
    if (const auto* o = std::get_if<OpenItem>(&item)) {
        ic.on_sys_open(AppId{o->uid}, o->path);
    } else {
        const auto& b = std::get<BinderItem>(item);
        BinderTransactionRecord rec;
        rec.sender_euid = AppId{b.uid};
        rec.code = b.code;
        rec.buffer = b.payload;
        ic.on_binder_write(BinderSignal::BC_TRANSACTION, rec);
    }
}

double run_intercept_only(const std::vector<RawItem>& items, uint32_t uid) {
    Interceptor ic;
    ic.set_monitored(AppId{uid}, true);
    std::atomic<uint64_t> seen{0};
    auto handler = [&](const RawEvent&) { seen.fetch_add(1, std::memory_order_relaxed); };
    ic.attach_probe(ProbePoint::SysOpen, handler);
    ic.attach_probe(ProbePoint::SysConnect, handler);
    ic.attach_probe(ProbePoint::BinderThreadWrite, handler);

    auto t0 = std::chrono::steady_clock::now();
    for (const RawItem& item : items) feed(ic, item);
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

double run_full(const std::vector<RawItem>& items, uint32_t uid, const SignatureRegistry& reg,
                bool& lossless) {
    Interceptor ic;
    ic.set_monitored(AppId{uid}, true);
    Bridge bridge(ic);
    TracerService service(bridge, reg);
    std::atomic<uint64_t> delivered{0};
    service.subscribe({"bench", std::nullopt,
                       [&](const ServiceEvent&) { delivered.fetch_add(1, std::memory_order_relaxed); }});
    service.start();

    auto handler = [&](const RawEvent& e) {
        // Harness-level backpressure: retry rather than drop so verdict
        // accounting stays exact.
        for (;;) {
            try {
                bridge.send_event(e);
                return;
            } catch (const QueueFull&) {
                std::this_thread::yield();
            }
        }
    };
    ic.attach_probe(ProbePoint::SysOpen, handler);
    ic.attach_probe(ProbePoint::SysConnect, handler);
    ic.attach_probe(ProbePoint::BinderThreadWrite, handler);

    auto t0 = std::chrono::steady_clock::now();
    for (const RawItem& item : items) feed(ic, item);
    bridge.drain();
    auto t1 = std::chrono::steady_clock::now();

    ServiceStats st = service.stats();
    if (st.decode_ok + st.decode_failed != items.size() || delivered.load() != items.size())
        lossless = false;
    bridge.close();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

const BenchCell* BenchRow::cell(Mode m) const {
    for (const auto& c : cells)
        if (c.mode == m) return &c;
    return nullptr;
}

BenchReport run_bench(const std::vector<Workload>& workloads, int runs,
                      const std::vector<Mode>& modes, uint64_t seed) {
    if (runs < 2) throw std::invalid_argument("runs must be >= 2 for confidence intervals");
    SignatureRegistry reg = builtin_registry();

    struct Prepared {
        Workload w;
        std::vector<RawItem> items;
        bool lossless = true;
        std::map<Mode, std::vector<double>> samples;
    };
    std::vector<Prepared> prepared;
    for (const auto& w : workloads) prepared.push_back({w, make_items(w, seed, reg), true, {}});

    // Round-robin over runs x modes x workloads so slow drift hits all modes
    // roughly equally.
    for (int r = 0; r < runs; ++r) {
        for (Mode m : modes) {
            for (auto& p : prepared) {
                double ms = 0;
                switch (m) {
                    case Mode::Baseline: ms = run_baseline(p.items); break;
                    case Mode::InterceptOnly: ms = run_intercept_only(p.items, p.w.uid); break;
                    case Mode::FullPipeline: ms = run_full(p.items, p.w.uid, reg, p.lossless); break;
                }
                p.samples[m].push_back(ms);
            }
        }
    }

    BenchReport report;
    report.runs = runs;
    report.seed = seed;
    for (auto& p : prepared) {
        BenchRow row;
        row.workload = p.w;
        row.lossless = p.lossless;
        const std::vector<double>* base =
            p.samples.count(Mode::Baseline) ? &p.samples[Mode::Baseline] : nullptr;
        for (Mode m : modes) {
            BenchCell cell;
            cell.mode = m;
            cell.samples_ms = p.samples[m];
            cell.mean_ms = sample_mean(cell.samples_ms);
            cell.moe_ms = margin_of_error_95(cell.samples_ms);
            if (m != Mode::Baseline && base) {
                WelchResult wr = welch_t_test(cell.samples_ms, *base);
                cell.significant = wr.significant;
                if (wr.significant) {
                    double bm = sample_mean(*base);
                    cell.overhead_pct = (cell.mean_ms - bm) / bm * 100.0;
                }
            }
            row.cells.push_back(std::move(cell));
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Formatting

namespace {

std::string fmt_cell(const BenchCell* c) {
    if (!c) return "";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << c->mean_ms << " +/- " << c->moe_ms;
    return os.str();
}

std::string fmt_overhead(const BenchCell* c) {
    if (!c || !c->overhead_pct) return "";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << *c->overhead_pct;
    return os.str();
}

}  // namespace

std::string format_report(const BenchReport& report) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Interface", "Method", "Baseline (ms)", "InterceptOnly (ms)",
                    "FullPipeline (ms)", "Intercept ovh %", "Full ovh %"});
    for (const auto& row : report.rows) {
        grid.push_back({row.workload.interface_name, row.workload.method,
                        fmt_cell(row.cell(Mode::Baseline)), fmt_cell(row.cell(Mode::InterceptOnly)),
                        fmt_cell(row.cell(Mode::FullPipeline)),
                        fmt_overhead(row.cell(Mode::InterceptOnly)),
                        fmt_overhead(row.cell(Mode::FullPipeline))});
    }
    std::vector<size_t> widths(grid[0].size(), 0);
    for (const auto& r : grid)
        for (size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
    std::ostringstream os;
    os << "Execution of pipeline runs per workload, " << report.runs
       << " runs each (margin of error at the 95% confidence interval; overhead "
          "blank where not significant at alpha=0.05)\n";
    for (size_t ri = 0; ri < grid.size(); ++ri) {
        for (size_t i = 0; i < grid[ri].size(); ++i) {
            os << std::left << std::setw(static_cast<int>(widths[i]) + 2) << grid[ri][i];
        }
        os << "\n";
        if (ri == 0) {
            size_t total = 0;
            for (size_t wd : widths) total += wd + 2;
            os << std::string(total, '-') << "\n";
        }
    }
    return os.str();
}

std::string format_report_csv(const BenchReport& report) {
    std::ostringstream os;
    os << "interface,method,mode,mean_ms,moe_ms,overhead_pct,significant\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& row : report.rows) {
        for (const auto& c : row.cells) {
            os << row.workload.interface_name << "," << row.workload.method << ","
               << mode_name(c.mode) << "," << c.mean_ms << "," << c.moe_ms << ",";
            if (c.overhead_pct) os << std::setprecision(2) << *c.overhead_pct << std::setprecision(4);
            os << "," << (c.significant ? "1" : "0") << "\n";
        }
    }
    return os.str();
}

}  // namespace bindertrace::bench
