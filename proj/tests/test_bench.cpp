#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bindertrace/bench.hpp"
#include "bindertrace/interceptor.hpp"

using namespace bindertrace;
using namespace bindertrace::bench;

TEST_CASE("t quantiles match external reference values") {
    // scipy.stats.t.ppf(0.975, df); implementations agree to ~1e-9 relative
    CHECK(t_quantile(0.975, 29) == doctest::Approx(2.045229642132703).epsilon(1e-8));
    CHECK(t_quantile(0.975, 9) == doctest::Approx(2.2621571628540993).epsilon(1e-8));
}

TEST_CASE("mean, stddev and margin of error") {
    std::vector<double> xs{10.1, 10.3, 9.9, 10.2, 10.0};
    CHECK(sample_mean(xs) == doctest::Approx(10.1).epsilon(1e-12));
    CHECK(sample_stddev(xs) == doctest::Approx(0.15811388300841897).epsilon(1e-9));
    // t(0.975, 4) * sd / sqrt(5)
    double expect = t_quantile(0.975, 4) * 0.15811388300841897 / std::sqrt(5.0);
    CHECK(margin_of_error_95(xs) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("welch t-test matches external reference values") {
    std::vector<double> a{10.1, 10.3, 9.9, 10.2, 10.0};
    std::vector<double> b{11.0, 11.2, 10.8, 11.1, 10.9};
    // scipy.stats.ttest_ind(a, b, equal_var=False)
    WelchResult r = welch_t_test(a, b);
    CHECK(r.t == doctest::Approx(-9.0).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(1.85311842964298e-05).epsilon(1e-9));
    CHECK(r.significant);

    std::vector<double> c{10.0, 10.2, 10.1, 9.9, 10.05};
    r = welch_t_test(a, c);
    CHECK(r.t == doctest::Approx(0.5773502691896142).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(0.5812998844697399).epsilon(1e-9));
    CHECK(!r.significant);
}

TEST_CASE("workload catalog covers the seven sorts") {
    const auto& cat = workload_catalog();
    REQUIRE(cat.size() == 7);
    for (int s = 1; s <= 7; ++s) CHECK(cat[s - 1].sort == s);
    CHECK(workload_by_sort(4).method == "sendText");
    CHECK(workload_by_name("sdcard_read").interface_name == "syscall");
    CHECK_THROWS_AS(workload_by_sort(8), UnknownWorkload);
    CHECK_THROWS_AS(workload_by_name("nope"), UnknownWorkload);
}

TEST_CASE("workload generation is seed-stable") {
    Workload w = workload_by_sort(4);
    w.event_count = 100;
    std::ostringstream a, b, c;
    generate_workload(w, 7, a);
    generate_workload(w, 7, b);
    generate_workload(w, 8, c);
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
    CHECK(!a.str().empty());
}

TEST_CASE("generated traces have the right shape per sort") {
    SignatureRegistry reg = builtin_registry();

    auto lines_of = [](int sort, uint32_t n) {
        Workload w = workload_by_sort(sort);
        w.event_count = n;
        std::ostringstream os;
        generate_workload(w, 3, os);
        std::istringstream is(os.str());
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(is, line))
            if (!line.empty() && line[0] != '#') lines.push_back(line);
        return lines;
    };

    // sort 7 emits sdcard open lines
    for (const auto& l : lines_of(7, 20)) {
        CHECK(l.rfind("open ", 0) == 0);
        CHECK(l.find("sdcard") != std::string::npos);
    }

    // binder sorts replay into decodable records
    for (int sort : {1, 3, 4}) {
        Interceptor ic;
        ic.set_monitored(AppId{workload_by_sort(sort).uid}, true);
        ic.attach_probe(ProbePoint::BinderThreadWrite, [](const RawEvent&) {});
        std::ostringstream os;
        Workload w = workload_by_sort(sort);
        w.event_count = 10;
        generate_workload(w, 3, os);
        std::istringstream is(os.str());
        auto events = ic.replay(is);
        REQUIRE(events.size() == 10);
        for (const auto& e : events) {
            const auto& rec = std::get<BinderTransactionRecord>(e);
            DecodedCall call = unmarshal(rec, reg);
            CHECK(call.method_name == w.method);
            if (sort == 1) CHECK(call.args.empty());
            if (sort == 3) {
                REQUIRE(call.args.size() == 2);
                const auto* comp = std::get_if<CompositeValue>(&call.args[0].v);
                REQUIRE(comp);
                CHECK(comp->type_name == "LocationRequest");
            }
            if (sort == 4) CHECK(call.args.size() == 4);
        }
    }
}

TEST_CASE("a small bench run produces a complete, lossless report") {
    std::vector<Workload> ws{workload_by_sort(1), workload_by_sort(7)};
    for (auto& w : ws) w.event_count = 50;
    auto modes = {Mode::Baseline, Mode::InterceptOnly, Mode::FullPipeline};
    BenchReport rep = run_bench(ws, 4, modes, 11);

    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.runs == 4);
    for (const auto& row : rep.rows) {
        REQUIRE(row.cells.size() == 3);
        CHECK(row.lossless);
        for (const auto& cell : row.cells) {
            CHECK(cell.samples_ms.size() == 4);
            CHECK(cell.mean_ms >= 0);
            CHECK(cell.moe_ms >= 0);
        }
        // baseline never reports an overhead against itself
        CHECK(!row.cell(Mode::Baseline)->overhead_pct.has_value());
    }

    std::string table = format_report(rep);
    CHECK(table.find("getDeviceId") != std::string::npos);
    CHECK(table.find("syscall") != std::string::npos);
    std::string csv = format_report_csv(rep);
    CHECK(csv.find("interface,method,mode,") == 0);
    // one csv line per workload/mode pair plus header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3);
}

TEST_CASE("overhead cells exist only when the difference is significant") {
    // identical deterministic samples: zero variance guard, not significant
    std::vector<double> a{5, 5, 5, 5};
    WelchResult r = welch_t_test(a, a);
    CHECK(!r.significant);
    std::vector<double> b{9, 9, 9, 9};
    r = welch_t_test(a, b);
    CHECK(r.significant);
}
