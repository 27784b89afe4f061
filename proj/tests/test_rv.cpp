#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "bindertrace/bench.hpp"
#include "bindertrace/rv.hpp"
#include "rv_oracle.hpp"

using namespace bindertrace;
using rv::GroundAtom;
using rv::GroundEvent;

namespace {

const std::set<std::string> kContactBg{"contact"};

rv::Policy sms_policy() {
    return rv::parse_policy("send_sms(app, num) IMPLIES contact(num)", kContactBg, "sms");
}

GroundEvent ev(std::initializer_list<GroundAtom> atoms) { return GroundEvent(atoms); }

}  // namespace

TEST_CASE("parser shapes the contact policy") {
    rv::Policy p = sms_policy();
    CHECK(p.free_vars == std::vector<std::string>{"app", "num"});
    REQUIRE(p.formula);
    CHECK(p.formula->kind == rv::Formula::Kind::Implies);
    CHECK(p.formula->lhs->kind == rv::Formula::Kind::EventAtom);
    CHECK(p.formula->lhs->pred == "send_sms");
    CHECK(p.formula->rhs->kind == rv::Formula::Kind::BackgroundAtom);
    CHECK(p.formula->rhs->pred == "contact");
    // postorder ends at the root
    CHECK(p.postorder.back() == p.formula.get());
}

TEST_CASE("parser precedence and constants") {
    rv::Policy p = rv::parse_policy("a(x) OR b(x) AND NOT c(x) IMPLIES d(x) SINCE e(x, \"lit\")",
                                    {}, "prec");
    // IMPLIES binds loosest, SINCE tighter than IMPLIES, AND tighter than OR
    CHECK(p.formula->kind == rv::Formula::Kind::Implies);
    CHECK(p.formula->lhs->kind == rv::Formula::Kind::Or);
    CHECK(p.formula->lhs->rhs->kind == rv::Formula::Kind::And);
    CHECK(p.formula->rhs->kind == rv::Formula::Kind::Since);
    const auto& e_terms = p.formula->rhs->rhs->terms;
    REQUIRE(e_terms.size() == 2);
    CHECK(e_terms[0].is_var);
    CHECK(!e_terms[1].is_var);
    CHECK(e_terms[1].text == "lit");
}

TEST_CASE("parser rejects malformed and ungrounded formulas") {
    CHECK_THROWS_AS(rv::parse_policy("IMPLIES contact(num)", kContactBg), rv::SyntaxError);
    CHECK_THROWS_AS(rv::parse_policy("p(x", {}), rv::SyntaxError);
    CHECK_THROWS_AS(rv::parse_policy("p(x) AND", {}), rv::SyntaxError);
    // y only appears under a background predicate: no event atom can bind it
    try {
        rv::parse_policy("ONCE p(x) IMPLIES q(y)", {"q"});
        FAIL("expected UngroundedVariable");
    } catch (const rv::UngroundedVariable& e) {
        CHECK(e.name == "y");
    }
}

TEST_CASE("policy file fixture parses") {
    std::ifstream in(std::string(FIXTURE_DIR) + "/policies.pol");
    REQUIRE(in.good());
    auto policies = rv::parse_policy_file(in, kContactBg);
    REQUIRE(policies.size() == 1);
    CHECK(policies[0].name == "sms_to_known_contacts");
    CHECK(policies[0].free_vars == std::vector<std::string>{"app", "num"});
}

TEST_CASE("background facts fixture") {
    auto bg = rv::BackgroundFacts::load_file(std::string(FIXTURE_DIR) + "/contacts.cfg");
    CHECK(bg.contains("contact", {"123"}));
    CHECK(bg.contains("contact", {"0412345678"}));
    CHECK(!bg.contains("contact", {"555"}));
    CHECK(bg.predicates() == std::set<std::string>{"contact"});
}

TEST_CASE("messaging a known contact is compliant, an unknown one is flagged") {
    rv::BackgroundFacts bg;
    bg.add("contact", {"123"});

    rv::Monitor ok(AppId{10050}, sms_policy(), &bg);
    CHECK(ok.step_ground(ev({{"send_sms", {"10050", "123"}}})).empty());

    rv::Monitor bad(AppId{10050}, sms_policy(), &bg);
    auto v = bad.step_ground(ev({{"send_sms", {"10050", "555"}}}));
    REQUIRE(v.size() == 1);
    CHECK(v[0].event_index == 0);
    CHECK(v[0].binding.at("app") == "10050");
    CHECK(v[0].binding.at("num") == "555");
}

TEST_CASE("events that bind no variable are vacuously compliant") {
    rv::BackgroundFacts bg;
    rv::Monitor m(AppId{10050}, sms_policy(), &bg);
    CHECK(m.step_ground(ev({{"sdcard_read", {"10050", "/mnt/sdcard/a"}}})).empty());
    CHECK(m.step_ground({}).empty());
    CHECK(m.binding_count() == 0);
    CHECK(m.steps() == 2);
}

TEST_CASE("background constants never grow variable domains") {
    rv::BackgroundFacts bg;
    bg.add("contact", {"123"});
    rv::Monitor m(AppId{10050}, sms_policy(), &bg);
    // "123" appears only as a fact, so no (app, num) valuation exists yet
    CHECK(m.step_ground({}).empty());
    CHECK(m.binding_count() == 0);
    m.step_ground(ev({{"send_sms", {"10050", "555"}}}));
    CHECK(m.binding_count() == 1);
}

TEST_CASE("event mapping lowers calls and syscalls to ground atoms") {
    auto mapping = rv::EventMapping::load_file(std::string(FIXTURE_DIR) + "/event_map.cfg");

    DecodedCall call;
    call.interface_name = "com.android.internal.telephony.ISms";
    call.method_name = "sendText";
    call.sender = AppId{10050};
    call.args = {ArgValue::str("555"), ArgValue::str(""), ArgValue::str("hi"), ArgValue::str("")};
    GroundEvent g = mapping.apply(call);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == GroundAtom{"send_sms", {"10050", "555"}});

    SyscallEvent open;
    open.kind = SyscallKind::Open;
    open.uid = AppId{10050};
    open.path = "/mnt/sdcard/a";
    g = mapping.apply(open);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == GroundAtom{"sdcard_read", {"10050", "/mnt/sdcard/a"}});

    // unmapped methods lower to nothing
    call.method_name = "unmapped";
    CHECK(mapping.apply(call).empty());
}

TEST_CASE("mapping rejects out-of-range argument slots") {
    auto mapping = rv::EventMapping::load_file(std::string(FIXTURE_DIR) + "/event_map.cfg");
    DecodedCall call;
    call.interface_name = "com.android.internal.telephony.ISms";
    call.method_name = "sendText";
    call.sender = AppId{10050};
    call.args = {};  // rule wants arg0
    CHECK_THROWS_AS(mapping.apply(call), rv::MappingArityError);
}

TEST_CASE("monitor matches the brute-force oracle on handpicked traces") {
    rv::BackgroundFacts bg;
    bg.add("contact", {"a"});

    rv::Policy once = rv::parse_policy("p(x) IMPLIES ONCE send_sms(x, y)", {}, "once");
    rv::Policy since = rv::parse_policy("(NOT p(x)) SINCE send_sms(y, x)", {}, "since");
    rv::Policy prev_hist = rv::parse_policy(
        "HISTORICALLY p(x) OR PREV send_sms(x, y) OR NOT p(x)", {}, "prev_hist");

    std::vector<GroundEvent> trace{
        ev({{"send_sms", {"a", "b"}}}),
        ev({{"p", {"a"}}}),
        ev({{"p", {"b"}}, {"send_sms", {"b", "a"}}}),
        ev({}),
        ev({{"p", {"a"}}, {"p", {"b"}}}),
    };
    CHECK(testoracle::verdicts_agree(sms_policy(), &bg, trace));
    CHECK(testoracle::verdicts_agree(once, nullptr, trace));
    CHECK(testoracle::verdicts_agree(since, nullptr, trace));
    CHECK(testoracle::verdicts_agree(prev_hist, nullptr, trace));
}

TEST_CASE("monitor matches the brute-force oracle on exhaustive short traces") {
    rv::BackgroundFacts bg;
    bg.add("contact", {"a"});
    std::vector<std::pair<rv::Policy, const rv::BackgroundFacts*>> cases;
    cases.emplace_back(sms_policy(), &bg);
    cases.emplace_back(rv::parse_policy("p(x) IMPLIES ONCE send_sms(x, y)", {}, "once"), nullptr);
    cases.emplace_back(rv::parse_policy("(NOT p(x)) SINCE send_sms(y, x)", {}, "since"), nullptr);
    cases.emplace_back(rv::parse_policy("HISTORICALLY p(x) OR PREV send_sms(x, y) OR NOT p(x)",
                                        {}, "prev_hist"),
                       nullptr);

    // single-atom alphabet: send_sms over {a,b}^2 plus p over {a,b}
    std::vector<GroundEvent> alphabet;
    for (const char* u : {"a", "b"})
        for (const char* x : {"a", "b"})
            alphabet.push_back(ev({{"send_sms", {u, x}}}));
    alphabet.push_back(ev({{"p", {"a"}}}));
    alphabet.push_back(ev({{"p", {"b"}}}));

    size_t checked = 0;
    for (size_t len = 1; len <= 4; ++len) {
        std::vector<size_t> idx(len, 0);
        while (true) {
            std::vector<GroundEvent> trace;
            for (size_t i : idx) trace.push_back(alphabet[i]);
            for (auto& [pol, b] : cases) REQUIRE(testoracle::verdicts_agree(pol, b, trace));
            ++checked;
            size_t k = 0;
            while (k < len && ++idx[k] == alphabet.size()) idx[k++] = 0;
            if (k == len) break;
        }
    }
    CHECK(checked == 6 + 36 + 216 + 1296);
}

TEST_CASE("monitor matches the brute-force oracle on random long traces") {
    rv::BackgroundFacts bg;
    bg.add("contact", {"a"});
    std::vector<std::pair<rv::Policy, const rv::BackgroundFacts*>> cases;
    cases.emplace_back(sms_policy(), &bg);
    cases.emplace_back(rv::parse_policy("p(x) IMPLIES ONCE send_sms(x, y)", {}, "once"), nullptr);
    cases.emplace_back(rv::parse_policy("(NOT p(x)) SINCE send_sms(y, x)", {}, "since"), nullptr);
    cases.emplace_back(rv::parse_policy("HISTORICALLY p(x) OR PREV send_sms(x, y) OR NOT p(x)",
                                        {}, "prev_hist"),
                       nullptr);

    std::mt19937_64 rng(2026);
    const char* vals[] = {"a", "b", "c"};
    for (int t = 0; t < 200; ++t) {
        size_t len = 1 + rng() % 50;
        std::vector<GroundEvent> trace;
        for (size_t i = 0; i < len; ++i) {
            GroundEvent e;
            size_t atoms = rng() % 3;  // 0..2 atoms per event
            for (size_t a = 0; a < atoms; ++a) {
                if (rng() % 2)
                    e.push_back({"send_sms", {vals[rng() % 3], vals[rng() % 3]}});
                else
                    e.push_back({"p", {vals[rng() % 3]}});
            }
            trace.push_back(std::move(e));
        }
        for (auto& [pol, b] : cases) REQUIRE(testoracle::verdicts_agree(pol, b, trace));
    }
}

TEST_CASE("binding count is the product of per-variable domain sizes") {
    rv::Policy p = rv::parse_policy("p3(x, y, z) OR NOT p3(x, y, z)", {}, "taut");
    rv::Monitor m(AppId{10050}, p, nullptr);
    m.step_ground(ev({{"p3", {"x1", "y1", "z1"}}}));
    m.step_ground(ev({{"p3", {"x2", "y2", "z2"}}}));
    m.step_ground(ev({{"p3", {"x1", "y3", "z3"}}}));
    auto v = m.step_ground(ev({{"p3", {"x2", "y1", "z4"}}}));
    CHECK(v.empty());  // tautology never fires
    // domains: x in {x1,x2}, y in {y1,y2,y3}, z in {z1..z4}
    CHECK(m.binding_count() == 2 * 3 * 4);
}

TEST_CASE("valuations spawned later start with no past") {
    // ONCE only looks back to the valuation's own spawn point
    rv::Policy p = rv::parse_policy("p(x) IMPLIES ONCE q(x)", {}, "spawnonce");
    rv::Monitor m(AppId{10050}, p, nullptr);
    CHECK(m.step_ground(ev({{"q", {"a"}}})).empty());
    // binding x=b spawns here; q(a) from step 0 is irrelevant to it
    auto v = m.step_ground(ev({{"p", {"b"}}}));
    REQUIRE(v.size() == 1);
    CHECK(v[0].binding.at("x") == "b");
    // x=a carries its own past: compliant
    CHECK(m.step_ground(ev({{"p", {"a"}}})).empty());
}

TEST_CASE("monitors for different apps are isolated") {
    rv::BackgroundFacts bg;
    auto mapping = rv::EventMapping::load_file(std::string(FIXTURE_DIR) + "/event_map.cfg");
    rv::Monitor a(AppId{10050}, sms_policy(), &bg);
    rv::Monitor b(AppId{10099}, sms_policy(), &bg);

    DecodedCall call;
    call.interface_name = "com.android.internal.telephony.ISms";
    call.method_name = "sendText";
    call.sender = AppId{10050};
    call.args = {ArgValue::str("555"), ArgValue::str(""), ArgValue::str("hi"), ArgValue::str("")};
    auto v = a.step(call, mapping);
    REQUIRE(v.size() == 1);
    CHECK(b.binding_count() == 0);
    CHECK(b.steps() == 0);
    CHECK(a.uid().uid == 10050);
}

TEST_CASE("syscall events flow through step with the mapping") {
    auto mapping = rv::EventMapping::load_file(std::string(FIXTURE_DIR) + "/event_map.cfg");
    rv::Policy p = rv::parse_policy("sdcard_read(app, path) IMPLIES ONCE connect(app, addr)",
                                    {}, "read_after_connect");
    rv::Monitor m(AppId{10050}, p, nullptr);

    SyscallEvent open;
    open.kind = SyscallKind::Open;
    open.uid = AppId{10050};
    open.path = "/mnt/sdcard/a";

    SyscallEvent conn;
    conn.kind = SyscallKind::Connect;
    conn.uid = AppId{10050};
    conn.addr_family = AddrFamily::Inet4;
    conn.addr = "1.2.3.4:80";

    // no complete valuation until addr is bound by a connect
    CHECK(m.step(open, mapping).empty());
    CHECK(m.binding_count() == 0);
    CHECK(m.step(conn, mapping).empty());
    CHECK(m.binding_count() == 1);
    // the connect now lies in this valuation's past
    CHECK(m.step(open, mapping).empty());

    // reversed binding order on a fresh monitor: path is bound only at the
    // open step, so the valuation spawns there with no past and the earlier
    // connect does not count
    rv::Monitor m2(AppId{10050}, p, nullptr);
    CHECK(m2.step(conn, mapping).empty());
    auto v = m2.step(open, mapping);
    REQUIRE(v.size() == 1);
    CHECK(v[0].binding.at("addr") == "1.2.3.4:80");

    // single shared variable: reads are flagged unless that resource was connected
    rv::Policy p2 = rv::parse_policy("sdcard_read(app, res) IMPLIES ONCE connect(app, res)",
                                     {}, "read_of_connected");
    rv::Monitor m3(AppId{10050}, p2, nullptr);
    auto v3 = m3.step(open, mapping);
    REQUIRE(v3.size() == 1);
    CHECK(v3[0].binding.at("res") == "/mnt/sdcard/a");
}
