#include <doctest.h>

#include "bindertrace/events.hpp"

using namespace bindertrace;

TEST_CASE("well-formed open event validates clean") {
    SyscallEvent e;
    e.kind = SyscallKind::Open;
    e.uid = AppId{10050};
    e.path = "/mnt/sdcard/a.txt";
    CHECK(validate_event(e).empty());
}

TEST_CASE("connect event carrying a path is flagged") {
    SyscallEvent e;
    e.kind = SyscallKind::Connect;
    e.uid = AppId{10050};
    e.addr_family = AddrFamily::Inet4;
    e.addr = "1.2.3.4:80";
    e.path = "/oops";
    auto v = validate_event(e);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "path on Connect");
}

TEST_CASE("connect event missing addr fields is flagged") {
    SyscallEvent e;
    e.kind = SyscallKind::Connect;
    e.uid = AppId{10050};
    CHECK(!validate_event(e).empty());
}

TEST_CASE("binder record alignment") {
    BinderTransactionRecord r;
    r.sender_euid = AppId{10050};
    r.buffer = {1, 2, 3, 4, 5, 6};
    auto v = validate_event(r);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "alignment");

    r.buffer.resize(8);
    CHECK(validate_event(r).empty());
}

TEST_CASE("binder record over the 1 MiB cap") {
    BinderTransactionRecord r;
    r.buffer.assign((1u << 20) + 4, 0);
    CHECK(validate_event(r).size() == 1);
}

TEST_CASE("system uids are flagged, not rejected") {
    CHECK(AppId{1000}.is_system());
    CHECK(!AppId{10000}.is_system());
}

TEST_CASE("timestamps are monotonic") {
    uint64_t a = monotonic_now_ns();
    uint64_t b = monotonic_now_ns();
    CHECK(b >= a);
}

TEST_CASE("arg value display") {
    CHECK(to_display_string(ArgValue::str("hi")) == "hi");
    CHECK(to_display_string(ArgValue::i32(5)) == "5");
    CHECK(to_display_string(ArgValue::boolean(true)) == "true");
    CHECK(to_display_string(ArgValue::composite("P", {ArgValue::i32(1), ArgValue::str("x")})) ==
          "P{1,x}");
}
