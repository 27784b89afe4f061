#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "bindertrace/bench.hpp"
#include "bindertrace/bridge.hpp"
#include "bindertrace/events.hpp"
#include "bindertrace/interceptor.hpp"
#include "bindertrace/parcel.hpp"
#include "bindertrace/rv.hpp"
#include "bindertrace/service.hpp"

namespace py = pybind11;
using namespace bindertrace;

namespace {

ArgValue arg_from_py(const py::handle& h);

std::vector<ArgValue> args_from_py(const py::sequence& seq) {
    std::vector<ArgValue> out;
    for (const auto& item : seq) out.push_back(arg_from_py(item));
    return out;
}

// Python -> ArgValue: bool, int (i32 if it fits, else i64), float (f64),
// str, bytes, ("f32"/"i64"/... , value) tuples for explicit widths, and
// ("TypeName", [fields]) tuples for composites.
ArgValue arg_from_py(const py::handle& h) {
    if (py::isinstance<py::bool_>(h)) return ArgValue::boolean(h.cast<bool>());
    if (py::isinstance<py::int_>(h)) {
        int64_t v = h.cast<int64_t>();
        if (v >= INT32_MIN && v <= INT32_MAX) return ArgValue::i32(static_cast<int32_t>(v));
        return ArgValue::i64(v);
    }
    if (py::isinstance<py::float_>(h)) return ArgValue::f64(h.cast<double>());
    if (py::isinstance<py::str>(h)) return ArgValue::str(h.cast<std::string>());
    if (py::isinstance<py::bytes>(h)) {
        std::string s = h.cast<std::string>();
        return ArgValue::bytes({s.begin(), s.end()});
    }
    if (py::isinstance<py::tuple>(h)) {
        auto t = h.cast<py::tuple>();
        if (t.size() == 2 && py::isinstance<py::str>(t[0])) {
            std::string tag = t[0].cast<std::string>();
            if (tag == "i32") return ArgValue::i32(t[1].cast<int32_t>());
            if (tag == "i64") return ArgValue::i64(t[1].cast<int64_t>());
            if (tag == "f32") return ArgValue::f32(t[1].cast<float>());
            if (tag == "f64") return ArgValue::f64(t[1].cast<double>());
            return ArgValue::composite(tag, args_from_py(t[1].cast<py::sequence>()));
        }
    }
    throw py::type_error("unsupported argument value");
}

py::object arg_to_py(const ArgValue& v) {
    return std::visit(
        [](const auto& x) -> py::object {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::vector<uint8_t>>) {
                return py::bytes(reinterpret_cast<const char*>(x.data()), x.size());
            } else if constexpr (std::is_same_v<T, CompositeValue>) {
                py::list fields;
                for (const auto& f : x.fields) fields.append(arg_to_py(f));
                return py::make_tuple(x.type_name, fields);
            } else {
                return py::cast(x);
            }
        },
        v.v);
}

}  // namespace

PYBIND11_MODULE(_bindertrace, m) {
    m.doc() = "Binder-style event interception, parcel codec, framed transport and "
              "past-LTL runtime verification";

    py::register_exception<CodecError>(m, "CodecError");
    py::register_exception<FrameError>(m, "FrameError");

    // --- parcel codec
    py::class_<SignatureRegistry>(m, "SignatureRegistry")
        .def(py::init<>())
        .def_static("load_file", &SignatureRegistry::load_file)
        .def("register_signature",
             [](SignatureRegistry& r, const std::string& iface, uint32_t code,
                const std::string& method, const std::vector<std::string>& types) {
                 MethodSignature sig{iface, code, method, {}};
                 for (const auto& t : types) sig.arg_types.push_back(parse_type_token(t));
                 r.register_signature(std::move(sig));
             })
        .def("register_composite",
             [](SignatureRegistry& r, const std::string& name,
                const std::vector<std::string>& types) {
                 std::vector<TypeDescriptor> fields;
                 for (const auto& t : types) fields.push_back(parse_type_token(t));
                 r.register_composite(name, std::move(fields));
             })
        .def("method_name", [](const SignatureRegistry& r, const std::string& iface,
                               uint32_t code) -> std::optional<std::string> {
            const MethodSignature* s = r.find(iface, code);
            if (!s) return std::nullopt;
            return s->method_name;
        });

    m.def("builtin_registry", &bench::builtin_registry);

    m.def("marshal",
          [](const SignatureRegistry& reg, const std::string& iface, uint32_t code,
             const py::sequence& args) {
              const MethodSignature* sig = reg.find(iface, code);
              if (!sig) throw UnknownCode(iface, code);
              ParcelBuffer buf = marshal(*sig, args_from_py(args), reg);
              return py::bytes(reinterpret_cast<const char*>(buf.data().data()),
                               buf.data().size());
          },
          "Encode a call: interface name first, then arguments in signature order");

    m.def("unmarshal",
          [](const SignatureRegistry& reg, uint32_t sender_uid, uint32_t code,
             const py::bytes& buffer) {
              std::string raw = buffer;
              BinderTransactionRecord rec;
              rec.sender_euid = AppId{sender_uid};
              rec.code = code;
              rec.buffer.assign(raw.begin(), raw.end());
              DecodedCall call = unmarshal(rec, reg);
              py::list args;
              for (const auto& a : call.args) args.append(arg_to_py(a));
              return py::make_tuple(call.interface_name, call.method_name, args);
          },
          "Decode a captured transaction into (interface, method, args)");

    // --- frames
    m.def("encode_frame", [](uint8_t msg_type, uint32_t uid, const py::bytes& payload) {
        std::string raw = payload;
        auto out = encode_frame(static_cast<MsgType>(msg_type), uid,
                                std::span<const uint8_t>(
                                    reinterpret_cast<const uint8_t*>(raw.data()), raw.size()));
        return py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
    });
    m.def("decode_frame", [](const py::bytes& data) {
        std::string raw = data;
        NetlinkFrame f = decode_frame(std::span<const uint8_t>(
            reinterpret_cast<const uint8_t*>(raw.data()), raw.size()));
        return py::make_tuple(static_cast<uint8_t>(f.msg_type), f.uid,
                              py::bytes(reinterpret_cast<const char*>(f.payload.data()),
                                        f.payload.size()));
    });

    // --- runtime verification
    py::class_<rv::BackgroundFacts>(m, "BackgroundFacts")
        .def(py::init<>())
        .def("add", &rv::BackgroundFacts::add)
        .def_static("load_file", &rv::BackgroundFacts::load_file)
        .def("predicates", &rv::BackgroundFacts::predicates);

    py::class_<rv::Policy>(m, "Policy")
        .def_readonly("name", &rv::Policy::name)
        .def_readonly("free_vars", &rv::Policy::free_vars);

    m.def("parse_policy", &rv::parse_policy, py::arg("text"), py::arg("background_preds"),
          py::arg("name") = "policy");

    py::class_<rv::Violation>(m, "Violation")
        .def_readonly("binding", &rv::Violation::binding)
        .def_readonly("event_index", &rv::Violation::event_index);

    py::class_<rv::Monitor>(m, "Monitor")
        .def(py::init([](uint32_t uid, const rv::Policy& p, const rv::BackgroundFacts* bg) {
                 return std::make_unique<rv::Monitor>(AppId{uid}, p, bg);
             }),
             py::arg("uid"), py::arg("policy"), py::arg("background"),
             py::keep_alive<1, 4>())
        .def("step",
             [](rv::Monitor& mon, const std::vector<std::pair<std::string,
                                                              std::vector<std::string>>>& atoms) {
                 rv::GroundEvent ev;
                 for (const auto& [pred, args] : atoms) ev.push_back({pred, args});
                 return mon.step_ground(ev);
             },
             "Step the monitor with a set of ground (pred, args) atoms")
        .def_property_readonly("binding_count", &rv::Monitor::binding_count)
        .def_property_readonly("steps", &rv::Monitor::steps);

    // --- benchmark
    m.def("generate_workload", [](int sort, uint32_t count, uint64_t seed) {
        bench::Workload w = bench::workload_by_sort(sort);
        w.event_count = count;
        std::ostringstream os;
        bench::generate_workload(w, seed, os);
        return os.str();
    });
}
