#pragma once

#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bindertrace/events.hpp"

namespace bindertrace::rv {

// ---------------------------------------------------------------------------
// Policy language
//
// Atoms are `pred(t1, ..., tn)` with variable or constant terms (bare
// identifiers are variables, quoted strings and numbers are constants).
// Connectives: NOT, AND, OR, IMPLIES. Past operators: PREV, ONCE,
// HISTORICALLY, SINCE. The formula is implicitly checked at every event
// (outermost ALWAYS). Predicates named in the background-fact set are rigid;
// everything else is an event predicate.

struct SyntaxError : std::runtime_error {
    SyntaxError(size_t pos, const std::string& what)
        : std::runtime_error("syntax error at " + std::to_string(pos) + ": " + what), pos(pos) {}
    size_t pos;
};

struct UngroundedVariable : std::runtime_error {
    explicit UngroundedVariable(const std::string& name)
        : std::runtime_error("variable never bound by an event predicate: " + name), name(name) {}
    std::string name;
};

struct MappingArityError : std::runtime_error {
    explicit MappingArityError(const std::string& what) : std::runtime_error(what) {}
};

struct Term {
    bool is_var = false;
    std::string text;  // variable name or constant value

    friend bool operator==(const Term&, const Term&) = default;
};

struct Formula {
    enum class Kind {
        EventAtom,
        BackgroundAtom,
        Not,
        And,
        Or,
        Implies,
        Prev,
        Once,
        Historically,
        Since,
    };

    Kind kind = Kind::EventAtom;
    // atoms
    std::string pred;
    std::vector<Term> terms;
    // connectives/operators; unary ones use lhs
    std::shared_ptr<const Formula> lhs, rhs;
};

struct Policy {
    std::string name;
    std::shared_ptr<const Formula> formula;
    std::vector<const Formula*> postorder;  // evaluation order, root last
    std::vector<std::string> free_vars;     // sorted
};

/// Parses a formula and runs the groundedness check. `background_preds`
/// decides which atoms are rigid background lookups.
Policy parse_policy(const std::string& text, const std::set<std::string>& background_preds,
                    const std::string& name = "policy");

/// `policy <name>: <formula>` lines; '#' comments.
std::vector<Policy> parse_policy_file(std::istream& in,
                                      const std::set<std::string>& background_preds);

// ---------------------------------------------------------------------------
// Ground events and background facts

struct GroundAtom {
    std::string pred;
    std::vector<std::string> args;

    friend bool operator==(const GroundAtom&, const GroundAtom&) = default;
    friend auto operator<=>(const GroundAtom&, const GroundAtom&) = default;
};

using GroundEvent = std::vector<GroundAtom>;

/// Rigid facts loaded once per run, e.g. the contacts list.
class BackgroundFacts {
public:
    void add(const std::string& pred, std::vector<std::string> args);
    bool contains(const std::string& pred, const std::vector<std::string>& args) const;
    std::set<std::string> predicates() const;

    /// `<pred> <value>...` lines, e.g. `contact 123`.
    static BackgroundFacts load(std::istream& in);
    static BackgroundFacts load_file(const std::string& path);

private:
    std::map<std::string, std::set<std::vector<std::string>>> facts_;
};

// ---------------------------------------------------------------------------
// Event mapping: DecodedCall / SyscallEvent -> ground predicates

/// Lowers pipeline events to logical predicates via rules of the form
/// `map <interface> <method> -> <pred>(uid, arg0, ...)`. Syscalls use the
/// pseudo-interface `syscall` with methods `open` (arg0 = path) and
/// `connect` (arg0 = addr). Unmapped events lower to the empty set.
class EventMapping {
public:
    struct Slot {
        bool is_uid = false;
        size_t arg_index = 0;
    };

    void add_rule(const std::string& interface_name, const std::string& method,
                  const std::string& pred, std::vector<Slot> slots);

    GroundEvent apply(const DecodedCall& call) const;
    GroundEvent apply(const SyscallEvent& e) const;

    static EventMapping load(std::istream& in);
    static EventMapping load_file(const std::string& path);

private:
    struct Rule {
        std::string pred;
        std::vector<Slot> slots;
    };
    GroundEvent lower(const std::string& iface, const std::string& method, uint32_t uid,
                      const std::vector<std::string>& args) const;

    std::map<std::pair<std::string, std::string>, Rule> rules_;
};

// ---------------------------------------------------------------------------
// Monitor

struct Violation {
    std::map<std::string, std::string> binding;
    size_t event_index = 0;

    friend bool operator==(const Violation&, const Violation&) = default;
};

/// One propositional past-LTL monitor per observed valuation of the policy's
/// variables (parametric slicing). New valuations spawn when their values
/// first appear together in the trace and start with no past. Bindings are
/// never removed; this is where the exponential worst case lives.
class Monitor {
public:
    Monitor(AppId uid, Policy policy, const BackgroundFacts* background);

    std::vector<Violation> step_ground(const GroundEvent& ev);
    std::vector<Violation> step(const DecodedCall& call, const EventMapping& mapping);
    std::vector<Violation> step(const SyscallEvent& e, const EventMapping& mapping);

    AppId uid() const { return uid_; }
    const Policy& policy() const { return policy_; }
    size_t binding_count() const { return bindings_.size(); }
    size_t steps() const { return steps_; }

private:
    struct BindingState {
        std::vector<char> prev;  // per-subformula truth at the previous step
        bool fresh = true;       // spawned this step, no previous step exists
    };

    AppId uid_;
    Policy policy_;
    const BackgroundFacts* background_;
    std::vector<std::set<std::string>> domains_;  // per free_vars_ entry
    std::map<std::vector<std::string>, BindingState> bindings_;
    size_t steps_ = 0;
};

}  // namespace bindertrace::rv
