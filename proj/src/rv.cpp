#include "bindertrace/rv.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace bindertrace::rv {

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
    enum class Kind { Ident, Const, LParen, RParen, Comma, End };
    Kind kind;
    std::string text;
    size_t pos;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { advance(); }

    const Token& peek() const { return cur_; }

    Token next() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        size_t start = i_;
        if (i_ >= s_.size()) {
            cur_ = {Token::Kind::End, "", start};
            return;
        }
        char c = s_[i_];
        if (c == '(') { ++i_; cur_ = {Token::Kind::LParen, "(", start}; return; }
        if (c == ')') { ++i_; cur_ = {Token::Kind::RParen, ")", start}; return; }
        if (c == ',') { ++i_; cur_ = {Token::Kind::Comma, ",", start}; return; }
        if (c == '"') {
            ++i_;
            std::string v;
            while (i_ < s_.size() && s_[i_] != '"') v.push_back(s_[i_++]);
            if (i_ >= s_.size()) throw SyntaxError(start, "unterminated string constant");
            ++i_;
            cur_ = {Token::Kind::Const, v, start};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
            std::string v;
            v.push_back(s_[i_++]);
            while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.'))
                v.push_back(s_[i_++]);
            cur_ = {Token::Kind::Const, v, start};
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string v;
            while (i_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
                v.push_back(s_[i_++]);
            cur_ = {Token::Kind::Ident, v, start};
            return;
        }
        throw SyntaxError(start, std::string("unexpected character '") + c + "'");
    }

    const std::string& s_;
    size_t i_ = 0;
    Token cur_{Token::Kind::End, "", 0};
};

using FPtr = std::shared_ptr<const Formula>;

bool is_keyword(const std::string& s) {
    return s == "NOT" || s == "AND" || s == "OR" || s == "IMPLIES" || s == "PREV" ||
           s == "ONCE" || s == "HISTORICALLY" || s == "SINCE";
}

class Parser {
public:
    Parser(Lexer& lex, const std::set<std::string>& bg) : lex_(lex), bg_(bg) {}

    FPtr parse() {
        FPtr f = implies();
        if (lex_.peek().kind != Token::Kind::End)
            throw SyntaxError(lex_.peek().pos, "trailing input: " + lex_.peek().text);
        return f;
    }

private:
    bool at_keyword(const char* kw) const {
        return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == kw;
    }

    FPtr make(Formula::Kind k, FPtr l, FPtr r = nullptr) {
        auto f = std::make_shared<Formula>();
        f->kind = k;
        f->lhs = std::move(l);
        f->rhs = std::move(r);
        return f;
    }

    FPtr implies() {
        FPtr l = disj();
        if (at_keyword("IMPLIES")) {
            lex_.next();
            return make(Formula::Kind::Implies, std::move(l), implies());
        }
        return l;
    }

    FPtr disj() {
        FPtr l = conj();
        while (at_keyword("OR")) {
            lex_.next();
            l = make(Formula::Kind::Or, std::move(l), conj());
        }
        return l;
    }

    FPtr conj() {
        FPtr l = since();
        while (at_keyword("AND")) {
            lex_.next();
            l = make(Formula::Kind::And, std::move(l), since());
        }
        return l;
    }

    FPtr since() {
        FPtr l = unary();
        while (at_keyword("SINCE")) {
            lex_.next();
            l = make(Formula::Kind::Since, std::move(l), unary());
        }
        return l;
    }

    FPtr unary() {
        if (at_keyword("NOT")) { lex_.next(); return make(Formula::Kind::Not, unary()); }
        if (at_keyword("PREV")) { lex_.next(); return make(Formula::Kind::Prev, unary()); }
        if (at_keyword("ONCE")) { lex_.next(); return make(Formula::Kind::Once, unary()); }
        if (at_keyword("HISTORICALLY")) {
            lex_.next();
            return make(Formula::Kind::Historically, unary());
        }
        if (lex_.peek().kind == Token::Kind::LParen) {
            lex_.next();
            FPtr f = implies();
            if (lex_.peek().kind != Token::Kind::RParen)
                throw SyntaxError(lex_.peek().pos, "expected ')'");
            lex_.next();
            return f;
        }
        return atom();
    }

    FPtr atom() {
        Token t = lex_.next();
        if (t.kind != Token::Kind::Ident || is_keyword(t.text))
            throw SyntaxError(t.pos, "expected an atom, got '" + t.text + "'");
        auto f = std::make_shared<Formula>();
        f->kind = bg_.count(t.text) ? Formula::Kind::BackgroundAtom : Formula::Kind::EventAtom;
        f->pred = t.text;
        if (lex_.peek().kind != Token::Kind::LParen)
            throw SyntaxError(lex_.peek().pos, "expected '(' after predicate " + t.text);
        lex_.next();
        if (lex_.peek().kind != Token::Kind::RParen) {
            for (;;) {
                Token a = lex_.next();
                if (a.kind == Token::Kind::Ident) {
                    if (is_keyword(a.text))
                        throw SyntaxError(a.pos, "keyword used as a term: " + a.text);
                    f->terms.push_back({true, a.text});
                } else if (a.kind == Token::Kind::Const) {
                    f->terms.push_back({false, a.text});
                } else {
                    throw SyntaxError(a.pos, "expected a term");
                }
                if (lex_.peek().kind == Token::Kind::Comma) {
                    lex_.next();
                    continue;
                }
                break;
            }
        }
        if (lex_.peek().kind != Token::Kind::RParen)
            throw SyntaxError(lex_.peek().pos, "expected ')'");
        lex_.next();
        return f;
    }

    Lexer& lex_;
    const std::set<std::string>& bg_;
};

void flatten(const Formula* f, std::vector<const Formula*>& out) {
    if (f->lhs) flatten(f->lhs.get(), out);
    if (f->rhs) flatten(f->rhs.get(), out);
    out.push_back(f);
}

}  // namespace

Policy parse_policy(const std::string& text, const std::set<std::string>& background_preds,
                    const std::string& name) {
    Lexer lex(text);
    Parser parser(lex, background_preds);
    Policy p;
    p.name = name;
    p.formula = parser.parse();
    flatten(p.formula.get(), p.postorder);

    std::set<std::string> vars, grounded;
    for (const Formula* f : p.postorder) {
        if (f->kind != Formula::Kind::EventAtom && f->kind != Formula::Kind::BackgroundAtom)
            continue;
        for (const Term& t : f->terms) {
            if (!t.is_var) continue;
            vars.insert(t.text);
            if (f->kind == Formula::Kind::EventAtom) grounded.insert(t.text);
        }
    }
    for (const auto& v : vars)
        if (!grounded.count(v)) throw UngroundedVariable(v);
    p.free_vars.assign(vars.begin(), vars.end());
    return p;
}

std::vector<Policy> parse_policy_file(std::istream& in,
                                      const std::set<std::string>& background_preds) {
    std::vector<Policy> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw != "policy") throw SyntaxError(0, "line " + std::to_string(line_no) +
                                                     ": expected 'policy <name>: <formula>'");
        std::string name;
        ls >> name;
        bool had_colon = !name.empty() && name.back() == ':';
        if (had_colon) name.pop_back();
        std::string rest;
        std::getline(ls, rest);
        if (!had_colon) {
            auto colon = rest.find(':');
            if (colon == std::string::npos || rest.find_first_not_of(' ') != colon)
                throw SyntaxError(0, "line " + std::to_string(line_no) +
                                         ": expected ':' after policy name");
            rest = rest.substr(colon + 1);
        }
        out.push_back(parse_policy(rest, background_preds, name));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Background facts

void BackgroundFacts::add(const std::string& pred, std::vector<std::string> args) {
    facts_[pred].insert(std::move(args));
}

bool BackgroundFacts::contains(const std::string& pred,
                               const std::vector<std::string>& args) const {
    auto it = facts_.find(pred);
    return it != facts_.end() && it->second.count(args) > 0;
}

std::set<std::string> BackgroundFacts::predicates() const {
    std::set<std::string> out;
    for (const auto& [p, _] : facts_) out.insert(p);
    return out;
}

BackgroundFacts BackgroundFacts::load(std::istream& in) {
    BackgroundFacts bg;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string pred, tok;
        if (!(ls >> pred)) continue;
        std::vector<std::string> args;
        while (ls >> tok) args.push_back(tok);
        bg.add(pred, std::move(args));
    }
    return bg;
}

BackgroundFacts BackgroundFacts::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open facts file: " + path);
    return load(in);
}

// ---------------------------------------------------------------------------
// Event mapping

void EventMapping::add_rule(const std::string& interface_name, const std::string& method,
                            const std::string& pred, std::vector<Slot> slots) {
    rules_[{interface_name, method}] = Rule{pred, std::move(slots)};
}

GroundEvent EventMapping::lower(const std::string& iface, const std::string& method,
                                uint32_t uid, const std::vector<std::string>& args) const {
    auto it = rules_.find({iface, method});
    if (it == rules_.end()) return {};
    const Rule& r = it->second;
    GroundAtom atom;
    atom.pred = r.pred;
    for (const Slot& s : r.slots) {
        if (s.is_uid) {
            atom.args.push_back(std::to_string(uid));
        } else {
            if (s.arg_index >= args.size())
                throw MappingArityError("mapping for " + iface + "." + method + " references arg" +
                                        std::to_string(s.arg_index) + " but the call has " +
                                        std::to_string(args.size()) + " args");
            atom.args.push_back(args[s.arg_index]);
        }
    }
    return {atom};
}

GroundEvent EventMapping::apply(const DecodedCall& call) const {
    std::vector<std::string> args;
    args.reserve(call.args.size());
    for (const auto& a : call.args) args.push_back(to_display_string(a));
    return lower(call.interface_name, call.method_name, call.sender.uid, args);
}

GroundEvent EventMapping::apply(const SyscallEvent& e) const {
    if (e.kind == SyscallKind::Open) return lower("syscall", "open", e.uid.uid, {e.path});
    return lower("syscall", "connect", e.uid.uid, {e.addr});
}

EventMapping EventMapping::load(std::istream& in) {
    EventMapping m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        auto fail = [&](const std::string& why) {
            throw MappingArityError("mapping line " + std::to_string(line_no) + ": " + why);
        };
        if (kw != "map") fail("expected 'map <interface> <method> -> <pred>(uid, arg<i>...)'");
        std::string iface, method, arrow, rhs;
        if (!(ls >> iface >> method >> arrow) || arrow != "->") fail("expected '->'");
        std::getline(ls, rhs);
        auto lp = rhs.find('(');
        auto rp = rhs.rfind(')');
        if (lp == std::string::npos || rp == std::string::npos || rp < lp)
            fail("expected <pred>(...)");
        std::string pred = rhs.substr(0, lp);
        pred.erase(std::remove_if(pred.begin(), pred.end(), ::isspace), pred.end());
        std::string inner = rhs.substr(lp + 1, rp - lp - 1);
        std::vector<Slot> slots;
        std::istringstream as(inner);
        std::string tok;
        while (std::getline(as, tok, ',')) {
            tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
            if (tok.empty()) continue;
            if (tok == "uid") {
                slots.push_back({true, 0});
            } else if (tok.rfind("arg", 0) == 0) {
                slots.push_back({false, static_cast<size_t>(std::stoul(tok.substr(3)))});
            } else {
                fail("unknown slot token: " + tok);
            }
        }
        m.add_rule(iface, method, pred, std::move(slots));
    }
    return m;
}

EventMapping EventMapping::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mapping file: " + path);
    return load(in);
}

// ---------------------------------------------------------------------------
// Monitor

Monitor::Monitor(AppId uid, Policy policy, const BackgroundFacts* background)
    : uid_(uid), policy_(std::move(policy)), background_(background) {
    domains_.resize(policy_.free_vars.size());
}

std::vector<Violation> Monitor::step_ground(const GroundEvent& ev) {
    const auto& vars = policy_.free_vars;
    auto var_index = [&](const std::string& v) {
        return static_cast<size_t>(std::lower_bound(vars.begin(), vars.end(), v) - vars.begin());
    };

    // 1. Grow per-variable domains from atoms the event can unify with.
    for (const Formula* f : policy_.postorder) {
        if (f->kind != Formula::Kind::EventAtom) continue;
        for (const GroundAtom& g : ev) {
            if (g.pred != f->pred || g.args.size() != f->terms.size()) continue;
            bool ok = true;
            for (size_t i = 0; i < f->terms.size(); ++i)
                if (!f->terms[i].is_var && f->terms[i].text != g.args[i]) { ok = false; break; }
            if (!ok) continue;
            for (size_t i = 0; i < f->terms.size(); ++i)
                if (f->terms[i].is_var) domains_[var_index(f->terms[i].text)].insert(g.args[i]);
        }
    }

    // 2. Spawn monitors for valuations that just became possible.
    bool all_nonempty = std::all_of(domains_.begin(), domains_.end(),
                                    [](const auto& d) { return !d.empty(); });
    if (all_nonempty) {
        std::vector<std::string> val(vars.size());
        std::function<void(size_t)> spawn = [&](size_t i) {
            if (i == vars.size()) {
                if (!bindings_.count(val)) {
                    BindingState st;
                    st.prev.assign(policy_.postorder.size(), 0);
                    for (size_t k = 0; k < policy_.postorder.size(); ++k)
                        if (policy_.postorder[k]->kind == Formula::Kind::Historically)
                            st.prev[k] = 1;
                    bindings_.emplace(val, std::move(st));
                }
                return;
            }
            for (const auto& v : domains_[i]) {
                val[i] = v;
                spawn(i + 1);
            }
        };
        spawn(0);
    }

    // 3. Update every binding bottom-up and collect root failures.
    std::vector<Violation> out;
    std::map<const Formula*, size_t> idx;
    for (size_t k = 0; k < policy_.postorder.size(); ++k) idx[policy_.postorder[k]] = k;

    for (auto& [val, st] : bindings_) {
        std::vector<char> cur(policy_.postorder.size(), 0);
        for (size_t k = 0; k < policy_.postorder.size(); ++k) {
            const Formula* f = policy_.postorder[k];
            switch (f->kind) {
                case Formula::Kind::EventAtom:
                case Formula::Kind::BackgroundAtom: {
                    std::vector<std::string> args;
                    args.reserve(f->terms.size());
                    for (const Term& t : f->terms)
                        args.push_back(t.is_var ? val[var_index(t.text)] : t.text);
                    if (f->kind == Formula::Kind::BackgroundAtom) {
                        cur[k] = background_ && background_->contains(f->pred, args);
                    } else {
                        cur[k] = std::find(ev.begin(), ev.end(), GroundAtom{f->pred, args}) !=
                                 ev.end();
                    }
                    break;
                }
                case Formula::Kind::Not: cur[k] = !cur[idx[f->lhs.get()]]; break;
                case Formula::Kind::And:
                    cur[k] = cur[idx[f->lhs.get()]] && cur[idx[f->rhs.get()]];
                    break;
                case Formula::Kind::Or:
                    cur[k] = cur[idx[f->lhs.get()]] || cur[idx[f->rhs.get()]];
                    break;
                case Formula::Kind::Implies:
                    cur[k] = !cur[idx[f->lhs.get()]] || cur[idx[f->rhs.get()]];
                    break;
                case Formula::Kind::Prev:
                    cur[k] = st.fresh ? 0 : st.prev[idx[f->lhs.get()]];
                    break;
                case Formula::Kind::Once: cur[k] = cur[idx[f->lhs.get()]] || st.prev[k]; break;
                case Formula::Kind::Historically:
                    cur[k] = cur[idx[f->lhs.get()]] && st.prev[k];
                    break;
                case Formula::Kind::Since:
                    cur[k] = cur[idx[f->rhs.get()]] || (cur[idx[f->lhs.get()]] && st.prev[k]);
                    break;
            }
        }
        if (!cur.back()) {
            Violation v;
            v.event_index = steps_;
            for (size_t i = 0; i < vars.size(); ++i) v.binding[vars[i]] = val[i];
            out.push_back(std::move(v));
        }
        st.prev = std::move(cur);
        st.fresh = false;
    }
    ++steps_;
    return out;
}

std::vector<Violation> Monitor::step(const DecodedCall& call, const EventMapping& mapping) {
    return step_ground(mapping.apply(call));
}

std::vector<Violation> Monitor::step(const SyscallEvent& e, const EventMapping& mapping) {
    return step_ground(mapping.apply(e));
}

}  // namespace bindertrace::rv
