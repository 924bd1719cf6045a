#include <sstream>

#include "encaudit/policy.hpp"

namespace encaudit {

namespace {

std::string quote(const Bytes& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string render_value(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::Int: return std::to_string(v.as_int());
        case Value::Kind::Str: return quote(v.str());
        case Value::Kind::Det: return "0x" + to_hex(v.det_bytes());
        case Value::Kind::Kh: return "0x" + to_hex(v.kh_hash()) + ":0x" + to_hex(v.kh_cipher());
    }
    throw Error("unreachable");
}

std::string join_vars(const std::vector<std::string>& vars) {
    std::string out;
    for (size_t i = 0; i < vars.size(); ++i) {
        if (i) out += ",";
        out += vars[i];
    }
    return out;
}

std::string fmt_formula(const FormulaPtr& f);
std::string fmt_unit(const FormulaPtr& f);

// and-chain element; parenthesize or/and so chain structure survives reparse
std::string fmt_unit(const FormulaPtr& f) {
    if (std::holds_alternative<FAnd>(f->node) || std::holds_alternative<FOr>(f->node))
        return "(" + fmt_formula(f) + ")";
    return fmt_formula(f);
}

std::string fmt_and(const FormulaPtr& f) {
    if (auto* n = std::get_if<FAnd>(&f->node))
        return fmt_and(n->l) + " and " + fmt_unit(n->r);
    return fmt_unit(f);
}

std::string fmt_or_unit(const FormulaPtr& f) {
    if (std::holds_alternative<FOr>(f->node)) return "(" + fmt_formula(f) + ")";
    return fmt_and(f);
}

std::string fmt_formula(const FormulaPtr& f) {
    if (auto* a = std::get_if<Atom>(&f->node)) return render_atom(*a);
    if (std::holds_alternative<FTrue>(f->node)) return "true";
    if (std::holds_alternative<FFalse>(f->node)) return "false";
    if (std::holds_alternative<FAnd>(f->node)) return fmt_and(f);
    if (auto* n = std::get_if<FOr>(&f->node))
        return fmt_formula(n->l) + " or " + fmt_or_unit(n->r);
    if (auto* n = std::get_if<FForall>(&f->node))
        return "forall " + join_vars(n->vars) + ". (" + render_guard(n->guard) + " -> " +
               fmt_formula(n->body) + ")";
    auto& e = std::get<FExists>(f->node);
    std::string g = render_guard(e.guard);
    bool guard_is_and = std::holds_alternative<GAnd>(e.guard->node);
    if (is_true(e.body)) {
        // an and-guard with no body needs an explicit trailing conjunct so the
        // reparse split lands in the right place
        if (guard_is_and) g += " and true";
        return "exists " + join_vars(e.vars) + ". (" + g + ")";
    }
    return "exists " + join_vars(e.vars) + ". (" + g + " and " + fmt_unit(e.body) + ")";
}

}  // namespace

std::string render_term(const Term& t) {
    if (t.is_var()) return t.var();
    std::string out = render_value(t.val());
    if (t.origin()) out += "@" + t.origin()->str();
    return out;
}

std::string render_atom(const Atom& a) {
    if (auto* p = std::get_if<PredAtom>(&a)) {
        std::string out = p->pred + "(";
        for (size_t i = 0; i < p->args.size(); ++i) {
            if (i) out += ", ";
            out += render_term(p->args[i]);
        }
        return out + ")";
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a))
        return "timeOrder(" + render_term(t->t1) + ", " + render_term(t->d1) + ", " +
               render_term(t->t2) + ", " + render_term(t->d2) + ")";
    if (auto* e = std::get_if<EqAtom>(&a))
        return render_term(e->lhs) + " = " + render_term(e->rhs);
    auto& n = std::get<NotInAtom>(a);
    std::string out = "notin((" + join_vars(n.vars) + "), {";
    for (size_t i = 0; i < n.excluded.size(); ++i) {
        if (i) out += ", ";
        out += "(";
        for (size_t j = 0; j < n.excluded[i].size(); ++j) {
            if (j) out += ", ";
            out += render_value(n.excluded[i][j].value) + "@" + n.excluded[i][j].prov.str();
        }
        out += ")";
    }
    return out + "})";
}

std::string render_guard(const GuardPtr& g) { return fmt_formula(guard_to_formula(g)); }

std::string render_policy(const FormulaPtr& f) { return fmt_formula(f); }

}  // namespace encaudit
