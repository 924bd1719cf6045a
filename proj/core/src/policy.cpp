#include "encaudit/policy.hpp"

#include <cctype>

namespace encaudit {

static bool valid_var_name(const std::string& n) {
    if (n.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(n[0])) && n[0] != '_') return false;
    for (char c : n)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

Term Term::variable(std::string name) {
    if (!valid_var_name(name)) throw Error("bad variable name: " + name);
    Term t;
    t.var_ = std::move(name);
    return t;
}

const std::string& Term::var() const {
    if (!is_var()) throw Error("term is a constant");
    return var_;
}
const Value& Term::val() const {
    if (is_var()) throw Error("term is a variable");
    return value_;
}

GuardPtr g_atom(Atom a) { return std::make_shared<Guard>(Guard::Node{std::move(a)}); }
GuardPtr g_true() { return std::make_shared<Guard>(Guard::Node{GTrue{}}); }
GuardPtr g_false() { return std::make_shared<Guard>(Guard::Node{GFalse{}}); }
GuardPtr g_and(GuardPtr l, GuardPtr r) {
    return std::make_shared<Guard>(Guard::Node{GAnd{std::move(l), std::move(r)}});
}
GuardPtr g_or(GuardPtr l, GuardPtr r) {
    return std::make_shared<Guard>(Guard::Node{GOr{std::move(l), std::move(r)}});
}
GuardPtr g_exists(std::string var, GuardPtr body) {
    return std::make_shared<Guard>(Guard::Node{GExists{std::move(var), std::move(body)}});
}

FormulaPtr f_atom(Atom a) { return std::make_shared<Formula>(Formula::Node{std::move(a)}); }
FormulaPtr f_true() { return std::make_shared<Formula>(Formula::Node{FTrue{}}); }
FormulaPtr f_false() { return std::make_shared<Formula>(Formula::Node{FFalse{}}); }
FormulaPtr f_and(FormulaPtr l, FormulaPtr r) {
    return std::make_shared<Formula>(Formula::Node{FAnd{std::move(l), std::move(r)}});
}
FormulaPtr f_or(FormulaPtr l, FormulaPtr r) {
    return std::make_shared<Formula>(Formula::Node{FOr{std::move(l), std::move(r)}});
}
FormulaPtr f_forall(std::vector<std::string> vars, GuardPtr g, FormulaPtr body) {
    if (vars.empty()) throw Error("forall with no variables");
    if (!g || !body) throw Error("forall requires a guard and a body");
    return std::make_shared<Formula>(Formula::Node{FForall{std::move(vars), std::move(g), std::move(body)}});
}
FormulaPtr f_exists(std::vector<std::string> vars, GuardPtr g, FormulaPtr body) {
    if (vars.empty()) throw Error("exists with no variables");
    if (!g || !body) throw Error("exists requires a guard and a body");
    return std::make_shared<Formula>(Formula::Node{FExists{std::move(vars), std::move(g), std::move(body)}});
}

bool is_true(const FormulaPtr& f) { return std::holds_alternative<FTrue>(f->node); }
bool is_false(const FormulaPtr& f) { return std::holds_alternative<FFalse>(f->node); }

static bool atom_equal(const Atom& a, const Atom& b) { return a == b; }

bool equal(const GuardPtr& a, const GuardPtr& b) {
    if (a.get() == b.get()) return true;
    if (a->node.index() != b->node.index()) return false;
    if (auto* pa = std::get_if<Atom>(&a->node)) return atom_equal(*pa, std::get<Atom>(b->node));
    if (std::holds_alternative<GTrue>(a->node) || std::holds_alternative<GFalse>(a->node)) return true;
    if (auto* ga = std::get_if<GAnd>(&a->node)) {
        auto& gb = std::get<GAnd>(b->node);
        return equal(ga->l, gb.l) && equal(ga->r, gb.r);
    }
    if (auto* ga = std::get_if<GOr>(&a->node)) {
        auto& gb = std::get<GOr>(b->node);
        return equal(ga->l, gb.l) && equal(ga->r, gb.r);
    }
    auto& ea = std::get<GExists>(a->node);
    auto& eb = std::get<GExists>(b->node);
    return ea.var == eb.var && equal(ea.body, eb.body);
}

bool equal(const FormulaPtr& a, const FormulaPtr& b) {
    if (a.get() == b.get()) return true;
    if (a->node.index() != b->node.index()) return false;
    if (auto* pa = std::get_if<Atom>(&a->node)) return atom_equal(*pa, std::get<Atom>(b->node));
    if (std::holds_alternative<FTrue>(a->node) || std::holds_alternative<FFalse>(a->node)) return true;
    if (auto* fa = std::get_if<FAnd>(&a->node)) {
        auto& fb = std::get<FAnd>(b->node);
        return equal(fa->l, fb.l) && equal(fa->r, fb.r);
    }
    if (auto* fa = std::get_if<FOr>(&a->node)) {
        auto& fb = std::get<FOr>(b->node);
        return equal(fa->l, fb.l) && equal(fa->r, fb.r);
    }
    if (auto* fa = std::get_if<FForall>(&a->node)) {
        auto& fb = std::get<FForall>(b->node);
        return fa->vars == fb.vars && equal(fa->guard, fb.guard) && equal(fa->body, fb.body);
    }
    auto& ea = std::get<FExists>(a->node);
    auto& eb = std::get<FExists>(b->node);
    return ea.vars == eb.vars && equal(ea.guard, eb.guard) && equal(ea.body, eb.body);
}

GuardPtr formula_to_guard(const FormulaPtr& f) {
    if (auto* a = std::get_if<Atom>(&f->node)) return g_atom(*a);
    if (std::holds_alternative<FTrue>(f->node)) return g_true();
    if (std::holds_alternative<FFalse>(f->node)) return g_false();
    if (auto* n = std::get_if<FAnd>(&f->node)) return g_and(formula_to_guard(n->l), formula_to_guard(n->r));
    if (auto* n = std::get_if<FOr>(&f->node)) return g_or(formula_to_guard(n->l), formula_to_guard(n->r));
    if (auto* n = std::get_if<FExists>(&f->node)) {
        GuardPtr inner = is_true(n->body) ? n->guard : g_and(n->guard, formula_to_guard(n->body));
        for (auto it = n->vars.rbegin(); it != n->vars.rend(); ++it)
            inner = g_exists(*it, inner);
        return inner;
    }
    throw Error("forall is not allowed inside a guard");
}

FormulaPtr guard_to_formula(const GuardPtr& g) {
    if (auto* a = std::get_if<Atom>(&g->node)) return f_atom(*a);
    if (std::holds_alternative<GTrue>(g->node)) return f_true();
    if (std::holds_alternative<GFalse>(g->node)) return f_false();
    if (auto* n = std::get_if<GAnd>(&g->node)) return f_and(guard_to_formula(n->l), guard_to_formula(n->r));
    if (auto* n = std::get_if<GOr>(&g->node)) return f_or(guard_to_formula(n->l), guard_to_formula(n->r));
    auto& e = std::get<GExists>(g->node);
    return f_exists({e.var}, e.body, f_true());
}

// ---- walkers ----

namespace {

void atom_constants(const Atom& a, std::set<ConstOcc>& out) {
    if (auto* p = std::get_if<PredAtom>(&a)) {
        for (size_t i = 0; i < p->args.size(); ++i)
            if (p->args[i].is_const())
                out.insert({p->args[i].val(), p->pred, static_cast<int>(i) + 1});
    } else if (auto* t = std::get_if<TimeOrderAtom>(&a)) {
        const Term* ts[4] = {&t->t1, &t->d1, &t->t2, &t->d2};
        for (int i = 0; i < 4; ++i)
            if (ts[i]->is_const()) out.insert({ts[i]->val(), "timeOrder", i + 1});
    } else if (auto* e = std::get_if<EqAtom>(&a)) {
        if (e->lhs.is_const()) out.insert({e->lhs.val(), "=", 1});
        if (e->rhs.is_const()) out.insert({e->rhs.val(), "=", 2});
    }
    // NotIn tuples hold audit-produced values, not policy constants.
}

void guard_constants(const GuardPtr& g, std::set<ConstOcc>& out) {
    if (auto* a = std::get_if<Atom>(&g->node)) atom_constants(*a, out);
    else if (auto* n = std::get_if<GAnd>(&g->node)) { guard_constants(n->l, out); guard_constants(n->r, out); }
    else if (auto* n = std::get_if<GOr>(&g->node)) { guard_constants(n->l, out); guard_constants(n->r, out); }
    else if (auto* n = std::get_if<GExists>(&g->node)) guard_constants(n->body, out);
}

void formula_constants(const FormulaPtr& f, std::set<ConstOcc>& out) {
    if (auto* a = std::get_if<Atom>(&f->node)) atom_constants(*a, out);
    else if (auto* n = std::get_if<FAnd>(&f->node)) { formula_constants(n->l, out); formula_constants(n->r, out); }
    else if (auto* n = std::get_if<FOr>(&f->node)) { formula_constants(n->l, out); formula_constants(n->r, out); }
    else if (auto* n = std::get_if<FForall>(&f->node)) { guard_constants(n->guard, out); formula_constants(n->body, out); }
    else if (auto* n = std::get_if<FExists>(&f->node)) { guard_constants(n->guard, out); formula_constants(n->body, out); }
}

}  // namespace

std::set<ConstOcc> constants_of(const FormulaPtr& f) {
    std::set<ConstOcc> out;
    formula_constants(f, out);
    return out;
}

std::set<int64_t> displacements_of(const FormulaPtr& f) {
    std::set<int64_t> out{0};
    for (const auto& occ : constants_of(f))
        if (occ.pred == "timeOrder" && (occ.pos == 2 || occ.pos == 4))
            out.insert(occ.value.as_int());
    return out;
}

ConstantSets ConstantSets::from_policy(const FormulaPtr& f) {
    ConstantSets cs;
    for (const auto& occ : constants_of(f)) cs.c.insert(occ.value);
    cs.d = displacements_of(f);
    for (int64_t d : cs.d) {
        if (d < 0) throw Error("negative displacement " + std::to_string(d));
        cs.c.insert(Value::of_int(d));
    }
    return cs;
}

// ---- substitution application ----

namespace {

Term subst_term(const Term& t, const TermSubst& s) {
    if (t.is_var()) {
        auto it = s.find(t.var());
        if (it != s.end()) return it->second;
    }
    return t;
}

Atom subst_atom(const Atom& a, const TermSubst& s) {
    if (auto* p = std::get_if<PredAtom>(&a)) {
        PredAtom out{p->pred, {}};
        out.args.reserve(p->args.size());
        for (const auto& t : p->args) out.args.push_back(subst_term(t, s));
        return out;
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a))
        return TimeOrderAtom{subst_term(t->t1, s), subst_term(t->d1, s),
                             subst_term(t->t2, s), subst_term(t->d2, s)};
    if (auto* e = std::get_if<EqAtom>(&a))
        return EqAtom{subst_term(e->lhs, s), subst_term(e->rhs, s)};
    return a;  // NotIn: variable list is positional, not a term
}

TermSubst without(const TermSubst& s, const std::vector<std::string>& vars) {
    TermSubst out = s;
    for (const auto& v : vars) out.erase(v);
    return out;
}

}  // namespace

GuardPtr apply_substitution(const GuardPtr& g, const TermSubst& s) {
    if (s.empty()) return g;
    if (auto* a = std::get_if<Atom>(&g->node)) return g_atom(subst_atom(*a, s));
    if (std::holds_alternative<GTrue>(g->node) || std::holds_alternative<GFalse>(g->node)) return g;
    if (auto* n = std::get_if<GAnd>(&g->node)) return g_and(apply_substitution(n->l, s), apply_substitution(n->r, s));
    if (auto* n = std::get_if<GOr>(&g->node)) return g_or(apply_substitution(n->l, s), apply_substitution(n->r, s));
    auto& e = std::get<GExists>(g->node);
    TermSubst inner = without(s, {e.var});
    return g_exists(e.var, apply_substitution(e.body, inner));
}

FormulaPtr apply_substitution(const FormulaPtr& f, const TermSubst& s) {
    if (s.empty()) return f;
    if (auto* a = std::get_if<Atom>(&f->node)) return f_atom(subst_atom(*a, s));
    if (std::holds_alternative<FTrue>(f->node) || std::holds_alternative<FFalse>(f->node)) return f;
    if (auto* n = std::get_if<FAnd>(&f->node)) return f_and(apply_substitution(n->l, s), apply_substitution(n->r, s));
    if (auto* n = std::get_if<FOr>(&f->node)) return f_or(apply_substitution(n->l, s), apply_substitution(n->r, s));
    if (auto* n = std::get_if<FForall>(&f->node)) {
        TermSubst inner = without(s, n->vars);
        return f_forall(n->vars, apply_substitution(n->guard, inner), apply_substitution(n->body, inner));
    }
    auto& e = std::get<FExists>(f->node);
    TermSubst inner = without(s, e.vars);
    return f_exists(e.vars, apply_substitution(e.guard, inner), apply_substitution(e.body, inner));
}

// ---- free variables ----

std::set<std::string> free_vars(const Atom& a) {
    std::set<std::string> out;
    if (auto* p = std::get_if<PredAtom>(&a)) {
        for (const auto& t : p->args)
            if (t.is_var()) out.insert(t.var());
    } else if (auto* t = std::get_if<TimeOrderAtom>(&a)) {
        for (const Term* x : {&t->t1, &t->d1, &t->t2, &t->d2})
            if (x->is_var()) out.insert(x->var());
    } else if (auto* e = std::get_if<EqAtom>(&a)) {
        if (e->lhs.is_var()) out.insert(e->lhs.var());
        if (e->rhs.is_var()) out.insert(e->rhs.var());
    } else if (auto* n = std::get_if<NotInAtom>(&a)) {
        out.insert(n->vars.begin(), n->vars.end());
    }
    return out;
}

std::set<std::string> free_vars(const GuardPtr& g) {
    if (auto* a = std::get_if<Atom>(&g->node)) return free_vars(*a);
    std::set<std::string> out;
    if (auto* n = std::get_if<GAnd>(&g->node)) {
        out = free_vars(n->l);
        auto r = free_vars(n->r);
        out.insert(r.begin(), r.end());
    } else if (auto* n = std::get_if<GOr>(&g->node)) {
        out = free_vars(n->l);
        auto r = free_vars(n->r);
        out.insert(r.begin(), r.end());
    } else if (auto* n = std::get_if<GExists>(&g->node)) {
        out = free_vars(n->body);
        out.erase(n->var);
    }
    return out;
}

std::set<std::string> free_vars(const FormulaPtr& f) {
    if (auto* a = std::get_if<Atom>(&f->node)) return free_vars(*a);
    std::set<std::string> out;
    if (auto* n = std::get_if<FAnd>(&f->node)) {
        out = free_vars(n->l);
        auto r = free_vars(n->r);
        out.insert(r.begin(), r.end());
    } else if (auto* n = std::get_if<FOr>(&f->node)) {
        out = free_vars(n->l);
        auto r = free_vars(n->r);
        out.insert(r.begin(), r.end());
    } else if (auto* n = std::get_if<FForall>(&f->node)) {
        out = free_vars(n->guard);
        auto b = free_vars(n->body);
        out.insert(b.begin(), b.end());
        for (const auto& v : n->vars) out.erase(v);
    } else if (auto* n = std::get_if<FExists>(&f->node)) {
        out = free_vars(n->guard);
        auto b = free_vars(n->body);
        out.insert(b.begin(), b.end());
        for (const auto& v : n->vars) out.erase(v);
    }
    return out;
}

size_t ast_size(const GuardPtr& g) {
    if (std::holds_alternative<Atom>(g->node) || std::holds_alternative<GTrue>(g->node) ||
        std::holds_alternative<GFalse>(g->node))
        return 1;
    if (auto* n = std::get_if<GAnd>(&g->node)) return 1 + ast_size(n->l) + ast_size(n->r);
    if (auto* n = std::get_if<GOr>(&g->node)) return 1 + ast_size(n->l) + ast_size(n->r);
    return 1 + ast_size(std::get<GExists>(g->node).body);
}

size_t ast_size(const FormulaPtr& f) {
    if (std::holds_alternative<Atom>(f->node) || std::holds_alternative<FTrue>(f->node) ||
        std::holds_alternative<FFalse>(f->node))
        return 1;
    if (auto* n = std::get_if<FAnd>(&f->node)) return 1 + ast_size(n->l) + ast_size(n->r);
    if (auto* n = std::get_if<FOr>(&f->node)) return 1 + ast_size(n->l) + ast_size(n->r);
    if (auto* n = std::get_if<FForall>(&f->node)) return 1 + ast_size(n->guard) + ast_size(n->body);
    auto& e = std::get<FExists>(f->node);
    return 1 + ast_size(e.guard) + ast_size(e.body);
}

}  // namespace encaudit
