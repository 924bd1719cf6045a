#include "encaudit/audit.hpp"

#include <algorithm>

#include "encaudit/crypto.hpp"

namespace encaudit {

std::string TraceEvent::str() const {
    switch (kind) {
        case Kind::EqCompare: return "eq " + src.str() + " -> " + dst.str();
        case Kind::Select: return "select " + table;
        case Kind::Lookup: return "lookup " + table;
        case Kind::TimeOrder: return "timeorder";
    }
    throw Error("unreachable");
}

TokenIndex::TokenIndex(const TokenList& tokens) {
    for (const auto& t : tokens) m_[{t.src, t.dst}] = t.delta;
}

const Bytes* TokenIndex::find(const Provenance& src, const Provenance& dst) const {
    auto it = m_.find({src, dst});
    return it == m_.end() ? nullptr : &it->second;
}

AuditEngine::AuditEngine(const Log& log, AuditConfig cfg) : log_(log), cfg_(cfg) {}

void AuditEngine::trace_eq(const Provenance& src, const Provenance& dst) {
    if (cfg_.trace) cfg_.trace->push_back({TraceEvent::Kind::EqCompare, src, dst, ""});
}

Bytes AuditEngine::hash_or_bytes(const Value& v) const {
    switch (v.kind()) {
        case Value::Kind::Det: return v.det_bytes();
        case Value::Kind::Kh: return v.kh_hash();
        default: throw EvalError("expected an encrypted value");
    }
}

AuditEngine::Resolved AuditEngine::resolve(const Term& t, const Substitution& sigma) const {
    if (t.is_var()) {
        const BoundVal& bv = sigma.at(t.var());
        return {bv.value, bv.prov, true};
    }
    return {t.val(), t.origin(), false};
}

// Moves a bound value into a target column's key space. Under KH this is a
// hash adjustment through the (source, target) token; under DET/plain the
// shared class key already makes ciphertexts comparable.
Value AuditEngine::constraint_value(const BoundVal& bv, const Provenance& target) {
    trace_eq(bv.prov, target);
    if (cfg_.scheme != Scheme::Kh || bv.prov == target) return bv.value;
    if (!cfg_.tokens) throw MissingTokenError(bv.prov.str(), target.str());
    const Bytes* delta = cfg_.tokens->find(bv.prov, target);
    if (!delta) throw MissingTokenError(bv.prov.str(), target.str());
    return Value::kh(akh_adjust(bv.value.kh_hash(), *delta), bv.value.kh_cipher());
}

bool AuditEngine::eval_time_order(const TimeOrderAtom& a, const Substitution& sigma) {
    Resolved t1 = resolve(a.t1, sigma), d1 = resolve(a.d1, sigma);
    Resolved t2 = resolve(a.t2, sigma), d2 = resolve(a.d2, sigma);
    if (cfg_.trace) cfg_.trace->push_back({TraceEvent::Kind::TimeOrder, {}, {}, ""});
    if (cfg_.scheme == Scheme::Plain)
        return t1.value.as_int() + d1.value.as_int() <= t2.value.as_int() + d2.value.as_int();
    if (!cfg_.moped) throw EvalError("no mOPED structure attached to this audit");
    return cfg_.moped->time_order(hash_or_bytes(t1.value), hash_or_bytes(d1.value),
                                  hash_or_bytes(t2.value), hash_or_bytes(d2.value));
}

bool AuditEngine::eval_eq(const EqAtom& a, const Substitution& sigma) {
    Resolved l = resolve(a.lhs, sigma), r = resolve(a.rhs, sigma);
    if (l.prov && r.prov) {
        trace_eq(*l.prov, *r.prov);
        if (cfg_.scheme == Scheme::Kh && *l.prov != *r.prov) {
            if (!cfg_.tokens) throw MissingTokenError(l.prov->str(), r.prov->str());
            const Bytes* delta = cfg_.tokens->find(*l.prov, *r.prov);
            if (!delta) throw MissingTokenError(l.prov->str(), r.prov->str());
            return akh_adjust(l.value.kh_hash(), *delta) == r.value.kh_hash();
        }
    }
    return l.value.compare_key() == r.value.compare_key();
}

bool AuditEngine::notin_member(const NotInAtom& a, const Substitution& sigma) const {
    std::vector<std::pair<Bytes, Provenance>> tuple;
    for (const auto& v : a.vars) {
        const BoundVal& bv = sigma.at(v);
        tuple.emplace_back(bv.value.compare_key(), bv.prov);
    }
    for (const auto& ex : a.excluded) {
        bool match = true;
        for (size_t i = 0; i < tuple.size(); ++i) {
            if (ex[i].value.compare_key() != tuple[i].first || ex[i].prov != tuple[i].second) {
                match = false;
                break;
            }
        }
        if (match) return true;
    }
    return false;
}

SubstitutionSet AuditEngine::esat(const Atom& a, const Substitution& sigma) {
    SubstitutionSet out(cfg_.scheme);
    if (auto* p = std::get_if<PredAtom>(&a)) {
        std::vector<ColumnConstraint> cs;
        std::vector<std::pair<std::string, int>> outputs;  // var, position
        for (size_t j = 0; j < p->args.size(); ++j) {
            const Term& t = p->args[j];
            Provenance here{p->pred, static_cast<int>(j) + 1};
            if (t.is_const()) {
                cs.push_back({here.col, t.val()});
            } else if (sigma.contains(t.var())) {
                cs.push_back({here.col, constraint_value(sigma.at(t.var()), here)});
            } else {
                for (const auto& [v, pos] : outputs)
                    if (v == t.var())
                        throw EvalError("variable " + v + " repeated unbound in " +
                                        render_atom(a));
                outputs.emplace_back(t.var(), here.col);
            }
        }
        if (cfg_.trace) cfg_.trace->push_back({TraceEvent::Kind::Select, {}, {}, p->pred});
        const auto& rows = log_.rows(p->pred);
        for (size_t id : log_.constrained_select(p->pred, cs)) {
            Substitution next = sigma;
            for (const auto& [var, pos] : outputs)
                next.bind(var, {rows[id][static_cast<size_t>(pos) - 1],
                                Provenance{p->pred, pos}});
            out.insert(std::move(next));
        }
        return out;
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a)) {
        if (eval_time_order(*t, sigma)) out.insert(sigma);
        return out;
    }
    if (auto* e = std::get_if<EqAtom>(&a)) {
        bool lb = e->lhs.is_const() || sigma.contains(e->lhs.var());
        bool rb = e->rhs.is_const() || sigma.contains(e->rhs.var());
        if (lb && rb) {
            if (eval_eq(*e, sigma)) out.insert(sigma);
            return out;
        }
        if (!lb && !rb) throw EvalError("both sides unbound in " + render_atom(a));
        const Term& ground = lb ? e->lhs : e->rhs;
        const Term& open = lb ? e->rhs : e->lhs;
        if (ground.is_const())
            throw EvalError("cannot bind " + open.var() + " from a constant");
        Substitution next = sigma;
        next.bind(open.var(), sigma.at(ground.var()));
        out.insert(std::move(next));
        return out;
    }
    auto& n = std::get<NotInAtom>(a);
    if (!notin_member(n, sigma)) out.insert(sigma);
    return out;
}

SubstitutionSet AuditEngine::esat_hat(const GuardPtr& g, const Substitution& sigma) {
    if (auto* a = std::get_if<Atom>(&g->node)) return esat(*a, sigma);
    SubstitutionSet out(cfg_.scheme);
    if (std::holds_alternative<GTrue>(g->node)) {
        out.insert(sigma);
        return out;
    }
    if (std::holds_alternative<GFalse>(g->node)) return out;
    if (auto* n = std::get_if<GAnd>(&g->node)) {
        SubstitutionSet left = esat_hat(n->l, sigma);
        for (const auto& s : left.items()) {
            SubstitutionSet right = esat_hat(n->r, s);
            for (const auto& r : right.items()) out.insert(r);
        }
        return out;
    }
    if (auto* n = std::get_if<GOr>(&g->node)) {
        for (const auto& s : esat_hat(n->l, sigma).items()) out.insert(s);
        for (const auto& s : esat_hat(n->r, sigma).items()) out.insert(s);
        return out;
    }
    auto& e = std::get<GExists>(g->node);
    for (const auto& s : esat_hat(e.body, sigma).items()) {
        Substitution stripped = s;
        stripped.erase(e.var);
        out.insert(std::move(stripped));
    }
    return out;
}

// ---- residual grounding ----

Atom AuditEngine::ground_atom(const Atom& a, const Substitution& sigma,
                              const std::set<std::string>& shadowed) {
    auto bound = [&](const Term& t) {
        return t.is_var() && !shadowed.count(t.var()) && sigma.contains(t.var());
    };
    if (auto* p = std::get_if<PredAtom>(&a)) {
        PredAtom out{p->pred, {}};
        for (size_t j = 0; j < p->args.size(); ++j) {
            const Term& t = p->args[j];
            if (bound(t)) {
                const BoundVal& bv = sigma.at(t.var());
                Provenance here{p->pred, static_cast<int>(j) + 1};
                out.args.push_back(Term::constant(constraint_value(bv, here), bv.prov));
            } else {
                out.args.push_back(t);
            }
        }
        return out;
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a)) {
        auto map = [&](const Term& x) {
            if (!bound(x)) return x;
            const BoundVal& bv = sigma.at(x.var());
            return Term::constant(bv.value, bv.prov);  // already in K_time space
        };
        return TimeOrderAtom{map(t->t1), map(t->d1), map(t->t2), map(t->d2)};
    }
    if (auto* e = std::get_if<EqAtom>(&a)) {
        auto map = [&](const Term& x) {
            if (!bound(x)) return x;
            const BoundVal& bv = sigma.at(x.var());
            return Term::constant(bv.value, bv.prov);  // origin drives later compares
        };
        return EqAtom{map(e->lhs), map(e->rhs)};
    }
    return a;  // NotIn variables are always locally quantified
}

GuardPtr AuditEngine::ground_guard(const GuardPtr& g, const Substitution& sigma,
                                   const std::set<std::string>& shadowed) {
    if (sigma.empty()) return g;
    if (auto* a = std::get_if<Atom>(&g->node)) return g_atom(ground_atom(*a, sigma, shadowed));
    if (std::holds_alternative<GTrue>(g->node) || std::holds_alternative<GFalse>(g->node))
        return g;
    if (auto* n = std::get_if<GAnd>(&g->node))
        return g_and(ground_guard(n->l, sigma, shadowed), ground_guard(n->r, sigma, shadowed));
    if (auto* n = std::get_if<GOr>(&g->node))
        return g_or(ground_guard(n->l, sigma, shadowed), ground_guard(n->r, sigma, shadowed));
    auto& e = std::get<GExists>(g->node);
    std::set<std::string> inner = shadowed;
    inner.insert(e.var);
    return g_exists(e.var, ground_guard(e.body, sigma, inner));
}

FormulaPtr AuditEngine::ground_formula(const FormulaPtr& f, const Substitution& sigma,
                                       const std::set<std::string>& shadowed) {
    if (sigma.empty()) return f;
    if (auto* a = std::get_if<Atom>(&f->node)) return f_atom(ground_atom(*a, sigma, shadowed));
    if (std::holds_alternative<FTrue>(f->node) || std::holds_alternative<FFalse>(f->node))
        return f;
    if (auto* n = std::get_if<FAnd>(&f->node))
        return f_and(ground_formula(n->l, sigma, shadowed), ground_formula(n->r, sigma, shadowed));
    if (auto* n = std::get_if<FOr>(&f->node))
        return f_or(ground_formula(n->l, sigma, shadowed), ground_formula(n->r, sigma, shadowed));
    if (auto* n = std::get_if<FForall>(&f->node)) {
        std::set<std::string> inner = shadowed;
        inner.insert(n->vars.begin(), n->vars.end());
        return f_forall(n->vars, ground_guard(n->guard, sigma, inner),
                        ground_formula(n->body, sigma, inner));
    }
    auto& e = std::get<FExists>(f->node);
    std::set<std::string> inner = shadowed;
    inner.insert(e.vars.begin(), e.vars.end());
    return f_exists(e.vars, ground_guard(e.guard, sigma, inner),
                    ground_formula(e.body, sigma, inner));
}

bool AuditEngine::guard_tables_complete(const GuardPtr& g) const {
    if (auto* a = std::get_if<Atom>(&g->node)) {
        if (auto* p = std::get_if<PredAtom>(a)) return log_.schema.at(p->pred).complete;
        return true;
    }
    if (auto* n = std::get_if<GAnd>(&g->node))
        return guard_tables_complete(n->l) && guard_tables_complete(n->r);
    if (auto* n = std::get_if<GOr>(&g->node))
        return guard_tables_complete(n->l) && guard_tables_complete(n->r);
    if (auto* n = std::get_if<GExists>(&g->node)) return guard_tables_complete(n->body);
    return true;
}

// ---- reduce ----

FormulaPtr AuditEngine::reduce_atom(const Atom& a, const Substitution& sigma) {
    if (auto* p = std::get_if<PredAtom>(&a)) {
        Atom grounded = ground_atom(a, sigma, {});
        auto& gp = std::get<PredAtom>(grounded);
        for (const auto& t : gp.args)
            if (t.is_var()) throw EvalError("formula atom not ground: " + render_atom(a));
        if (cfg_.trace) cfg_.trace->push_back({TraceEvent::Kind::Lookup, {}, {}, p->pred});
        switch (log_.lookup(gp)) {
            case Lookup3::True: return f_true();
            case Lookup3::False: return f_false();
            case Lookup3::Unknown: return f_atom(grounded);  // re-auditable without keys
        }
        throw Error("unreachable");
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a))
        return eval_time_order(*t, sigma) ? f_true() : f_false();
    if (auto* e = std::get_if<EqAtom>(&a)) return eval_eq(*e, sigma) ? f_true() : f_false();
    auto& n = std::get<NotInAtom>(a);
    return notin_member(n, sigma) ? f_false() : f_true();
}

namespace {

// residual guard already carrying an exclusion set for these vars
bool split_notin(const GuardPtr& g, const std::vector<std::string>& vars, GuardPtr& base,
                 std::vector<std::vector<BoundVal>>& excluded) {
    if (auto* n = std::get_if<GAnd>(&g->node)) {
        if (auto* a = std::get_if<Atom>(&n->r->node)) {
            if (auto* ni = std::get_if<NotInAtom>(a)) {
                if (ni->vars == vars) {
                    base = n->l;
                    excluded = ni->excluded;
                    return true;
                }
            }
        }
    }
    return false;
}

Bytes tuple_key(const std::vector<BoundVal>& tuple) {
    Bytes out;
    for (const auto& bv : tuple) {
        out += bv.value.compare_key();
        out.push_back('\x1f');
        out += bv.prov.str();
        out.push_back('\x1e');
    }
    return out;
}

}  // namespace

// residual quantifier: same guard with the satisfied tuples excluded (an
// existing exclusion merges), bound context substituted in
std::pair<GuardPtr, FormulaPtr> AuditEngine::residual_parts(
    const std::vector<std::string>& vars, const GuardPtr& g, const FormulaPtr& body,
    const Substitution& sigma, const SubstitutionSet& sat) {
    GuardPtr base = g;
    std::vector<std::vector<BoundVal>> excluded;
    split_notin(g, vars, base, excluded);
    std::set<Bytes> seen;
    for (const auto& t : excluded) seen.insert(tuple_key(t));
    for (const auto& s : sat.items()) {
        std::vector<BoundVal> tuple;
        for (const auto& v : vars) tuple.push_back(s.at(v));
        if (seen.insert(tuple_key(tuple)).second) excluded.push_back(std::move(tuple));
    }
    std::set<std::string> shadowed(vars.begin(), vars.end());
    GuardPtr with_notin = g_and(ground_guard(base, sigma, shadowed),
                                g_atom(NotInAtom{vars, std::move(excluded)}));
    return {with_notin, ground_formula(body, sigma, shadowed)};
}

FormulaPtr AuditEngine::reduce_raw(const FormulaPtr& f, const Substitution& sigma) {
    if (auto* a = std::get_if<Atom>(&f->node)) return reduce_atom(*a, sigma);
    if (std::holds_alternative<FTrue>(f->node) || std::holds_alternative<FFalse>(f->node))
        return f;
    if (auto* n = std::get_if<FAnd>(&f->node))
        return f_and(reduce_raw(n->l, sigma), reduce_raw(n->r, sigma));
    if (auto* n = std::get_if<FOr>(&f->node))
        return f_or(reduce_raw(n->l, sigma), reduce_raw(n->r, sigma));

    if (auto* n = std::get_if<FForall>(&f->node)) {
        SubstitutionSet sat = esat_hat(n->guard, sigma);
        FormulaPtr conj = f_true();
        bool first = true;
        for (const auto& s : sat.items()) {
            FormulaPtr part = reduce_raw(n->body, s);
            conj = first ? part : f_and(conj, part);
            first = false;
        }
        if (guard_tables_complete(n->guard)) return conj;  // satisfier set is final
        auto [guard, body] = residual_parts(n->vars, n->guard, n->body, sigma, sat);
        FormulaPtr residual = f_forall(n->vars, guard, body);
        return first ? residual : f_and(conj, residual);
    }

    auto& e = std::get<FExists>(f->node);
    SubstitutionSet sat = esat_hat(e.guard, sigma);
    FormulaPtr disj = f_false();
    bool first = true;
    for (const auto& s : sat.items()) {
        FormulaPtr part = reduce_raw(e.body, s);
        disj = first ? part : f_or(disj, part);
        first = false;
    }
    if (guard_tables_complete(e.guard)) return disj;
    // dual: a future extension may still produce a witness
    auto [guard, body] = residual_parts(e.vars, e.guard, e.body, sigma, sat);
    FormulaPtr residual = f_exists(e.vars, guard, body);
    return first ? residual : f_or(disj, residual);
}

FormulaPtr AuditEngine::ereduce(const FormulaPtr& f, const Substitution& sigma) {
    return simplify(reduce_raw(f, sigma), &log_);
}

FormulaPtr reduce(const Log& log, const FormulaPtr& f, const Substitution& sigma,
                  QueryTrace* trace) {
    AuditEngine engine(log, AuditConfig{Scheme::Plain, nullptr, nullptr, trace});
    return engine.ereduce(f, sigma);
}

// ---- simplify ----

namespace {

void collect_and(const FormulaPtr& f, std::vector<FormulaPtr>& units) {
    if (auto* n = std::get_if<FAnd>(&f->node)) {
        collect_and(n->l, units);
        collect_and(n->r, units);
    } else {
        units.push_back(f);
    }
}

void collect_or(const FormulaPtr& f, std::vector<FormulaPtr>& units) {
    if (auto* n = std::get_if<FOr>(&f->node)) {
        collect_or(n->l, units);
        collect_or(n->r, units);
    } else {
        units.push_back(f);
    }
}

bool guard_complete_in(const Log& store, const GuardPtr& g) {
    if (auto* a = std::get_if<Atom>(&g->node)) {
        if (auto* p = std::get_if<PredAtom>(a)) return store.schema.at(p->pred).complete;
        return true;
    }
    if (auto* n = std::get_if<GAnd>(&g->node))
        return guard_complete_in(store, n->l) && guard_complete_in(store, n->r);
    if (auto* n = std::get_if<GOr>(&g->node))
        return guard_complete_in(store, n->l) && guard_complete_in(store, n->r);
    if (auto* n = std::get_if<GExists>(&g->node)) return guard_complete_in(store, n->body);
    return true;
}

}  // namespace

FormulaPtr simplify(const FormulaPtr& f, const Log* store) {
    if (std::holds_alternative<FAnd>(f->node)) {
        std::vector<FormulaPtr> units;
        collect_and(f, units);
        std::vector<FormulaPtr> kept;
        for (const auto& u : units) {
            FormulaPtr s = simplify(u, store);
            if (is_true(s)) continue;
            if (is_false(s)) return f_false();
            kept.push_back(s);
        }
        if (kept.empty()) return f_true();
        FormulaPtr out = kept[0];
        for (size_t i = 1; i < kept.size(); ++i) out = f_and(out, kept[i]);
        return out;
    }
    if (std::holds_alternative<FOr>(f->node)) {
        std::vector<FormulaPtr> units;
        collect_or(f, units);
        std::vector<FormulaPtr> kept;
        for (const auto& u : units) {
            FormulaPtr s = simplify(u, store);
            if (is_false(s)) continue;
            if (is_true(s)) return f_true();
            kept.push_back(s);
        }
        if (kept.empty()) return f_false();
        FormulaPtr out = kept[0];
        for (size_t i = 1; i < kept.size(); ++i) out = f_or(out, kept[i]);
        return out;
    }
    if (auto* n = std::get_if<FForall>(&f->node)) {
        if (std::holds_alternative<GFalse>(n->guard->node)) return f_true();
        FormulaPtr body = simplify(n->body, store);
        // a vacuously true body can only be dropped once the guard's tables
        // cannot gain satisfiers
        if (is_true(body) && store && guard_complete_in(*store, n->guard)) return f_true();
        return f_forall(n->vars, n->guard, body);
    }
    if (auto* n = std::get_if<FExists>(&f->node)) {
        if (std::holds_alternative<GFalse>(n->guard->node)) return f_false();
        FormulaPtr body = simplify(n->body, store);
        if (is_false(body) && store && guard_complete_in(*store, n->guard)) return f_false();
        return f_exists(n->vars, n->guard, body);
    }
    return f;
}

}  // namespace encaudit
