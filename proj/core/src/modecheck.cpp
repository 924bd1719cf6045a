#include "encaudit/modecheck.hpp"

#include <fstream>
#include <sstream>

namespace encaudit {

void ModeTable::add(ModeSpec spec) {
    if (spec.arity <= 0) throw Error("bad arity for " + spec.pred);
    for (int i : spec.inputs)
        if (i < 1 || i > spec.arity) throw Error("mode position out of range for " + spec.pred);
    for (int i : spec.time_cols)
        if (i < 1 || i > spec.arity) throw Error("time position out of range for " + spec.pred);
    auto [it, fresh] = specs_.emplace(spec.pred, std::move(spec));
    if (!fresh) throw Error("duplicate mode spec for " + it->first);
}

const ModeSpec& ModeTable::find(const std::string& pred) const {
    auto it = specs_.find(pred);
    if (it == specs_.end()) throw Error("unknown predicate: " + pred);
    return it->second;
}

ModeTable ModeTable::parse(const std::string& text) {
    ModeTable table;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw != "pred")
            throw Error("modes line " + std::to_string(lineno) + ": expected 'pred'");
        std::string decl;
        ls >> decl;
        auto slash = decl.find('/');
        if (slash == std::string::npos)
            throw Error("modes line " + std::to_string(lineno) + ": expected NAME/ARITY");
        ModeSpec spec;
        spec.pred = decl.substr(0, slash);
        spec.arity = std::stoi(decl.substr(slash + 1));
        std::string item;
        while (ls >> item) {
            if (item.rfind("modes(", 0) == 0 && item.back() == ')') {
                std::string body = item.substr(6, item.size() - 7);
                int pos = 0;
                std::istringstream ms(body);
                std::string flag;
                while (std::getline(ms, flag, ',')) {
                    ++pos;
                    if (flag == "+") spec.inputs.insert(pos);
                    else if (flag != "-")
                        throw Error("modes line " + std::to_string(lineno) + ": bad flag " + flag);
                }
                if (pos != spec.arity)
                    throw Error("modes line " + std::to_string(lineno) + ": flag count != arity");
            } else if (item.rfind("time(", 0) == 0 && item.back() == ')') {
                std::string body = item.substr(5, item.size() - 6);
                std::istringstream ts(body);
                std::string idx;
                while (std::getline(ts, idx, ',')) spec.time_cols.insert(std::stoi(idx));
            } else {
                throw Error("modes line " + std::to_string(lineno) + ": unexpected " + item);
            }
        }
        table.add(std::move(spec));
    }
    return table;
}

ModeTable ModeTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open modes file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string ModeTable::render() const {
    std::string out;
    for (const auto& [name, spec] : specs_) {
        out += "pred " + name + "/" + std::to_string(spec.arity) + " modes(";
        for (int i = 1; i <= spec.arity; ++i) {
            if (i > 1) out += ",";
            out += spec.is_input(i) ? "+" : "-";
        }
        out += ")";
        if (!spec.time_cols.empty()) {
            out += " time(";
            bool first = true;
            for (int i : spec.time_cols) {
                if (!first) out += ",";
                out += std::to_string(i);
                first = false;
            }
            out += ")";
        }
        out += "\n";
    }
    return out;
}

std::set<std::string> fe(const ModeState& chi) {
    std::set<std::string> out;
    for (const auto& [var, prov] : chi) out.insert(var);
    return out;
}

ModeState merge(const ModeState& a, const ModeState& b) {
    auto va = fe(a), vb = fe(b);
    ModeState out;
    for (const auto& e : a)
        if (vb.count(e.first)) out.insert(e);
    for (const auto& e : b)
        if (va.count(e.first)) out.insert(e);
    return out;
}

std::string render_delta(const EqualityScheme& d) {
    std::string out;
    for (const auto& p : d) out += p.str() + "\n";
    return out;
}

EqualityScheme parse_delta(const std::string& text) {
    EqualityScheme out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string src, arrow, dst;
        if (!(ls >> src)) continue;
        if (!(ls >> arrow >> dst) || arrow != "->") throw Error("bad delta line: " + line);
        out.insert({Provenance::parse(src), Provenance::parse(dst)});
    }
    return out;
}

namespace {

std::set<Provenance> provs_of(const ModeState& chi, const std::string& var) {
    std::set<Provenance> out;
    for (const auto& [v, p] : chi)
        if (v == var) out.insert(p);
    return out;
}

void require_ground(const ModeState& chi, const Term& t, const std::string& atom, int premise) {
    if (t.is_var() && !fe(chi).count(t.var()))
        throw ModeError("unbound variable " + t.var() + " in " + atom, atom, t.var(), premise);
}

void check_displacement(const Term& d, const std::string& atom) {
    if (d.is_const() && d.val().is_plain() && !d.val().is_int())
        throw ModeError("timeOrder displacement must be an integer in " + atom, atom, "", 0);
}

}  // namespace

EqualityScheme ModeChecker::pred_delta(const ModeState& in, const PredAtom& p) const {
    // G-Pred premise 3: one pair per prior provenance of every variable
    // argument, directed prior -> this column.
    EqualityScheme delta;
    for (size_t j = 0; j < p.args.size(); ++j) {
        const Term& t = p.args[j];
        if (!t.is_var()) continue;
        for (const auto& prov : provs_of(in, t.var()))
            delta.insert({prov, Provenance{p.pred, static_cast<int>(j) + 1}});
    }
    return delta;
}

GuardModeResult ModeChecker::check_guard_atom(const ModeState& in, const Atom& a) {
    ++visits_;
    std::string txt = render_atom(a);
    if (auto* p = std::get_if<PredAtom>(&a)) {
        const ModeSpec& spec = modes_.find(p->pred);
        if (static_cast<int>(p->args.size()) != spec.arity)
            throw ModeError("arity mismatch for " + p->pred, txt, "", 0);
        auto bound = fe(in);
        for (int k : spec.inputs) {
            const Term& t = p->args[k - 1];
            if (t.is_var() && !bound.count(t.var()))
                throw ModeError("input-position variable " + t.var() + " unbound in " + txt,
                                txt, t.var(), 1);
        }
        GuardModeResult r{in, pred_delta(in, *p)};
        std::set<std::string> fresh_here;
        for (size_t j = 0; j < p->args.size(); ++j) {
            const Term& t = p->args[j];
            if (!t.is_var() || bound.count(t.var())) continue;
            if (!fresh_here.insert(t.var()).second)
                throw ModeError("variable " + t.var() + " repeated unbound in " + txt,
                                txt, t.var(), 2);
            if (spec.is_output(static_cast<int>(j) + 1))
                r.out.insert({t.var(), Provenance{p->pred, static_cast<int>(j) + 1}});
        }
        return r;
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a)) {
        // fixed mode (+, const, +, const); K_time keys every timestamp column
        // so no delta pairs are recorded
        require_ground(in, t->t1, txt, 1);
        require_ground(in, t->t2, txt, 1);
        check_displacement(t->d1, txt);
        check_displacement(t->d2, txt);
        return {in, {}};
    }
    if (auto* e = std::get_if<EqAtom>(&a)) {
        auto bound = fe(in);
        bool lg = e->lhs.is_const() || bound.count(e->lhs.var());
        bool rg = e->rhs.is_const() || bound.count(e->rhs.var());
        if (lg && rg) {
            EqualityScheme delta;
            if (e->lhs.is_var() && e->rhs.is_var())
                for (const auto& pl : provs_of(in, e->lhs.var()))
                    for (const auto& pr : provs_of(in, e->rhs.var()))
                        delta.insert({pl, pr});
            return {in, std::move(delta)};
        }
        if (!lg && !rg)
            throw ModeError("both sides of " + txt + " unbound", txt, "", 1);
        const Term& ground = lg ? e->lhs : e->rhs;
        const Term& open = lg ? e->rhs : e->lhs;
        if (ground.is_const())
            throw ModeError("cannot bind " + open.var() + " from a constant in " + txt,
                            txt, open.var(), 1);
        GuardModeResult r{in, {}};
        for (const auto& prov : provs_of(in, ground.var()))
            r.out.insert({open.var(), prov});
        return r;
    }
    auto& n = std::get<NotInAtom>(a);
    auto bound = fe(in);
    for (const auto& v : n.vars)
        if (!bound.count(v))
            throw ModeError("notin variable " + v + " unbound", txt, v, 1);
    return {in, {}};
}

GuardModeResult ModeChecker::check_guard(const ModeState& in, const GuardPtr& g) {
    if (auto* a = std::get_if<Atom>(&g->node)) return check_guard_atom(in, *a);
    ++visits_;
    if (std::holds_alternative<GTrue>(g->node) || std::holds_alternative<GFalse>(g->node))
        return {in, {}};
    if (auto* n = std::get_if<GAnd>(&g->node)) {
        GuardModeResult l = check_guard(in, n->l);
        GuardModeResult r = check_guard(l.out, n->r);
        r.delta.insert(l.delta.begin(), l.delta.end());
        return r;
    }
    if (auto* n = std::get_if<GOr>(&g->node)) {
        GuardModeResult l = check_guard(in, n->l);
        GuardModeResult r = check_guard(in, n->r);
        EqualityScheme delta = l.delta;
        delta.insert(r.delta.begin(), r.delta.end());
        return {merge(l.out, r.out), std::move(delta)};
    }
    auto& e = std::get<GExists>(g->node);
    if (fe(in).count(e.var))
        throw ModeError("exists shadows bound variable " + e.var, "exists " + e.var, e.var, 0);
    GuardModeResult b = check_guard(in, e.body);
    ModeState out;
    for (const auto& entry : b.out)
        if (entry.first != e.var) out.insert(entry);
    return {std::move(out), std::move(b.delta)};
}

EqualityScheme ModeChecker::check_formula_atom(const ModeState& in, const Atom& a) {
    ++visits_;
    std::string txt = render_atom(a);
    if (auto* p = std::get_if<PredAtom>(&a)) {
        const ModeSpec& spec = modes_.find(p->pred);
        if (static_cast<int>(p->args.size()) != spec.arity)
            throw ModeError("arity mismatch for " + p->pred, txt, "", 0);
        auto bound = fe(in);
        for (const auto& t : p->args)
            if (t.is_var() && !bound.count(t.var()))
                throw ModeError("variable " + t.var() + " unbound in formula atom " + txt,
                                txt, t.var(), 1);
        return pred_delta(in, *p);
    }
    if (auto* t = std::get_if<TimeOrderAtom>(&a)) {
        require_ground(in, t->t1, txt, 1);
        require_ground(in, t->t2, txt, 1);
        check_displacement(t->d1, txt);
        check_displacement(t->d2, txt);
        return {};
    }
    if (auto* e = std::get_if<EqAtom>(&a)) {
        require_ground(in, e->lhs, txt, 1);
        require_ground(in, e->rhs, txt, 1);
        EqualityScheme delta;
        if (e->lhs.is_var() && e->rhs.is_var())
            for (const auto& pl : provs_of(in, e->lhs.var()))
                for (const auto& pr : provs_of(in, e->rhs.var()))
                    delta.insert({pl, pr});
        return delta;
    }
    auto& n = std::get<NotInAtom>(a);
    auto bound = fe(in);
    for (const auto& v : n.vars)
        if (!bound.count(v))
            throw ModeError("notin variable " + v + " unbound", txt, v, 1);
    return {};
}

EqualityScheme ModeChecker::check_formula(const ModeState& in, const FormulaPtr& f) {
    if (auto* a = std::get_if<Atom>(&f->node)) return check_formula_atom(in, *a);
    ++visits_;
    if (std::holds_alternative<FTrue>(f->node) || std::holds_alternative<FFalse>(f->node))
        return {};
    if (auto* n = std::get_if<FAnd>(&f->node)) {
        // formulas do not ground variables: both branches see the same state
        EqualityScheme l = check_formula(in, n->l);
        EqualityScheme r = check_formula(in, n->r);
        l.insert(r.begin(), r.end());
        return l;
    }
    if (auto* n = std::get_if<FOr>(&f->node)) {
        EqualityScheme l = check_formula(in, n->l);
        EqualityScheme r = check_formula(in, n->r);
        l.insert(r.begin(), r.end());
        return l;
    }
    const std::vector<std::string>* vars;
    const GuardPtr* guard;
    const FormulaPtr* body;
    if (auto* n = std::get_if<FForall>(&f->node)) {
        vars = &n->vars; guard = &n->guard; body = &n->body;
    } else {
        auto& e = std::get<FExists>(f->node);
        vars = &e.vars; guard = &e.guard; body = &e.body;
    }
    auto bound = fe(in);
    for (const auto& v : *vars)
        if (bound.count(v))
            throw ModeError("quantifier shadows bound variable " + v, "", v, 0);
    GuardModeResult g = check_guard(in, *guard);           // premise 1
    auto gbound = fe(g.out);
    for (const auto& v : *vars)
        if (!gbound.count(v))
            throw ModeError("guard does not ground quantified variable " + v, "", v, 2);
    std::set<std::string> allowed = bound;                  // premise 3
    allowed.insert(vars->begin(), vars->end());
    for (const auto& v : free_vars(*guard))
        if (!allowed.count(v))
            throw ModeError("guard mentions unbound variable " + v, "", v, 3);
    EqualityScheme dc = check_formula(g.out, *body);        // premise 4
    dc.insert(g.delta.begin(), g.delta.end());
    return dc;
}

ModeReport is_well_moded(const FormulaPtr& f, const ModeTable& modes) {
    ModeChecker checker(modes);
    ModeReport report;
    try {
        report.delta = checker.check_formula({}, f);
        report.ok = true;
    } catch (const ModeError& e) {
        report.ok = false;
        report.diagnostics = e.what();
        if (e.premise) report.diagnostics += " (premise " + std::to_string(e.premise) + ")";
    }
    report.nodes_visited = checker.visits();
    return report;
}

}  // namespace encaudit
