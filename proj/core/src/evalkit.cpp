#include "encaudit/evalkit.hpp"

#include <algorithm>

#include "encaudit/crypto.hpp"

namespace encaudit {

bool edd(const std::vector<int64_t>& u, const std::vector<int64_t>& v,
         const std::set<int64_t>& disps) {
    if (u.size() != v.size()) return false;
    for (size_t i = 0; i < u.size(); ++i)
        for (size_t j = 0; j < u.size(); ++j)
            for (int64_t d : disps)
                for (int64_t dp : disps)
                    if ((u[i] + d >= u[j] + dp) != (v[i] + d >= v[j] + dp)) return false;
    return true;
}

// ---- plaintext log equivalence ----

namespace {

bool schema_matches(const Schema& a, const Schema& b, std::string& why) {
    if (a.tables.size() != b.tables.size()) {
        why = "table count differs";
        return false;
    }
    for (size_t i = 0; i < a.tables.size(); ++i) {
        const auto& ta = a.tables[i];
        const auto& tb = b.tables[i];
        if (ta.name != tb.name || ta.columns.size() != tb.columns.size() ||
            ta.time_cols != tb.time_cols || ta.complete != tb.complete) {
            why = "schema differs at table " + ta.name;
            return false;
        }
    }
    return true;
}

}  // namespace

EquivalenceResult log_equivalent(const Log& l1, const Log& l2, const EqualityScheme& delta,
                                 const std::set<Value>& consts,
                                 const std::set<int64_t>& disps) {
    EquivalenceResult out;
    if (!schema_matches(l1.schema, l2.schema, out.diagnostic)) return out;
    for (const auto& t : l1.schema.tables)
        if (l1.rows(t.name).size() != l2.rows(t.name).size()) {
            out.diagnostic = "row count differs in " + t.name;
            return out;
        }

    ColumnClasses classes = column_classes(l1.schema, delta);
    out.witness.resize(classes.classes.size());
    std::vector<std::map<Bytes, Bytes>> inverse(classes.classes.size());
    std::set<Bytes> const_keys;
    for (const auto& c : consts) const_keys.insert(c.compare_key());

    for (const auto& t : l1.schema.tables) {
        const auto& r1 = l1.rows(t.name);
        const auto& r2 = l2.rows(t.name);
        for (size_t i = 0; i < r1.size(); ++i) {
            for (size_t c = 0; c < t.columns.size(); ++c) {
                const Value& a = r1[i][c];
                const Value& b = r2[i][c];
                int cls = classes.class_of({t.name, static_cast<int>(c) + 1});
                Bytes ka = a.compare_key(), kb = b.compare_key();
                if (a.kind() != b.kind() || a.canonical().size() != b.canonical().size()) {
                    out.diagnostic = "length or kind mismatch at " + t.name + "[" +
                                     std::to_string(i) + "][" + std::to_string(c) + "]";
                    return out;
                }
                if (const_keys.count(ka) != const_keys.count(kb) ||
                    (const_keys.count(ka) && ka != kb)) {
                    out.diagnostic = "policy constant not fixed at " + t.name;
                    return out;
                }
                auto [it, fresh] = out.witness[cls].emplace(ka, b);
                if (!fresh && it->second.compare_key() != kb) {
                    out.diagnostic = "mapping not functional in class of " + t.name + "." +
                                     std::to_string(c + 1);
                    return out;
                }
                auto [iv, fresh2] = inverse[cls].emplace(kb, ka);
                if (!fresh2 && iv->second != ka) {
                    out.diagnostic = "mapping not injective in class of " + t.name + "." +
                                     std::to_string(c + 1);
                    return out;
                }
            }
        }
    }

    if (!edd(l1.timestamps(), l2.timestamps(), disps)) {
        out.diagnostic = "timestamp sequences not EDD-equal";
        return out;
    }
    out.equivalent = true;
    return out;
}

// ---- dummy logs ----

namespace {

Bytes fresh_string(Rng& rng, const std::string& alphabet, size_t len) {
    Bytes out;
    out.reserve(len);
    for (size_t i = 0; i < len; ++i) out.push_back(alphabet[rng.index(alphabet.size())]);
    return out;
}

}  // namespace

Log make_dummy_log(const Log& log, const EqualityScheme& delta, const std::set<Value>& consts,
                   const std::set<int64_t>& disps, uint64_t seed) {
    Rng rng(seed);
    ColumnClasses classes = column_classes(log.schema, delta);
    std::set<Bytes> const_keys;
    std::set<int64_t> const_ints;
    for (const auto& c : consts) {
        const_keys.insert(c.compare_key());
        if (c.is_int()) const_ints.insert(c.as_int());
    }
    (void)disps;

    // one positive shift keeps every displaced comparison intact; avoid
    // landing a shifted stamp on a policy constant
    auto stamps = log.timestamps();
    int64_t shift = 0;
    for (int tries = 0; tries < 1000; ++tries) {
        int64_t k = rng.uniform(1, 1'000'000);
        bool ok = true;
        for (int64_t t : stamps)
            if (const_ints.count(t) || const_ints.count(t + k)) {
                ok = false;
                break;
            }
        if (ok) {
            shift = k;
            break;
        }
    }
    if (shift == 0) throw Error("cannot find a timestamp shift avoiding policy constants");

    // per-class value domains so replacements stay outside the source domain
    std::vector<std::set<Bytes>> domain(classes.classes.size());
    for (const auto& t : log.schema.tables)
        for (const auto& row : log.rows(t.name))
            for (size_t c = 0; c < row.size(); ++c)
                domain[static_cast<size_t>(classes.class_of({t.name, static_cast<int>(c) + 1}))]
                    .insert(row[c].compare_key());

    std::vector<std::map<Bytes, Value>> mapping(classes.classes.size());
    std::vector<std::set<Bytes>> used(classes.classes.size());
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";

    Log out;
    out.schema = log.schema;
    for (const auto& t : log.schema.tables) {
        for (const auto& row : log.rows(t.name)) {
            Row nrow;
            for (size_t c = 0; c < row.size(); ++c) {
                const Value& v = row[c];
                bool time_col = t.time_cols.count(static_cast<int>(c) + 1) > 0;
                if (time_col) {
                    nrow.push_back(Value::of_int(v.as_int() + shift));
                    continue;
                }
                size_t cls = static_cast<size_t>(
                    classes.class_of({t.name, static_cast<int>(c) + 1}));
                Bytes key = v.compare_key();
                auto it = mapping[cls].find(key);
                if (it != mapping[cls].end()) {
                    nrow.push_back(it->second);
                    continue;
                }
                Value replacement;
                if (const_keys.count(key)) {
                    replacement = v;  // constants are copied verbatim
                } else {
                    int tries = 0;
                    while (true) {
                        if (++tries > 10000)
                            throw Error("fresh-value space exhausted in class " +
                                        std::to_string(cls));
                        Value cand =
                            v.is_int()
                                ? Value::of_int(rng.uniform(0, INT64_MAX / 2))
                                : Value::of_str(fresh_string(rng, alphabet, v.str().size()));
                        Bytes ck = cand.compare_key();
                        if (domain[cls].count(ck) || used[cls].count(ck) || const_keys.count(ck))
                            continue;
                        replacement = cand;
                        break;
                    }
                }
                mapping[cls].emplace(key, replacement);
                used[cls].insert(replacement.compare_key());
                nrow.push_back(replacement);
            }
            out.append_row(t.name, std::move(nrow));
        }
    }
    return out;
}

// ---- injective map family ----

InjectiveMapFamily::InjectiveMapFamily(const Schema& schema, const EqualityScheme& delta,
                                       const std::set<Value>& consts, uint64_t seed)
    : schema_(schema),
      classes_(column_classes(schema, delta, /*fold_time=*/true)),
      rng_(seed),
      time_shift_(0) {
    for (const auto& c : consts) const_keys_.insert(c.compare_key());
    maps_.resize(classes_.classes.size());
    used_.resize(classes_.classes.size());
    time_shift_ = rng_.uniform(1, 1'000'000);
}

Value InjectiveMapFamily::map_in_class(int cls, const Value& v) {
    auto& m = maps_[static_cast<size_t>(cls)];
    auto& used = used_[static_cast<size_t>(cls)];
    Bytes key = v.compare_key();
    if (const_keys_.count(key)) return v;
    auto it = m.find(key);
    if (it != m.end()) return it->second;
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    int tries = 0;
    while (true) {
        if (++tries > 10000) throw Error("injective map space exhausted");
        Value cand = v.is_int() ? Value::of_int(rng_.uniform(0, INT64_MAX / 2))
                                : Value::of_str(fresh_string(rng_, alphabet, v.str().size()));
        Bytes ck = cand.compare_key();
        if (used.count(ck) || const_keys_.count(ck) || ck == key) continue;
        m.emplace(key, cand);
        used.insert(ck);
        return cand;
    }
}

Value InjectiveMapFamily::map_value(const Provenance& col, const Value& v) {
    const TableSchema& t = schema_.at(col.table);
    if (t.time_cols.count(col.col)) return Value::of_int(v.as_int() + time_shift_);
    return map_in_class(classes_.class_of(col), v);
}

Log InjectiveMapFamily::apply(const Log& log) {
    Log out;
    out.schema = log.schema;
    for (const auto& t : log.schema.tables)
        for (const auto& row : log.rows(t.name)) {
            Row nrow;
            for (size_t c = 0; c < row.size(); ++c)
                nrow.push_back(map_value({t.name, static_cast<int>(c) + 1}, row[c]));
            out.append_row(t.name, std::move(nrow));
        }
    return out;
}

namespace {

Term map_term_by(const std::function<Value(const Value&, const std::optional<Provenance>&)>& fn,
                 const Term& t, const std::optional<Provenance>& pos) {
    if (t.is_var()) return t;
    return Term::constant(fn(t.val(), t.origin() ? t.origin() : pos), t.origin());
}

}  // namespace

GuardPtr InjectiveMapFamily::apply(const GuardPtr& g) {
    if (auto* a = std::get_if<Atom>(&g->node)) {
        auto* self = this;
        auto fn = [self](const Value& v, const std::optional<Provenance>& pos) {
            if (!pos) throw Error("cannot apply an injection to an unanchored constant");
            return self->map_value(*pos, v);
        };
        Atom atom = *a;
        if (auto* p = std::get_if<PredAtom>(&atom)) {
            for (size_t j = 0; j < p->args.size(); ++j)
                p->args[j] = map_term_by(fn, p->args[j],
                                         Provenance{p->pred, static_cast<int>(j) + 1});
        } else if (auto* to = std::get_if<TimeOrderAtom>(&atom)) {
            // displacements are policy constants (identity); timestamp
            // constants ride the shared shift
            auto map_time_term = [&](const Term& t, bool displacement) {
                if (t.is_var() || !t.val().is_plain()) return t;
                if (displacement) return t;  // D subset of C, fixed
                return Term::constant(Value::of_int(t.val().as_int() + time_shift_), t.origin());
            };
            to->t1 = map_time_term(to->t1, false);
            to->d1 = map_time_term(to->d1, true);
            to->t2 = map_time_term(to->t2, false);
            to->d2 = map_time_term(to->d2, true);
        } else if (std::get_if<EqAtom>(&atom)) {
            auto* e = std::get_if<EqAtom>(&atom);
            e->lhs = map_term_by(fn, e->lhs, std::nullopt);
            e->rhs = map_term_by(fn, e->rhs, std::nullopt);
        } else {
            auto* n = std::get_if<NotInAtom>(&atom);
            for (auto& tuple : n->excluded)
                for (auto& bv : tuple) bv.value = map_value(bv.prov, bv.value);
        }
        return g_atom(std::move(atom));
    }
    if (std::holds_alternative<GTrue>(g->node) || std::holds_alternative<GFalse>(g->node))
        return g;
    if (auto* n = std::get_if<GAnd>(&g->node)) return g_and(apply(n->l), apply(n->r));
    if (auto* n = std::get_if<GOr>(&g->node)) return g_or(apply(n->l), apply(n->r));
    auto& e = std::get<GExists>(g->node);
    return g_exists(e.var, apply(e.body));
}

FormulaPtr InjectiveMapFamily::apply(const FormulaPtr& f) {
    if (std::holds_alternative<Atom>(f->node))
        return guard_to_formula(apply(g_atom(std::get<Atom>(f->node))));
    if (std::holds_alternative<FTrue>(f->node) || std::holds_alternative<FFalse>(f->node))
        return f;
    if (auto* n = std::get_if<FAnd>(&f->node)) return f_and(apply(n->l), apply(n->r));
    if (auto* n = std::get_if<FOr>(&f->node)) return f_or(apply(n->l), apply(n->r));
    if (auto* n = std::get_if<FForall>(&f->node))
        return f_forall(n->vars, apply(n->guard), apply(n->body));
    auto& e = std::get<FExists>(f->node);
    return f_exists(e.vars, apply(e.guard), apply(e.body));
}

Substitution InjectiveMapFamily::apply(const Substitution& s) {
    Substitution out;
    for (const auto& [var, bv] : s.bindings())
        out.bind(var, {map_value(bv.prov, bv.value), bv.prov});
    return out;
}

// ---- encrypted structural equivalence ----

std::set<Bytes> encrypted_constant_keys(const FormulaPtr& encrypted_policy) {
    std::set<Bytes> out;
    for (const auto& occ : constants_of(encrypted_policy))
        if (!occ.value.is_plain()) out.insert(occ.value.compare_key());
    return out;
}

namespace {

Bytes enc_bytes(const Value& v) {
    return v.kind() == Value::Kind::Kh ? v.kh_hash() : v.det_bytes();
}

}  // namespace

EncEquivResult encrypted_structurally_equivalent(const EncryptedLog& e1, const EncryptedLog& e2,
                                                 const EqualityScheme& delta,
                                                 const std::set<Bytes>& fixed_cipher_keys) {
    EncEquivResult out;
    if (!schema_matches(e1.db.schema, e2.db.schema, out.diagnostic)) return out;
    for (const auto& t : e1.db.schema.tables)
        if (e1.db.rows(t.name).size() != e2.db.rows(t.name).size()) {
            out.diagnostic = "row count differs in " + t.name;
            return out;
        }

    ColumnClasses classes = column_classes(e1.db.schema, delta, /*fold_time=*/true);
    std::vector<std::map<Bytes, Bytes>> fwd(classes.classes.size()), rev(classes.classes.size());
    for (const auto& t : e1.db.schema.tables) {
        const auto& r1 = e1.db.rows(t.name);
        const auto& r2 = e2.db.rows(t.name);
        for (size_t i = 0; i < r1.size(); ++i)
            for (size_t c = 0; c < t.columns.size(); ++c) {
                size_t cls = static_cast<size_t>(
                    classes.class_of({t.name, static_cast<int>(c) + 1}));
                Bytes ka = r1[i][c].compare_key(), kb = r2[i][c].compare_key();
                if (fixed_cipher_keys.count(ka) != fixed_cipher_keys.count(kb) ||
                    (fixed_cipher_keys.count(ka) && ka != kb)) {
                    out.diagnostic = "policy-constant ciphertext not fixed in " + t.name;
                    return out;
                }
                auto [f1, fresh1] = fwd[cls].emplace(ka, kb);
                if (!fresh1 && f1->second != kb) {
                    out.diagnostic = "ciphertext map not functional in " + t.name;
                    return out;
                }
                auto [f2, fresh2] = rev[cls].emplace(kb, ka);
                if (!fresh2 && f2->second != ka) {
                    out.diagnostic = "ciphertext map not injective in " + t.name;
                    return out;
                }
            }
    }

    // mOPED isomorphism under the time-class map: align the in-order node
    // sequences and compare association sets with timestamps mapped
    std::map<Bytes, Bytes> time_map;
    for (const auto& t : e1.db.schema.tables) {
        const auto& r1 = e1.db.rows(t.name);
        const auto& r2 = e2.db.rows(t.name);
        for (size_t i = 0; i < r1.size(); ++i)
            for (int c : t.time_cols) {
                Bytes a = enc_bytes(r1[i][static_cast<size_t>(c) - 1]);
                Bytes b = enc_bytes(r2[i][static_cast<size_t>(c) - 1]);
                auto [it, fresh] = time_map.emplace(a, b);
                if (!fresh && it->second != b) {
                    out.diagnostic = "timestamp map not functional";
                    return out;
                }
            }
    }
    auto n1 = e1.et_tree.entries();
    auto n2 = e2.et_tree.entries();
    if (n1.size() != n2.size()) {
        out.diagnostic = "mOPED node counts differ";
        return out;
    }
    for (size_t i = 0; i < n1.size(); ++i) {
        std::set<std::pair<Bytes, Bytes>> a, b;
        for (const auto& [et, ed] : n1[i].assocs) {
            auto it = time_map.find(et);
            if (it == time_map.end()) {
                out.diagnostic = "mOPED references a timestamp outside the store";
                return out;
            }
            a.insert({it->second, ed});
        }
        for (const auto& [et, ed] : n2[i].assocs) b.insert({et, ed});
        if (a != b) {
            out.diagnostic = "mOPED association mismatch at node " + std::to_string(i);
            return out;
        }
    }
    out.equivalent = true;
    return out;
}

// ---- synthetic log generation ----

namespace {

struct Generator {
    const GenSpec& spec;
    Rng rng;
    Log log;
    std::set<int64_t> const_ints;
    int action = 0;
    int counter = 0;

    explicit Generator(const GenSpec& s) : spec(s), rng(s.seed) {}

    [[noreturn]] void unsupported(const std::string& what) {
        throw Error("policy shape unsupported by the generator: " + what);
    }

    bool is_time_var(const std::string& var, const GuardPtr& g) {
        bool found = false;
        scan_time_vars(g, [&](const std::string& v) { found = found || v == var; });
        return found;
    }

    void scan_time_vars(const GuardPtr& g, const std::function<void(const std::string&)>& emit) {
        if (auto* a = std::get_if<Atom>(&g->node)) {
            if (auto* p = std::get_if<PredAtom>(a)) {
                const ModeSpec& ms = spec.modes.find(p->pred);
                for (int c : ms.time_cols)
                    if (p->args[static_cast<size_t>(c) - 1].is_var())
                        emit(p->args[static_cast<size_t>(c) - 1].var());
            } else if (auto* t = std::get_if<TimeOrderAtom>(a)) {
                if (t->t1.is_var()) emit(t->t1.var());
                if (t->t2.is_var()) emit(t->t2.var());
            }
            return;
        }
        if (auto* n = std::get_if<GAnd>(&g->node)) {
            scan_time_vars(n->l, emit);
            scan_time_vars(n->r, emit);
        } else if (auto* n = std::get_if<GOr>(&g->node)) {
            scan_time_vars(n->l, emit);
            scan_time_vars(n->r, emit);
        } else if (auto* n = std::get_if<GExists>(&g->node)) {
            scan_time_vars(n->body, emit);
        }
    }

    Value fresh_value() {
        Bytes s = "v";
        s += std::to_string(action);
        s.push_back('x');
        s += std::to_string(counter++);
        while (s.size() < static_cast<size_t>(spec.value_len))
            s.push_back(spec.alphabet[rng.index(spec.alphabet.size())]);
        return Value::of_str(s);
    }

    int64_t fresh_time() {
        int64_t base = 1'000'000 + static_cast<int64_t>(action) * 10'000;
        int64_t t;
        do {
            t = base + rng.uniform(0, 5'000);
        } while (const_ints.count(t));
        return t;
    }

    // guard must be a conjunction of atoms for generation
    void guard_atoms(const GuardPtr& g, std::vector<const Atom*>& out) {
        if (auto* a = std::get_if<Atom>(&g->node)) {
            out.push_back(a);
            return;
        }
        if (auto* n = std::get_if<GAnd>(&g->node)) {
            guard_atoms(n->l, out);
            guard_atoms(n->r, out);
            return;
        }
        if (std::holds_alternative<GTrue>(g->node)) return;
        unsupported("guard is not a conjunction of atoms");
    }

    Value term_value(const Term& t, const std::map<std::string, Value>& env) {
        if (t.is_const()) return t.val();
        auto it = env.find(t.var());
        if (it == env.end()) unsupported("unbound variable " + t.var() + " during generation");
        return it->second;
    }

    void insert_atom_row(const PredAtom& p, const std::map<std::string, Value>& env) {
        Row row;
        for (const auto& t : p.args) row.push_back(term_value(t, env));
        log.append_row(p.pred, std::move(row));
    }

    // solve the quantified time variables against timeOrder constraints,
    // then sample the rest fresh
    void sample_vars(const std::vector<std::string>& vars, const GuardPtr& g,
                     const FormulaPtr& body, std::map<std::string, Value>& env) {
        std::vector<const Atom*> atoms;
        guard_atoms(g, atoms);
        std::vector<const TimeOrderAtom*> tos;
        collect_timeorders(body, tos);
        for (const Atom* a : atoms)
            if (auto* t = std::get_if<TimeOrderAtom>(a)) tos.push_back(t);

        std::set<std::string> todo(vars.begin(), vars.end());
        std::set<std::string> time_vars;
        for (const auto& v : vars)
            if (is_time_var(v, g)) time_vars.insert(v);

        // non-time first
        for (const auto& v : vars)
            if (!time_vars.count(v)) {
                env[v] = fresh_value();
                todo.erase(v);
            }
        // time vars: interval propagation, one unknown at a time
        int guard_rounds = 0;
        while (!todo.empty()) {
            if (++guard_rounds > 64) unsupported("cyclic timeOrder constraints");
            bool progressed = false;
            for (auto it = todo.begin(); it != todo.end();) {
                const std::string& v = *it;
                int64_t lo = 1, hi = 4'000'000'000LL;
                bool solvable = true;
                for (const TimeOrderAtom* t : tos) {
                    auto known = [&](const Term& x) {
                        return x.is_const() || (env.count(x.var()) && x.var() != v);
                    };
                    auto val = [&](const Term& x) {
                        return x.is_const() ? x.val().as_int() : env.at(x.var()).as_int();
                    };
                    bool left_unknown = t->t1.is_var() && t->t1.var() == v;
                    bool right_unknown = t->t2.is_var() && t->t2.var() == v;
                    if (left_unknown && known(t->t2))
                        hi = std::min(hi, val(t->t2) + val2(t->d2) - val2(t->d1));
                    else if (right_unknown && known(t->t1))
                        lo = std::max(lo, val(t->t1) + val2(t->d1) - val2(t->d2));
                    else if (left_unknown || right_unknown)
                        solvable = false;  // wait for the other side
                }
                if (!solvable) {
                    ++it;
                    continue;
                }
                if (lo > hi) unsupported("unsatisfiable timeOrder constraints");
                int64_t t;
                int tries = 0;
                do {
                    t = rng.uniform(lo, hi);
                } while (const_ints.count(t) && ++tries < 100);
                env[v] = Value::of_int(t);
                it = todo.erase(it);
                progressed = true;
            }
            if (!progressed) unsupported("cyclic timeOrder constraints");
        }
        // fallback for time vars with no constraint at all is covered above
        // (lo/hi defaults); verify every fully-known timeOrder in the guard
        for (const Atom* a : atoms)
            if (auto* t = std::get_if<TimeOrderAtom>(a))
                if (!check_timeorder(*t, env)) unsupported("guard timeOrder unsatisfied");
    }

    static int64_t val2(const Term& t) { return t.val().as_int(); }

    bool check_timeorder(const TimeOrderAtom& t, const std::map<std::string, Value>& env) {
        auto v = [&](const Term& x) {
            return x.is_const() ? x.val().as_int() : env.at(x.var()).as_int();
        };
        return v(t.t1) + v(t.d1) <= v(t.t2) + v(t.d2);
    }

    void collect_timeorders(const FormulaPtr& f, std::vector<const TimeOrderAtom*>& out) {
        if (auto* a = std::get_if<Atom>(&f->node)) {
            if (auto* t = std::get_if<TimeOrderAtom>(a)) out.push_back(t);
            return;
        }
        if (auto* n = std::get_if<FAnd>(&f->node)) {
            collect_timeorders(n->l, out);
            collect_timeorders(n->r, out);
        } else if (auto* n = std::get_if<FOr>(&f->node)) {
            collect_timeorders(n->l, out);
            collect_timeorders(n->r, out);
        }
        // quantified subformulas solve their own variables
    }

    void insert_guard_rows(const GuardPtr& g, const std::map<std::string, Value>& env) {
        std::vector<const Atom*> atoms;
        guard_atoms(g, atoms);
        for (const Atom* a : atoms) {
            if (auto* p = std::get_if<PredAtom>(a)) insert_atom_row(*p, env);
            else if (std::get_if<TimeOrderAtom>(a) == nullptr)
                unsupported("guard atom kind");
        }
    }

    void satisfy(const FormulaPtr& f, std::map<std::string, Value> env, int depth) {
        if (depth > 3) unsupported("nesting deeper than 3");
        if (std::holds_alternative<FTrue>(f->node)) return;
        if (std::holds_alternative<FFalse>(f->node)) unsupported("cannot satisfy false");
        if (auto* a = std::get_if<Atom>(&f->node)) {
            if (auto* p = std::get_if<PredAtom>(a)) {
                insert_atom_row(*p, env);
                return;
            }
            if (auto* t = std::get_if<TimeOrderAtom>(a)) {
                if (!check_timeorder(*t, env)) unsupported("formula timeOrder unsatisfied");
                return;
            }
            unsupported("formula atom kind");
        }
        if (auto* n = std::get_if<FAnd>(&f->node)) {
            satisfy(n->l, env, depth);
            satisfy(n->r, env, depth);
            return;
        }
        if (auto* n = std::get_if<FOr>(&f->node)) {
            if (rng.chance(0.5)) satisfy(n->l, env, depth);
            else satisfy(n->r, env, depth);
            return;
        }
        if (auto* n = std::get_if<FExists>(&f->node)) {
            sample_vars(n->vars, n->guard, n->body, env);
            insert_guard_rows(n->guard, env);
            satisfy(n->body, env, depth + 1);
            return;
        }
        unsupported("nested forall");
    }

    // ensure the formula is false under env by withholding witness rows /
    // falsifying one necessary conjunct; fresh values keep other actions
    // from accidentally providing witnesses
    void falsify(const FormulaPtr& f, const std::map<std::string, Value>& env, int depth) {
        if (depth > 3) unsupported("nesting deeper than 3");
        if (std::holds_alternative<FFalse>(f->node)) return;
        if (std::holds_alternative<FTrue>(f->node)) unsupported("cannot falsify true");
        if (std::holds_alternative<Atom>(f->node)) {
            const Atom& a = std::get<Atom>(f->node);
            if (std::holds_alternative<PredAtom>(a)) return;  // row withheld
            unsupported("falsifying a non-predicate atom");
        }
        if (auto* n = std::get_if<FAnd>(&f->node)) {
            // one falsified necessary conjunct suffices; prefer one we know how
            // to falsify
            if (can_falsify(n->l) && (!can_falsify(n->r) || rng.chance(0.5)))
                falsify(n->l, env, depth);
            else falsify(n->r, env, depth);
            return;
        }
        if (auto* n = std::get_if<FOr>(&f->node)) {
            falsify(n->l, env, depth);
            falsify(n->r, env, depth);
            return;
        }
        if (std::holds_alternative<FExists>(f->node)) return;  // no witness inserted
        unsupported("falsifying a forall");
    }

    bool can_falsify(const FormulaPtr& f) {
        if (std::holds_alternative<FFalse>(f->node)) return true;
        if (auto* a = std::get_if<Atom>(&f->node)) return std::holds_alternative<PredAtom>(a);
        if (auto* n = std::get_if<FAnd>(&f->node))
            return can_falsify(n->l) || can_falsify(n->r);
        if (auto* n = std::get_if<FOr>(&f->node))
            return can_falsify(n->l) && can_falsify(n->r);
        return std::holds_alternative<FExists>(f->node);
    }

    GenResult run() {
        auto* top = std::get_if<FForall>(&spec.policy->node);
        if (!top) unsupported("top-level formula must be a guarded forall");
        for (const auto& occ : constants_of(spec.policy))
            if (occ.value.is_int()) const_ints.insert(occ.value.as_int());

        log.schema = Schema::from_modes(spec.modes);
        for (auto& t : log.schema.tables)
            if (spec.incomplete_prob > 0 && rng.chance(spec.incomplete_prob)) t.complete = false;

        std::set<int> violating;
        if (spec.violations > spec.actions) throw Error("more violations than actions");
        while (static_cast<int>(violating.size()) < spec.violations)
            violating.insert(static_cast<int>(rng.index(static_cast<size_t>(spec.actions))));

        GenResult out;
        for (action = 0; action < spec.actions; ++action) {
            std::map<std::string, Value> env;
            sample_vars(top->vars, top->guard, f_true(), env);
            insert_guard_rows(top->guard, env);
            if (violating.count(action)) {
                falsify(top->body, env, 1);
                out.violating_actions.push_back(action);
            } else {
                satisfy(top->body, env, 1);
            }
        }
        out.log = std::move(log);
        return out;
    }
};

}  // namespace

GenResult gen_log(const GenSpec& spec) {
    Generator gen(spec);
    return gen.run();
}

}  // namespace encaudit
