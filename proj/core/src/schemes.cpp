#include "encaudit/schemes.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace encaudit {

Scheme scheme_from_string(const std::string& s) {
    if (s == "plain") return Scheme::Plain;
    if (s == "det") return Scheme::Det;
    if (s == "kh") return Scheme::Kh;
    throw UsageError("unknown scheme: " + s);
}

std::string scheme_to_string(Scheme s) {
    switch (s) {
        case Scheme::Plain: return "plain";
        case Scheme::Det: return "det";
        case Scheme::Kh: return "kh";
    }
    throw Error("unreachable");
}

const BoundVal& Substitution::at(const std::string& var) const {
    auto it = m_.find(var);
    if (it == m_.end()) throw EvalError("variable not bound: " + var);
    return it->second;
}

void Substitution::bind(const std::string& var, BoundVal bv) {
    auto [it, fresh] = m_.emplace(var, std::move(bv));
    if (!fresh) throw EvalError("variable already bound: " + var);
}

Substitution Substitution::restrict_to(const std::set<std::string>& vars) const {
    Substitution out;
    for (const auto& [var, bv] : m_) {
        if (!vars.count(var)) continue;
        out.m_.emplace(var, bv);
    }
    if (out.m_.size() != vars.size()) {
        for (const auto& v : vars)
            if (!m_.count(v)) throw EvalError("restrict: variable not in domain: " + v);
    }
    return out;
}

ModeState Substitution::provmap() const {
    ModeState out;
    for (const auto& [var, bv] : m_) out.insert({var, bv.prov});
    return out;
}

bool Substitution::extends(const Substitution& base, Scheme scheme) const {
    for (const auto& [var, bv] : base.m_) {
        auto it = m_.find(var);
        if (it == m_.end()) return false;
        if (it->second.prov != bv.prov) return false;
        bool same = scheme == Scheme::Kh
                        ? it->second.value.compare_key() == bv.value.compare_key()
                        : it->second.value == bv.value;
        if (!same) return false;
    }
    return true;
}

Bytes Substitution::dedup_key(Scheme scheme) const {
    Bytes out;
    for (const auto& [var, bv] : m_) {
        out += var;
        out.push_back('\x1f');
        out += scheme == Scheme::Kh ? bv.value.compare_key() : bv.value.compare_key();
        out.push_back('\x1f');
        out += bv.prov.str();
        out.push_back('\x1e');
    }
    return out;
}

bool SubstitutionSet::insert(Substitution s) {
    if (!seen_.insert(s.dedup_key(scheme_)).second) return false;
    items_.push_back(std::move(s));
    return true;
}

// ---- column classes ----

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(size_t n) : parent(n) {
        for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

ColumnClasses column_classes(const Schema& schema, const EqualityScheme& delta, bool fold_time) {
    std::vector<Provenance> cols;
    std::vector<bool> is_time;
    for (const auto& t : schema.tables)
        for (size_t c = 1; c <= t.columns.size(); ++c) {
            cols.push_back({t.name, static_cast<int>(c)});
            is_time.push_back(t.time_cols.count(static_cast<int>(c)) > 0);
        }
    std::map<Provenance, int> pos;
    for (size_t i = 0; i < cols.size(); ++i) pos[cols[i]] = static_cast<int>(i);

    UnionFind uf(cols.size());
    for (const auto& pair : delta) {
        auto a = pos.find(pair.src), b = pos.find(pair.dst);
        if (a == pos.end()) throw Error("unknown column in delta: " + pair.src.str());
        if (b == pos.end()) throw Error("unknown column in delta: " + pair.dst.str());
        uf.unite(a->second, b->second);
    }
    if (fold_time) {
        int first_time = -1;
        for (size_t i = 0; i < cols.size(); ++i) {
            if (!is_time[i]) continue;
            if (first_time < 0) first_time = static_cast<int>(i);
            else uf.unite(static_cast<int>(i), first_time);
        }
    }

    std::map<int, std::vector<Provenance>> grouped;
    for (size_t i = 0; i < cols.size(); ++i)
        grouped[uf.find(static_cast<int>(i))].push_back(cols[i]);
    ColumnClasses out;
    for (auto& [root, members] : grouped) {
        std::sort(members.begin(), members.end());
        out.classes.push_back(members);
    }
    std::sort(out.classes.begin(), out.classes.end());
    for (size_t k = 0; k < out.classes.size(); ++k)
        for (const auto& col : out.classes[k]) out.index_of[col] = static_cast<int>(k);
    return out;
}

int ColumnClasses::class_of(const Provenance& col) const {
    auto it = index_of.find(col);
    if (it == index_of.end()) throw Error("unknown column: " + col.str());
    return it->second;
}

// ---- key generation ----

const Bytes& KeySet::det_key(const Provenance& col) const {
    auto it = det_keys.find(col);
    if (it == det_keys.end()) throw KeyError("no DET key for column " + col.str());
    return it->second;
}

const KhColKeys& KeySet::kh_col(const Provenance& col) const {
    auto it = kh_keys.find(col);
    if (it == kh_keys.end()) throw KeyError("no KH keys for column " + col.str());
    return it->second;
}

KeySet keygen_det(Rng& rng, const Schema& schema, const EqualityScheme& delta) {
    KeySet ks;
    ks.scheme = Scheme::Det;
    ks.k_time = random_key(rng);
    ColumnClasses classes = column_classes(schema, delta, /*fold_time=*/true);
    std::vector<Bytes> class_keys(classes.classes.size());
    std::vector<bool> is_time_class(classes.classes.size(), false);
    for (const auto& t : schema.tables)
        for (int c : t.time_cols)
            is_time_class[static_cast<size_t>(classes.class_of({t.name, c}))] = true;
    for (size_t k = 0; k < class_keys.size(); ++k)
        class_keys[k] = is_time_class[k] ? ks.k_time : random_key(rng);
    for (const auto& [col, k] : classes.index_of) ks.det_keys[col] = class_keys[static_cast<size_t>(k)];
    return ks;
}

KeySet keygen_kh(Rng& rng, const Schema& schema) {
    KeySet ks;
    ks.scheme = Scheme::Kh;
    ks.master = random_key(rng);
    ks.k_time_scalar = akh_random_scalar(rng);
    ks.time_enc_key = random_key(rng);
    for (const auto& t : schema.tables)
        for (size_t c = 1; c <= t.columns.size(); ++c) {
            Provenance col{t.name, static_cast<int>(c)};
            bool time = t.time_cols.count(static_cast<int>(c)) > 0;
            ks.kh_keys[col] = {time ? ks.k_time_scalar : akh_random_scalar(rng), random_key(rng)};
        }
    return ks;
}

void KeySet::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write key file: " + path);
    if (scheme == Scheme::Det) {
        out << "time " << to_hex(k_time) << "\n";
        for (const auto& [col, k] : det_keys) out << "det " << col.str() << " " << to_hex(k) << "\n";
    } else {
        out << "master " << to_hex(master) << "\n";
        out << "time " << to_hex(k_time_scalar) << "\n";
        out << "timeenc " << to_hex(time_enc_key) << "\n";
        for (const auto& [col, k] : kh_keys) {
            out << "akh " << col.str() << " " << to_hex(k.hash_scalar) << "\n";
            out << "enc " << col.str() << " " << to_hex(k.enc_key) << "\n";
        }
    }
}

KeySet KeySet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open key file: " + path);
    KeySet ks;
    bool saw_det = false, saw_kh = false;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        if (kind == "master") {
            std::string hex;
            ls >> hex;
            ks.master = from_hex(hex);
            saw_kh = true;
        } else if (kind == "time") {
            std::string hex;
            ls >> hex;
            Bytes raw = from_hex(hex);
            if (raw.size() == kScalarBytes) ks.k_time_scalar = raw;
            else ks.k_time = raw;
        } else if (kind == "timeenc") {
            std::string hex;
            ls >> hex;
            ks.time_enc_key = from_hex(hex);
            saw_kh = true;
        } else if (kind == "det") {
            std::string col, hex;
            ls >> col >> hex;
            ks.det_keys[Provenance::parse(col)] = from_hex(hex);
            saw_det = true;
        } else if (kind == "akh") {
            std::string col, hex;
            ls >> col >> hex;
            ks.kh_keys[Provenance::parse(col)].hash_scalar = from_hex(hex);
            saw_kh = true;
        } else if (kind == "enc") {
            std::string col, hex;
            ls >> col >> hex;
            ks.kh_keys[Provenance::parse(col)].enc_key = from_hex(hex);
            saw_kh = true;
        } else {
            throw Error("bad key file line: " + line);
        }
    }
    if (saw_det == saw_kh) throw Error("key file does not identify one scheme");
    ks.scheme = saw_det ? Scheme::Det : Scheme::Kh;
    return ks;
}

// ---- tokens ----

TokenList generate_token(const Schema& schema, const EqualityScheme& delta, const KeySet& keys) {
    if (keys.scheme != Scheme::Kh) throw UsageError("tokens only exist under KH");
    TokenList out;
    for (const auto& pair : delta) {
        schema.at(pair.src.table);
        schema.at(pair.dst.table);
        out.push_back({pair.src, pair.dst,
                       akh_token(keys.kh_col(pair.src).hash_scalar,
                                 keys.kh_col(pair.dst).hash_scalar)});
    }
    return out;
}

void save_tokens(const TokenList& tokens, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write token file: " + path);
    for (const auto& t : tokens)
        out << t.src.str() << " -> " << t.dst.str() << " " << to_hex(t.delta) << "\n";
}

TokenList load_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open token file: " + path);
    TokenList out;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string src, arrow, dst, hex;
        if (!(ls >> src)) continue;
        if (!(ls >> arrow >> dst >> hex) || arrow != "->") throw Error("bad token line: " + line);
        out.push_back({Provenance::parse(src), Provenance::parse(dst), from_hex(hex)});
    }
    return out;
}

// ---- log encryption ----

namespace {

Value encrypt_cell(const KeySet& keys, const Provenance& col, const Value& v, Rng& rng) {
    Bytes canon = v.canonical();
    if (keys.scheme == Scheme::Det) return Value::det(det_encrypt(keys.det_key(col), canon));
    const KhColKeys& ck = keys.kh_col(col);
    return Value::kh(akh_hash(ck.hash_scalar, canon, keys.master),
                     prob_encrypt(ck.enc_key, canon, rng));
}

}  // namespace

Bytes encrypt_time_point(const KeySet& keys, int64_t t) {
    Bytes canon = Value::of_int(t).canonical();
    if (keys.scheme == Scheme::Det) return det_encrypt(keys.k_time, canon);
    return akh_hash(keys.k_time_scalar, canon, keys.master);
}

EncryptedLog encrypt_log(const Log& log, const KeySet& keys, const std::set<int64_t>& disps,
                         Rng& rng) {
    if (keys.scheme == Scheme::Plain) throw UsageError("cannot encrypt under the plain scheme");
    if (!disps.count(0)) throw Error("displacement set must contain 0");
    EncryptedLog out;
    out.db.schema = log.schema;
    std::map<Bytes, Bytes> seen_hashes;  // per-run collision log keyed by (col, hash)
    for (const auto& t : log.schema.tables) {
        for (const auto& row : log.rows(t.name)) {
            Row erow;
            erow.reserve(row.size());
            for (size_t c = 0; c < row.size(); ++c) {
                Provenance col{t.name, static_cast<int>(c) + 1};
                Value ev = encrypt_cell(keys, col, row[c], rng);
                if (ev.kind() == Value::Kind::Kh) {
                    Bytes key = col.str() + "\x1f" + ev.kh_hash();
                    auto [it, fresh] = seen_hashes.emplace(key, row[c].canonical());
                    if (!fresh && it->second != row[c].canonical())
                        out.kh_collisions.push_back("hash collision in " + col.str());
                }
                erow.push_back(std::move(ev));
            }
            out.db.append_row(t.name, std::move(erow));
        }
    }

    auto stamps = log.timestamps();
    auto enc_time = [&](int64_t v) { return encrypt_time_point(keys, v); };
    out.et_static = MopedStatic::build(stamps, disps, enc_time);
    std::map<int64_t, Bytes> enc_disp;
    for (int64_t d : disps) enc_disp[d] = enc_time(d);
    for (int64_t t : stamps)
        for (int64_t d : disps) out.oracle.learn(enc_time(t + d), t + d);
    for (int64_t t : stamps) {
        std::vector<std::pair<Bytes, Bytes>> sums;
        for (int64_t d : disps) sums.emplace_back(enc_disp[d], enc_time(t + d));
        out.et_tree.insert(enc_time(t), sums, out.oracle);
    }
    return out;
}

// ---- policy constant encryption ----

namespace {

struct PolicyCrypter {
    const KeySet& keys;
    Rng* rng;       // encrypt direction only
    bool decrypt;

    Value apply_value(const Value& v, const Bytes& det_key, const KhColKeys* kh,
                      const Bytes& kh_enc_key) const {
        if (!decrypt) {
            Bytes canon = v.canonical();
            if (keys.scheme == Scheme::Det) return Value::det(det_encrypt(det_key, canon));
            return Value::kh(akh_hash(kh->hash_scalar, canon, keys.master),
                             prob_encrypt(kh_enc_key, canon, *rng));
        }
        if (keys.scheme == Scheme::Det)
            return Value::from_canonical(det_decrypt(det_key, v.det_bytes()));
        return Value::from_canonical(prob_decrypt(kh_enc_key, v.kh_cipher()));
    }

    Value map_at(const Value& v, const Provenance& col) const {
        if (keys.scheme == Scheme::Det) return apply_value(v, keys.det_key(col), nullptr, {});
        const KhColKeys& ck = keys.kh_col(col);
        return apply_value(v, {}, &ck, ck.enc_key);
    }

    Value map_time(const Value& v) const {
        if (keys.scheme == Scheme::Det) return apply_value(v, keys.k_time, nullptr, {});
        KhColKeys time_keys{keys.k_time_scalar, keys.time_enc_key};
        return apply_value(v, {}, &time_keys, keys.time_enc_key);
    }

    bool should_touch(const Value& v) const {
        return decrypt ? !v.is_plain() : v.is_plain();
    }

    Term map_term(const Term& t, const std::optional<Provenance>& pos, bool time_pos) const {
        if (t.is_var() || !should_touch(t.val())) return t;
        // substituted constants carry an origin naming the right key
        if (t.origin()) return Term::constant(map_at(t.val(), *t.origin()), t.origin());
        if (time_pos) return Term::constant(map_time(t.val()));
        if (!pos) throw KeyError("constant at a keyless position: " + render_term(t));
        return Term::constant(map_at(t.val(), *pos));
    }

    Atom map_atom(const Atom& a) const {
        if (auto* p = std::get_if<PredAtom>(&a)) {
            PredAtom out{p->pred, {}};
            for (size_t j = 0; j < p->args.size(); ++j)
                out.args.push_back(
                    map_term(p->args[j], Provenance{p->pred, static_cast<int>(j) + 1}, false));
            return out;
        }
        if (auto* t = std::get_if<TimeOrderAtom>(&a))
            return TimeOrderAtom{map_term(t->t1, std::nullopt, true),
                                 map_term(t->d1, std::nullopt, true),
                                 map_term(t->t2, std::nullopt, true),
                                 map_term(t->d2, std::nullopt, true)};
        if (auto* e = std::get_if<EqAtom>(&a))
            return EqAtom{map_term(e->lhs, std::nullopt, false),
                          map_term(e->rhs, std::nullopt, false)};
        auto n = std::get<NotInAtom>(a);
        for (auto& tuple : n.excluded)
            for (auto& bv : tuple)
                if (should_touch(bv.value)) bv.value = map_at(bv.value, bv.prov);
        return n;
    }

    GuardPtr map_guard(const GuardPtr& g) const {
        if (auto* a = std::get_if<Atom>(&g->node)) return g_atom(map_atom(*a));
        if (std::holds_alternative<GTrue>(g->node) || std::holds_alternative<GFalse>(g->node))
            return g;
        if (auto* n = std::get_if<GAnd>(&g->node)) return g_and(map_guard(n->l), map_guard(n->r));
        if (auto* n = std::get_if<GOr>(&g->node)) return g_or(map_guard(n->l), map_guard(n->r));
        auto& e = std::get<GExists>(g->node);
        return g_exists(e.var, map_guard(e.body));
    }

    FormulaPtr map_formula(const FormulaPtr& f) const {
        if (auto* a = std::get_if<Atom>(&f->node)) return f_atom(map_atom(*a));
        if (std::holds_alternative<FTrue>(f->node) || std::holds_alternative<FFalse>(f->node))
            return f;
        if (auto* n = std::get_if<FAnd>(&f->node))
            return f_and(map_formula(n->l), map_formula(n->r));
        if (auto* n = std::get_if<FOr>(&f->node)) return f_or(map_formula(n->l), map_formula(n->r));
        if (auto* n = std::get_if<FForall>(&f->node))
            return f_forall(n->vars, map_guard(n->guard), map_formula(n->body));
        auto& e = std::get<FExists>(f->node);
        return f_exists(e.vars, map_guard(e.guard), map_formula(e.body));
    }
};

}  // namespace

FormulaPtr encrypt_policy_constants(const FormulaPtr& policy, const KeySet& keys, Rng& rng) {
    PolicyCrypter pc{keys, &rng, /*decrypt=*/false};
    return pc.map_formula(policy);
}

FormulaPtr decrypt_policy_constants(const FormulaPtr& policy, const KeySet& keys) {
    PolicyCrypter pc{keys, nullptr, /*decrypt=*/true};
    return pc.map_formula(policy);
}

Substitution encrypt_substitution(const Substitution& plain, const KeySet& keys, Rng& rng) {
    Substitution out;
    for (const auto& [var, bv] : plain.bindings())
        out.bind(var, {encrypt_cell(keys, bv.prov, bv.value, rng), bv.prov});
    return out;
}

std::vector<std::string> detect_kh_collisions(const Log& plain_log, const KeySet& keys,
                                              const EqualityScheme& delta) {
    if (keys.scheme != Scheme::Kh) throw UsageError("collision sweep applies to KH only");
    std::vector<std::string> out;
    ColumnClasses classes = column_classes(plain_log.schema, delta, /*fold_time=*/true);
    for (const auto& cls : classes.classes) {
        std::map<Bytes, Bytes> scalar_to_value;  // scalar -> canonical plaintext
        for (const auto& col : cls) {
            const auto& rs = plain_log.rows(col.table);
            for (const auto& row : rs) {
                Bytes canon = row[static_cast<size_t>(col.col) - 1].canonical();
                Bytes c = det_encrypt(keys.master, canon);
                while (c.size() < kScalarBytes + 8) c += det_encrypt(keys.master, c);
                Bytes scalar = akh_scalar_from_bytes(c.substr(0, kScalarBytes + 8));
                auto [it, fresh] = scalar_to_value.emplace(scalar, canon);
                if (!fresh && it->second != canon)
                    out.push_back("scalar collision in class of " + col.str());
            }
        }
    }
    return out;
}

}  // namespace encaudit
