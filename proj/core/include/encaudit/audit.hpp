#pragma once

#include <optional>

#include "encaudit/logstore.hpp"
#include "encaudit/moped.hpp"
#include "encaudit/schemes.hpp"
#include "encaudit/substitution.hpp"

namespace encaudit {

struct TraceEvent {
    enum class Kind { EqCompare, Select, Lookup, TimeOrder };
    Kind kind;
    Provenance src, dst;  // EqCompare only
    std::string table;    // Select / Lookup
    std::string str() const;
};
using QueryTrace = std::vector<TraceEvent>;

class TokenIndex {
public:
    TokenIndex() = default;
    explicit TokenIndex(const TokenList& tokens);
    const Bytes* find(const Provenance& src, const Provenance& dst) const;

private:
    std::map<std::pair<Provenance, Provenance>, Bytes> m_;
};

struct AuditConfig {
    Scheme scheme = Scheme::Plain;
    const MopedView* moped = nullptr;    // required when timeOrder meets encrypted cells
    const TokenIndex* tokens = nullptr;  // KH only
    QueryTrace* trace = nullptr;
};

// Evaluates policies against a (possibly encrypted) store. Plaintext,
// DET and KH instances share the rule structure; they differ in how bound
// values are moved between columns and how timeOrder is decided.
class AuditEngine {
public:
    AuditEngine(const Log& log, AuditConfig cfg);

    // residual policy, simplified
    FormulaPtr ereduce(const FormulaPtr& f, const Substitution& sigma);

    SubstitutionSet esat_hat(const GuardPtr& g, const Substitution& sigma);
    SubstitutionSet esat(const Atom& a, const Substitution& sigma);

private:
    struct Resolved {
        Value value;
        std::optional<Provenance> prov;
        bool from_var = false;
    };

    Resolved resolve(const Term& t, const Substitution& sigma) const;
    Value constraint_value(const BoundVal& bv, const Provenance& target);
    bool eval_time_order(const TimeOrderAtom& a, const Substitution& sigma);
    bool eval_eq(const EqAtom& a, const Substitution& sigma);
    bool notin_member(const NotInAtom& a, const Substitution& sigma) const;

    FormulaPtr reduce_raw(const FormulaPtr& f, const Substitution& sigma);
    FormulaPtr reduce_atom(const Atom& a, const Substitution& sigma);
    std::pair<GuardPtr, FormulaPtr> residual_parts(const std::vector<std::string>& vars,
                                                   const GuardPtr& g, const FormulaPtr& body,
                                                   const Substitution& sigma,
                                                   const SubstitutionSet& sat);

    // substitute sigma's bindings into a residual subformula, adjusting
    // hashes per argument position
    GuardPtr ground_guard(const GuardPtr& g, const Substitution& sigma,
                          const std::set<std::string>& shadowed);
    FormulaPtr ground_formula(const FormulaPtr& f, const Substitution& sigma,
                              const std::set<std::string>& shadowed);
    Atom ground_atom(const Atom& a, const Substitution& sigma,
                     const std::set<std::string>& shadowed);

    bool guard_tables_complete(const GuardPtr& g) const;

    void trace_eq(const Provenance& src, const Provenance& dst);
    Bytes hash_or_bytes(const Value& v) const;

    const Log& log_;
    AuditConfig cfg_;
};

// Plaintext reduce: the oracle ereduce is checked against. timeOrder is
// decided by integer arithmetic directly.
FormulaPtr reduce(const Log& log, const FormulaPtr& f, const Substitution& sigma,
                  QueryTrace* trace = nullptr);

// Propositional recombination. With a store, quantifiers whose guards range
// over complete tables only may collapse; without one they are retained.
FormulaPtr simplify(const FormulaPtr& f, const Log* store = nullptr);

}  // namespace encaudit
