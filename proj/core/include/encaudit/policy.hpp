#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "encaudit/value.hpp"

namespace encaudit {

// Guarded-fragment policy AST. Values are immutable after construction and
// shared via shared_ptr, so concurrent readers need no synchronization.

class Term {
public:
    static Term constant(Value v, std::optional<Provenance> origin = std::nullopt) {
        Term t;
        t.value_ = std::move(v);
        t.origin_ = std::move(origin);
        return t;
    }
    static Term variable(std::string name);

    bool is_var() const { return !var_.empty(); }
    bool is_const() const { return var_.empty(); }
    const std::string& var() const;
    const Value& val() const;
    // Column a substituted constant was read from; empty for constants
    // written in the policy text. Needed to pick the decryption key.
    const std::optional<Provenance>& origin() const { return origin_; }

    bool operator==(const Term& o) const {
        return var_ == o.var_ && value_ == o.value_ && origin_ == o.origin_;
    }
    auto operator<=>(const Term&) const = default;

private:
    std::string var_;  // empty => constant
    Value value_;
    std::optional<Provenance> origin_;
};

struct PredAtom {
    std::string pred;
    std::vector<Term> args;
    bool operator==(const PredAtom&) const = default;
};

// timeOrder(t1, d1, t2, d2): t1 + d1 <= t2 + d2. d1, d2 are constants.
struct TimeOrderAtom {
    Term t1, d1, t2, d2;
    bool operator==(const TimeOrderAtom&) const = default;
};

struct EqAtom {
    Term lhs, rhs;
    bool operator==(const EqAtom&) const = default;
};

// A value bound during audit, with the column it came from.
struct BoundVal {
    Value value;
    Provenance prov;
    bool operator==(const BoundVal&) const = default;
    auto operator<=>(const BoundVal&) const = default;
};

// x_vec notin { tuples }: filters out already-checked substitutions in
// residual policies. Only the audit module (or re-parsing its output)
// creates these.
struct NotInAtom {
    std::vector<std::string> vars;
    std::vector<std::vector<BoundVal>> excluded;  // each tuple aligned with vars
    bool operator==(const NotInAtom&) const = default;
};

using Atom = std::variant<PredAtom, TimeOrderAtom, EqAtom, NotInAtom>;

class Guard;
class Formula;
using GuardPtr = std::shared_ptr<const Guard>;
using FormulaPtr = std::shared_ptr<const Formula>;

struct GTrue {};
struct GFalse {};
struct GAnd { GuardPtr l, r; };
struct GOr { GuardPtr l, r; };
struct GExists { std::string var; GuardPtr body; };

class Guard {
public:
    using Node = std::variant<Atom, GTrue, GFalse, GAnd, GOr, GExists>;
    explicit Guard(Node n) : node(std::move(n)) {}
    Node node;
};

GuardPtr g_atom(Atom a);
GuardPtr g_true();
GuardPtr g_false();
GuardPtr g_and(GuardPtr l, GuardPtr r);
GuardPtr g_or(GuardPtr l, GuardPtr r);
GuardPtr g_exists(std::string var, GuardPtr body);

struct FTrue {};
struct FFalse {};
struct FAnd { FormulaPtr l, r; };
struct FOr { FormulaPtr l, r; };
struct FForall { std::vector<std::string> vars; GuardPtr guard; FormulaPtr body; };
struct FExists { std::vector<std::string> vars; GuardPtr guard; FormulaPtr body; };

class Formula {
public:
    using Node = std::variant<Atom, FTrue, FFalse, FAnd, FOr, FForall, FExists>;
    explicit Formula(Node n) : node(std::move(n)) {}
    Node node;
};

FormulaPtr f_atom(Atom a);
FormulaPtr f_true();
FormulaPtr f_false();
FormulaPtr f_and(FormulaPtr l, FormulaPtr r);
FormulaPtr f_or(FormulaPtr l, FormulaPtr r);
FormulaPtr f_forall(std::vector<std::string> vars, GuardPtr g, FormulaPtr body);
FormulaPtr f_exists(std::vector<std::string> vars, GuardPtr g, FormulaPtr body);

bool equal(const GuardPtr& a, const GuardPtr& b);
bool equal(const FormulaPtr& a, const FormulaPtr& b);
bool is_true(const FormulaPtr& f);
bool is_false(const FormulaPtr& f);

// Concrete text grammar (see README): parse error carries line/column.
FormulaPtr parse_policy(const std::string& text);
// One constant in the policy literal syntax (int, "string", 0xHEX, ...).
Value parse_value_literal(const std::string& text);
std::string render_policy(const FormulaPtr& f);
std::string render_guard(const GuardPtr& g);
std::string render_atom(const Atom& a);
std::string render_term(const Term& t);

// Guards are a sublanguage of formulas; conversion fails on forall.
GuardPtr formula_to_guard(const FormulaPtr& f);
FormulaPtr guard_to_formula(const GuardPtr& g);

// Every constant occurrence with its host predicate and 1-based argument
// position. timeOrder and = occurrences use those symbols as the host.
struct ConstOcc {
    Value value;
    std::string pred;
    int pos;
    auto operator<=>(const ConstOcc&) const = default;
};
std::set<ConstOcc> constants_of(const FormulaPtr& f);

// Constants in timeOrder positions 2 and 4, always joined with {0}.
std::set<int64_t> displacements_of(const FormulaPtr& f);

// Policy constants C and displacement set D. Joining folds D into C so the
// well-formedness conditions (D subset of C, 0 in D) hold.
struct ConstantSets {
    std::set<Value> c;
    std::set<int64_t> d;
    static ConstantSets from_policy(const FormulaPtr& f);
};

using TermSubst = std::map<std::string, Term>;
FormulaPtr apply_substitution(const FormulaPtr& f, const TermSubst& s);
GuardPtr apply_substitution(const GuardPtr& g, const TermSubst& s);

std::set<std::string> free_vars(const FormulaPtr& f);
std::set<std::string> free_vars(const GuardPtr& g);
std::set<std::string> free_vars(const Atom& a);

size_t ast_size(const FormulaPtr& f);
size_t ast_size(const GuardPtr& g);

}  // namespace encaudit
