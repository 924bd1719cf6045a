#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>

#include "encaudit/policy.hpp"

namespace encaudit {

// Per-predicate input/output argument positions. Input positions must hold
// ground values when the atom is evaluated; output positions may bind fresh
// variables. time(i) marks timestamp columns.
struct ModeSpec {
    std::string pred;
    int arity = 0;
    std::set<int> inputs;     // 1-based
    std::set<int> time_cols;  // 1-based

    bool is_input(int pos) const { return inputs.count(pos) > 0; }
    bool is_output(int pos) const { return !is_input(pos); }
};

class ModeTable {
public:
    void add(ModeSpec spec);
    const ModeSpec& find(const std::string& pred) const;
    bool contains(const std::string& pred) const { return specs_.count(pred) > 0; }
    const std::map<std::string, ModeSpec>& all() const { return specs_; }

    // One line per predicate: `pred send/4 modes(+,-,-,-) time(4)`.
    static ModeTable parse(const std::string& text);
    static ModeTable load(const std::string& path);
    std::string render() const;

private:
    std::map<std::string, ModeSpec> specs_;
};

// chi: which variables currently have ground values, with every column each
// value may have come from. A variable can carry several provenances after a
// disjunctive guard.
using ModeState = std::set<std::pair<std::string, Provenance>>;

std::set<std::string> fe(const ModeState& chi);

// The merge operator for disjunction: keep the entries (from either side)
// of variables that are bound on both sides.
ModeState merge(const ModeState& a, const ModeState& b);

struct DeltaPair {
    Provenance src;  // provenance of the already-bound value
    Provenance dst;  // column it is compared against
    auto operator<=>(const DeltaPair&) const = default;
    std::string str() const { return src.str() + " -> " + dst.str(); }
};

using EqualityScheme = std::set<DeltaPair>;

std::string render_delta(const EqualityScheme& d);
EqualityScheme parse_delta(const std::string& text);

struct ModeError : Error {
    std::string atom;
    std::string var;
    int premise = 0;
    ModeError(const std::string& msg, std::string atom_, std::string var_, int premise_ = 0)
        : Error(msg), atom(std::move(atom_)), var(std::move(var_)), premise(premise_) {}
};

struct GuardModeResult {
    ModeState out;
    EqualityScheme delta;
};

class ModeChecker {
public:
    explicit ModeChecker(const ModeTable& modes) : modes_(modes) {}

    GuardModeResult check_guard(const ModeState& in, const GuardPtr& g);
    EqualityScheme check_formula(const ModeState& in, const FormulaPtr& f);

    // rule applications so far; stays linear in the AST size
    size_t visits() const { return visits_; }

private:
    GuardModeResult check_guard_atom(const ModeState& in, const Atom& a);
    EqualityScheme check_formula_atom(const ModeState& in, const Atom& a);
    EqualityScheme pred_delta(const ModeState& in, const PredAtom& p) const;

    const ModeTable& modes_;
    size_t visits_ = 0;
};

struct ModeReport {
    bool ok = false;
    EqualityScheme delta;
    std::string diagnostics;
    size_t nodes_visited = 0;
};

ModeReport is_well_moded(const FormulaPtr& f, const ModeTable& modes);

}  // namespace encaudit
