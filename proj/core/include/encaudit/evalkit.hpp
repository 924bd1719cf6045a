#pragma once

#include <optional>

#include "encaudit/audit.hpp"
#include "encaudit/logstore.hpp"
#include "encaudit/schemes.hpp"

namespace encaudit {

// Equal up to distances with displacements: both sequences order the same
// way under every displaced comparison.
bool edd(const std::vector<int64_t>& u, const std::vector<int64_t>& v,
         const std::set<int64_t>& disps);

struct EquivalenceResult {
    bool equivalent = false;
    std::string diagnostic;  // first failure
    // per class: canonical(left value) -> right value
    std::vector<std::map<Bytes, Value>> witness;
    explicit operator bool() const { return equivalent; }
};

// Definition-style plaintext log equivalence: same schema and row counts,
// positional per-class value bijections fixing the policy constants and
// preserving lengths, and EDD over the timestamp sequences.
EquivalenceResult log_equivalent(const Log& l1, const Log& l2, const EqualityScheme& delta,
                                 const std::set<Value>& consts,
                                 const std::set<int64_t>& disps);

// Equivalent log with fresh same-length values, constants kept verbatim and
// all timestamps shifted by one random positive offset.
Log make_dummy_log(const Log& log, const EqualityScheme& delta, const std::set<Value>& consts,
                   const std::set<int64_t>& disps, uint64_t seed);

// Per-column-class injective value maps: identity on the policy constants,
// length-preserving fresh values elsewhere, and a single shared shift for
// timestamps so EDD is respected. Maps are built lazily; injectivity is
// asserted on every application.
class InjectiveMapFamily {
public:
    InjectiveMapFamily(const Schema& schema, const EqualityScheme& delta,
                       const std::set<Value>& consts, uint64_t seed);

    Value map_value(const Provenance& col, const Value& v);
    int64_t map_time(int64_t t) const { return t + time_shift_; }

    Log apply(const Log& log);
    FormulaPtr apply(const FormulaPtr& f);
    GuardPtr apply(const GuardPtr& g);
    Substitution apply(const Substitution& s);

private:
    Value map_in_class(int cls, const Value& v);

    Schema schema_;
    ColumnClasses classes_;
    std::set<Bytes> const_keys_;
    Rng rng_;
    int64_t time_shift_;
    std::vector<std::map<Bytes, Value>> maps_;
    std::vector<std::set<Bytes>> used_;
};

struct EncEquivResult {
    bool equivalent = false;
    std::string diagnostic;
    explicit operator bool() const { return equivalent; }
};

// Structural counterpart over two stores encrypted under one key set:
// positional per-key-class ciphertext bijections with the policy-constant
// ciphertexts fixed, and isomorphic mOPED structures under the map.
EncEquivResult encrypted_structurally_equivalent(const EncryptedLog& e1, const EncryptedLog& e2,
                                                 const EqualityScheme& delta,
                                                 const std::set<Bytes>& fixed_cipher_keys);

// compare_key() of every encrypted constant in a constant-encrypted policy
std::set<Bytes> encrypted_constant_keys(const FormulaPtr& encrypted_policy);

struct GenSpec {
    FormulaPtr policy;
    ModeTable modes;
    int actions = 10;
    int violations = 0;
    uint64_t seed = 1;
    std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
    int value_len = 8;
    double incomplete_prob = 0.0;  // chance a table admits future extension
};

struct GenResult {
    Log log;
    std::vector<int> violating_actions;
};

// Synthetic log generation: per action, witness rows making the policy's
// top-level clause hold, or one falsified necessary atom. Supports the
// guarded forall-over-conjunction shapes with disjunctive/existential
// bodies; anything else is rejected, not silently skipped.
GenResult gen_log(const GenSpec& spec);

}  // namespace encaudit
