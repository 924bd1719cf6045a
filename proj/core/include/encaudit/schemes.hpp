#pragma once

#include <map>
#include <vector>

#include "encaudit/crypto.hpp"
#include "encaudit/logstore.hpp"
#include "encaudit/moped.hpp"
#include "encaudit/substitution.hpp"

namespace encaudit {

// Key material per column. DET shares one key across each delta-connected
// column class and keys every timestamp column with K_time; KH gives every
// column an independent (hash scalar, encryption key) pair, timestamp
// columns sharing the K_time scalar.
struct KhColKeys {
    Bytes hash_scalar;
    Bytes enc_key;
};

struct KeySet {
    Scheme scheme = Scheme::Det;
    // DET
    std::map<Provenance, Bytes> det_keys;
    Bytes k_time;
    // KH
    std::map<Provenance, KhColKeys> kh_keys;
    Bytes k_time_scalar;
    Bytes time_enc_key;  // cipher half of encrypted displacements
    Bytes master;

    const Bytes& det_key(const Provenance& col) const;
    const KhColKeys& kh_col(const Provenance& col) const;

    void save(const std::string& path) const;
    static KeySet load(const std::string& path);
};

// Connected components of the delta graph over all schema columns
// (direction ignored). With fold_time set, all timestamp columns join one
// class, matching the single K_time key.
struct ColumnClasses {
    std::vector<std::vector<Provenance>> classes;
    std::map<Provenance, int> index_of;

    int class_of(const Provenance& col) const;
    bool same_class(const Provenance& a, const Provenance& b) const {
        return class_of(a) == class_of(b);
    }
};

ColumnClasses column_classes(const Schema& schema, const EqualityScheme& delta,
                             bool fold_time = false);

KeySet keygen_det(Rng& rng, const Schema& schema, const EqualityScheme& delta);
KeySet keygen_kh(Rng& rng, const Schema& schema);

struct Token {
    Provenance src, dst;
    Bytes delta;  // scalar
};
using TokenList = std::vector<Token>;

TokenList generate_token(const Schema& schema, const EqualityScheme& delta, const KeySet& keys);
void save_tokens(const TokenList& tokens, const std::string& path);
TokenList load_tokens(const std::string& path);

struct EncryptedLog {
    Log db;
    MopedTree et_tree;
    MopedStatic et_static;
    DictOracle oracle;  // client-side sum dictionary, construction/insert only
    std::vector<std::string> kh_collisions;  // logged hash collisions
};

// Cell-wise encryption plus the mOPED structure over all timestamps and the
// displacement set D (threaded explicitly so eT is reproducible).
EncryptedLog encrypt_log(const Log& log, const KeySet& keys, const std::set<int64_t>& disps,
                         Rng& rng);

Bytes encrypt_time_point(const KeySet& keys, int64_t t);

FormulaPtr encrypt_policy_constants(const FormulaPtr& policy, const KeySet& keys, Rng& rng);
FormulaPtr decrypt_policy_constants(const FormulaPtr& policy, const KeySet& keys);

Substitution encrypt_substitution(const Substitution& plain, const KeySet& keys, Rng& rng);

// Hash collisions are exactly scalar collisions of DET(k_master, v), so one
// sweep over each class's plaintext values finds every collision any
// adjusted comparison could hit.
std::vector<std::string> detect_kh_collisions(const Log& plain_log, const KeySet& keys,
                                              const EqualityScheme& delta);

}  // namespace encaudit
