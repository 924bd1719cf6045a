#pragma once

#include "encaudit/audit.hpp"
#include "encaudit/evalkit.hpp"

namespace encaudit {

// One scheme's prepared audit inputs: keys, encrypted store, encrypted
// policy, and (for KH) the token list derived from delta.
struct EncRun {
    Scheme scheme = Scheme::Det;
    KeySet keys;
    EncryptedLog enc;
    FormulaPtr policy_enc;
    TokenList tokens;
};

EncRun prepare_encrypted(Scheme scheme, const Log& log, const FormulaPtr& policy,
                         const EqualityScheme& delta, const ModeTable& modes, Rng& rng);

FormulaPtr audit_encrypted(const EncRun& run, const Substitution& sigma_enc, bool use_tree,
                           QueryTrace* trace = nullptr);

struct DifferentialOutcome {
    FormulaPtr plain;
    FormulaPtr det_decrypted;
    FormulaPtr kh_decrypted;
    bool det_match = false;
    bool kh_match = false;
    bool kh_collision = false;
    QueryTrace plain_trace, det_trace, kh_trace;
};

// Runs reduce on the plaintext log and ereduce under DET (and optionally
// KH), decrypting both results for comparison against the oracle.
DifferentialOutcome run_differential(const FormulaPtr& policy, const ModeTable& modes,
                                     const Log& log, const Substitution& sigma, uint64_t seed,
                                     bool run_kh, bool trace = false);

}  // namespace encaudit
