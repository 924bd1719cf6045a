#include "encaudit/pipeline.hpp"

namespace encaudit {

EncRun prepare_encrypted(Scheme scheme, const Log& log, const FormulaPtr& policy,
                         const EqualityScheme& delta, const ModeTable& modes, Rng& rng) {
    EncRun run;
    run.scheme = scheme;
    ConstantSets cs = ConstantSets::from_policy(policy);
    run.keys = scheme == Scheme::Det ? keygen_det(rng, log.schema, delta)
                                     : keygen_kh(rng, log.schema);
    run.enc = encrypt_log(log, run.keys, cs.d, rng);
    run.policy_enc = encrypt_policy_constants(policy, run.keys, rng);
    if (scheme == Scheme::Kh) run.tokens = generate_token(log.schema, delta, run.keys);
    run.enc.db.build_input_indexes(modes);
    run.enc.db.freeze();
    return run;
}

FormulaPtr audit_encrypted(const EncRun& run, const Substitution& sigma_enc, bool use_tree,
                           QueryTrace* trace) {
    TokenIndex tokens(run.tokens);
    AuditConfig cfg;
    cfg.scheme = run.scheme;
    cfg.moped = use_tree ? static_cast<const MopedView*>(&run.enc.et_tree)
                         : static_cast<const MopedView*>(&run.enc.et_static);
    cfg.tokens = run.scheme == Scheme::Kh ? &tokens : nullptr;
    cfg.trace = trace;
    AuditEngine engine(run.enc.db, cfg);
    return engine.ereduce(run.policy_enc, sigma_enc);
}

DifferentialOutcome run_differential(const FormulaPtr& policy, const ModeTable& modes,
                                     const Log& log, const Substitution& sigma, uint64_t seed,
                                     bool run_kh, bool trace) {
    DifferentialOutcome out;
    ModeReport report = is_well_moded(policy, modes);
    if (!report.ok) throw EvalError("policy is not well-moded: " + report.diagnostics);

    Log indexed = log;
    indexed.build_input_indexes(modes);
    indexed.freeze();
    out.plain = reduce(indexed, policy, sigma, trace ? &out.plain_trace : nullptr);

    Rng det_rng(seed * 2 + 1);
    EncRun det = prepare_encrypted(Scheme::Det, log, policy, report.delta, modes, det_rng);
    Substitution sigma_det = encrypt_substitution(sigma, det.keys, det_rng);
    FormulaPtr det_res =
        audit_encrypted(det, sigma_det, /*use_tree=*/false, trace ? &out.det_trace : nullptr);
    out.det_decrypted = decrypt_policy_constants(det_res, det.keys);
    out.det_match = equal(out.det_decrypted, out.plain);

    if (run_kh) {
        Rng kh_rng(seed * 2 + 2);
        EncRun kh = prepare_encrypted(Scheme::Kh, log, policy, report.delta, modes, kh_rng);
        Substitution sigma_kh = encrypt_substitution(sigma, kh.keys, kh_rng);
        FormulaPtr kh_res =
            audit_encrypted(kh, sigma_kh, /*use_tree=*/false, trace ? &out.kh_trace : nullptr);
        out.kh_decrypted = decrypt_policy_constants(kh_res, kh.keys);
        out.kh_match = equal(out.kh_decrypted, out.plain);
        out.kh_collision = !kh.enc.kh_collisions.empty() ||
                           !detect_kh_collisions(log, kh.keys, report.delta).empty();
    }
    return out;
}

}  // namespace encaudit
