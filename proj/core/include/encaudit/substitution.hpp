#pragma once

#include <map>
#include <vector>

#include "encaudit/modecheck.hpp"
#include "encaudit/policy.hpp"

namespace encaudit {

enum class Scheme { Plain, Det, Kh };

Scheme scheme_from_string(const std::string& s);
std::string scheme_to_string(Scheme s);

// Variable bindings with provenance. Under KH the value is a (hash, cipher)
// pair; under DET a ciphertext; plaintext engines bind Int/Str values.
class Substitution {
public:
    static Substitution identity() { return {}; }

    bool contains(const std::string& var) const { return m_.count(var) > 0; }
    const BoundVal& at(const std::string& var) const;
    void bind(const std::string& var, BoundVal bv);  // rejects rebinding
    void erase(const std::string& var) { m_.erase(var); }
    size_t size() const { return m_.size(); }
    bool empty() const { return m_.empty(); }

    const std::map<std::string, BoundVal>& bindings() const { return m_; }

    Substitution restrict_to(const std::set<std::string>& vars) const;
    // [sigma]: domain with provenances, dropping values
    ModeState provmap() const;
    bool extends(const Substitution& base, Scheme scheme) const;

    // dedup key; Kh values participate with their hash component
    Bytes dedup_key(Scheme scheme) const;

private:
    std::map<std::string, BoundVal> m_;
};

// Ordered set of substitutions, first-occurrence order with dedup.
class SubstitutionSet {
public:
    explicit SubstitutionSet(Scheme scheme) : scheme_(scheme) {}

    bool insert(Substitution s);
    const std::vector<Substitution>& items() const { return items_; }
    size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

private:
    Scheme scheme_;
    std::vector<Substitution> items_;
    std::set<Bytes> seen_;
};

}  // namespace encaudit
