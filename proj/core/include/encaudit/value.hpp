#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace encaudit {

using Bytes = std::string;

// Error taxonomy. CLI maps UsageError to exit 2, everything else to exit 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : Error {
    int line = 0, column = 0;
    ParseError(const std::string& msg, int ln, int col)
        : Error(msg + " at " + std::to_string(ln) + ":" + std::to_string(col)),
          line(ln), column(col) {}
};
struct StoreError : Error { using Error::Error; };
struct CryptoError : Error { using Error::Error; };
struct KeyError : Error { using Error::Error; };
struct EvalError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };
// A (t, d) pair the mOPED structure has never seen.
struct UnknownTimestampError : Error { using Error::Error; };
// No token covers a required (src, dst) column pair.
struct MissingTokenError : Error {
    std::string src, dst;
    MissingTokenError(std::string s, std::string d)
        : Error("missing token for " + s + " -> " + d), src(std::move(s)), dst(std::move(d)) {}
};

std::string to_hex(const Bytes& b);
Bytes from_hex(const std::string& h);

// A table column, 1-based. Rendered "send.4".
struct Provenance {
    std::string table;
    int col = 0;

    auto operator<=>(const Provenance&) const = default;
    std::string str() const { return table + "." + std::to_string(col); }
    static Provenance parse(const std::string& text);
};

// Tagged cell / constant value. Plaintext logs hold Int or Str cells, a
// DET-encrypted store holds Det cells, a KH store holds (hash, cipher) pairs.
// All cells in one column carry the same tag.
class Value {
public:
    enum class Kind : uint8_t { Int, Str, Det, Kh };

    Value() : kind_(Kind::Str) {}
    static Value of_int(int64_t v);
    static Value of_str(Bytes s);
    static Value det(Bytes cipher);
    static Value kh(Bytes hash, Bytes cipher);

    Kind kind() const { return kind_; }
    bool is_int() const { return kind_ == Kind::Int; }
    bool is_plain() const { return kind_ == Kind::Int || kind_ == Kind::Str; }

    int64_t as_int() const;
    const Bytes& str() const;        // Str payload
    const Bytes& det_bytes() const;  // Det ciphertext
    const Bytes& kh_hash() const;    // serialized group element
    const Bytes& kh_cipher() const;  // probabilistic ciphertext

    // Unambiguous byte encoding of a plaintext value, used as input to the
    // ciphers. One tag byte plus payload; Int is 8 bytes big-endian.
    Bytes canonical() const;
    static Value from_canonical(const Bytes& enc);

    // Equality key for joins, indexes and substitution dedup. Kh values
    // compare on the hash component only: the cipher half is probabilistic.
    Bytes compare_key() const;

    bool operator==(const Value& o) const {
        return kind_ == o.kind_ && int_ == o.int_ && a_ == o.a_ && b_ == o.b_;
    }
    auto operator<=>(const Value& o) const {
        if (auto c = kind_ <=> o.kind_; c != 0) return c;
        if (auto c = int_ <=> o.int_; c != 0) return c;
        if (auto c = a_ <=> o.a_; c != 0) return c;
        return b_ <=> o.b_;
    }

private:
    Kind kind_;
    int64_t int_ = 0;
    Bytes a_;  // Str payload / Det ciphertext / Kh hash
    Bytes b_;  // Kh cipher
};

}  // namespace encaudit
