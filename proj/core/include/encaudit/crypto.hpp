#pragma once

#include <cstdint>
#include <memory>

#include "encaudit/value.hpp"

namespace encaudit {

inline constexpr size_t kKeyBytes = 32;     // 256-bit keys throughout
inline constexpr size_t kDetBlock = 16;
inline constexpr size_t kScalarBytes = 24;  // prime192v1 group order width
inline constexpr size_t kPointBytes = 25;   // compressed point

// Deterministic random byte stream (AES-256-CTR keyed by SHA-256 of the
// seed). Unseeded instances draw the seed from the OS.
class Rng {
public:
    Rng();
    explicit Rng(uint64_t seed);
    explicit Rng(const Bytes& seed);
    ~Rng();
    Rng(const Rng&) = delete;
    Rng& operator=(const Rng&) = delete;

    void fill(void* buf, size_t n);
    Bytes bytes(size_t n);
    uint64_t next_u64();
    // inclusive bounds
    int64_t uniform(int64_t lo, int64_t hi);
    size_t index(size_t n);  // [0, n)
    double uniform01();
    bool chance(double p);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Bytes random_key(Rng& rng);

// Deterministic wide-block cipher: two CBC passes over AES-256 with a
// masking step between them, fixed tweak. Equal (key, plaintext) pairs give
// byte-equal ciphertexts; output length is the padded plaintext length.
Bytes det_encrypt(const Bytes& key, const Bytes& plain);
Bytes det_decrypt(const Bytes& key, const Bytes& cipher);
constexpr size_t det_padded_len(size_t n) { return (n / kDetBlock + 1) * kDetBlock; }

// Adjustable keyed hash on prime192v1.
//   Hash(k, v)    = [DET(k_master, v) * k] P
//   Token(k1, k2) = k2 * k1^{-1} mod n
//   Adjust(w, t)  = [t] w
// Scalars are 24-byte big-endian values mod the group order, elements are
// 25-byte compressed points.
Bytes akh_random_scalar(Rng& rng);            // nonzero
Bytes akh_scalar_one();
Bytes akh_scalar_from_bytes(const Bytes& raw);  // reduce mod n
Bytes akh_scalar_mul(const Bytes& a, const Bytes& b);
Bytes akh_hash(const Bytes& k, const Bytes& v, const Bytes& k_master);
Bytes akh_token(const Bytes& k1, const Bytes& k2);
Bytes akh_adjust(const Bytes& elem, const Bytes& token);

// AES-256-GCM with a fresh nonce per call; output is nonce || ct || tag.
Bytes prob_encrypt(const Bytes& key, const Bytes& plain, Rng& rng);
Bytes prob_decrypt(const Bytes& key, const Bytes& cipher);

Bytes sha256(const Bytes& data);

}  // namespace encaudit
