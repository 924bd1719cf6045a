#include "encaudit/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/obj_mac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>

namespace encaudit {

Bytes sha256(const Bytes& data) {
    unsigned char out[32];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), out);
    return Bytes(reinterpret_cast<char*>(out), 32);
}

// ---- Rng ----

struct Rng::Impl {
    EVP_CIPHER_CTX* ctx = nullptr;

    explicit Impl(const Bytes& seed) {
        Bytes key = sha256(seed);
        unsigned char iv[16] = {0};
        ctx = EVP_CIPHER_CTX_new();
        if (!ctx ||
            EVP_EncryptInit_ex(ctx, EVP_aes_256_ctr(), nullptr,
                               reinterpret_cast<const unsigned char*>(key.data()), iv) != 1)
            throw CryptoError("rng init failed");
    }
    ~Impl() { EVP_CIPHER_CTX_free(ctx); }
};

Rng::Rng() {
    unsigned char seed[32];
    if (RAND_bytes(seed, sizeof seed) != 1) throw CryptoError("entropy unavailable");
    impl_ = std::make_unique<Impl>(Bytes(reinterpret_cast<char*>(seed), sizeof seed));
}

Rng::Rng(uint64_t seed) {
    Bytes s(8, '\0');
    for (int i = 0; i < 8; ++i) s[i] = static_cast<char>(seed >> (8 * (7 - i)));
    impl_ = std::make_unique<Impl>(s);
}

Rng::Rng(const Bytes& seed) : impl_(std::make_unique<Impl>(seed)) {}
Rng::~Rng() = default;

void Rng::fill(void* buf, size_t n) {
    static const unsigned char zeros[4096] = {0};
    auto* out = static_cast<unsigned char*>(buf);
    while (n > 0) {
        size_t chunk = n < sizeof zeros ? n : sizeof zeros;
        int outl = 0;
        if (EVP_EncryptUpdate(impl_->ctx, out, &outl, zeros, static_cast<int>(chunk)) != 1)
            throw CryptoError("rng stream failed");
        out += outl;
        n -= chunk;
    }
}

Bytes Rng::bytes(size_t n) {
    Bytes out(n, '\0');
    fill(out.data(), n);
    return out;
}

uint64_t Rng::next_u64() {
    uint64_t v;
    fill(&v, sizeof v);
    return v;
}

int64_t Rng::uniform(int64_t lo, int64_t hi) {
    if (lo > hi) throw Error("bad uniform range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(next_u64());
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % span);
}

size_t Rng::index(size_t n) {
    if (n == 0) throw Error("index over empty range");
    return static_cast<size_t>(uniform(0, static_cast<int64_t>(n) - 1));
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
bool Rng::chance(double p) { return uniform01() < p; }

Bytes random_key(Rng& rng) { return rng.bytes(kKeyBytes); }

// ---- deterministic wide-block cipher ----

namespace {

class AesEcb {
public:
    AesEcb(const Bytes& key, bool encrypt) {
        if (key.size() != kKeyBytes) throw CryptoError("DET key must be 32 bytes");
        ctx_ = EVP_CIPHER_CTX_new();
        auto* k = reinterpret_cast<const unsigned char*>(key.data());
        int ok = encrypt ? EVP_EncryptInit_ex(ctx_, EVP_aes_256_ecb(), nullptr, k, nullptr)
                         : EVP_DecryptInit_ex(ctx_, EVP_aes_256_ecb(), nullptr, k, nullptr);
        if (!ctx_ || ok != 1) throw CryptoError("AES init failed");
        EVP_CIPHER_CTX_set_padding(ctx_, 0);
        encrypt_ = encrypt;
    }
    ~AesEcb() { EVP_CIPHER_CTX_free(ctx_); }

    void block(const unsigned char* in, unsigned char* out) {
        int outl = 0;
        int ok = encrypt_ ? EVP_EncryptUpdate(ctx_, out, &outl, in, kDetBlock)
                          : EVP_DecryptUpdate(ctx_, out, &outl, in, kDetBlock);
        if (ok != 1 || outl != kDetBlock) throw CryptoError("AES block failed");
    }

private:
    EVP_CIPHER_CTX* ctx_;
    bool encrypt_;
};

void xor_block(unsigned char* dst, const unsigned char* src) {
    for (size_t i = 0; i < kDetBlock; ++i) dst[i] ^= src[i];
}

// doubling in GF(2^128), the usual x^128 + x^7 + x^2 + x + 1 reduction
void gf_double(unsigned char* b) {
    unsigned char carry = b[0] & 0x80;
    for (size_t i = 0; i + 1 < kDetBlock; ++i)
        b[i] = static_cast<unsigned char>(b[i] << 1 | b[i + 1] >> 7);
    b[kDetBlock - 1] <<= 1;
    if (carry) b[kDetBlock - 1] ^= 0x87;
}

}  // namespace

Bytes det_encrypt(const Bytes& key, const Bytes& plain) {
    // 10* padding: always append 0x80, zero-fill to the block boundary
    size_t padded = det_padded_len(plain.size());
    std::vector<unsigned char> p(padded, 0);
    std::memcpy(p.data(), plain.data(), plain.size());
    p[plain.size()] = 0x80;
    size_t m = padded / kDetBlock;

    AesEcb aes(key, true);
    // forward CBC with zero tweak
    std::vector<unsigned char> x(padded);
    unsigned char prev[kDetBlock] = {0};
    for (size_t i = 0; i < m; ++i) {
        unsigned char in[kDetBlock];
        std::memcpy(in, &p[i * kDetBlock], kDetBlock);
        xor_block(in, prev);
        aes.block(in, &x[i * kDetBlock]);
        std::memcpy(prev, &x[i * kDetBlock], kDetBlock);
    }
    // mask, reverse, second CBC layer
    unsigned char mask[kDetBlock];
    std::memcpy(mask, &x[0], kDetBlock);
    xor_block(mask, &x[(m - 1) * kDetBlock]);
    gf_double(mask);

    Bytes out(padded, '\0');
    unsigned char yprev[kDetBlock] = {0};
    for (size_t i = 0; i < m; ++i) {
        unsigned char y[kDetBlock];
        std::memcpy(y, &x[(m - 1 - i) * kDetBlock], kDetBlock);
        xor_block(y, mask);
        unsigned char in[kDetBlock];
        std::memcpy(in, y, kDetBlock);
        xor_block(in, yprev);
        aes.block(in, reinterpret_cast<unsigned char*>(&out[i * kDetBlock]));
        std::memcpy(yprev, y, kDetBlock);
    }
    return out;
}

Bytes det_decrypt(const Bytes& key, const Bytes& cipher) {
    if (cipher.empty() || cipher.size() % kDetBlock)
        throw CryptoError("DET ciphertext length not a block multiple");
    size_t m = cipher.size() / kDetBlock;
    AesEcb aes(key, false);

    std::vector<unsigned char> y(cipher.size());
    unsigned char yprev[kDetBlock] = {0};
    for (size_t i = 0; i < m; ++i) {
        unsigned char d[kDetBlock];
        aes.block(reinterpret_cast<const unsigned char*>(&cipher[i * kDetBlock]), d);
        xor_block(d, yprev);
        std::memcpy(&y[i * kDetBlock], d, kDetBlock);
        std::memcpy(yprev, d, kDetBlock);
    }
    unsigned char mask[kDetBlock];
    std::memcpy(mask, &y[0], kDetBlock);
    xor_block(mask, &y[(m - 1) * kDetBlock]);
    gf_double(mask);

    std::vector<unsigned char> x(cipher.size());
    for (size_t i = 0; i < m; ++i) {
        std::memcpy(&x[(m - 1 - i) * kDetBlock], &y[i * kDetBlock], kDetBlock);
        xor_block(&x[(m - 1 - i) * kDetBlock], mask);
    }
    std::vector<unsigned char> p(cipher.size());
    unsigned char prev[kDetBlock] = {0};
    AesEcb dec(key, false);
    for (size_t i = 0; i < m; ++i) {
        unsigned char d[kDetBlock];
        dec.block(&x[i * kDetBlock], d);
        xor_block(d, prev);
        std::memcpy(&p[i * kDetBlock], d, kDetBlock);
        std::memcpy(prev, &x[i * kDetBlock], kDetBlock);
    }
    // strip 10* padding
    size_t end = cipher.size();
    while (end > 0 && p[end - 1] == 0) --end;
    if (end == 0 || p[end - 1] != 0x80) throw CryptoError("DET padding check failed");
    return Bytes(reinterpret_cast<char*>(p.data()), end - 1);
}

// ---- adjustable keyed hash ----

namespace {

struct AkhGroup {
    EC_GROUP* group;
    BIGNUM* order;

    AkhGroup() {
        group = EC_GROUP_new_by_curve_name(NID_X9_62_prime192v1);
        if (!group) throw CryptoError("prime192v1 unavailable");
        order = BN_new();
        BN_copy(order, EC_GROUP_get0_order(group));
    }

    static const AkhGroup& get() {
        static AkhGroup g;
        return g;
    }
};

struct BnCtx {
    BN_CTX* ctx = BN_CTX_new();
    ~BnCtx() { BN_CTX_free(ctx); }
};

struct Bn {
    BIGNUM* n = BN_new();
    ~Bn() { BN_free(n); }
};

struct Point {
    EC_POINT* p;
    explicit Point(const EC_GROUP* g) : p(EC_POINT_new(g)) {}
    ~Point() { EC_POINT_free(p); }
};

Bytes bn_to_scalar(const BIGNUM* n) {
    Bytes out(kScalarBytes, '\0');
    if (BN_bn2binpad(n, reinterpret_cast<unsigned char*>(out.data()), kScalarBytes) < 0)
        throw CryptoError("scalar serialization failed");
    return out;
}

void scalar_to_bn(const Bytes& s, BIGNUM* out) {
    if (s.size() != kScalarBytes) throw CryptoError("scalar must be 24 bytes");
    BN_bin2bn(reinterpret_cast<const unsigned char*>(s.data()), kScalarBytes, out);
}

Bytes point_to_bytes(const EC_GROUP* g, const EC_POINT* p, BN_CTX* ctx) {
    Bytes out(kPointBytes, '\0');
    size_t len = EC_POINT_point2oct(g, p, POINT_CONVERSION_COMPRESSED,
                                    reinterpret_cast<unsigned char*>(out.data()), kPointBytes, ctx);
    if (len != kPointBytes) throw CryptoError("point serialization failed");
    return out;
}

}  // namespace

Bytes akh_random_scalar(Rng& rng) {
    const auto& g = AkhGroup::get();
    BnCtx ctx;
    Bn k;
    do {
        Bytes raw = rng.bytes(kScalarBytes + 8);
        Bn wide;
        BN_bin2bn(reinterpret_cast<const unsigned char*>(raw.data()), static_cast<int>(raw.size()),
                  wide.n);
        BN_mod(k.n, wide.n, g.order, ctx.ctx);
    } while (BN_is_zero(k.n));
    return bn_to_scalar(k.n);
}

Bytes akh_scalar_one() {
    Bn one;
    BN_one(one.n);
    return bn_to_scalar(one.n);
}

Bytes akh_scalar_from_bytes(const Bytes& raw) {
    const auto& g = AkhGroup::get();
    BnCtx ctx;
    Bn wide, r;
    BN_bin2bn(reinterpret_cast<const unsigned char*>(raw.data()), static_cast<int>(raw.size()),
              wide.n);
    BN_mod(r.n, wide.n, g.order, ctx.ctx);
    return bn_to_scalar(r.n);
}

Bytes akh_scalar_mul(const Bytes& a, const Bytes& b) {
    const auto& g = AkhGroup::get();
    BnCtx ctx;
    Bn ba, bb, r;
    scalar_to_bn(a, ba.n);
    scalar_to_bn(b, bb.n);
    BN_mod_mul(r.n, ba.n, bb.n, g.order, ctx.ctx);
    return bn_to_scalar(r.n);
}

Bytes akh_hash(const Bytes& k, const Bytes& v, const Bytes& k_master) {
    const auto& g = AkhGroup::get();
    // scalar from the first 32 ciphertext bytes (8 beyond the order width
    // keeps the mod-n bias negligible); expand short ciphertexts by
    // re-encrypting, re-derive with a domain separator if the result is 0
    Bytes input = v;
    Bytes s;
    while (true) {
        Bytes c = det_encrypt(k_master, input);
        while (c.size() < kScalarBytes + 8) c += det_encrypt(k_master, c);
        s = akh_scalar_from_bytes(c.substr(0, kScalarBytes + 8));
        if (s != Bytes(kScalarBytes, '\0')) break;
        input.push_back('\x01');
    }
    Bytes u = akh_scalar_mul(s, k);
    BnCtx ctx;
    Bn bu;
    scalar_to_bn(u, bu.n);
    Point p(g.group);
    if (EC_POINT_mul(g.group, p.p, bu.n, nullptr, nullptr, ctx.ctx) != 1)
        throw CryptoError("point multiplication failed");
    return point_to_bytes(g.group, p.p, ctx.ctx);
}

Bytes akh_token(const Bytes& k1, const Bytes& k2) {
    const auto& g = AkhGroup::get();
    BnCtx ctx;
    Bn b1, b2, inv, r;
    scalar_to_bn(k1, b1.n);
    scalar_to_bn(k2, b2.n);
    if (BN_is_zero(b1.n)) throw CryptoError("token source key is zero");
    if (!BN_mod_inverse(inv.n, b1.n, g.order, ctx.ctx))
        throw CryptoError("scalar not invertible");
    BN_mod_mul(r.n, b2.n, inv.n, g.order, ctx.ctx);
    return bn_to_scalar(r.n);
}

Bytes akh_adjust(const Bytes& elem, const Bytes& token) {
    const auto& g = AkhGroup::get();
    BnCtx ctx;
    Point w(g.group);
    if (EC_POINT_oct2point(g.group, w.p, reinterpret_cast<const unsigned char*>(elem.data()),
                           elem.size(), ctx.ctx) != 1)
        throw CryptoError("bad group element");
    Bn t;
    scalar_to_bn(token, t.n);
    Point r(g.group);
    if (EC_POINT_mul(g.group, r.p, nullptr, w.p, t.n, ctx.ctx) != 1)
        throw CryptoError("adjust failed");
    return point_to_bytes(g.group, r.p, ctx.ctx);
}

// ---- probabilistic encryption ----

namespace {
constexpr size_t kNonceBytes = 12;
constexpr size_t kTagBytes = 16;
}  // namespace

Bytes prob_encrypt(const Bytes& key, const Bytes& plain, Rng& rng) {
    if (key.size() != kKeyBytes) throw CryptoError("encryption key must be 32 bytes");
    Bytes nonce = rng.bytes(kNonceBytes);
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw CryptoError("GCM init failed");
    Bytes out = nonce;
    out.resize(kNonceBytes + plain.size() + kTagBytes);
    int outl = 0;
    bool ok =
        EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr,
                           reinterpret_cast<const unsigned char*>(key.data()),
                           reinterpret_cast<const unsigned char*>(nonce.data())) == 1 &&
        EVP_EncryptUpdate(ctx, reinterpret_cast<unsigned char*>(&out[kNonceBytes]), &outl,
                          reinterpret_cast<const unsigned char*>(plain.data()),
                          static_cast<int>(plain.size())) == 1;
    int fin = 0;
    ok = ok && EVP_EncryptFinal_ex(ctx, reinterpret_cast<unsigned char*>(&out[kNonceBytes]) + outl,
                                   &fin) == 1;
    ok = ok && EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, kTagBytes,
                                   &out[kNonceBytes + plain.size()]) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) throw CryptoError("GCM encryption failed");
    return out;
}

Bytes prob_decrypt(const Bytes& key, const Bytes& cipher) {
    if (cipher.size() < kNonceBytes + kTagBytes)
        throw CryptoError("ciphertext too short");
    size_t ctlen = cipher.size() - kNonceBytes - kTagBytes;
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw CryptoError("GCM init failed");
    Bytes out(ctlen, '\0');
    Bytes tag = cipher.substr(kNonceBytes + ctlen, kTagBytes);
    int outl = 0;
    bool ok =
        EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr,
                           reinterpret_cast<const unsigned char*>(key.data()),
                           reinterpret_cast<const unsigned char*>(cipher.data())) == 1 &&
        EVP_DecryptUpdate(ctx, reinterpret_cast<unsigned char*>(out.data()), &outl,
                          reinterpret_cast<const unsigned char*>(cipher.data()) + kNonceBytes,
                          static_cast<int>(ctlen)) == 1 &&
        EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, kTagBytes,
                            const_cast<char*>(tag.data())) == 1;
    int fin = 0;
    ok = ok && EVP_DecryptFinal_ex(ctx, reinterpret_cast<unsigned char*>(out.data()) + outl,
                                   &fin) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) throw CryptoError("authentication failure");
    return out;
}

}  // namespace encaudit
