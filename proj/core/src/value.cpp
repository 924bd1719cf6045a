#include "encaudit/value.hpp"

namespace encaudit {

std::string to_hex(const Bytes& b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (unsigned char c : b) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error("bad hex digit");
}

Bytes from_hex(const std::string& h) {
    if (h.size() % 2) throw Error("odd-length hex string");
    Bytes out;
    out.reserve(h.size() / 2);
    for (size_t i = 0; i < h.size(); i += 2)
        out.push_back(static_cast<char>(hex_nibble(h[i]) << 4 | hex_nibble(h[i + 1])));
    return out;
}

Provenance Provenance::parse(const std::string& text) {
    auto dot = text.rfind('.');
    if (dot == std::string::npos || dot + 1 >= text.size())
        throw Error("bad provenance: " + text);
    return Provenance{text.substr(0, dot), std::stoi(text.substr(dot + 1))};
}

Value Value::of_int(int64_t v) {
    Value x;
    x.kind_ = Kind::Int;
    x.int_ = v;
    return x;
}
Value Value::of_str(Bytes s) {
    Value x;
    x.kind_ = Kind::Str;
    x.a_ = std::move(s);
    return x;
}
Value Value::det(Bytes cipher) {
    Value x;
    x.kind_ = Kind::Det;
    x.a_ = std::move(cipher);
    return x;
}
Value Value::kh(Bytes hash, Bytes cipher) {
    Value x;
    x.kind_ = Kind::Kh;
    x.a_ = std::move(hash);
    x.b_ = std::move(cipher);
    return x;
}

int64_t Value::as_int() const {
    if (kind_ != Kind::Int) throw Error("value is not an integer");
    return int_;
}
const Bytes& Value::str() const {
    if (kind_ != Kind::Str) throw Error("value is not a string");
    return a_;
}
const Bytes& Value::det_bytes() const {
    if (kind_ != Kind::Det) throw Error("value is not a DET ciphertext");
    return a_;
}
const Bytes& Value::kh_hash() const {
    if (kind_ != Kind::Kh) throw Error("value is not a KH pair");
    return a_;
}
const Bytes& Value::kh_cipher() const {
    if (kind_ != Kind::Kh) throw Error("value is not a KH pair");
    return b_;
}

static Bytes int_be(int64_t v) {
    Bytes out(8, '\0');
    auto u = static_cast<uint64_t>(v);
    for (int i = 7; i >= 0; --i) {
        out[i] = static_cast<char>(u & 0xff);
        u >>= 8;
    }
    return out;
}

Bytes Value::canonical() const {
    switch (kind_) {
        case Kind::Int: return Bytes(1, 'i') + int_be(int_);
        case Kind::Str: return Bytes(1, 's') + a_;
        default: throw Error("canonical() on an encrypted value");
    }
}

Value Value::from_canonical(const Bytes& enc) {
    if (enc.empty()) throw Error("empty canonical value");
    if (enc[0] == 's') return of_str(enc.substr(1));
    if (enc[0] == 'i') {
        if (enc.size() != 9) throw Error("bad canonical integer");
        uint64_t u = 0;
        for (int i = 1; i <= 8; ++i) u = u << 8 | static_cast<unsigned char>(enc[i]);
        return of_int(static_cast<int64_t>(u));
    }
    throw Error("bad canonical tag");
}

Bytes Value::compare_key() const {
    switch (kind_) {
        case Kind::Int: return Bytes(1, 'i') + int_be(int_);
        case Kind::Str: return Bytes(1, 's') + a_;
        case Kind::Det: return Bytes(1, 'd') + a_;
        case Kind::Kh: return Bytes(1, 'h') + a_;  // hash component only
    }
    throw Error("unreachable");
}

}  // namespace encaudit
