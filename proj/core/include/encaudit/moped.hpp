#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "encaudit/value.hpp"

namespace encaudit {

// Trusted-side comparator used only while building or extending the tree.
// Audit-time queries never touch it.
class ClientOracle {
public:
    virtual ~ClientOracle() = default;
    virtual int compare(const Bytes& sum_a, const Bytes& sum_b) = 0;
    size_t calls() const { return calls_; }

protected:
    size_t calls_ = 0;
};

// Oracle backed by the client's sum-ciphertext dictionary, recorded while
// the client encrypts t+d values.
class DictOracle : public ClientOracle {
public:
    void learn(const Bytes& sum_cipher, int64_t sum) { plain_[sum_cipher] = sum; }
    int compare(const Bytes& a, const Bytes& b) override;
    int64_t plaintext(const Bytes& sum_cipher) const;

private:
    std::map<Bytes, int64_t> plain_;
};

// Read surface the audit engine uses: the rank of t+d among all registered
// sums, equal sums sharing a rank.
class MopedView {
public:
    virtual ~MopedView() = default;
    virtual std::optional<int> find_rank(const Bytes& et, const Bytes& ed) const = 0;
    virtual size_t size() const = 0;  // number of distinct sums

    int rank(const Bytes& et, const Bytes& ed) const;
    bool time_order(const Bytes& et1, const Bytes& ed1, const Bytes& et2,
                    const Bytes& ed2) const;
};

// One in-order node: a sum ciphertext and the (enc t, enc d) pairs mapping
// to it. The serialized form is one line per node.
struct MopedEntry {
    Bytes sum;
    std::vector<std::pair<Bytes, Bytes>> assocs;
};

// Fixed-log variant: nested maps, ranks assigned at build time.
class MopedStatic : public MopedView {
public:
    static MopedStatic build(const std::vector<int64_t>& timestamps,
                             const std::set<int64_t>& displacements,
                             const std::function<Bytes(int64_t)>& enc);
    static MopedStatic from_entries(const std::vector<MopedEntry>& entries);

    std::optional<int> find_rank(const Bytes& et, const Bytes& ed) const override;
    size_t size() const override { return count_; }

private:
    std::map<Bytes, std::map<Bytes, int>> table_;
    size_t count_ = 0;
};

// Mutable variant: an AVL tree over opaque sum ciphertexts, ordered via the
// client oracle at insert time. Ranks are dense in-order positions,
// recomputed lazily; queries never consult the oracle.
class MopedTree : public MopedView {
public:
    MopedTree() = default;
    MopedTree(MopedTree&&) = default;
    MopedTree& operator=(MopedTree&&) = default;

    // Registers enc_t with its displaced sums. Each element of sums pairs an
    // encrypted displacement with the encrypted t+d value.
    void insert(const Bytes& enc_t, const std::vector<std::pair<Bytes, Bytes>>& sums,
                ClientOracle& oracle);

    std::optional<int> find_rank(const Bytes& et, const Bytes& ed) const override;
    size_t size() const override { return node_count_; }

    std::vector<MopedEntry> entries() const;  // in-order
    static MopedTree from_entries(const std::vector<MopedEntry>& entries);

    // Shape plus association pattern with values replaced by first-seen
    // indexes; equal signatures mean isomorphic structures.
    std::string shape_signature() const;

    size_t height() const;

private:
    struct Node {
        Bytes sum;
        std::vector<std::pair<Bytes, Bytes>> assocs;
        std::unique_ptr<Node> left, right;
        int height = 1;
        mutable int rank = 0;
    };

    Node* insert_sum(std::unique_ptr<Node>& slot, const Bytes& sum, ClientOracle& oracle);
    void refresh_ranks() const;

    std::unique_ptr<Node> root_;
    std::map<std::pair<Bytes, Bytes>, const Node*> assoc_index_;
    std::vector<Bytes> et_order_;  // first-seen order, for the signature
    size_t node_count_ = 0;
    mutable bool ranks_dirty_ = true;
};

void save_moped(const MopedTree& tree, const std::string& path);
std::vector<MopedEntry> load_moped_entries(const std::string& path);

}  // namespace encaudit
