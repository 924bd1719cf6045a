#include "encaudit/moped.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace encaudit {

int DictOracle::compare(const Bytes& a, const Bytes& b) {
    ++calls_;
    auto ia = plain_.find(a), ib = plain_.find(b);
    if (ia == plain_.end() || ib == plain_.end())
        throw Error("oracle does not know a sum ciphertext");
    if (ia->second < ib->second) return -1;
    return ia->second > ib->second ? 1 : 0;
}

int64_t DictOracle::plaintext(const Bytes& sum_cipher) const {
    auto it = plain_.find(sum_cipher);
    if (it == plain_.end()) throw Error("oracle does not know a sum ciphertext");
    return it->second;
}

int MopedView::rank(const Bytes& et, const Bytes& ed) const {
    auto r = find_rank(et, ed);
    if (!r) throw UnknownTimestampError("unregistered (timestamp, displacement) pair");
    return *r;
}

bool MopedView::time_order(const Bytes& et1, const Bytes& ed1, const Bytes& et2,
                           const Bytes& ed2) const {
    return rank(et1, ed1) <= rank(et2, ed2);
}

MopedStatic MopedStatic::build(const std::vector<int64_t>& timestamps,
                               const std::set<int64_t>& displacements,
                               const std::function<Bytes(int64_t)>& enc) {
    if (!displacements.count(0)) throw Error("displacement set must contain 0");
    std::set<int64_t> sums;
    for (int64_t t : timestamps)
        for (int64_t d : displacements) sums.insert(t + d);
    std::map<int64_t, int> rank_of;
    int next = 1;
    for (int64_t s : sums) rank_of[s] = next++;

    MopedStatic out;
    out.count_ = sums.size();
    std::map<int64_t, Bytes> enc_d;
    for (int64_t d : displacements) enc_d[d] = enc(d);
    for (int64_t t : timestamps) {
        Bytes et = enc(t);
        auto& inner = out.table_[et];
        for (int64_t d : displacements) inner[enc_d[d]] = rank_of[t + d];
    }
    return out;
}

MopedStatic MopedStatic::from_entries(const std::vector<MopedEntry>& entries) {
    MopedStatic out;
    out.count_ = entries.size();
    for (size_t i = 0; i < entries.size(); ++i)
        for (const auto& [et, ed] : entries[i].assocs)
            out.table_[et][ed] = static_cast<int>(i) + 1;
    return out;
}

std::optional<int> MopedStatic::find_rank(const Bytes& et, const Bytes& ed) const {
    auto outer = table_.find(et);
    if (outer == table_.end()) return std::nullopt;
    auto inner = outer->second.find(ed);
    if (inner == outer->second.end()) return std::nullopt;
    return inner->second;
}

// ---- tree variant ----

MopedTree::Node* MopedTree::insert_sum(std::unique_ptr<Node>& slot, const Bytes& sum,
                                       ClientOracle& oracle) {
    if (!slot) {
        slot = std::make_unique<Node>();
        slot->sum = sum;
        ++node_count_;
        return slot.get();
    }
    int c = oracle.compare(sum, slot->sum);
    if (c == 0) return slot.get();  // duplicate sums coalesce
    Node* inserted = insert_sum(c < 0 ? slot->left : slot->right, sum, oracle);

    auto h = [](const std::unique_ptr<Node>& n) { return n ? n->height : 0; };
    slot->height = 1 + std::max(h(slot->left), h(slot->right));
    int balance = h(slot->left) - h(slot->right);
    auto rotate_right = [&](std::unique_ptr<Node>& y) {
        std::unique_ptr<Node> x = std::move(y->left);
        y->left = std::move(x->right);
        y->height = 1 + std::max(h(y->left), h(y->right));
        x->right = std::move(y);
        x->height = 1 + std::max(h(x->left), h(x->right));
        y = std::move(x);
    };
    auto rotate_left = [&](std::unique_ptr<Node>& x) {
        std::unique_ptr<Node> y = std::move(x->right);
        x->right = std::move(y->left);
        x->height = 1 + std::max(h(x->left), h(x->right));
        y->left = std::move(x);
        y->height = 1 + std::max(h(y->left), h(y->right));
        x = std::move(y);
    };
    if (balance > 1) {
        // left-right case needs the inner rotation first; decide by height
        if (h(slot->left->right) > h(slot->left->left)) rotate_left(slot->left);
        rotate_right(slot);
    } else if (balance < -1) {
        if (h(slot->right->left) > h(slot->right->right)) rotate_right(slot->right);
        rotate_left(slot);
    }
    return inserted;
}

void MopedTree::insert(const Bytes& enc_t, const std::vector<std::pair<Bytes, Bytes>>& sums,
                       ClientOracle& oracle) {
    if (std::find(et_order_.begin(), et_order_.end(), enc_t) == et_order_.end())
        et_order_.push_back(enc_t);
    for (const auto& [ed, enc_sum] : sums) {
        Node* node = insert_sum(root_, enc_sum, oracle);
        auto key = std::make_pair(enc_t, ed);
        if (!assoc_index_.count(key)) {
            node->assocs.emplace_back(enc_t, ed);
            assoc_index_[key] = node;
        }
        ranks_dirty_ = true;
    }
}

void MopedTree::refresh_ranks() const {
    int next = 1;
    // iterative in-order walk
    std::vector<const Node*> stack;
    const Node* cur = root_.get();
    while (cur || !stack.empty()) {
        while (cur) {
            stack.push_back(cur);
            cur = cur->left.get();
        }
        cur = stack.back();
        stack.pop_back();
        cur->rank = next++;
        cur = cur->right.get();
    }
    ranks_dirty_ = false;
}

std::optional<int> MopedTree::find_rank(const Bytes& et, const Bytes& ed) const {
    auto it = assoc_index_.find({et, ed});
    if (it == assoc_index_.end()) return std::nullopt;
    if (ranks_dirty_) refresh_ranks();
    return it->second->rank;
}

std::vector<MopedEntry> MopedTree::entries() const {
    std::vector<MopedEntry> out;
    std::vector<const Node*> stack;
    const Node* cur = root_.get();
    while (cur || !stack.empty()) {
        while (cur) {
            stack.push_back(cur);
            cur = cur->left.get();
        }
        cur = stack.back();
        stack.pop_back();
        out.push_back({cur->sum, cur->assocs});
        cur = cur->right.get();
    }
    return out;
}

MopedTree MopedTree::from_entries(const std::vector<MopedEntry>& entries) {
    MopedTree tree;
    // balanced build from the already-sorted node list
    std::function<std::unique_ptr<Node>(size_t, size_t)> build = [&](size_t lo, size_t hi)
        -> std::unique_ptr<Node> {
        if (lo >= hi) return nullptr;
        size_t mid = (lo + hi) / 2;
        auto node = std::make_unique<Node>();
        node->sum = entries[mid].sum;
        node->assocs = entries[mid].assocs;
        node->left = build(lo, mid);
        node->right = build(mid + 1, hi);
        auto h = [](const std::unique_ptr<Node>& n) { return n ? n->height : 0; };
        node->height = 1 + std::max(h(node->left), h(node->right));
        return node;
    };
    tree.root_ = build(0, entries.size());
    tree.node_count_ = entries.size();
    std::function<void(const Node*)> index = [&](const Node* n) {
        if (!n) return;
        for (const auto& [et, ed] : n->assocs) {
            tree.assoc_index_[{et, ed}] = n;
            if (std::find(tree.et_order_.begin(), tree.et_order_.end(), et) ==
                tree.et_order_.end())
                tree.et_order_.push_back(et);
        }
        index(n->left.get());
        index(n->right.get());
    };
    index(tree.root_.get());
    tree.ranks_dirty_ = true;
    return tree;
}

size_t MopedTree::height() const { return root_ ? static_cast<size_t>(root_->height) : 0; }

std::string MopedTree::shape_signature() const {
    std::map<Bytes, int> et_index;
    for (size_t i = 0; i < et_order_.size(); ++i) et_index[et_order_[i]] = static_cast<int>(i);
    std::map<Bytes, int> ed_index;  // displacements by first appearance in-order
    for (const auto& e : entries())
        for (const auto& [et, ed] : e.assocs)
            if (!ed_index.count(ed)) ed_index[ed] = static_cast<int>(ed_index.size());

    std::function<std::string(const Node*)> walk = [&](const Node* n) -> std::string {
        if (!n) return "_";
        std::string out = "(";
        std::vector<std::pair<int, int>> pat;
        for (const auto& [et, ed] : n->assocs) pat.emplace_back(et_index[et], ed_index[ed]);
        std::sort(pat.begin(), pat.end());
        for (auto& [a, b] : pat)
            out += std::to_string(a) + ":" + std::to_string(b) + ",";
        out += walk(n->left.get()) + walk(n->right.get()) + ")";
        return out;
    };
    return walk(root_.get());
}

void save_moped(const MopedTree& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write moped file: " + path);
    for (const auto& e : tree.entries()) {
        out << to_hex(e.sum) << " |";
        bool first = true;
        for (const auto& [et, ed] : e.assocs) {
            out << (first ? " " : ", ") << to_hex(et) << ":" << to_hex(ed);
            first = false;
        }
        out << "\n";
    }
}

std::vector<MopedEntry> load_moped_entries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open moped file: " + path);
    std::vector<MopedEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto bar = line.find(" |");
        if (bar == std::string::npos) throw Error("bad moped line: " + line);
        MopedEntry e;
        e.sum = from_hex(line.substr(0, bar));
        std::string rest = line.substr(bar + 2);
        std::istringstream rs(rest);
        std::string pair;
        while (std::getline(rs, pair, ',')) {
            auto colon = pair.find(':');
            if (colon == std::string::npos) throw Error("bad moped assoc: " + pair);
            std::string et = pair.substr(0, colon), ed = pair.substr(colon + 1);
            auto trim = [](std::string& s) {
                while (!s.empty() && s.front() == ' ') s.erase(s.begin());
                while (!s.empty() && s.back() == ' ') s.pop_back();
            };
            trim(et);
            trim(ed);
            e.assocs.emplace_back(from_hex(et), from_hex(ed));
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace encaudit
