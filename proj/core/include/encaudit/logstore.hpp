#pragma once

#include <map>
#include <optional>
#include <vector>

#include "encaudit/modecheck.hpp"
#include "encaudit/policy.hpp"
#include "encaudit/value.hpp"

namespace encaudit {

// Three-valued lookup result. Unknown only arises on incomplete tables.
enum class Lookup3 { True, False, Unknown };

struct TableSchema {
    std::string name;
    std::vector<std::string> columns;
    std::set<int> time_cols;  // 1-based
    bool complete = true;
};

// Table order is canonicalized to name order, which fixes the traversal
// order used by timestamps_of on both sides of any comparison.
struct Schema {
    std::vector<TableSchema> tables;

    void add(TableSchema t);
    const TableSchema* find(const std::string& name) const;
    const TableSchema& at(const std::string& name) const;
    static Schema from_modes(const ModeTable& modes);
};

using Row = std::vector<Value>;

struct ColumnConstraint {
    int col = 0;  // 1-based
    Value value;
};

// In-memory row store holding plaintext or encrypted cells. Mutation
// (loading, indexing) is single-writer; reads after freeze are concurrent.
class Log {
public:
    Schema schema;

    void append_row(const std::string& table, Row row);
    const std::vector<Row>& rows(const std::string& table) const;

    Lookup3 lookup(const PredAtom& ground_atom) const;
    std::vector<size_t> select(const std::string& table) const;
    std::vector<size_t> constrained_select(const std::string& table,
                                           const std::vector<ColumnConstraint>& cs) const;

    void build_index(const std::string& table, int col);
    void build_input_indexes(const ModeTable& modes);

    // mutation guard for audits; asserts on writes after freeze
    void freeze() { frozen_ = true; }

    // first-occurrence unique timestamps, tables in schema order
    std::vector<Value> timestamp_cells() const;
    std::vector<int64_t> timestamps() const;  // plaintext logs only

    size_t index_probes() const { return probes_; }
    size_t full_scans() const { return scans_; }
    size_t total_rows() const;
    // physical column count; Kh cells occupy a hash and a cipher column
    size_t physical_columns(const std::string& table) const;

    void save(const std::string& dir) const;
    static Log load(const std::string& dir);
    std::string serialize_table(const std::string& table) const;
    size_t serialized_size() const;

private:
    std::map<std::string, std::vector<Row>> rows_;
    // per (table, column): compare_key -> row ids ascending
    std::map<std::pair<std::string, int>, std::map<Bytes, std::vector<size_t>>> indexes_;
    bool frozen_ = false;
    mutable size_t probes_ = 0;
    mutable size_t scans_ = 0;
};

// L1 extends L2: L1 only determinizes unknown entries of L2.
bool log_extends(const Log& l1, const Log& l2);

}  // namespace encaudit
