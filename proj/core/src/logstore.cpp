#include "encaudit/logstore.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace encaudit {

void Schema::add(TableSchema t) {
    if (find(t.name)) throw StoreError("duplicate table " + t.name);
    for (int c : t.time_cols)
        if (c < 1 || c > static_cast<int>(t.columns.size()))
            throw StoreError("time column out of range in " + t.name);
    auto pos = std::lower_bound(tables.begin(), tables.end(), t.name,
                                [](const TableSchema& a, const std::string& n) { return a.name < n; });
    tables.insert(pos, std::move(t));
}

const TableSchema* Schema::find(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

const TableSchema& Schema::at(const std::string& name) const {
    const TableSchema* t = find(name);
    if (!t) throw StoreError("unknown table: " + name);
    return *t;
}

Schema Schema::from_modes(const ModeTable& modes) {
    Schema s;
    for (const auto& [name, spec] : modes.all()) {
        TableSchema t;
        t.name = name;
        for (int i = 1; i <= spec.arity; ++i) t.columns.push_back("c" + std::to_string(i));
        t.time_cols = spec.time_cols;
        s.add(std::move(t));
    }
    return s;
}

void Log::append_row(const std::string& table, Row row) {
    if (frozen_) throw StoreError("store is frozen");
    const TableSchema& t = schema.at(table);
    if (row.size() != t.columns.size())
        throw StoreError("row width " + std::to_string(row.size()) + " != arity of " + table);
    for (int c : t.time_cols) {
        const Value& v = row[c - 1];
        if (v.is_plain() && !v.is_int())
            throw StoreError("non-integer timestamp in " + table);
    }
    rows_[table].push_back(std::move(row));
}

const std::vector<Row>& Log::rows(const std::string& table) const {
    schema.at(table);
    static const std::vector<Row> empty;
    auto it = rows_.find(table);
    return it == rows_.end() ? empty : it->second;
}

Lookup3 Log::lookup(const PredAtom& atom) const {
    const TableSchema& t = schema.at(atom.pred);
    if (atom.args.size() != t.columns.size()) throw StoreError("arity mismatch in lookup");
    std::vector<ColumnConstraint> cs;
    for (size_t i = 0; i < atom.args.size(); ++i) {
        if (atom.args[i].is_var()) throw StoreError("lookup on non-ground atom");
        cs.push_back({static_cast<int>(i) + 1, atom.args[i].val()});
    }
    bool present = !constrained_select(atom.pred, cs).empty();
    if (present) return Lookup3::True;
    return t.complete ? Lookup3::False : Lookup3::Unknown;
}

std::vector<size_t> Log::select(const std::string& table) const {
    const auto& rs = rows(table);
    std::vector<size_t> out(rs.size());
    for (size_t i = 0; i < rs.size(); ++i) out[i] = i;
    return out;
}

std::vector<size_t> Log::constrained_select(const std::string& table,
                                            const std::vector<ColumnConstraint>& cs) const {
    const TableSchema& t = schema.at(table);
    for (const auto& c : cs)
        if (c.col < 1 || c.col > static_cast<int>(t.columns.size()))
            throw StoreError("unknown column " + std::to_string(c.col) + " in " + table);
    if (cs.empty()) return select(table);
    const auto& rs = rows(table);

    // use the first constrained column that has an index, filter the rest
    const std::vector<size_t>* candidates = nullptr;
    std::vector<size_t> from_index;
    size_t index_col = 0;
    for (const auto& c : cs) {
        auto it = indexes_.find({table, c.col});
        if (it == indexes_.end()) continue;
        ++probes_;
        auto hit = it->second.find(c.value.compare_key());
        if (hit != it->second.end()) from_index = hit->second;
        candidates = &from_index;
        index_col = static_cast<size_t>(c.col);
        break;
    }
    std::vector<size_t> scan;
    if (!candidates) {
        ++scans_;
        scan = select(table);
        candidates = &scan;
    }

    std::vector<size_t> out;
    for (size_t id : *candidates) {
        const Row& row = rs[id];
        bool ok = true;
        for (const auto& c : cs) {
            if (static_cast<size_t>(c.col) == index_col) continue;
            if (row[c.col - 1].compare_key() != c.value.compare_key()) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(id);
    }
    return out;
}

void Log::build_index(const std::string& table, int col) {
    const TableSchema& t = schema.at(table);
    if (col < 1 || col > static_cast<int>(t.columns.size()))
        throw StoreError("unknown column for index on " + table);
    auto& idx = indexes_[{table, col}];
    idx.clear();
    const auto& rs = rows(table);
    for (size_t i = 0; i < rs.size(); ++i) idx[rs[i][col - 1].compare_key()].push_back(i);
}

void Log::build_input_indexes(const ModeTable& modes) {
    for (const auto& t : schema.tables) {
        if (!modes.contains(t.name)) continue;
        for (int pos : modes.find(t.name).inputs) build_index(t.name, pos);
    }
}

std::vector<Value> Log::timestamp_cells() const {
    std::vector<Value> out;
    std::set<Bytes> seen;
    for (const auto& t : schema.tables) {
        const auto& rs = rows(t.name);
        for (const auto& row : rs)
            for (int c : t.time_cols) {
                const Value& v = row[c - 1];
                if (seen.insert(v.compare_key()).second) out.push_back(v);
            }
    }
    return out;
}

std::vector<int64_t> Log::timestamps() const {
    std::vector<int64_t> out;
    for (const auto& v : timestamp_cells()) out.push_back(v.as_int());
    return out;
}

size_t Log::total_rows() const {
    size_t n = 0;
    for (const auto& [name, rs] : rows_) n += rs.size();
    return n;
}

size_t Log::physical_columns(const std::string& table) const {
    const TableSchema& t = schema.at(table);
    const auto& rs = rows(table);
    if (rs.empty() || rs[0].empty()) return t.columns.size();
    return rs[0][0].kind() == Value::Kind::Kh ? t.columns.size() * 2 : t.columns.size();
}

namespace {

std::string encode_cell(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::Int: return std::to_string(v.as_int());
        case Value::Kind::Str: return v.str();
        case Value::Kind::Det: return "0x" + to_hex(v.det_bytes());
        case Value::Kind::Kh: return "0x" + to_hex(v.kh_hash()) + ":0x" + to_hex(v.kh_cipher());
    }
    throw StoreError("unreachable");
}

Value decode_cell(const std::string& text, bool time_col) {
    if (text.rfind("0x", 0) == 0) {
        auto sep = text.find(":0x");
        if (sep != std::string::npos)
            return Value::kh(from_hex(text.substr(2, sep - 2)), from_hex(text.substr(sep + 3)));
        return Value::det(from_hex(text.substr(2)));
    }
    if (time_col) return Value::of_int(std::stoll(text));
    return Value::of_str(text);
}

}  // namespace

std::string Log::serialize_table(const std::string& table) const {
    const TableSchema& t = schema.at(table);
    std::string out = "table " + t.name + (t.complete ? " complete" : " incomplete") + " cols(";
    for (size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out += ",";
        out += t.columns[i];
    }
    out += ")";
    if (!t.time_cols.empty()) {
        out += " time(";
        bool first = true;
        for (int c : t.time_cols) {
            if (!first) out += ",";
            out += std::to_string(c);
            first = false;
        }
        out += ")";
    }
    out += "\n";
    for (const auto& row : rows(table)) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += "\t";
            out += encode_cell(row[i]);
        }
        out += "\n";
    }
    return out;
}

size_t Log::serialized_size() const {
    size_t n = 0;
    for (const auto& t : schema.tables) n += serialize_table(t.name).size();
    return n;
}

void Log::save(const std::string& dir) const {
    fs::create_directories(dir);
    for (const auto& t : schema.tables) {
        std::ofstream out(fs::path(dir) / (t.name + ".tbl"));
        if (!out) throw StoreError("cannot write table file for " + t.name);
        out << serialize_table(t.name);
    }
}

Log Log::load(const std::string& dir) {
    Log log;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".tbl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    struct Pending { TableSchema schema; std::vector<Row> rows; };
    std::vector<Pending> loaded;
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw StoreError("cannot open " + path.string());
        std::string header;
        if (!std::getline(in, header)) throw StoreError("empty table file " + path.string());
        std::istringstream hs(header);
        std::string kw, name, completeness;
        hs >> kw >> name >> completeness;
        if (kw != "table") throw StoreError("bad table header in " + path.string());
        Pending p;
        p.schema.name = name;
        p.schema.complete = completeness == "complete";
        if (!p.schema.complete && completeness != "incomplete")
            throw StoreError("bad completeness flag in " + path.string());
        std::string item;
        while (hs >> item) {
            if (item.rfind("cols(", 0) == 0 && item.back() == ')') {
                std::istringstream cs(item.substr(5, item.size() - 6));
                std::string col;
                while (std::getline(cs, col, ',')) p.schema.columns.push_back(col);
            } else if (item.rfind("time(", 0) == 0 && item.back() == ')') {
                std::istringstream ts(item.substr(5, item.size() - 6));
                std::string idx;
                while (std::getline(ts, idx, ',')) p.schema.time_cols.insert(std::stoi(idx));
            } else {
                throw StoreError("bad header item " + item + " in " + path.string());
            }
        }
        if (p.schema.columns.empty()) throw StoreError("no columns in " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            Row row;
            size_t start = 0, col = 0;
            while (true) {
                auto tab = line.find('\t', start);
                std::string cell =
                    tab == std::string::npos ? line.substr(start) : line.substr(start, tab - start);
                row.push_back(decode_cell(cell, p.schema.time_cols.count(static_cast<int>(col) + 1) > 0));
                ++col;
                if (tab == std::string::npos) break;
                start = tab + 1;
            }
            if (row.size() != p.schema.columns.size())
                throw StoreError("row width mismatch in " + path.string());
            p.rows.push_back(std::move(row));
        }
        loaded.push_back(std::move(p));
    }
    for (auto& p : loaded) log.schema.add(p.schema);
    for (auto& p : loaded)
        for (auto& row : p.rows) log.append_row(p.schema.name, std::move(row));
    return log;
}

namespace {

std::set<std::vector<Bytes>> row_set(const Log& log, const std::string& table) {
    std::set<std::vector<Bytes>> out;
    for (const auto& row : log.rows(table)) {
        std::vector<Bytes> keys;
        keys.reserve(row.size());
        for (const auto& v : row) keys.push_back(v.compare_key());
        out.insert(std::move(keys));
    }
    return out;
}

}  // namespace

bool log_extends(const Log& l1, const Log& l2) {
    if (l1.schema.tables.size() != l2.schema.tables.size())
        throw StoreError("schema mismatch in extends");
    for (size_t i = 0; i < l1.schema.tables.size(); ++i) {
        const TableSchema& t1 = l1.schema.tables[i];
        const TableSchema& t2 = l2.schema.tables[i];
        if (t1.name != t2.name || t1.columns.size() != t2.columns.size())
            throw StoreError("schema mismatch in extends: " + t1.name);
        auto r1 = row_set(l1, t1.name);
        auto r2 = row_set(l2, t2.name);
        if (t2.complete) {
            // entries of a complete table are all decided; nothing may change
            if (!t1.complete || r1 != r2) return false;
        } else {
            if (!std::includes(r1.begin(), r1.end(), r2.begin(), r2.end())) return false;
        }
    }
    return true;
}

}  // namespace encaudit
