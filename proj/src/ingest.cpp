#include "ddosgan/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ddosgan/common.hpp"
#include "json.hpp"

namespace ddosgan::ingest {

namespace {

constexpr std::string_view kDatasetMagic = "#ddosgan-dataset v1";

std::vector<std::string_view> split_cells(std::string_view line, char sep) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t end = line.find(sep, start);
        std::string_view cell = line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        cells.push_back(cell);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return cells;
}

bool equals_ignore_case(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
        if (x != y) return false;
    }
    return true;
}

// Cells that belong in a numeric column even though they carry no finite value.
bool is_invalid_numeric_token(std::string_view cell) {
    if (cell.empty()) return true;
    if (cell.front() == '+' || cell.front() == '-') cell.remove_prefix(1);
    return equals_ignore_case(cell, "inf") || equals_ignore_case(cell, "infinity") ||
           equals_ignore_case(cell, "nan");
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::label: return "label";
    }
    return "numeric";
}

ColumnKind column_kind_from_string(std::string_view s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "label") return ColumnKind::label;
    throw ValidationError("unknown column kind: " + std::string(s));
}

LabelMap::LabelMap(std::map<std::string, int> entries) {
    for (auto& [raw, encoded] : entries) set(raw, encoded);
}

LabelMap LabelMap::cicids_wednesday() {
    return LabelMap({{"BENIGN", 0},
                     {"DoS Hulk", 1},
                     {"DoS GoldenEye", 1},
                     {"DoS slowloris", 1},
                     {"DoS Slowhttptest", 1},
                     {"Heartbleed", 1}});
}

void LabelMap::set(std::string raw, int encoded) {
    if (encoded != 0 && encoded != 1) throw ValidationError("label map values must be 0 or 1, got " + std::to_string(encoded));
    entries_[trim(raw)] = encoded;
}

std::optional<int> LabelMap::find(std::string_view raw) const {
    auto it = entries_.find(raw);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string_view> RawTable::row(std::size_t i) const {
    const auto& span = lines_.at(i);
    return split_cells(std::string_view(text_).substr(span.begin, span.end - span.begin), ',');
}

std::optional<std::size_t> RawTable::label_column() const {
    for (std::size_t c = 0; c < schema_.size(); ++c)
        if (schema_[c].kind == ColumnKind::label) return c;
    return std::nullopt;
}

std::optional<double> parse_finite(std::string_view cell) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    if (cell.empty()) return std::nullopt;
    if (cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

RawTable parse_csv(std::string text, const std::vector<ColumnSchema>* schema_hint) {
    RawTable table;
    table.text_ = std::move(text);
    const std::string_view all(table.text_);

    std::size_t pos = 0, line_no = 0;
    std::vector<std::string_view> header;
    bool have_header = false;
    while (pos < all.size()) {
        std::size_t nl = all.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? all.size() : nl;
        ++line_no;
        std::string_view line = all.substr(pos, end - pos);
        std::size_t line_begin = pos;
        pos = nl == std::string_view::npos ? all.size() : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        if (!have_header) {
            header = split_cells(line, ',');
            have_header = true;
            continue;
        }
        std::size_t cells = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
        if (cells != header.size()) {
            throw ValidationError("ragged row at line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " cells, found " + std::to_string(cells));
        }
        table.lines_.push_back({line_begin, line_begin + line.size(), line_no});
    }
    if (!have_header) throw ValidationError("CSV has no header line");

    std::unordered_map<std::string, int> seen;
    for (auto h : header) {
        std::string name(h);
        int& n = seen[name];
        if (n > 0) name += "." + std::to_string(n);
        ++n;
        table.schema_.push_back({name, ColumnKind::numeric});
    }

    std::vector<bool> hinted(table.schema_.size(), false);
    if (schema_hint) {
        for (const auto& hint : *schema_hint) {
            for (std::size_t c = 0; c < table.schema_.size(); ++c) {
                if (table.schema_[c].name == trim(hint.name)) {
                    table.schema_[c].kind = hint.kind;
                    hinted[c] = true;
                }
            }
        }
    }
    for (std::size_t c = 0; c < table.schema_.size(); ++c)
        if (!hinted[c] && table.schema_[c].name == "Label") {
            table.schema_[c].kind = ColumnKind::label;
            hinted[c] = true;
        }

    std::vector<bool> numeric(table.schema_.size(), true);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        auto cells = table.row(r);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (hinted[c] || !numeric[c]) continue;
            if (!parse_finite(cells[c]) && !is_invalid_numeric_token(cells[c])) numeric[c] = false;
        }
    }
    for (std::size_t c = 0; c < table.schema_.size(); ++c)
        if (!hinted[c]) table.schema_[c].kind = numeric[c] ? ColumnKind::numeric : ColumnKind::categorical;

    std::size_t labels = 0;
    for (const auto& col : table.schema_) labels += col.kind == ColumnKind::label;
    if (labels > 1) throw ValidationError("schema has more than one label column");
    return table;
}

RawTable load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>* schema_hint) {
    if (!std::filesystem::exists(path)) throw ValidationError("input file not found: " + path.string());
    try {
        return parse_csv(read_file(path), schema_hint);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::vector<std::string> Dataset::feature_names() const {
    std::vector<std::string> names;
    for (const auto& col : schema)
        if (col.kind == ColumnKind::numeric) names.push_back(col.name);
    return names;
}

std::vector<std::string> Dataset::tag_names() const {
    std::vector<std::string> names;
    for (const auto& col : schema)
        if (col.kind == ColumnKind::categorical) names.push_back(col.name);
    return names;
}

std::size_t Dataset::n_features() const {
    return static_cast<std::size_t>(
        std::count_if(schema.begin(), schema.end(), [](const auto& c) { return c.kind == ColumnKind::numeric; }));
}

std::optional<std::size_t> Dataset::feature_index(std::string_view name) const {
    std::size_t idx = 0;
    for (const auto& col : schema) {
        if (col.kind != ColumnKind::numeric) continue;
        if (col.name == name) return idx;
        ++idx;
    }
    return std::nullopt;
}

void Dataset::recount() {
    class_counts = {0, 0};
    for (const auto& r : rows) ++class_counts[static_cast<std::size_t>(r.label)];
}

void Dataset::validate() const {
    std::size_t labels = 0;
    std::set<std::string> names;
    for (const auto& col : schema) {
        labels += col.kind == ColumnKind::label;
        if (!names.insert(col.name).second) throw ValidationError("duplicate column name: " + col.name);
    }
    if (labels != 1) throw ValidationError("schema must have exactly one label column");
    const std::size_t d = n_features();
    const std::size_t t = tag_names().size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.features.size() != d || r.tags.size() != t)
            throw ValidationError("row " + std::to_string(i) + " does not match the schema width");
        if (r.label != 0 && r.label != 1) throw ValidationError("row " + std::to_string(i) + " has a non-binary label");
        for (double v : r.features)
            if (!std::isfinite(v)) throw ValidationError("row " + std::to_string(i) + " holds a non-finite value");
    }
    if (class_counts[0] + class_counts[1] != rows.size()) throw ValidationError("class counts do not sum to row count");
}

Dataset Dataset::select_features(const std::vector<std::size_t>& indices) const {
    const auto names = feature_names();
    for (auto i : indices)
        if (i >= names.size()) throw ValidationError("feature index " + std::to_string(i) + " out of range");
    Dataset out;
    for (auto i : indices) out.schema.push_back({names[i], ColumnKind::numeric});
    for (const auto& col : schema)
        if (col.kind != ColumnKind::numeric) out.schema.push_back(col);
    out.rows.reserve(rows.size());
    for (const auto& r : rows) {
        FlowRecord fr;
        fr.features.reserve(indices.size());
        for (auto i : indices) fr.features.push_back(r.features[i]);
        fr.label = r.label;
        fr.tags = r.tags;
        out.rows.push_back(std::move(fr));
    }
    out.class_counts = class_counts;
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& row_indices) const {
    Dataset out;
    out.schema = schema;
    out.rows.reserve(row_indices.size());
    for (auto i : row_indices) out.rows.push_back(rows.at(i));
    out.recount();
    return out;
}

Dataset Dataset::with_label(int label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].label == label) idx.push_back(i);
    return subset(idx);
}

std::vector<int> encode_labels(const std::vector<std::string>& raw_labels, const LabelMap& map) {
    std::vector<int> out;
    out.reserve(raw_labels.size());
    std::set<std::string> unmapped;
    for (const auto& raw : raw_labels) {
        auto v = map.find(trim(raw));
        if (!v) {
            unmapped.insert(trim(raw));
            continue;
        }
        out.push_back(*v);
    }
    if (!unmapped.empty()) {
        std::string msg = "unmapped label(s):";
        for (const auto& u : unmapped) msg += " \"" + u + "\"";
        throw ValidationError(msg);
    }
    return out;
}

Dataset clean(const RawTable& raw, const LabelMap& map) {
    auto label_col = raw.label_column();
    if (!label_col) throw ValidationError("no label column in table");

    Dataset ds;
    ds.schema = raw.schema();
    std::vector<std::size_t> numeric_cols, tag_cols;
    for (std::size_t c = 0; c < ds.schema.size(); ++c) {
        if (ds.schema[c].kind == ColumnKind::numeric) numeric_cols.push_back(c);
        if (ds.schema[c].kind == ColumnKind::categorical) tag_cols.push_back(c);
    }

    std::set<std::string> unmapped;
    for (std::size_t r = 0; r < raw.row_count(); ++r) {
        auto cells = raw.row(r);
        auto encoded = map.find(cells[*label_col]);
        if (!encoded) {
            unmapped.insert(std::string(cells[*label_col]));
            continue;
        }
        FlowRecord fr;
        fr.features.reserve(numeric_cols.size());
        bool valid = true;
        for (auto c : numeric_cols) {
            auto v = parse_finite(cells[c]);
            if (!v) {
                valid = false;
                break;
            }
            fr.features.push_back(*v);
        }
        if (!valid) {
            ++ds.dropped;
            continue;
        }
        for (auto c : tag_cols) fr.tags.emplace_back(cells[c]);
        fr.label = *encoded;
        ++ds.raw_class_counts[std::string(cells[*label_col])];
        ds.rows.push_back(std::move(fr));
    }
    if (!unmapped.empty()) {
        std::string msg = "unmapped label(s):";
        for (const auto& u : unmapped) msg += " \"" + u + "\"";
        throw ValidationError(msg);
    }
    if (ds.rows.empty()) throw ValidationError("cleaning dropped every row (" + std::to_string(ds.dropped) + " invalid)");
    ds.recount();
    return ds;
}

std::vector<std::size_t> split_test_indices(const Dataset& data, const SplitConfig& cfg) {
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ValidationError("test_fraction must lie in (0, 1)");
    std::vector<std::vector<std::size_t>> pools;
    if (cfg.stratified) {
        pools.resize(2);
        for (std::size_t i = 0; i < data.rows.size(); ++i) pools[static_cast<std::size_t>(data.rows[i].label)].push_back(i);
        if (pools[0].empty() || pools[1].empty()) throw ValidationError("stratified split requires both classes");
    } else {
        pools.emplace_back(data.rows.size());
        std::iota(pools[0].begin(), pools[0].end(), 0);
    }
    // Test size ceil(n * f), shared out by largest remainder so each class
    // gets floor or ceil of its exact quota.
    const double n = static_cast<double>(data.rows.size());
    auto total = static_cast<std::size_t>(std::ceil(n * cfg.test_fraction - 1e-9));
    std::vector<std::size_t> quota(pools.size());
    std::vector<double> rest(pools.size());
    for (std::size_t c = 0; c < pools.size(); ++c) {
        const double exact = static_cast<double>(pools[c].size()) * cfg.test_fraction;
        quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rest[c] = exact - static_cast<double>(quota[c]);
        total -= std::min(total, quota[c]);
    }
    std::vector<std::size_t> order(pools.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rest[a] > rest[b]; });
    for (std::size_t k = 0; k < order.size() && total > 0; ++k, --total) ++quota[order[k]];

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> test;
    for (std::size_t c = 0; c < pools.size(); ++c) {
        std::shuffle(pools[c].begin(), pools[c].end(), rng);
        test.insert(test.end(), pools[c].begin(), pools[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
    std::sort(test.begin(), test.end());
    return test;
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitConfig& cfg) {
    auto test_idx = split_test_indices(data, cfg);
    std::vector<std::size_t> train_idx;
    train_idx.reserve(data.rows.size() - test_idx.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        if (j < test_idx.size() && test_idx[j] == i) {
            ++j;
            continue;
        }
        train_idx.push_back(i);
    }
    return {data.subset(train_idx), data.subset(test_idx)};
}

std::string format_class_report(const Dataset& data) {
    std::ostringstream out;
    out << "rows: " << data.rows.size() << " (dropped " << data.dropped << ")\n";
    out << "class 0 (benign): " << data.class_counts[0] << "\n";
    out << "class 1 (malicious): " << data.class_counts[1] << "\n";
    if (!data.raw_class_counts.empty()) {
        out << "per raw label:\n";
        for (const auto& [label, n] : data.raw_class_counts) out << "  " << label << " = " << n << "\n";
    }
    return out.str();
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::string body;
    body += kDatasetMagic;
    body += '\n';
    for (std::size_t c = 0; c < data.schema.size(); ++c) {
        if (c) body += '\t';
        body += to_string(data.schema[c].kind);
    }
    body += '\n';
    for (std::size_t c = 0; c < data.schema.size(); ++c) {
        if (c) body += '\t';
        body += data.schema[c].name;
    }
    body += '\n';
    for (const auto& r : data.rows) {
        std::size_t f = 0, t = 0;
        for (std::size_t c = 0; c < data.schema.size(); ++c) {
            if (c) body += '\t';
            switch (data.schema[c].kind) {
                case ColumnKind::numeric: body += format_double(r.features[f++]); break;
                case ColumnKind::categorical: body += r.tags[t++]; break;
                case ColumnKind::label: body += r.label ? '1' : '0'; break;
            }
        }
        body += '\n';
    }

    nlohmann::json meta;
    meta["format"] = "ddosgan.dataset";
    meta["version"] = 1;
    meta["rows"] = data.rows.size();
    meta["class_counts"] = {{"0", data.class_counts[0]}, {"1", data.class_counts[1]}};
    meta["dropped"] = data.dropped;
    meta["raw_class_counts"] = data.raw_class_counts;
    meta["checksum"] = checksum_hex(body);
    auto& schema = meta["schema"] = nlohmann::json::array();
    for (const auto& col : data.schema) schema.push_back({{"name", col.name}, {"kind", to_string(col.kind)}});

    write_file_atomic(path, body);
    auto meta_path = path;
    meta_path += ".meta.json";
    write_file_atomic(meta_path, meta.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ValidationError("dataset not found: " + path.string());
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kDatasetMagic)
        throw ValidationError(path.string() + ": not a dataset file (bad version line)");
    std::string kinds_line, names_line;
    std::getline(in, kinds_line);
    std::getline(in, names_line);
    auto kinds = split_cells(kinds_line, '\t');
    auto names = split_cells(names_line, '\t');
    if (kinds.size() != names.size()) throw ValidationError(path.string() + ": header width mismatch");

    Dataset ds;
    for (std::size_t c = 0; c < kinds.size(); ++c) ds.schema.push_back({std::string(names[c]), column_kind_from_string(kinds[c])});
    std::size_t line_no = 3;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_cells(line, '\t');
        if (cells.size() != ds.schema.size())
            throw ValidationError(path.string() + ": ragged row at line " + std::to_string(line_no));
        FlowRecord fr;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            switch (ds.schema[c].kind) {
                case ColumnKind::numeric: {
                    auto v = parse_finite(cells[c]);
                    if (!v) throw ValidationError(path.string() + ": bad number at line " + std::to_string(line_no));
                    fr.features.push_back(*v);
                    break;
                }
                case ColumnKind::categorical: fr.tags.emplace_back(cells[c]); break;
                case ColumnKind::label: fr.label = cells[c] == "1" ? 1 : 0; break;
            }
        }
        ds.rows.push_back(std::move(fr));
    }
    ds.recount();

    auto meta_path = path;
    meta_path += ".meta.json";
    if (std::filesystem::exists(meta_path)) {
        auto meta = nlohmann::json::parse(read_file(meta_path));
        ds.dropped = meta.value("dropped", std::size_t{0});
        if (meta.contains("raw_class_counts"))
            ds.raw_class_counts = meta["raw_class_counts"].get<std::map<std::string, std::size_t>>();
    }
    ds.validate();
    return ds;
}

}  // namespace ddosgan::ingest
