#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ddosgan::ingest {

enum class ColumnKind { numeric, categorical, label };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;

    bool operator==(const ColumnSchema&) const = default;
};

/// One cleaned flow. `features` follows the schema's numeric columns in
/// order; `tags` follows its categorical columns (e.g. "Source IP").
struct FlowRecord {
    std::vector<double> features;
    int label = 0;
    std::vector<std::string> tags;

    bool operator==(const FlowRecord&) const = default;
};

/// Raw label text to binary class. Matching is exact and case-sensitive.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(std::map<std::string, int> entries);

    /// BENIGN plus the five DoS classes found in the CICIDS2017 Wednesday capture.
    static LabelMap cicids_wednesday();

    void set(std::string raw, int encoded);
    std::optional<int> find(std::string_view raw) const;
    const std::map<std::string, int, std::less<>>& entries() const { return entries_; }

private:
    std::map<std::string, int, std::less<>> entries_;
};

/// Whole-file CSV contents with cells kept as text. Rows are split lazily
/// from a single buffer so large captures stay close to file size in memory.
class RawTable {
public:
    const std::vector<ColumnSchema>& schema() const { return schema_; }
    std::size_t row_count() const { return lines_.size(); }
    std::size_t column_count() const { return schema_.size(); }
    /// Cells of data row `i`, whitespace-trimmed.
    std::vector<std::string_view> row(std::size_t i) const;
    /// 1-based line number of data row `i` in the source file.
    std::size_t line_number(std::size_t i) const { return lines_[i].line; }
    std::optional<std::size_t> label_column() const;

private:
    friend RawTable load_csv(const std::filesystem::path&, const std::vector<ColumnSchema>*);
    friend RawTable parse_csv(std::string, const std::vector<ColumnSchema>*);

    struct LineSpan {
        std::size_t begin;
        std::size_t end;
        std::size_t line;
    };
    std::string text_;
    std::vector<LineSpan> lines_;
    std::vector<ColumnSchema> schema_;
};

/// Reads a headered CSV. Header names are trimmed; duplicated names get a
/// ".1", ".2", ... suffix. Column kinds come from `schema_hint` when given
/// (matched by trimmed name), otherwise a column named "Label" is the label
/// and any column whose cells all look numeric is numeric.
RawTable load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>* schema_hint = nullptr);
RawTable parse_csv(std::string text, const std::vector<ColumnSchema>* schema_hint = nullptr);

/// Parses a numeric cell. Returns nullopt for empty, unparseable, NaN and
/// infinite values ("Infinity", "inf", "NaN" in any case).
std::optional<double> parse_finite(std::string_view cell);

struct Dataset {
    std::vector<ColumnSchema> schema;
    std::vector<FlowRecord> rows;
    std::array<std::size_t, 2> class_counts{0, 0};
    /// Per raw-label counts of the retained rows (empty for derived datasets).
    std::map<std::string, std::size_t> raw_class_counts;
    std::size_t dropped = 0;

    std::vector<std::string> feature_names() const;
    std::vector<std::string> tag_names() const;
    std::size_t n_features() const;
    std::optional<std::size_t> feature_index(std::string_view name) const;

    void recount();
    /// Checks every documented invariant; throws ValidationError on the first violation.
    void validate() const;
    /// Keeps only the numeric columns at `indices` (in that order); tags and labels are kept.
    Dataset select_features(const std::vector<std::size_t>& indices) const;
    Dataset subset(const std::vector<std::size_t>& row_indices) const;
    /// Rows with the given label, same schema.
    Dataset with_label(int label) const;
};

std::vector<int> encode_labels(const std::vector<std::string>& raw_labels, const LabelMap& map);

/// Drops every row holding an empty, NaN or infinite numeric cell and
/// encodes labels. Throws when there is no label column, a label is unmapped,
/// or nothing survives.
Dataset clean(const RawTable& raw, const LabelMap& map = LabelMap::cicids_wednesday());

struct SplitConfig {
    double test_fraction = 0.2;
    bool stratified = true;
    std::uint64_t seed = 42;
};

/// Deterministic train/test partition with ceil(n * test_fraction) test rows.
/// Stratified splits give each class floor or ceil of count * test_fraction,
/// handing leftovers to the largest remainders. Both halves keep the original
/// row order.
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitConfig& cfg);

/// Row indices chosen for the test half; exposed for partition checks.
std::vector<std::size_t> split_test_indices(const Dataset& data, const SplitConfig& cfg);

std::string format_class_report(const Dataset& data);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace ddosgan::ingest
