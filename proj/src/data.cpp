#include "stackgen/data.hpp"

#include "stackgen/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace stackgen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return std::string(s.substr(b, e - b));
}

// Splits RFC-4180 text into records of fields. Quoted fields may contain
// separators, doubled quotes and line breaks.
std::vector<std::vector<std::string>> split_records(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                any = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                if (any || !field.empty()) {
                    record.push_back(std::move(field));
                    records.push_back(std::move(record));
                }
                record.clear();
                field.clear();
                any = false;
                break;
            default:
                field += c;
                any = true;
        }
    }
    if (in_quotes) fail(ErrorCode::parse, "unterminated quoted field");
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

bool parse_number(const std::string& cell, double& out) {
    if (cell.empty() || cell == "NA") {
        out = kNaN;
        return true;
    }
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::optional<std::size_t> Frame::find(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
}

const std::vector<double>& Frame::column(const std::string& name) const {
    auto idx = find(name);
    if (!idx) fail(ErrorCode::data, "missing column '" + name + "'");
    const auto& bad = bad_cells[*idx];
    if (!bad.empty()) fail(ErrorCode::parse, "non-numeric cell in column '" + name + "': " + bad);
    return columns[*idx];
}

Frame parse_csv(const std::string& text) {
    auto records = split_records(text);
    if (records.empty()) fail(ErrorCode::parse, "empty file: header row required");
    Frame frame;
    for (const auto& h : records.front()) frame.names.push_back(trim(h));
    const std::size_t p = frame.names.size();
    for (std::size_t j = 0; j < p; ++j) {
        if (frame.names[j].empty()) fail(ErrorCode::parse, "empty column name in header");
        for (std::size_t k = 0; k < j; ++k)
            if (frame.names[k] == frame.names[j])
                fail(ErrorCode::parse, "duplicate column name '" + frame.names[j] + "'");
    }
    if (records.size() < 2) fail(ErrorCode::data, "zero data rows");
    frame.columns.assign(p, std::vector<double>(records.size() - 1));
    frame.bad_cells.assign(p, std::string());
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.size() != p) {
            fail(ErrorCode::parse, "row " + std::to_string(i) + " has " + std::to_string(rec.size()) +
                                       " fields, header has " + std::to_string(p));
        }
        for (std::size_t j = 0; j < p; ++j) {
            const std::string cell = trim(rec[j]);
            double v;
            if (!parse_number(cell, v)) {
                v = kNaN;
                if (frame.bad_cells[j].empty())
                    frame.bad_cells[j] = "'" + cell + "' at data row " + std::to_string(i);
            }
            frame.columns[j][i - 1] = v;
        }
    }
    frame.content_hash = fnv1a64(text.data(), text.size());
    return frame;
}

Frame read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

std::size_t Dataset::column_index(const std::string& name) const {
    auto it = std::find(colnames.begin(), colnames.end(), name);
    if (it == colnames.end()) fail(ErrorCode::data, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - colnames.begin());
}

void validate_labels(const Vector& y, Task task) {
    if (y.hasNaN()) fail(ErrorCode::data, "outcome contains missing values");
    if (task != Task::classify) return;
    bool zero = false, one = false;
    for (double v : y) {
        if (v == 0.0)
            zero = true;
        else if (v == 1.0)
            one = true;
        else
            fail(ErrorCode::data, "classification outcome must be 0/1, found " + std::to_string(v));
    }
    if (!zero || !one) fail(ErrorCode::data, "classification outcome needs both classes present");
}

Matrix frame_matrix(const Frame& frame, const std::vector<std::string>& names,
                    const IndexVector& rows) {
    Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto& col = frame.column(names[j]);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] >= col.size()) fail(ErrorCode::data, "row index out of range");
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[rows[i]];
        }
    }
    return X;
}

Dataset make_dataset(const Frame& frame, const std::string& outcome,
                     const std::vector<std::string>& predictors, Task task,
                     const IndexVector& rows) {
    const auto& ycol = frame.column(outcome);
    std::vector<std::string> names = predictors;
    if (names.empty()) {
        for (const auto& nm : frame.names)
            if (nm != outcome) names.push_back(nm);
    }
    if (names.empty()) fail(ErrorCode::data, "no predictor columns");
    IndexVector sel = rows;
    if (sel.empty()) {
        sel.resize(frame.rows());
        for (std::size_t i = 0; i < sel.size(); ++i) sel[i] = i;
    }
    if (sel.size() < 2) fail(ErrorCode::data, "need at least 2 rows");
    Dataset d;
    d.X = frame_matrix(frame, names, sel);
    d.y.resize(static_cast<Eigen::Index>(sel.size()));
    for (std::size_t i = 0; i < sel.size(); ++i) d.y(static_cast<Eigen::Index>(i)) = ycol[sel[i]];
    d.colnames = std::move(names);
    d.task = task;
    validate_labels(d.y, task);
    return d;
}

Dataset load_csv(const std::string& path, const std::string& outcome,
                 const std::vector<std::string>& predictors, Task task) {
    return make_dataset(read_csv(path), outcome, predictors, task);
}

Dataset subset_rows(const Dataset& data, const IndexVector& rows) {
    Dataset d;
    d.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        d.X.row(static_cast<Eigen::Index>(i)) = data.X.row(r);
        d.y(static_cast<Eigen::Index>(i)) = data.y(r);
    }
    d.colnames = data.colnames;
    d.task = data.task;
    return d;
}

IndexVector FoldAssignment::members(int k) const {
    IndexVector out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] == k) out.push_back(i);
    return out;
}

IndexVector FoldAssignment::complement(int k) const {
    IndexVector out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] != k) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
    std::vector<std::size_t> s(static_cast<std::size_t>(K), 0);
    for (int f : fold) ++s[static_cast<std::size_t>(f - 1)];
    return s;
}

FoldAssignment assign_folds(std::size_t n, int K, std::uint64_t seed) {
    if (K < 2) fail(ErrorCode::invalid_argument, "number of folds must be at least 2");
    if (static_cast<std::size_t>(K) > n)
        fail(ErrorCode::invalid_argument, "number of folds (" + std::to_string(K) +
                                              ") exceeds number of observations (" +
                                              std::to_string(n) + ")");
    IndexVector order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    FoldAssignment fa;
    fa.K = K;
    fa.fold.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos)
        fa.fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(K)) + 1;
    return fa;
}

FoldAssignment folds_from_column(const std::vector<double>& values) {
    std::vector<long long> ids;
    ids.reserve(values.size());
    for (double v : values) {
        if (!std::isfinite(v) || v != std::floor(v))
            fail(ErrorCode::data, "fold variable must hold integers");
        ids.push_back(static_cast<long long>(v));
    }
    std::vector<long long> levels = ids;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.size() < 2) fail(ErrorCode::data, "fold variable defines a single fold");
    FoldAssignment fa;
    fa.K = static_cast<int>(levels.size());
    fa.fold.reserve(ids.size());
    for (long long id : ids)
        fa.fold.push_back(
            static_cast<int>(std::lower_bound(levels.begin(), levels.end(), id) - levels.begin()) + 1);
    return fa;
}

std::size_t HoldoutMask::train_count() const {
    return static_cast<std::size_t>(std::count(in_train.begin(), in_train.end(), true));
}

IndexVector HoldoutMask::train_rows() const {
    IndexVector out;
    for (std::size_t i = 0; i < in_train.size(); ++i)
        if (in_train[i]) out.push_back(i);
    return out;
}

IndexVector HoldoutMask::holdout_rows() const {
    IndexVector out;
    for (std::size_t i = 0; i < in_train.size(); ++i)
        if (!in_train[i]) out.push_back(i);
    return out;
}

HoldoutMask split_holdout(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail(ErrorCode::invalid_argument, "train fraction must lie strictly between 0 and 1");
    Rng rng(seed);
    HoldoutMask m;
    m.in_train.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.in_train[i] = rng.uniform() < train_fraction;
    if (m.train_count() < 2) fail(ErrorCode::data, "split leaves fewer than 2 training rows");
    if (m.holdout_count() == 0) fail(ErrorCode::data, "split leaves the holdout sample empty");
    return m;
}

}  // namespace stackgen
