#include "mips/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "mips/error.hpp"
#include "bytes.hpp"

namespace mips {

using detail::get_u32;
using detail::get_u64;
using detail::put_u32;
using detail::put_u64;
using detail::read_file;
using detail::write_file;

namespace {

std::vector<std::size_t> identity_ids(std::size_t n) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    return ids;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
        h ^= (word >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    if (delimiter == ' ' || delimiter == '\t') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            if (i == line.size()) break;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
            fields.push_back(line.substr(i, j - i));
            i = j;
        }
        return fields;
    }
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delimiter, start);
        std::string_view f = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
        fields.push_back(f);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

}  // namespace

Dataset::Dataset(std::size_t rows, std::size_t dims, std::vector<double> values)
    : Dataset(rows, dims, std::move(values), identity_ids(rows)) {}

Dataset::Dataset(std::size_t rows, std::size_t dims, std::vector<double> values,
                 std::vector<std::size_t> ids)
    : rows_(rows), dims_(dims), values_(std::move(values)), ids_(std::move(ids)) {
    if (rows_ == 0 || dims_ == 0) throw EmptyInputError("dataset must have N >= 1 and d >= 1");
    if (values_.size() != rows_ * dims_)
        throw ContractViolation("dataset payload holds " + std::to_string(values_.size()) +
                                " values, expected " + std::to_string(rows_ * dims_));
    if (ids_.size() != rows_) throw ContractViolation("dataset ids length does not match N");
    std::vector<std::size_t> sorted(ids_);
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ContractViolation("dataset ids must be distinct");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw ContractViolation("non-finite entry at row " + std::to_string(i / dims_));
    }
    norms_.resize(rows_);
    for (std::size_t i = 0; i < rows_; ++i) norms_[i] = mips::norm(row(i));
}

Dataset Dataset::permuted(std::span<const std::size_t> order) const {
    std::vector<double> values;
    values.reserve(order.size() * dims_);
    std::vector<std::size_t> ids;
    ids.reserve(order.size());
    for (std::size_t i : order) {
        const Vector r = row(i);
        values.insert(values.end(), r.begin(), r.end());
        ids.push_back(ids_[i]);
    }
    return Dataset(order.size(), dims_, std::move(values), std::move(ids));
}

std::uint64_t Dataset::checksum() const noexcept {
    std::uint64_t h = kFnvOffset;
    fnv_mix(h, rows_);
    fnv_mix(h, dims_);
    for (double v : values_) fnv_mix(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

bool operator==(const Dataset& a, const Dataset& b) {
    if (a.rows_ != b.rows_ || a.dims_ != b.dims_ || a.ids_ != b.ids_) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a.values_[i]) != std::bit_cast<std::uint64_t>(b.values_[i]))
            return false;
    }
    return true;
}

DatasetPair::DatasetPair(Dataset refs, Dataset qs)
    : references(std::move(refs)), queries(std::move(qs)) {
    if (references.dims() != queries.dims())
        throw ContractViolation("reference and query dimensionality differ");
}

Dataset load_csv(const std::filesystem::path& path, char delimiter) {
    const std::string text = read_file(path);
    std::vector<double> values;
    std::size_t dims = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool first_content = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        if (first_content && line.front() == '#') {
            first_content = false;
            continue;
        }
        first_content = false;

        const auto fields = split_fields(line, delimiter);
        if (dims == 0) dims = fields.size();
        if (fields.size() != dims)
            throw ParseError("ragged row: expected " + std::to_string(dims) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        for (std::string_view f : fields) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
                throw ParseError("non-numeric field '" + std::string(f) + "'", line_no);
            if (!std::isfinite(v)) throw ParseError("non-finite field '" + std::string(f) + "'", line_no);
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw EmptyInputError(path.string() + ": no data rows");
    return Dataset(rows, dims, std::move(values));
}

void save_csv(const Dataset& data, const std::filesystem::path& path, char delimiter) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector r = data.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out.push_back(delimiter);
            const auto res = std::to_chars(buf, buf + sizeof buf, r[j]);
            out.append(buf, res.ptr);
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

namespace {
constexpr char kMagic[4] = {'M', 'I', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;
}  // namespace

Dataset load_binary(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < kHeaderBytes) throw TruncationError(path.string(), kHeaderBytes, bytes.size());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (!std::equal(kMagic, kMagic + 4, bytes.data()))
        throw FormatError(path.string() + ": bad magic, not a MIPS dataset file");
    if (get_u32(p + 4) != kVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(get_u32(p + 4)));
    const std::uint64_t n = get_u64(p + 8);
    const std::uint64_t d = get_u64(p + 16);
    if (n == 0 || d == 0) throw EmptyInputError(path.string() + ": empty dataset");
    const std::size_t expected = kHeaderBytes + n * d * 8;
    if (bytes.size() < expected) throw TruncationError(path.string(), expected, bytes.size());
    if (bytes.size() > expected)
        throw FormatError(path.string() + ": " + std::to_string(bytes.size() - expected) +
                          " trailing bytes after payload");
    std::vector<double> values(n * d);
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = std::bit_cast<double>(get_u64(p + kHeaderBytes + 8 * i));
    return Dataset(n, d, std::move(values));
}

void save_binary(const Dataset& data, const std::filesystem::path& path) {
    std::string out;
    out.reserve(kHeaderBytes + data.values().size() * 8);
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, data.size());
    put_u64(out, data.dims());
    for (double v : data.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    write_file(path, out);
}

namespace {
bool is_text(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".csv" || ext == ".txt" || ext == ".tsv";
}
char text_delimiter(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? ',' : ' ';
}
}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
    return is_text(path) ? load_csv(path, text_delimiter(path)) : load_binary(path);
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    if (is_text(path))
        save_csv(data, path, text_delimiter(path));
    else
        save_binary(data, path);
}

Dataset generate_uniform(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n == 0 || d == 0) throw EmptyInputError("generate_uniform needs n >= 1 and d >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> values(n * d);
    for (double& v : values) v = unit(rng);
    return Dataset(n, d, std::move(values));
}

ClusteredDataset generate_clustered_labeled(std::size_t n, std::size_t d, std::size_t n_clusters, double spread,
                                           std::uint64_t seed) {
    if (n == 0 || d == 0) throw EmptyInputError("generate_clustered needs n >= 1 and d >= 1");
    if (n_clusters == 0) throw ContractViolation("generate_clustered needs at least one cluster");
    if (!(spread > 0.0)) throw ContractViolation("generate_clustered needs spread > 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(0.0, 10.0);
    std::vector<double> centers(n_clusters * d);
    for (double& c : centers) c = box(rng);
    std::uniform_int_distribution<std::size_t> pick(0, n_clusters - 1);
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<double> values(n * d);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = pick(rng);
        labels[i] = c;
        for (std::size_t j = 0; j < d; ++j) values[i * d + j] = centers[c * d + j] + noise(rng);
    }
    return {Dataset(n, d, std::move(values)), std::move(labels), std::move(centers)};
}

Dataset generate_clustered(std::size_t n, std::size_t d, std::size_t n_clusters, double spread,
                           std::uint64_t seed) {
    return generate_clustered_labeled(n, d, n_clusters, spread, seed).data;
}

NormalizedDataset normalize_directions(const Dataset& data) {
    std::vector<double> values(data.values().begin(), data.values().end());
    std::vector<std::size_t> zero_rows;
    const std::size_t d = data.dims();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double n = data.norm(i);
        if (n == 0.0) {
            zero_rows.push_back(i);
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) values[i * d + j] /= n;
    }
    std::vector<std::size_t> ids(data.ids().begin(), data.ids().end());
    return {Dataset(data.size(), d, std::move(values), std::move(ids)), std::move(zero_rows)};
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ContractViolation("split fraction must lie strictly between 0 and 1");
    std::vector<std::size_t> order = identity_ids(data.size());
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto second = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
    if (second == 0 || second == data.size())
        throw EmptyInputError("split would leave one side empty");
    std::vector<std::size_t> a(order.begin(), order.end() - static_cast<std::ptrdiff_t>(second));
    std::vector<std::size_t> b(order.end() - static_cast<std::ptrdiff_t>(second), order.end());
    auto fresh = [&](const std::vector<std::size_t>& rows) {
        Dataset p = data.permuted(rows);
        std::vector<double> v(p.values().begin(), p.values().end());
        return Dataset(rows.size(), data.dims(), std::move(v));
    };
    return {fresh(a), fresh(b)};
}

}  // namespace mips
