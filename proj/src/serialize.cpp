#include "mips/serialize.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "bytes.hpp"
#include "mips/error.hpp"

namespace mips {

namespace {

constexpr char kMagic[4] = {'M', 'I', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { detail::put_u32(out_, v); }
    void u64(std::uint64_t v) { detail::put_u64(out_, v); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    const std::string& bytes() const { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }
    std::uint32_t u32() { return detail::get_u32(take(4)); }
    std::uint64_t u64() { return detail::get_u64(take(8)); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void expect_end() const {
        if (pos_ != bytes_.size())
            throw FormatError(path_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes after tree");
    }
    // Rejects counts that could not possibly fit in the rest of the file.
    std::uint64_t count(std::uint64_t bytes_each) {
        const std::uint64_t n = u64();
        if (bytes_each > 0 && n > (bytes_.size() - pos_) / bytes_each)
            throw TruncationError(path_, pos_ + n * bytes_each, bytes_.size());
        return n;
    }
    const std::string& path() const { return path_; }

private:
    const unsigned char* take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw TruncationError(path_, pos_ + n, bytes_.size());
        const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
        pos_ += n;
        return p;
    }

    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

void write_header(Writer& w, TreeKind kind, std::size_t leaf_size, const Dataset& data, std::uint64_t checksum) {
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u64(leaf_size);
    w.u64(checksum);
    w.u64(data.size());
    w.u64(data.dims());
    for (std::size_t id : data.ids()) w.u64(id);
    for (double v : data.values()) w.f64(v);
}

struct Header {
    TreeKind kind;
    std::size_t leaf_size;
    std::uint64_t checksum;
};

Header read_header(Reader& r) {
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError(r.path() + ": bad magic, not a tree file");
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw FormatError(r.path() + ": unsupported tree version " + std::to_string(version));
    const std::uint32_t kind = r.u32();
    if (kind > 1) throw FormatError(r.path() + ": unknown tree kind " + std::to_string(kind));
    Header h{static_cast<TreeKind>(kind), 0, 0};
    h.leaf_size = r.u64();
    h.checksum = r.u64();
    return h;
}

Dataset read_rows(Reader& r) {
    const std::uint64_t n = r.u64();
    const std::uint64_t d = r.u64();
    if (n == 0 || d == 0) throw FormatError(r.path() + ": tree over an empty dataset");
    std::vector<std::size_t> ids(n);
    for (auto& id : ids) id = r.u64();
    std::vector<double> values;
    values.reserve(n * d);
    for (std::uint64_t i = 0; i < n * d; ++i) values.push_back(r.f64());
    return Dataset(n, d, std::move(values), std::move(ids));
}

template <class Node>
void write_layout(Writer& w, const Node& n) {
    w.u64(n.begin);
    w.u64(n.end);
    w.i32(n.left);
    w.i32(n.right);
    w.u8(n.degenerate ? 1 : 0);
}

template <class Node>
void read_layout(Reader& r, Node& n, std::size_t rows, std::size_t node_count) {
    n.begin = r.u64();
    n.end = r.u64();
    n.left = r.i32();
    n.right = r.i32();
    n.degenerate = r.u8() != 0;
    const bool bad_range = n.begin >= n.end || n.end > rows;
    const bool bad_child = (n.left >= 0) != (n.right >= 0) || n.left >= static_cast<std::int64_t>(node_count) ||
                           n.right >= static_cast<std::int64_t>(node_count);
    if (bad_range || bad_child) throw FormatError(r.path() + ": corrupt node");
}

std::string read_all(const std::filesystem::path& path) { return detail::read_file(path); }

BallTree read_ball_body(Reader& r, const Header& h) {
    Dataset data = read_rows(r);
    const std::uint64_t count = r.count(8);
    std::vector<BallNode> nodes(count);
    std::vector<double> centers;
    centers.reserve(count * data.dims());
    for (BallNode& n : nodes) {
        read_layout(r, n, data.size(), count);
        n.radius = r.f64();
        n.center_norm = r.f64();
        for (std::size_t j = 0; j < data.dims(); ++j) centers.push_back(r.f64());
    }
    return BallTree(std::move(data), h.leaf_size, std::move(nodes), std::move(centers), h.checksum);
}

QueryConeTree read_cone_body(Reader& r, const Header& h) {
    Dataset data = read_rows(r);
    const std::uint64_t count = r.count(8);
    std::vector<ConeNode> nodes(count);
    std::vector<double> axes;
    axes.reserve(count * data.dims());
    for (ConeNode& n : nodes) {
        read_layout(r, n, data.size(), count);
        n.axis_norm = r.f64();
        n.min_cosine = r.f64();
        for (std::size_t j = 0; j < data.dims(); ++j) axes.push_back(r.f64());
    }
    const std::uint64_t zeros = r.count(8);
    std::vector<std::size_t> zero_rows(zeros);
    for (auto& z : zero_rows) z = r.u64();
    return QueryConeTree{ConeTree(std::move(data), h.leaf_size, std::move(nodes), std::move(axes), h.checksum),
                         std::move(zero_rows)};
}

}  // namespace

void save_tree(const BallTree& tree, const std::filesystem::path& path) {
    Writer w;
    write_header(w, TreeKind::ball, tree.leaf_size(), tree.data(), tree.source_checksum());
    w.u64(tree.nodes().size());
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const BallNode& n = tree.node(i);
        write_layout(w, n);
        w.f64(n.radius);
        w.f64(n.center_norm);
        for (double v : tree.center(i)) w.f64(v);
    }
    detail::write_file(path, w.bytes());
}

void save_tree(const QueryConeTree& qt, const std::filesystem::path& path) {
    const ConeTree& tree = qt.tree;
    Writer w;
    write_header(w, TreeKind::cone, tree.leaf_size(), tree.data(), tree.source_checksum());
    w.u64(tree.nodes().size());
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const ConeNode& n = tree.node(i);
        write_layout(w, n);
        w.f64(n.axis_norm);
        w.f64(n.min_cosine);
        for (double v : tree.axis(i)) w.f64(v);
    }
    w.u64(qt.zero_rows.size());
    for (std::size_t z : qt.zero_rows) w.u64(z);
    detail::write_file(path, w.bytes());
}

AnyTree load_tree(const std::filesystem::path& path) {
    Reader r(read_all(path), path.string());
    const Header h = read_header(r);
    if (h.kind == TreeKind::ball) {
        BallTree t = read_ball_body(r, h);
        r.expect_end();
        return t;
    }
    QueryConeTree t = read_cone_body(r, h);
    r.expect_end();
    return t;
}

BallTree load_ball_tree(const std::filesystem::path& path) {
    AnyTree t = load_tree(path);
    if (auto* ball = std::get_if<BallTree>(&t)) return std::move(*ball);
    throw FormatError(path.string() + ": holds a cone tree, a ball tree was expected");
}

QueryConeTree load_cone_tree(const std::filesystem::path& path) {
    AnyTree t = load_tree(path);
    if (auto* cone = std::get_if<QueryConeTree>(&t)) return std::move(*cone);
    throw FormatError(path.string() + ": holds a ball tree, a cone tree was expected");
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    const std::string bytes = read_all(path);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace mips
