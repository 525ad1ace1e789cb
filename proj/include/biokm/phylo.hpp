#pragma once

// Distance matrices over network endpoints, Neighbor-Joining reconstruction
// and canonical Newick text for the resulting unrooted trees.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "biokm/error.hpp"

namespace biokm::phylo {

inline bool valid_label(std::string_view label) noexcept {
    if (label.empty()) return false;
    for (char c : label) {
        if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' || c == ']' || c == '\'' ||
            c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            return false;
        }
    }
    return true;
}

class DistanceMatrix {
public:
    DistanceMatrix(std::vector<std::string> labels, std::vector<double> values)
        : labels_(std::move(labels)), d_(std::move(values)) {
        validate();
    }

    static DistanceMatrix from_rows(std::vector<std::string> labels, const std::vector<std::vector<double>>& rows) {
        std::vector<double> flat;
        for (const auto& r : rows) {
            if (r.size() != labels.size()) {
                throw Error(ErrorCode::MatrixInvariantViolation, "row width does not match label count");
            }
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return DistanceMatrix(std::move(labels), std::move(flat));
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    double at(std::size_t i, std::size_t j) const { return d_.at(i * size() + j); }

    DistanceMatrix scaled(double s) const {
        std::vector<double> v = d_;
        for (auto& x : v) x *= s;
        return DistanceMatrix(labels_, std::move(v));
    }

    /// Same distances with rows/columns reordered so that new index k holds
    /// old index order[k].
    DistanceMatrix permuted(const std::vector<std::size_t>& order) const {
        const std::size_t n = size();
        std::vector<std::string> labels;
        std::vector<double> v(n * n);
        for (std::size_t a = 0; a < n; ++a) {
            labels.push_back(labels_.at(order.at(a)));
            for (std::size_t b = 0; b < n; ++b) v[a * n + b] = at(order[a], order[b]);
        }
        return DistanceMatrix(std::move(labels), std::move(v));
    }

private:
    void validate() const {
        const std::size_t n = labels_.size();
        if (n < 2) throw Error(ErrorCode::MatrixInvariantViolation, "need at least 2 labels");
        if (d_.size() != n * n) throw Error(ErrorCode::MatrixInvariantViolation, "matrix is not N x N");
        std::set<std::string> seen;
        for (const auto& l : labels_) {
            if (!valid_label(l)) throw Error(ErrorCode::MatrixInvariantViolation, "invalid label '" + l + "'");
            if (!seen.insert(l).second) throw Error(ErrorCode::MatrixInvariantViolation, "duplicate label '" + l + "'");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (at(i, i) != 0.0) throw Error(ErrorCode::MatrixInvariantViolation, "nonzero diagonal at " + labels_[i]);
            for (std::size_t j = 0; j < n; ++j) {
                const double x = at(i, j);
                if (!std::isfinite(x) || x < 0.0) {
                    throw Error(ErrorCode::MatrixInvariantViolation, "negative or non-finite distance");
                }
                if (x != at(j, i)) {
                    throw Error(ErrorCode::MatrixInvariantViolation,
                                "asymmetric entry " + labels_[i] + "/" + labels_[j]);
                }
            }
        }
    }

    std::vector<std::string> labels_;
    std::vector<double> d_;
};

/// U_i: sum of distances from node i to every other node.
inline double net_divergence(const DistanceMatrix& d, std::size_t i) {
    if (i >= d.size()) throw Error(ErrorCode::IndexOutOfRange, "node index " + std::to_string(i));
    double u = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j != i) u += d.at(i, j);
    }
    return u;
}

struct TreeEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double length = 0.0;
};

/// Unrooted tree. Leaves (OTUs) carry labels; internal nodes (HTUs) have an
/// empty label.
class PhyloTree {
public:
    std::size_t add_leaf(std::string label) {
        labels_.push_back(std::move(label));
        adjacency_.emplace_back();
        return labels_.size() - 1;
    }

    std::size_t add_internal() { return add_leaf(std::string()); }

    void connect(std::size_t a, std::size_t b, double length) {
        adjacency_.at(a).push_back(edges_.size());
        adjacency_.at(b).push_back(edges_.size());
        edges_.push_back({a, b, length});
    }

    std::size_t node_count() const noexcept { return labels_.size(); }
    bool is_leaf(std::size_t n) const { return !labels_.at(n).empty(); }
    const std::string& label(std::size_t n) const { return labels_.at(n); }
    const std::vector<TreeEdge>& edges() const noexcept { return edges_; }
    const std::vector<std::size_t>& incident(std::size_t n) const { return adjacency_.at(n); }

    std::size_t other_end(std::size_t edge, std::size_t from) const {
        const auto& e = edges_.at(edge);
        return e.a == from ? e.b : e.a;
    }

    std::size_t leaf_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(),
                                                      [](const std::string& l) { return !l.empty(); }));
    }

    std::vector<std::string> leaf_labels() const {
        std::vector<std::string> out;
        for (const auto& l : labels_) {
            if (!l.empty()) out.push_back(l);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::vector<std::string> labels_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::vector<TreeEdge> edges_;
};

namespace detail {

inline bool nearly_less(double a, double b) noexcept {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return a < b - 1e-12 * scale;
}

// Branch lengths from the three-point formula for the final join; a negative
// value is clamped to 0 and its deficit charged to the longest sibling.
inline std::vector<double> final_three(double dab, double dac, double dbc) {
    std::vector<double> b = {(dab + dac - dbc) / 2.0, (dab + dbc - dac) / 2.0, (dac + dbc - dab) / 2.0};
    for (std::size_t k = 0; k < 3; ++k) {
        if (b[k] < 0.0) {
            std::size_t longest = k == 0 ? 1 : 0;
            for (std::size_t m = 0; m < 3; ++m) {
                if (m != k && b[m] > b[longest]) longest = m;
            }
            b[longest] = std::max(0.0, b[longest] + b[k]);
            b[k] = 0.0;
        }
    }
    return b;
}

}  // namespace detail

/// Neighbor-Joining. Ties on the join criterion resolve to the first pair in
/// the current active order, which starts as the input label order; a joined
/// pair's new node takes the slot of its first member.
inline PhyloTree nj_build(const DistanceMatrix& input) {
    const std::size_t n0 = input.size();
    PhyloTree tree;
    std::vector<std::size_t> ids;
    for (const auto& l : input.labels()) ids.push_back(tree.add_leaf(l));

    if (n0 == 2) {
        tree.connect(ids[0], ids[1], input.at(0, 1));
        return tree;
    }

    std::vector<std::vector<double>> d(n0, std::vector<double>(n0));
    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n0; ++j) d[i][j] = input.at(i, j);
    }

    while (ids.size() > 3) {
        const std::size_t n = ids.size();
        std::vector<double> u(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) u[i] += d[i][j];
            }
        }

        std::size_t bi = 0;
        std::size_t bj = 1;
        double best = 0.0;
        bool first = true;
        const double denom = static_cast<double>(n - 2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double m = d[i][j] - (u[i] + u[j]) / denom;
                if (first || detail::nearly_less(m, best)) {
                    best = m;
                    bi = i;
                    bj = j;
                    first = false;
                }
            }
        }

        const double dij = d[bi][bj];
        double li = dij / 2.0 + (u[bi] - u[bj]) / (2.0 * denom);
        double lj = dij - li;
        if (li < 0.0) {
            lj = std::max(0.0, lj + li);
            li = 0.0;
        } else if (lj < 0.0) {
            li = std::max(0.0, li + lj);
            lj = 0.0;
        }

        const std::size_t node = tree.add_internal();
        tree.connect(node, ids[bi], li);
        tree.connect(node, ids[bj], lj);

        for (std::size_t k = 0; k < n; ++k) {
            if (k == bi || k == bj) continue;
            const double dk = (d[bi][k] + d[bj][k] - dij) / 2.0;
            d[bi][k] = dk;
            d[k][bi] = dk;
        }
        d[bi][bi] = 0.0;
        ids[bi] = node;
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(bj));
        d.erase(d.begin() + static_cast<std::ptrdiff_t>(bj));
        for (auto& row : d) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    const auto b = detail::final_three(d[0][1], d[0][2], d[1][2]);
    const std::size_t center = tree.add_internal();
    for (std::size_t k = 0; k < 3; ++k) tree.connect(center, ids[k], b[k]);
    return tree;
}

// ---------------------------------------------------------------------------
// Newick

inline std::string format_length(double x) {
    if (x == 0.0) x = 0.0;  // drop negative zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

namespace detail {

struct Rendered {
    std::string text;
    std::string min_leaf;
};

inline Rendered render(const PhyloTree& t, std::size_t node, std::size_t via_edge, bool lengths) {
    if (t.is_leaf(node) && via_edge != static_cast<std::size_t>(-1)) {
        std::string s = t.label(node);
        if (lengths) s += ":" + format_length(t.edges()[via_edge].length);
        return {s, t.label(node)};
    }
    std::vector<Rendered> kids;
    for (std::size_t e : t.incident(node)) {
        if (e == via_edge) continue;
        kids.push_back(render(t, t.other_end(e, node), e, lengths));
    }
    std::sort(kids.begin(), kids.end(), [](const Rendered& a, const Rendered& b) { return a.min_leaf < b.min_leaf; });
    Rendered out;
    out.text = "(";
    for (std::size_t k = 0; k < kids.size(); ++k) {
        if (k) out.text += ",";
        out.text += kids[k].text;
    }
    out.text += ")";
    if (lengths && via_edge != static_cast<std::size_t>(-1)) out.text += ":" + format_length(t.edges()[via_edge].length);
    out.min_leaf = kids.empty() ? std::string() : kids.front().min_leaf;
    return out;
}

}  // namespace detail

/// Canonical Newick. The tree is anchored at the node adjacent to the
/// lexicographically greatest leaf; children are ordered by the smallest leaf
/// label they contain. A two-leaf tree prints as "(A:d,B:0);".
inline std::string to_newick(const PhyloTree& tree, bool with_lengths = true) {
    const auto leaves = tree.leaf_labels();
    if (leaves.size() < 2) throw Error(ErrorCode::MatrixInvariantViolation, "tree needs at least 2 leaves");

    std::size_t anchor = 0;
    for (std::size_t n = 0; n < tree.node_count(); ++n) {
        if (tree.is_leaf(n) && tree.label(n) == leaves.back()) anchor = n;
    }
    const std::size_t anchor_edge = tree.incident(anchor).at(0);
    const std::size_t root = tree.other_end(anchor_edge, anchor);

    if (tree.is_leaf(root)) {
        const std::string& a = tree.label(root);
        const std::string& b = tree.label(anchor);
        if (!with_lengths) return "(" + a + "," + b + ");";
        return "(" + a + ":" + format_length(tree.edges()[anchor_edge].length) + "," + b + ":0);";
    }
    return detail::render(tree, root, static_cast<std::size_t>(-1), with_lengths).text + ";";
}

namespace detail {

class NewickParser {
public:
    explicit NewickParser(std::string_view text) : s_(text) {}

    PhyloTree parse() {
        skip_ws();
        const std::size_t root = subtree();
        skip_ws();
        expect(';');
        skip_ws();
        if (pos_ != s_.size()) fail("trailing characters");

        // Unroot: a bifurcating root is suppressed by merging its two edges.
        PhyloTree out;
        std::vector<std::size_t> map(nodes_.size(), static_cast<std::size_t>(-1));
        const bool suppress = nodes_[root].children.size() == 2;
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            if (suppress && k == root) continue;
            map[k] = nodes_[k].label.empty() ? out.add_internal() : out.add_leaf(nodes_[k].label);
        }
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            if (k == root) continue;
            const std::size_t parent = nodes_[k].parent;
            if (suppress && parent == root) continue;
            out.connect(map[parent], map[k], nodes_[k].length);
        }
        if (suppress) {
            const auto& c = nodes_[root].children;
            out.connect(map[c[0]], map[c[1]], nodes_[c[0]].length + nodes_[c[1]].length);
        }
        if (out.leaf_count() < 2) fail("tree needs at least 2 leaves");
        return out;
    }

private:
    struct Node {
        std::string label;
        double length = 0.0;
        std::size_t parent = static_cast<std::size_t>(-1);
        std::vector<std::size_t> children;
    };

    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorCode::ParseError, "newick at offset " + std::to_string(pos_) + ": " + why);
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) {
            ++pos_;
        }
    }

    void expect(char c) {
        if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string name() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && valid_label(s_.substr(pos_, 1))) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    double length() {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != ':') return 0.0;
        ++pos_;
        skip_ws();
        const std::string text(s_.substr(pos_, std::min<std::size_t>(64, s_.size() - pos_)));
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end == text.c_str()) fail("bad branch length");
        pos_ += static_cast<std::size_t>(end - text.c_str());
        return v;
    }

    std::size_t subtree() {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '(') {
            ++pos_;
            while (true) {
                const std::size_t child = subtree();
                nodes_[child].parent = id;
                nodes_[id].children.push_back(child);
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                expect(')');
                break;
            }
            skip_ws();
            name();  // internal labels carry no meaning here
        } else {
            nodes_[id].label = name();
            if (nodes_[id].label.empty()) fail("expected a leaf label");
        }
        nodes_[id].length = length();
        return id;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::vector<Node> nodes_;
};

}  // namespace detail

inline PhyloTree parse_newick(std::string_view text) { return detail::NewickParser(text).parse(); }

/// Every edge as the leaf set on the side away from the greatest leaf,
/// mapped to its length. Two trees over the same leaves have the same
/// topology iff their split key sets match.
inline std::map<std::vector<std::string>, double> edge_splits(const PhyloTree& tree) {
    const auto leaves = tree.leaf_labels();
    std::map<std::vector<std::string>, double> out;
    for (std::size_t e = 0; e < tree.edges().size(); ++e) {
        // collect leaves reachable from edge.b without crossing e
        std::vector<std::string> side;
        std::vector<std::pair<std::size_t, std::size_t>> stack = {{tree.edges()[e].b, e}};
        while (!stack.empty()) {
            auto [node, via] = stack.back();
            stack.pop_back();
            if (tree.is_leaf(node)) side.push_back(tree.label(node));
            for (std::size_t f : tree.incident(node)) {
                if (f != via) stack.emplace_back(tree.other_end(f, node), f);
            }
        }
        std::sort(side.begin(), side.end());
        if (std::binary_search(side.begin(), side.end(), leaves.back())) {
            std::vector<std::string> other;
            std::set_difference(leaves.begin(), leaves.end(), side.begin(), side.end(), std::back_inserter(other));
            side = std::move(other);
        }
        out[side] += tree.edges()[e].length;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distance sources

/// Additive distances over a star: the server at the hub, one spoke per
/// client with the client's round-trip time as its length.
inline DistanceMatrix star_distances(const std::map<std::string, double>& client_rtt,
                                     const std::string& server_label = "server") {
    if (client_rtt.empty()) throw Error(ErrorCode::MatrixInvariantViolation, "need at least one client");
    std::vector<std::string> labels = {server_label};
    std::vector<double> spoke = {0.0};
    for (const auto& [node, rtt] : client_rtt) {
        if (!(rtt >= 0.0) || !std::isfinite(rtt)) {
            throw Error(ErrorCode::NegativeRtt, "rtt for " + node + " is negative or not finite");
        }
        labels.push_back(node);
        spoke.push_back(rtt);
    }
    const std::size_t n = labels.size();
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) v[i * n + j] = spoke[i] + spoke[j];
        }
    }
    return DistanceMatrix(std::move(labels), std::move(v));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

/// Reads "A,B,C" header plus N numeric rows. A leading empty corner cell in
/// the header means every data row starts with its own label.
inline DistanceMatrix read_matrix_csv(std::istream& in) {
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(detail::split_csv_line(line));
    }
    if (rows.empty()) throw Error(ErrorCode::ParseError, "empty matrix file");
    std::vector<std::string> header = rows.front();
    const bool row_labels = !header.empty() && header.front().empty();
    if (row_labels) header.erase(header.begin());
    const std::size_t n = header.size();
    if (rows.size() != n + 1) throw Error(ErrorCode::ParseError, "expected " + std::to_string(n) + " data rows");
    std::vector<double> values;
    for (std::size_t r = 1; r <= n; ++r) {
        auto cells = rows[r];
        if (row_labels) {
            if (cells.empty() || cells.front() != header[r - 1]) {
                throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " label mismatch");
            }
            cells.erase(cells.begin());
        }
        if (cells.size() != n) throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " has wrong width");
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (c.empty() || *end != '\0') throw Error(ErrorCode::ParseError, "not a number: '" + c + "'");
            values.push_back(v);
        }
    }
    return DistanceMatrix(std::move(header), std::move(values));
}

inline void write_matrix_csv(const DistanceMatrix& d, std::ostream& out) {
    for (std::size_t i = 0; i < d.size(); ++i) out << (i ? "," : "") << d.labels()[i];
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.size(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.15g", d.at(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace biokm::phylo
