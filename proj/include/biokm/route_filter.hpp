#pragma once

// Binary links x paths relation R: R[l][p] = 1 iff path p traverses link l.
// Its transpose is stored with paths as rows. Range and domain are the paths
// and links that take part in at least one pair.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "biokm/error.hpp"

namespace biokm::route {

enum class Orientation { LinksByPaths, PathsByLinks };

class FilterMatrix {
public:
    FilterMatrix() = default;

    FilterMatrix(Orientation orientation, std::vector<std::string> row_labels, std::vector<std::string> col_labels,
                 std::vector<std::uint8_t> cells)
        : orientation_(orientation),
          rows_(std::move(row_labels)),
          cols_(std::move(col_labels)),
          cells_(std::move(cells)) {
        if (cells_.size() != rows_.size() * cols_.size()) {
            throw Error(ErrorCode::InvalidSpec, "filter matrix cell count does not match its labels");
        }
        for (auto c : cells_) {
            if (c > 1) throw Error(ErrorCode::InvalidSpec, "filter matrix entries must be 0 or 1");
        }
        require_unique(rows_);
        require_unique(cols_);
    }

    Orientation orientation() const noexcept { return orientation_; }
    const std::vector<std::string>& row_labels() const noexcept { return rows_; }
    const std::vector<std::string>& col_labels() const noexcept { return cols_; }
    std::uint8_t cell(std::size_t r, std::size_t c) const { return cells_.at(r * cols_.size() + c); }

    const std::vector<std::string>& links() const noexcept {
        return orientation_ == Orientation::LinksByPaths ? rows_ : cols_;
    }
    const std::vector<std::string>& paths() const noexcept {
        return orientation_ == Orientation::LinksByPaths ? cols_ : rows_;
    }

    bool uses(std::size_t path, std::size_t link) const {
        return orientation_ == Orientation::LinksByPaths ? cell(link, path) != 0 : cell(path, link) != 0;
    }

    std::string_view name() const noexcept { return orientation_ == Orientation::LinksByPaths ? "R" : "R^T"; }

    bool operator==(const FilterMatrix&) const = default;

private:
    static void require_unique(const std::vector<std::string>& labels) {
        std::set<std::string> seen;
        for (const auto& l : labels) {
            if (l.empty() || !seen.insert(l).second) {
                throw Error(ErrorCode::InvalidSpec, "empty or duplicate label '" + l + "'");
            }
        }
    }

    Orientation orientation_ = Orientation::LinksByPaths;
    std::vector<std::string> rows_;
    std::vector<std::string> cols_;
    std::vector<std::uint8_t> cells_;
};

struct PathUsage {
    std::string path;
    std::vector<std::string> links;
};

inline FilterMatrix build_filter(const std::vector<PathUsage>& paths, const std::vector<std::string>& links) {
    const std::size_t m = links.size();
    const std::size_t n = paths.size();
    std::vector<std::uint8_t> cells(m * n, 0);
    std::vector<std::string> path_labels;
    for (std::size_t p = 0; p < n; ++p) {
        path_labels.push_back(paths[p].path);
        for (const auto& l : paths[p].links) {
            auto it = std::find(links.begin(), links.end(), l);
            if (it == links.end()) throw Error(ErrorCode::UnknownLink, "path " + paths[p].path + " uses unknown link " + l);
            cells[static_cast<std::size_t>(it - links.begin()) * n + p] = 1;
        }
    }
    return FilterMatrix(Orientation::LinksByPaths, links, std::move(path_labels), std::move(cells));
}

inline FilterMatrix transpose(const FilterMatrix& r) {
    const std::size_t rows = r.row_labels().size();
    const std::size_t cols = r.col_labels().size();
    std::vector<std::uint8_t> cells(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) cells[j * rows + i] = r.cell(i, j);
    }
    const auto flipped =
        r.orientation() == Orientation::LinksByPaths ? Orientation::PathsByLinks : Orientation::LinksByPaths;
    return FilterMatrix(flipped, r.col_labels(), r.row_labels(), std::move(cells));
}

/// Paths with at least one used link, in matrix order.
inline std::vector<std::string> relation_range(const FilterMatrix& r) {
    std::vector<std::string> out;
    for (std::size_t p = 0; p < r.paths().size(); ++p) {
        for (std::size_t l = 0; l < r.links().size(); ++l) {
            if (r.uses(p, l)) {
                out.push_back(r.paths()[p]);
                break;
            }
        }
    }
    return out;
}

/// Links used by at least one path, in matrix order.
inline std::vector<std::string> relation_domain(const FilterMatrix& r) {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < r.links().size(); ++l) {
        for (std::size_t p = 0; p < r.paths().size(); ++p) {
            if (r.uses(p, l)) {
                out.push_back(r.links()[l]);
                break;
            }
        }
    }
    return out;
}

inline std::vector<std::string> surviving_paths(const FilterMatrix& r, const std::set<std::string>& failed_links) {
    std::vector<bool> failed(r.links().size(), false);
    for (const auto& f : failed_links) {
        auto it = std::find(r.links().begin(), r.links().end(), f);
        if (it == r.links().end()) throw Error(ErrorCode::UnknownLink, "cannot fail unknown link " + f);
        failed[static_cast<std::size_t>(it - r.links().begin())] = true;
    }
    std::vector<std::string> out;
    for (std::size_t p = 0; p < r.paths().size(); ++p) {
        bool alive = true;
        for (std::size_t l = 0; l < r.links().size() && alive; ++l) alive = !(failed[l] && r.uses(p, l));
        if (alive) out.push_back(r.paths()[p]);
    }
    return out;
}

/// Spokes of a star: link L<k> joins client k to the hub, and each client
/// pair (a, b) gets one path over the two spokes.
inline FilterMatrix star_filter(const std::vector<std::string>& clients) {
    std::vector<std::string> links;
    for (std::size_t k = 0; k < clients.size(); ++k) links.push_back("L" + std::to_string(k + 1));
    std::vector<PathUsage> paths;
    for (std::size_t a = 0; a < clients.size(); ++a) {
        for (std::size_t b = a + 1; b < clients.size(); ++b) {
            paths.push_back({"P" + std::to_string(paths.size() + 1), {links[a], links[b]}});
        }
    }
    return build_filter(paths, links);
}

/// CSV layout: the corner cell names the matrix ("R" or
/// "R^T"), the header carries column labels, each row starts with its label.
inline void write_filter_csv(const FilterMatrix& r, std::ostream& out) {
    out << r.name();
    for (const auto& c : r.col_labels()) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < r.row_labels().size(); ++i) {
        out << r.row_labels()[i];
        for (std::size_t j = 0; j < r.col_labels().size(); ++j) out << ',' << static_cast<int>(r.cell(i, j));
        out << '\n';
    }
}

inline FilterMatrix read_filter_csv(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream s(line);
        while (std::getline(s, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r");
            const auto e = cell.find_last_not_of(" \t\r");
            cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        }
        return cells;
    };
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(split(line));
    }
    if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::ParseError, "empty filter matrix file");
    Orientation orientation;
    if (rows.front().front() == "R") {
        orientation = Orientation::LinksByPaths;
    } else if (rows.front().front() == "R^T") {
        orientation = Orientation::PathsByLinks;
    } else {
        throw Error(ErrorCode::ParseError, "corner cell must be R or R^T");
    }
    std::vector<std::string> cols(rows.front().begin() + 1, rows.front().end());
    std::vector<std::string> row_labels;
    std::vector<std::uint8_t> cells;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != cols.size() + 1) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " has wrong width");
        }
        row_labels.push_back(rows[r][0]);
        for (std::size_t c = 1; c < rows[r].size(); ++c) {
            if (rows[r][c] != "0" && rows[r][c] != "1") {
                throw Error(ErrorCode::ParseError, "entry '" + rows[r][c] + "' is not 0/1");
            }
            cells.push_back(rows[r][c] == "1" ? 1 : 0);
        }
    }
    try {
        return FilterMatrix(orientation, std::move(row_labels), std::move(cols), std::move(cells));
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

}  // namespace biokm::route
