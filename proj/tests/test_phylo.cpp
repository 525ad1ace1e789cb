#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "biokm/phylo.hpp"
#include "oracles/nj_oracle.hpp"

using namespace biokm;
using namespace biokm::phylo;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

DistanceMatrix four_taxa() {
    return DistanceMatrix::from_rows({"A", "B", "C", "D"}, {{0, 5, 7, 8}, {5, 0, 8, 9}, {7, 8, 0, 9}, {8, 9, 9, 0}});
}

DistanceMatrix to_matrix(const oracle::RefTree& t) {
    return DistanceMatrix::from_rows(t.leaves, oracle::leaf_distances(t));
}

PhyloTree to_phylo(const oracle::RefTree& t) {
    PhyloTree out;
    for (int v = 0; v < t.nodes; ++v) {
        if (v < static_cast<int>(t.leaves.size())) {
            out.add_leaf(t.leaves[v]);
        } else {
            out.add_internal();
        }
    }
    for (const auto& e : t.edges) out.connect(e.a, e.b, e.len);
    return out;
}

std::vector<std::string> labels_for(std::size_t n) {
    std::vector<std::string> l;
    for (std::size_t k = 0; k < n; ++k) l.push_back(std::string(1, static_cast<char>('A' + k)));
    return l;
}

void expect_same_splits(const std::map<oracle::Split, double>& want, const std::map<std::vector<std::string>, double>& got,
                        double tol) {
    ASSERT_EQ(want.size(), got.size());
    for (const auto& [split, len] : want) {
        auto it = got.find(split);
        ASSERT_NE(it, got.end());
        EXPECT_NEAR(it->second, len, tol);
    }
}

}  // namespace

TEST(NetDivergence, Examples) {
    const auto eq = DistanceMatrix::from_rows({"a", "b", "c"}, {{0, 4, 4}, {4, 0, 4}, {4, 4, 0}});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(net_divergence(eq, i), 8.0);

    const auto d = four_taxa();
    // direct summation
    for (std::size_t i = 0; i < 4; ++i) {
        double u = 0;
        for (std::size_t j = 0; j < 4; ++j) u += d.at(i, j);
        EXPECT_EQ(net_divergence(d, i), u);
    }
    EXPECT_EQ(net_divergence(d, 0), 20.0);
    EXPECT_EQ(net_divergence(d, 1), 22.0);
    EXPECT_EQ(net_divergence(d, 2), 24.0);
    EXPECT_EQ(net_divergence(d, 3), 26.0);

    const auto two = DistanceMatrix::from_rows({"x", "y"}, {{0, 6}, {6, 0}});
    EXPECT_EQ(net_divergence(two, 0), 6.0);
    EXPECT_EQ(net_divergence(two, 1), 6.0);
    EXPECT_EQ(code_of([&] { net_divergence(two, 2); }), ErrorCode::IndexOutOfRange);
}

TEST(NetDivergence, ScalesLinearly) {
    const auto d = four_taxa();
    const auto s = d.scaled(2.5);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(net_divergence(s, i), 2.5 * net_divergence(d, i));
}

TEST(Matrix, InvariantsEnforced) {
    using R = std::vector<std::vector<double>>;
    auto bad = [](std::vector<std::string> l, R rows) {
        return code_of([&] { DistanceMatrix::from_rows(l, rows); });
    };
    EXPECT_EQ(bad({"a"}, R{{0}}), ErrorCode::MatrixInvariantViolation);
    EXPECT_EQ(bad({"a", "b"}, R{{0, 1}, {2, 0}}), ErrorCode::MatrixInvariantViolation);
    EXPECT_EQ(bad({"a", "b"}, R{{1, 1}, {1, 0}}), ErrorCode::MatrixInvariantViolation);
    EXPECT_EQ(bad({"a", "b"}, R{{0, -1}, {-1, 0}}), ErrorCode::MatrixInvariantViolation);
    EXPECT_EQ(bad({"a", "a"}, R{{0, 1}, {1, 0}}), ErrorCode::MatrixInvariantViolation);
    EXPECT_EQ(bad({"a", "b c"}, R{{0, 1}, {1, 0}}), ErrorCode::MatrixInvariantViolation);
    EXPECT_EQ(bad({"a", "b"}, R{{0, 1}}), ErrorCode::MatrixInvariantViolation);
}

TEST(NeighborJoining, FourTaxonExample) {
    const auto tree = nj_build(four_taxa());
    EXPECT_EQ(to_newick(tree), "((A:2,B:3):1,C:4,D:5);");
    EXPECT_EQ(tree.leaf_count(), 4u);
    EXPECT_EQ(tree.edges().size(), 5u);
}

TEST(NeighborJoining, FourTaxonMatchesExhaustiveOracle) {
    const auto d = four_taxa();
    std::vector<std::vector<double>> rows(4, std::vector<double>(4));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) rows[i][j] = d.at(i, j);
    const auto fits = oracle::exact_additive_fits(d.labels(), rows);
    ASSERT_EQ(fits.size(), 1u);
    expect_same_splits(oracle::splits(fits[0].tree), edge_splits(nj_build(d)), 1e-9);
    // A=2, B=3, C=4, D=5, internal AB|CD = 1
    const auto s = oracle::splits(fits[0].tree);
    EXPECT_NEAR(s.at({"A"}), 2, 1e-9);
    EXPECT_NEAR(s.at({"A", "B"}), 1, 1e-9);
    EXPECT_NEAR(s.at({"C"}), 4, 1e-9);
}

TEST(NeighborJoining, TwoLeaves) {
    const auto tree = nj_build(DistanceMatrix::from_rows({"A", "B"}, {{0, 6}, {6, 0}}));
    ASSERT_EQ(tree.edges().size(), 1u);
    EXPECT_EQ(tree.edges()[0].length, 6.0);
    EXPECT_EQ(to_newick(tree), "(A:6,B:0);");
}

TEST(NeighborJoining, EquilateralThree) {
    const auto tree = nj_build(DistanceMatrix::from_rows({"A", "B", "C"}, {{0, 4, 4}, {4, 0, 4}, {4, 4, 0}}));
    ASSERT_EQ(tree.edges().size(), 3u);
    for (const auto& e : tree.edges()) EXPECT_DOUBLE_EQ(e.length, 2.0);
    EXPECT_EQ(to_newick(tree), "(A:2,B:2,C:2);");
}

TEST(NeighborJoining, AdditiveRecovery) {
    std::mt19937_64 rng(8675309);
    int exhaustive = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(trial % 5);
        auto labels = labels_for(n);
        std::shuffle(labels.begin(), labels.end(), rng);
        const auto truth = oracle::random_tree(labels, rng);
        const auto d = to_matrix(truth);
        const auto tree = nj_build(d);

        EXPECT_EQ(to_newick(tree, false), to_newick(to_phylo(truth), false)) << "trial " << trial;
        expect_same_splits(oracle::splits(truth), edge_splits(tree), 1e-9);

        if (n <= 6) {
            auto rows = oracle::leaf_distances(truth);
            const auto fits = oracle::exact_additive_fits(truth.leaves, rows);
            ASSERT_EQ(fits.size(), 1u) << "trial " << trial;
            expect_same_splits(oracle::splits(fits[0].tree), edge_splits(tree), 1e-9);
            ++exhaustive;
        }
    }
    EXPECT_EQ(exhaustive, 120);
}

TEST(NeighborJoining, LabelOrderInvariance) {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        const auto truth = oracle::random_tree(labels_for(4 + trial % 5), rng);
        const auto d = to_matrix(truth);
        const std::string want = to_newick(nj_build(d));
        std::vector<std::size_t> order(d.size());
        std::iota(order.begin(), order.end(), 0);
        for (int k = 0; k < 5; ++k) {
            std::shuffle(order.begin(), order.end(), rng);
            const auto got = nj_build(d.permuted(order));
            EXPECT_EQ(to_newick(got), want);
            expect_same_splits(oracle::splits(truth), edge_splits(got), 1e-9);
        }
    }
}

TEST(NeighborJoining, ScalingKeepsTopology) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const auto d = to_matrix(oracle::random_tree(labels_for(5 + trial % 4), rng));
        for (double s : {0.001, 0.5, 3.0, 1000.0}) {
            EXPECT_EQ(to_newick(nj_build(d.scaled(s)), false), to_newick(nj_build(d), false));
        }
    }
}

TEST(NeighborJoining, ShapeOnNonAdditiveInput) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 8);
        std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) rows[i][j] = rows[j][i] = u(rng);
        const auto tree = nj_build(DistanceMatrix::from_rows(labels_for(n), rows));
        EXPECT_EQ(tree.leaf_count(), n);
        EXPECT_EQ(tree.edges().size(), 2 * n - 3);
        for (const auto& e : tree.edges()) EXPECT_GE(e.length, 0.0);
        for (std::size_t v = 0; v < tree.node_count(); ++v) {
            if (!tree.is_leaf(v)) {
                EXPECT_EQ(tree.incident(v).size(), 3u);
            }
        }
    }
}

TEST(NeighborJoining, NegativeBranchIsClampedAndTransferred) {
    // strongly non-additive: A is far from everything, B and C nearly coincide
    const auto d = DistanceMatrix::from_rows({"A", "B", "C", "D"},
                                             {{0, 10, 10, 1}, {10, 0, 0.1, 10}, {10, 0.1, 0, 10}, {1, 10, 10, 0}});
    const auto tree = nj_build(d);
    for (const auto& e : tree.edges()) EXPECT_GE(e.length, 0.0);
    const auto three = nj_build(DistanceMatrix::from_rows({"A", "B", "C"}, {{0, 1, 10}, {1, 0, 1}, {10, 1, 0}}));
    double total = 0;
    for (const auto& e : three.edges()) {
        EXPECT_GE(e.length, 0.0);
        total += e.length;
    }
    // three-point lengths 5, -4, 5: the -4 goes to zero and is charged to a 5
    EXPECT_DOUBLE_EQ(total, 6.0);
}

TEST(Newick, RoundTripRandomTrees) {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 12);
        std::vector<std::string> labels;
        for (std::size_t k = 0; k < n; ++k) labels.push_back("t" + std::to_string(k));
        const auto truth = oracle::random_tree(labels, rng, 0.001, 100.0);
        const std::string once = to_newick(to_phylo(truth));
        const std::string twice = to_newick(parse_newick(once));
        EXPECT_EQ(once, twice) << once;
        EXPECT_EQ(to_newick(parse_newick(to_newick(to_phylo(truth), false)), false), to_newick(to_phylo(truth), false));
    }
}

TEST(Newick, ParsesRootedInput) {
    // a bifurcating root is folded into one edge
    const auto t = parse_newick("((A:2,B:3):0.4,(C:4,D:5):0.6);");
    EXPECT_EQ(to_newick(t), "((A:2,B:3):1,C:4,D:5);");
    EXPECT_EQ(to_newick(parse_newick("(B:1,A:2);")), "(A:3,B:0);");
}

TEST(Newick, Rejections) {
    for (const char* bad : {"", "(A,B)", "(A,B);x", "(A:x,B);", "(,B);", "((A,B);", "(A);"}) {
        EXPECT_EQ(code_of([&] { parse_newick(bad); }), ErrorCode::ParseError) << bad;
    }
}

TEST(StarDistances, Examples) {
    const auto d = star_distances({{"c1", 2.0}, {"c2", 3.0}});
    ASSERT_EQ(d.labels(), (std::vector<std::string>{"server", "c1", "c2"}));
    EXPECT_EQ(d.at(1, 2), 5.0);
    EXPECT_EQ(d.at(0, 1), 2.0);
    EXPECT_EQ(d.at(0, 2), 3.0);
    EXPECT_EQ(d.at(1, 2), d.at(0, 1) + d.at(0, 2));

    const auto z = star_distances({{"c1", 0.0}});
    ASSERT_EQ(z.size(), 2u);
    EXPECT_EQ(z.at(0, 1), 0.0);
    EXPECT_EQ(z.at(1, 0), 0.0);

    EXPECT_EQ(code_of([] { star_distances({{"c1", -0.5}}); }), ErrorCode::NegativeRtt);
}

TEST(StarDistances, TreeRecoversSpokes) {
    const auto tree = nj_build(star_distances({{"alice", 0.2}, {"bob", 0.35}, {"carol", 0.5}}));
    const auto s = edge_splits(tree);
    EXPECT_NEAR(s.at({"alice"}), 0.2, 1e-12);
    EXPECT_NEAR(s.at({"bob"}), 0.35, 1e-12);
}

TEST(MatrixCsv, RoundTripBothLayouts) {
    const auto d = four_taxa();
    std::stringstream buf;
    write_matrix_csv(d, buf);
    EXPECT_EQ(buf.str(), "A,B,C,D\n0,5,7,8\n5,0,8,9\n7,8,0,9\n8,9,9,0\n");
    const auto back = read_matrix_csv(buf);
    EXPECT_EQ(back.labels(), d.labels());
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(back.at(i, j), d.at(i, j));

    std::istringstream labelled(",A,B\nA,0,1.5\nB,1.5,0\n");
    EXPECT_EQ(read_matrix_csv(labelled).at(0, 1), 1.5);

    std::istringstream bad("A,B\n0,x\n1,0\n");
    EXPECT_EQ(code_of([&] { read_matrix_csv(bad); }), ErrorCode::ParseError);
}
