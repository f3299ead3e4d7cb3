#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fuseshot/rng.hpp"
#include "fuseshot/tree.hpp"

using namespace fuseshot;

namespace {

// root -- u (2) -- x (1, class "x")
//      |        `- y (3, class "y")
//      `- z (5, class "z")
const char* kSmallTree =
    "# three classes, one internal group\n"
    "r\tROOT\t0\n"
    "u\tr\t2\n"
    "x\tu\t1\tx\n"
    "y\tu\t3\ty\n"
    "\n"
    "z\tr\t5\tz\n";

// Random tree by splitting leaves off existing nodes; lengths in [0, 5].
TreeHierarchy random_tree(int leaves, Rng& rng) {
    std::vector<TreeHierarchy::NodeDecl> decls;
    decls.push_back({"n0", "ROOT", 0.0, "", 0});
    std::vector<std::string> internal{"n0"};
    int next = 1;
    for (int i = 0; i < leaves; ++i) {
        const std::string parent = internal[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(internal.size())))];
        const std::string id = "n" + std::to_string(next++);
        decls.push_back({id, parent, rng.uniform(0.0, 5.0), "c" + std::to_string(i), 0});
        // occasionally grow an internal node to deepen the tree
        if (rng.uniform() < 0.4) {
            const std::string gid = "n" + std::to_string(next++);
            decls.push_back({gid, parent, rng.uniform(0.0, 5.0), "", 0});
            internal.push_back(gid);
        }
    }
    // from_nodes rejects childless internals; prune declarations bottom-up
    for (;;) {
        std::vector<TreeHierarchy::NodeDecl> kept;
        for (const auto& d : decls) {
            if (!d.class_label.empty()) {
                kept.push_back(d);
                continue;
            }
            bool has_child = false;
            for (const auto& c : decls) has_child = has_child || (&c != &d && c.parent == d.id);
            if (has_child || d.parent == "ROOT") kept.push_back(d);
        }
        if (kept.size() == decls.size()) break;
        decls = std::move(kept);
    }
    return TreeHierarchy::from_nodes(decls);
}

}  // namespace

TEST_CASE("parser reads ids, lengths, labels, comments, and blank lines") {
    const TreeHierarchy t = TreeHierarchy::parse(kSmallTree);
    CHECK(t.node_count() == 5);
    CHECK(t.class_count() == 3);
    REQUIRE(t.class_names().size() == 3);
    // class order follows leaf appearance order in the file
    CHECK(t.class_names()[0] == "x");
    CHECK(t.class_names()[1] == "y");
    CHECK(t.class_names()[2] == "z");
    CHECK(t.class_index("y") == 1);
    CHECK(t.class_index("nope") == -1);
    CHECK(t.parent_of(t.leaf_of_class(0)) == t.parent_of(t.leaf_of_class(1)));
    CHECK(t.parent_of(t.leaf_of_class(2)) == t.root());
}

TEST_CASE("parse errors carry line numbers") {
    SUBCASE("wrong field count") {
        try {
            TreeHierarchy::parse("a\tROOT\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        }
    }
    SUBCASE("bad length") {
        try {
            TreeHierarchy::parse("a\tROOT\t0\nb\ta\tfast\tc\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("duplicate id") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tROOT\t0\na\ta\t1\tc\n"), ParseError); }
    SUBCASE("two roots") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tROOT\t0\nb\tROOT\t1\tc\n"), ParseError); }
    SUBCASE("no root") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tb\t1\tc\nb\ta\t1\td\n"), ParseError); }
    SUBCASE("unknown parent") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tROOT\t0\nb\tq\t1\tc\n"), ParseError); }
    SUBCASE("negative length") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tROOT\t0\nb\ta\t-1\tc\n"), ParseError); }
    SUBCASE("unlabeled leaf") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tROOT\t0\nb\ta\t1\n"), ParseError); }
    SUBCASE("duplicate class") { CHECK_THROWS_AS(TreeHierarchy::parse("a\tROOT\t0\nb\ta\t1\tc\nd\ta\t1\tc\n"), ParseError); }
    SUBCASE("empty input") { CHECK_THROWS_AS(TreeHierarchy::parse("# only a comment\n"), ParseError); }
}

TEST_CASE("covariance of the small tree matches the hand computation") {
    // diagonal: root-to-leaf path sums (2+1, 2+3, 5); off-diagonal: path to
    // the nearest common ancestor (2 for x,y through u; 0 across the root)
    const TreeHierarchy t = TreeHierarchy::parse(kSmallTree);
    const Matrix b = tree_covariance(t);
    const Matrix expected = Matrix::from_rows({{3.0, 2.0, 0.0}, {2.0, 5.0, 0.0}, {0.0, 0.0, 5.0}});
    REQUIRE(b.rows() == 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(b(i, j) == expected(i, j));
    }

    const Matrix n = normalize_covariance(b);
    CHECK(n(0, 0) == doctest::Approx(1.0));
    CHECK(n(1, 1) == doctest::Approx(1.0));
    CHECK(n(0, 1) == doctest::Approx(2.0 / std::sqrt(15.0)).epsilon(1e-14));
    CHECK(n(0, 2) == 0.0);
}

TEST_CASE("path-sum and factored covariance agree on random trees") {
    Rng rng(13);
    for (int round = 0; round < 30; ++round) {
        const TreeHierarchy t = random_tree(2 + rng.uniform_int(20), rng);
        const Matrix a = tree_covariance(t);
        const Matrix b = tree_covariance_vdv(t);
        REQUIRE(a.same_shape(b));
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a.data()[i] - b.data()[i]) <= 1e-12);
        }
    }
}

TEST_CASE("normalization requires a positive diagonal") {
    CHECK_THROWS_AS(normalize_covariance(Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}})), ContractError);
    CHECK_THROWS_AS(normalize_covariance(Matrix(2, 3)), ShapeError);
}

TEST_CASE("expand_to_samples lifts class kernels by label") {
    const Matrix k = Matrix::from_rows({{1.0, 0.5}, {0.5, 1.0}});
    const Matrix s = expand_to_samples(k, {1, 0, 1});
    const Matrix expected = Matrix::from_rows({{1.0, 0.5, 1.0}, {0.5, 1.0, 0.5}, {1.0, 0.5, 1.0}});
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(s(i, j) == expected(i, j));
    }
    CHECK_THROWS_AS(expand_to_samples(k, {2}), ContractError);
    CHECK_THROWS_AS(expand_to_samples(k, {-1}), ContractError);
}

TEST_CASE("format round-trips through the parser") {
    const TreeHierarchy t = TreeHierarchy::parse(kSmallTree);
    const TreeHierarchy back = TreeHierarchy::parse(t.format());
    CHECK(back.node_count() == t.node_count());
    CHECK(back.class_names() == t.class_names());
    const Matrix a = tree_covariance(t);
    const Matrix b = tree_covariance(back);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);

    Rng rng(77);
    const TreeHierarchy big = random_tree(15, rng);
    const TreeHierarchy big_back = TreeHierarchy::parse(big.format());
    const Matrix ba = tree_covariance(big);
    const Matrix bb = tree_covariance(big_back);
    for (std::size_t i = 0; i < ba.size(); ++i) CHECK(ba.data()[i] == bb.data()[i]);
}
