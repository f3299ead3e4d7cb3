#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fuseshot/dataset.hpp"
#include "fuseshot/rng.hpp"

using namespace fuseshot;
namespace fs = std::filesystem;

namespace {

// Unique scratch directory, removed on scope exit.
struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        static int counter = 0;
        path = fs::temp_directory_path() / ("fuseshot_" + std::string(tag) + "_" + std::to_string(++counter));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

SynthSpec small_spec() {
    SynthSpec spec;
    spec.lots_classes = 5;
    spec.one_example_classes = 3;
    spec.samples_per_class = 6;
    spec.feature_dim = 16;
    spec.seed = 21;
    return spec;
}

double row_cosine(const Matrix& a, int i, const Matrix& b, int j) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < a.cols(); ++k) {
        dot += a(i, k) * b(j, k);
        na += a(i, k) * a(i, k);
        nb += b(j, k) * b(j, k);
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("synth spec validation") {
    CHECK_NOTHROW(SynthSpec{}.validate());
    SynthSpec bad = small_spec();
    bad.lots_classes = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_spec();
    bad.lots_classes = 5000;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_spec();
    bad.separation = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_spec();
    bad.noise = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_spec();
    bad.fidelity = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_spec();
    bad.tree_depth = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bundle validation catches inconsistent structures") {
    SynthData data = generate_synthetic(small_spec());
    CHECK_NOTHROW(data.bundle.validate());

    DatasetBundle broken = data.bundle;
    broken.labels[0] = 99;
    CHECK_THROWS_AS(broken.validate(), ConfigError);

    broken = data.bundle;
    broken.one_classes.clear();  // class 5.. belongs to neither pool now
    CHECK_THROWS_AS(broken.validate(), ConfigError);

    broken = data.bundle;
    broken.lots_classes.push_back(broken.one_classes[0]);  // both pools
    CHECK_THROWS_AS(broken.validate(), ConfigError);

    broken = data.bundle;
    broken.labels.pop_back();
    CHECK_THROWS_AS(broken.validate(), ConfigError);
}

TEST_CASE("generator is deterministic and shaped by its spec") {
    const SynthSpec spec = small_spec();
    const SynthData a = generate_synthetic(spec);
    const SynthData b = generate_synthetic(spec);

    REQUIRE(a.bundle.features.rows() == 8 * 6);
    REQUIRE(a.bundle.features.cols() == 16);
    REQUIRE(a.bundle.class_names.size() == 8);
    CHECK(a.bundle.class_names[0] == "lots_00");
    CHECK(a.bundle.class_names[5] == "one_00");
    CHECK(a.bundle.lots_classes == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(a.bundle.one_classes == std::vector<int>{5, 6, 7});
    REQUIRE(a.prototypes.rows() == 8);

    for (std::size_t i = 0; i < a.bundle.features.size(); ++i) {
        CHECK(a.bundle.features.data()[i] == b.bundle.features.data()[i]);
    }
    CHECK(a.bundle.labels == b.bundle.labels);

    SynthSpec other = spec;
    other.seed = 22;
    const SynthData c = generate_synthetic(other);
    bool same = true;
    for (std::size_t i = 0; i < a.bundle.features.size(); ++i) {
        same = same && a.bundle.features.data()[i] == c.bundle.features.data()[i];
    }
    CHECK_FALSE(same);

    // class prototypes live on the unit sphere
    for (int i = 0; i < a.prototypes.rows(); ++i) {
        double sq = 0.0;
        for (int j = 0; j < a.prototypes.cols(); ++j) sq += a.prototypes(i, j) * a.prototypes(i, j);
        CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
    }

    // both side-info sources come along, aligned to the class list
    REQUIRE(a.sources.size() == 2);
    CHECK(a.sources[0].name == "class_embeddings");
    CHECK_FALSE(a.sources[0].is_tree());
    CHECK(a.sources[1].name == "hierarchy");
    REQUIRE(a.sources[1].is_tree());
    const auto& tree = std::get<TreeHierarchy>(a.sources[1].payload);
    CHECK(tree.class_names() == a.bundle.class_names);
}

TEST_CASE("noise-free samples sit exactly on their prototype") {
    SynthSpec spec = small_spec();
    spec.noise = 0.0;
    const SynthData data = generate_synthetic(spec);
    for (int row = 0; row < data.bundle.features.rows(); ++row) {
        const int c = data.bundle.labels[static_cast<std::size_t>(row)];
        for (int j = 0; j < data.bundle.features.cols(); ++j) {
            CHECK(data.bundle.features(row, j) == data.prototypes(c, j));
        }
    }
}

TEST_CASE("moderate noise keeps nearest-prototype classification perfect") {
    SynthSpec spec = small_spec();
    spec.noise = 0.05;
    const SynthData data = generate_synthetic(spec);
    for (int row = 0; row < data.bundle.features.rows(); ++row) {
        int best = 0;
        double best_cos = -2.0;
        for (int c = 0; c < data.prototypes.rows(); ++c) {
            const double v = row_cosine(data.bundle.features, row, data.prototypes, c);
            if (v > best_cos) {
                best_cos = v;
                best = c;
            }
        }
        CHECK(best == data.bundle.labels[static_cast<std::size_t>(row)]);
    }
}

TEST_CASE("fidelity interpolates the class embeddings between truth and noise") {
    SynthSpec spec = small_spec();
    spec.fidelity = 1.0;
    const SynthData exact = generate_synthetic(spec);
    const auto& table1 = std::get<EmbeddingTable>(exact.sources[0].payload).table;
    for (int c = 0; c < table1.rows(); ++c) {
        for (int j = 0; j < table1.cols(); ++j) CHECK(table1(c, j) == exact.prototypes(c, j));
    }

    // at fidelity 0 the embedding carries no information about the prototype:
    // the mean cosine over classes and seeds hovers near zero
    double mean_cos0 = 0.0, mean_cos9 = 0.0;
    int count = 0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        SynthSpec s0 = small_spec();
        s0.seed = seed;
        s0.fidelity = 0.0;
        const SynthData d0 = generate_synthetic(s0);
        const auto& t0 = std::get<EmbeddingTable>(d0.sources[0].payload).table;
        SynthSpec s9 = s0;
        s9.fidelity = 0.9;
        const SynthData d9 = generate_synthetic(s9);
        const auto& t9 = std::get<EmbeddingTable>(d9.sources[0].payload).table;
        for (int c = 0; c < t0.rows(); ++c) {
            mean_cos0 += row_cosine(t0, c, d0.prototypes, c);
            mean_cos9 += row_cosine(t9, c, d9.prototypes, c);
            ++count;
        }
    }
    mean_cos0 /= count;
    mean_cos9 /= count;
    CHECK(std::abs(mean_cos0) < 0.15);  // ~0.02 expected sampling error at d=16
    CHECK(mean_cos9 > 0.8);
}

TEST_CASE("dataset round-trips through the file formats bit-exactly") {
    const SynthData data = generate_synthetic(small_spec());
    TempDir dir("roundtrip");
    save_dataset(data.bundle, dir.path.string());
    save_sources(data.sources, dir.path.string());

    const DatasetBundle back =
        load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json"));
    CHECK(back.class_names == data.bundle.class_names);
    CHECK(back.labels == data.bundle.labels);
    CHECK(back.lots_classes == data.bundle.lots_classes);
    CHECK(back.one_classes == data.bundle.one_classes);
    REQUIRE(back.features.same_shape(data.bundle.features));
    for (std::size_t i = 0; i < back.features.size(); ++i) {
        CHECK(back.features.data()[i] == data.bundle.features.data()[i]);
    }

    const SideInfoSource emb = load_embeddings_csv(dir.file("class_embeddings.csv"), "class_embeddings");
    const auto& table = std::get<EmbeddingTable>(emb.payload);
    CHECK(table.classes == data.bundle.class_names);
    const auto& orig = std::get<EmbeddingTable>(data.sources[0].payload).table;
    REQUIRE(table.table.same_shape(orig));
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(table.table.data()[i] == orig.data()[i]);

    const SideInfoSource tree = load_tree_file(dir.file("hierarchy.txt"), "hierarchy");
    const Matrix cov_back = tree_covariance(std::get<TreeHierarchy>(tree.payload));
    const Matrix cov_orig = tree_covariance(std::get<TreeHierarchy>(data.sources[1].payload));
    REQUIRE(cov_back.same_shape(cov_orig));
    for (std::size_t i = 0; i < cov_orig.size(); ++i) CHECK(cov_back.data()[i] == cov_orig.data()[i]);
}

TEST_CASE("loader rejects malformed files with located errors") {
    TempDir dir("badfiles");
    write_text_file(dir.file("split.json"), R"({"lots": ["a"], "one_example": ["b"]})");
    write_text_file(dir.file("labels.csv"), "class\na\nb\n");
    write_text_file(dir.file("features.csv"), "f0,f1\n1,2\n3,4\n");
    CHECK_NOTHROW(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")));

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_dataset(dir.file("nope.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ConfigError);
    }
    SUBCASE("bad split json") {
        write_text_file(dir.file("split.json"), "{not json");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ParseError);
    }
    SUBCASE("split missing a pool") {
        write_text_file(dir.file("split.json"), R"({"lots": ["a"]})");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ParseError);
    }
    SUBCASE("class in both pools") {
        write_text_file(dir.file("split.json"), R"({"lots": ["a"], "one_example": ["a"]})");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ConfigError);
    }
    SUBCASE("wrong labels header") {
        write_text_file(dir.file("labels.csv"), "label\na\nb\n");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ParseError);
    }
    SUBCASE("unknown class name") {
        write_text_file(dir.file("labels.csv"), "class\na\nzzz\n");
        try {
            load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json"));
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("features header") {
        write_text_file(dir.file("features.csv"), "x0,x1\n1,2\n3,4\n");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ParseError);
    }
    SUBCASE("ragged features") {
        write_text_file(dir.file("features.csv"), "f0,f1\n1,2\n3\n");
        try {
            load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("non-numeric feature") {
        write_text_file(dir.file("features.csv"), "f0,f1\n1,2\n3,oops\n");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ParseError);
    }
    SUBCASE("row count mismatch against labels") {
        write_text_file(dir.file("features.csv"), "f0,f1\n1,2\n");
        CHECK_THROWS_AS(load_dataset(dir.file("features.csv"), dir.file("labels.csv"), dir.file("split.json")),
                        ConfigError);
    }
}

TEST_CASE("embeddings loader validates its format") {
    TempDir dir("emb");
    write_text_file(dir.file("ok.csv"), "a,1,2\nb,3,4\n");
    const SideInfoSource src = load_embeddings_csv(dir.file("ok.csv"), "w");
    const auto& t = std::get<EmbeddingTable>(src.payload);
    REQUIRE(t.classes.size() == 2);
    CHECK(t.table(1, 1) == 4.0);

    write_text_file(dir.file("dup.csv"), "a,1,2\na,3,4\n");
    CHECK_THROWS_AS(load_embeddings_csv(dir.file("dup.csv"), "w"), ParseError);
    write_text_file(dir.file("ragged.csv"), "a,1,2\nb,3\n");
    CHECK_THROWS_AS(load_embeddings_csv(dir.file("ragged.csv"), "w"), ParseError);
    write_text_file(dir.file("short.csv"), "a\n");
    CHECK_THROWS_AS(load_embeddings_csv(dir.file("short.csv"), "w"), ParseError);
    write_text_file(dir.file("empty.csv"), "");
    CHECK_THROWS_AS(load_embeddings_csv(dir.file("empty.csv"), "w"), ParseError);
    write_text_file(dir.file("nan.csv"), "a,1,x\n");
    CHECK_THROWS_AS(load_embeddings_csv(dir.file("nan.csv"), "w"), ParseError);
}

TEST_CASE("matrix csv reader skips headers and label columns") {
    TempDir dir("csv");
    write_text_file(dir.file("plain.csv"), "1,2\n3,4\n");
    const Matrix plain = read_matrix_csv(dir.file("plain.csv"));
    CHECK(plain(1, 1) == 4.0);

    write_text_file(dir.file("labeled.csv"), "class,a,b\nx,1,2\ny,3,4\n");
    const Matrix labeled = read_matrix_csv(dir.file("labeled.csv"));
    REQUIRE(labeled.rows() == 2);
    REQUIRE(labeled.cols() == 2);
    CHECK(labeled(0, 0) == 1.0);
    CHECK(labeled(1, 1) == 4.0);

    write_text_file(dir.file("headeronly.csv"), "a,b\n");
    CHECK_THROWS_AS(read_matrix_csv(dir.file("headeronly.csv")), ParseError);
    write_text_file(dir.file("ragged.csv"), "1,2\n3\n");
    CHECK_THROWS_AS(read_matrix_csv(dir.file("ragged.csv")), ParseError);
    write_text_file(dir.file("empty.csv"), "\n\n");
    CHECK_THROWS_AS(read_matrix_csv(dir.file("empty.csv")), ParseError);

    // writer/reader round trip preserves exact doubles
    Rng rng(51);
    Matrix m(4, 3);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * std::pow(10.0, rng.uniform_int(7) - 3);
    write_matrix_csv(m, dir.file("rt.csv"));
    const Matrix back = read_matrix_csv(dir.file("rt.csv"));
    REQUIRE(back.same_shape(m));
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(back.data()[i] == m.data()[i]);

    // labeled writer round-trips through the label-aware reader
    const Matrix sq = Matrix::from_rows({{1.5, -0.25}, {0.125, 2.0}});
    write_labeled_matrix_csv(sq, {"p", "q"}, dir.file("sq.csv"));
    const Matrix sq_back = read_matrix_csv(dir.file("sq.csv"));
    REQUIRE(sq_back.same_shape(sq));
    for (std::size_t i = 0; i < sq.size(); ++i) CHECK(sq_back.data()[i] == sq.data()[i]);
    CHECK_THROWS_AS(write_labeled_matrix_csv(sq, {"p"}, dir.file("bad.csv")), ContractError);
}

TEST_CASE("format_double survives the round trip exactly") {
    Rng rng(61);
    for (int i = 0; i < 200; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform_int(13) - 6);
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5) == "-2.5");
}
