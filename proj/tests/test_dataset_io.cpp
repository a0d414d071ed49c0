#include "doctest.h"

#include "latent_align/dataset.hpp"
#include "latent_align/error.hpp"
#include "latent_align/npy.hpp"
#include "latent_align/report.hpp"

#include "oracles.hpp"
#include "tempdir.hpp"

#include "json.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <set>

using namespace latent_align;
using json = nlohmann::json;

namespace {

/// Hand-assembled NPY v1.0 file.
void write_npy(const std::filesystem::path& path, const std::string& descr, const std::string& shape,
               const std::vector<char>& payload) {
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');
    std::ofstream out(path, std::ios::binary);
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(dict.size());
    out.put(static_cast<char>(len & 0xff));
    out.put(static_cast<char>(len >> 8));
    out << dict;
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

template <class T>
std::vector<char> bytes_of(const std::vector<T>& v) {
    std::vector<char> b(v.size() * sizeof(T));
    std::memcpy(b.data(), v.data(), b.size());
    return b;
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) {
        out << l << '\n';
    }
}

void write_manifest(const TempDir& dir, const std::string& x_ids, const std::string& y_ids) {
    json m = {{"x", {{"features", "x.npy"}, {"ids", x_ids}, {"modality", "3d"}}},
              {"y", {{"features", "y.npy"}, {"ids", y_ids}, {"modality", "text"}}}};
    std::ofstream(dir / "manifest.json") << m.dump();
}

} // namespace

TEST_CASE("load_matrix reads float32 and float64") {
    TempDir dir;
    write_npy(dir / "z.npy", "<f4", "(3, 2)", bytes_of(std::vector<float>(6, 0.0F)));
    const Matrix z = load_matrix(dir / "z.npy");
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 2);
    CHECK(z.isZero(0.0));

    write_npy(dir / "d.npy", "<f8", "(2, 3)", bytes_of(std::vector<double>{1, 2, 3, 4, 5, 6.5}));
    const Matrix d = load_matrix(dir / "d.npy");
    CHECK(d(0, 2) == 3.0);
    CHECK(d(1, 0) == 4.0);
    CHECK(d(1, 2) == 6.5);

    write_npy(dir / "f.npy", "<f4", "(1, 1)", bytes_of(std::vector<float>{0.1F}));
    CHECK(load_matrix(dir / "f.npy")(0, 0) == static_cast<double>(0.1F));
}

TEST_CASE("load_matrix errors") {
    TempDir dir;
    write_npy(dir / "v.npy", "<f8", "(4,)", bytes_of(std::vector<double>(4, 1.0)));
    CHECK(kind_of([&] { load_matrix(dir / "v.npy"); }) == ErrorKind::InvalidShape);

    std::vector<double> vals{1.0, std::numeric_limits<double>::quiet_NaN(), 3.0, 4.0};
    write_npy(dir / "nan.npy", "<f8", "(2, 2)", bytes_of(vals));
    try {
        load_matrix(dir / "nan.npy");
        FAIL("expected DataError");
    } catch (const CellError& e) {
        CHECK(e.kind() == ErrorKind::DataError);
        CHECK(e.row() == 0);
        CHECK(e.col() == 1);
    }

    std::ofstream(dir / "junk.npy") << "not an array";
    CHECK(kind_of([&] { load_matrix(dir / "junk.npy"); }) == ErrorKind::FormatError);
    write_npy(dir / "i.npy", "<i8", "(1, 1)", bytes_of(std::vector<std::int64_t>{1}));
    CHECK(kind_of([&] { load_matrix(dir / "i.npy"); }) == ErrorKind::FormatError);
    write_npy(dir / "short.npy", "<f8", "(3, 3)", bytes_of(std::vector<double>(4, 1.0)));
    CHECK(kind_of([&] { load_matrix(dir / "short.npy"); }) == ErrorKind::FormatError);
    CHECK(kind_of([&] { load_matrix(dir / "missing.npy"); }) == ErrorKind::IoError);
    CHECK(error_family(ErrorKind::IoError) == ErrorFamily::Io);
}

TEST_CASE("save_matrix round trip") {
    TempDir dir;
    std::mt19937_64 rng(21);
    const Matrix m = oracle::random_matrix(7, 5, rng);
    save_matrix(dir / "m.npy", m);
    CHECK(load_matrix(dir / "m.npy") == m);
    save_matrix(dir / "m32.npy", m, NpyDtype::Float32);
    const Matrix m32 = load_matrix(dir / "m32.npy");
    CHECK(m32 == m.cast<float>().cast<double>());

    std::ifstream in(dir / "m.npy", std::ios::binary);
    std::string head(10, '\0');
    in.read(head.data(), 10);
    const auto len = static_cast<unsigned char>(head[8]) | (static_cast<unsigned char>(head[9]) << 8);
    CHECK((10 + len) % 64 == 0);
    CHECK(head[6] == 1);
}

TEST_CASE("load_paired pairing by id") {
    TempDir dir;
    const Matrix x = (Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished();
    save_matrix(dir / "x.npy", x);
    write_lines(dir / "x_ids.txt", {"a", "b", "c"});

    SUBCASE("same order") {
        save_matrix(dir / "y.npy", x * 10.0);
        write_lines(dir / "y_ids.txt", {"a", "b", "c"});
        write_manifest(dir, "x_ids.txt", "y_ids.txt");
        const auto p = load_paired(dir / "manifest.json");
        CHECK(p.dropped_x == 0);
        CHECK(p.dropped_y == 0);
        CHECK(p.data.x.ids == p.data.y.ids);
        CHECK(p.data.y.features == x * 10.0);
        CHECK(p.data.x.modality == "3d");
        CHECK(p.data.y.modality == "text");
    }
    SUBCASE("permuted y") {
        const Matrix y = (Matrix(3, 1) << 30, 10, 20).finished();
        save_matrix(dir / "y.npy", y);
        write_lines(dir / "y_ids.txt", {"c", "a", "b"});
        write_manifest(dir, "x_ids.txt", "y_ids.txt");
        const auto p = load_paired(dir / "manifest.json");
        CHECK(p.data.y.ids == std::vector<std::string>{"a", "b", "c"});
        CHECK(p.data.y.features(0, 0) == 10.0);
        CHECK(p.data.y.features(1, 0) == 20.0);
        CHECK(p.data.y.features(2, 0) == 30.0);
    }
    SUBCASE("partial overlap drops") {
        save_matrix(dir / "y.npy", (Matrix(3, 1) << 1, 2, 3).finished());
        write_lines(dir / "y_ids.txt", {"b", "z", "a"});
        write_manifest(dir, "x_ids.txt", "y_ids.txt");
        const auto p = load_paired(dir / "manifest.json");
        CHECK(p.data.size() == 2);
        CHECK(p.dropped_x == 1);
        CHECK(p.dropped_y == 1);
        CHECK(p.data.x.ids == p.data.y.ids);
        CHECK(p.data.x.ids == std::vector<std::string>{"a", "b"});
        CHECK(p.data.y.features(0, 0) == 3.0);
    }
    SUBCASE("disjoint ids") {
        save_matrix(dir / "y.npy", x);
        write_lines(dir / "y_ids.txt", {"p", "q", "r"});
        write_manifest(dir, "x_ids.txt", "y_ids.txt");
        CHECK(kind_of([&] { load_paired(dir / "manifest.json"); }) == ErrorKind::PairingError);
    }
    SUBCASE("id count mismatch and duplicates") {
        save_matrix(dir / "y.npy", x);
        write_lines(dir / "y_ids.txt", {"a", "b"});
        write_manifest(dir, "x_ids.txt", "y_ids.txt");
        CHECK(kind_of([&] { load_paired(dir / "manifest.json"); }) == ErrorKind::DataError);
        write_lines(dir / "y_ids.txt", {"a", "b", "a"});
        CHECK(kind_of([&] { load_paired(dir / "manifest.json"); }) == ErrorKind::DataError);
    }
    SUBCASE("missing and malformed manifests") {
        CHECK(kind_of([&] { load_paired(dir / "nope.json"); }) == ErrorKind::IoError);
        std::ofstream(dir / "bad.json") << "{ not json";
        CHECK(kind_of([&] { load_paired(dir / "bad.json"); }) == ErrorKind::FormatError);
        std::ofstream(dir / "empty.json") << "{}";
        CHECK(kind_of([&] { load_paired(dir / "empty.json"); }) == ErrorKind::FormatError);
    }
}

TEST_CASE("save_paired round trip") {
    TempDir dir;
    std::mt19937_64 rng(22);
    PairedDataset ds;
    ds.x = {{"u", "v", "w", "t"}, oracle::random_matrix(4, 3, rng), "3d"};
    ds.y = {{"u", "v", "w", "t"}, oracle::random_matrix(4, 2, rng), "text"};
    const auto manifest = save_paired(dir.path(), ds);
    const auto p = load_paired(manifest);
    CHECK(p.data.x.ids == ds.x.ids);
    CHECK(p.data.x.features == ds.x.features);
    CHECK(p.data.y.features == ds.y.features);
    CHECK(p.data.y.modality == "text");
}

TEST_CASE("make_split examples") {
    const Split all = make_split(10, 10, 0, 3);
    std::vector<Index> sorted = all.anchor_indices;
    std::sort(sorted.begin(), sorted.end());
    for (Index i = 0; i < 10; ++i) {
        CHECK(sorted[i] == i);
    }
    CHECK(all.query_indices.empty());
    CHECK(serialize_split(make_split(100, 30, 20, 8)) == serialize_split(make_split(100, 30, 20, 8)));
    CHECK(kind_of([] { make_split(1000, 600, 500, 0); }) == ErrorKind::InvalidSplit);
}

TEST_CASE("make_split properties") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Index n = 20 + seed * 7;
        const Index na = seed % (n / 2);
        const Index nq = n / 3;
        const Split s = make_split(n, na, nq, seed);
        CHECK(s.anchor_indices.size() == na);
        CHECK(s.query_indices.size() == nq);
        std::set<Index> seen;
        for (Index i : s.anchor_indices) {
            CHECK(i < n);
            seen.insert(i);
        }
        for (Index i : s.query_indices) {
            CHECK(i < n);
            seen.insert(i);
        }
        CHECK(seen.size() == na + nq);

        // Queries do not depend on the anchor count; anchors are prefix-nested.
        const Split bigger = make_split(n, na + 3, nq, seed);
        CHECK(bigger.query_indices == s.query_indices);
        CHECK(std::equal(s.anchor_indices.begin(), s.anchor_indices.end(),
                         bigger.anchor_indices.begin()));
    }
    CHECK(make_split(50, 10, 10, 1).query_indices != make_split(50, 10, 10, 2).query_indices);
}

TEST_CASE("report round trips") {
    TempDir dir;
    RetrievalReport r;
    r.matching_accuracy = 0.308;
    r.top_k = {{1, 0.1}, {5, 0.422}, {10, 0.5}};
    r.n_query = 500;
    r.seed = 2;
    r.method = "affine+cca";
    r.subspace_dim = 50;
    save_report(json(r), dir / "r.json", ReportFormat::Json);
    const auto back = load_report_json(dir / "r.json").get<RetrievalReport>();
    CHECK(back == r);

    r.subspace_dim.reset();
    CHECK(json(r).at("subspace_dim").is_null());
    CHECK(json(r).get<RetrievalReport>() == r);

    AblationCurve c{"dim", "top_5", {5, 10, 20}, {0.1, 0.2, 1.0 / 3.0}, {0.01, 0.0, 0.02}, 3};
    const json report = {{"curves", json::array({json(c)})}};
    save_report(report, dir / "c.csv", ReportFormat::Csv);
    std::ifstream in(dir / "c.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "param,metric,mean,std,n_seeds");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
    }
    CHECK(rows == 3);
    const auto curves = load_curves_csv(dir / "c.csv");
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].values == c.values);
    CHECK(curves[0].means == c.means);
    CHECK(curves[0].stds == c.stds);
    CHECK(curves[0].n_seeds == 3);

    CHECK(kind_of([] { parse_report_format("xml"); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { save_report(json(r), dir / "r.csv", ReportFormat::Csv); }) ==
          ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { save_report(json(r), dir / "no" / "such" / "r.json", ReportFormat::Json); }) ==
          ErrorKind::IoError);
}
