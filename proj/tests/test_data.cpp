#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gpda/data.hpp"

using namespace gpda;

namespace {

const std::filesystem::path kTmp = std::filesystem::temp_directory_path() / "gpda_data_test";

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

void push_be_u32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

// Hand-built IDX pair: 2 images of 2x2 pixels with known values.
std::pair<std::string, std::string> write_idx_fixture() {
    std::filesystem::create_directories(kTmp);
    const std::string imgs = (kTmp / "imgs.idx3").string();
    const std::string labs = (kTmp / "labs.idx1").string();

    std::vector<unsigned char> ib;
    push_be_u32(ib, 0x00000803u);
    push_be_u32(ib, 2);
    push_be_u32(ib, 2);
    push_be_u32(ib, 2);
    for (unsigned char p : {0, 51, 102, 255, 255, 204, 153, 0}) ib.push_back(p);
    write_bytes(imgs, ib);

    std::vector<unsigned char> lb;
    push_be_u32(lb, 0x00000801u);
    push_be_u32(lb, 2);
    lb.push_back(7);
    lb.push_back(1);
    write_bytes(labs, lb);
    return {imgs, labs};
}

}  // namespace

TEST_CASE("synthetic task counts and structure") {
    data::SyntheticShift shift{0.0, 0.0, 0.0, 0.6};
    const auto task = data::gen_synthetic_pda(6, 3, 100, shift, 1);
    CHECK(task.source.size() == 600);
    CHECK(task.target.size() == 300);
    CHECK(task.source.dim() == 2);
    CHECK(task.class_count == 6);
    CHECK(task.shared_classes == std::vector<int>{0, 1, 2});
    CHECK(task.outlier_classes == std::vector<int>{3, 4, 5});
    for (int l : task.target.labels) CHECK(l < 3);
    CHECK(task.source.samples.all_finite());
}

TEST_CASE("identity shift with vanishing noise pins both domains to the centers") {
    data::SyntheticShift shift{0.0, 0.0, 0.0, 1e-12};
    const auto task = data::gen_synthetic_pda(4, 2, 3, shift, 9);
    // class-0 center sits at (5, 0); every class-0 point from either domain is there
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(task.source.samples(i, 0) - 5.0) < 1e-9);
        CHECK(std::abs(task.source.samples(i, 1) - 0.0) < 1e-9);
        CHECK(std::abs(task.target.samples(i, 0) - 5.0) < 1e-9);
        CHECK(std::abs(task.target.samples(i, 1) - 0.0) < 1e-9);
    }
}

TEST_CASE("adjacent class centers honor the closed-form spacing") {
    data::SyntheticShift shift{0.0, 0.0, 0.0, 1e-12};
    for (int cs : {3, 5, 6, 8}) {
        const auto task = data::gen_synthetic_pda(cs, 1, 1, shift, 4);
        const double expect = 2.0 * 5.0 * std::sin(3.14159265358979323846 / cs);
        // per-class blocks of one sample each, noise ~1e-12
        const double dx = task.source.samples(1, 0) - task.source.samples(0, 0);
        const double dy = task.source.samples(1, 1) - task.source.samples(0, 1);
        CHECK(std::abs(std::hypot(dx, dy) - expect) < 1e-6);
    }
}

TEST_CASE("synthetic generation is seed-deterministic") {
    data::SyntheticShift shift{25.0, 1.5, 0.0, 0.6};
    const auto a = data::gen_synthetic_pda(6, 3, 50, shift, 7);
    const auto b = data::gen_synthetic_pda(6, 3, 50, shift, 7);
    CHECK(a.source.samples == b.source.samples);
    CHECK(a.target.samples == b.target.samples);
    CHECK(a.source.labels == b.source.labels);
    const auto c = data::gen_synthetic_pda(6, 3, 50, shift, 8);
    CHECK(!(a.source.samples == c.source.samples));
}

TEST_CASE("rigid shift moves the target generators") {
    data::SyntheticShift shift{90.0, 2.0, -1.0, 1e-12};
    const auto task = data::gen_synthetic_pda(4, 1, 2, shift, 3);
    // class-0 center (5,0) rotated 90 degrees -> (0,5), translated -> (2,4)
    CHECK(std::abs(task.target.samples(0, 0) - 2.0) < 1e-6);
    CHECK(std::abs(task.target.samples(0, 1) - 4.0) < 1e-6);
}

TEST_CASE("degenerate synthetic parameters are rejected") {
    data::SyntheticShift bad{0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(data::gen_synthetic_pda(6, 3, 10, bad, 1), ContractError);
    data::SyntheticShift ok{0.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(data::gen_synthetic_pda(3, 4, 10, ok, 1), ContractError);
    CHECK_THROWS_AS(data::gen_synthetic_pda(3, 2, 0, ok, 1), ContractError);
}

TEST_CASE("IDX fixture loads to the authored matrix") {
    const auto [imgs, labs] = write_idx_fixture();
    const auto ds = data::load_idx(imgs, labs);
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 4);
    CHECK(ds.labels == std::vector<int>{7, 1});
    CHECK(ds.class_count == 8);
    const double expect0[4] = {0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0};
    const double expect1[4] = {1.0, 204.0 / 255.0, 153.0 / 255.0, 0.0};
    for (int j = 0; j < 4; ++j) {
        CHECK(ds.samples(0, j) == expect0[j]);
        CHECK(ds.samples(1, j) == expect1[j]);
    }
}

TEST_CASE("IDX format errors") {
    std::filesystem::create_directories(kTmp);
    const auto [imgs, labs] = write_idx_fixture();

    SUBCASE("bad magic names the byte offset") {
        const std::string bad = (kTmp / "bad.idx3").string();
        std::vector<unsigned char> b;
        push_be_u32(b, 0x12345678u);
        push_be_u32(b, 0);
        push_be_u32(b, 2);
        push_be_u32(b, 2);
        write_bytes(bad, b);
        CHECK_THROWS_WITH_AS(data::load_idx(bad, labs), doctest::Contains("byte 0"), FormatError);
    }
    SUBCASE("label count mismatch") {
        const std::string lab1 = (kTmp / "one.idx1").string();
        std::vector<unsigned char> b;
        push_be_u32(b, 0x00000801u);
        push_be_u32(b, 1);
        b.push_back(3);
        write_bytes(lab1, b);
        CHECK_THROWS_AS(data::load_idx(imgs, lab1), FormatError);
    }
    SUBCASE("truncated image data reports the offset") {
        const std::string trunc = (kTmp / "trunc.idx3").string();
        std::vector<unsigned char> b;
        push_be_u32(b, 0x00000803u);
        push_be_u32(b, 2);
        push_be_u32(b, 2);
        push_be_u32(b, 2);
        for (int i = 0; i < 5; ++i) b.push_back(0);  // should be 8 pixel bytes
        write_bytes(trunc, b);
        CHECK_THROWS_AS(data::load_idx(trunc, labs), FormatError);
    }
    SUBCASE("empty zero-image file is valid") {
        const std::string i0 = (kTmp / "empty.idx3").string();
        const std::string l0 = (kTmp / "empty.idx1").string();
        std::vector<unsigned char> bi;
        push_be_u32(bi, 0x00000803u);
        push_be_u32(bi, 0);
        push_be_u32(bi, 2);
        push_be_u32(bi, 2);
        write_bytes(i0, bi);
        std::vector<unsigned char> bl;
        push_be_u32(bl, 0x00000801u);
        push_be_u32(bl, 0);
        write_bytes(l0, bl);
        const auto ds = data::load_idx(i0, l0);
        CHECK(ds.size() == 0);
    }
}

TEST_CASE("make_partial_target") {
    data::SyntheticShift shift{0.0, 0.0, 0.0, 0.5};
    const auto task = data::gen_synthetic_pda(5, 5, 10, shift, 2);

    SUBCASE("keeping every class is the identity") {
        const auto ds = data::make_partial_target(task.target, {0, 1, 2, 3, 4});
        CHECK(ds.samples == task.target.samples);
        CHECK(ds.labels == task.target.labels);
    }
    SUBCASE("keeping one class filters to it, ids preserved") {
        const auto ds = data::make_partial_target(task.target, {3});
        CHECK(ds.size() == 10);
        for (int l : ds.labels) CHECK(l == 3);
        CHECK(ds.class_count == 5);  // label space unchanged
    }
    SUBCASE("features never change") {
        const auto ds = data::make_partial_target(task.target, {1, 2});
        int row = 0;
        for (int i = 0; i < task.target.size(); ++i) {
            const int l = task.target.labels[static_cast<std::size_t>(i)];
            if (l != 1 && l != 2) continue;
            for (int f = 0; f < task.target.dim(); ++f)
                CHECK(ds.samples(row, f) == task.target.samples(i, f));
            ++row;
        }
        CHECK(row == ds.size());
    }
    SUBCASE("missing class or empty keep set rejected") {
        CHECK_THROWS_AS(data::make_partial_target(task.target, {}), ContractError);
        CHECK_THROWS_AS(data::make_partial_target(task.target, {9}), ContractError);
    }
}

TEST_CASE("bilinear resize") {
    data::LabeledDataset ds;
    ds.samples = Mat(1, 4, 0.5);  // constant 2x2 image
    ds.labels = {0};
    ds.class_count = 1;
    const auto up = data::resize_bilinear(ds, 2, 2, 4, 4);
    CHECK(up.dim() == 16);
    for (double v : up.samples.a) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(data::resize_bilinear(ds, 3, 3, 4, 4), ShapeError);
}

TEST_CASE("task CSV export") {
    std::filesystem::create_directories(kTmp);
    data::SyntheticShift shift{10.0, 0.5, 0.5, 0.4};
    const auto task = data::gen_synthetic_pda(3, 2, 4, shift, 5);
    const std::string path = (kTmp / "task.csv").string();
    data::export_task_csv(task, path);

    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "x0,x1,label,domain");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == task.source.size() + task.target.size());
}
