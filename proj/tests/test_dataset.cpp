#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"

using namespace fedsim;

TEST_CASE("blobs are deterministic per seed") {
    DatasetShard a = gen_blobs(3, 4, 5, 0.5, 99);
    DatasetShard b = gen_blobs(3, 4, 5, 0.5, 99);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    DatasetShard c = gen_blobs(3, 4, 5, 0.5, 100);
    CHECK(a.features != c.features);
}

TEST_CASE("tiny sigma keeps samples within 1e-4 of their class mean") {
    int per_class = 20;
    DatasetShard s = gen_blobs(4, 6, per_class, 1e-6, 7);
    // Rows are grouped by class; the first row of each group is within
    // 1e-4 of the rest of its group, hence of the shared mean.
    for (int c = 0; c < 4; ++c) {
        auto first = s.row(c * per_class);
        for (int i = 1; i < per_class; ++i) {
            auto r = s.row(c * per_class + i);
            for (int d = 0; d < 6; ++d) {
                CHECK(std::fabs(r[d] - first[d]) <= 1e-4);
            }
        }
    }
}

TEST_CASE("class means land on the radius-3 sphere") {
    DatasetShard s = gen_blobs(5, 8, 200, 1e-6, 3);
    for (int c = 0; c < 5; ++c) {
        auto r = s.row(c * 200);
        double norm = 0.0;
        for (double v : r) {
            norm += v * v;
        }
        CHECK(std::sqrt(norm) == doctest::Approx(3.0).epsilon(1e-3));
    }
}

TEST_CASE("blob generation rejects bad arguments") {
    CHECK_THROWS_AS(gen_blobs(1, 4, 5, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_blobs(3, 4, 0, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_blobs(3, 4, 5, 0.0, 1), std::invalid_argument);
}

TEST_CASE("a linear softmax fits 10-class blobs to >= 95% train accuracy") {
    DatasetShard shard = gen_blobs(10, 16, 50, 0.5, 42);
    ModelSpec spec;
    spec.kind = ModelKind::linear_softmax;
    spec.input_dim = 16;
    spec.num_classes = 10;
    ModelLossEvaluator ev(spec, &shard, Reduction::mean);
    ParamVector theta = init_params(spec, 1);
    for (int step = 0; step < 200; ++step) {
        theta = axpy(-0.5, ev.evaluate(theta).grad, theta);
    }
    CHECK(eval_metrics(spec, shard, theta).accuracy_pct >= 95.0);
}

TEST_CASE("label partition splits into disjoint shards that add up") {
    DatasetShard shard = gen_blobs(10, 4, 10, 0.5, 5);
    PartitionPlan plan = PartitionPlan::contiguous(10, 5);
    CHECK(plan.assignments.at(1) == std::set<int>{0, 1});
    CHECK(plan.assignments.at(5) == std::set<int>{8, 9});

    auto shards = partition_by_label(shard, plan);
    CHECK(shards.size() == 5);
    int total = 0;
    for (const auto& [id, s] : shards) {
        total += s.rows();
        for (int l : s.labels) {
            CHECK(plan.assignments.at(id).count(l) == 1);
        }
    }
    CHECK(total == shard.rows());
}

TEST_CASE("partition with one client owning every label returns the input") {
    DatasetShard shard = gen_blobs(3, 4, 5, 0.5, 6);
    PartitionPlan plan;
    plan.assignments[1] = {0, 1, 2};
    auto shards = partition_by_label(shard, plan);
    CHECK(shards.size() == 1);
    CHECK(shards.at(1).features == shard.features);
    CHECK(shards.at(1).labels == shard.labels);
}

TEST_CASE("partition errors: uncovered label, overlap, empty client shard") {
    DatasetShard shard = gen_blobs(4, 3, 5, 0.5, 8);

    PartitionPlan uncovered;
    uncovered.assignments[1] = {0, 1};
    uncovered.assignments[2] = {2};  // label 3 present but unassigned
    CHECK_THROWS_WITH_AS(partition_by_label(shard, uncovered),
                         doctest::Contains("not covered"), std::invalid_argument);

    PartitionPlan overlapping;
    overlapping.assignments[1] = {0, 1};
    overlapping.assignments[2] = {1, 2, 3};
    CHECK_THROWS_WITH_AS(partition_by_label(shard, overlapping),
                         doctest::Contains("more than one client"), std::invalid_argument);

    PartitionPlan with_empty;
    with_empty.assignments[1] = {0, 1, 2, 3};
    with_empty.assignments[2] = {7};  // class 7 has no samples
    CHECK_THROWS_WITH_AS(partition_by_label(shard, with_empty),
                         doctest::Contains("empty shard"), std::invalid_argument);
}

TEST_CASE("train/eval split is seeded, disjoint in size and non-empty") {
    DatasetShard shard = gen_blobs(2, 3, 50, 0.5, 12);  // 100 rows
    auto [train_a, eval_a] = split_train_eval(shard, 0.2, 77);
    auto [train_b, eval_b] = split_train_eval(shard, 0.2, 77);
    CHECK(train_a.rows() == 80);
    CHECK(eval_a.rows() == 20);
    CHECK(train_a.features == train_b.features);
    CHECK(eval_a.labels == eval_b.labels);
    auto [train_c, eval_c] = split_train_eval(shard, 0.2, 78);
    CHECK(train_a.features != train_c.features);
}

namespace {

namespace fs = std::filesystem;

void write_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

struct IdxFixture {
    fs::path images;
    fs::path labels;

    IdxFixture(std::uint32_t n_img, std::uint32_t n_lab, std::uint32_t img_magic = 0x803,
               bool truncate_pixels = false) {
        fs::path dir = fs::temp_directory_path() / "fedsim_idx_test";
        fs::create_directories(dir);
        images = dir / ("img_" + std::to_string(n_img) + "_" + std::to_string(img_magic) +
                        (truncate_pixels ? "_trunc" : "") + ".idx");
        labels = dir / ("lab_" + std::to_string(n_lab) + ".idx");

        std::ofstream fi(images, std::ios::binary);
        write_be32(fi, img_magic);
        write_be32(fi, n_img);
        write_be32(fi, 2);
        write_be32(fi, 2);
        std::uint32_t pixel_rows = truncate_pixels && n_img > 0 ? n_img - 1 : n_img;
        for (std::uint32_t i = 0; i < pixel_rows; ++i) {
            unsigned char px[4] = {0, 51, 102, 255};
            fi.write(reinterpret_cast<char*>(px), 4);
        }
        fi.close();

        std::ofstream fl(labels, std::ios::binary);
        write_be32(fl, 0x801);
        write_be32(fl, n_lab);
        for (std::uint32_t i = 0; i < n_lab; ++i) {
            unsigned char l = static_cast<unsigned char>(i % 3);
            fl.write(reinterpret_cast<char*>(&l), 1);
        }
    }
};

}  // namespace

TEST_CASE("idx loader reads well-formed files and scales pixels") {
    IdxFixture fx(5, 5);
    DatasetShard s = load_idx(fx.images.string(), fx.labels.string(), 1000);
    CHECK(s.rows() == 5);
    CHECK(s.dim == 4);
    CHECK(s.features[0] == 0.0);
    CHECK(s.features[1] == doctest::Approx(51.0 / 255.0));
    CHECK(s.features[3] == 1.0);
    CHECK(s.labels == std::vector<int>{0, 1, 2, 0, 1});
}

TEST_CASE("idx loader honors the row limit") {
    IdxFixture fx(5, 5);
    DatasetShard s = load_idx(fx.images.string(), fx.labels.string(), 3);
    CHECK(s.rows() == 3);
}

TEST_CASE("idx loader rejects limit zero") {
    IdxFixture fx(5, 5);
    CHECK_THROWS_AS(load_idx(fx.images.string(), fx.labels.string(), 0),
                    std::invalid_argument);
}

TEST_CASE("idx loader rejects a bad magic number") {
    IdxFixture fx(5, 5, /*img_magic=*/0x804);
    CHECK_THROWS_WITH_AS(load_idx(fx.images.string(), fx.labels.string(), 10),
                         doctest::Contains("bad magic"), std::runtime_error);
}

TEST_CASE("idx loader rejects image/label count mismatch") {
    IdxFixture fx(5, 4);
    CHECK_THROWS_WITH_AS(load_idx(fx.images.string(), fx.labels.string(), 10),
                         doctest::Contains("count"), std::runtime_error);
}

TEST_CASE("idx loader rejects truncated image data") {
    IdxFixture fx(5, 5, 0x803, /*truncate_pixels=*/true);
    CHECK_THROWS_WITH_AS(load_idx(fx.images.string(), fx.labels.string(), 10),
                         doctest::Contains("truncated"), std::runtime_error);
}
