#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedsim {

// Dense classification dataset: row-major features plus one class index per
// row. Always non-empty; construction validates.
struct DatasetShard {
    std::vector<double> features;  // rows * dim, row-major
    std::vector<int> labels;
    int dim = 0;

    int rows() const { return static_cast<int>(labels.size()); }
    std::span<const double> row(int i) const {
        return std::span<const double>(features.data() + static_cast<std::size_t>(i) * dim, dim);
    }
    int max_label() const;

    static DatasetShard create(std::vector<double> features, std::vector<int> labels, int dim);
};

// Which class labels each client owns. Sets must be pairwise disjoint and
// together cover every label present in the source dataset.
struct PartitionPlan {
    std::map<int, std::set<int>> assignments;  // client id -> labels

    // Throws std::invalid_argument on overlap.
    void validate() const;

    // client n of num_clients gets labels {k*(n-1), ..., k*n - 1} with
    // k = num_classes / num_clients plus the remainder spread over the
    // first clients; for 10 classes and 5 clients this is the classic
    // {0,1}/{2,3}/{4,5}/{6,7}/{8,9} split.
    static PartitionPlan contiguous(int num_classes, int num_clients);
};

// Gaussian blobs: class means drawn on a seeded random sphere of radius 3,
// samples = mean + N(0, sigma^2 I). Rows are grouped by class.
DatasetShard gen_blobs(int num_classes, int dim, int per_class, double sigma, std::uint64_t seed);

// Splits by label ownership, preserving row order. Throws if the plan does
// not cover a label present in the shard, if sets overlap, or if any
// client's resulting shard is empty.
std::map<int, DatasetShard> partition_by_label(const DatasetShard& shard, const PartitionPlan& plan);

// Reads the big-endian IDX image/label pair (magic 0x00000803 / 0x00000801)
// and scales pixels to [0,1]. At most `limit` rows; limit must be >= 1.
DatasetShard load_idx(const std::string& images_path, const std::string& labels_path, int limit);

// Seeded shuffle of row indices, then first (1 - eval_fraction) of rows for
// training and the tail for evaluation. Both halves non-empty.
std::pair<DatasetShard, DatasetShard> split_train_eval(const DatasetShard& shard,
                                                       double eval_fraction,
                                                       std::uint64_t seed);

}  // namespace fedsim
