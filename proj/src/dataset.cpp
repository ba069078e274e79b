#include "fedsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

int DatasetShard::max_label() const {
    int m = 0;
    for (int l : labels) {
        m = std::max(m, l);
    }
    return m;
}

DatasetShard DatasetShard::create(std::vector<double> features, std::vector<int> labels, int dim) {
    if (dim <= 0) {
        throw std::invalid_argument("DatasetShard: dim must be positive");
    }
    if (labels.empty()) {
        throw std::invalid_argument("DatasetShard: empty shard");
    }
    if (features.size() != labels.size() * static_cast<std::size_t>(dim)) {
        throw std::invalid_argument("DatasetShard: feature/label size mismatch");
    }
    for (int l : labels) {
        if (l < 0) {
            throw std::invalid_argument("DatasetShard: negative label");
        }
    }
    for (double x : features) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("DatasetShard: non-finite feature");
        }
    }
    DatasetShard s;
    s.features = std::move(features);
    s.labels = std::move(labels);
    s.dim = dim;
    return s;
}

void PartitionPlan::validate() const {
    std::set<int> seen;
    for (const auto& [client, labels] : assignments) {
        if (labels.empty()) {
            throw std::invalid_argument("PartitionPlan: client " + std::to_string(client) +
                                        " has an empty label set");
        }
        for (int l : labels) {
            if (!seen.insert(l).second) {
                throw std::invalid_argument("PartitionPlan: label " + std::to_string(l) +
                                            " assigned to more than one client");
            }
        }
    }
}

PartitionPlan PartitionPlan::contiguous(int num_classes, int num_clients) {
    if (num_clients < 1 || num_classes < num_clients) {
        throw std::invalid_argument("PartitionPlan::contiguous: need at least one class per client");
    }
    PartitionPlan plan;
    int base = num_classes / num_clients;
    int extra = num_classes % num_clients;
    int next = 0;
    for (int c = 1; c <= num_clients; ++c) {
        int take = base + (c <= extra ? 1 : 0);
        std::set<int> labels;
        for (int i = 0; i < take; ++i) {
            labels.insert(next++);
        }
        plan.assignments[c] = std::move(labels);
    }
    return plan;
}

DatasetShard gen_blobs(int num_classes, int dim, int per_class, double sigma, std::uint64_t seed) {
    if (num_classes < 2) {
        throw std::invalid_argument("gen_blobs: num_classes must be >= 2");
    }
    if (dim < 1) {
        throw std::invalid_argument("gen_blobs: dim must be >= 1");
    }
    if (per_class < 1) {
        throw std::invalid_argument("gen_blobs: per_class must be >= 1");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("gen_blobs: sigma must be positive");
    }

    Rng rng(seed);
    constexpr double kRadius = 3.0;

    std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim));
    for (auto& mean : means) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : mean) {
                x = rng.normal();
                norm += x * x;
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-9);
        for (double& x : mean) {
            x = x / norm * kRadius;
        }
    }

    std::vector<double> features;
    std::vector<int> labels;
    features.reserve(static_cast<std::size_t>(num_classes) * per_class * dim);
    labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            for (int d = 0; d < dim; ++d) {
                features.push_back(means[c][d] + sigma * rng.normal());
            }
            labels.push_back(c);
        }
    }
    return DatasetShard::create(std::move(features), std::move(labels), dim);
}

std::map<int, DatasetShard> partition_by_label(const DatasetShard& shard, const PartitionPlan& plan) {
    plan.validate();

    std::map<int, int> label_owner;
    for (const auto& [client, labels] : plan.assignments) {
        for (int l : labels) {
            label_owner[l] = client;
        }
    }
    for (int l : shard.labels) {
        if (label_owner.find(l) == label_owner.end()) {
            throw std::invalid_argument("partition_by_label: label " + std::to_string(l) +
                                        " not covered by the plan");
        }
    }

    std::map<int, std::vector<double>> feats;
    std::map<int, std::vector<int>> labs;
    for (int i = 0; i < shard.rows(); ++i) {
        int client = label_owner[shard.labels[i]];
        auto row = shard.row(i);
        feats[client].insert(feats[client].end(), row.begin(), row.end());
        labs[client].push_back(shard.labels[i]);
    }

    std::map<int, DatasetShard> out;
    for (const auto& [client, labels] : plan.assignments) {
        auto it = labs.find(client);
        if (it == labs.end() || it->second.empty()) {
            throw std::invalid_argument("partition_by_label: client " + std::to_string(client) +
                                        " would receive an empty shard");
        }
        out[client] = DatasetShard::create(std::move(feats[client]), std::move(it->second), shard.dim);
    }
    return out;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) {
        throw std::runtime_error("load_idx: truncated header in " + path);
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

DatasetShard load_idx(const std::string& images_path, const std::string& labels_path, int limit) {
    if (limit < 1) {
        throw std::invalid_argument("load_idx: limit must be >= 1 (empty shard forbidden)");
    }

    std::ifstream img(images_path, std::ios::binary);
    if (!img) {
        throw std::runtime_error("load_idx: cannot open " + images_path);
    }
    if (read_be32(img, images_path) != 0x00000803u) {
        throw std::runtime_error("load_idx: bad magic in " + images_path +
                                 " (expected 0x00000803)");
    }
    std::uint32_t n_images = read_be32(img, images_path);
    std::uint32_t rows = read_be32(img, images_path);
    std::uint32_t cols = read_be32(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) {
        throw std::runtime_error("load_idx: cannot open " + labels_path);
    }
    if (read_be32(lab, labels_path) != 0x00000801u) {
        throw std::runtime_error("load_idx: bad magic in " + labels_path +
                                 " (expected 0x00000801)");
    }
    std::uint32_t n_labels = read_be32(lab, labels_path);

    if (n_images != n_labels) {
        throw std::runtime_error("load_idx: image count " + std::to_string(n_images) +
                                 " != label count " + std::to_string(n_labels));
    }
    if (n_images == 0 || rows == 0 || cols == 0) {
        throw std::runtime_error("load_idx: empty dataset in header");
    }

    std::uint32_t take = std::min<std::uint32_t>(n_images, static_cast<std::uint32_t>(limit));
    std::size_t pixels = static_cast<std::size_t>(rows) * cols;

    std::vector<double> features;
    features.reserve(take * pixels);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < take; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
            throw std::runtime_error("load_idx: truncated image data in " + images_path);
        }
        for (unsigned char p : buf) {
            features.push_back(static_cast<double>(p) / 255.0);
        }
    }

    std::vector<int> labels(take);
    std::vector<unsigned char> lbuf(take);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(take))) {
        throw std::runtime_error("load_idx: truncated label data in " + labels_path);
    }
    for (std::uint32_t i = 0; i < take; ++i) {
        labels[i] = lbuf[i];
    }

    return DatasetShard::create(std::move(features), std::move(labels),
                                static_cast<int>(pixels));
}

std::pair<DatasetShard, DatasetShard> split_train_eval(const DatasetShard& shard,
                                                       double eval_fraction,
                                                       std::uint64_t seed) {
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
        throw std::invalid_argument("split_train_eval: eval_fraction must be in (0,1)");
    }
    int n = shard.rows();
    int n_eval = std::max(1, static_cast<int>(std::floor(n * eval_fraction)));
    int n_train = n - n_eval;
    if (n_train < 1) {
        throw std::invalid_argument("split_train_eval: shard too small to split");
    }

    // Fisher-Yates with the portable generator so the split is seed-stable.
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }

    auto gather = [&](int from, int count) {
        std::vector<double> f;
        f.reserve(static_cast<std::size_t>(count) * shard.dim);
        std::vector<int> l;
        l.reserve(count);
        for (int i = from; i < from + count; ++i) {
            auto row = shard.row(idx[i]);
            f.insert(f.end(), row.begin(), row.end());
            l.push_back(shard.labels[idx[i]]);
        }
        return DatasetShard::create(std::move(f), std::move(l), shard.dim);
    };

    return {gather(0, n_train), gather(n_train, n_eval)};
}

}  // namespace fedsim
