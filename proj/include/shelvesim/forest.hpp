#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace shelvesim::classify {

struct ForestParams {
    int n_trees = 100;
    int max_depth = 8;
    int min_samples_leaf = 1;
    uint64_t seed = 0;
};

// Axis-aligned binary decision tree stored as a flat node array.
struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    float threshold = 0.0f; // go left iff x[feature] <= threshold
    int left = -1;
    int right = -1;
    int label = 0;          // leaf majority label
};

struct Tree {
    std::vector<TreeNode> nodes;

    int predict(std::span<const float> x) const;
};

class ForestModel {
public:
    ForestModel() = default;
    ForestModel(std::vector<Tree> trees, int n_features)
        : trees_(std::move(trees)), n_features_(n_features) {}

    int n_features() const { return n_features_; }
    size_t tree_count() const { return trees_.size(); }

    // majority vote; ties go dark (0)
    int predict(std::span<const float> x) const;

    void save(std::ostream& out) const;   // versioned binary dump
    static ForestModel load(std::istream& in);

private:
    std::vector<Tree> trees_;
    int n_features_ = 0;
};

// Bootstrap-aggregated trees, Gini impurity, sqrt(d) feature subsampling per
// split. Deterministic given params.seed.
ForestModel train_classifier(const std::vector<std::vector<float>>& features,
                             std::span<const int> labels, const ForestParams& params = {});

}  // namespace shelvesim::classify
