#include "shelvesim/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "shelvesim/rng.hpp"

namespace shelvesim::classify {

int Tree::predict(std::span<const float> x) const {
    int idx = 0;
    while (nodes[idx].feature >= 0) {
        const TreeNode& n = nodes[idx];
        idx = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[idx].label;
}

int ForestModel::predict(std::span<const float> x) const {
    if (trees_.empty()) throw std::logic_error("forest: not trained");
    if (static_cast<int>(x.size()) != n_features_)
        throw std::invalid_argument("forest: feature dimension mismatch");
    size_t bright = 0;
    for (const auto& t : trees_) bright += t.predict(x);
    return 2 * bright > trees_.size() ? 1 : 0;
}

namespace {

struct Builder {
    const std::vector<std::vector<float>>& X;
    std::span<const int> y;
    int max_depth;
    int min_leaf;
    int n_sub_features;
    Rng& rng;
    std::vector<TreeNode> nodes;

    int build(std::vector<int>& idx, int lo, int hi, int depth) {
        int n_bright = 0;
        for (int i = lo; i < hi; ++i) n_bright += y[idx[i]];
        const int n = hi - lo;
        const int majority = 2 * n_bright > n ? 1 : 0;

        const bool pure = n_bright == 0 || n_bright == n;
        if (pure || depth >= max_depth || n < 2 * min_leaf) return make_leaf(majority);

        const int d = static_cast<int>(X.front().size());
        int best_feature = -1;
        float best_threshold = 0.0f;
        double best_gini = 1e30;

        // sample features without replacement
        std::vector<int> feats(d);
        for (int i = 0; i < d; ++i) feats[i] = i;
        for (int i = 0; i < n_sub_features && i < d; ++i) {
            const int j = i + static_cast<int>(rng.uniform() * (d - i));
            std::swap(feats[i], feats[std::min(j, d - 1)]);
        }

        std::vector<std::pair<float, int>> col(n);
        for (int fi = 0; fi < n_sub_features && fi < d; ++fi) {
            const int f = feats[fi];
            for (int i = 0; i < n; ++i) col[i] = {X[idx[lo + i]][f], y[idx[lo + i]]};
            std::sort(col.begin(), col.end());
            int left_bright = 0;
            for (int i = 0; i + 1 < n; ++i) {
                left_bright += col[i].second;
                if (col[i].first == col[i + 1].first) continue;
                const int nl = i + 1, nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double pl = static_cast<double>(left_bright) / nl;
                const double pr = static_cast<double>(n_bright - left_bright) / nr;
                const double gini =
                    nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
                if (gini < best_gini) {
                    best_gini = gini;
                    best_feature = f;
                    best_threshold = 0.5f * (col[i].first + col[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return make_leaf(majority);

        const auto mid_it = std::partition(idx.begin() + lo, idx.begin() + hi, [&](int i) {
            return X[i][best_feature] <= best_threshold;
        });
        const int mid = static_cast<int>(mid_it - idx.begin());
        if (mid == lo || mid == hi) return make_leaf(majority);

        const int node = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{best_feature, best_threshold, -1, -1, 0});
        const int left = build(idx, lo, mid, depth + 1);
        const int right = build(idx, mid, hi, depth + 1);
        nodes[node].left = left;
        nodes[node].right = right;
        return node;
    }

    int make_leaf(int label) {
        nodes.push_back(TreeNode{-1, 0.0f, -1, -1, label});
        return static_cast<int>(nodes.size()) - 1;
    }
};

}  // namespace

ForestModel train_classifier(const std::vector<std::vector<float>>& features,
                             std::span<const int> labels, const ForestParams& params) {
    if (features.size() != labels.size() || features.empty())
        throw std::invalid_argument("train_classifier: size mismatch or empty");
    const size_t d = features.front().size();
    for (const auto& f : features)
        if (f.size() != d) throw std::invalid_argument("train_classifier: feature dimension mismatch");
    bool has_dark = false, has_bright = false;
    for (int l : labels) (l ? has_bright : has_dark) = true;
    if (!has_dark || !has_bright)
        throw std::invalid_argument("train_classifier: both classes required");
    if (params.n_trees < 1 || params.max_depth < 1)
        throw std::invalid_argument("train_classifier: bad hyperparameters");

    const int n = static_cast<int>(features.size());
    const int n_sub = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));

    std::vector<Tree> trees;
    trees.reserve(params.n_trees);
    for (int t = 0; t < params.n_trees; ++t) {
        Rng rng(derive_seed(params.seed, t, 0x666f7265ULL));
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = static_cast<int>(rng.uniform() * n);  // bootstrap

        Builder b{features, labels, params.max_depth, params.min_samples_leaf, n_sub, rng, {}};
        // root is built last-first; normalize so the root sits at index 0
        b.nodes.reserve(64);
        b.nodes.push_back(TreeNode{});  // placeholder root
        int root_children_lo = b.build(idx, 0, n, 0);
        // build() appended the real root at some index; move it into slot 0
        b.nodes[0] = b.nodes[root_children_lo];
        Tree tree;
        tree.nodes = std::move(b.nodes);
        trees.push_back(std::move(tree));
    }
    return ForestModel(std::move(trees), static_cast<int>(d));
}

namespace {
constexpr uint32_t kForestMagic = 0x53464f31;  // "SFO1"
}

void ForestModel::save(std::ostream& out) const {
    auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_i32 = [&](int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_f32 = [&](float v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kForestMagic);
    put_i32(n_features_);
    put_u32(static_cast<uint32_t>(trees_.size()));
    for (const auto& t : trees_) {
        put_u32(static_cast<uint32_t>(t.nodes.size()));
        for (const auto& n : t.nodes) {
            put_i32(n.feature);
            put_f32(n.threshold);
            put_i32(n.left);
            put_i32(n.right);
            put_i32(n.label);
        }
    }
}

ForestModel ForestModel::load(std::istream& in) {
    auto get_u32 = [&] {
        uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_i32 = [&] {
        int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_f32 = [&] {
        float v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    if (get_u32() != kForestMagic) throw std::runtime_error("forest: bad file magic");
    const int n_features = get_i32();
    const uint32_t n_trees = get_u32();
    std::vector<Tree> trees(n_trees);
    for (auto& t : trees) {
        t.nodes.resize(get_u32());
        for (auto& n : t.nodes) {
            n.feature = get_i32();
            n.threshold = get_f32();
            n.left = get_i32();
            n.right = get_i32();
            n.label = get_i32();
        }
    }
    if (!in) throw std::runtime_error("forest: truncated file");
    return ForestModel(std::move(trees), n_features);
}

}  // namespace shelvesim::classify
