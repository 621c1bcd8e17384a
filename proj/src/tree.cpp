#include "stackgen/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stackgen {

int Tree::leaf_of(const Matrix& X, Eigen::Index row) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(k)];
        k = X(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return k;
}

Vector Tree::predict(const Matrix& X) const {
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X, i);
    return out;
}

int Tree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    // nodes are stored parent-before-child
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto& nd = nodes[k];
        if (nd.feature < 0) continue;
        d[static_cast<std::size_t>(nd.left)] = d[k] + 1;
        d[static_cast<std::size_t>(nd.right)] = d[k] + 1;
        best = std::max(best, d[k] + 1);
    }
    return best;
}

SortedColumns sort_columns(const Matrix& X) {
    SortedColumns s;
    s.order.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        auto& ord = s.order[static_cast<std::size_t>(j)];
        ord.resize(static_cast<std::size_t>(X.rows()));
        std::iota(ord.begin(), ord.end(), 0u);
        std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, j) < X(b, j); });
    }
    return s;
}

namespace {

struct Work {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
};

}  // namespace

TreeFit build_tree(const Matrix& X, const SortedColumns& sorted, const Vector& target,
                   const std::vector<double>& weight, const TreeParams& params, Rng& rng) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (p == 0) fail(ErrorCode::invalid_argument, "tree: no predictor columns");
    if (weight.size() != n || static_cast<std::size_t>(target.size()) != n)
        fail(ErrorCode::invalid_argument, "tree: size mismatch");

    std::vector<std::vector<std::uint32_t>> lists(p);
    for (std::size_t j = 0; j < p; ++j) {
        lists[j].reserve(n);
        for (std::uint32_t r : sorted.order[j])
            if (weight[r] > 0.0) lists[j].push_back(r);
    }
    const std::size_t m = lists[0].size();
    if (m == 0) fail(ErrorCode::invalid_argument, "tree: empty sample");

    TreeFit fit;
    fit.leaf.assign(n, -1);
    auto& nodes = fit.tree.nodes;
    nodes.emplace_back();

    std::vector<char> go_left(n, 0);
    std::vector<std::uint32_t> buf(m);
    std::vector<std::size_t> features(p);
    std::vector<Work> stack{{0, 0, m, 0}};
    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params.min_samples_leaf));
    const std::size_t min_split = static_cast<std::size_t>(std::max(2, params.min_samples_split));

    while (!stack.empty()) {
        const Work w = stack.back();
        stack.pop_back();
        const auto& base = lists[0];

        double W = 0.0, S = 0.0;
        for (std::size_t q = w.begin; q < w.end; ++q) {
            W += weight[base[q]];
            S += weight[base[q]] * target(base[q]);
        }
        const double mean = S / W;
        double ss = 0.0;
        for (std::size_t q = w.begin; q < w.end; ++q) {
            const double d = target(base[q]) - mean;
            ss += weight[base[q]] * d * d;
        }
        nodes[static_cast<std::size_t>(w.node)].value = mean;

        const std::size_t count = w.end - w.begin;
        bool leaf = count < min_split || count < 2 * min_leaf ||
                    (params.max_depth >= 0 && w.depth >= params.max_depth) ||
                    ss / W <= 1e-20 * mean * mean;

        int best_f = -1;
        double best_thr = 0.0, best_gain = -std::numeric_limits<double>::infinity();
        std::size_t best_nleft = 0;
        if (!leaf) {
            std::iota(features.begin(), features.end(), std::size_t{0});
            std::size_t nf = p;
            if (params.max_features > 0 && static_cast<std::size_t>(params.max_features) < p) {
                nf = static_cast<std::size_t>(params.max_features);
                for (std::size_t q = 0; q < nf; ++q) std::swap(features[q], features[q + rng.below(p - q)]);
                std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(nf));
            }
            for (std::size_t fi = 0; fi < nf; ++fi) {
                const std::size_t f = features[fi];
                const auto& lst = lists[f];
                double WL = 0.0, SL = 0.0;
                for (std::size_t q = w.begin; q + 1 < w.end; ++q) {
                    const std::uint32_t r = lst[q];
                    WL += weight[r];
                    SL += weight[r] * target(r);
                    const std::size_t nleft = q + 1 - w.begin;
                    if (nleft < min_leaf) continue;
                    if (count - nleft < min_leaf) break;
                    const double a = X(r, static_cast<Eigen::Index>(f));
                    const double b = X(lst[q + 1], static_cast<Eigen::Index>(f));
                    if (!(a < b)) continue;
                    const double WR = W - WL, SR = S - SL;
                    const double gain = SL * SL / WL + SR * SR / WR;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_f = static_cast<int>(f);
                        best_thr = a + (b - a) / 2.0;
                        if (!(best_thr < b)) best_thr = a;
                        best_nleft = nleft;
                    }
                }
            }
            if (best_f < 0) leaf = true;
        }

        if (leaf) {
            for (std::size_t q = w.begin; q < w.end; ++q) fit.leaf[base[q]] = w.node;
            continue;
        }

        const auto& split_list = lists[static_cast<std::size_t>(best_f)];
        for (std::size_t q = w.begin; q < w.end; ++q) go_left[split_list[q]] = (q - w.begin) < best_nleft;
        for (std::size_t j = 0; j < p; ++j) {
            auto& lst = lists[j];
            std::size_t lo = 0, hi = best_nleft;
            for (std::size_t q = w.begin; q < w.end; ++q) {
                const std::uint32_t r = lst[q];
                if (go_left[r])
                    buf[lo++] = r;
                else
                    buf[hi++] = r;
            }
            std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(count),
                      lst.begin() + static_cast<std::ptrdiff_t>(w.begin));
        }

        const int left = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const int right = static_cast<int>(nodes.size());
        nodes.emplace_back();
        auto& nd = nodes[static_cast<std::size_t>(w.node)];
        nd.feature = best_f;
        nd.threshold = best_thr;
        nd.left = left;
        nd.right = right;
        stack.push_back({right, w.begin + best_nleft, w.end, w.depth + 1});
        stack.push_back({left, w.begin, w.begin + best_nleft, w.depth + 1});
    }
    return fit;
}

}  // namespace stackgen
