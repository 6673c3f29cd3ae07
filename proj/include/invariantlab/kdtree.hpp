#pragma once

// Exact nearest-neighbour index over points of R^d (d = 2k real coordinates).
// Median-split kd-tree with flat node storage; queries return exactly the
// brute-force minimizer (ties by smallest index), at any query distance.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "invariantlab/common.hpp"

namespace invariantlab {

class KdTree {
public:
    KdTree() = default;

    // pts: n * dims doubles, row-major.  The array must outlive the tree.
    KdTree(const double* pts, int64_t n, int dims) { build(pts, n, dims); }

    void build(const double* pts, int64_t n, int dims) {
        pts_ = pts;
        n_ = n;
        dims_ = dims;
        order_.resize(static_cast<size_t>(n));
        std::iota(order_.begin(), order_.end(), int64_t{0});
        nodes_.clear();
        if (n > 0) {
            nodes_.reserve(static_cast<size_t>(2 * n / kLeafSize + 2));
            build_node(0, n);
        }
    }

    int64_t size() const { return n_; }

    struct Hit {
        int64_t index = -1;
        double distance = std::numeric_limits<double>::infinity();
    };

    // Nearest point to q (dims_ doubles).  upper_bound prunes the search:
    // pass a known distance bound if available, otherwise +inf.
    Hit nearest(const double* q,
                double upper_bound = std::numeric_limits<double>::infinity()) const {
        Hit best;
        best.distance = upper_bound;
        if (n_ > 0) search(0, q, best);
        if (best.index < 0) {
            // bound excluded everything; redo unpruned so the result is exact
            best.distance = std::numeric_limits<double>::infinity();
            search(0, q, best);
        }
        return best;
    }

    // All indices with distance <= radius, in ascending index order.
    void within(const double* q, double radius, std::vector<int64_t>& out) const {
        out.clear();
        if (n_ > 0) range_search(0, q, radius * radius, out);
        std::sort(out.begin(), out.end());
    }

private:
    static constexpr int64_t kLeafSize = 12;

    struct Node {
        double split = 0;
        int32_t axis = -1;      // -1 marks a leaf
        int64_t begin = 0, end = 0;  // leaf payload in order_
        int64_t right = -1;     // left child is node index + 1
    };

    const double* pts_ = nullptr;
    int64_t n_ = 0;
    int dims_ = 0;
    std::vector<int64_t> order_;
    std::vector<Node> nodes_;

    const double* point(int64_t id) const { return pts_ + id * dims_; }

    int64_t build_node(int64_t begin, int64_t end) {
        int64_t me = static_cast<int64_t>(nodes_.size());
        nodes_.push_back({});
        if (end - begin <= kLeafSize) {
            nodes_[static_cast<size_t>(me)].begin = begin;
            nodes_[static_cast<size_t>(me)].end = end;
            // ascending index order inside a leaf fixes tie-breaking
            std::sort(order_.begin() + begin, order_.begin() + end);
            return me;
        }
        // split along the widest axis at the median
        int axis = 0;
        double spread = -1;
        for (int d = 0; d < dims_; ++d) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int64_t i = begin; i < end; ++i) {
                double v = point(order_[static_cast<size_t>(i)])[d];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > spread) {
                spread = hi - lo;
                axis = d;
            }
        }
        int64_t mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int64_t a, int64_t b) { return point(a)[axis] < point(b)[axis]; });
        double split = point(order_[static_cast<size_t>(mid)])[axis];
        nodes_[static_cast<size_t>(me)].axis = axis;
        nodes_[static_cast<size_t>(me)].split = split;
        build_node(begin, mid);  // becomes me + 1
        int64_t right = build_node(mid, end);
        nodes_[static_cast<size_t>(me)].right = right;
        return me;
    }

    double dist_sq(const double* a, const double* b) const {
        double s = 0;
        for (int d = 0; d < dims_; ++d) {
            double t = a[d] - b[d];
            s += t * t;
        }
        return s;
    }

    void search(int64_t ni, const double* q, Hit& best) const {
        const Node& node = nodes_[static_cast<size_t>(ni)];
        if (node.axis < 0) {
            for (int64_t i = node.begin; i < node.end; ++i) {
                int64_t id = order_[static_cast<size_t>(i)];
                double d = std::sqrt(dist_sq(q, point(id)));
                if (d < best.distance || (d == best.distance && id < best.index)) {
                    best.distance = d;
                    best.index = id;
                }
            }
            return;
        }
        double delta = q[node.axis] - node.split;
        int64_t first = (delta < 0) ? ni + 1 : node.right;
        int64_t second = (delta < 0) ? node.right : ni + 1;
        search(first, q, best);
        if (std::abs(delta) <= best.distance) search(second, q, best);
    }

    void range_search(int64_t ni, const double* q, double r_sq, std::vector<int64_t>& out) const {
        const Node& node = nodes_[static_cast<size_t>(ni)];
        if (node.axis < 0) {
            for (int64_t i = node.begin; i < node.end; ++i) {
                int64_t id = order_[static_cast<size_t>(i)];
                if (dist_sq(q, point(id)) <= r_sq) out.push_back(id);
            }
            return;
        }
        double delta = q[node.axis] - node.split;
        double r = std::sqrt(r_sq);
        if (delta < 0 || std::abs(delta) <= r) range_search(ni + 1, q, r_sq, out);
        if (delta >= 0 || std::abs(delta) <= r) range_search(node.right, q, r_sq, out);
    }
};

}  // namespace invariantlab
