#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sdfmap/core.hpp"

namespace sdfmap {

// Median-split kd-tree for exact nearest-neighbor queries. Equal distances
// resolve to the lowest point index, so results depend only on the point set.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
        if (pts_.empty()) fail("kdtree: empty point set");
        order_.resize(pts_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = uint32_t(i);
        nodes_.reserve(pts_.size() / kLeafSize * 2 + 2);
        root_ = build(0, uint32_t(order_.size()));
    }

    struct Hit {
        uint32_t index = 0;
        double dist = 0.0;
    };

    Hit nearest(const Vec3& q) const {
        Best best;
        search(root_, q, best);
        return {best.index, std::sqrt(best.d2)};
    }

    std::size_t size() const { return pts_.size(); }

private:
    static constexpr uint32_t kLeafSize = 8;

    struct Node {
        double split = 0.0;
        int32_t axis = -1;      // -1 marks a leaf
        uint32_t left = 0, right = 0;   // children, or [begin, end) into order_ for leaves
    };

    struct Best {
        double d2 = 1e300;
        uint32_t index = 0xFFFFFFFFu;
    };

    uint32_t build(uint32_t begin, uint32_t end) {
        Node n;
        if (end - begin <= kLeafSize) {
            n.axis = -1;
            n.left = begin;
            n.right = end;
            nodes_.push_back(n);
            return uint32_t(nodes_.size() - 1);
        }
        Aabb box;
        for (uint32_t i = begin; i < end; ++i) box.expand(pts_[order_[i]]);
        Vec3 ext = box.extent();
        int axis = ext.x >= ext.y ? (ext.x >= ext.z ? 0 : 2) : (ext.y >= ext.z ? 1 : 2);
        uint32_t mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](uint32_t a, uint32_t b) { return pts_[a][axis] < pts_[b][axis]; });
        n.axis = axis;
        n.split = pts_[order_[mid]][axis];
        uint32_t self = uint32_t(nodes_.size());
        nodes_.push_back(n);
        uint32_t l = build(begin, mid);
        uint32_t r = build(mid, end);
        nodes_[self].left = l;
        nodes_[self].right = r;
        return self;
    }

    void search(uint32_t ni, const Vec3& q, Best& best) const {
        const Node& n = nodes_[ni];
        if (n.axis < 0) {
            for (uint32_t i = n.left; i < n.right; ++i) {
                uint32_t idx = order_[i];
                double d2 = (pts_[idx] - q).norm2();
                if (d2 < best.d2 || (d2 == best.d2 && idx < best.index)) {
                    best.d2 = d2;
                    best.index = idx;
                }
            }
            return;
        }
        double diff = q[n.axis] - n.split;
        uint32_t near = diff < 0.0 ? n.left : n.right;
        uint32_t far = diff < 0.0 ? n.right : n.left;
        search(near, q, best);
        if (diff * diff <= best.d2) search(far, q, best);
    }

    std::vector<Vec3> pts_;
    std::vector<uint32_t> order_;
    std::vector<Node> nodes_;
    uint32_t root_ = 0;
};

}  // namespace sdfmap
