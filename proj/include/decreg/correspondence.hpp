#pragma once

#include <string>
#include <vector>

#include "decreg/geometry.hpp"

namespace decreg {

// Putative point-pair match between the source and target clouds.
struct Correspondence {
    Vec3 src;
    Vec3 tgt;
};

struct CorrespondenceSet {
    std::vector<Correspondence> items;
    std::string provenance = "synthetic";  // descriptor name or "synthetic"

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
};

// One rigid-transform candidate. rank 0 is the best by inlier count
// within its list; inlier_count is non-increasing in rank.
struct Hypothesis {
    RigidTransform transform;
    int inlier_count = 0;
    int rank = 0;
};

}  // namespace decreg
