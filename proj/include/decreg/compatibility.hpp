#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <vector>

#include "decreg/correspondence.hpp"
#include "decreg/errors.hpp"

namespace decreg {

using CompatMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// First-order spatial compatibility: correspondences i and j agree when
// the source-side and target-side pair distances match within tau_sc.
// Symmetric, zero diagonal.
inline CompatMatrix first_order_compat(const CorrespondenceSet& cs, double tau_sc) {
    if (tau_sc <= 0.0) throw Error("first_order_compat: tau_sc must be > 0");
    const Eigen::Index n = static_cast<Eigen::Index>(cs.size());
    CompatMatrix m = CompatMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double src_dist = (cs.items[i].src - cs.items[j].src).norm();
            const double tgt_dist = (cs.items[i].tgt - cs.items[j].tgt).norm();
            if (std::abs(src_dist - tgt_dist) <= tau_sc) {
                m(i, j) = 1;
                m(j, i) = 1;
            }
        }
    }
    return m;
}

// Second-order compatibility: entry (i,j) counts the common compatible
// neighbors of i and j, masked by the first-order entry. Rows are packed
// into 64-bit blocks so the common-neighbor count is a popcount.
inline CompatMatrix second_order_compat(const CompatMatrix& c) {
    const Eigen::Index n = c.rows();
    if (c.cols() != n) throw Error("second_order_compat: matrix must be square");

    const std::size_t words = (static_cast<std::size_t>(n) + 63) / 64;
    std::vector<std::uint64_t> rows(static_cast<std::size_t>(n) * words, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::uint64_t* row = rows.data() + static_cast<std::size_t>(i) * words;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (c(i, j)) row[j / 64] |= std::uint64_t{1} << (j % 64);
        }
    }

    CompatMatrix s = CompatMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint64_t* row_i = rows.data() + static_cast<std::size_t>(i) * words;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (!c(i, j)) continue;
            const std::uint64_t* row_j = rows.data() + static_cast<std::size_t>(j) * words;
            int common = 0;
            for (std::size_t w = 0; w < words; ++w) common += std::popcount(row_i[w] & row_j[w]);
            s(i, j) = common;
            s(j, i) = common;
        }
    }
    return s;
}

}  // namespace decreg
