#pragma once

// Kozachenko-Leonenko entropy estimate on a static k-d tree.

#include "core.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <numeric>
#include <queue>
#include <vector>

namespace glab {

class KdTree {
public:
    KdTree(const std::vector<double>& pts, int dim) : pts_(pts), dim_(dim)
    {
        const std::size_t n = pts.size() / dim;
        idx_.resize(n);
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.reserve(2 * n / kLeaf + 2);
        if (n > 0) build(0, n);
    }

    // Squared distances to the k nearest neighbours of point q (excluding q itself).
    void knn(std::size_t q, int k, std::vector<double>& out) const
    {
        std::priority_queue<double> heap;
        const double* qp = &pts_[q * dim_];
        search(0, q, qp, k, heap);
        out.clear();
        while (!heap.empty()) {
            out.push_back(heap.top());
            heap.pop();
        }
        std::reverse(out.begin(), out.end());
    }

private:
    static constexpr std::size_t kLeaf = 8;

    struct Node {
        std::size_t lo, hi;
        int axis = -1;
        double split = 0.0;
        int left = -1, right = -1;
    };

    int build(std::size_t lo, std::size_t hi)
    {
        const int id = int(nodes_.size());
        nodes_.push_back({lo, hi});
        if (hi - lo <= kLeaf) return id;
        int axis = 0;
        double best = -1.0;
        for (int a = 0; a < dim_; ++a) {
            double mn = kInf, mx = -kInf;
            for (std::size_t i = lo; i < hi; ++i) {
                const double c = pts_[idx_[i] * dim_ + a];
                mn = std::min(mn, c);
                mx = std::max(mx, c);
            }
            if (mx - mn > best) {
                best = mx - mn;
                axis = a;
            }
        }
        const std::size_t mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             return pts_[a * dim_ + axis] < pts_[b * dim_ + axis];
                         });
        const double split = pts_[idx_[mid] * dim_ + axis];
        const int l = build(lo, mid);
        const int r = build(mid, hi);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void search(int id, std::size_t q, const double* qp, int k, std::priority_queue<double>& heap) const
    {
        const Node& nd = nodes_[id];
        if (nd.axis < 0) {
            for (std::size_t i = nd.lo; i < nd.hi; ++i) {
                const std::size_t j = idx_[i];
                if (j == q) continue;
                double d2 = 0.0;
                const double* p = &pts_[j * dim_];
                for (int a = 0; a < dim_; ++a) d2 += (p[a] - qp[a]) * (p[a] - qp[a]);
                if (int(heap.size()) < k) heap.push(d2);
                else if (d2 < heap.top()) {
                    heap.pop();
                    heap.push(d2);
                }
            }
            return;
        }
        const double diff = qp[nd.axis] - nd.split;
        const int near = diff < 0 ? nd.left : nd.right;
        const int far = diff < 0 ? nd.right : nd.left;
        search(near, q, qp, k, heap);
        if (int(heap.size()) < k || diff * diff < heap.top()) search(far, q, qp, k, heap);
    }

    const std::vector<double>& pts_;
    int dim_;
    std::vector<std::size_t> idx_;
    std::vector<Node> nodes_;
};

struct KnnEntropy {
    double value = 0.0;     // estimate of int f log f
    double std_error = 0.0; // jackknife over the per-point log-distance terms
    std::size_t duplicates = 0;
};

// H = -(psi(N) - psi(k) + log V_m + (m/N) sum log rho_k(i)) for points packed row-wise.
// With `whiten`, points are first mapped by the inverse Cholesky factor of their
// sample covariance and log det is added back; this removes most of the bias
// caused by anisotropy.
inline KnnEntropy entropy_knn(std::vector<double> pts, int dim, int k = 4, bool whiten = false)
{
    const std::size_t n = pts.size() / dim;
    if (!(k >= 1) || n <= std::size_t(k)) throw InputError("entropy_knn needs N > k >= 1");
    double shift = 0.0;
    if (whiten) {
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> P(
            pts.data(), n, dim);
        const Eigen::RowVectorXd mu = P.colwise().mean();
        P.rowwise() -= mu;
        const Eigen::MatrixXd C = (P.transpose() * P) / double(n - 1);
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success) throw NumericalError("entropy_knn: singular sample covariance");
        const Eigen::MatrixXd L = llt.matrixL();
        const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dim, dim));
        const Eigen::MatrixXd Y = P * Linv.transpose();
        P = Y;
        for (int i = 0; i < dim; ++i) shift += std::log(L(i, i));
    }
    KdTree tree(pts, dim);
    std::vector<double> logr(n), tmp;
    double min_pos = kInf;
    std::size_t dups = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tree.knn(i, k, tmp);
        const double r2 = tmp.back();
        if (r2 > 0.0) {
            logr[i] = 0.5 * std::log(r2);
            min_pos = std::min(min_pos, r2);
        } else {
            logr[i] = kInf; // patched below
            ++dups;
        }
    }
    if (dups > 0) {
        if (!std::isfinite(min_pos)) throw NumericalError("entropy_knn: all points coincide");
        for (auto& l : logr)
            if (l == kInf) l = 0.5 * std::log(min_pos);
    }
    const double m = dim;
    const double logV = 0.5 * m * std::log(kPi) - std::lgamma(0.5 * m + 1.0);
    const double c = boost::math::digamma(double(n)) - boost::math::digamma(double(k)) + logV;
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = c + m * logr[i];
        const double d = y - mean;
        mean += d / double(i + 1);
        m2 += d * (y - mean);
    }
    KnnEntropy out;
    out.value = -(mean + shift);
    out.std_error = std::sqrt(m2 / double(n - 1) / double(n));
    out.duplicates = dups;
    return out;
}

} // namespace glab
