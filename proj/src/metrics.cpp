#include "vbp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace vbp {

namespace {

std::optional<double> pearson_vec(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> ranks(const Tensor& t) {
    const std::size_t n = t.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && t[order[j + 1]] == t[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

std::optional<double> pearson(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("pearson shape mismatch");
    std::vector<double> x(a.data().begin(), a.data().end());
    std::vector<double> y(b.data().begin(), b.data().end());
    return pearson_vec(x, y);
}

std::optional<double> spearman(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("spearman shape mismatch");
    return pearson_vec(ranks(a), ranks(b));
}

double jaccard_top5(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("jaccard_top5 shape mismatch");
    const std::size_t n = a.size();
    const std::size_t k = std::max<std::size_t>(1, n / 20);

    auto top_set = [&](const Tensor& t) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return t[x] > t[y]; });
        order.resize(k);
        std::sort(order.begin(), order.end());
        return order;
    };

    const std::vector<std::size_t> sa = top_set(a), sb = top_set(b);
    std::vector<std::size_t> inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    const std::size_t uni = sa.size() + sb.size() - inter.size();
    return uni == 0 ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

}  // namespace vbp
