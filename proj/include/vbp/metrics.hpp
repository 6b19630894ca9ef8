#pragma once

#include <optional>

#include "vbp/tensor.hpp"

namespace vbp {

/// Pearson correlation; nullopt when either input is constant.
std::optional<double> pearson(const Tensor& a, const Tensor& b);

/// Spearman rank correlation (average ranks for ties); nullopt when
/// either input is constant.
std::optional<double> spearman(const Tensor& a, const Tensor& b);

/// Jaccard overlap of the top-5% highest-valued pixel sets.
double jaccard_top5(const Tensor& a, const Tensor& b);

}  // namespace vbp
