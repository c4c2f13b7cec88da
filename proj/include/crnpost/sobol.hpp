#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace crnpost {

/// Sobol low-discrepancy points in [0,1)^dim with Joe-Kuo direction numbers,
/// optionally randomised by a hash-based nested uniform (Owen) scramble.
class SobolSequence {
public:
    static std::size_t max_dimension();

    /// Throws std::invalid_argument if dim exceeds max_dimension().
    SobolSequence(std::size_t dim, bool scramble, std::uint64_t seed);

    std::size_t dimension() const { return dim_; }
    /// Point number `index` of the sequence (0-based).
    std::vector<double> point(std::uint32_t index) const;
    /// The first n points.
    std::vector<std::vector<double>> take(std::size_t n) const;

private:
    std::size_t dim_;
    bool scramble_;
    std::vector<std::uint32_t> directions_;  // dim x 32, bit-reversed ordering per row
    std::vector<std::uint32_t> seeds_;
};

}  // namespace crnpost
