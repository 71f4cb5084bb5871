#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

/// Thrown when data violates a documented shape or value invariant.
class InvariantError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown by numerical routines that fail to produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Hyperspectral raster of height x width pixels with `bands` samples each.
 *
 * Storage is pixel-major: the L values of a pixel are contiguous and pixels
 * follow row-major order, so pixel n = row * width + col. The same buffer
 * viewed column-major as an L x N matrix gives Y = [y_1, ..., y_N].
 */
class HyperCube {
public:
    HyperCube() = default;
    HyperCube(std::size_t height, std::size_t width, std::size_t bands);
    HyperCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<double> data);
    HyperCube(std::size_t height, std::size_t width, const Matrix& pixels);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t bands() const { return bands_; }
    std::size_t pixel_count() const { return height_ * width_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// L x N view, one column per pixel.
    ConstMatrixMap pixels() const;
    MatrixMap pixels();

    ConstVectorMap pixel(std::size_t n) const;
    VectorMap pixel(std::size_t n);

    double at(std::size_t row, std::size_t col, std::size_t band) const
    {
        return data_[(row * width_ + col) * bands_ + band];
    }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t bands_ = 0;
    std::vector<double> data_;
};

/// L x P matrix of spectral signatures; columns are finite, non-negative and non-zero.
class EndmemberMatrix {
public:
    EndmemberMatrix() = default;
    explicit EndmemberMatrix(Matrix signatures);

    std::size_t bands() const { return static_cast<std::size_t>(m_.rows()); }
    std::size_t materials() const { return static_cast<std::size_t>(m_.cols()); }
    const Matrix& matrix() const { return m_; }
    auto column(std::size_t p) const { return m_.col(static_cast<Eigen::Index>(p)); }

    static void validate(const Matrix& m);

private:
    Matrix m_;
};

/// P x N matrix of abundance fractions; every column lies on the unit simplex.
class AbundanceMatrix {
public:
    static constexpr double kNegativeTolerance = 1e-9;
    static constexpr double kSumTolerance = 1e-6;

    AbundanceMatrix() = default;
    explicit AbundanceMatrix(Matrix fractions);

    std::size_t materials() const { return static_cast<std::size_t>(a_.rows()); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(a_.cols()); }
    const Matrix& matrix() const { return a_; }

    /// Throws InvariantError naming the first violating pixel.
    static void validate(const Matrix& a);

private:
    Matrix a_;
};

/**
 * Per-pixel latent codes, indexed [pixel, material, latent coordinate].
 * Each pixel slice Z_n is a P x K matrix whose row p is the code of material p.
 */
class LatentTensor {
public:
    LatentTensor() = default;
    LatentTensor(std::size_t pixels, std::size_t materials, std::size_t latent_dim);

    std::size_t pixel_count() const { return pixels_; }
    std::size_t materials() const { return materials_; }
    std::size_t latent_dim() const { return latent_dim_; }

    ConstMatrixMap slice(std::size_t n) const;
    MatrixMap slice(std::size_t n);

    const std::vector<double>& data() const { return data_; }

    /// Frobenius norm over the whole tensor.
    double norm() const;

private:
    std::size_t pixels_ = 0;
    std::size_t materials_ = 0;
    std::size_t latent_dim_ = 0;
    std::vector<double> data_;
};

/// Reference codes Z_0, stored P x K like a LatentTensor slice.
class LatentReference {
public:
    LatentReference() = default;
    explicit LatentReference(Matrix codes);

    std::size_t materials() const { return static_cast<std::size_t>(z_.rows()); }
    std::size_t latent_dim() const { return static_cast<std::size_t>(z_.cols()); }
    const Matrix& matrix() const { return z_; }
    Vector code(std::size_t p) const { return z_.row(static_cast<Eigen::Index>(p)).transpose(); }

private:
    Matrix z_;
};

/// Per-pixel endmember matrices; slice n is an L x P EndmemberMatrix.
class EndmemberTensor {
public:
    EndmemberTensor() = default;
    EndmemberTensor(std::size_t bands, std::size_t materials, std::size_t pixels);

    /// Replicates one endmember matrix across all pixels.
    static EndmemberTensor replicate(const EndmemberMatrix& m, std::size_t pixels);

    std::size_t bands() const { return bands_; }
    std::size_t materials() const { return materials_; }
    std::size_t pixel_count() const { return pixels_; }

    ConstMatrixMap slice(std::size_t n) const;
    MatrixMap slice(std::size_t n);

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// Checks every slice against the EndmemberMatrix invariants.
    void validate() const;

    /// Mean signature of each material across pixels (L x P).
    Matrix mean_signatures() const;

private:
    std::size_t bands_ = 0;
    std::size_t materials_ = 0;
    std::size_t pixels_ = 0;
    std::vector<double> data_;
};

} // namespace hsu
