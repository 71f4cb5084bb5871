#include "hsu/types.hpp"

#include <cmath>
#include <sstream>

namespace hsu {

namespace {

Eigen::Index idx(std::size_t v)
{
    return static_cast<Eigen::Index>(v);
}

} // namespace

HyperCube::HyperCube(std::size_t height, std::size_t width, std::size_t bands)
    : height_(height), width_(width), bands_(bands), data_(height * width * bands, 0.0)
{
}

HyperCube::HyperCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<double> data)
    : height_(height), width_(width), bands_(bands), data_(std::move(data))
{
    if (data_.size() != height_ * width_ * bands_) {
        std::ostringstream os;
        os << "cube data length " << data_.size() << " != " << height_ << "x" << width_ << "x" << bands_;
        throw InvariantError(os.str());
    }
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw InvariantError("cube contains non-finite reflectance");
        }
    }
}

HyperCube::HyperCube(std::size_t height, std::size_t width, const Matrix& pixels)
    : HyperCube(height, width, static_cast<std::size_t>(pixels.rows()),
                std::vector<double>(pixels.data(), pixels.data() + pixels.size()))
{
    if (static_cast<std::size_t>(pixels.cols()) != height * width) {
        throw InvariantError("pixel matrix column count does not match height*width");
    }
}

ConstMatrixMap HyperCube::pixels() const
{
    return {data_.data(), idx(bands_), idx(pixel_count())};
}

MatrixMap HyperCube::pixels()
{
    return {data_.data(), idx(bands_), idx(pixel_count())};
}

ConstVectorMap HyperCube::pixel(std::size_t n) const
{
    return {data_.data() + n * bands_, idx(bands_)};
}

VectorMap HyperCube::pixel(std::size_t n)
{
    return {data_.data() + n * bands_, idx(bands_)};
}

EndmemberMatrix::EndmemberMatrix(Matrix signatures) : m_(std::move(signatures))
{
    validate(m_);
}

void EndmemberMatrix::validate(const Matrix& m)
{
    if (m.rows() == 0 || m.cols() == 0) {
        throw InvariantError("endmember matrix is empty");
    }
    for (Eigen::Index p = 0; p < m.cols(); ++p) {
        const auto col = m.col(p);
        if (!col.allFinite()) {
            throw InvariantError("endmember " + std::to_string(p) + " has non-finite entries");
        }
        if ((col.array() < 0.0).any()) {
            throw InvariantError("endmember " + std::to_string(p) + " has negative entries");
        }
        if (col.squaredNorm() == 0.0) {
            throw InvariantError("endmember " + std::to_string(p) + " is the zero vector");
        }
    }
}

AbundanceMatrix::AbundanceMatrix(Matrix fractions) : a_(std::move(fractions))
{
    validate(a_);
}

void AbundanceMatrix::validate(const Matrix& a)
{
    if (a.rows() == 0) {
        throw InvariantError("abundance matrix has no materials");
    }
    for (Eigen::Index n = 0; n < a.cols(); ++n) {
        const auto col = a.col(n);
        if (!col.allFinite()) {
            throw InvariantError("abundance column " + std::to_string(n) + " is not finite");
        }
        if (col.minCoeff() < -kNegativeTolerance) {
            throw InvariantError("abundance column " + std::to_string(n) + " violates non-negativity");
        }
        if (std::abs(col.sum() - 1.0) > kSumTolerance) {
            std::ostringstream os;
            os << "abundance column " << n << " sums to " << col.sum() << " instead of 1";
            throw InvariantError(os.str());
        }
    }
}

LatentTensor::LatentTensor(std::size_t pixels, std::size_t materials, std::size_t latent_dim)
    : pixels_(pixels), materials_(materials), latent_dim_(latent_dim),
      data_(pixels * materials * latent_dim, 0.0)
{
}

ConstMatrixMap LatentTensor::slice(std::size_t n) const
{
    return {data_.data() + n * materials_ * latent_dim_, idx(materials_), idx(latent_dim_)};
}

MatrixMap LatentTensor::slice(std::size_t n)
{
    return {data_.data() + n * materials_ * latent_dim_, idx(materials_), idx(latent_dim_)};
}

double LatentTensor::norm() const
{
    return ConstVectorMap(data_.data(), idx(data_.size())).norm();
}

LatentReference::LatentReference(Matrix codes) : z_(std::move(codes))
{
    if (!z_.allFinite()) {
        throw InvariantError("latent reference has non-finite entries");
    }
}

EndmemberTensor::EndmemberTensor(std::size_t bands, std::size_t materials, std::size_t pixels)
    : bands_(bands), materials_(materials), pixels_(pixels), data_(bands * materials * pixels, 0.0)
{
}

EndmemberTensor EndmemberTensor::replicate(const EndmemberMatrix& m, std::size_t pixels)
{
    EndmemberTensor t(m.bands(), m.materials(), pixels);
    for (std::size_t n = 0; n < pixels; ++n) {
        t.slice(n) = m.matrix();
    }
    return t;
}

ConstMatrixMap EndmemberTensor::slice(std::size_t n) const
{
    return {data_.data() + n * bands_ * materials_, idx(bands_), idx(materials_)};
}

MatrixMap EndmemberTensor::slice(std::size_t n)
{
    return {data_.data() + n * bands_ * materials_, idx(bands_), idx(materials_)};
}

void EndmemberTensor::validate() const
{
    for (std::size_t n = 0; n < pixels_; ++n) {
        try {
            EndmemberMatrix::validate(slice(n));
        } catch (const InvariantError& e) {
            throw InvariantError("pixel " + std::to_string(n) + ": " + e.what());
        }
    }
}

Matrix EndmemberTensor::mean_signatures() const
{
    Matrix mean = Matrix::Zero(idx(bands_), idx(materials_));
    for (std::size_t n = 0; n < pixels_; ++n) {
        mean += slice(n);
    }
    if (pixels_ > 0) {
        mean /= static_cast<double>(pixels_);
    }
    return mean;
}

} // namespace hsu
