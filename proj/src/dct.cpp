#include "haad/dct.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace haad::dct {

DctBasis make_basis(int frames, int coefficients) {
    if (coefficients < 1 || coefficients > frames) {
        std::ostringstream os;
        os << "make_basis: need 1 <= M <= H, got M=" << coefficients << " H=" << frames;
        throw std::invalid_argument(os.str());
    }
    DctBasis basis;
    basis.frames = frames;
    basis.coefficients = coefficients;
    basis.T.resize(frames, coefficients);
    const double pi = 3.14159265358979323846264338327950288;
    const double norm = std::sqrt(2.0 / frames);
    for (int m = 0; m < coefficients; ++m) {
        const double k = (m == 0) ? 1.0 / std::sqrt(2.0) : 1.0;
        for (int h = 0; h < frames; ++h)
            basis.T(h, m) = norm * k * std::cos(pi * (2 * h + 1) * m / (2.0 * frames));
    }
    return basis;
}

DctCoeffs dct_forward(const Matrix& trajectory, const DctBasis& basis) {
    if (trajectory.cols() != basis.frames) {
        std::ostringstream os;
        os << "dct_forward: trajectory has " << trajectory.cols()
           << " frames, basis expects " << basis.frames;
        throw std::invalid_argument(os.str());
    }
    return DctCoeffs{trajectory * basis.T};
}

Matrix dct_inverse(const DctCoeffs& coeffs, const DctBasis& basis) {
    if (coeffs.C.cols() != basis.coefficients) {
        std::ostringstream os;
        os << "dct_inverse: coefficients have " << coeffs.C.cols()
           << " columns, basis expects " << basis.coefficients;
        throw std::invalid_argument(os.str());
    }
    return coeffs.C * basis.T.transpose();
}

}  // namespace haad::dct
