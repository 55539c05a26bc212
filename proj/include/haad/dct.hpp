#pragma once

#include <Eigen/Dense>

namespace haad::dct {

using Matrix = Eigen::MatrixXd;

// Truncated orthonormal DCT-II basis: H frames down to M retained
// coefficients, columns ordered by ascending frequency.
struct DctBasis {
    int frames = 0;        // H
    int coefficients = 0;  // M
    Matrix T;              // H x M, orthonormal columns
};

// Per-channel frequency coefficients: one row per pose dimension.
struct DctCoeffs {
    Matrix C;  // P x M
};

DctBasis make_basis(int frames, int coefficients);

// C = X * T
DctCoeffs dct_forward(const Matrix& trajectory, const DctBasis& basis);

// Y = C * T^T; exact reconstruction when M == H.
Matrix dct_inverse(const DctCoeffs& coeffs, const DctBasis& basis);

}  // namespace haad::dct
