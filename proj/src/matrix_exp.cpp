#include <cmath>

#include "recur/simgen.hpp"

namespace recur {

namespace {

constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,       1323241920.0,
                              40840800.0,          960960.0,            16380.0,
                              182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

template <class M>
M pade13_square(const M& A_in, int n) {
    const double norm = A_in.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm > kTheta13) s = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
    M A = A_in / std::ldexp(1.0, s);
    const double* b = kPade13;
    M I = M::Identity(n, n);
    M A2 = A * A;
    M A4 = A2 * A2;
    M A6 = A4 * A2;
    M W = A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
    M U = A * W;
    M V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    M R = (V - U).partialPivLu().solve(V + U);
    for (int k = 0; k < s; ++k) R = R * R;
    return R;
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
    return pade13_square<Eigen::MatrixXd>(A, static_cast<int>(A.rows()));
}

Mat12 matrix_exp(const Mat12& Q, double t) {
    if (t == 0.0) return Mat12::Identity();
    return pade13_square<Mat12>(t * Q, kStates);
}

}  // namespace recur
