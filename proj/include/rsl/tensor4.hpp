#pragma once

#include <Eigen/Dense>

namespace rsl {

// Rank-4 tensor on R^{d x d x d x d}, stored as a (d*d) x (d*d) matrix.
// Index pairs are flattened row-major: entry (i,j,k,l) sits at row i*d+j,
// column k*d+l. This flattening is what makes the covariance tensor of a
// matrix-valued Ito process a plain PSD matrix, and lets the diffusion act
// on vectorised Brownian increments by matrix multiplication.
class Tensor4 {
  public:
    Tensor4() = default;
    explicit Tensor4(int d) : d_(d), flat_(Eigen::MatrixXd::Zero(d * d, d * d)) {}

    static Tensor4 from_flat(int d, Eigen::MatrixXd flat) {
        Tensor4 t(d);
        t.flat_ = std::move(flat);
        return t;
    }

    int dim() const { return d_; }

    double operator()(int i, int j, int k, int l) const { return flat_(i * d_ + j, k * d_ + l); }
    double& operator()(int i, int j, int k, int l) { return flat_(i * d_ + j, k * d_ + l); }

    const Eigen::MatrixXd& flat() const { return flat_; }
    Eigen::MatrixXd& flat() { return flat_; }

    // Hilbert-Schmidt norm.
    double norm() const { return flat_.norm(); }

  private:
    int d_ = 0;
    Eigen::MatrixXd flat_;
};

// q with q_{ijkl} = scale * delta_{ik} delta_{jl}: each matrix entry driven
// by its own Brownian coordinate with intensity `scale`.
inline Tensor4 isotropic_tensor4(int d, double scale = 1.0) {
    return Tensor4::from_flat(d, scale * Eigen::MatrixXd::Identity(d * d, d * d));
}

// Row-major vectorisation matching the Tensor4 flattening.
inline Eigen::VectorXd vec_rowmajor(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.rows() * m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
    return v;
}

inline Eigen::MatrixXd unvec_rowmajor(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
    return m;
}

}  // namespace rsl
