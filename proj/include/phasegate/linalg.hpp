#pragma once

// Dense complex matrices for one- and two-qubit operators.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace phasegate {

using cplx = std::complex<double>;

inline constexpr double kHermitianTol = 1e-10;

/// Row-major dense complex matrix. Sizes in this project never exceed 4x4.
class CMatrix {
public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols);
  /// Row-major initializer; throws std::invalid_argument on size mismatch.
  CMatrix(std::size_t rows, std::size_t cols, std::initializer_list<cplx> entries);
  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

  static CMatrix identity(std::size_t n);
  static CMatrix diag(std::initializer_list<cplx> d);
  /// |ket><bra|
  static CMatrix outer(const std::vector<cplx>& ket, const std::vector<cplx>& bra);
  static CMatrix projector(const std::vector<cplx>& ket) { return outer(ket, ket); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<cplx>& entries() const { return data_; }

  CMatrix adjoint() const;
  CMatrix transpose() const;
  cplx trace() const;

  CMatrix& operator+=(const CMatrix& o);
  CMatrix& operator-=(const CMatrix& o);
  CMatrix& operator*=(cplx s);

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
  friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }
  friend CMatrix operator*(const CMatrix& a, const CMatrix& b);

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

std::vector<cplx> operator*(const CMatrix& m, const std::vector<cplx>& v);

/// Kronecker product; row index of the result is i_a * b.rows() + i_b.
CMatrix tensor(const CMatrix& a, const CMatrix& b);

enum class Subsystem { A, B };

/// Traces out `traced` from an operator on C^dim_a (x) C^dim_b.
CMatrix partial_trace(const CMatrix& m, Subsystem traced, std::size_t dim_a = 2,
                      std::size_t dim_b = 2);

/// Tr[a b] without forming the product.
cplx trace_of_product(const CMatrix& a, const CMatrix& b);

double max_abs_diff(const CMatrix& a, const CMatrix& b);
double max_abs(const CMatrix& a);
bool is_hermitian(const CMatrix& m, double tol = kHermitianTol);

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  CMatrix vectors;             // columns are eigenvectors
};

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
/// Throws std::invalid_argument if m is not Hermitian within kHermitianTol.
EigenDecomposition eig_hermitian(const CMatrix& m);

}  // namespace phasegate
