#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace flowcat {

using Rational = mpq_class;

inline Rational parse_rational(const std::string& text)
{
    std::string s;
    for (char ch : text)
        if (ch != ' ') s.push_back(ch);
    if (s.empty()) throw ParseError("empty rational");
    Rational q;
    if (q.set_str(s, 10) != 0) throw ParseError("bad rational '" + text + "'");
    if (q.get_den() == 0) throw ParseError("zero denominator in '" + text + "'");
    q.canonicalize();
    return q;
}

inline std::string format_rational(const Rational& q) { return q.get_str(); }

inline int sign_of_parity(long e) { return (e % 2 == 0) ? 1 : -1; }

template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {}

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    static Matrix from_rows(const std::vector<std::vector<T>>& rows)
    {
        Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_) throw ShapeMismatch("ragged row list");
            for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    // Columns are vectors of equal length `rows`; an empty list gives rows x 0.
    static Matrix from_columns(std::size_t rows, const std::vector<std::vector<T>>& cols)
    {
        Matrix m(rows, cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (cols[j].size() != rows) throw ShapeMismatch("column length differs from row count");
            for (std::size_t i = 0; i < rows; ++i) m(i, j) = cols[j][i];
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    bool is_zero() const
    {
        return std::all_of(data_.begin(), data_.end(), [](const T& x) { return x == 0; });
    }

    std::vector<T> column(std::size_t j) const
    {
        std::vector<T> v(rows_);
        for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    std::vector<std::vector<T>> columns() const
    {
        std::vector<std::vector<T>> out;
        for (std::size_t j = 0; j < cols_; ++j) out.push_back(column(j));
        return out;
    }

    Matrix transpose() const
    {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const
    {
        if (r0 + nr > rows_ || c0 + nc > cols_) throw ShapeMismatch("block out of range");
        Matrix b(nr, nc);
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
        return b;
    }

    void set_block(std::size_t r0, std::size_t c0, const Matrix& b)
    {
        if (r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_) throw ShapeMismatch("set_block out of range");
        for (std::size_t i = 0; i < b.rows_; ++i)
            for (std::size_t j = 0; j < b.cols_; ++j) (*this)(r0 + i, c0 + j) = b(i, j);
    }

    Matrix select(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const
    {
        Matrix s(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) s(i, j) = (*this)(rows[i], cols[j]);
        return s;
    }

    Matrix operator+(const Matrix& o) const
    {
        check_same(o, "+");
        Matrix r(*this);
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += o.data_[i];
        return r;
    }

    Matrix operator-(const Matrix& o) const
    {
        check_same(o, "-");
        Matrix r(*this);
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= o.data_[i];
        return r;
    }

    Matrix operator-() const
    {
        Matrix r(*this);
        for (auto& x : r.data_) x = -x;
        return r;
    }

    Matrix operator*(const Matrix& o) const
    {
        if (cols_ != o.rows_)
            throw ShapeMismatch("product of " + shape() + " and " + o.shape());
        Matrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const T& a = (*this)(i, k);
                if (a == 0) continue;
                for (std::size_t j = 0; j < o.cols_; ++j) {
                    const T& b = o(k, j);
                    if (b != 0) r(i, j) += a * b;
                }
            }
        return r;
    }

    std::vector<T> operator*(const std::vector<T>& v) const
    {
        if (v.size() != cols_) throw ShapeMismatch("matrix-vector length");
        std::vector<T> r(rows_, T(0));
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                if ((*this)(i, j) != 0 && v[j] != 0) r[i] += (*this)(i, j) * v[j];
        return r;
    }

    Matrix scaled(const T& s) const
    {
        Matrix r(*this);
        for (auto& x : r.data_) x *= s;
        return r;
    }

    bool operator==(const Matrix& o) const
    {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }
    bool operator!=(const Matrix& o) const { return !(*this == o); }

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

private:
    void check_same(const Matrix& o, const char* op) const
    {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw ShapeMismatch(std::string("operator") + op + " on " + shape() + " and " + o.shape());
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using QMatrix = Matrix<Rational>;
using QVector = std::vector<Rational>;

template <class T>
struct RowEchelon {
    Matrix<T> reduced;
    std::vector<std::size_t> pivots;
};

template <class T>
RowEchelon<T> rref(Matrix<T> m)
{
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
        std::size_t pr = row;
        while (pr < m.rows() && m(pr, col) == 0) ++pr;
        if (pr == m.rows()) continue;
        if (pr != row)
            for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(pr, j), m(row, j));
        T inv = T(1) / m(row, col);
        for (std::size_t j = col; j < m.cols(); ++j) m(row, j) *= inv;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (i == row || m(i, col) == 0) continue;
            T f = m(i, col);
            for (std::size_t j = col; j < m.cols(); ++j)
                if (m(row, j) != 0) m(i, j) -= f * m(row, j);
        }
        pivots.push_back(col);
        ++row;
    }
    return {std::move(m), std::move(pivots)};
}

namespace detail {

// Fraction-free elimination over the integers: each row is first scaled by
// the lcm of its denominators, then Bareiss updates keep every entry integral.
inline std::size_t bareiss_rank(std::vector<std::vector<mpz_class>> a, std::size_t cols)
{
    const std::size_t rows = a.size();
    mpz_class prev = 1;
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols && r < rows; ++c) {
        std::size_t p = r;
        while (p < rows && a[p][c] == 0) ++p;
        if (p == rows) continue;
        std::swap(a[p], a[r]);
        for (std::size_t i = r + 1; i < rows; ++i) {
            for (std::size_t j = c + 1; j < cols; ++j) {
                mpz_class v = a[r][c] * a[i][j] - a[i][c] * a[r][j];
                mpz_divexact(v.get_mpz_t(), v.get_mpz_t(), prev.get_mpz_t());
                a[i][j] = v;
            }
            a[i][c] = 0;
        }
        prev = a[r][c];
        ++r;
    }
    return r;
}

} // namespace detail

template <class T>
std::size_t rank(const Matrix<T>& m)
{
    if constexpr (std::is_same_v<T, mpq_class>) {
        std::vector<std::vector<mpz_class>> a(m.rows(), std::vector<mpz_class>(m.cols()));
        for (std::size_t i = 0; i < m.rows(); ++i) {
            mpz_class l = 1;
            for (std::size_t j = 0; j < m.cols(); ++j)
                if (m(i, j) != 0) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), m(i, j).get_den_mpz_t());
            for (std::size_t j = 0; j < m.cols(); ++j) {
                mpq_class s = m(i, j) * l;
                a[i][j] = s.get_num();
            }
        }
        return detail::bareiss_rank(std::move(a), m.cols());
    } else {
        return rref(m).pivots.size();
    }
}

template <class T>
std::vector<std::vector<T>> kernel_basis(const Matrix<T>& m)
{
    auto e = rref(m);
    std::vector<bool> is_pivot(m.cols(), false);
    for (auto p : e.pivots) is_pivot[p] = true;
    std::vector<std::vector<T>> basis;
    for (std::size_t f = 0; f < m.cols(); ++f) {
        if (is_pivot[f]) continue;
        std::vector<T> v(m.cols(), T(0));
        v[f] = T(1);
        for (std::size_t i = 0; i < e.pivots.size(); ++i) v[e.pivots[i]] = -e.reduced(i, f);
        basis.push_back(std::move(v));
    }
    return basis;
}

template <class T>
std::vector<std::size_t> pivot_columns(const Matrix<T>& m)
{
    return rref(m).pivots;
}

template <class T>
std::vector<std::vector<T>> image_basis(const Matrix<T>& m)
{
    std::vector<std::vector<T>> out;
    for (auto j : pivot_columns(m)) out.push_back(m.column(j));
    return out;
}

template <class T>
std::size_t span_rank(const std::vector<std::vector<T>>& vs, std::size_t dim)
{
    if (vs.empty()) return 0;
    return rank(Matrix<T>::from_columns(dim, vs));
}

template <class T>
std::optional<std::vector<T>> solve(const Matrix<T>& a, const std::vector<T>& b)
{
    if (b.size() != a.rows()) throw ShapeMismatch("solve: right-hand side length");
    Matrix<T> aug(a.rows(), a.cols() + 1);
    aug.set_block(0, 0, a);
    for (std::size_t i = 0; i < a.rows(); ++i) aug(i, a.cols()) = b[i];
    auto e = rref(aug);
    if (!e.pivots.empty() && e.pivots.back() == a.cols()) return std::nullopt;
    std::vector<T> x(a.cols(), T(0));
    for (std::size_t i = 0; i < e.pivots.size(); ++i) x[e.pivots[i]] = e.reduced(i, a.cols());
    return x;
}

template <class T>
bool in_span(const std::vector<std::vector<T>>& vs, const std::vector<T>& v)
{
    if (vs.empty()) return std::all_of(v.begin(), v.end(), [](const T& x) { return x == 0; });
    return solve(Matrix<T>::from_columns(v.size(), vs), v).has_value();
}

template <class T>
std::size_t quotient_dimension(const std::vector<std::vector<T>>& sub,
                               const std::vector<std::vector<T>>& ambient)
{
    std::size_t dim = 0;
    if (!ambient.empty()) dim = ambient[0].size();
    else if (!sub.empty()) dim = sub[0].size();
    for (const auto& v : sub)
        if (!in_span(ambient, v)) throw SubNotContained("vector outside the ambient span");
    return span_rank(ambient, dim) - span_rank(sub, dim);
}

template <class T>
Matrix<T> inverse(const Matrix<T>& a)
{
    if (a.rows() != a.cols()) throw ShapeMismatch("inverse of non-square " + a.shape());
    const std::size_t n = a.rows();
    Matrix<T> aug(n, 2 * n);
    aug.set_block(0, 0, a);
    aug.set_block(0, n, Matrix<T>::identity(n));
    auto e = rref(aug);
    if (e.pivots.size() < n || e.pivots[n - 1] != n - 1) throw SingularMatrix("matrix is not invertible");
    return e.reduced.block(0, n, n, n);
}

// Left inverse of a matrix with independent columns, built from a set of
// pivot rows on which it is invertible.
template <class T>
Matrix<T> left_inverse(const Matrix<T>& a)
{
    if (a.cols() == 0) return Matrix<T>(0, a.rows());
    auto rows = pivot_columns(a.transpose());
    if (rows.size() != a.cols()) throw SingularMatrix("columns are dependent");
    std::vector<std::size_t> all(a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j) all[j] = j;
    Matrix<T> sq = a.select(rows, all);
    Matrix<T> inv = inverse(sq);
    Matrix<T> out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t r = 0; r < rows.size(); ++r) out(i, rows[r]) = inv(i, r);
    return out;
}

template <class T>
struct PLU {
    Matrix<T> p;
    Matrix<T> l;
    Matrix<T> u;
};

// P * A = L * U with L unit lower triangular (m x m) and U in row echelon form.
template <class T>
PLU<T> plu(const Matrix<T>& a)
{
    const std::size_t m = a.rows(), n = a.cols();
    Matrix<T> u = a;
    Matrix<T> l = Matrix<T>::identity(m);
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    std::size_t row = 0;
    for (std::size_t col = 0; col < n && row < m; ++col) {
        std::size_t pr = row;
        while (pr < m && u(pr, col) == 0) ++pr;
        if (pr == m) continue;
        if (pr != row) {
            for (std::size_t j = 0; j < n; ++j) std::swap(u(pr, j), u(row, j));
            for (std::size_t j = 0; j < row; ++j) std::swap(l(pr, j), l(row, j));
            std::swap(perm[pr], perm[row]);
        }
        for (std::size_t i = row + 1; i < m; ++i) {
            if (u(i, col) == 0) continue;
            T f = u(i, col) / u(row, col);
            l(i, row) = f;
            for (std::size_t j = col; j < n; ++j) u(i, j) -= f * u(row, j);
        }
        ++row;
    }
    Matrix<T> p(m, m);
    for (std::size_t i = 0; i < m; ++i) p(i, perm[i]) = T(1);
    return {std::move(p), std::move(l), std::move(u)};
}

template <class T>
Matrix<T> power(const Matrix<T>& a, std::size_t e)
{
    Matrix<T> r = Matrix<T>::identity(a.rows());
    for (std::size_t i = 0; i < e; ++i) r = r * a;
    return r;
}

} // namespace flowcat
