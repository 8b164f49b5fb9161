#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace vpgrav {

struct Vec2 {
    double x1 = 0.0, x2 = 0.0;

    Vec2& operator+=(const Vec2& o) { x1 += o.x1; x2 += o.x2; return *this; }
    Vec2& operator*=(double c) { x1 *= c; x2 *= c; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator*(double c, Vec2 a) { return a *= c; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x1 * b.x1 + a.x2 * b.x2; }

struct Vec3 {
    double v[3] = {0.0, 0.0, 0.0};

    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }

    Vec3& operator+=(const Vec3& o) {
        v[0] += o.v[0]; v[1] += o.v[1]; v[2] += o.v[2];
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        v[0] -= o.v[0]; v[1] -= o.v[1]; v[2] -= o.v[2];
        return *this;
    }
    Vec3& operator*=(double c) {
        v[0] *= c; v[1] *= c; v[2] *= c;
        return *this;
    }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double c, Vec3 a) { return a *= c; }
inline double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

// 3x3 matrix, row-major: m[i][j].
struct Mat3 {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    double* operator[](int i) { return m[i]; }
    const double* operator[](int i) const { return m[i]; }

    static Mat3 identity() {
        Mat3 I;
        I.m[0][0] = I.m[1][1] = I.m[2][2] = 1.0;
        return I;
    }
    static Mat3 scaled_identity(double c) {
        Mat3 I;
        I.m[0][0] = I.m[1][1] = I.m[2][2] = c;
        return I;
    }

    Mat3& operator+=(const Mat3& o) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] += o.m[i][j];
        return *this;
    }
    Mat3& operator*=(double c) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] *= c;
        return *this;
    }
};

inline Mat3 operator+(Mat3 a, const Mat3& b) { return a += b; }
inline Mat3 operator*(double c, Mat3 a) { return a *= c; }

// row-vector times matrix: (r M)_j = sum_k r_k M[k][j]
inline Vec3 row_times(const Vec3& r, const Mat3& M) {
    Vec3 out;
    for (int j = 0; j < 3; ++j)
        out[j] = r[0] * M[0][j] + r[1] * M[1][j] + r[2] * M[2][j];
    return out;
}

inline double max_abs(const Mat3& M) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s = std::max(s, std::abs(M[i][j]));
    return s;
}

// wrap a horizontal coordinate into the fundamental cell [-1/2, 1/2)
inline double wrap_cell(double x) {
    double y = x - std::floor(x + 0.5);
    if (y >= 0.5) y -= 1.0;  // guard against floor rounding at the seam
    return y;
}

inline Vec2 wrap_cell(Vec2 p) { return {wrap_cell(p.x1), wrap_cell(p.x2)}; }

// signed shortest periodic distance d in [-1/2, 1/2)
inline double periodic_delta(double a, double b) { return wrap_cell(a - b); }

}  // namespace vpgrav
