#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/geometry/cloud.hpp"

namespace pointscan {

using Cell3 = std::array<std::uint32_t, 3>;

inline void check_curve_bits(int bits) {
  if (bits < 1 || bits > 21)
    throw ArgError("curve bits must lie in [1, 21], got " +
                   std::to_string(bits));
}

// Axis-aligned cube enclosing a cloud, used to quantize points onto the
// curve grid. The cube is centered per axis so the longest extent spans it.
struct CurveBox {
  Point3 lo = {0.0, 0.0, 0.0};
  double side = 1.0;

  static CurveBox around(const std::vector<Point3>& pts) {
    if (pts.empty()) throw DataError("CurveBox: empty point set");
    Point3 mn = pts[0], mx = pts[0];
    for (const auto& p : pts)
      for (int k = 0; k < 3; ++k) {
        mn[k] = std::min(mn[k], p[k]);
        mx[k] = std::max(mx[k], p[k]);
      }
    CurveBox box;
    double side = 0.0;
    for (int k = 0; k < 3; ++k) side = std::max(side, mx[k] - mn[k]);
    if (side == 0.0) side = 1.0;
    box.side = side;
    for (int k = 0; k < 3; ++k)
      box.lo[k] = 0.5 * (mn[k] + mx[k]) - 0.5 * side;
    return box;
  }

  Cell3 cell(const Point3& p, int bits) const {
    check_curve_bits(bits);
    const std::uint32_t cells = 1u << bits;
    Cell3 out;
    for (int k = 0; k < 3; ++k) {
      double t = (p[k] - lo[k]) / side * double(cells);
      long long q = (long long)std::floor(t);
      q = std::clamp(q, 0ll, (long long)cells - 1);
      out[std::size_t(k)] = std::uint32_t(q);
    }
    return out;
  }
};

inline void check_cell(const Cell3& c, int bits) {
  check_curve_bits(bits);
  const std::uint32_t cells = 1u << bits;
  for (int k = 0; k < 3; ++k)
    if (c[std::size_t(k)] >= cells)
      throw ArgError("curve cell coordinate " +
                     std::to_string(c[std::size_t(k)]) +
                     " out of range for " + std::to_string(bits) + " bits");
}

// ---------------------------------------------------------------------------
// Morton (Z-order): interleave bits as x,y,z from the most significant plane,
// x taking the highest bit of each 3-bit digit.

inline std::uint64_t morton_encode(const Cell3& c, int bits) {
  check_cell(c, bits);
  std::uint64_t code = 0;
  for (int k = bits - 1; k >= 0; --k) {
    code = (code << 1) | ((c[0] >> k) & 1u);
    code = (code << 1) | ((c[1] >> k) & 1u);
    code = (code << 1) | ((c[2] >> k) & 1u);
  }
  return code;
}

inline Cell3 morton_decode(std::uint64_t code, int bits) {
  check_curve_bits(bits);
  if (bits < 21 && (code >> (3 * bits)) != 0)
    throw ArgError("morton_decode: code out of range for bit depth");
  Cell3 c = {0, 0, 0};
  for (int k = 0; k < bits; ++k) {
    c[2] |= std::uint32_t((code >> (3 * k)) & 1u) << k;
    c[1] |= std::uint32_t((code >> (3 * k + 1)) & 1u) << k;
    c[0] |= std::uint32_t((code >> (3 * k + 2)) & 1u) << k;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Hilbert curve via the transpose representation (Skilling's method): map
// axes to/from the transposed Gray-code form, then interleave exactly like
// Morton. Adjacent codes differ by one grid step in exactly one axis.

inline void hilbert_axes_to_transpose(Cell3& x, int bits) {
  const std::uint32_t m = 1u << (bits - 1);
  for (std::uint32_t q = m; q > 1; q >>= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 0; i < 3; ++i) {
      if (x[std::size_t(i)] & q) {
        x[0] ^= p;
      } else {
        const std::uint32_t t = (x[0] ^ x[std::size_t(i)]) & p;
        x[0] ^= t;
        x[std::size_t(i)] ^= t;
      }
    }
  }
  x[1] ^= x[0];
  x[2] ^= x[1];
  std::uint32_t t = 0;
  for (std::uint32_t q = m; q > 1; q >>= 1)
    if (x[2] & q) t ^= q - 1;
  for (int i = 0; i < 3; ++i) x[std::size_t(i)] ^= t;
}

inline void hilbert_transpose_to_axes(Cell3& x, int bits) {
  const std::uint32_t n = 2u << (bits - 1);
  std::uint32_t t = x[2] >> 1;
  for (int i = 2; i > 0; --i) x[std::size_t(i)] ^= x[std::size_t(i - 1)];
  x[0] ^= t;
  for (std::uint32_t q = 2; q != n; q <<= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 2; i >= 0; --i) {
      if (x[std::size_t(i)] & q) {
        x[0] ^= p;
      } else {
        const std::uint32_t s = (x[0] ^ x[std::size_t(i)]) & p;
        x[0] ^= s;
        x[std::size_t(i)] ^= s;
      }
    }
  }
}

inline std::uint64_t hilbert_encode(const Cell3& c, int bits) {
  check_cell(c, bits);
  Cell3 x = c;
  hilbert_axes_to_transpose(x, bits);
  std::uint64_t code = 0;
  for (int k = bits - 1; k >= 0; --k) {
    code = (code << 1) | ((x[0] >> k) & 1u);
    code = (code << 1) | ((x[1] >> k) & 1u);
    code = (code << 1) | ((x[2] >> k) & 1u);
  }
  return code;
}

inline Cell3 hilbert_decode(std::uint64_t code, int bits) {
  check_curve_bits(bits);
  if (bits < 21 && (code >> (3 * bits)) != 0)
    throw ArgError("hilbert_decode: code out of range for bit depth");
  Cell3 x = {0, 0, 0};
  for (int k = 0; k < bits; ++k) {
    x[2] |= std::uint32_t((code >> (3 * k)) & 1u) << k;
    x[1] |= std::uint32_t((code >> (3 * k + 1)) & 1u) << k;
    x[0] |= std::uint32_t((code >> (3 * k + 2)) & 1u) << k;
  }
  hilbert_transpose_to_axes(x, bits);
  return x;
}

// Point-level helpers: quantize into the cloud's bounding cube, then encode.

inline std::uint64_t morton_code(const Point3& p, const CurveBox& box,
                                 int bits) {
  return morton_encode(box.cell(p, bits), bits);
}

inline std::uint64_t hilbert_code(const Point3& p, const CurveBox& box,
                                  int bits) {
  return hilbert_encode(box.cell(p, bits), bits);
}

}  // namespace pointscan
