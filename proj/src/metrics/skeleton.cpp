#include <cmath>
#include <limits>
#include <vector>

#include "avwnet/metrics.hpp"

namespace avwnet {

namespace {

// Padded binary raster so every real pixel has eight neighbours.
class Padded {
 public:
  explicit Padded(const Mask& m) : rows_(m.rows() + 2), cols_(m.cols() + 2), v_(rows_ * cols_, 0) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) v_[(r + 1) * cols_ + c + 1] = m(r, c) ? 1 : 0;
    }
  }

  std::uint8_t& at(int r, int c) { return v_[r * cols_ + c]; }

  // P2..P9 clockwise from north.
  std::array<int, 8> neighbours(int r, int c) {
    return {at(r - 1, c), at(r - 1, c + 1), at(r, c + 1), at(r + 1, c + 1),
            at(r + 1, c), at(r + 1, c - 1), at(r, c - 1), at(r - 1, c - 1)};
  }

  Mask unpad() {
    Mask out(rows_ - 2, cols_ - 2);
    for (int r = 0; r < rows_ - 2; ++r) {
      for (int c = 0; c < cols_ - 2; ++c) out(r, c) = at(r + 1, c + 1);
    }
    return out;
  }

  int rows_, cols_;

 private:
  std::vector<std::uint8_t> v_;
};

struct Neighbourhood {
  int count;        // B
  int transitions;  // A: 0 -> 1 steps around the ring
};

Neighbourhood describe(const std::array<int, 8>& p) {
  Neighbourhood n{0, 0};
  for (int i = 0; i < 8; ++i) {
    n.count += p[i];
    n.transitions += (p[i] == 0 && p[(i + 1) % 8] == 1);
  }
  return n;
}

bool simple_interior(const Neighbourhood& n) {
  return n.count >= 2 && n.count <= 6 && n.transitions == 1;
}

// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == inf) continue;
    double s;
    while (true) {
      if (f[v[k]] == inf) {
        // The running envelope only holds an unreachable parabola; replace it.
        s = -inf;
      } else {
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      }
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (f[v[k]] == inf) {
      v[k] = q;
      z[k] = -inf;
      z[k + 1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = f[v[k]] == inf ? inf : dq * dq + f[v[k]];
  }
}

}  // namespace

Mask skeletonize(const Mask& vessel_mask) {
  Padded img(vessel_mask);
  std::vector<std::pair<int, int>> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      candidates.clear();
      for (int r = 1; r < img.rows_ - 1; ++r) {
        for (int c = 1; c < img.cols_ - 1; ++c) {
          if (!img.at(r, c)) continue;
          const auto p = img.neighbours(r, c);
          if (!simple_interior(describe(p))) continue;
          // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
          const bool directional = pass == 0
                                       ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                       : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (directional) candidates.emplace_back(r, c);
        }
      }
      for (auto [r, c] : candidates) {
        if (!simple_interior(describe(img.neighbours(r, c)))) continue;
        img.at(r, c) = 0;
        changed = true;
      }
    }
  }
  return img.unpad();
}

Grid<double> distance_transform(const Mask& mask) {
  // Work on a one-pixel background frame so the raster border counts as background.
  const int rows = mask.rows() + 2, cols = mask.cols() + 2;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(static_cast<std::size_t>(rows * cols), 0.0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (mask(r, c)) sq[(r + 1) * cols + c + 1] = inf;
    }
  }
  const int longest = std::max(rows, cols);
  std::vector<double> f(longest), d(longest), z(longest + 1);
  std::vector<int> v(longest);
  for (int c = 0; c < cols; ++c) {
    f.resize(rows);
    d.resize(rows);
    for (int r = 0; r < rows; ++r) f[r] = sq[r * cols + c];
    edt_1d(f, d, v, z);
    for (int r = 0; r < rows; ++r) sq[r * cols + c] = d[r];
  }
  for (int r = 0; r < rows; ++r) {
    f.resize(cols);
    d.resize(cols);
    for (int c = 0; c < cols; ++c) f[c] = sq[r * cols + c];
    edt_1d(f, d, v, z);
    for (int c = 0; c < cols; ++c) sq[r * cols + c] = d[c];
  }
  Grid<double> out(mask.rows(), mask.cols(), 0.0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) out(r, c) = std::sqrt(sq[(r + 1) * cols + c + 1]);
  }
  return out;
}

Grid<double> vessel_width(const Mask& vessel_mask, const Mask& centerline) {
  if (!vessel_mask.same_extent(centerline)) throw ShapeError("centerline extent differs from mask");
  const Grid<double> dist = distance_transform(vessel_mask);
  Grid<double> width(vessel_mask.rows(), vessel_mask.cols(), 0.0);
  for (int r = 0; r < vessel_mask.rows(); ++r) {
    for (int c = 0; c < vessel_mask.cols(); ++c) {
      if (!centerline(r, c)) continue;
      if (!vessel_mask(r, c)) {
        throw DataError("centerline pixel (" + std::to_string(r) + "," + std::to_string(c) +
                        ") lies outside the vessel mask");
      }
      width(r, c) = 2.0 * (dist(r, c) - 0.5);
    }
  }
  return width;
}

}  // namespace avwnet
