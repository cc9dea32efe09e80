#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>

#include "avwnet/data_io.hpp"

namespace avwnet {

namespace {

// Draws built directly on the engine output so corpora match across standard
// libraries (the <random> distributions are implementation-defined).
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * unit(); }
  bool chance(double p) { return unit() < p; }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = unit();
    while (u <= 0.0) u = unit();
    const double v = unit();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(2.0 * std::numbers::pi * v);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * v);
  }

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kDeg = std::numbers::pi / 180.0;

struct Point {
  int r, c;
};

struct Geometry {
  double cy, cx, radius;
  bool inside(double r, double c, double margin) const {
    const double dr = r - cy, dc = c - cx;
    return std::sqrt(dr * dr + dc * dc) <= radius - margin;
  }
};

double segment_distance(double pr, double pc, Point a, Point b) {
  const double dr = b.r - a.r, dc = b.c - a.c;
  const double len2 = dr * dr + dc * dc;
  double t = len2 > 0 ? ((pr - a.r) * dr + (pc - a.c) * dc) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double er = pr - (a.r + t * dr), ec = pc - (a.c + t * dc);
  return std::sqrt(er * er + ec * ec);
}

// Pixels whose centre lies within max(w/2, 0.5) of the polyline. Vertices are
// pixel centres, which keeps the result 8-connected.
void rasterize(const std::vector<Point>& pts, double width, Mask& out, Grid<double>& widths) {
  const double reach = std::max(width / 2.0, 0.5);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point a = pts[i], b = pts[i + 1];
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.r, b.r) - reach)));
    const int r1 = std::min(out.rows() - 1, static_cast<int>(std::ceil(std::max(a.r, b.r) + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.c, b.c) - reach)));
    const int c1 = std::min(out.cols() - 1, static_cast<int>(std::ceil(std::max(a.c, b.c) + reach)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (segment_distance(r, c, a, b) <= reach + 1e-9) {
          out(r, c) = 1;
          widths(r, c) = std::max(widths(r, c), width);
        }
      }
    }
  }
}

struct TreeBuilder {
  const SynthConfig& cfg;
  const Geometry& geo;
  Draw& draw;
  const Mask* avoid;  // the other class's raster
  Mask tree;
  Grid<double> tree_width;
  double curl = 0.0;  // per-piece heading drift, radians
  // Trunk start for a given heading; the start moves with re-drawn headings.
  std::function<Point(double)> root_at;

  // Polyline of three jittered pieces from `start`, cut where it would leave
  // the field of view. Returns fewer than two points when nothing fits.
  std::vector<Point> trace(Point start, double heading, double length, double width) {
    std::vector<Point> pts{start};
    double r = start.r, c = start.c;
    const double margin = width / 2.0 + 1.5;
    for (int piece = 0; piece < 3; ++piece) {
      heading += curl + draw.uniform(-12.0, 12.0) * kDeg;
      const double nr = r + std::sin(heading) * length / 3.0;
      const double nc = c + std::cos(heading) * length / 3.0;
      if (!geo.inside(nr, nc, margin)) break;
      r = nr;
      c = nc;
      const Point p{static_cast<int>(std::lround(r)), static_cast<int>(std::lround(c))};
      if (p.r != pts.back().r || p.c != pts.back().c) pts.push_back(p);
    }
    return pts;
  }

  // Pixels shared with the avoided raster.
  int overlap(const std::vector<Point>& pts, double width) const {
    if (!avoid) return 0;
    Mask m(tree.rows(), tree.cols(), 0);
    Grid<double> w(tree.rows(), tree.cols(), 0.0);
    rasterize(pts, width, m, w);
    int n = 0;
    for (std::size_t i = 0; i < m.size(); ++i) n += m[i] && (*avoid)[i];
    return n;
  }

  void grow(Point start, double heading, double length, double width, int depth) {
    std::vector<Point> pts;
    Point origin = start;
    // A vein piece that crosses an artery is kept with the crossover
    // probability, provided the overlap is crossing-sized rather than a
    // shared run and the piece is not a trunk. Otherwise a few re-drawn
    // headings are tried, then the branch is dropped.
    bool accepted = false;
    const double crossing = 2.0 * std::max(width, 2.0) * std::max(width, 2.0);
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      const double h = attempt == 0 ? heading : heading + draw.uniform(-35.0, 35.0) * kDeg;
      origin = depth == 0 && root_at ? root_at(h) : start;
      pts = trace(origin, h, length, width);
      if (pts.size() < 2) continue;
      const int shared = overlap(pts, width);
      if (shared == 0) {
        accepted = true;
      } else if (depth > 0 && shared <= crossing && draw.chance(cfg.crossover_probability)) {
        accepted = true;
      }
    }
    if (!accepted) return;
    rasterize(pts, width, tree, tree_width);

    if (depth + 1 >= cfg.branch_depth) return;
    const Point end = pts.back();
    const double out_heading = std::atan2(end.r - origin.r, end.c - origin.c);
    for (int side : {-1, 1}) {
      const double w = width * draw.uniform(0.6, 0.8);
      if (w < cfg.min_width) continue;
      grow(end, out_heading + side * draw.uniform(20.0, 40.0) * kDeg, length * draw.uniform(0.6, 0.8),
           w, depth + 1);
    }
  }
};

}  // namespace

void SynthConfig::validate(int pooling_stages) const {
  if (count < 1) throw UsageError("synthetic count must be >= 1");
  if (size < 16) throw UsageError("synthetic size must be >= 16");
  if (pooling_stages > 0 && size % (1 << pooling_stages) != 0) {
    throw UsageError("synthetic size " + std::to_string(size) + " must be divisible by " +
                     std::to_string(1 << pooling_stages));
  }
  if (trees_per_class < 1) throw UsageError("trees_per_class must be >= 1");
  if (branch_depth < 1) throw UsageError("branch_depth must be >= 1");
  if (!(min_width >= 1.0 && max_width >= min_width)) {
    throw UsageError("vessel widths need 1 <= min_width <= max_width");
  }
  if (!(crossover_probability >= 0 && crossover_probability <= 1)) {
    throw UsageError("crossover_probability must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0)) throw UsageError("noise_sigma must be >= 0");
  if (!(vessel_contrast > 0 && av_contrast >= 0 && vessel_contrast + av_contrast < 1)) {
    throw UsageError("contrasts must be positive and sum below 1");
  }
}

std::vector<SynthSample> generate_synthetic_detailed(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  const int n = cfg.size;
  for (int index = 0; index < cfg.count; ++index) {
    Draw draw(mix(cfg.seed) ^ mix(static_cast<std::uint64_t>(index) + 1));
    const Geometry geo{(n - 1) / 2.0, (n - 1) / 2.0, 0.47 * n};

    // Optic disc on a random side; trees fan out from its rim toward the centre.
    const double side = draw.chance(0.5) ? 1.0 : -1.0;
    const double disc_c = geo.cx + side * draw.uniform(0.18, 0.26) * n;
    const double disc_r = geo.cy + draw.uniform(-0.08, 0.08) * n;
    const double disc_radius = 0.07 * n;
    const double toward_centre = side > 0 ? std::numbers::pi : 0.0;

    SynthSample s;
    s.artery = Mask(n, n, 0);
    s.vein = Mask(n, n, 0);
    Grid<double> artery_w(n, n, 0.0), vein_w(n, n, 0.0);
    // Arcades leave the disc upward and downward; veins sit between arteries.
    const double bases[2][6] = {{-65.0, 65.0, -20.0, 20.0, -110.0, 110.0},
                                {-30.0, 30.0, -95.0, 95.0, 0.0, 140.0}};
    // Trees alternate between classes so neither class claims all the room.
    for (int t = 0; t < cfg.trees_per_class; ++t) {
      for (int cls = 0; cls < 2; ++cls) {
        TreeBuilder b{cfg, geo, draw, cls == 0 ? &s.vein : &s.artery, Mask(n, n, 0),
                      Grid<double>(n, n, 0.0), 0.0, {}};
        const double base = bases[cls][t % 6];
        const double heading = toward_centre + side * (base + draw.uniform(-10.0, 10.0)) * kDeg;
        // Arcades bend back toward the horizontal.
        b.curl = -side * (base > 0 ? 1.0 : base < 0 ? -1.0 : 0.0) * draw.uniform(6.0, 14.0) * kDeg;
        const double lift = disc_radius + 3.0;
        b.root_at = [&](double h) {
          return Point{static_cast<int>(std::lround(disc_r + std::sin(h) * lift)),
                       static_cast<int>(std::lround(disc_c + std::cos(h) * lift))};
        };
        const double width = draw.uniform(0.55 * cfg.max_width, 0.85 * cfg.max_width);
        const double length = draw.uniform(0.28, 0.38) * n;
        b.grow(b.root_at(heading), heading, length, std::max(width, cfg.min_width), 0);
        bool any = false;
        for (auto v : b.tree.data()) any = any || v;
        if (!any) continue;
        Mask& target = cls == 0 ? s.artery : s.vein;
        Grid<double>& target_w = cls == 0 ? artery_w : vein_w;
        for (std::size_t i = 0; i < target.size(); ++i) {
          if (b.tree[i]) {
            target[i] = 1;
            target_w[i] = std::max(target_w[i], b.tree_width[i]);
          }
        }
        s.trees.push_back(std::move(b.tree));
      }
    }

    Mask fov(n, n, 0);
    LabelMap label(n, n, VesselClass::background);
    RgbImage rgb(n, n, Rgb{0, 0, 0});
    const double phase = draw.uniform(0.0, 2.0 * std::numbers::pi);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * n + c;
        const bool a = s.artery[i], v = s.vein[i];
        label[i] = a && v ? VesselClass::uncertain
                   : a    ? VesselClass::artery
                   : v    ? VesselClass::vein
                          : VesselClass::background;
        if (!geo.inside(r, c, 0.0)) continue;
        fov[i] = 1;
        const double dr = r - geo.cy, dc = c - geo.cx;
        const double rho = std::sqrt(dr * dr + dc * dc) / geo.radius;
        const double light = (1.0 - 0.3 * rho * rho) *
                             (1.0 + 0.05 * std::sin(3.0 * c / n + 2.0 * r / n + phase));
        std::array<double, 3> col = {205.0 * light, 110.0 * light, 60.0 * light};
        const double ddr = r - disc_r, ddc = c - disc_c;
        const double disc = std::exp(-2.0 * (ddr * ddr + ddc * ddc) / (disc_radius * disc_radius));
        const std::array<double, 3> disc_col = {250.0, 200.0, 140.0};
        for (int ch = 0; ch < 3; ++ch) col[ch] += disc * (disc_col[ch] - col[ch]);
        // Thin vessels are paler; veins are darker than arteries, most of all in red.
        auto shade = [](double w) { return 0.6 + 0.4 * std::min(1.0, w / 3.0); };
        std::array<double, 3> dark = {0, 0, 0};
        if (a) {
          const double f = cfg.vessel_contrast * shade(artery_w[i]);
          dark = {0.5 * f, f, 0.8 * f};
        }
        if (v) {
          const double f = (cfg.vessel_contrast + cfg.av_contrast) * shade(vein_w[i]);
          for (int ch = 0; ch < 3; ++ch) dark[ch] = std::max(dark[ch], (ch == 2 ? 0.8 : 1.0) * f);
        }
        for (int ch = 0; ch < 3; ++ch) {
          const double value = col[ch] * (1.0 - dark[ch]) + cfg.noise_sigma * draw.normal();
          rgb[i][ch] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
        }
      }
    }

    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", index);
    s.sample.source_id = id;
    s.sample.rgb = std::move(rgb);
    s.sample.fov_mask = std::move(fov);
    s.sample.label = std::move(label);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FundusSample> generate_synthetic(const SynthConfig& cfg) {
  std::vector<FundusSample> out;
  for (auto& s : generate_synthetic_detailed(cfg)) out.push_back(std::move(s.sample));
  return out;
}

}  // namespace avwnet
