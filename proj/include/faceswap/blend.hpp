#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "faceswap/error.hpp"
#include "faceswap/image.hpp"
#include "faceswap/render.hpp"

namespace faceswap {

enum class BlendMode { kPoisson, kPaste };

struct BlendOptions {
  bool mixed_gradients = false;
  double relative_tolerance = 1e-8;
  double absolute_tolerance = 1e-8;  // max-norm of the residual, intensity units
  int max_iterations = 10000;
};

struct BlendResult {
  Image image;
  std::vector<double> values;  // 3 per pixel, before rounding
  Mask domain;
  int iterations = 0;  // worst channel
  bool converged = true;
  std::string warning;
};

/// Mask eroded with a 4-neighborhood; pixels on the image border are
/// removed as well.
inline Mask erode(const Mask& m) {
  Mask out(m.width, m.height);
  for (int y = 1; y + 1 < m.height; ++y)
    for (int x = 1; x + 1 < m.width; ++x)
      out.at(x, y) = m.at(x, y) && m.at(x - 1, y) && m.at(x + 1, y) && m.at(x, y - 1) && m.at(x, y + 1);
  return out;
}

/// Unknown pixels: inside coverage and region, off the image border, and
/// with all four neighbors covered so the guidance field is defined on
/// the domain and its boundary.
inline Mask blend_domain(const RenderedLayer& fg, const Mask& region) {
  require_same_size(fg.width, fg.height, region.width, region.height, "blend_domain");
  Mask out = erode(fg.coverage_mask());
  for (std::size_t p = 0; p < out.labels.size(); ++p) out.labels[p] = out.labels[p] && region.labels[p];
  return out;
}

/// Seamless cloning: inside the domain the output's 5-point Laplacian
/// matches the guidance field (foreground gradients, or the larger of
/// foreground/target gradients in mixed mode), with the target as the
/// Dirichlet boundary. Solved per channel as a correction to the
/// foreground with conjugate gradients.
inline BlendResult poisson_blend(const RenderedLayer& fg, const Image& target, const Mask& region,
                                 const BlendOptions& opts = {}) {
  require_same_size(fg.width, fg.height, target.width, target.height, "poisson_blend");
  const int w = target.width, h = target.height;
  BlendResult res;
  res.domain = blend_domain(fg, region);
  res.values.resize(target.data.size());
  for (std::size_t i = 0; i < target.data.size(); ++i) res.values[i] = target.data[i];

  std::vector<std::int64_t> unknown(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::size_t> pixels;
  for (std::size_t p = 0; p < unknown.size(); ++p)
    if (res.domain.labels[p]) {
      unknown[p] = static_cast<std::int64_t>(pixels.size());
      pixels.push_back(p);
    }
  if (pixels.empty()) {
    res.image = target;
    res.warning = "blend domain is empty; output equals target";
    return res;
  }
  const std::size_t n = pixels.size();
  const std::ptrdiff_t offsets[4] = {-1, 1, -static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w)};

  // A x = sum over in-domain neighbors: 4 x_p - x_q.
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 4.0 * x[i];
      for (auto off : offsets) {
        const auto j = unknown[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(pixels[i]) + off)];
        if (j >= 0) acc -= x[static_cast<std::size_t>(j)];
      }
      out[i] = acc;
    }
  };

  std::vector<double> b(n), x(n), r(n), d(n), q(n);
  for (int c = 0; c < 3; ++c) {
    auto g = [&](std::size_t p) { return fg.color[3 * p + c]; };
    auto t = [&](std::size_t p) { return static_cast<double>(target.data[3 * p + c]); };
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = pixels[i];
      double acc = 0.0;
      for (auto off : offsets) {
        const auto qp = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off);
        double guide = g(p) - g(qp);
        if (opts.mixed_gradients && std::abs(t(p) - t(qp)) > std::abs(guide)) guide = t(p) - t(qp);
        // Guidance minus the Laplacian of the foreground itself, plus the
        // boundary mismatch for neighbors outside the domain.
        acc += guide - (g(p) - g(qp));
        if (unknown[qp] < 0) acc += t(qp) - g(qp);
      }
      b[i] = acc;
    }

    std::fill(x.begin(), x.end(), 0.0);
    double bb = 0.0;
    for (double v : b) bb += v * v;
    double rr = 0.0;
    auto done = [&] {
      double inf = 0.0;
      for (double v : r) inf = std::max(inf, std::abs(v));
      return std::sqrt(rr) <= opts.relative_tolerance * std::sqrt(bb) && inf <= opts.absolute_tolerance;
    };
    int it = 0;
    // The recurrence residual drifts from b - Ax, so every exit is checked
    // against the true residual and CG restarts from x if needed.
    for (bool restart = true; restart;) {
      apply(x, q);
      rr = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        r[i] = b[i] - q[i];
        rr += r[i] * r[i];
      }
      d = r;
      restart = false;
      if (done()) break;
      while (it < opts.max_iterations) {
        apply(d, q);
        double dq = 0.0;
        for (std::size_t i = 0; i < n; ++i) dq += d[i] * q[i];
        const double step = rr / dq;
        double rr_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          x[i] += step * d[i];
          r[i] -= step * q[i];
          rr_new += r[i] * r[i];
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        ++it;
        if (done()) {
          restart = true;
          break;
        }
        for (std::size_t i = 0; i < n; ++i) d[i] = r[i] + beta * d[i];
      }
      if (it >= opts.max_iterations && !restart) {
        res.converged = false;
        break;
      }
    }
    res.iterations = std::max(res.iterations, it);
    for (std::size_t i = 0; i < n; ++i) res.values[3 * pixels[i] + c] = g(pixels[i]) + x[i];
  }
  if (!res.converged) res.warning = "conjugate gradient hit the iteration cap";

  res.image = target;
  for (auto p : pixels)
    for (int c = 0; c < 3; ++c) res.image.data[3 * p + c] = quantize(res.values[3 * p + c]);
  return res;
}

}  // namespace faceswap
