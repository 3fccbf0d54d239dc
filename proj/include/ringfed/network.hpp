/*
 * Copyright 2026 RingFed Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <vector>

#include "ringfed/model.hpp"

namespace ringfed {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Terminal probabilities are clamped into the open interval so that float
/// sigmoid saturation can never emit an exact 0 or 1 (which would break the
/// log terms in the losses).
template <class Scalar>
constexpr Scalar prob_floor();
template <>
constexpr float prob_floor<float>() { return 1e-6f; }
template <>
constexpr double prob_floor<double>() { return 1e-12; }

namespace detail {

// Clamp that propagates NaN instead of masking it.
template <class Scalar>
inline Scalar clamp_keep_nan(Scalar v, Scalar lo, Scalar hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

template <class Scalar>
inline void im2col2d(const Tensor<Scalar>& in, Index k, MatRM<Scalar>& cols) {
  const Index cin = in.shape[0], h = in.shape[1], w = in.shape[2];
  const Index pad = k / 2;
  cols.resize(cin * k * k, h * w);
  const Scalar* src = in.data.data();
  for (Index c = 0; c < cin; ++c) {
    const Scalar* plane = src + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* row = cols.data() + ((c * k + ky) * k + kx) * h * w;
        for (Index y = 0; y < h; ++y) {
          const Index iy = y + ky - pad;
          if (iy < 0 || iy >= h) {
            std::fill(row + y * w, row + (y + 1) * w, Scalar(0));
            continue;
          }
          const Scalar* in_row = plane + iy * w;
          const Index dx = kx - pad;
          for (Index x = 0; x < w; ++x) {
            const Index ix = x + dx;
            row[y * w + x] = (ix < 0 || ix >= w) ? Scalar(0) : in_row[ix];
          }
        }
      }
    }
  }
}

template <class Scalar>
inline void col2im2d(const MatRM<Scalar>& dcols, Index cin, Index h, Index w, Index k,
                     Tensor<Scalar>& din) {
  const Index pad = k / 2;
  din = Tensor<Scalar>::zeros({cin, h, w});
  Scalar* dst = din.data.data();
  for (Index c = 0; c < cin; ++c) {
    Scalar* plane = dst + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* row = dcols.data() + ((c * k + ky) * k + kx) * h * w;
        for (Index y = 0; y < h; ++y) {
          const Index iy = y + ky - pad;
          if (iy < 0 || iy >= h) continue;
          Scalar* out_row = plane + iy * w;
          const Index dx = kx - pad;
          for (Index x = 0; x < w; ++x) {
            const Index ix = x + dx;
            if (ix >= 0 && ix < w) out_row[ix] += row[y * w + x];
          }
        }
      }
    }
  }
}

template <class Scalar>
inline void im2col3d(const Tensor<Scalar>& in, Index k, MatRM<Scalar>& cols) {
  const Index cin = in.shape[0], d = in.shape[1], h = in.shape[2], w = in.shape[3];
  const Index pad = k / 2, n = d * h * w;
  cols.resize(cin * k * k * k, n);
  for (Index c = 0; c < cin; ++c) {
    const Scalar* vol = in.data.data() + c * n;
    for (Index kz = 0; kz < k; ++kz)
      for (Index ky = 0; ky < k; ++ky)
        for (Index kx = 0; kx < k; ++kx) {
          Scalar* row = cols.data() + (((c * k + kz) * k + ky) * k + kx) * n;
          for (Index z = 0; z < d; ++z) {
            const Index iz = z + kz - pad;
            for (Index y = 0; y < h; ++y) {
              const Index iy = y + ky - pad;
              Scalar* out_row = row + (z * h + y) * w;
              if (iz < 0 || iz >= d || iy < 0 || iy >= h) {
                std::fill(out_row, out_row + w, Scalar(0));
                continue;
              }
              const Scalar* in_row = vol + (iz * h + iy) * w;
              const Index dx = kx - pad;
              for (Index x = 0; x < w; ++x) {
                const Index ix = x + dx;
                out_row[x] = (ix < 0 || ix >= w) ? Scalar(0) : in_row[ix];
              }
            }
          }
        }
  }
}

template <class Scalar>
inline void col2im3d(const MatRM<Scalar>& dcols, const std::vector<Index>& in_shape, Index k,
                     Tensor<Scalar>& din) {
  const Index cin = in_shape[0], d = in_shape[1], h = in_shape[2], w = in_shape[3];
  const Index pad = k / 2, n = d * h * w;
  din = Tensor<Scalar>::zeros(in_shape);
  for (Index c = 0; c < cin; ++c) {
    Scalar* vol = din.data.data() + c * n;
    for (Index kz = 0; kz < k; ++kz)
      for (Index ky = 0; ky < k; ++ky)
        for (Index kx = 0; kx < k; ++kx) {
          const Scalar* row = dcols.data() + (((c * k + kz) * k + ky) * k + kx) * n;
          for (Index z = 0; z < d; ++z) {
            const Index iz = z + kz - pad;
            if (iz < 0 || iz >= d) continue;
            for (Index y = 0; y < h; ++y) {
              const Index iy = y + ky - pad;
              if (iy < 0 || iy >= h) continue;
              Scalar* out_row = vol + (iz * h + iy) * w;
              const Scalar* g_row = row + (z * h + y) * w;
              const Index dx = kx - pad;
              for (Index x = 0; x < w; ++x) {
                const Index ix = x + dx;
                if (ix >= 0 && ix < w) out_row[ix] += g_row[x];
              }
            }
          }
        }
  }
}

}  // namespace detail

/// Per-layer record of whatever backward needs.
template <class Scalar>
struct LayerTrace {
  Tensor<Scalar> input;      // stream value consumed by the layer
  Tensor<Scalar> lr_input;   // concat only
  Tensor<Scalar> output;     // sigmoid only (activation reused by backward)
};

template <class Scalar>
struct Tape {
  std::vector<LayerTrace<Scalar>> records;
  Tensor<Scalar> output;
  bool valid = false;
};

// ---------------------------------------------------------------------------
// per-layer forward
// ---------------------------------------------------------------------------

template <class Scalar>
Tensor<Scalar> dense_forward(const LayerSpec& l, const Scalar* p, const Tensor<Scalar>& in) {
  const Index nin = l.dims[0], nout = l.dims[1];
  if (in.size() != nin) throw ShapeError("dense: input size mismatch");
  Eigen::Map<const MatRM<Scalar>> w(p, nout, nin);
  Eigen::Map<const ColVec<Scalar>> b(p + nin * nout, nout);
  Tensor<Scalar> out = Tensor<Scalar>::zeros({nout});
  Eigen::Map<ColVec<Scalar>>(out.data.data(), nout).noalias() =
      w * Eigen::Map<const ColVec<Scalar>>(in.data.data(), nin) + b;
  return out;
}

template <class Scalar>
Tensor<Scalar> conv_forward(const LayerSpec& l, const Scalar* p, const Tensor<Scalar>& in) {
  const Index cin = l.dims[0], cout = l.dims[1], k = l.dims[2];
  const bool is3d = l.kind == LayerKind::Conv3d;
  if (in.shape[0] != cin) throw ShapeError("conv: channel mismatch");
  MatRM<Scalar> cols;
  if (is3d)
    detail::im2col3d(in, k, cols);
  else
    detail::im2col2d(in, k, cols);
  const Index kk = cols.rows(), n = cols.cols();
  Eigen::Map<const MatRM<Scalar>> w(p, cout, kk);
  Eigen::Map<const ColVec<Scalar>> b(p + cout * kk, cout);
  std::vector<Index> out_shape = in.shape;
  out_shape[0] = cout;
  Tensor<Scalar> out = Tensor<Scalar>::zeros(out_shape);
  Eigen::Map<MatRM<Scalar>> om(out.data.data(), cout, n);
  om.noalias() = w * cols;
  om.colwise() += b;
  return out;
}

template <class Scalar>
Tensor<Scalar> downsample_avg_forward(const LayerSpec& l, const Tensor<Scalar>& in) {
  const Index f = l.dims[0];
  std::vector<Index> out_shape = output_shape(l, in.shape);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(out_shape);
  const Index c = in.shape[0];
  if (in.rank() == 3) {
    const Index h = in.shape[1], w = in.shape[2], oh = out_shape[1], ow = out_shape[2];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oy = 0; oy < oh; ++oy) {
        const Index y0 = oy * f, y1 = std::min(y0 + f, h);
        for (Index ox = 0; ox < ow; ++ox) {
          const Index x0 = ox * f, x1 = std::min(x0 + f, w);
          Scalar s = 0;
          for (Index y = y0; y < y1; ++y)
            for (Index x = x0; x < x1; ++x) s += in.data[(ch * h + y) * w + x];
          out.data[(ch * oh + oy) * ow + ox] = s / Scalar((y1 - y0) * (x1 - x0));
        }
      }
  } else {
    const Index d = in.shape[1], h = in.shape[2], w = in.shape[3];
    const Index od = out_shape[1], oh = out_shape[2], ow = out_shape[3];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oz = 0; oz < od; ++oz) {
        const Index z0 = oz * f, z1 = std::min(z0 + f, d);
        for (Index oy = 0; oy < oh; ++oy) {
          const Index y0 = oy * f, y1 = std::min(y0 + f, h);
          for (Index ox = 0; ox < ow; ++ox) {
            const Index x0 = ox * f, x1 = std::min(x0 + f, w);
            Scalar s = 0;
            for (Index z = z0; z < z1; ++z)
              for (Index y = y0; y < y1; ++y)
                for (Index x = x0; x < x1; ++x) s += in.data[((ch * d + z) * h + y) * w + x];
            out.data[((ch * od + oz) * oh + oy) * ow + ox] =
                s / Scalar((z1 - z0) * (y1 - y0) * (x1 - x0));
          }
        }
      }
  }
  return out;
}

template <class Scalar>
Tensor<Scalar> upsample_nearest_forward(const LayerSpec& l, const Tensor<Scalar>& in) {
  const Index f = l.dims[0];
  std::vector<Index> out_shape = output_shape(l, in.shape);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(out_shape);
  const Index c = in.shape[0];
  if (in.rank() == 3) {
    const Index h = in.shape[1], w = in.shape[2], oh = out_shape[1], ow = out_shape[2];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox)
          out.data[(ch * oh + oy) * ow + ox] = in.data[(ch * h + oy / f) * w + ox / f];
  } else {
    const Index d = in.shape[1], h = in.shape[2], w = in.shape[3];
    const Index od = out_shape[1], oh = out_shape[2], ow = out_shape[3];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oz = 0; oz < od; ++oz)
        for (Index oy = 0; oy < oh; ++oy)
          for (Index ox = 0; ox < ow; ++ox)
            out.data[((ch * od + oz) * oh + oy) * ow + ox] =
                in.data[((ch * d + oz / f) * h + oy / f) * w + ox / f];
  }
  return out;
}

/// Channel concat; the low-res operand is cropped from the origin down to the
/// normal-res spatial extents (upsampling by a non-divisor factor overshoots).
template <class Scalar>
Tensor<Scalar> concat_forward(const Tensor<Scalar>& nr, const Tensor<Scalar>& lr) {
  if (nr.rank() != lr.rank()) throw ShapeError("concat: rank mismatch");
  for (Index i = 1; i < nr.rank(); ++i)
    if (lr.shape[i] < nr.shape[i]) throw ShapeError("concat: low-res stream smaller than normal-res");
  std::vector<Index> out_shape = nr.shape;
  out_shape[0] = nr.shape[0] + lr.shape[0];
  Tensor<Scalar> out = Tensor<Scalar>::zeros(out_shape);
  out.data.head(nr.size()) = nr.data;
  const Index c2 = lr.shape[0];
  if (nr.rank() == 3) {
    const Index h = nr.shape[1], w = nr.shape[2], lh = lr.shape[1], lw = lr.shape[2];
    Scalar* dst = out.data.data() + nr.size();
    for (Index ch = 0; ch < c2; ++ch)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) dst[(ch * h + y) * w + x] = lr.data[(ch * lh + y) * lw + x];
  } else {
    const Index d = nr.shape[1], h = nr.shape[2], w = nr.shape[3];
    const Index ld = lr.shape[1], lh = lr.shape[2], lw = lr.shape[3];
    Scalar* dst = out.data.data() + nr.size();
    for (Index ch = 0; ch < c2; ++ch)
      for (Index z = 0; z < d; ++z)
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x)
            dst[((ch * d + z) * h + y) * w + x] = lr.data[((ch * ld + z) * lh + y) * lw + x];
  }
  return out;
}

// ---------------------------------------------------------------------------
// whole-net forward / backward
// ---------------------------------------------------------------------------

/// Runs the two-stream interpreter and records a tape for backward.
/// Deterministic given (model, input); throws NumericalError if the output
/// picks up a NaN/Inf.
template <class Scalar>
Tape<Scalar> net_forward(const ModelState<Scalar>& m, const Tensor<Scalar>& input) {
  Tape<Scalar> tape;
  tape.records.resize(m.layers.size());
  Tensor<Scalar> nr = input;
  Tensor<Scalar> lr;
  bool lr_started = false;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    const Scalar* p = m.theta.data() + m.offsets[i];
    LayerTrace<Scalar>& rec = tape.records[i];
    if (l.kind == LayerKind::Concat) {
      if (!lr_started) throw ShapeError("concat without a low-res stream");
      rec.input = nr;
      rec.lr_input = lr;
      nr = concat_forward(nr, lr);
      continue;
    }
    Tensor<Scalar>& s = (l.pathway == Pathway::LowRes) ? lr : nr;
    if (l.pathway == Pathway::LowRes && !lr_started) {
      lr = input;
      lr_started = true;
    }
    rec.input = s;
    switch (l.kind) {
      case LayerKind::Dense:
        s = dense_forward(l, p, s);
        break;
      case LayerKind::Conv2d:
      case LayerKind::Conv3d:
        s = conv_forward(l, p, s);
        break;
      case LayerKind::Relu:
        s = Tensor<Scalar>{s.shape, s.data.max(Scalar(0))};
        break;
      case LayerKind::Sigmoid: {
        const Scalar lo = prob_floor<Scalar>(), hi = Scalar(1) - prob_floor<Scalar>();
        VecX<Scalar> v(s.size());
        for (Index j = 0; j < s.size(); ++j)
          v[j] = detail::clamp_keep_nan(Scalar(1) / (Scalar(1) + std::exp(-s.data[j])), lo, hi);
        s = Tensor<Scalar>{s.shape, std::move(v)};
        rec.output = s;
        break;
      }
      case LayerKind::DownsampleAvg:
        s = downsample_avg_forward(l, s);
        break;
      case LayerKind::UpsampleNearest:
        s = upsample_nearest_forward(l, s);
        break;
      case LayerKind::Concat:
        break;  // handled above
    }
  }
  require_finite(nr, "forward output");
  tape.output = nr;
  tape.valid = true;
  return tape;
}

namespace detail {

template <class Scalar>
Tensor<Scalar> dense_backward(const LayerSpec& l, const Scalar* p, const LayerTrace<Scalar>& rec,
                              const Tensor<Scalar>& dout, Scalar* gseg) {
  const Index nin = l.dims[0], nout = l.dims[1];
  Eigen::Map<const MatRM<Scalar>> w(p, nout, nin);
  Eigen::Map<const ColVec<Scalar>> dy(dout.data.data(), nout);
  Eigen::Map<const ColVec<Scalar>> x(rec.input.data.data(), nin);
  Eigen::Map<MatRM<Scalar>> dw(gseg, nout, nin);
  Eigen::Map<ColVec<Scalar>> db(gseg + nin * nout, nout);
  dw.noalias() += dy * x.transpose();
  db += dy;
  Tensor<Scalar> din = Tensor<Scalar>::zeros(rec.input.shape);
  Eigen::Map<ColVec<Scalar>>(din.data.data(), nin).noalias() = w.transpose() * dy;
  return din;
}

template <class Scalar>
Tensor<Scalar> conv_backward(const LayerSpec& l, const Scalar* p, const LayerTrace<Scalar>& rec,
                             const Tensor<Scalar>& dout, Scalar* gseg) {
  const Index cin = l.dims[0], cout = l.dims[1], k = l.dims[2];
  const bool is3d = l.kind == LayerKind::Conv3d;
  MatRM<Scalar> cols;  // rebuilt from the recorded input; cheaper than storing it
  if (is3d)
    im2col3d(rec.input, k, cols);
  else
    im2col2d(rec.input, k, cols);
  const Index kk = cols.rows(), n = cols.cols();
  Eigen::Map<const MatRM<Scalar>> dy(dout.data.data(), cout, n);
  Eigen::Map<MatRM<Scalar>> dw(gseg, cout, kk);
  Eigen::Map<ColVec<Scalar>> db(gseg + cout * kk, cout);
  dw.noalias() += dy * cols.transpose();
  db += dy.rowwise().sum();
  Eigen::Map<const MatRM<Scalar>> w(p, cout, kk);
  MatRM<Scalar> dcols(kk, n);
  dcols.noalias() = w.transpose() * dy;
  Tensor<Scalar> din;
  if (is3d)
    col2im3d(dcols, rec.input.shape, k, din);
  else
    col2im2d(dcols, cin, rec.input.shape[1], rec.input.shape[2], k, din);
  return din;
}

template <class Scalar>
Tensor<Scalar> downsample_avg_backward(const LayerSpec& l, const LayerTrace<Scalar>& rec,
                                       const Tensor<Scalar>& dout) {
  const Index f = l.dims[0];
  const auto& in_shape = rec.input.shape;
  Tensor<Scalar> din = Tensor<Scalar>::zeros(in_shape);
  const Index c = in_shape[0];
  if (rec.input.rank() == 3) {
    const Index h = in_shape[1], w = in_shape[2], oh = dout.shape[1], ow = dout.shape[2];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oy = 0; oy < oh; ++oy) {
        const Index y0 = oy * f, y1 = std::min(y0 + f, h);
        for (Index ox = 0; ox < ow; ++ox) {
          const Index x0 = ox * f, x1 = std::min(x0 + f, w);
          const Scalar g = dout.data[(ch * oh + oy) * ow + ox] / Scalar((y1 - y0) * (x1 - x0));
          for (Index y = y0; y < y1; ++y)
            for (Index x = x0; x < x1; ++x) din.data[(ch * h + y) * w + x] += g;
        }
      }
  } else {
    const Index d = in_shape[1], h = in_shape[2], w = in_shape[3];
    const Index od = dout.shape[1], oh = dout.shape[2], ow = dout.shape[3];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oz = 0; oz < od; ++oz) {
        const Index z0 = oz * f, z1 = std::min(z0 + f, d);
        for (Index oy = 0; oy < oh; ++oy) {
          const Index y0 = oy * f, y1 = std::min(y0 + f, h);
          for (Index ox = 0; ox < ow; ++ox) {
            const Index x0 = ox * f, x1 = std::min(x0 + f, w);
            const Scalar g = dout.data[((ch * od + oz) * oh + oy) * ow + ox] /
                             Scalar((z1 - z0) * (y1 - y0) * (x1 - x0));
            for (Index z = z0; z < z1; ++z)
              for (Index y = y0; y < y1; ++y)
                for (Index x = x0; x < x1; ++x) din.data[((ch * d + z) * h + y) * w + x] += g;
          }
        }
      }
  }
  return din;
}

template <class Scalar>
Tensor<Scalar> upsample_nearest_backward(const LayerSpec& l, const LayerTrace<Scalar>& rec,
                                         const Tensor<Scalar>& dout) {
  const Index f = l.dims[0];
  Tensor<Scalar> din = Tensor<Scalar>::zeros(rec.input.shape);
  const Index c = rec.input.shape[0];
  if (rec.input.rank() == 3) {
    const Index h = rec.input.shape[1], w = rec.input.shape[2];
    const Index oh = dout.shape[1], ow = dout.shape[2];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox)
          din.data[(ch * h + oy / f) * w + ox / f] += dout.data[(ch * oh + oy) * ow + ox];
  } else {
    const Index d = rec.input.shape[1], h = rec.input.shape[2], w = rec.input.shape[3];
    const Index od = dout.shape[1], oh = dout.shape[2], ow = dout.shape[3];
    for (Index ch = 0; ch < c; ++ch)
      for (Index oz = 0; oz < od; ++oz)
        for (Index oy = 0; oy < oh; ++oy)
          for (Index ox = 0; ox < ow; ++ox)
            din.data[((ch * d + oz / f) * h + oy / f) * w + ox / f] +=
                dout.data[((ch * od + oz) * oh + oy) * ow + ox];
  }
  return din;
}

template <class Scalar>
void concat_backward(const LayerTrace<Scalar>& rec, const Tensor<Scalar>& dout,
                     Tensor<Scalar>& dnr, Tensor<Scalar>& dlr) {
  const Tensor<Scalar>& nr = rec.input;
  const Tensor<Scalar>& lr = rec.lr_input;
  dnr = Tensor<Scalar>::zeros(nr.shape);
  dnr.data = dout.data.head(nr.size());
  dlr = Tensor<Scalar>::zeros(lr.shape);  // zero outside the cropped window
  const Index c2 = lr.shape[0];
  const Scalar* src = dout.data.data() + nr.size();
  if (nr.rank() == 3) {
    const Index h = nr.shape[1], w = nr.shape[2], lh = lr.shape[1], lw = lr.shape[2];
    for (Index ch = 0; ch < c2; ++ch)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) dlr.data[(ch * lh + y) * lw + x] = src[(ch * h + y) * w + x];
  } else {
    const Index d = nr.shape[1], h = nr.shape[2], w = nr.shape[3];
    const Index ld = lr.shape[1], lh = lr.shape[2], lw = lr.shape[3];
    for (Index ch = 0; ch < c2; ++ch)
      for (Index z = 0; z < d; ++z)
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x)
            dlr.data[((ch * ld + z) * lh + y) * lw + x] = src[((ch * d + z) * h + y) * w + x];
  }
}

}  // namespace detail

/// Reverse pass over a recorded tape. Accumulates the parameter gradient into
/// `grad` (callers zero it or accumulate across a batch) and consumes the
/// tape. `upstream` is dL/d(output).
template <class Scalar>
void net_backward(const ModelState<Scalar>& m, Tape<Scalar>& tape, const Tensor<Scalar>& upstream,
                  VecX<Scalar>& grad) {
  if (!tape.valid) throw ShapeError("backward without a recorded forward");
  if (upstream.shape != tape.output.shape) throw ShapeError("backward: upstream shape mismatch");
  if (grad.size() != m.param_size()) throw ShapeError("backward: gradient buffer size mismatch");
  tape.valid = false;
  Tensor<Scalar> d_nr = upstream;
  Tensor<Scalar> d_lr;
  for (std::size_t ri = m.layers.size(); ri-- > 0;) {
    const LayerSpec& l = m.layers[ri];
    const Scalar* p = m.theta.data() + m.offsets[ri];
    Scalar* gseg = grad.data() + m.offsets[ri];
    const LayerTrace<Scalar>& rec = tape.records[ri];
    if (l.kind == LayerKind::Concat) {
      Tensor<Scalar> dnr_new;
      detail::concat_backward(rec, d_nr, dnr_new, d_lr);
      d_nr = std::move(dnr_new);
      continue;
    }
    Tensor<Scalar>& d = (l.pathway == Pathway::LowRes) ? d_lr : d_nr;
    switch (l.kind) {
      case LayerKind::Dense:
        d = detail::dense_backward(l, p, rec, d, gseg);
        break;
      case LayerKind::Conv2d:
      case LayerKind::Conv3d:
        d = detail::conv_backward(l, p, rec, d, gseg);
        break;
      case LayerKind::Relu:
        d = Tensor<Scalar>{rec.input.shape,
                           (rec.input.data > Scalar(0)).select(d.data, VecX<Scalar>::Zero(d.size()))};
        break;
      case LayerKind::Sigmoid:
        d = Tensor<Scalar>{rec.input.shape,
                           d.data * rec.output.data * (Scalar(1) - rec.output.data)};
        break;
      case LayerKind::DownsampleAvg:
        d = detail::downsample_avg_backward(l, rec, d);
        break;
      case LayerKind::UpsampleNearest:
        d = detail::upsample_nearest_backward(l, rec, d);
        break;
      case LayerKind::Concat:
        break;
    }
  }
  require_finite(grad, "backward gradient");
}

/// Convenience single-call gradient: zeroes a fresh buffer, runs one item.
template <class Scalar>
VecX<Scalar> net_backward(const ModelState<Scalar>& m, Tape<Scalar>& tape,
                          const Tensor<Scalar>& upstream) {
  VecX<Scalar> g = VecX<Scalar>::Zero(m.param_size());
  net_backward(m, tape, upstream, g);
  return g;
}

}  // namespace ringfed
