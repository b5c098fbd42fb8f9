// Copyright 2026 The tfalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "tfalign/alignment.hpp"
#include "tfalign/chunk.hpp"
#include "tfalign/errors.hpp"

namespace tfalign::dsp {

enum class TractDirection { horizontal, vertical };

inline TractDirection tract_direction_from_string(const std::string& s) {
  if (s == "horizontal") return TractDirection::horizontal;
  if (s == "vertical") return TractDirection::vertical;
  throw ConfigError("tract direction must be horizontal or vertical, got '" + s + "'");
}

inline std::string to_string(TractDirection d) {
  return d == TractDirection::horizontal ? "horizontal" : "vertical";
}

struct StructureSpec {
  int time_half_width = 40;  // w_t
  int scale_half_width = 3;  // w_s
  TractDirection direction = TractDirection::horizontal;

  void validate() const {
    if (time_half_width < 1 || scale_half_width < 1) {
      throw ConfigError("structure half-widths must be at least 1");
    }
  }

  // Looks w_t steps ahead and behind and w_s channels to either side.
  AlignmentParams feature_alignment() const {
    return {time_half_width, time_half_width, scale_half_width, scale_half_width};
  }

  Eigen::Index min_channels() const { return 2 * scale_half_width + 1; }
};

// Self-similarity score of every location whose full neighbourhood lies
// inside `x`. Column j of the result is centred on column j + w_t of `x`;
// rows within w_s of either edge are NaN.
//
// Horizontal: each row of the neighbourhood is correlated with itself w_t
// steps later. Vertical: each column is correlated with itself w_s channels
// higher. The score is 2 sum(a b) / sum(a^2 + b^2), which is 1 for a
// perfectly repeating pattern and 0 when the window has no energy.
inline MatrixD tract_scores(const MatrixD& x, const StructureSpec& spec) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index wt = spec.time_half_width;
  const Eigen::Index ws = spec.scale_half_width;
  if (rows < spec.min_channels()) {
    throw TooFewChannelsError("structure extraction needs at least " +
                              std::to_string(spec.min_channels()) + " channels, got " +
                              std::to_string(rows));
  }
  const Eigen::Index out_cols = std::max<Eigen::Index>(0, x.cols() - 2 * wt);
  MatrixD out = MatrixD::Constant(rows, out_cols, std::numeric_limits<double>::quiet_NaN());
  if (out_cols == 0) return out;

  // Per-row (horizontal) or per-row-pair (vertical) window sums, then a box
  // sum across the scale axis.
  MatrixD num(rows, out_cols);
  MatrixD den(rows, out_cols);
  if (spec.direction == TractDirection::horizontal) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index j = 0; j < out_cols; ++j) {
        double n = 0.0;
        double d = 0.0;
        for (Eigen::Index tau = 0; tau <= wt; ++tau) {
          const double a = x(r, j + tau);
          const double b = x(r, j + wt + tau);
          n += a * b;
          d += a * a + b * b;
        }
        num(r, j) = n;
        den(r, j) = d;
      }
    }
    for (Eigen::Index r = ws; r < rows - ws; ++r) {
      for (Eigen::Index j = 0; j < out_cols; ++j) {
        double n = 0.0;
        double d = 0.0;
        for (Eigen::Index k = r - ws; k <= r + ws; ++k) {
          n += num(k, j);
          d += den(k, j);
        }
        out(r, j) = d == 0.0 ? 0.0 : 2.0 * n / d;
      }
    }
  } else {
    for (Eigen::Index r = 0; r + ws < rows; ++r) {
      for (Eigen::Index j = 0; j < out_cols; ++j) {
        double n = 0.0;
        double d = 0.0;
        for (Eigen::Index c = j; c <= j + 2 * wt; ++c) {
          const double a = x(r, c);
          const double b = x(r + ws, c);
          n += a * b;
          d += a * a + b * b;
        }
        num(r, j) = n;
        den(r, j) = d;
      }
    }
    for (Eigen::Index r = ws; r < rows - ws; ++r) {
      for (Eigen::Index j = 0; j < out_cols; ++j) {
        double n = 0.0;
        double d = 0.0;
        for (Eigen::Index k = r - ws; k <= r; ++k) {
          n += num(k, j);
          d += den(k, j);
        }
        out(r, j) = d == 0.0 ? 0.0 : 2.0 * n / d;
      }
    }
  }
  return out;
}

// Keeps the last 2 w_t input columns so that consecutive chunks produce the
// same scores as one long input. After a reset the first and last w_t
// columns of the chunk have no score; otherwise the output lags the input
// by w_t columns and has the input's length.
class StreamingTractExtractor {
 public:
  explicit StreamingTractExtractor(StructureSpec spec) : spec_(spec) { spec_.validate(); }

  MatrixD process(const Matrix& e, bool reset) {
    const Eigen::Index hist = 2 * static_cast<Eigen::Index>(spec_.time_half_width);
    if (reset || history_.rows() != e.rows()) history_.resize(e.rows(), 0);
    MatrixD ext(e.rows(), history_.cols() + e.cols());
    ext.leftCols(history_.cols()) = history_;
    ext.rightCols(e.cols()) = e.cast<double>();
    MatrixD out = tract_scores(ext, spec_);
    const Eigen::Index keep = std::min(hist, ext.cols());
    history_ = ext.rightCols(keep);
    return out;
  }

  const StructureSpec& spec() const { return spec_; }

 private:
  StructureSpec spec_;
  MatrixD history_;
};

struct SigmoidParams {
  double theta = 0.0;
  double beta = 1.0;
};

// theta = mean + k std and beta = std over the finite cells of `scores`.
inline SigmoidParams calibrate_from_scores(const Matrix& scores, double k) {
  double sum = 0.0;
  std::uint64_t count = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double v = scores.data()[i];
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  }
  if (count < 2) throw NotACalibrationChunkError("calibration chunk has no valid structure scores");
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double v = scores.data()[i];
    if (std::isfinite(v)) sq += (v - mean) * (v - mean);
  }
  const double std_dev = std::sqrt(sq / static_cast<double>(count));
  if (!(std_dev > 0.0)) {
    throw NotACalibrationChunkError("calibration scores have zero spread");
  }
  return {mean + k * std_dev, std_dev};
}

}  // namespace tfalign::dsp
