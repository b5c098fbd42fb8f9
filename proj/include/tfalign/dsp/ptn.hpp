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
#include <cstdint>
#include <optional>
#include <vector>

#include "tfalign/chunk.hpp"
#include "tfalign/dsp/structure.hpp"
#include "tfalign/errors.hpp"

namespace tfalign::dsp {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// E_T = E * logistic((T - theta) / beta). Cells with a non-finite tract
// score become `invalid_fill` when given, NaN otherwise.
inline Matrix tonal_energy(const Matrix& energy, const Matrix& tract, const SigmoidParams& sigmoid,
                           std::optional<Sample> invalid_fill = std::nullopt) {
  if (energy.rows() != tract.rows() || energy.cols() != tract.cols()) {
    throw ShapeError("energy " + std::to_string(energy.rows()) + "x" +
                     std::to_string(energy.cols()) + " and tract " +
                     std::to_string(tract.rows()) + "x" + std::to_string(tract.cols()) +
                     " are not aligned");
  }
  Matrix out(energy.rows(), energy.cols());
  for (Eigen::Index i = 0; i < energy.size(); ++i) {
    const double t = tract.data()[i];
    if (!std::isfinite(t)) {
      out.data()[i] = invalid_fill.value_or(std::numeric_limits<Sample>::quiet_NaN());
      continue;
    }
    const double w = logistic((t - sigmoid.theta) / sigmoid.beta);
    out.data()[i] = static_cast<Sample>(static_cast<double>(energy.data()[i]) * w);
  }
  return out;
}

// One time x frequency block of the areal average.
struct BlockRecord {
  std::uint64_t segment = 0;   // chunk number that started the continuous run
  std::int64_t column = 0;     // first column of the block within the run
  std::int64_t columns = 0;    // block width, short only at the end of a run
  Eigen::Index row_lo = 0;
  Eigen::Index row_hi = 0;     // exclusive
  std::uint64_t valid = 0;     // finite cells that entered the means
  double mean_energy = 0.0;
  double mean_tonal = 0.0;
};

// Streaming NaN-aware block means over (block_t columns) x (block_f rows).
// A discontinuity closes the open blocks and starts a new run.
class ArealAverager {
 public:
  ArealAverager(int block_t, int block_f) : block_t_(block_t), block_f_(block_f) {
    if (block_t < 1 || block_f < 1) throw ConfigError("areal block size must be positive");
  }

  std::vector<BlockRecord> push(const Matrix& energy, const Matrix& tonal, std::uint64_t number,
                                bool discontinuous) {
    std::vector<BlockRecord> out;
    if (discontinuous || !started_) {
      flush_into(out);
      started_ = true;
      segment_ = number;
      run_column_ = 0;
    }
    if (bands_.empty() || rows_ != energy.rows()) {
      rows_ = energy.rows();
      bands_.assign(static_cast<std::size_t>((rows_ + block_f_ - 1) / block_f_), Acc{});
    }
    for (Eigen::Index c = 0; c < energy.cols(); ++c) {
      for (Eigen::Index r = 0; r < rows_; ++r) {
        const double e = energy(r, c);
        const double t = tonal(r, c);
        if (std::isfinite(e) && std::isfinite(t)) {
          Acc& a = bands_[static_cast<std::size_t>(r / block_f_)];
          a.energy += e;
          a.tonal += t;
          ++a.valid;
        }
      }
      ++block_cols_;
      ++run_column_;
      if (block_cols_ == block_t_) flush_into(out);
    }
    return out;
  }

  std::vector<BlockRecord> flush() {
    std::vector<BlockRecord> out;
    flush_into(out);
    return out;
  }

 private:
  struct Acc {
    double energy = 0.0;
    double tonal = 0.0;
    std::uint64_t valid = 0;
  };

  void flush_into(std::vector<BlockRecord>& out) {
    if (block_cols_ == 0) return;
    for (std::size_t b = 0; b < bands_.size(); ++b) {
      BlockRecord rec;
      rec.segment = segment_;
      rec.column = run_column_ - block_cols_;
      rec.columns = block_cols_;
      rec.row_lo = static_cast<Eigen::Index>(b) * block_f_;
      rec.row_hi = std::min<Eigen::Index>(rows_, rec.row_lo + block_f_);
      rec.valid = bands_[b].valid;
      const double n = static_cast<double>(bands_[b].valid);
      rec.mean_energy = bands_[b].valid ? bands_[b].energy / n : std::nan("");
      rec.mean_tonal = bands_[b].valid ? bands_[b].tonal / n : std::nan("");
      out.push_back(rec);
      bands_[b] = Acc{};
    }
    block_cols_ = 0;
  }

  int block_t_;
  int block_f_;
  bool started_ = false;
  std::uint64_t segment_ = 0;
  std::int64_t run_column_ = 0;
  std::int64_t block_cols_ = 0;
  Eigen::Index rows_ = 0;
  std::vector<Acc> bands_;
};

}  // namespace tfalign::dsp
