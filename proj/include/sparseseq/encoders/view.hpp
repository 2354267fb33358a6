// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sparseseq/ingest/dataset.hpp"
#include "sparseseq/ingest/preprocess.hpp"
#include "sparseseq/numcore/tensor.hpp"

namespace sparseseq::enc {

/// How missing entries reach the recurrent cell.
///   flags   [x filled with 0; missing flag]        width 2D
///   mean    m x + (1 - m) x~                       width D
///   forward last observation, x~ before the first  width D
///   simple  [mean-filled x; m; delta]              width 3D
///   grud    raw x, m, delta, x~ for in-cell decay   gates see [x^; m], width 2D
enum class Scheme { flags, mean, forward, simple, grud };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);
std::size_t input_width(Scheme s, std::size_t n_vars);

/// Model inputs of one sample; all arrays row-major [length x ...].
struct SeriesView {
  std::size_t length = 0;
  std::vector<double> input;   // [length x width], empty for grud
  std::vector<double> values;  // observed value, 0 where missing
  std::vector<double> mask;    // 1 observed, 0 missing
  std::vector<double> delta;
  std::vector<double> x_tilde;  // empirical mean per (t, d)
  std::vector<double> x_last;   // last observation strictly before t, else x~
  std::vector<double> fill;     // value channel of the scheme (L1 target)
};

struct InputView {
  Scheme scheme = Scheme::flags;
  std::size_t n_vars = 0;
  std::size_t n_static = 0;
  std::size_t n_classes = 2;
  std::vector<SeriesView> series;
  std::vector<std::vector<double>> statics;
  std::vector<int> labels;

  std::size_t size() const noexcept { return series.size(); }
  std::size_t width() const { return input_width(scheme, n_vars); }
};

/// `normalized` must already be z-scored and `model_stats` expressed in the
/// same units (see ingest::normalized_view). Negative time gaps are rejected
/// by dataset validation upstream.
InputView impute_view(const ingest::TimeSeriesDataset& normalized,
                      const ingest::NormStats& model_stats, Scheme scheme);

/// One padded minibatch, laid out per time step as [batch x ...] tensors.
struct Batch {
  std::size_t size = 0;
  std::size_t steps = 0;
  std::size_t n_vars = 0;
  std::vector<std::size_t> lengths;
  bool ragged = false;

  std::vector<num::Tensor> input;  // [B x width], non-grud schemes
  std::vector<num::Tensor> values, mask, delta, x_tilde, x_last, fill;  // [B x D]
  num::Tensor statics;  // [B x S]
  std::vector<int> labels;
};

Batch make_batch(const InputView& view, const std::vector<std::size_t>& indices);

}  // namespace sparseseq::enc
