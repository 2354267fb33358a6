// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/encoders/view.hpp"

#include <algorithm>

#include "sparseseq/errors.hpp"

namespace sparseseq::enc {

using num::Tensor;

Scheme parse_scheme(const std::string& name) {
  if (name == "flags") return Scheme::flags;
  if (name == "mean") return Scheme::mean;
  if (name == "forward") return Scheme::forward;
  if (name == "simple") return Scheme::simple;
  if (name == "grud") return Scheme::grud;
  throw ConfigError("unknown input scheme '" + name + "' (flags|mean|forward|simple|grud)");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::flags: return "flags";
    case Scheme::mean: return "mean";
    case Scheme::forward: return "forward";
    case Scheme::simple: return "simple";
    case Scheme::grud: return "grud";
  }
  return "?";
}

std::size_t input_width(Scheme s, std::size_t n_vars) {
  switch (s) {
    case Scheme::mean:
    case Scheme::forward: return n_vars;
    case Scheme::flags:
    case Scheme::grud: return 2 * n_vars;
    case Scheme::simple: return 3 * n_vars;
  }
  return 0;
}

InputView impute_view(const ingest::TimeSeriesDataset& normalized,
                      const ingest::NormStats& model_stats, Scheme scheme) {
  const std::size_t d = normalized.n_vars();
  if (model_stats.n_vars() != d) {
    throw DimensionError("impute_view: stats cover " + std::to_string(model_stats.n_vars()) +
                         " variables, dataset has " + std::to_string(d));
  }
  InputView view;
  view.scheme = scheme;
  view.n_vars = d;
  view.n_static = normalized.n_static;
  view.n_classes = normalized.n_classes;
  const std::size_t w = view.width();

  for (const ingest::Sample& s : normalized.samples) {
    SeriesView v;
    const std::size_t len = s.length();
    v.length = len;
    v.values.assign(len * d, 0.0);
    v.mask.assign(len * d, 0.0);
    v.x_tilde.resize(len * d);
    v.x_last.resize(len * d);
    v.fill.resize(len * d);
    v.delta = ingest::compute_deltas(s, d);

    std::vector<double> last(d);
    std::vector<bool> seen(d, false);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < d; ++k) {
        const std::size_t i = t * d + k;
        const double xt = model_stats.empirical_mean(t, k);
        v.x_tilde[i] = xt;
        v.x_last[i] = seen[k] ? last[k] : xt;
        if (s.mask[i]) {
          v.values[i] = s.values[i];
          v.mask[i] = 1.0;
          last[k] = s.values[i];
          seen[k] = true;
        }
        const double mean_fill = s.mask[i] ? s.values[i] : xt;
        switch (scheme) {
          case Scheme::flags: v.fill[i] = v.values[i]; break;
          case Scheme::forward: v.fill[i] = s.mask[i] ? s.values[i] : v.x_last[i]; break;
          default: v.fill[i] = mean_fill; break;
        }
      }
    }

    if (scheme != Scheme::grud) {
      v.input.assign(len * w, 0.0);
      for (std::size_t t = 0; t < len; ++t) {
        double* row = v.input.data() + t * w;
        for (std::size_t k = 0; k < d; ++k) {
          const std::size_t i = t * d + k;
          row[k] = v.fill[i];
          if (scheme == Scheme::flags) row[d + k] = 1.0 - v.mask[i];
          if (scheme == Scheme::simple) {
            row[d + k] = v.mask[i];
            row[2 * d + k] = v.delta[i];
          }
        }
      }
    }
    view.series.push_back(std::move(v));
    view.statics.push_back(s.static_features);
    view.labels.push_back(s.label);
  }
  return view;
}

Batch make_batch(const InputView& view, const std::vector<std::size_t>& indices) {
  Batch b;
  b.size = indices.size();
  b.n_vars = view.n_vars;
  const std::size_t d = view.n_vars, w = view.width(), bs = b.size;
  for (std::size_t i : indices) {
    const std::size_t len = view.series.at(i).length;
    b.lengths.push_back(len);
    b.steps = std::max(b.steps, len);
  }
  for (std::size_t len : b.lengths) b.ragged = b.ragged || len != b.steps;

  const bool grud = view.scheme == Scheme::grud;
  auto per_step = [&](std::size_t cols) {
    return std::vector<Tensor>(b.steps, Tensor({bs, cols}));
  };
  if (!grud) b.input = per_step(w);
  b.values = per_step(d);
  b.mask = per_step(d);
  b.fill = per_step(d);
  if (grud) {
    b.delta = per_step(d);
    b.x_tilde = per_step(d);
    b.x_last = per_step(d);
  }

  for (std::size_t r = 0; r < bs; ++r) {
    const SeriesView& v = view.series[indices[r]];
    for (std::size_t t = 0; t < v.length; ++t) {
      if (!grud) std::copy_n(v.input.data() + t * w, w, b.input[t].raw() + r * w);
      auto put = [&](std::vector<Tensor>& dst, const std::vector<double>& src) {
        std::copy_n(src.data() + t * d, d, dst[t].raw() + r * d);
      };
      put(b.values, v.values);
      put(b.mask, v.mask);
      put(b.fill, v.fill);
      if (grud) {
        put(b.delta, v.delta);
        put(b.x_tilde, v.x_tilde);
        put(b.x_last, v.x_last);
      }
    }
  }

  b.statics = Tensor({bs, view.n_static});
  for (std::size_t r = 0; r < bs; ++r) {
    const auto& st = view.statics[indices[r]];
    std::copy(st.begin(), st.end(), b.statics.raw() + r * view.n_static);
    b.labels.push_back(view.labels[indices[r]]);
  }
  return b;
}

}  // namespace sparseseq::enc
