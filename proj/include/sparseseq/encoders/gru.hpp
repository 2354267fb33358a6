// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sparseseq/encoders/view.hpp"
#include "sparseseq/numcore/autodiff.hpp"
#include "sparseseq/numcore/params.hpp"
#include "sparseseq/numcore/rng.hpp"

// GRU (Cho et al. form) and GRU-D cells.
//
//   z  = sigmoid(x Wz + h Uz + bz)
//   r  = sigmoid(x Wr + h Ur + br)
//   h~ = tanh(x Wh + (r * h) Uh + bh)
//   h' = (1 - z) h + z h~
//
// Gate matrices are stored fused: W = [Wz Wr Wh] (I x 3H), U_zr = [Uz Ur]
// (H x 2H), U_h (H x H), b (1 x 3H).
//
// GRU-D adds, per step with time gaps delta:
//   gx = exp(-relu(delta * wx + bx))         (diagonal, per variable)
//   x^ = m x + (1 - m)(gx x_last + (1 - gx) x~)
//   gh = exp(-relu(delta Wgh + bgh))
// and runs the GRU update on input [x^; m] from the decayed state gh * h.

namespace sparseseq::enc {

enum class Family { gru, grud };

Family parse_family(const std::string& name);
std::string to_string(Family f);

struct EncoderConfig {
  Family family = Family::gru;
  Scheme scheme = Scheme::flags;
  std::size_t n_vars = 2;
  std::size_t hidden = 64;
  double dropout = 0.0;            // on the encoder output fed to the classifier
  double recurrent_dropout = 0.0;  // variational mask on the hidden-to-hidden input
  bool per_position_mean = false;  // x~ per (time position, variable)

  std::size_t input_width() const { return enc::input_width(scheme, n_vars); }
  /// Throws ConfigError when family and scheme disagree or sizes are zero.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static EncoderConfig from_json(const nlohmann::ordered_json& j);
};

/// Glorot-uniform matrices (per gate block), zero biases. Names start "encoder.".
num::ParameterSet init_encoder(const EncoderConfig& cfg, num::Rng& rng);

/// Graph leaves of an encoder's parameters.
struct GruVars {
  num::Var W, U_zr, U_h, b;
  // GRU-D only
  num::Var gx_w, gx_b, gh_w, gh_b;
};

GruVars bind_encoder(num::Graph& g, num::ParameterSet& params, const EncoderConfig& cfg);

/// One GRU update. `rec_mask` (B x H), when given, scales the hidden state on
/// its way into the recurrent products.
num::Var gru_step(num::Var h_prev, num::Var x, const GruVars& w,
                  const num::Tensor* rec_mask = nullptr);

struct GruDStep {
  num::Var h;
  num::Tensor x_last;  // updated where m = 1
  num::Var x_hat;
};

/// One GRU-D update. x holds raw values (ignored where m = 0). Throws
/// ContractError on a negative delta.
GruDStep gru_d_step(num::Var h_prev, const num::Tensor& x, const num::Tensor& m,
                    const num::Tensor& delta, const num::Tensor& x_last,
                    const num::Tensor& x_tilde, const GruVars& w,
                    const num::Tensor* rec_mask = nullptr);

struct EncodeOptions {
  bool training = false;
  num::Rng* rng = nullptr;  // recurrent dropout masks, training only
  bool keep_states = false;
};

struct Encoded {
  num::Var final;                // [B x H], state at each sample's length
  std::vector<num::Var> states;  // h_1..h_T when keep_states
};

/// h_0 = 0. Past a sample's length its state is carried unchanged.
Encoded encode(num::Graph& g, const GruVars& w, const EncoderConfig& cfg, const Batch& batch,
               const EncodeOptions& opts = {});

/// Inverted-dropout mask of shape rows x cols with keep-probability 1 - rate.
num::Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, num::Rng& rng);

}  // namespace sparseseq::enc
