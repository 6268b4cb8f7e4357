#pragma once

#include "coreda/tensor.hpp"

namespace coreda {

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
};

void validate(const LossWeights& w);

// Scalar loss values of one step; `semi` is the labeled-target supervision
// used by the semi-supervised variant and stays 0 otherwise.
struct StepLosses {
  double sup_rel = 0.0;
  double sup_abs = 0.0;
  double cons_s = 0.0;
  double cons_t = 0.0;
  double semi = 0.0;
  double total = 0.0;
};

// |total - (alpha*(sup_rel + sup_abs + semi) + beta*cons_s + gamma*cons_t)|
double decomposition_gap(const StepLosses& s, const LossWeights& w);

// MSE between predicted deltas and the label differences y_s - y_e.
Tensor loss_sup_rel(const Tensor& delta_hat, const Tensor& y_s, const Tensor& y_e);

Tensor loss_sup_abs(const Tensor& y_e_hat, const Tensor& y_e);

// Gradients flow through both the reconstruction and the absolute branch.
Tensor loss_cons_source(const Tensor& y_s_recon, const Tensor& y_s_abs);

// The absolute predictions act as pseudo-labels: with use_stopgrad the
// gradient path through y_t_abs is severed.
Tensor loss_cons_target(const Tensor& y_t_recon, const Tensor& y_t_abs, bool use_stopgrad = true);

// Graph-side loss terms; undefined members are absent from the total.
struct LossTerms {
  Tensor sup_rel, sup_abs, cons_s, cons_t, semi;
};

// Terms marked dead are kept in the graph but enter the total with weight
// zero; backward across them is a bitwise no-op, which is what makes
// weight-zeroing equivalent to term deletion.
struct LossLiveness {
  bool sup_rel = true, sup_abs = true, cons_s = true, cons_t = true, semi = true;
};

Tensor total_loss(const LossTerms& terms, const LossWeights& w);
Tensor total_loss(const LossTerms& terms, const LossWeights& w, const LossLiveness& live);

StepLosses read_losses(const LossTerms& terms, const Tensor& total);

}  // namespace coreda
