#include "coreda/losses.hpp"

#include <cmath>

#include "coreda/errors.hpp"

namespace coreda {

void validate(const LossWeights& w) {
  if (w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0) {
    throw ContractError("loss weights must be nonnegative");
  }
}

double decomposition_gap(const StepLosses& s, const LossWeights& w) {
  const double expected =
      w.alpha * (s.sup_rel + s.sup_abs + s.semi) + w.beta * s.cons_s + w.gamma * s.cons_t;
  return std::fabs(s.total - expected);
}

Tensor loss_sup_rel(const Tensor& delta_hat, const Tensor& y_s, const Tensor& y_e) {
  return mse(delta_hat, sub(y_s, y_e));
}

Tensor loss_sup_abs(const Tensor& y_e_hat, const Tensor& y_e) { return mse(y_e_hat, y_e); }

Tensor loss_cons_source(const Tensor& y_s_recon, const Tensor& y_s_abs) {
  return mse(y_s_recon, y_s_abs);
}

Tensor loss_cons_target(const Tensor& y_t_recon, const Tensor& y_t_abs, bool use_stopgrad) {
  return mse(y_t_recon, use_stopgrad ? detach(y_t_abs) : y_t_abs);
}

Tensor total_loss(const LossTerms& terms, const LossWeights& w) {
  return total_loss(terms, w, LossLiveness{});
}

Tensor total_loss(const LossTerms& terms, const LossWeights& w, const LossLiveness& live) {
  validate(w);

  // Assembly order is fixed so graphs that share terms build identical
  // prefixes: supervised pair, source consistency, target consistency,
  // labeled-target supervision.
  Tensor sup;
  if (terms.sup_rel.defined() && terms.sup_abs.defined()) {
    Tensor r = live.sup_rel ? terms.sup_rel : scale(terms.sup_rel, 0.0);
    Tensor a = live.sup_abs ? terms.sup_abs : scale(terms.sup_abs, 0.0);
    sup = add(r, a);
  } else if (terms.sup_rel.defined()) {
    sup = live.sup_rel ? terms.sup_rel : scale(terms.sup_rel, 0.0);
  } else if (terms.sup_abs.defined()) {
    sup = live.sup_abs ? terms.sup_abs : scale(terms.sup_abs, 0.0);
  }

  Tensor acc;
  auto fold = [&acc](Tensor part) {
    acc = acc.defined() ? add(acc, part) : std::move(part);
  };
  if (sup.defined()) fold(scale(sup, w.alpha));
  if (terms.cons_s.defined()) fold(scale(terms.cons_s, live.cons_s ? w.beta : 0.0));
  if (terms.cons_t.defined()) fold(scale(terms.cons_t, live.cons_t ? w.gamma : 0.0));
  if (terms.semi.defined()) fold(scale(terms.semi, live.semi ? w.alpha : 0.0));

  if (!acc.defined()) return Tensor::scalar(0.0);
  return acc;
}

StepLosses read_losses(const LossTerms& terms, const Tensor& total) {
  StepLosses s;
  if (terms.sup_rel.defined()) s.sup_rel = terms.sup_rel.item();
  if (terms.sup_abs.defined()) s.sup_abs = terms.sup_abs.item();
  if (terms.cons_s.defined()) s.cons_s = terms.cons_s.item();
  if (terms.cons_t.defined()) s.cons_t = terms.cons_t.item();
  if (terms.semi.defined()) s.semi = terms.semi.item();
  s.total = total.item();
  return s;
}

}  // namespace coreda
