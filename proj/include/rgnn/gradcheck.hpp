#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool pass(double tol) const { return max_rel_err < tol; }

  const GradCheckEntry* worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries)
      if (!w || e.max_rel_err > w->max_rel_err) w = &e;
    return w;
  }
};

// Compares the analytic gradients of scalar-valued f against central finite
// differences, parameter entry by parameter entry. f is called as f(tape) and
// must be deterministic; it is evaluated twice at the base point first and
// rejected if the two values differ (which is what happens with dropout or
// any other unseeded randomness inside f).
//
// The error is |analytic - numeric| / max(1, |analytic|, |numeric|): a true
// relative error for O(1) gradients, an absolute one near zero where relative
// error is meaningless.
template <typename F>
GradCheckReport grad_check(F&& f, const ParamRefs& params, double h = 1e-5) {
  const auto eval = [&]() {
    Tape tape;
    Tensor loss = f(tape);
    if (loss.numel() != 1)
      throw ContractError("grad_check: f must produce a scalar");
    return loss.value();
  };

  const double base1 = eval();
  const double base2 = eval();
  if (base1 != base2)
    throw ContractError(
        "grad_check: f is not deterministic (two base evaluations differ)");

  GradientMap analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    analytic = tape.backward(loss, params);
  }

  GradCheckReport report;
  for (const auto& [name, p] : params) {
    GradCheckEntry entry;
    entry.name = name;
    const Tensor& a = analytic.at(name);
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double orig = p->at(i);
      p->at(i) = orig + h;
      const double fp = eval();
      p->at(i) = orig - h;
      const double fm = eval();
      p->at(i) = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double abs_err = std::abs(a.at(i) - numeric);
      const double rel =
          abs_err / std::max({1.0, std::abs(a.at(i)), std::abs(numeric)});
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace rgnn
