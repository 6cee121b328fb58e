#pragma once

#include "spai/random.hpp"
#include "spai/sparse.hpp"
#include "spai/tape.hpp"

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace spai {

/// Which matrix norm divides A inside the loss.
enum class LossNorm { mean_abs, frobenius, entrywise_l1 };

std::string_view to_string(LossNorm norm);
LossNorm parse_loss_norm(std::string_view name);

/// The chosen norm, in extended precision.
long double loss_norm_value(const SparseMatrix& a, LossNorm norm);

/// ||(A M^{-1} / ||A|| - I) w||^2 with M^{-1} = G G^T + eps I, never forming A M^{-1}.
double sai_loss(const SparseMatrix& a, const SparseMatrix& g, double epsilon, std::span<const double> w,
                LossNorm norm = LossNorm::mean_abs);

/// Same loss recorded on a tape; g_values is the nnz x 1 node holding G's entries on `g_pattern`.
ad::Var sai_loss_on_tape(ad::Tape& tape, const SparseMatrix& a, std::shared_ptr<const SparsityPattern> g_pattern,
                         ad::Var g_values, double epsilon, std::span<const double> w,
                         LossNorm norm = LossNorm::mean_abs);

using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Per-sample values of ||A M^{-1} w - w||^2 for fresh standard-normal w.
std::vector<double> hutchinson_samples(const SparseMatrix& a, const ApplyFn& m_apply, std::size_t n_samples, Rng& rng);

/// Mean of hutchinson_samples: an unbiased estimate of ||A M^{-1} - I||_F^2.
double hutchinson_frobenius_estimate(const SparseMatrix& a, const ApplyFn& m_apply, std::size_t n_samples, Rng& rng);

} // namespace spai
