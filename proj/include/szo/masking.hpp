#pragma once

#include <cstddef>
#include <functional>

#include "szo/core.hpp"

namespace szo {

struct MaskSchedule {
  std::size_t interval_steps = 1;  // sparsify when step % interval == 0
  double keep_fraction = 0.8;      // fraction of the active set kept per event
  std::size_t max_events = 19;
};

// ceil(keep_fraction * nbar), computed the same way everywhere so that
// project_schedule agrees exactly with the masks actually produced.
std::size_t kept_count(std::size_t nbar, double keep_fraction);

// Nested magnitude mask: among the active indices of `prev`, keep the
// kept_count largest |w_i|, ties to the lower index. Returns `prev`
// unchanged when it has no active indices. Throws DomainError unless
// 0 < keep_fraction <= 1.
Mask magnitude_mask(const ParamVector& w, const Mask& prev, double keep_fraction);

// Scores a candidate mask, higher is better (held-out accuracy of the
// sub-network selected by the candidate).
using MaskScorer = std::function<double(const Mask&)>;

// Draws `candidates` nested masks, each keeping a uniform random subset of
// size kept_count of prev's active indices, and returns the best-scoring one
// (first sampled wins ties). Throws DomainError for candidates == 0.
Mask random_mask_select(const Mask& prev, double keep_fraction,
                        std::size_t candidates, const MaskScorer& score,
                        RngStream& rng);

// One uniform nested candidate, as drawn by random_mask_select.
Mask sample_nested_mask(const Mask& prev, double keep_fraction, RngStream& rng);

// True iff step > 0, step % interval == 0 and events_so_far < max_events.
bool should_sparsify(std::size_t step, const MaskSchedule& schedule,
                     std::size_t events_so_far);

// nbar after `events` applications of nbar <- kept_count(nbar, keep).
std::size_t project_schedule(std::size_t n0, double keep_fraction,
                             std::size_t events);

}  // namespace szo
