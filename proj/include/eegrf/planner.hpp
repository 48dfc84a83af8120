#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eegrf/dataio.hpp"

namespace eegrf {

// Builds the RSVP plan for one query from 50 target and 950 distractor ids.
//
// Algorithm (replicable given the seed):
//   rng = Xoshiro256(seed)
//   shuffle targets, then distractors (Fisher-Yates, rng)
//   block b takes targets[10b, 10b+10) and distractors[190b, 190b+190),
//     targets first, then is shuffled in place (Fisher-Yates, rng)
// Block order is fixed. Throws DataError on wrong counts or duplicate ids.
RsvpPlan build_plan(std::span<const std::string> target_ids, std::span<const std::string> distractor_ids,
                    int rate_hz, std::uint64_t seed, const std::string& query_id = "q1",
                    double inter_block_gap_s = 5.0);

// Stimulus onsets in integer milliseconds from the first stimulus, in
// presentation order: 1000/rate ms apart inside a block, plus the rest gap
// between blocks.
std::vector<std::int64_t> timeline_ms(const RsvpPlan& plan);

// Same as timeline_ms, in seconds.
std::vector<double> timeline(const RsvpPlan& plan);

// Total time images are on screen (gaps excluded): n_images / rate_hz.
double stimulus_span_s(const RsvpPlan& plan);

int stimulus_period_ms(int rate_hz);

}  // namespace eegrf
