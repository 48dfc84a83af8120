#include "eegrf/planner.hpp"

#include <cmath>
#include <unordered_set>

#include "eegrf/errors.hpp"
#include "eegrf/random.hpp"

namespace eegrf {

int stimulus_period_ms(int rate_hz) {
  if (rate_hz <= 0 || 1000 % rate_hz != 0) {
    throw PreconditionError("rate_hz must divide 1000, got " + std::to_string(rate_hz));
  }
  return 1000 / rate_hz;
}

RsvpPlan build_plan(std::span<const std::string> target_ids, std::span<const std::string> distractor_ids,
                    int rate_hz, std::uint64_t seed, const std::string& query_id, double inter_block_gap_s) {
  constexpr std::size_t kDistractorsPerBlock = kImagesPerBlock - kTargetsPerBlock;
  if (target_ids.size() != static_cast<std::size_t>(kTargetsPerQuery)) {
    throw DataError("build_plan: need " + std::to_string(kTargetsPerQuery) + " target ids, got " +
                    std::to_string(target_ids.size()));
  }
  if (distractor_ids.size() != kDistractorsPerBlock * kBlocksPerQuery) {
    throw DataError("build_plan: need " + std::to_string(kDistractorsPerBlock * kBlocksPerQuery) +
                    " distractor ids, got " + std::to_string(distractor_ids.size()));
  }
  std::unordered_set<std::string> seen;
  for (const auto* list : {&target_ids, &distractor_ids}) {
    for (const auto& id : *list) {
      if (!seen.insert(id).second) throw DataError("build_plan: duplicate image id '" + id + "'");
    }
  }

  Xoshiro256 rng(seed);
  std::vector<std::string> targets(target_ids.begin(), target_ids.end());
  std::vector<std::string> distractors(distractor_ids.begin(), distractor_ids.end());
  fisher_yates_shuffle(std::span<std::string>(targets), rng);
  fisher_yates_shuffle(std::span<std::string>(distractors), rng);

  RsvpPlan plan;
  plan.query_id = query_id;
  plan.rate_hz = rate_hz;
  plan.inter_block_gap_s = inter_block_gap_s;
  plan.seed = seed;
  for (int b = 0; b < kBlocksPerQuery; ++b) {
    std::vector<PlanItem> block;
    block.reserve(kImagesPerBlock);
    for (int i = 0; i < kTargetsPerBlock; ++i) block.push_back({targets[b * kTargetsPerBlock + i], true});
    for (std::size_t i = 0; i < kDistractorsPerBlock; ++i) {
      block.push_back({distractors[b * kDistractorsPerBlock + i], false});
    }
    fisher_yates_shuffle(std::span<PlanItem>(block), rng);
    plan.blocks.push_back(std::move(block));
  }
  validate_plan(plan);
  return plan;
}

std::vector<std::int64_t> timeline_ms(const RsvpPlan& plan) {
  const std::int64_t period = stimulus_period_ms(plan.rate_hz);
  const auto gap = static_cast<std::int64_t>(std::llround(plan.inter_block_gap_s * 1000.0));
  std::vector<std::int64_t> onsets;
  std::int64_t block_start = 0;
  for (const auto& block : plan.blocks) {
    for (std::size_t i = 0; i < block.size(); ++i) onsets.push_back(block_start + static_cast<std::int64_t>(i) * period);
    block_start += static_cast<std::int64_t>(block.size()) * period + gap;
  }
  return onsets;
}

std::vector<double> timeline(const RsvpPlan& plan) {
  const auto ms = timeline_ms(plan);
  std::vector<double> out;
  out.reserve(ms.size());
  for (auto v : ms) out.push_back(static_cast<double>(v) / 1000.0);
  return out;
}

double stimulus_span_s(const RsvpPlan& plan) {
  std::size_t n = 0;
  for (const auto& block : plan.blocks) n += block.size();
  return static_cast<double>(n) / plan.rate_hz;
}

}  // namespace eegrf
