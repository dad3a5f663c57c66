#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "rumorts/error.hpp"
#include "rumorts/eval.hpp"
#include "rumorts/random.hpp"

namespace rumorts::eval {

void SynthSpec::validate() const {
  if (events < 1 || per_event < 1) throw UsageError("synthetic corpus needs at least one event and conversation");
  if (!(rumor_fraction >= 0.0 && rumor_fraction <= 1.0)) throw UsageError("rumor fraction must lie in [0, 1]");
  if (!(separation >= 0.0 && separation <= 1.0)) throw UsageError("separation must lie in [0, 1]");
  if (min_reactions < 0 || max_reactions < min_reactions) throw UsageError("invalid reaction count range");
  if (!(burst_mean_seconds > 0.0) || !(horizon_seconds >= 1.0)) throw UsageError("invalid time scales");
}

nlohmann::json SynthSpec::to_json() const {
  return {{"events", events},
          {"per_event", per_event},
          {"rumor_fraction", rumor_fraction},
          {"separation", separation},
          {"min_reactions", min_reactions},
          {"max_reactions", max_reactions},
          {"burst_mean_seconds", burst_mean_seconds},
          {"horizon_seconds", horizon_seconds},
          {"start_time", start_time},
          {"seed", seed}};
}

RawDataset generate_synthetic_corpus(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto rumours_per_event = static_cast<int>(std::lround(spec.rumor_fraction * spec.per_event));
  const auto horizon = static_cast<std::int64_t>(spec.horizon_seconds);

  RawDataset out;
  for (int e = 0; e < spec.events; ++e) {
    std::ostringstream name;
    name << "synth-event-" << std::setw(2) << std::setfill('0') << e + 1;
    out.events.push_back(name.str());
    const std::int64_t event_start = spec.start_time + static_cast<std::int64_t>(e) * 7 * 86400;

    for (int j = 0; j < spec.per_event; ++j) {
      Conversation conv;
      std::ostringstream id;
      id << 5000000000LL + static_cast<long long>(e) * 100000 + j;
      conv.id = id.str();
      conv.event = out.events.back();
      conv.label = j < rumours_per_event ? 1 : 0;
      conv.source_time = event_start + static_cast<std::int64_t>(rng.below(86400));
      const auto n = spec.min_reactions +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_reactions - spec.min_reactions + 1)));
      for (int r = 0; r < n; ++r) {
        std::int64_t offset;
        if (conv.label == 1 && rng.uniform01() < spec.separation) {
          offset = 1 + static_cast<std::int64_t>(std::floor(rng.exponential(spec.burst_mean_seconds)));
        } else {
          offset = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(horizon)));
        }
        conv.reaction_times.push_back(conv.source_time + offset);
      }
      out.conversations.push_back(std::move(conv));
    }
  }
  std::sort(out.conversations.begin(), out.conversations.end(), [](const Conversation& a, const Conversation& b) {
    return std::tie(a.event, a.id) < std::tie(b.event, b.id);
  });
  return out;
}

}  // namespace rumorts::eval
