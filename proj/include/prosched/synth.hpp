#pragma once

// Seeded synthetic dialogues for fixtures, demos and property tests. The
// same seed always yields the same data.

#include <cstdint>
#include <string>
#include <vector>

#include "prosched/catalog.hpp"
#include "prosched/types.hpp"

namespace prosched {

/// Small mortgage-servicing catalog used by the generators.
ActionCatalog synthetic_catalog();

struct SynthOptions {
  int dialogues = 50;
  int min_turns = 8;
  int max_turns = 16;
  std::uint64_t seed = 0;
  double missing_annotation_rate = 0.08;  // triggered action left unannotated
  double phantom_rate = 0.15;             // per dialogue: a ready range that never triggers
};

/// Annotated dialogues with observed triggers. The ready window of each
/// triggered action opens a random number of turns (0..6) before the trigger.
std::vector<Dialogue> synth_dialogues(const SynthOptions& opt);

/// Same dialogue with all annotations and triggers removed.
Dialogue strip_annotations(const Dialogue& d);

/// Model response for one turn that reproduces the hidden annotation of `d`.
/// When `flaky` is set, the first attempt on every fifth turn is malformed.
std::string scripted_annotation_response(const Dialogue& annotated, int turn, int attempt, bool flaky = false);

}  // namespace prosched
