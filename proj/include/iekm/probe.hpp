#pragma once

// Flexibility probes: does a keyword override steer a trained model's score
// in the commanded direction?

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "iekm/matrix_builder.hpp"
#include "iekm/model.hpp"

namespace iekm {

struct Probe {
  std::string s1;
  std::string s2;
  std::string kw1;  // must occur as a word of s1
  std::string kw2;  // must occur as a word of s2
};

std::vector<Probe> read_probes(const std::filesystem::path& path);
void write_probes(const std::filesystem::path& path, std::span<const Probe> probes);

struct ProbeOutcome {
  bool valid = false;
  std::string reason;  // why an invalid probe was excluded
  double base = 0.0;
  double override_zero = 0.0;
  double override_one = 0.0;
  bool toward_dissimilar = false;  // override 0 moved the score toward dissimilar
  bool toward_similar = false;     // override 1 moved the score toward similar
};

struct ProbeReport {
  std::vector<ProbeOutcome> outcomes;
  std::size_t valid = 0;
  std::size_t invalid = 0;
  std::size_t zero_agrees = 0;
  std::size_t one_agrees = 0;
  std::size_t both_agree = 0;

  // Fraction of valid probes where both overrides moved as commanded.
  double agreement() const;
};

// Scores each probe without an override, with (kw1, kw2) -> 0 and with
// (kw1, kw2) -> 1. "Similar" means a higher score in classification mode and a
// lower one in regression mode.
ProbeReport flexibility_probe(const Model& model, std::span<const Probe> probes,
                              const PairEncoder& encoder);

}  // namespace iekm
