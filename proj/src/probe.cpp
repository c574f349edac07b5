#include "iekm/probe.hpp"

#include <fstream>

#include "json.hpp"

namespace iekm {
namespace {

bool has_word(const std::vector<WordSegment>& words, const std::string& keyword) {
  const std::string key = normalize_word(keyword);
  for (const auto& w : words) {
    if (w.text == key) return true;
  }
  return false;
}

}  // namespace

std::vector<Probe> read_probes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open probe file " + path.string());
  std::vector<Probe> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("s1").get<std::string>(), j.at("s2").get<std::string>(),
                     j.at("kw1").get<std::string>(), j.at("kw2").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

void write_probes(const std::filesystem::path& path, std::span<const Probe> probes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write probe file " + path.string());
  for (const auto& p : probes) {
    out << nlohmann::json{{"s1", p.s1}, {"s2", p.s2}, {"kw1", p.kw1}, {"kw2", p.kw2}}.dump() << '\n';
  }
}

double ProbeReport::agreement() const {
  return valid == 0 ? 0.0 : static_cast<double>(both_agree) / static_cast<double>(valid);
}

ProbeReport flexibility_probe(const Model& model, std::span<const Probe> probes,
                              const PairEncoder& encoder) {
  ProbeReport report;
  const bool higher_is_similar = model.config.task == TaskMode::classification;
  for (const Probe& probe : probes) {
    ProbeOutcome out;
    KeywordDictionary zero("probe");
    zero.set(probe.kw1, probe.kw2, 0.0);
    KeywordDictionary one("probe");
    one.set(probe.kw1, probe.kw2, 1.0);

    if (!has_word(encoder.segment_sentence(probe.s1, &zero), probe.kw1)) {
      out.reason = "keyword '" + probe.kw1 + "' not found in s1";
    } else if (!has_word(encoder.segment_sentence(probe.s2, &zero), probe.kw2)) {
      out.reason = "keyword '" + probe.kw2 + "' not found in s2";
    } else {
      out.valid = true;
      // The plain score uses the same segmentation as the overridden ones so
      // that only the keyword cells differ.
      KeywordDictionary none("probe");
      const PairEncoding base = encoder.encode(probe.s1, probe.s2, model.vocab, &none);
      out.base = predict(model, base);
      out.override_zero = predict(model, encoder.encode(probe.s1, probe.s2, model.vocab, &zero));
      out.override_one = predict(model, encoder.encode(probe.s1, probe.s2, model.vocab, &one));
      out.toward_dissimilar = higher_is_similar ? out.override_zero < out.base : out.override_zero > out.base;
      out.toward_similar = higher_is_similar ? out.override_one > out.base : out.override_one < out.base;
    }

    if (out.valid) {
      ++report.valid;
      report.zero_agrees += out.toward_dissimilar ? 1 : 0;
      report.one_agrees += out.toward_similar ? 1 : 0;
      report.both_agree += (out.toward_dissimilar && out.toward_similar) ? 1 : 0;
    } else {
      ++report.invalid;
    }
    report.outcomes.push_back(std::move(out));
  }
  return report;
}

}  // namespace iekm
