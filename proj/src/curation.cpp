// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/curation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "gpa/error.hpp"

namespace gpa::curation {

Waveform normalize(const Waveform& w) {
  if (w.sample_rate <= 0) throw Error(Errc::InvalidArgument, "sample_rate must be positive");
  double peak = 0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0) throw Error(Errc::SilentInput, "all-zero waveform");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  const double gain = kPeakLevel / peak;
  for (std::size_t i = 0; i < w.samples.size(); ++i) out.samples[i] = w.samples[i] * gain;
  // Pin the peak sample(s) so max|out| is exactly the target level.
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    if (std::abs(w.samples[i]) == peak) out.samples[i] = std::copysign(kPeakLevel, w.samples[i]);
  return out;
}

std::vector<double> frame_rms(const Waveform& w, double frame_ms) {
  if (frame_ms <= 0) throw Error(Errc::InvalidArgument, "frame_ms must be positive");
  const std::size_t len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(w.sample_rate * frame_ms / 1000.0)));
  std::vector<double> rms;
  for (std::size_t start = 0; start < w.samples.size(); start += len) {
    const std::size_t end = std::min(w.samples.size(), start + len);
    double ss = 0;
    for (std::size_t i = start; i < end; ++i) ss += w.samples[i] * w.samples[i];
    rms.push_back(std::sqrt(ss / static_cast<double>(end - start)));
  }
  return rms;
}

std::vector<Segment> vad_segment(const Waveform& w, const VadOptions& opts) {
  const std::vector<double> rms = frame_rms(w, opts.frame_ms);
  const std::size_t frame_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(w.sample_rate * opts.frame_ms / 1000.0)));
  const double frame_s = static_cast<double>(frame_len) / w.sample_rate;
  const double total_s = static_cast<double>(w.samples.size()) / w.sample_rate;

  // Runs of active frames, bridging gaps of up to hangover_frames.
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [first, last] active frame
  std::optional<std::size_t> first, last;
  for (std::size_t f = 0; f < rms.size(); ++f) {
    if (rms[f] >= opts.energy_threshold) {
      if (!first) first = f;
      last = f;
    } else if (first && f - *last > static_cast<std::size_t>(opts.hangover_frames)) {
      runs.emplace_back(*first, *last);
      first.reset();
    }
  }
  if (first) runs.emplace_back(*first, *last);

  std::vector<Segment> out;
  for (auto [a, b] : runs) {
    Segment seg{a * frame_s, std::min(total_s, (b + 1) * frame_s)};
    if ((seg.end - seg.start) * 1000.0 < opts.min_segment_ms - 1e-9) continue;
    std::vector<double> energies(rms.begin() + a, rms.begin() + b + 1);
    std::nth_element(energies.begin(), energies.begin() + energies.size() / 2, energies.end());
    const double median = energies[energies.size() / 2];
    if (rms[a] > opts.truncation_ratio * median || rms[b] > opts.truncation_ratio * median) continue;
    out.push_back(seg);
  }
  return out;
}

namespace {

// UTF-8 code points; malformed bytes pass through as single units.
std::vector<std::string> code_points(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = 1;
    if (c >= 0xF0)
      n = 4;
    else if (c >= 0xE0)
      n = 3;
    else if (c >= 0xC0)
      n = 2;
    n = std::min(n, s.size() - i);
    out.emplace_back(s.substr(i, n));
    i += n;
  }
  return out;
}

}  // namespace

std::vector<std::string> split_units(std::string_view text, Unit unit) {
  std::vector<std::string> out;
  if (unit == Unit::Char) {
    for (auto& cp : code_points(text))
      if (!(cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0])))) out.push_back(cp);
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

EditCounts edit_counts(std::string_view reference, std::string_view hypothesis, Unit unit) {
  const auto ref = split_units(reference, unit);
  const auto hyp = split_units(hypothesis, unit);
  const std::size_t n = ref.size(), m = hyp.size();
  // cost[i][j] = distance between ref[:i] and hyp[:j]
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});
  EditCounts c;
  c.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

double wer(std::string_view reference, std::string_view hypothesis, Unit unit) {
  const EditCounts c = edit_counts(reference, hypothesis, unit);
  return static_cast<double>(c.distance()) / static_cast<double>(std::max<std::size_t>(1, c.reference_length));
}

double pwer(const HypothesisSet& set) {
  const std::size_t n = set.hypotheses.size();
  if (n < 2)
    throw Error(Errc::TooFewHypotheses, set.id + " has " + std::to_string(n) + " hypotheses");
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) sum += wer(set.hypotheses[i].text, set.hypotheses[j].text, Unit::Word);
  return sum / static_cast<double>(n * (n - 1));
}

const Hypothesis& medoid(const HypothesisSet& set) {
  if (set.hypotheses.empty()) throw Error(Errc::TooFewHypotheses, set.id + " has no hypotheses");
  const std::size_t n = set.hypotheses.size();
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double cost = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j)
        cost += wer(set.hypotheses[i].text, set.hypotheses[j].text) +
                wer(set.hypotheses[j].text, set.hypotheses[i].text);
    if (cost < best_cost || (cost == best_cost && set.hypotheses[i].model < set.hypotheses[best].model)) {
      best = i;
      best_cost = cost;
    }
  }
  return set.hypotheses[best];
}

ConsensusResult consensus_filter(const std::vector<HypothesisSet>& sets, double threshold) {
  ConsensusResult r;
  for (const auto& set : sets) {
    const double p = pwer(set);
    if (p < threshold)
      r.kept.push_back({set.id, medoid(set).text, p});
    else
      r.rejected.push_back({set.id, p});
  }
  return r;
}

namespace {

bool is_punct(char c) { return c == ',' || c == '.' || c == '?' || c == '!' || c == ';' || c == ':'; }

}  // namespace

std::string refine_punctuation(const std::vector<AlignedWord>& words) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    if (w.start < 0 || w.end < w.start)
      throw Error(Errc::NonMonotonicTimestamps, "word " + std::to_string(i) + " '" + w.word + "'");
    if (i > 0 && w.start < words[i - 1].end)
      throw Error(Errc::NonMonotonicTimestamps,
                  "word " + std::to_string(i) + " '" + w.word + "' starts before previous ends");
  }
  std::vector<std::string> punct;
  for (const auto& w : words) punct.push_back(w.punct);
  // Boundaries: >= 300 ms inclusive, < 50 ms exclusive; 1e-9 absorbs
  // decimal-to-binary rounding of the timestamps.
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    const double gap = words[i + 1].start - words[i].end;
    if (gap >= kCommaPauseSeconds - 1e-9 && punct[i].empty())
      punct[i] = ",";
    else if (gap < kFluentPauseSeconds - 1e-9 && punct[i] == ",")
      punct[i].clear();
  }
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i].word;
    out += punct[i];
  }
  return out;
}

AlignedWord aligned_word_from_json(const nlohmann::json& j) {
  try {
    AlignedWord w;
    w.word = j.at("w").get<std::string>();
    w.start = j.at("start").get<double>();
    w.end = j.at("end").get<double>();
    if (j.contains("punct") && j["punct"].is_string()) {
      w.punct = j["punct"].get<std::string>();
    } else {
      while (!w.word.empty() && is_punct(w.word.back())) {
        w.punct.insert(w.punct.begin(), w.word.back());
        w.word.pop_back();
      }
    }
    // A word that still carries its own trailing punctuation is normalized.
    while (!w.word.empty() && is_punct(w.word.back()) && j.contains("punct")) {
      if (w.punct.empty()) w.punct.insert(w.punct.begin(), w.word.back());
      w.word.pop_back();
    }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("aligned word: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::ostream& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::ostream& o, std::uint16_t v) {
  o.put(static_cast<char>(v & 0xff));
  o.put(static_cast<char>(v >> 8));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& m) -> Error { return Error(Errc::Parse, path.string() + ": " + m); };
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw fail("not a RIFF/WAVE file");
  int format = 0, channels = 0, bits = 0;
  Waveform w;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail("truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      format = le16(&bytes[body]);
      channels = le16(&bytes[body + 2]);
      w.sample_rate = static_cast<int>(le32(&bytes[body + 4]));
      bits = le16(&bytes[body + 14]);
      if (format == 0xFFFE && size >= 26) format = le16(&bytes[body + 24]);  // extensible
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data before fmt");
      if (channels != 1) throw fail("expected mono, got " + std::to_string(channels) + " channels");
      if (format == 1 && bits == 16) {
        for (std::size_t i = 0; i + 1 < size; i += 2)
          w.samples.push_back(static_cast<std::int16_t>(le16(&bytes[body + i])) / 32768.0);
      } else if (format == 3 && bits == 32) {
        for (std::size_t i = 0; i + 3 < size; i += 4) {
          std::uint32_t u = le32(&bytes[body + i]);
          float f;
          std::memcpy(&f, &u, sizeof f);
          w.samples.push_back(f);
        }
      } else {
        throw fail("unsupported encoding (format " + std::to_string(format) + ", " +
                   std::to_string(bits) + " bits)");
      }
      have_data = true;
    }
    pos = body + size + (size & 1);
  }
  if (!have_data) throw fail("no data chunk");
  if (w.sample_rate <= 0) throw fail("bad sample rate");
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w, bool float32) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error(Errc::Io, "cannot write " + path.string());
  const std::uint16_t bits = float32 ? 32 : 16;
  const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * bits / 8);
  o.write("RIFF", 4);
  put32(o, 36 + data_size);
  o.write("WAVEfmt ", 8);
  put32(o, 16);
  put16(o, float32 ? 3 : 1);
  put16(o, 1);
  put32(o, static_cast<std::uint32_t>(w.sample_rate));
  put32(o, static_cast<std::uint32_t>(w.sample_rate) * bits / 8);
  put16(o, bits / 8);
  put16(o, bits);
  o.write("data", 4);
  put32(o, data_size);
  for (double s : w.samples) {
    if (float32) {
      float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      put32(o, u);
    } else {
      const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put16(o, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    }
  }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <class F>
void read_jsonl(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

struct Item {
  nlohmann::json entry;
  HypothesisSet hyps;
  std::optional<std::vector<AlignedWord>> words;
};

struct Outcome {
  bool kept = false;
  nlohmann::json record;
};

Outcome process(const Item& item, const std::filesystem::path& base, const PipelineOptions& opts) {
  const std::string id = item.entry.at("id").get<std::string>();
  auto reject = [&](const std::string& reason, nlohmann::json extra = nlohmann::json::object()) {
    extra["id"] = id;
    extra["reason"] = reason;
    return Outcome{false, extra};
  };
  nlohmann::json rec{{"id", id}};
  if (item.entry.contains("speaker")) rec["speaker"] = item.entry["speaker"];
  if (item.entry.contains("audio")) {
    std::filesystem::path audio = item.entry["audio"].get<std::string>();
    if (audio.is_relative()) audio = base / audio;
    Waveform w;
    try {
      w = normalize(read_wav(audio));
    } catch (const Error& e) {
      if (e.code() == Errc::SilentInput) return reject("silent");
      return reject("unreadable_audio", {{"error", e.what()}});
    }
    const auto segments = vad_segment(w, opts.vad);
    if (segments.empty()) return reject("no_speech");
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : segments) segs.push_back({s.start, s.end});
    rec["segments"] = segs;
    rec["duration"] = static_cast<double>(w.samples.size()) / w.sample_rate;
  }
  if (item.hyps.hypotheses.size() < 2) return reject("too_few_hypotheses");
  const double p = pwer(item.hyps);
  rec["pwer"] = p;
  if (!(p < opts.pwer_threshold)) return reject("low_agreement", {{"pwer", p}});
  std::string text = medoid(item.hyps).text;
  if (item.words) {
    // Alignment timing refines punctuation when it covers the same words.
    std::vector<std::string> aligned;
    for (const auto& w : *item.words) aligned.push_back(w.word);
    auto strip = [](std::string s) {
      while (!s.empty() && is_punct(s.back())) s.pop_back();
      return s;
    };
    std::vector<std::string> chosen;
    for (auto& w : split_units(text, Unit::Word)) chosen.push_back(strip(w));
    if (aligned == chosen) {
      try {
        text = refine_punctuation(*item.words);
        rec["punctuation_refined"] = true;
      } catch (const Error& e) {
        return reject("bad_alignment", {{"error", e.what()}});
      }
    }
  }
  rec["text"] = text;
  return Outcome{true, rec};
}

}  // namespace

PipelineResult run_pipeline(const PipelineInputs& in, const PipelineOptions& opts) {
  std::map<std::string, Item> items;
  read_jsonl(in.manifest, [&](const nlohmann::json& j) {
    const std::string id = j.at("id").get<std::string>();
    if (items.count(id)) throw Error(Errc::Parse, "duplicate id " + id);
    items[id].entry = j;
    items[id].hyps.id = id;
  });
  if (!in.hypotheses.empty()) {
    read_jsonl(in.hypotheses, [&](const nlohmann::json& j) {
      auto it = items.find(j.at("id").get<std::string>());
      if (it == items.end()) return;
      it->second.hyps.hypotheses.push_back({j.value("model", ""), j.at("text").get<std::string>()});
    });
  }
  if (!in.alignments.empty() && std::filesystem::exists(in.alignments)) {
    read_jsonl(in.alignments, [&](const nlohmann::json& j) {
      auto it = items.find(j.at("id").get<std::string>());
      if (it == items.end()) return;
      std::vector<AlignedWord> words;
      for (const auto& w : j.at("words")) words.push_back(aligned_word_from_json(w));
      it->second.words = std::move(words);
    });
  }

  std::vector<const Item*> order;
  for (auto& [id, item] : items) order.push_back(&item);
  std::vector<Outcome> outcomes(order.size());
  const std::filesystem::path base = in.manifest.parent_path();
  std::size_t workers = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(1, order.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < order.size(); i = next++)
          outcomes[i] = process(*order[i], base, opts);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PipelineResult r;
  for (auto& o : outcomes) (o.kept ? r.kept : r.rejected).push_back(std::move(o.record));
  return r;
}

}  // namespace gpa::curation
