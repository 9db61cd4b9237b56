// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/composer.hpp"

#include <cctype>
#include <cmath>
#include <random>

namespace gpa {

std::string_view task_name(TaskKind t) {
  switch (t) {
    case TaskKind::TTS: return "tts";
    case TaskKind::ASR: return "asr";
    case TaskKind::VC: return "vc";
  }
  return "?";
}

TaskKind task_from_name(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "tts") return TaskKind::TTS;
  if (lower == "asr") return TaskKind::ASR;
  if (lower == "vc") return TaskKind::VC;
  throw Error(Errc::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

std::size_t TaskResult::units() const {
  switch (task) {
    case TaskKind::ASR: return text.size();
    case TaskKind::TTS: return acoustic.size() / 2;  // complete frames only
    case TaskKind::VC: return acoustic.size() / 2;
  }
  return 0;
}

GrammarViolation::GrammarViolation(std::size_t index, std::string expected, PartitionKind got,
                                   TokenId token)
    : Error(Errc::GrammarViolation, "index " + std::to_string(index) + ": expected " + expected +
                                        ", got " + std::string(partition_name(got)) + " token " +
                                        std::to_string(token)),
      index_(index),
      expected_(std::move(expected)),
      got_(got) {}

const Grammar& prompt_grammar(TaskKind task) {
  static const Grammar tts("BOS TASK_TTS Text+ SEP Global{4} GEN");
  static const Grammar asr("BOS TASK_ASR (GlmSemantic BiSemantic)+ GEN");
  static const Grammar vc("BOS TASK_VC (GlmSemantic BiSemantic)+ SEP Global{4} GEN");
  switch (task) {
    case TaskKind::TTS: return tts;
    case TaskKind::ASR: return asr;
    case TaskKind::VC: return vc;
  }
  return tts;
}

const Grammar& target_grammar(TaskKind task) {
  static const Grammar tts("(GlmSemantic BiSemantic Acoustic Acoustic)+ EOS");
  static const Grammar asr("Text+ EOS");
  static const Grammar vc("(Acoustic Acoustic)+ EOS");
  switch (task) {
    case TaskKind::TTS: return tts;
    case TaskKind::ASR: return asr;
    case TaskKind::VC: return vc;
  }
  return tts;
}

int tokens_per_unit(TaskKind task) {
  switch (task) {
    case TaskKind::TTS: return 4;
    case TaskKind::ASR: return 1;
    case TaskKind::VC: return 2;
  }
  return 1;
}

void check_layout_fits_codec(const VocabLayout& layout) {
  auto need = [&](PartitionKind k, int size) {
    if (layout.partition(k).size < size)
      throw Error(Errc::LayoutMismatch, std::string(partition_name(k)) + " partition has " +
                                            std::to_string(layout.partition(k).size) +
                                            " ids, codec needs " + std::to_string(size));
  };
  need(PartitionKind::Text, 256);
  need(PartitionKind::GlmSemantic, codec::kGlmModulus);
  need(PartitionKind::BiSemantic, codec::kBiModulus);
  need(PartitionKind::Acoustic, codec::kAcousticModulus);
  need(PartitionKind::Global, codec::kGlobalModulus);
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::MissingInput, what);
}

void append_semantic(const VocabLayout& layout, const codec::StreamSet& s,
                     std::vector<TokenId>& ids) {
  require(!s.glm.empty() && !s.bi.empty(), "glm and bi streams required");
  if (s.glm.size() != s.bi.size())
    throw Error(Errc::LengthMismatch, "glm has " + std::to_string(s.glm.size()) + " tokens, bi " +
                                          std::to_string(s.bi.size()));
  const TokenId g0 = layout.offset(PartitionKind::GlmSemantic);
  const TokenId b0 = layout.offset(PartitionKind::BiSemantic);
  for (std::size_t i = 0; i < s.glm.size(); ++i) {
    ids.push_back(g0 + s.glm[i]);
    ids.push_back(b0 + s.bi[i]);
  }
}

void append_global(const VocabLayout& layout, const std::vector<int>& global,
                   std::vector<TokenId>& ids) {
  require(global.size() == static_cast<std::size_t>(codec::kGlobalTokens),
          "4 global tokens required");
  const TokenId off = layout.offset(PartitionKind::Global);
  for (int g : global) ids.push_back(off + g);
}

}  // namespace

TokenSeq compose_prompt(const VocabLayout& layout, TaskKind task, const codec::StreamSet& source,
                        const std::vector<int>* target_global) {
  check_layout_fits_codec(layout);
  std::vector<TokenId> ids{layout.control(Control::BOS)};
  switch (task) {
    case TaskKind::TTS: {
      require(!source.text.empty(), "TTS needs text");
      ids.push_back(layout.control(Control::TASK_TTS));
      const TokenId t0 = layout.offset(PartitionKind::Text);
      for (unsigned char c : source.text) ids.push_back(t0 + c);
      ids.push_back(layout.control(Control::SEP));
      append_global(layout, source.global, ids);
      break;
    }
    case TaskKind::ASR:
      ids.push_back(layout.control(Control::TASK_ASR));
      append_semantic(layout, source, ids);
      break;
    case TaskKind::VC:
      require(target_global != nullptr, "VC needs target global tokens");
      ids.push_back(layout.control(Control::TASK_VC));
      append_semantic(layout, source, ids);
      ids.push_back(layout.control(Control::SEP));
      append_global(layout, *target_global, ids);
      break;
  }
  ids.push_back(layout.control(Control::GEN));
  return make_token_seq(layout, std::move(ids));
}

TaskSequence compose(const VocabLayout& layout, TaskKind task, const codec::StreamSet& source,
                     const codec::StreamSet* vc_target) {
  TaskSequence seq;
  seq.task = task;
  seq.meta.push_back(source.id);
  std::vector<TokenId> target;
  const TokenId eos = layout.control(Control::EOS);
  switch (task) {
    case TaskKind::TTS: {
      seq.prompt = compose_prompt(layout, task, source);
      require(source.glm.size() == source.text.size() && source.bi.size() == source.text.size() &&
                  source.acoustic.size() == 2 * source.text.size(),
              "TTS target needs full streams");
      const TokenId g0 = layout.offset(PartitionKind::GlmSemantic);
      const TokenId b0 = layout.offset(PartitionKind::BiSemantic);
      const TokenId a0 = layout.offset(PartitionKind::Acoustic);
      for (std::size_t i = 0; i < source.glm.size(); ++i) {
        target.push_back(g0 + source.glm[i]);
        target.push_back(b0 + source.bi[i]);
        target.push_back(a0 + source.acoustic[2 * i]);
        target.push_back(a0 + source.acoustic[2 * i + 1]);
      }
      break;
    }
    case TaskKind::ASR: {
      seq.prompt = compose_prompt(layout, task, source);
      require(!source.text.empty(), "ASR target needs text");
      if (source.text.size() != source.glm.size())
        throw Error(Errc::LengthMismatch, "text and semantic lengths differ");
      const TokenId t0 = layout.offset(PartitionKind::Text);
      for (unsigned char c : source.text) target.push_back(t0 + c);
      break;
    }
    case TaskKind::VC: {
      require(vc_target != nullptr, "VC needs the target-speaker rendition");
      seq.prompt = compose_prompt(layout, task, source, &vc_target->global);
      if (vc_target->acoustic.size() != 2 * source.glm.size())
        throw Error(Errc::LengthMismatch, "VC target acoustic length does not match source");
      if (!vc_target->text.empty() && !source.text.empty() && vc_target->text != source.text)
        throw Error(Errc::InvalidArgument, "VC target renders different text");
      const TokenId a0 = layout.offset(PartitionKind::Acoustic);
      for (int a : vc_target->acoustic) target.push_back(a0 + a);
      if (!vc_target->id.empty() && vc_target->id != source.id) seq.meta.push_back(vc_target->id);
      break;
    }
  }
  target.push_back(eos);
  seq.target = make_token_seq(layout, std::move(target));
  return seq;
}

std::size_t expected_units(const VocabLayout& layout, TaskKind task, const TokenSeq& prompt) {
  const PartitionKind counted = task == TaskKind::TTS ? PartitionKind::Text : PartitionKind::GlmSemantic;
  std::size_t n = 0;
  for (TokenId id : prompt.ids)
    if (id >= 0 && id < layout.total() && layout.partition_of(id) == counted) ++n;
  return n;
}

std::size_t length_cap(const VocabLayout& layout, TaskKind task, const TokenSeq& prompt) {
  const std::size_t n = expected_units(layout, task, prompt);
  return task == TaskKind::ASR ? 2 * n + 16 : 4 * n + 16;
}

StreamParser::StreamParser(const VocabLayout& layout, TaskKind task)
    : layout_(&layout), task_(task) {
  result_.task = task;
}

StreamParser::Allowed StreamParser::allowed() const {
  if (ended_) return {};
  switch (task_) {
    case TaskKind::TTS: {
      static constexpr PartitionKind kFrame[4] = {PartitionKind::GlmSemantic, PartitionKind::BiSemantic,
                                                  PartitionKind::Acoustic, PartitionKind::Acoustic};
      return {kFrame[in_frame_], in_frame_ == 0 && units() > 0};
    }
    case TaskKind::ASR:
      return {PartitionKind::Text, units() > 0};
    case TaskKind::VC:
      return {PartitionKind::Acoustic, in_frame_ == 0 && units() > 0};
  }
  return {};
}

StreamParser::Event StreamParser::push(TokenId token) {
  const std::size_t index = index_++;
  PartitionKind kind = layout_->partition_of(token);
  if (ended_) throw GrammarViolation(index, "nothing after EOS", kind, token);
  if (token == layout_->control(Control::EOS)) {
    if (in_frame_ != 0) {
      throw GrammarViolation(frame_start_,
                             "complete frame before EOS (frame starting here has " +
                                 std::to_string(in_frame_) + " of " +
                                 std::to_string(tokens_per_unit(task_)) + " tokens)",
                             kind, token);
    }
    if (units() == 0) throw GrammarViolation(index, "at least one unit before EOS", kind, token);
    ended_ = true;
    return Event::End;
  }
  Allowed want = allowed();
  if (!want.kind || kind != *want.kind) {
    std::string expected = want.kind ? std::string(partition_name(*want.kind)) : "end";
    if (want.eos) expected += " or EOS";
    throw GrammarViolation(index, expected, kind, token);
  }
  const int rel = token - layout_->offset(kind);
  if (in_frame_ == 0) frame_start_ = index;
  switch (task_) {
    case TaskKind::ASR:
      result_.text.push_back(static_cast<char>(rel));
      return Event::UnitComplete;
    case TaskKind::TTS:
      if (in_frame_ == 0) result_.glm.push_back(rel);
      if (in_frame_ == 1) result_.bi.push_back(rel);
      if (in_frame_ >= 2) result_.acoustic.push_back(rel);
      in_frame_ = (in_frame_ + 1) % 4;
      return in_frame_ == 0 ? Event::UnitComplete : Event::None;
    case TaskKind::VC:
      result_.acoustic.push_back(rel);
      in_frame_ = (in_frame_ + 1) % 2;
      return in_frame_ == 0 ? Event::UnitComplete : Event::None;
  }
  return Event::None;
}

TaskResult StreamParser::finish() const {
  TaskResult r = result_;
  if (!ended_) {
    r.truncated = true;
    if (task_ == TaskKind::TTS) {
      // Drop a partial trailing frame so the length laws still hold.
      const std::size_t frames = r.acoustic.size() / 2;
      r.glm.resize(frames);
      r.bi.resize(frames);
      r.acoustic.resize(2 * frames);
    } else if (task_ == TaskKind::VC) {
      r.acoustic.resize(r.acoustic.size() / 2 * 2);
    }
  }
  return r;
}

TaskResult parse_output(const VocabLayout& layout, TaskKind task, std::span<const TokenId> emitted) {
  StreamParser parser(layout, task);
  for (TokenId t : emitted) parser.push(t);
  return parser.finish();
}

TaskResult parse_output(const VocabLayout& layout, TaskKind task, const TokenSeq& emitted) {
  return parse_output(layout, task, std::span<const TokenId>(emitted.ids));
}

TaskSequence instantiate(const VocabLayout& layout, TaskKind task,
                         const codec::ManifestEntry& entry, int vc_target_speaker) {
  codec::StreamSet source = codec::encode(entry.text, entry.speaker);
  source.id = entry.id;
  if (task != TaskKind::VC) return compose(layout, task, source);
  codec::StreamSet target = codec::encode(entry.text, vc_target_speaker);
  target.id = entry.id;
  return compose(layout, task, source, &target);
}

std::vector<TaskSequence> make_training_batch(const VocabLayout& layout,
                                              const std::vector<codec::ManifestEntry>& entries,
                                              const TaskMix& mix, const BatchOptions& opts) {
  if (entries.empty()) throw Error(Errc::EmptyBatch, "no entries");
  if (mix.tts < 0 || mix.asr < 0 || mix.vc < 0 || std::abs(mix.tts + mix.asr + mix.vc - 1.0) > 1e-6)
    throw Error(Errc::InvalidArgument, "task weights must be non-negative and sum to 1");
  if (mix.vc > 0 && opts.speaker_pool < 2)
    throw Error(Errc::InvalidArgument, "VC needs a speaker pool of at least 2");
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TaskSequence> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const double u = unit(rng);
    TaskKind task = u < mix.tts ? TaskKind::TTS : (u < mix.tts + mix.asr ? TaskKind::ASR : TaskKind::VC);
    if (mix.vc == 0 && task == TaskKind::VC) task = mix.asr > 0 ? TaskKind::ASR : TaskKind::TTS;
    int target = e.speaker;
    if (task == TaskKind::VC) {
      // Uniform over the pool minus the source speaker.
      target = std::uniform_int_distribution<int>(0, opts.speaker_pool - 2)(rng);
      if (target >= e.speaker) ++target;
    }
    out.push_back(instantiate(layout, task, e, target));
  }
  return out;
}

nlohmann::json to_json(const TaskSequence& seq) {
  return {{"task", task_name(seq.task)},
          {"prompt", seq.prompt.ids},
          {"target", seq.target.ids},
          {"meta", seq.meta}};
}

}  // namespace gpa
