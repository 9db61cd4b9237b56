// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/inference.hpp"

#include "gpa/error.hpp"

namespace gpa {

using model::AllowedRanges;

model::AllowedRanges allowed_next(const VocabLayout& layout, const StreamParser& parser,
                                  std::size_t expected_units) {
  const TokenId eos = layout.control(Control::EOS);
  if (parser.ended()) return {{eos, eos + 1}};
  const auto a = parser.allowed();
  // Close exactly at the implied length; never earlier.
  if (a.eos && parser.units() >= expected_units) return {{eos, eos + 1}};
  AllowedRanges r;
  if (a.kind) {
    const auto& p = layout.partition(*a.kind);
    r.emplace_back(p.start, p.start + p.size);
  }
  if (r.empty()) r.emplace_back(eos, eos + 1);
  return r;
}

template <class T>
Generation generate(const model::Transformer<T>& model, const VocabLayout& layout, TaskKind task,
                    const TokenSeq& prompt, const DecodePolicy& policy) {
  Generation g;
  const std::size_t cap = length_cap(layout, task, prompt);
  const std::size_t units = policy.constrained ? expected_units(layout, task, prompt) : 0;
  const int max_len = model.config().max_seq_len;
  if (static_cast<int>(prompt.ids.size()) >= max_len)
    throw Error(Errc::ContextOverflow, "prompt of " + std::to_string(prompt.ids.size()) +
                                           " tokens leaves no room in a " + std::to_string(max_len) +
                                           "-token context");
  model::Sampler sampler(policy.sampler);
  StreamParser parser(layout, task);
  auto cache = model.new_cache();
  model::Mat<T> logits = model.forward(prompt.ids, cache, true);
  const TokenId eos = layout.control(Control::EOS);
  try {
    while (g.tokens.size() < cap) {
      AllowedRanges allowed;
      if (policy.constrained) allowed = allowed_next(layout, parser, units);
      const int tok = sampler.sample(std::span<const T>(logits.row(0).data(), logits.cols()), allowed);
      g.tokens.push_back(tok);
      parser.push(tok);
      if (tok == eos || cache.length >= max_len) break;
      logits = model.forward(std::span<const int>(&tok, 1), cache, true);
    }
  } catch (const GrammarViolation& e) {
    g.error = e.what();
  }
  g.result = parser.finish();
  return g;
}

int vc_target_for(std::string_view id, int source_speaker, int speaker_pool, std::uint64_t seed) {
  if (speaker_pool < 2) throw Error(Errc::InvalidArgument, "VC needs a speaker pool of at least 2");
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : id) h = (h ^ c) * 1099511628211ull;
  int t = static_cast<int>(h % static_cast<std::uint64_t>(speaker_pool - 1));
  return t >= source_speaker ? t + 1 : t;
}

InferItem make_infer_item(const VocabLayout& layout, TaskKind task, const codec::StreamSet& source,
                          int vc_target_speaker) {
  InferItem item;
  item.id = source.id;
  item.task = task;
  item.reference_text = source.text;
  item.target_speaker = source.speaker;
  if (task == TaskKind::VC) {
    if (vc_target_speaker < 0) throw Error(Errc::MissingInput, "VC needs a target speaker");
    const auto g = codec::global_tokens(vc_target_speaker);
    item.prompt = compose_prompt(layout, task, source, &g);
    item.target_speaker = vc_target_speaker;
  } else {
    item.prompt = compose_prompt(layout, task, source);
  }
  return item;
}

std::optional<codec::Decoded> identify_speaker(const std::vector<int>& acoustic, int hint) {
  auto attempt = [&](int s) -> std::optional<codec::Decoded> {
    try {
      return codec::decode_acoustic(acoustic, codec::global_tokens(s));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  if (acoustic.empty()) return std::nullopt;
  if (hint >= 0 && hint < codec::kMaxSpeakers)
    if (auto d = attempt(hint)) return d;
  for (int s = 0; s < codec::kMaxSpeakers; ++s)
    if (s != hint)
      if (auto d = attempt(s)) return d;
  return std::nullopt;
}

ItemScore score(const VocabLayout&, const InferItem& item, const Generation& gen) {
  ItemScore s;
  s.id = item.id;
  s.error = gen.error;
  if (item.task == TaskKind::ASR) {
    s.decoded_text = gen.result.text;
    s.correct = !gen.error && !gen.result.truncated && s.decoded_text == item.reference_text;
  } else {
    if (auto d = identify_speaker(gen.result.acoustic, item.target_speaker)) {
      s.decoded_text = d->text;
      s.decoded_speaker = d->speaker;
    } else if (!s.error) {
      s.error = "acoustic tokens do not decode under any speaker";
    }
    s.correct = !gen.error && !gen.result.truncated && s.decoded_text == item.reference_text &&
                s.decoded_speaker == item.target_speaker;
  }
  s.edits = curation::edit_counts(item.reference_text, s.decoded_text, curation::Unit::Char);
  return s;
}

nlohmann::json TaskScore::to_json() const {
  return {{"task", task_name(task)},         {"items", items},
          {"correct", correct},              {"accuracy", accuracy()},
          {"char_error_rate", char_wer()},   {"violations", violations}};
}

template <class T>
TaskScore evaluate(const model::Transformer<T>& model, const VocabLayout& layout,
                   const std::vector<InferItem>& items, const DecodePolicy& policy,
                   std::vector<ItemScore>* details) {
  TaskScore ts;
  if (!items.empty()) ts.task = items.front().task;
  for (const auto& item : items) {
    if (item.task != ts.task) throw Error(Errc::InvalidArgument, "evaluate needs a single task");
    const Generation g = generate(model, layout, item.task, item.prompt, policy);
    ItemScore s = score(layout, item, g);
    ++ts.items;
    ts.correct += s.correct;
    ts.violations += g.error.has_value();
    ts.char_edits += s.edits.distance();
    ts.char_reference += s.edits.reference_length;
    if (details) details->push_back(std::move(s));
  }
  return ts;
}

nlohmann::json result_to_json(const InferItem& item, const Generation& gen, const ItemScore& s) {
  nlohmann::json j{{"id", item.id}, {"task", task_name(item.task)}};
  switch (item.task) {
    case TaskKind::ASR:
      j["text"] = gen.result.text;
      break;
    case TaskKind::TTS:
      j["glm"] = gen.result.glm;
      j["bi"] = gen.result.bi;
      j["acoustic"] = gen.result.acoustic;
      j["decoded_text"] = s.decoded_text;
      break;
    case TaskKind::VC:
      j["acoustic"] = gen.result.acoustic;
      j["target_speaker"] = item.target_speaker;
      j["decoded_text"] = s.decoded_text;
      j["decoded_speaker"] = s.decoded_speaker;
      break;
  }
  j["truncated"] = gen.result.truncated;
  j["correct"] = s.correct;
  if (gen.error) j["error"] = *gen.error;
  return j;
}

#define GPA_INSTANTIATE(T)                                                                           \
  template Generation generate<T>(const model::Transformer<T>&, const VocabLayout&, TaskKind,     \
                                  const TokenSeq&, const DecodePolicy&);                          \
  template TaskScore evaluate<T>(const model::Transformer<T>&, const VocabLayout&,                \
                                 const std::vector<InferItem>&, const DecodePolicy&,              \
                                 std::vector<ItemScore>*);
GPA_INSTANTIATE(float)
GPA_INSTANTIATE(double)
#undef GPA_INSTANTIATE

}  // namespace gpa
