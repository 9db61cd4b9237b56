// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "gpa/bench.hpp"
#include "gpa/checkpoint.hpp"
#include "gpa/cli.hpp"
#include "gpa/codec.hpp"
#include "gpa/composer.hpp"
#include "gpa/curation.hpp"
#include "gpa/error.hpp"
#include "gpa/inference.hpp"
#include "gpa/token_space.hpp"

namespace py = pybind11;
using namespace gpa;

namespace {

PyObject* g_error = nullptr;

// json -> Python via the json module; keeps nesting and types intact.
py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

const VocabLayout& layout() {
  static const VocabLayout l = build_vocab(default_vocab_config());
  return l;
}

py::dict streams_dict(const codec::StreamSet& s) {
  py::dict d;
  d["text"] = s.text;
  d["speaker"] = s.speaker;
  d["glm"] = s.glm;
  d["bi"] = s.bi;
  d["acoustic"] = s.acoustic;
  d["global"] = s.global;
  d["duration"] = s.audio_duration();
  return d;
}

curation::HypothesisSet hypothesis_set(const std::vector<std::string>& texts, const std::string& id = "") {
  curation::HypothesisSet s{id, {}};
  for (std::size_t i = 0; i < texts.size(); ++i) s.hypotheses.push_back({"h" + std::to_string(i), texts[i]});
  return s;
}

curation::Unit unit_from(const std::string& unit) {
  if (unit == "word") return curation::Unit::Word;
  if (unit == "char") return curation::Unit::Char;
  throw Error(Errc::InvalidArgument, "unit must be 'word' or 'char'");
}

class Model {
 public:
  explicit Model(const std::string& path) : ck_(std::make_unique<Checkpoint>(load_checkpoint(path))) {
    check_layout_fits_codec(ck_->layout);
  }

  py::object config() const { return to_py(ck_->model.config().to_json()); }
  std::size_t num_params() const { return ck_->model.num_params(); }
  int step() const { return ck_->step; }

  py::object infer(const std::string& task_name, const std::string& text, int speaker, int target_speaker,
                   bool constrained) const {
    const TaskKind task = task_from_name(task_name);
    const auto src = codec::encode(text, speaker);
    if (task == TaskKind::VC && target_speaker < 0) target_speaker = vc_target_for(text, speaker, 64, 7);
    const auto item = make_infer_item(ck_->layout, task, src, task == TaskKind::VC ? target_speaker : -1);
    Generation g;
    {
      py::gil_scoped_release release;
      g = generate(ck_->model, ck_->layout, task, item.prompt, DecodePolicy{{}, constrained});
    }
    return to_py(result_to_json(item, g, score(ck_->layout, item, g)));
  }

 private:
  std::unique_ptr<Checkpoint> ck_;
};

}  // namespace

PYBIND11_MODULE(_gpa, m) {
  m.doc() = "Core bindings for the gpa speech token toolkit";

  g_error = PyErr_NewException("gpa.GpaError", PyExc_ValueError, nullptr);
  m.attr("GpaError") = py::handle(g_error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_steal<py::object>(PyObject_CallFunction(g_error, "s", e.what()));
      if (!exc) return;  // Python error already set
      exc.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(g_error, exc.ptr());
    }
  });

  // token space
  m.def("vocab_layout", [] { return to_py(layout().to_json()); }, "Default unified vocabulary layout");
  m.def("vocab_size", [] { return layout().total(); });
  m.def(
      "partition_of", [](int id) { return std::string(partition_name(layout().partition_of(id))); }, py::arg("token"));

  // mock codec
  m.def(
      "encode", [](const std::string& text, int speaker) { return streams_dict(codec::encode(text, speaker)); },
      py::arg("text"), py::arg("speaker") = 0);
  m.def(
      "decode_acoustic",
      [](const std::vector<int>& acoustic, const std::vector<int>& global) {
        const auto d = codec::decode_acoustic(acoustic, global);
        return py::make_tuple(d.text, d.speaker);
      },
      py::arg("acoustic"), py::arg("global_tokens"));

  // composer
  m.def(
      "compose_prompt",
      [](const std::string& task_name, const std::string& text, int speaker, int target_speaker) {
        const TaskKind task = task_from_name(task_name);
        const auto src = codec::encode(text, speaker);
        return make_infer_item(layout(), task, src, task == TaskKind::VC ? target_speaker : -1).prompt.ids;
      },
      py::arg("task"), py::arg("text"), py::arg("speaker") = 0, py::arg("target_speaker") = 1);

  // curation
  m.def(
      "normalize",
      [](const std::vector<double>& samples) { return curation::normalize({samples, 16000}).samples; },
      py::arg("samples"));
  m.def(
      "wer",
      [](const std::string& ref, const std::string& hyp, const std::string& unit) {
        return curation::wer(ref, hyp, unit_from(unit));
      },
      py::arg("reference"), py::arg("hypothesis"), py::arg("unit") = "word");
  m.def(
      "pwer", [](const std::vector<std::string>& texts) { return curation::pwer(hypothesis_set(texts)); },
      py::arg("hypotheses"));
  m.def(
      "medoid", [](const std::vector<std::string>& texts) { return curation::medoid(hypothesis_set(texts)).text; },
      py::arg("hypotheses"));
  m.def(
      "consensus_keeps",
      [](const std::vector<std::string>& texts, double threshold) {
        return !curation::consensus_filter({hypothesis_set(texts, "x")}, threshold).kept.empty();
      },
      py::arg("hypotheses"), py::arg("threshold") = curation::kDefaultPwerThreshold);
  m.def(
      "refine_punctuation",
      [](const std::vector<py::dict>& words) {
        std::vector<curation::AlignedWord> ws;
        for (const auto& w : words)
          ws.push_back(curation::aligned_word_from_json(
              nlohmann::json::parse(py::module_::import("json").attr("dumps")(w).cast<std::string>())));
        return curation::refine_punctuation(ws);
      },
      py::arg("words"), "words: [{'w': 'hello,', 'start': 0.0, 'end': 0.5}, ...]");

  // bench math
  m.def(
      "percentile", [](const std::vector<double>& v, double p) { return bench::percentile(v, p); },
      py::arg("samples"), py::arg("p"));
  m.def("rtf", &bench::rtf, py::arg("generation_time_s"), py::arg("audio_duration_s"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("config", &Model::config)
      .def_property_readonly("num_params", &Model::num_params)
      .def_property_readonly("step", &Model::step)
      .def("infer", &Model::infer, py::arg("task"), py::arg("text"), py::arg("speaker") = 0,
           py::arg("target_speaker") = -1, py::arg("constrained") = false);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> store{"gpa"};
        store.insert(store.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& s : store) argv.push_back(s.c_str());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the gpa command line in-process; returns its exit code");
}
