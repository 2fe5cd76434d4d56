// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ageshift/adapt/finetune.hpp"
#include "ageshift/adapt/ntxent.hpp"
#include "ageshift/cli/cli.hpp"
#include "ageshift/core/config.hpp"
#include "ageshift/core/manifest.hpp"
#include "ageshift/error.hpp"
#include "ageshift/evalkit/metrics.hpp"
#include "ageshift/evalkit/report.hpp"
#include "ageshift/fixtures/fixture.hpp"
#include "ageshift/p2pedit/edit.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "ageshift/util/hash.hpp"

namespace py = pybind11;
using namespace ageshift;

namespace {

using ImageArray = py::array_t<double, py::array::c_style>;

ImageArray to_numpy(const Image& img) {
  ImageArray out({img.height, img.width, 3});
  auto v = out.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) v(y, x, c) = img.pixels(y * img.width + x, c);
  return out;
}

Image from_numpy(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an (height, width, 3) array");
  auto v = a.unchecked<3>();
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) img.pixels(y * img.width + x, c) = v(y, x, c);
  return img;
}

py::dict age_metric_dict(const std::vector<EvalRecord>& records) {
  const AgeMetric m = age_metric(records);
  py::dict d;
  d["per_target"] = m.per_target;
  d["counts"] = m.counts;
  d["all"] = m.all;
  return d;
}

std::vector<ImageArray> fixture_transform(Fixture& fx, const std::string& input_ref, std::optional<int> alpha_in,
                                          const std::vector<int>& targets) {
  TransformContext ctx{fx.tokenizer, &fx.images, &fx.estimator};
  std::vector<TransformResult> rs;
  {
    py::gil_scoped_release release;
    rs = transform_ages({input_ref, alpha_in, 0, fx.config.seed}, targets, fx.profile, nullptr, *fx.backend,
                        fx.config, ctx);
  }
  std::vector<ImageArray> out;
  for (const auto& r : rs) out.push_back(to_numpy(r.image));
  return out;
}

py::tuple cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_cli(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_ageshift, m) {
  m.doc() = "Personalised facial age editing on a desk-scale diffusion backend";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<SpanResolutionError>(m, "SpanResolutionError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<StageError>(m, "StageError", base.ptr());

  py::enum_<Gender>(m, "Gender").value("male", Gender::male).value("female", Gender::female);

  py::class_<ReferenceImage>(m, "ReferenceImage")
      .def(py::init<std::string, int>(), py::arg("image_ref"), py::arg("age"))
      .def_readwrite("image_ref", &ReferenceImage::image_ref)
      .def_readwrite("age", &ReferenceImage::age);

  py::class_<IdentityProfile>(m, "IdentityProfile")
      .def(py::init([](std::string token, Gender gender, std::vector<ReferenceImage> refs) {
             return IdentityProfile{std::move(token), gender, std::move(refs)};
           }),
           py::arg("token"), py::arg("gender"), py::arg("references") = std::vector<ReferenceImage>{})
      .def_readwrite("token", &IdentityProfile::token)
      .def_readwrite("gender", &IdentityProfile::gender)
      .def_readwrite("references", &IdentityProfile::references)
      .def("violations", [](const IdentityProfile& p) {
        std::vector<std::string> out;
        for (const auto& v : validate_profile(p)) out.push_back(v.message);
        return out;
      });
  m.def("load_profile", &load_profile, py::arg("path"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_static("parse", [](const std::string& text) { return parse_config(text); }, py::arg("text"))
      .def("format", &format_config)
      .def("hash", &config_hash)
      .def("set", [](PipelineConfig& c, const std::string& k, const std::string& v) {
        set_config_value(c, k, v);
        validate_config(c);
      })
      .def_readwrite("iterations", &PipelineConfig::iterations)
      .def_readwrite("learning_rate", &PipelineConfig::learning_rate)
      .def_readwrite("lora_rank", &PipelineConfig::lora_rank)
      .def_readwrite("image_size", &PipelineConfig::image_size)
      .def_readwrite("diffusion_steps", &PipelineConfig::diffusion_steps)
      .def_readwrite("guidance_scale", &PipelineConfig::guidance_scale)
      .def_readwrite("use_lora", &PipelineConfig::use_lora)
      .def_readwrite("use_refined_regset", &PipelineConfig::use_refined_regset)
      .def_readwrite("use_hyphenated_age", &PipelineConfig::use_hyphenated_age)
      .def_readwrite("use_ref_age", &PipelineConfig::use_ref_age)
      .def_readwrite("use_extreme_nouns", &PipelineConfig::use_extreme_nouns)
      .def_readwrite("cross_replace_fraction", &PipelineConfig::cross_replace_fraction)
      .def_readwrite("self_replace_fraction", &PipelineConfig::self_replace_fraction)
      .def_readwrite("seed", &PipelineConfig::seed);

  py::class_<PromptFlags>(m, "PromptFlags")
      .def(py::init([](bool hyphenated_age, bool ref_age, bool extreme_nouns) {
             return PromptFlags{hyphenated_age, ref_age, extreme_nouns};
           }),
           py::arg("hyphenated_age") = true, py::arg("ref_age") = true, py::arg("extreme_nouns") = true)
      .def_readwrite("hyphenated_age", &PromptFlags::hyphenated_age)
      .def_readwrite("ref_age", &PromptFlags::ref_age)
      .def_readwrite("extreme_nouns", &PromptFlags::extreme_nouns);

  py::class_<PromptBundle>(m, "PromptBundle")
      .def_readonly("p_ref", &PromptBundle::p_ref)
      .def_readonly("p_reg", &PromptBundle::p_reg)
      .def_readonly("p_in", &PromptBundle::p_in)
      .def_readonly("p_tar", &PromptBundle::p_tar)
      .def_readonly("replace_spans_in", &PromptBundle::replace_spans_in)
      .def_readonly("replace_spans_tar", &PromptBundle::replace_spans_tar)
      .def_property_readonly("alignment", [](const PromptBundle& b) {
        std::vector<std::pair<int, int>> out;
        for (const auto& a : b.alignment) out.emplace_back(a.target, a.source);
        return out;
      });

  m.def("person_word", &person_word, py::arg("age"), py::arg("gender"), py::arg("extreme_nouns") = true);
  m.def("age_phrase", &age_phrase, py::arg("age"), py::arg("hyphenated") = true);
  m.def("build_bundle", &build_bundle, py::arg("profile"), py::arg("alpha_in"), py::arg("alpha_tar"),
        py::arg("ref_age"), py::arg("reg_age"), py::arg("flags") = PromptFlags{});

  py::class_<WordpieceTokenizer>(m, "Tokenizer")
      .def_static("toy", &WordpieceTokenizer::toy, py::return_value_policy::reference)
      .def_static("from_file", &WordpieceTokenizer::from_file, py::arg("path"))
      .def("encode", &WordpieceTokenizer::encode, py::arg("text"))
      .def("offsets", [](const WordpieceTokenizer& t, const std::string& text) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& s : t.offsets(text)) out.emplace_back(s.begin, s.end);
        return out;
      }, py::arg("text"))
      .def("piece", &WordpieceTokenizer::piece, py::arg("id"))
      .def_property_readonly("vocab_size", &WordpieceTokenizer::vocab_size);

  m.def("attach_spans", [](const PromptBundle& b, const WordpieceTokenizer& t) { return attach_spans(b, t); },
        py::arg("bundle"), py::arg("tokenizer"));

  m.def("ntxent", [](const Matrix& e, const PairList& pairs, double tau) { return ntxent(e, pairs, tau); },
        py::arg("embeddings"), py::arg("positives"), py::arg("temperature"));

  py::class_<EvalRecord>(m, "EvalRecord")
      .def(py::init([](int target, int estimated, std::optional<double> id_distance, std::string output_ref) {
             EvalRecord r;
             r.target_age = target;
             r.estimated_age = estimated;
             r.id_distance = id_distance;
             r.output_ref = std::move(output_ref);
             return r;
           }),
           py::arg("target_age"), py::arg("estimated_age"), py::arg("id_distance") = std::nullopt,
           py::arg("output_ref") = "")
      .def_readwrite("target_age", &EvalRecord::target_age)
      .def_readwrite("estimated_age", &EvalRecord::estimated_age)
      .def_readwrite("id_distance", &EvalRecord::id_distance);
  m.def("age_metric", &age_metric_dict, py::arg("records"));
  m.def("cosine_distance", &cosine_distance, py::arg("a"), py::arg("b"));
  m.def("default_target_ages", &default_target_ages);

  py::class_<Fixture>(m, "Fixture")
      .def_readonly("seed", &Fixture::seed)
      .def_readonly("profile", &Fixture::profile)
      .def_readwrite("config", &Fixture::config)
      .def_property_readonly("inputs", [](const Fixture& f) {
        std::vector<std::pair<std::string, int>> out;
        for (const auto& e : f.inputs) out.emplace_back(e.image_ref, e.age);
        return out;
      })
      .def_property_readonly("regset_size", [](const Fixture& f) { return f.regset.size(); })
      .def("hash", &Fixture::hash)
      .def("image", [](const Fixture& f, const std::string& ref) { return to_numpy(f.images.load(ref)); },
           py::arg("ref"))
      .def("estimate_age", [](const Fixture& f, const ImageArray& a) { return f.estimator.estimate(from_numpy(a)); },
           py::arg("image"))
      .def("embed", [](const Fixture& f, const ImageArray& a) { return Vector(f.embedder.embed(from_numpy(a))); },
           py::arg("image"))
      .def("finetune", [](Fixture& f) {
        FinetuneResult r;
        {
          py::gil_scoped_release release;
          r = finetune(f.profile, f.regset, f.config, *f.backend, &f.embedder, f.images);
        }
        std::vector<double> losses;
        for (const auto& s : r.log) losses.push_back(s.total);
        return losses;
      })
      .def("weights_hash", [](const Fixture& f) { return f.backend->weights_hash(); })
      .def("transform", &fixture_transform, py::arg("input_ref"), py::arg("alpha_in") = std::nullopt,
           py::arg("target_ages") = std::vector<int>{80})
      .def("write", &write_fixture, py::arg("dir"));
  m.def("make_fixture", &make_fixture, py::arg("seed") = 0);

  m.def("image_sha256", [](const ImageArray& a) { return sha256_hex(from_numpy(a).to_rgb8()); }, py::arg("image"));
  m.def("run_cli", &cli, py::arg("args"),
        "Runs one ageshift command in-process; returns (exit_code, stdout, stderr).");
}
