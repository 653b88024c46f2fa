#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "condet/cli.hpp"
#include "condet/encoder.hpp"
#include "condet/error.hpp"
#include "condet/losses.hpp"
#include "condet/metrics.hpp"
#include "condet/transform.hpp"
#include "condet/zeroshot.hpp"

namespace py = pybind11;
using namespace condet;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw UsageError("expected a non-empty list of rows");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw UsageError("rows must have equal length");
  }
  return Matrix::from_rows(rows);
}

KernelSpec kernel_spec(const std::string& kind, std::optional<double> bandwidth) {
  KernelSpec k{parse_kernel_kind(kind), bandwidth};
  k.validate();
  return k;
}

// A loaded checkpoint plus the tokenizer settings it was trained with.
class Model {
 public:
  Model(const std::filesystem::path& path, std::size_t max_seq_len)
      : params_(load_checkpoint(path)), tokenizer_{params_.dims().vocab, max_seq_len} {}

  std::vector<double> predict(const std::vector<std::string>& texts) const {
    std::vector<double> out;
    for (const auto& t : texts) out.push_back(classify(encode(tokenize(t, tokenizer_), params_), params_));
    return out;
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const {
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(encode(tokenize(t, tokenizer_), params_));
    return out;
  }

  py::dict dims() const {
    const auto& d = params_.dims();
    py::dict out;
    out["vocab"] = d.vocab;
    out["embed"] = d.embed;
    out["hidden"] = d.hidden;
    out["proj_hidden"] = d.proj_hidden;
    out["proj"] = d.proj;
    return out;
  }

 private:
  ModelParams params_;
  TokenizerConfig tokenizer_;
};

}  // namespace

PYBIND11_MODULE(_condet, m) {
  m.doc() = "Bindings for the condet detector library";
  m.attr("__version__") = "0.1.0";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("tokenize", [](const std::string& text, std::size_t vocab_size, std::size_t max_seq_len) {
    return tokenize(text, TokenizerConfig{vocab_size, max_seq_len});
  }, py::arg("text"), py::arg("vocab_size") = 8192, py::arg("max_seq_len") = 256);

  py::class_<Thesaurus>(m, "Thesaurus")
      .def(py::init<>())
      .def_static("from_tsv", [](const std::string& text) {
        std::istringstream in(text);
        return Thesaurus::parse(in, "<tsv>");
      })
      .def_static("load", &Thesaurus::load)
      .def("__len__", &Thesaurus::size)
      .def("to_tsv", [](const Thesaurus& t) {
        std::ostringstream out;
        t.write(out);
        return out.str();
      });

  m.def("transform", [](const std::string& text, const Thesaurus& thesaurus, const std::string& kind, double rate,
                        std::uint64_t seed, double crop_fraction) {
    TransformConfig cfg;
    cfg.kind = parse_transform_kind(kind);
    cfg.rate = rate;
    cfg.seed = seed;
    cfg.crop_fraction = crop_fraction;
    return apply_transform(text, thesaurus, cfg);
  }, py::arg("text"), py::arg("thesaurus") = Thesaurus{}, py::arg("kind") = "synonym", py::arg("rate") = 0.1,
        py::arg("seed") = 0, py::arg("crop_fraction") = 0.9);

  m.def("mmd", [](const std::vector<std::vector<double>>& xs, const std::vector<std::vector<double>>& ys,
                  const std::string& kernel, std::optional<double> bandwidth) {
    return mmd(to_matrix(xs), to_matrix(ys), kernel_spec(kernel, bandwidth));
  }, py::arg("source"), py::arg("target"), py::arg("kernel") = "rbf", py::arg("bandwidth") = py::none());

  m.def("ntxent", [](const std::vector<std::vector<double>>& anchors, const std::vector<std::vector<double>>& positives,
                     double temperature) {
    ContrastiveOptions options;
    options.temperature = temperature;
    return ntxent(to_matrix(anchors), to_matrix(positives), options);
  }, py::arg("anchors"), py::arg("positives"), py::arg("temperature") = 0.5);

  m.def("auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return auroc(scores, labels);
  }, py::arg("scores"), py::arg("labels"));

  m.def("f1", [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size()) throw UsageError("score and label counts differ");
    std::vector<ScoredItem> items;
    for (std::size_t i = 0; i < scores.size(); ++i) items.push_back({std::to_string(i), scores[i], labels[i]});
    return f1_score(items, threshold).f1;
  }, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  m.def("gltr_scores", [](const std::vector<double>& logp, const std::vector<std::uint64_t>& rank,
                          const std::vector<double>& entropy) {
    TokenLogProbRecord r{"", std::vector<std::string>(logp.size()), logp, rank, entropy};
    const auto s = gltr_scores(r);
    py::dict out;
    out["log_prob"] = s.log_prob;
    out["rank"] = s.rank;
    out["log_rank"] = s.log_rank;
    out["entropy"] = s.entropy;
    return out;
  }, py::arg("logp"), py::arg("rank"), py::arg("entropy"));

  m.def("detectgpt_score", [](double orig, const std::vector<double>& perturbed, bool normalized) {
    return detectgpt_score(PerturbationRecord{"", orig, perturbed}, normalized);
  }, py::arg("orig_logp_sum"), py::arg("perturbed_logp_sums"), py::arg("normalized") = false);

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&, std::size_t>(), py::arg("checkpoint"), py::arg("max_seq_len") = 256)
      .def("predict", &Model::predict, py::arg("texts"))
      .def("embed", &Model::embed, py::arg("texts"))
      .def_property_readonly("dims", &Model::dims);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    py::gil_scoped_release release;
    return run_cli(args);
  }, py::arg("args"));
}
