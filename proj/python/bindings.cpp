#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "knnmem/collection.hpp"
#include "knnmem/engine.hpp"
#include "knnmem/harness.hpp"
#include "knnmem/persistence.hpp"
#include "knnmem/report.hpp"
#include "knnmem/schedule.hpp"

namespace py = pybind11;
using namespace knnmem;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::span<const float> as_span(const FloatArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d float array");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

std::vector<std::span<const float>> rows(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d float array");
  std::vector<std::span<const float>> out;
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(a.data() + i * d, d);
  return out;
}

py::dict to_dict(const ClassificationResult& r) {
  py::list neighbors;
  for (const auto& n : r.neighbors) {
    neighbors.append(py::make_tuple(n.record_id, n.label_id, n.similarity));
  }
  py::dict d;
  d["predicted_label_id"] = r.predicted_label_id;
  d["neighbors"] = neighbors;
  d["votes"] = r.votes;
  d["summed_similarity"] = r.summed_similarity;
  return d;
}

void insert_arrays(Collection& c, const std::vector<RecordId>& ids,
                   const std::vector<LabelId>& labels, const FloatArray& vectors,
                   const std::vector<std::string>& tags) {
  const auto vs = rows(vectors);
  if (ids.size() != vs.size() || labels.size() != vs.size() ||
      (!tags.empty() && tags.size() != vs.size())) {
    throw py::value_error("ids, labels, vectors and source_tags must have equal length");
  }
  std::vector<EmbeddingRecord> records;
  records.reserve(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    records.push_back(EmbeddingRecord{ids[i], labels[i], {vs[i].begin(), vs[i].end()},
                                      tags.empty() ? std::string{} : tags[i]});
  }
  c.insert(records);
}

}  // namespace

PYBIND11_MODULE(_knnmem, m) {
  m.doc() = "Exact kNN classification over a mutable, persistent embedding store.";

  static py::exception<Error> error(m, "KnnmemError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("offending_field") = e.offending_field();
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<Collection>(m, "Collection")
      .def(py::init<std::string, std::size_t, std::vector<std::string>>(), py::arg("name"),
           py::arg("dimension"), py::arg("labels"))
      .def_property_readonly("name", &Collection::name)
      .def_property_readonly("dimension", &Collection::dimension)
      .def_property_readonly("labels", &Collection::labels)
      .def_property_readonly("generation", &Collection::generation)
      .def("__len__", &Collection::size)
      .def("__contains__", &Collection::contains)
      .def(
          "insert",
          [](Collection& c, const std::vector<RecordId>& ids,
             const std::vector<LabelId>& labels, const FloatArray& vectors,
             const std::vector<std::string>& source_tags) {
            insert_arrays(c, ids, labels, vectors, source_tags);
            return ids.size();
          },
          py::arg("ids"), py::arg("labels"), py::arg("vectors"),
          py::arg("source_tags") = std::vector<std::string>{},
          "All-or-nothing batch insert; returns the count inserted.")
      .def(
          "erase",
          [](Collection& c, const std::vector<RecordId>& ids) {
            auto r = c.erase(ids);
            return py::make_tuple(r.deleted, r.not_live);
          },
          py::arg("ids"), "Returns (deleted_count, ids_not_live).")
      .def("relabel", &Collection::relabel, py::arg("id"), py::arg("label_id"))
      .def(
          "scan",
          [](const Collection& c) {
            const auto records = c.scan();
            std::vector<RecordId> ids;
            std::vector<LabelId> labels;
            py::array_t<float> vectors(
                {static_cast<py::ssize_t>(records.size()), static_cast<py::ssize_t>(c.dimension())});
            auto* out = vectors.mutable_data();
            for (std::size_t i = 0; i < records.size(); ++i) {
              ids.push_back(records[i].id);
              labels.push_back(records[i].label_id);
              std::copy(records[i].vector.begin(), records[i].vector.end(),
                        out + i * c.dimension());
            }
            return py::make_tuple(ids, labels, vectors);
          },
          "Live records in ascending id order as (ids, labels, vectors).");

  m.def(
      "save",
      [](Collection& c, const std::filesystem::path& dir) {
        const auto manifest = save(c, dir);
        return manifest.record_count;
      },
      py::arg("collection"), py::arg("path"));
  m.def("load", &load, py::arg("path"));

  m.def(
      "top_k",
      [](const Collection& c, const FloatArray& q, std::size_t k) {
        std::vector<py::tuple> out;
        for (const auto& n : top_k(c, as_span(q), k)) {
          out.push_back(py::make_tuple(n.record_id, n.label_id, n.similarity));
        }
        return out;
      },
      py::arg("collection"), py::arg("query"), py::arg("k") = kDefaultK);
  m.def(
      "classify",
      [](const Collection& c, const FloatArray& q, std::size_t k) {
        return to_dict(classify(c, as_span(q), EngineConfig{k, 1}));
      },
      py::arg("collection"), py::arg("query"), py::arg("k") = kDefaultK);
  m.def(
      "classify_batch",
      [](const Collection& c, const FloatArray& queries, std::size_t k) {
        const auto qs = rows(queries);
        std::vector<BatchOutcome> outcomes;
        {
          py::gil_scoped_release release;
          outcomes = classify_batch(c, qs, EngineConfig{k, 0});
        }
        py::list out;
        for (const auto& o : outcomes) {
          if (const auto* e = std::get_if<Error>(&o)) {
            py::dict d;
            d["error"] = std::string(to_string(e->code()));
            d["message"] = e->what();
            out.append(d);
          } else {
            out.append(to_dict(std::get<ClassificationResult>(o)));
          }
        }
        return out;
      },
      py::arg("collection"), py::arg("queries"), py::arg("k") = kDefaultK,
      "One result dict per query row; failures become {'error', 'message'}.");
  m.def(
      "neighbor_attribution",
      [](const Collection& c, const FloatArray& queries, const std::vector<LabelId>& labels,
         std::size_t k) {
        const auto qs = rows(queries);
        if (qs.size() != labels.size()) throw py::value_error("one label per query required");
        std::vector<LabeledQuery> lq;
        for (std::size_t i = 0; i < qs.size(); ++i) lq.push_back(LabeledQuery{qs[i], labels[i]});
        std::vector<std::pair<RecordId, std::uint64_t>> out;
        for (const auto& u : neighbor_attribution(c, lq, EngineConfig{k, 0})) {
          out.emplace_back(u.record_id, u.count);
        }
        return out;
      },
      py::arg("collection"), py::arg("queries"), py::arg("labels"), py::arg("k") = kDefaultK);
  m.def(
      "evaluate_accuracy",
      [](const Collection& support, const Collection& test, std::size_t k) {
        return evaluate_accuracy(to_labeled_set(support, SetRole::kSupport),
                                 to_labeled_set(test, SetRole::kTest), EngineConfig{k, 0});
      },
      py::arg("support"), py::arg("test"), py::arg("k") = kDefaultK);
  m.def(
      "run_protocol",
      [](const std::string& schedule_json, const Collection& support, const Collection& test) {
        const auto schedule = parse_schedule(schedule_json);
        std::vector<NamedDataset> datasets{NamedDataset{
            support.name(), to_labeled_set(support), to_labeled_set(test, SetRole::kTest)}};
        return report_to_csv(run_schedule(schedule, datasets));
      },
      py::arg("schedule_json"), py::arg("support"), py::arg("test"),
      "Runs a schedule and returns the report as CSV text.");
  m.attr("DEFAULT_K") = kDefaultK;
}
