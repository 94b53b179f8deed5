// Python bindings for the core operations: discrepancy, metrics, parsing,
// template rendering, and the dataset split.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tide/dataset.hpp"
#include "tide/discrepancy.hpp"
#include "tide/metrics.hpp"
#include "tide/prompting.hpp"
#include "tide/task_model.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace tide;

namespace {

std::vector<RelationTriple> triples_from_py(
    const std::vector<std::tuple<int, int, std::set<std::string>>>& raw) {
    std::vector<RelationTriple> out;
    out.reserve(raw.size());
    for (const auto& [f, t, types] : raw) out.push_back({f, t, types});
    return out;
}

}  // namespace

PYBIND11_MODULE(_tide, m) {
    m.doc() = "criteria-optimization core: discrepancy, metrics, parsing";

    py::enum_<TaskKind>(m, "TaskKind")
        .value("AES", TaskKind::AES)
        .value("ACD", TaskKind::ACD)
        .value("ARI", TaskKind::ARI);

    m.def("d_aes", &d_aes, py::arg("gold"), py::arg("pred"));

    m.def(
        "d_acd",
        [](const std::vector<std::string>& gold,
           const std::vector<std::pair<int, std::string>>& pred) {
            std::vector<UnitLabel> units;
            for (const auto& [idx, label] : pred) units.push_back({idx, label, ""});
            return d_acd(gold, units);
        },
        py::arg("gold"), py::arg("pred"),
        "gold: label list; pred: list of (unit_index, label)");

    m.def(
        "d_ari",
        [](const std::vector<std::tuple<int, int, std::set<std::string>>>& gold,
           const std::vector<std::tuple<int, int, std::set<std::string>>>& pred,
           int penalty) {
            DiscrepancyConfig cfg;
            cfg.ari_penalty = penalty;
            return d_ari(triples_from_py(gold), triples_from_py(pred), cfg);
        },
        py::arg("gold"), py::arg("pred"), py::arg("penalty") = 2,
        "triples as (from_index, to_index, {types})");

    m.def(
        "qwk",
        [](const std::vector<int>& gold, const std::vector<int>& pred, int k) {
            return qwk(gold, pred, k);
        },
        py::arg("gold"), py::arg("pred"), py::arg("k"));

    m.def(
        "pearson",
        [](const std::vector<double>& gold, const std::vector<double>& pred) {
            return pearson(gold, pred);
        },
        py::arg("gold"), py::arg("pred"));

    m.def("classification_f1", &classification_f1, py::arg("gold"), py::arg("pred"),
          "returns (micro, macro)");

    m.def(
        "ari_f1",
        [](const std::vector<std::vector<std::tuple<int, int, std::set<std::string>>>>& gold,
           const std::vector<std::vector<std::tuple<int, int, std::set<std::string>>>>& pred) {
            std::vector<std::vector<RelationTriple>> g, p;
            for (const auto& e : gold) g.push_back(triples_from_py(e));
            for (const auto& e : pred) p.push_back(triples_from_py(e));
            AriF1 f = ari_f1(g, p);
            return py::dict("micro"_a = f.micro, "macro"_a = f.macro,
                            "pair_precision"_a = f.pair_precision,
                            "pair_recall"_a = f.pair_recall, "pair_f1"_a = f.pair_f1);
        },
        py::arg("gold"), py::arg("pred"));

    m.def("strip_reasoning", &strip_reasoning, py::arg("raw"),
          py::arg("open_marker") = "<think>", py::arg("close_marker") = "</think>");

    m.def(
        "parse_score",
        [](const std::string& raw, int score_min, int score_max) {
            auto p = parse_score(raw, ScoreScale{score_min, score_max});
            return py::dict("score"_a = p.score, "rationale"_a = p.rationale);
        },
        py::arg("raw"), py::arg("score_min") = 1, py::arg("score_max") = 5);

    m.def(
        "parse_verdict",
        [](const std::string& raw) {
            auto v = parse_verdict(raw);
            return py::dict(
                "winner"_a = (v.winner == DebateSide::ExpertA ? "Expert A" : "Expert B"),
                "reason"_a = v.reason);
        },
        py::arg("raw"));

    m.def(
        "parse_update",
        [](const std::string& raw) {
            auto u = parse_update(raw);
            return py::dict("updated_criteria"_a = u.updated_criteria,
                            "analysis"_a = u.analysis);
        },
        py::arg("raw"));

    m.def(
        "parse_unit_lines",
        [](const std::string& raw, TaskKind task, int unit_count) {
            auto p = parse_unit_lines(raw, task, unit_count);
            py::list units, relations;
            for (const auto& u : p.units)
                units.append(py::dict("index"_a = u.index, "label"_a = u.label,
                                      "explanation"_a = u.explanation));
            for (const auto& r : p.relations)
                relations.append(py::dict("from"_a = r.triple.from_index,
                                          "to"_a = r.triple.to_index,
                                          "types"_a = r.triple.types,
                                          "explanation"_a = r.explanation));
            return py::dict("units"_a = units, "relations"_a = relations,
                            "missing_units"_a = p.missing_units,
                            "warnings"_a = p.warnings);
        },
        py::arg("raw"), py::arg("task"), py::arg("unit_count"));

    m.def(
        "render_template",
        [](const std::string& id, const std::map<std::string, std::string>& bindings) {
            static const TemplateStore store;
            return store.render(id, bindings);
        },
        py::arg("id"), py::arg("bindings"));

    m.def(
        "split_indices",
        [](std::size_t n, std::uint32_t seed, double train_fraction) {
            Dataset ds;
            ds.task = TaskKind::AES;
            for (std::size_t i = 0; i < n; ++i) {
                Sample s;
                s.task = TaskKind::AES;
                s.essay.id = std::to_string(i);
                s.gold.score = 1;
                ds.samples.push_back(s);
            }
            SplitSpec spec;
            spec.seed = seed;
            spec.train_fraction = train_fraction;
            auto [train, eval] = shuffle_split(ds, spec);
            std::vector<std::size_t> t, e;
            for (const auto& s : train.samples) t.push_back(std::stoul(s.essay.id));
            for (const auto& s : eval.samples) e.push_back(std::stoul(s.essay.id));
            return py::make_tuple(t, e);
        },
        py::arg("n"), py::arg("seed") = 42, py::arg("train_fraction") = 0.6,
        "deterministic shuffle-split of 0..n-1; returns (train, eval) index lists");
}
