#include "tide/metrics.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "tide/errors.hpp"

namespace tide {

using nlohmann::json;

double qwk(const std::vector<int>& gold, const std::vector<int>& pred, int k,
           bool* degenerate) {
    if (gold.size() != pred.size())
        throw LengthMismatch("qwk: unequal lengths");
    if (gold.size() < 2) throw LengthMismatch("qwk: need at least 2 pairs");
    if (degenerate) *degenerate = false;

    const std::size_t n = gold.size();
    std::vector<std::vector<double>> observed(k, std::vector<double>(k, 0.0));
    std::vector<double> gold_marginal(k, 0.0), pred_marginal(k, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        int g = gold[t] - 1, p = pred[t] - 1;
        if (g < 0 || g >= k || p < 0 || p >= k)
            throw LengthMismatch("qwk: value outside 1.." + std::to_string(k));
        observed[g][p] += 1.0 / n;
        gold_marginal[g] += 1.0 / n;
        pred_marginal[p] += 1.0 / n;
    }

    const double denom_w = (k > 1) ? double(k - 1) * (k - 1) : 1.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            double w = double(i - j) * (i - j) / denom_w;
            num += w * observed[i][j];
            den += w * gold_marginal[i] * pred_marginal[j];
        }
    }
    if (den == 0.0) {
        // both sides constant and equal: perfect agreement by convention
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    return 1.0 - num / den;
}

double pearson(const std::vector<double>& gold, const std::vector<double>& pred,
               bool* undefined) {
    if (gold.size() != pred.size())
        throw LengthMismatch("pearson: unequal lengths");
    if (gold.size() < 2) throw LengthMismatch("pearson: need at least 2 pairs");
    if (undefined) *undefined = false;

    const double n = static_cast<double>(gold.size());
    double mg = 0, mp = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) { mg += gold[i]; mp += pred[i]; }
    mg /= n; mp /= n;
    double sgg = 0, spp = 0, sgp = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        double dg = gold[i] - mg, dp = pred[i] - mp;
        sgg += dg * dg; spp += dp * dp; sgp += dg * dp;
    }
    if (sgg == 0.0 || spp == 0.0) {
        if (undefined) *undefined = true;
        return 0.0;
    }
    return sgp / std::sqrt(sgg * spp);
}

namespace {

double f1_from_counts(double tp, double fp, double fn) {
    double den = tp + 0.5 * (fp + fn);
    return den == 0.0 ? 0.0 : tp / den;
}

}  // namespace

std::pair<double, double> classification_f1(const std::vector<std::string>& gold,
                                            const std::vector<std::string>& pred) {
    if (gold.size() != pred.size())
        throw LengthMismatch("classification_f1: unequal lengths");

    std::set<std::string> classes(gold.begin(), gold.end());
    classes.insert(pred.begin(), pred.end());

    double tp_all = 0;
    std::map<std::string, std::tuple<double, double, double>> per_class;  // tp, fp, fn
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == pred[i]) {
            ++tp_all;
            ++std::get<0>(per_class[gold[i]]);
        } else {
            ++std::get<1>(per_class[pred[i]]);
            ++std::get<2>(per_class[gold[i]]);
        }
    }

    double micro = gold.empty() ? 0.0 : tp_all / static_cast<double>(gold.size());
    double macro = 0;
    for (const auto& c : classes) {
        auto [tp, fp, fn] = per_class[c];
        macro += f1_from_counts(tp, fp, fn);
    }
    if (!classes.empty()) macro /= static_cast<double>(classes.size());
    return {micro, macro};
}

AriF1 ari_f1(const std::vector<std::vector<RelationTriple>>& gold,
             const std::vector<std::vector<RelationTriple>>& pred) {
    if (gold.size() != pred.size())
        throw LengthMismatch("ari_f1: unequal essay counts");

    using Atom = std::tuple<std::size_t, int, int, std::string>;
    using Pair = std::tuple<std::size_t, int, int>;
    std::set<Atom> gold_atoms, pred_atoms;
    std::set<Pair> gold_pairs, pred_pairs;
    for (std::size_t e = 0; e < gold.size(); ++e) {
        for (const auto& t : gold[e]) {
            gold_pairs.insert({e, t.from_index, t.to_index});
            for (const auto& ty : t.types)
                gold_atoms.insert({e, t.from_index, t.to_index, ty});
        }
        for (const auto& t : pred[e]) {
            pred_pairs.insert({e, t.from_index, t.to_index});
            for (const auto& ty : t.types)
                pred_atoms.insert({e, t.from_index, t.to_index, ty});
        }
    }

    auto prf = [](double tp, double np, double ng) {
        double p = np == 0 ? 0.0 : tp / np;
        double r = ng == 0 ? 0.0 : tp / ng;
        double f = (p + r) == 0 ? 0.0 : 2 * p * r / (p + r);
        return std::tuple{p, r, f};
    };

    AriF1 out;
    double atom_tp = 0;
    for (const auto& a : pred_atoms)
        if (gold_atoms.count(a)) ++atom_tp;
    std::tie(std::ignore, std::ignore, out.micro) =
        prf(atom_tp, double(pred_atoms.size()), double(gold_atoms.size()));

    // macro over relation types present on either side
    std::set<std::string> types;
    for (const auto& [e, f, t, ty] : gold_atoms) types.insert(ty);
    for (const auto& [e, f, t, ty] : pred_atoms) types.insert(ty);
    double macro_sum = 0;
    for (const auto& ty : types) {
        double tp = 0, np = 0, ng = 0;
        for (const auto& a : pred_atoms)
            if (std::get<3>(a) == ty) { ++np; if (gold_atoms.count(a)) ++tp; }
        for (const auto& a : gold_atoms)
            if (std::get<3>(a) == ty) ++ng;
        macro_sum += std::get<2>(prf(tp, np, ng));
    }
    out.macro = types.empty() ? 0.0 : macro_sum / static_cast<double>(types.size());

    double pair_tp = 0;
    for (const auto& p : pred_pairs)
        if (gold_pairs.count(p)) ++pair_tp;
    std::tie(out.pair_precision, out.pair_recall, out.pair_f1) =
        prf(pair_tp, double(pred_pairs.size()), double(gold_pairs.size()));
    return out;
}

std::string MetricsReport::to_json() const {
    json j;
    j["task"] = to_string(task);
    j["n"] = n;
    j["parse_failure_rate"] = parse_failure_rate;
    if (qwk) { j["qwk"] = *qwk; j["qwk_degenerate"] = qwk_degenerate; }
    if (pearson) { j["pearson"] = *pearson; j["pearson_undefined"] = pearson_undefined; }
    if (micro_f1) j["micro_f1"] = *micro_f1;
    if (macro_f1) j["macro_f1"] = *macro_f1;
    if (ari_pair_f1) {
        j["ari_pair_precision"] = *ari_pair_precision;
        j["ari_pair_recall"] = *ari_pair_recall;
        j["ari_pair_f1"] = *ari_pair_f1;
    }
    return j.dump();
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    json j = json::parse(text);
    MetricsReport r;
    r.task = task_from_string(j.at("task").get<std::string>());
    r.n = j.at("n").get<std::size_t>();
    r.parse_failure_rate = j.value("parse_failure_rate", 0.0);
    if (j.contains("qwk")) { r.qwk = j["qwk"].get<double>(); r.qwk_degenerate = j.value("qwk_degenerate", false); }
    if (j.contains("pearson")) { r.pearson = j["pearson"].get<double>(); r.pearson_undefined = j.value("pearson_undefined", false); }
    if (j.contains("micro_f1")) r.micro_f1 = j["micro_f1"].get<double>();
    if (j.contains("macro_f1")) r.macro_f1 = j["macro_f1"].get<double>();
    if (j.contains("ari_pair_f1")) {
        r.ari_pair_precision = j["ari_pair_precision"].get<double>();
        r.ari_pair_recall = j["ari_pair_recall"].get<double>();
        r.ari_pair_f1 = j["ari_pair_f1"].get<double>();
    }
    return r;
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    auto row = [&os](const std::string& name, const std::string& value) {
        os << "  " << name;
        for (std::size_t i = name.size(); i < 22; ++i) os << ' ';
        os << value << "\n";
    };
    os << "metrics (" << to_string(task) << ", n=" << n << ")\n";
    row("parse_failure_rate", std::to_string(parse_failure_rate));
    if (qwk) row("qwk", std::to_string(*qwk) + (qwk_degenerate ? " (degenerate)" : ""));
    if (pearson) row("pearson", pearson_undefined ? "undefined" : std::to_string(*pearson));
    if (micro_f1) row("micro_f1", std::to_string(*micro_f1));
    if (macro_f1) row("macro_f1", std::to_string(*macro_f1));
    if (ari_pair_f1) {
        row("pair_precision", std::to_string(*ari_pair_precision));
        row("pair_recall", std::to_string(*ari_pair_recall));
        row("pair_f1", std::to_string(*ari_pair_f1));
    }
    return os.str();
}

}  // namespace tide
