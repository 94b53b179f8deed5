#include "tide/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tide/errors.hpp"

namespace tide {

using nlohmann::json;

namespace {

Sample record_to_sample(const json& j, TaskKind task, int line_no) {
    auto locus = [&](const std::string& what) {
        std::string id = j.contains("id") && j["id"].is_string()
                             ? j["id"].get<std::string>()
                             : ("line " + std::to_string(line_no));
        return "record " + id + ": " + what;
    };

    for (const char* key : {"id", "task", "text", "gold"})
        if (!j.contains(key)) throw SchemaError(locus(std::string("missing \"") + key + "\""));

    TaskKind record_task = task_from_string(j["task"].get<std::string>());
    if (record_task != task)
        throw TaskMismatch(locus("task " + j["task"].get<std::string>() +
                                 " loaded as " + to_string(task)));

    Sample s;
    s.task = task;
    s.essay.id = j["id"].get<std::string>();
    s.essay.text = j["text"].get<std::string>();
    if (j.contains("units"))
        for (const auto& u : j["units"]) s.essay.units.push_back(u.get<std::string>());
    if (j.contains("chunks")) {
        for (const auto& c : j["chunks"]) {
            DiscourseChunk chunk;
            chunk.index = c.at("index").get<int>();
            chunk.component = c.at("component").get<std::string>();
            chunk.text = c.at("text").get<std::string>();
            s.essay.chunks.push_back(chunk);
        }
    }

    const json& gold = j["gold"];
    switch (task) {
        case TaskKind::AES:
            if (!gold.contains("score")) throw SchemaError(locus("gold has no \"score\""));
            s.gold.raw_score = gold["score"].get<double>();
            s.gold.score = static_cast<int>(std::llround(s.gold.raw_score));
            break;
        case TaskKind::ACD:
            if (!gold.contains("labels")) throw SchemaError(locus("gold has no \"labels\""));
            for (const auto& l : gold["labels"]) s.gold.labels.push_back(l.get<std::string>());
            break;
        case TaskKind::ARI:
            if (!gold.contains("relations")) throw SchemaError(locus("gold has no \"relations\""));
            for (const auto& r : gold["relations"]) {
                RelationTriple t;
                t.from_index = r.at("from").get<int>();
                t.to_index = r.at("to").get<int>();
                for (const auto& ty : r.at("types")) t.types.insert(ty.get<std::string>());
                s.gold.relations.push_back(t);
            }
            break;
    }
    return s;
}

}  // namespace

Dataset load(const std::string& path, TaskKind task) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file: " + path);

    Dataset ds;
    ds.task = task;
    ds.provenance.source = path;

    // score range is checked later against the run's configured scale
    ScoreScale permissive{-1000000000, 1000000000};
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        Sample s = record_to_sample(j, task, line_no);
        auto violations = validate_sample(s, permissive);
        if (!violations.empty()) {
            std::string msg = "record " + s.essay.id + ":";
            for (const auto& v : violations) msg += " " + v + ";";
            throw SchemaError(msg);
        }
        if (!ids.insert(s.essay.id).second)
            throw SchemaError("duplicate record id " + s.essay.id);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint32_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937 rng(seed);
    auto draw = [&rng](std::uint32_t bound) -> std::uint32_t {
        // rejection sampling keeps the draw unbiased and platform-stable
        std::uint32_t limit = UINT32_MAX - UINT32_MAX % bound;
        std::uint32_t x;
        do { x = rng(); } while (x >= limit);
        return x % bound;
    };
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[draw(static_cast<std::uint32_t>(i))]);
    return idx;
}

std::pair<Dataset, Dataset> shuffle_split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.sample_fraction && spec.sample_count)
        throw ConfigError("at most one of sample_fraction/sample_count may be set");
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw ConfigError("train_fraction must be in (0,1)");

    std::vector<Sample> pool = ds.samples;
    std::vector<std::string> transforms = ds.provenance.transforms;

    std::vector<std::size_t> perm = seeded_permutation(pool.size(), spec.seed);
    auto apply = [&pool](const std::vector<std::size_t>& p) {
        std::vector<Sample> out;
        out.reserve(p.size());
        for (auto i : p) out.push_back(pool[i]);
        pool = std::move(out);
    };

    if (spec.sample_fraction || spec.sample_count) {
        std::size_t keep = spec.sample_count
                               ? *spec.sample_count
                               : static_cast<std::size_t>(
                                     pool.size() * *spec.sample_fraction + 1e-9);
        keep = std::min(keep, pool.size());
        apply(perm);
        pool.resize(keep);
        transforms.push_back("down-sampled to " + std::to_string(keep));
        perm = seeded_permutation(pool.size(), spec.seed + 1);
    }
    apply(perm);
    transforms.push_back("shuffled with seed " + std::to_string(spec.seed));

    std::size_t n = pool.size();
    auto train_n = static_cast<std::size_t>(
        std::ceil(spec.train_fraction * static_cast<double>(n) - 1e-9));
    if (train_n == 0 || train_n >= n)
        throw EmptySplit("split of " + std::to_string(n) + " samples at fraction " +
                         std::to_string(spec.train_fraction) +
                         " leaves one side empty");

    Dataset train, eval;
    train.task = eval.task = ds.task;
    train.provenance = eval.provenance = Provenance{ds.provenance.source, transforms,
                                                    ds.provenance.degenerate_binning};
    train.provenance.transforms.push_back("train split");
    eval.provenance.transforms.push_back("eval split");
    train.samples.assign(pool.begin(), pool.begin() + train_n);
    eval.samples.assign(pool.begin() + train_n, pool.end());
    return {train, eval};
}

Dataset bin_scores(const Dataset& ds, int k) {
    if (ds.task != TaskKind::AES)
        throw TaskMismatch("bin_scores requires an AES dataset");
    if (k < 1) throw ConfigError("bin count must be positive");

    std::vector<double> sorted;
    sorted.reserve(ds.samples.size());
    for (const auto& s : ds.samples) sorted.push_back(s.gold.raw_score);
    std::sort(sorted.begin(), sorted.end());

    std::set<double> distinct(sorted.begin(), sorted.end());
    Dataset out = ds;
    const std::size_t n = sorted.size();

    if (static_cast<int>(distinct.size()) < k) {
        // equal-width fallback; all-equal degenerates to level 1
        double lo = sorted.empty() ? 0 : sorted.front();
        double hi = sorted.empty() ? 0 : sorted.back();
        double width = (hi - lo) / k;
        for (auto& s : out.samples) {
            int level = width > 0
                            ? std::min(k, static_cast<int>((s.gold.raw_score - lo) / width) + 1)
                            : 1;
            s.gold.score = level;
        }
        out.provenance.degenerate_binning = true;
        out.provenance.transforms.push_back(
            "bin_scores: equal-width fallback (only " +
            std::to_string(distinct.size()) + " distinct raw scores, k=" +
            std::to_string(k) + ")");
        return out;
    }

    // equal-frequency: level from the rank of the first occurrence, so tied
    // values land in the lower level
    std::ostringstream table;
    table << "bin_scores: quantile mapping {";
    for (auto& s : out.samples) {
        std::size_t rank = std::lower_bound(sorted.begin(), sorted.end(),
                                            s.gold.raw_score) -
                           sorted.begin();
        int level = std::min<int>(k, static_cast<int>(rank * k / n) + 1);
        s.gold.score = level;
    }
    for (double v : distinct) {
        std::size_t rank =
            std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin();
        table << v << "->" << std::min<int>(k, static_cast<int>(rank * k / n) + 1) << " ";
    }
    table << "}";
    out.provenance.transforms.push_back(table.str());
    return out;
}

BatchCycler::BatchCycler(const Dataset& train, int size)
    : train_(train), size_(size) {
    if (size < 1) throw ConfigError("batch size must be >= 1");
    if (train.samples.empty()) throw EmptySplit("cannot batch an empty dataset");
    batches_per_epoch_ =
        static_cast<int>((train.samples.size() + size - 1) / size);
}

std::vector<Sample> BatchCycler::batch(int iteration) const {
    int pos = (iteration - 1) % batches_per_epoch_;
    std::size_t start = static_cast<std::size_t>(pos) * size_;
    std::size_t end = std::min(train_.samples.size(), start + size_);
    return {train_.samples.begin() + start, train_.samples.begin() + end};
}

}  // namespace tide
