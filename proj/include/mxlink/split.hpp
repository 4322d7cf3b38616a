// Leakage-free split protocols over the labeled Union-Set pool.
//
// transductive_stratified: class-wise shuffled 70/15/15 partition.
// inductive_node: whole nodes are withheld; every test example touches a
// held-out node and no training example does.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mxlink/error.hpp"
#include "mxlink/graph.hpp"
#include "mxlink/rng.hpp"

namespace mxlink {

enum class Protocol { transductive_stratified, inductive_node };

inline const char* protocol_name(Protocol p) {
  return p == Protocol::transductive_stratified ? "transductive" : "inductive";
}

inline Protocol protocol_from_name(const std::string& s) {
  if (s == "transductive") return Protocol::transductive_stratified;
  if (s == "inductive") return Protocol::inductive_node;
  throw UsageError("unknown protocol: " + s);
}

struct SplitBundle {
  Protocol protocol = Protocol::transductive_stratified;
  uint64_t seed = 0;
  int target_layer = -1;
  std::vector<LabeledExample> train, val, test;
  std::vector<NodeId> held_out_nodes;  // empty for transductive

  // Instrumented access guard: evaluation reads test labels through
  // test_labels(); anything touching them before evaluation shows up here.
  mutable long test_label_reads = 0;

  std::vector<int> test_labels() const {
    ++test_label_reads;
    std::vector<int> out;
    out.reserve(test.size());
    for (const auto& e : test) out.push_back(e.label);
    return out;
  }
};

namespace detail {

// Class-wise partition into |ratios| buckets. Counts are rounded per class;
// the last bucket takes the remainder, which keeps every split's class ratio
// within one example of the global one.
inline std::vector<std::vector<LabeledExample>> partition_by_class(
    const std::vector<LabeledExample>& examples,
    const std::vector<double>& ratios, uint64_t seed, uint64_t stream_tag) {
  double ratio_sum = 0;
  for (double r : ratios) ratio_sum += r;
  if (std::fabs(ratio_sum - 1.0) > 1e-9)
    throw UsageError("split ratios must sum to 1");

  std::vector<size_t> pos_idx, neg_idx;
  for (size_t i = 0; i < examples.size(); ++i)
    (examples[i].label == 1 ? pos_idx : neg_idx).push_back(i);
  if (pos_idx.empty() || neg_idx.empty())
    throw DataError("cannot stratify: a class has no examples");
  if (pos_idx.size() < ratios.size() || neg_idx.size() < ratios.size())
    throw DataError("cannot stratify: a class has fewer than " +
                    std::to_string(ratios.size()) + " examples");

  std::vector<std::vector<LabeledExample>> buckets(ratios.size());
  for (int cls = 0; cls < 2; ++cls) {
    auto& idx = cls == 1 ? pos_idx : neg_idx;
    Rng rng = Rng::stream(seed, {stream_tag, static_cast<uint64_t>(cls)});
    rng.shuffle(idx);
    const size_t n = idx.size();
    size_t taken = 0;
    for (size_t b = 0; b < ratios.size(); ++b) {
      size_t count =
          b + 1 == ratios.size()
              ? n - taken
              : static_cast<size_t>(std::llround(ratios[b] * static_cast<double>(n)));
      count = std::min(count, n - taken);
      for (size_t k = 0; k < count; ++k)
        buckets[b].push_back(examples[idx[taken + k]]);
      taken += count;
    }
  }
  // Pool order within each bucket: deterministic and diff-friendly.
  for (auto& b : buckets)
    std::sort(b.begin(), b.end(), [](const LabeledExample& a,
                                     const LabeledExample& c) {
      return a.pair < c.pair;
    });
  return buckets;
}

}  // namespace detail

/// 70/15/15 (configurable) stratified split, deterministic per seed.
inline SplitBundle stratified_split(const std::vector<LabeledExample>& examples,
                                    std::array<double, 3> ratios,
                                    uint64_t seed) {
  auto buckets = detail::partition_by_class(
      examples, {ratios[0], ratios[1], ratios[2]}, seed,
      fnv1a64("stratified_split"));
  SplitBundle out;
  out.protocol = Protocol::transductive_stratified;
  out.seed = seed;
  out.target_layer = examples.empty() ? -1 : examples.front().target_layer;
  out.train = std::move(buckets[0]);
  out.val = std::move(buckets[1]);
  out.test = std::move(buckets[2]);
  return out;
}

/// Node-withholding protocol: ceil(fraction * N) nodes are sampled as
/// held-out; every labeled pool pair touching one of them becomes test; the
/// rest splits 82/18 train/val stratified by class, so overall proportions
/// approximate 70/15/15 at fraction ~ 0.15.
inline SplitBundle inductive_node_split(const MultiplexGraph& g,
                                        const CandidatePool& pool, int target,
                                        double holdout_fraction,
                                        uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 0.5))
    throw UsageError("holdout_fraction must lie in (0, 0.5)");
  const auto labeled = label_for_target(pool, g, target);

  const auto n_holdout = static_cast<size_t>(
      std::ceil(holdout_fraction * static_cast<double>(g.node_count)));
  std::vector<NodeId> nodes(static_cast<size_t>(g.node_count));
  for (NodeId i = 0; i < g.node_count; ++i) nodes[static_cast<size_t>(i)] = i;
  Rng rng = Rng::stream(seed, {fnv1a64("inductive_holdout"),
                               static_cast<uint64_t>(target)});
  rng.shuffle(nodes);
  nodes.resize(n_holdout);
  std::sort(nodes.begin(), nodes.end());
  std::unordered_set<NodeId> held(nodes.begin(), nodes.end());

  std::vector<LabeledExample> test, retained;
  for (const auto& e : labeled)
    (held.count(e.pair.first) || held.count(e.pair.second) ? test : retained)
        .push_back(e);

  auto single_class = [](const std::vector<LabeledExample>& v) {
    bool pos = false, neg = false;
    for (const auto& e : v) (e.label == 1 ? pos : neg) = true;
    return !(pos && neg);
  };
  if (test.empty() || single_class(test))
    throw DataError(
        "inductive split: test side has a single class; try a different "
        "seed or holdout fraction");

  SplitBundle out;
  try {
    auto buckets = detail::partition_by_class(
        retained, {0.82, 0.18}, seed,
        fnv1a64("inductive_trainval") ^ static_cast<uint64_t>(target));
    out.train = std::move(buckets[0]);
    out.val = std::move(buckets[1]);
  } catch (const DataError&) {
    throw DataError(
        "inductive split: train side has a single class; try a different "
        "seed or holdout fraction");
  }
  if (single_class(out.train) || single_class(out.val))
    throw DataError(
        "inductive split: train/val side has a single class; try a different "
        "seed or holdout fraction");

  out.protocol = Protocol::inductive_node;
  out.seed = seed;
  out.target_layer = target;
  out.test = std::move(test);
  out.held_out_nodes = std::move(nodes);
  return out;
}

// --- JSON persistence (prepare-stage artifact) ------------------------------

inline nlohmann::json split_to_json(const SplitBundle& b) {
  auto dump = [](const std::vector<LabeledExample>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : v)
      arr.push_back({e.pair.first, e.pair.second, e.label});
    return arr;
  };
  return {{"protocol", protocol_name(b.protocol)},
          {"seed", b.seed},
          {"target_layer", b.target_layer},
          {"held_out_nodes", b.held_out_nodes},
          {"train", dump(b.train)},
          {"val", dump(b.val)},
          {"test", dump(b.test)}};
}

inline SplitBundle split_from_json(const nlohmann::json& j) {
  SplitBundle b;
  b.protocol = protocol_from_name(j.at("protocol").get<std::string>());
  b.seed = j.at("seed").get<uint64_t>();
  b.target_layer = j.at("target_layer").get<int>();
  b.held_out_nodes = j.at("held_out_nodes").get<std::vector<NodeId>>();
  auto load = [&](const char* key, std::vector<LabeledExample>& out) {
    for (const auto& e : j.at(key)) {
      if (!e.is_array() || e.size() != 3) throw DataError("bad split entry");
      out.push_back({{e[0].get<NodeId>(), e[1].get<NodeId>()},
                     e[2].get<int>(),
                     b.target_layer});
    }
  };
  load("train", b.train);
  load("val", b.val);
  load("test", b.test);
  return b;
}

}  // namespace mxlink
