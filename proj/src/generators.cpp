// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "remat/trace.hpp"

namespace remat {

namespace {

// Elementwise update (SGD-style), µs per MiB of parameter.
constexpr double kUpdateCostPerMiB = 4.0;

Micros scaled_cost(double per_mib, Bytes size, double factor) {
  const double cost = per_mib * static_cast<double>(size) / static_cast<double>(kMiB) * factor;
  return std::max<Micros>(1, static_cast<Micros>(std::llround(cost)));
}

// Uniform in [1 - jitter, 1 + jitter). Uses raw engine output only, so the
// sequence is identical across standard library implementations.
double jitter_factor(std::mt19937_64& rng, double jitter) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 1.0 + jitter * (2.0 * u - 1.0);
}

Bytes layer_size(const ChainOptions& o, int layer) {
  const int k = std::max(1, o.halve_every);
  int depth = 0;
  switch (o.schedule) {
    case SizeSchedule::kUniform:
      return o.base_size;
    case SizeSchedule::kDecreasing:
      depth = layer;
      break;
    case SizeSchedule::kUShaped: {
      const int half = (o.layers + 1) / 2;
      depth = layer < half ? layer : o.layers - 1 - layer;
      break;
    }
  }
  const int shift = std::min(depth / k, 62);
  return std::max<Bytes>(1, o.base_size >> shift);
}

// Encoder activation feeding decoder `layer` through a skip connection.
std::optional<int> skip_source(const ChainOptions& o, int layer) {
  if (o.schedule != SizeSchedule::kUShaped) return std::nullopt;
  const int half = (o.layers + 1) / 2;
  if (layer < half) return std::nullopt;
  const int mirror = o.layers - 1 - layer;
  if (mirror >= layer - 1) return std::nullopt;  // adjacent: already the regular input
  return mirror;
}

struct ParamNames {
  std::string data;
  std::vector<std::string> weights;
};

std::vector<std::string> latest_param_versions(const TraceGraph& graph) {
  std::vector<std::string> latest;
  std::unordered_map<std::string, std::size_t> owner;  // current version -> param index
  for (std::size_t i = 0; i < graph.params.size(); ++i) {
    latest.push_back(graph.params[i].id);
    owner.emplace(graph.params[i].id, i);
  }
  for (const OpSpec& op : graph.ops) {
    if (op.kind != OpKind::kInplace) continue;
    auto it = owner.find(op.mutated_input);
    if (it == owner.end()) continue;
    const std::size_t p = it->second;
    owner.erase(it);
    latest[p] = op.outputs.front().id;
    owner.emplace(latest[p], p);
  }
  return latest;
}

void append_body(TraceGraph& g, const ChainOptions& o, int iteration, const ParamNames& params,
                 std::mt19937_64& rng) {
  const std::string prefix = iteration == 0 ? "" : "it" + std::to_string(iteration) + "/";
  auto name = [&](const std::string& stem, int layer) { return prefix + stem + std::to_string(layer); };

  auto push = [&](std::string id, std::vector<std::string> inputs, std::string out, Bytes size, Micros cost) {
    OpSpec op;
    op.id = std::move(id);
    op.kind = OpKind::kCompute;
    op.inputs = std::move(inputs);
    op.outputs.push_back(TensorSpec{std::move(out), size, true, g.ops.size()});
    op.cost_us = cost;
    g.ops.push_back(std::move(op));
  };

  const int L = o.layers;
  auto input_of = [&](int layer) { return layer == 0 ? params.data : name("act", layer - 1); };
  auto input_size = [&](int layer) { return layer == 0 ? o.base_size : layer_size(o, layer - 1); };

  for (int l = 0; l < L; ++l) {
    const Bytes s = layer_size(o, l);
    std::vector<std::string> conv_in{input_of(l)};
    if (auto skip = skip_source(o, l)) conv_in.push_back(name("act", *skip));
    conv_in.push_back(params.weights[static_cast<std::size_t>(l)]);
    push(name("conv", l), std::move(conv_in), name("y_conv", l), s, scaled_cost(o.conv_cost, s, jitter_factor(rng, o.cost_jitter)));
    push(name("relu", l), {name("y_conv", l)}, name("act", l), s, scaled_cost(o.act_cost, s, jitter_factor(rng, o.cost_jitter)));
  }

  for (int l = L - 1; l >= 0; --l) {
    const Bytes s = layer_size(o, l);
    std::vector<std::string> act_in;
    if (l < L - 1) act_in.push_back(name("g_act", l));
    act_in.push_back(name("y_conv", l));
    push(name("relu_bwd", l), std::move(act_in), name("g_conv", l), s,
         scaled_cost(o.act_cost, s, jitter_factor(rng, o.cost_jitter)));

    std::vector<std::string> conv_in{name("g_conv", l), input_of(l)};
    if (auto skip = skip_source(o, l)) conv_in.push_back(name("act", *skip));
    conv_in.push_back(params.weights[static_cast<std::size_t>(l)]);
    const std::string grad_out = l == 0 ? prefix + "g_data" : name("g_act", l - 1);
    push(name("conv_bwd", l), std::move(conv_in), grad_out, input_size(l),
         scaled_cost(2.0 * o.conv_cost, s, jitter_factor(rng, o.cost_jitter)));
  }
}

ParamNames split_params(const std::vector<std::string>& versions) {
  ParamNames names;
  names.data = versions.front();
  names.weights.assign(versions.begin() + 1, versions.end());
  return names;
}

}  // namespace

std::string to_string(SizeSchedule schedule) {
  switch (schedule) {
    case SizeSchedule::kUniform:
      return "uniform";
    case SizeSchedule::kDecreasing:
      return "decreasing";
    case SizeSchedule::kUShaped:
      return "ushaped";
  }
  return "unknown";
}

std::optional<SizeSchedule> parse_size_schedule(const std::string& text) {
  if (text == "uniform") return SizeSchedule::kUniform;
  if (text == "decreasing") return SizeSchedule::kDecreasing;
  if (text == "ushaped" || text == "u_shaped") return SizeSchedule::kUShaped;
  return std::nullopt;
}

TraceGraph gen_training(const ChainOptions& o, int iterations, bool param_updates) {
  if (o.layers < 1) throw std::invalid_argument("gen_chain: layers must be >= 1");
  if (iterations < 1) throw std::invalid_argument("gen_training: iterations must be >= 1");
  if (o.base_size == 0 || o.param_size == 0) throw std::invalid_argument("gen_chain: sizes must be positive");

  TraceGraph g;
  g.metadata.name = to_string(o.schedule) + "-L" + std::to_string(o.layers) + "-s" + std::to_string(o.seed);
  if (iterations > 1) g.metadata.name += "-i" + std::to_string(iterations);
  if (param_updates) g.metadata.name += "-upd";
  g.metadata.seed = o.seed;

  g.params.push_back(TensorSpec{"data", o.base_size, false, std::nullopt});
  for (int l = 0; l < o.layers; ++l) {
    g.params.push_back(TensorSpec{"w" + std::to_string(l), o.param_size, false, std::nullopt});
  }

  std::mt19937_64 rng(o.seed);
  for (int it = 0; it < iterations; ++it) {
    if (it > 0 && param_updates) g = gen_param_updates(g);
    append_body(g, o, it, split_params(latest_param_versions(g)), rng);
  }
  if (param_updates) g = gen_param_updates(g);
  return g;
}

TraceGraph gen_chain(const ChainOptions& options) { return gen_training(options, 1, false); }

TraceGraph gen_param_updates(const TraceGraph& graph) {
  if (graph.params.empty()) throw std::invalid_argument("gen_param_updates: graph has no parameters");

  TraceGraph g = graph;
  const std::vector<std::string> latest = latest_param_versions(graph);
  for (std::size_t i = 0; i < g.params.size(); ++i) {
    const TensorSpec& base = g.params[i];
    const std::string& current = latest[i];
    int version = 0;
    if (auto at = current.rfind('@'); at != std::string::npos && current != base.id) {
      version = std::stoi(current.substr(at + 1));
    }

    OpSpec op;
    op.id = "update:" + current;
    op.kind = OpKind::kInplace;
    op.inputs = {current};
    op.mutated_input = current;
    op.outputs.push_back(TensorSpec{base.id + "@" + std::to_string(version + 1), base.size, false, g.ops.size()});
    op.cost_us = scaled_cost(kUpdateCostPerMiB, base.size, 1.0);
    g.ops.push_back(std::move(op));
  }
  return g;
}

}  // namespace remat
