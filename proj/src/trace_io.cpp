// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "remat/trace.hpp"

namespace remat {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const json& require(const json& obj, const char* key, const std::string& op_id, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw TraceError(std::string("missing field '") + key + "'", op_id, line);
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& op_id, std::size_t line) {
  const json& v = require(obj, key, op_id, line);
  if (!v.is_string()) throw TraceError(std::string("field '") + key + "' must be a string", op_id, line);
  return v.get<std::string>();
}

std::uint64_t require_uint(const json& obj, const char* key, const std::string& op_id, std::size_t line) {
  const json& v = require(obj, key, op_id, line);
  // The parser stores every non-negative integer literal as unsigned.
  if (!v.is_number_unsigned()) {
    throw TraceError(std::string("field '") + key + "' must be a non-negative integer", op_id, line);
  }
  return v.get<std::uint64_t>();
}

Bytes require_size(const json& obj, const std::string& op_id, std::size_t line) {
  const Bytes size = require_uint(obj, "size", op_id, line);
  if (size == 0) throw TraceError("field 'size' must be positive", op_id, line);
  return size;
}

}  // namespace

TraceGraph parse_trace(std::istream& in) {
  TraceGraph graph;
  std::vector<std::size_t> op_lines;
  std::unordered_map<std::string, bool> evictable;  // by tensor id, for in-place outputs

  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;

    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw TraceError(std::string("malformed JSON: ") + e.what(), {}, line);
    }
    if (!record.is_object() || record.size() != 1) {
      throw TraceError("record must be an object with exactly one key", {}, line);
    }

    const std::string kind = record.begin().key();
    const json& body = record.begin().value();
    if (!body.is_object()) throw TraceError("record body must be an object", {}, line);

    if (kind == "meta") {
      if (auto it = body.find("name"); it != body.end() && it->is_string()) graph.metadata.name = it->get<std::string>();
      if (auto it = body.find("seed"); it != body.end() && it->is_number_unsigned()) {
        graph.metadata.seed = it->get<std::uint64_t>();
      }
    } else if (kind == "param") {
      if (!graph.ops.empty()) throw TraceError("parameter record after the first op", {}, line);
      TensorSpec p;
      p.id = require_string(body, "id", {}, line);
      p.size = require_size(body, {}, line);
      p.evictable = false;
      evictable[p.id] = false;
      graph.params.push_back(std::move(p));
    } else if (kind == "op") {
      OpSpec op;
      op.id = require_string(body, "id", {}, line);
      const std::string kind_text = require_string(body, "kind", op.id, line);
      if (kind_text == "compute") {
        op.kind = OpKind::kCompute;
      } else if (kind_text == "inplace") {
        op.kind = OpKind::kInplace;
      } else {
        throw TraceError("unknown op kind '" + kind_text + "'", op.id, line);
      }

      const json& inputs = require(body, "inputs", op.id, line);
      if (!inputs.is_array()) throw TraceError("field 'inputs' must be an array", op.id, line);
      for (const json& in : inputs) {
        if (!in.is_string()) throw TraceError("input ids must be strings", op.id, line);
        op.inputs.push_back(in.get<std::string>());
      }

      op.cost_us = require_uint(body, "cost_us", op.id, line);
      if (auto it = body.find("mutated_input"); it != body.end() && !it->is_null()) {
        if (!it->is_string()) throw TraceError("field 'mutated_input' must be a string", op.id, line);
        op.mutated_input = it->get<std::string>();
      }

      bool outputs_evictable = true;
      if (op.kind == OpKind::kInplace) {
        auto it = evictable.find(op.mutated_input);
        outputs_evictable = it == evictable.end() ? true : it->second;
      }

      const json& outputs = require(body, "outputs", op.id, line);
      if (!outputs.is_array()) throw TraceError("field 'outputs' must be an array", op.id, line);
      for (const json& out : outputs) {
        if (!out.is_object()) throw TraceError("outputs must be objects", op.id, line);
        TensorSpec t;
        t.id = require_string(out, "id", op.id, line);
        t.size = require_size(out, op.id, line);
        t.evictable = outputs_evictable;
        t.producer_op = graph.ops.size();
        evictable[t.id] = t.evictable;
        op.outputs.push_back(std::move(t));
      }

      graph.ops.push_back(std::move(op));
      op_lines.push_back(line);
    } else {
      throw TraceError("unknown record kind '" + kind + "'", {}, line);
    }
  }

  validate(graph, op_lines);
  return graph;
}

TraceGraph parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file '" + path.string() + "'");
  return parse_trace(in);
}

void emit_trace(const TraceGraph& graph, std::ostream& out) {
  ordered_json meta;
  meta["meta"]["name"] = graph.metadata.name;
  meta["meta"]["seed"] = graph.metadata.seed;
  out << meta.dump() << '\n';

  for (const TensorSpec& p : graph.params) {
    ordered_json rec;
    rec["param"]["id"] = p.id;
    rec["param"]["size"] = p.size;
    out << rec.dump() << '\n';
  }

  for (const OpSpec& op : graph.ops) {
    ordered_json body;
    body["id"] = op.id;
    body["kind"] = op.kind == OpKind::kInplace ? "inplace" : "compute";
    body["inputs"] = op.inputs;
    ordered_json outputs = ordered_json::array();
    for (const TensorSpec& t : op.outputs) {
      ordered_json o;
      o["id"] = t.id;
      o["size"] = t.size;
      outputs.push_back(std::move(o));
    }
    body["outputs"] = std::move(outputs);
    body["cost_us"] = op.cost_us;
    if (op.kind == OpKind::kInplace) body["mutated_input"] = op.mutated_input;

    ordered_json rec;
    rec["op"] = std::move(body);
    out << rec.dump() << '\n';
  }
}

void emit_trace(const TraceGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot write trace file '" + path.string() + "'");
  emit_trace(graph, out);
}

}  // namespace remat
