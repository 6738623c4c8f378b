#include "spanrel/data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "spanrel/rng.hpp"

namespace spanrel::data {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& source, const std::string& msg) {
  throw std::runtime_error(source + ": " + msg);
}

[[noreturn]] void fail_record(const std::string& source, std::size_t index,
                              const std::string& msg) {
  fail(source, "record " + std::to_string(index) + ": " + msg);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

LabelCatalog build_catalog(const std::vector<Sentence>& sentences, const std::string& source) {
  std::set<std::string> etypes, rtypes;
  for (const auto& s : sentences) {
    for (const auto& e : s.entities) {
      if (e.type == kNoneType) fail(source, "entity type 'none' is reserved");
      etypes.insert(e.type);
    }
    for (const auto& r : s.relations) rtypes.insert(r.type);
  }
  LabelCatalog catalog;
  catalog.entity_types.push_back(kNoneType);
  catalog.entity_types.insert(catalog.entity_types.end(), etypes.begin(), etypes.end());
  catalog.relation_types.assign(rtypes.begin(), rtypes.end());
  return catalog;
}

void validate_sentence(const Sentence& s, const std::string& source, std::size_t index) {
  const std::size_t n = s.tokens.size();
  if (n == 0) fail_record(source, index, "empty token list");
  for (const auto& e : s.entities) {
    if (e.end <= e.start)
      fail_record(source, index,
                  "entity end " + std::to_string(e.end) + " <= start " + std::to_string(e.start));
    if (e.end > n) fail_record(source, index, "entity span exceeds sentence length");
  }
  for (const auto& r : s.relations) {
    if (r.head >= s.entities.size() || r.tail >= s.entities.size())
      fail_record(source, index, "relation references entity out of range");
    if (r.head == r.tail) fail_record(source, index, "relation head equals tail");
  }
}

}  // namespace

std::size_t LabelCatalog::entity_index(const std::string& name) const {
  for (std::size_t i = 0; i < entity_types.size(); ++i)
    if (entity_types[i] == name) return i;
  throw std::invalid_argument("unknown entity type '" + name + "'");
}

std::size_t LabelCatalog::relation_index(const std::string& name) const {
  for (std::size_t i = 0; i < relation_types.size(); ++i)
    if (relation_types[i] == name) return i;
  throw std::invalid_argument("unknown relation type '" + name + "'");
}

// ------------------------------------------------------------- span dialect

Dataset parse_span_json(const std::string& text, const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(source_name, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_array()) fail(source_name, "expected a top-level JSON array");

  Dataset ds;
  for (std::size_t idx = 0; idx < root.size(); ++idx) {
    const json& rec = root[idx];
    Sentence s;
    try {
      if (!rec.is_object()) throw std::runtime_error("record is not an object");
      s.tokens = rec.at("tokens").get<std::vector<std::string>>();
      for (const json& je : rec.value("entities", json::array())) {
        EntitySpan e;
        e.type = je.at("type").get<std::string>();
        const auto start = je.at("start").get<long long>();
        const auto end = je.at("end").get<long long>();
        if (start < 0 || end < 0) throw std::runtime_error("negative span index");
        e.start = static_cast<std::size_t>(start);
        e.end = static_cast<std::size_t>(end);
        s.entities.push_back(std::move(e));
      }
      for (const json& jr : rec.value("relations", json::array())) {
        RelationTriple r;
        r.type = jr.at("type").get<std::string>();
        const auto head = jr.at("head").get<long long>();
        const auto tail = jr.at("tail").get<long long>();
        if (head < 0 || tail < 0) throw std::runtime_error("negative relation index");
        r.head = static_cast<std::size_t>(head);
        r.tail = static_cast<std::size_t>(tail);
        s.relations.push_back(std::move(r));
      }
      if (rec.contains("orig_id")) {
        const json& jid = rec["orig_id"];
        s.id = jid.is_string() ? jid.get<std::string>() : jid.dump();
      } else {
        s.id = std::to_string(idx);
      }
    } catch (const json::exception& e) {
      fail_record(source_name, idx, std::string("bad field: ") + e.what());
    } catch (const std::runtime_error& e) {
      fail_record(source_name, idx, e.what());
    }
    validate_sentence(s, source_name, idx);
    ds.sentences.push_back(std::move(s));
  }
  ds.catalog = build_catalog(ds.sentences, source_name);
  return ds;
}

Dataset load_span_json(const std::string& path) {
  return parse_span_json(read_file(path), path);
}

std::string to_span_json(const std::vector<Sentence>& sentences) {
  json root = json::array();
  for (const auto& s : sentences) {
    json rec;
    rec["tokens"] = s.tokens;
    rec["entities"] = json::array();
    for (const auto& e : s.entities)
      rec["entities"].push_back({{"type", e.type}, {"start", e.start}, {"end", e.end}});
    rec["relations"] = json::array();
    for (const auto& r : s.relations)
      rec["relations"].push_back({{"type", r.type}, {"head", r.head}, {"tail", r.tail}});
    rec["orig_id"] = s.id;
    root.push_back(std::move(rec));
  }
  return root.dump(1);
}

// ------------------------------------------------------------ chddi dialect

std::vector<std::string> utf8_codepoints(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((c & 0x80u) == 0x00u)
      len = 1;
    else if ((c & 0xE0u) == 0xC0u)
      len = 2;
    else if ((c & 0xF0u) == 0xE0u)
      len = 3;
    else if ((c & 0xF8u) == 0xF0u)
      len = 4;
    else
      throw std::runtime_error("invalid UTF-8 byte at offset " + std::to_string(i));
    if (i + len > text.size()) throw std::runtime_error("truncated UTF-8 sequence");
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

namespace {

// First occurrence of `needle` in `tokens`, by code point; returns npos when
// absent. Also reports whether a second occurrence exists.
std::pair<std::size_t, bool> find_mention(const std::vector<std::string>& tokens,
                                          const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > tokens.size())
    return {std::string::npos, false};
  std::size_t first = std::string::npos;
  bool duplicate = false;
  for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j)
      if (tokens[i + j] != needle[j]) {
        match = false;
        break;
      }
    if (match) {
      if (first == std::string::npos) {
        first = i;
      } else {
        duplicate = true;
        break;
      }
    }
  }
  return {first, duplicate};
}

}  // namespace

Dataset parse_chddi_json(const std::string& text, const std::string& source_name) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t idx = 0;
  std::size_t duplicate_mentions = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail_record(source_name, idx, std::string("invalid JSON: ") + e.what());
    }
    Sentence s;
    s.id = "chddi-" + std::to_string(idx);
    try {
      const std::string sent_text = rec.at("text").get<std::string>();
      s.tokens = utf8_codepoints(sent_text);
      if (s.tokens.empty()) throw std::runtime_error("empty text");

      // span -> entity index, deduplicating repeated drug mentions
      std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
      auto align = [&](const std::string& surface) -> std::size_t {
        const auto needle = utf8_codepoints(surface);
        const auto [pos, dup] = find_mention(s.tokens, needle);
        if (pos == std::string::npos)
          throw std::runtime_error("mention '" + surface + "' not found in text");
        if (dup) ++duplicate_mentions;
        const auto key = std::make_pair(pos, pos + needle.size());
        auto it = seen.find(key);
        if (it != seen.end()) return it->second;
        EntitySpan e;
        e.start = key.first;
        e.end = key.second;
        e.type = "drug";
        s.entities.push_back(std::move(e));
        seen.emplace(key, s.entities.size() - 1);
        return s.entities.size() - 1;
      };

      for (const json& spo : rec.value("spo_list", json::array())) {
        const std::string predicate = spo.at("predicate").get<std::string>();
        const std::string subject = spo.at("subject").get<std::string>();
        const std::string object = spo.at("object").at("@value").get<std::string>();
        const std::size_t head = align(subject);
        const std::size_t tail = align(object);
        if (head == tail) throw std::runtime_error("subject and object align to the same span");
        s.relations.push_back({head, tail, predicate});
      }
    } catch (const json::exception& e) {
      fail_record(source_name, idx, std::string("bad field: ") + e.what());
    } catch (const std::runtime_error& e) {
      fail_record(source_name, idx, e.what());
    }
    validate_sentence(s, source_name, idx);
    ds.sentences.push_back(std::move(s));
    ++idx;
  }
  if (duplicate_mentions > 0)
    std::cerr << source_name << ": " << duplicate_mentions
              << " mention(s) occur more than once; aligned to first occurrence\n";
  ds.catalog = build_catalog(ds.sentences, source_name);
  return ds;
}

Dataset load_chddi_json(const std::string& path) {
  return parse_chddi_json(read_file(path), path);
}

// -------------------------------------------------------------------- stats

StatsReport dataset_stats(const std::vector<Sentence>& sentences) {
  StatsReport report;
  report.sentences = sentences.size();
  for (const auto& s : sentences) {
    report.entities += s.entities.size();
    report.relations += s.relations.size();
    for (const auto& r : s.relations) ++report.relation_histogram[r.type];
  }
  return report;
}

std::string stats_table(const StatsReport& report) {
  std::ostringstream os;
  os << "sentences " << report.sentences << "\n"
     << "entities  " << report.entities << "\n"
     << "relations " << report.relations << "\n";
  for (const auto& [type, count] : report.relation_histogram)
    os << "  " << type << " " << count << "\n";
  return os.str();
}

// ---------------------------------------------------------- negative samples

NegativeSamples sample_negatives(const Sentence& sentence, std::size_t max_width,
                                 std::size_t max_neg_entities, std::size_t max_neg_relations,
                                 nn::Rng& rng) {
  NegativeSamples out;
  const std::size_t n = sentence.tokens.size();

  std::set<SpanKey> gold_spans;
  for (const auto& e : sentence.entities) gold_spans.insert({e.start, e.width()});

  std::vector<SpanKey> span_pool;
  for (std::size_t w = 1; w <= std::min(max_width, n); ++w)
    for (std::size_t start = 0; start + w <= n; ++start)
      if (!gold_spans.count({start, w})) span_pool.push_back({start, w});

  std::set<std::pair<std::size_t, std::size_t>> gold_pairs;
  for (const auto& r : sentence.relations) gold_pairs.emplace(r.head, r.tail);

  std::vector<std::pair<std::size_t, std::size_t>> pair_pool;
  for (std::size_t i = 0; i < sentence.entities.size(); ++i)
    for (std::size_t j = 0; j < sentence.entities.size(); ++j)
      if (i != j && !gold_pairs.count({i, j})) pair_pool.emplace_back(i, j);

  auto take = [&rng](auto& pool, std::size_t cap, auto& dest) {
    const std::size_t count = std::min(cap, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      dest.push_back(pool[i]);
    }
  };
  take(span_pool, max_neg_entities, out.spans);
  take(pair_pool, max_neg_relations, out.entity_pairs);
  return out;
}

}  // namespace spanrel::data
