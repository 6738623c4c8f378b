#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace spanrel::nn {
class Rng;
}

namespace spanrel::data {

// Half-open token interval [start, end) with a type name.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;
  std::size_t width() const { return end - start; }
  bool operator==(const EntitySpan&) const = default;
};

// Directed typed relation between two entries of a sentence's entity list.
struct RelationTriple {
  std::size_t head = 0;
  std::size_t tail = 0;
  std::string type;
  bool operator==(const RelationTriple&) const = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<EntitySpan> entities;
  std::vector<RelationTriple> relations;
  std::string id;
  bool operator==(const Sentence&) const = default;
};

// Model predictions in the same shape as gold annotations; relations index
// into `entities`.
struct Prediction {
  std::vector<EntitySpan> entities;
  std::vector<RelationTriple> relations;
  bool operator==(const Prediction&) const = default;
};

inline constexpr const char* kNoneType = "none";

struct LabelCatalog {
  std::vector<std::string> entity_types;    // [0] is always "none"
  std::vector<std::string> relation_types;

  std::size_t entity_index(const std::string& name) const;
  std::size_t relation_index(const std::string& name) const;
};

struct Dataset {
  std::vector<Sentence> sentences;
  LabelCatalog catalog;
};

// SpERT-style span JSON: an array of {tokens, entities:[{type,start,end}],
// relations:[{type,head,tail}]}. Invariant violations raise with the record
// index in the message.
Dataset load_span_json(const std::string& path);
Dataset parse_span_json(const std::string& text, const std::string& source_name);
std::string to_span_json(const std::vector<Sentence>& sentences);

// CH-DDI dialect: one JSON object per line with "text" and "spo_list"; the
// text is tokenized one token per Unicode code point and subject/object
// strings are aligned to their first occurrence.
Dataset load_chddi_json(const std::string& path);
Dataset parse_chddi_json(const std::string& text, const std::string& source_name);

std::vector<std::string> utf8_codepoints(const std::string& text);

struct StatsReport {
  std::size_t sentences = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::map<std::string, std::size_t> relation_histogram;
};

StatsReport dataset_stats(const std::vector<Sentence>& sentences);
std::string stats_table(const StatsReport& report);

struct SpanKey {
  std::size_t start = 0;
  std::size_t width = 0;
  bool operator==(const SpanKey&) const = default;
  bool operator<(const SpanKey& o) const {
    return width != o.width ? width < o.width : start < o.start;
  }
};

struct NegativeSamples {
  std::vector<SpanKey> spans;                                    // non-gold spans, width ≤ k
  std::vector<std::pair<std::size_t, std::size_t>> entity_pairs; // ordered, unlinked gold pairs
};

// Uniform sampling without replacement from the non-gold span pool (width ≤
// max_width) and from ordered gold-entity pairs that carry no gold relation in
// that direction. Fewer available candidates than the cap is fine.
NegativeSamples sample_negatives(const Sentence& sentence, std::size_t max_width,
                                 std::size_t max_neg_entities, std::size_t max_neg_relations,
                                 nn::Rng& rng);

}  // namespace spanrel::data
