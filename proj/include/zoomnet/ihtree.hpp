#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace zoomnet {

// ---------------------------------------------------------------------------
// Taxonomy: single-rooted hypernym tree read from `id<TAB>parent|-<TAB>lemmas`.

class Taxonomy {
 public:
  static Taxonomy parse(std::istream& in, const std::string& source = "<stream>");
  static Taxonomy load(const std::filesystem::path& path);

  std::size_t size() const { return ids_.size(); }
  /// Longest root-to-leaf path counted in nodes (root alone has depth 1).
  std::size_t depth() const { return max_depth_; }
  std::size_t root() const { return root_; }

  const std::string& id(std::size_t node) const { return ids_.at(node); }
  const std::vector<std::string>& lemmas(std::size_t node) const { return lemmas_.at(node); }
  std::optional<std::size_t> parent(std::size_t node) const;
  std::size_t node_depth(std::size_t node) const { return depth_.at(node); }

  std::optional<std::size_t> find_id(const std::string& id) const;
  /// First node (in file order) listing `lemma`.
  std::optional<std::size_t> find_lemma(const std::string& lemma) const;

  std::size_t lowest_common_ancestor(std::size_t a, std::size_t b) const;
  /// Shortest undirected path between two nodes, in edges.
  std::size_t path_edges(std::size_t a, std::size_t b) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<std::string>> lemmas_;
  std::vector<std::size_t> parent_;  // self for root
  std::vector<std::size_t> depth_;   // root = 1
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_lemma_;
  std::size_t root_ = 0;
  std::size_t max_depth_ = 0;
};

/// Leacock-Chodorow similarity with p = path_edges + 1:
/// raw = -ln(p / 2D); normalized = raw / ln(2D), so identical nodes score 1.
double lch_similarity(std::size_t a, std::size_t b, const Taxonomy& tax, bool normalized = true);

// ---------------------------------------------------------------------------
// Lexicon: deterministic part-of-speech table and rule lemmatizer.

enum PosTag : unsigned {
  kNoun = 1u << 0,
  kVerb = 1u << 1,
  kPreposition = 1u << 2,
  kAdjective = 1u << 3,
  kOther = 1u << 4,
};

unsigned parse_pos_list(const std::string& list);

struct LexEntry {
  unsigned pos = 0;
  std::string lemma;
};

class Lexicon {
 public:
  /// `word<TAB>pos_list<TAB>lemma`; words may contain spaces (multi-word prepositions).
  static Lexicon parse(std::istream& lexicon, std::istream& exceptions, const std::string& source = "<stream>");
  static Lexicon load(const std::filesystem::path& lexicon_path, const std::filesystem::path& exceptions_path);

  void add(const std::string& word, unsigned pos, const std::string& lemma);
  void add_exception(const std::string& surface, const std::string& lemma);

  const LexEntry* find(const std::string& word) const;
  std::optional<std::string> exception(const std::string& surface) const;
  std::size_t longest_phrase() const { return longest_phrase_; }

  /// Resolves an inflected token to a lexicon entry carrying `pos`: exact
  /// match, then the exception table, then suffix rules.
  std::optional<LexEntry> resolve(const std::string& token, unsigned pos) const;

 private:
  std::unordered_map<std::string, LexEntry> entries_;
  std::unordered_map<std::string, std::string> exceptions_;
  std::size_t longest_phrase_ = 1;
};

std::vector<std::string> tokenize(const std::string& label);

/// Running counts of labels the normalizers could not fully resolve.
struct NormalizeDiagnostics {
  std::size_t unresolved = 0;
  std::size_t multi_verb = 0;
  std::vector<std::string> unresolved_labels;
};

/// Head-noun keyword: lemma of the last noun token.
std::string normalize_object_label(const std::string& label, const Lexicon& lex,
                                   NormalizeDiagnostics* diag = nullptr);

struct PredicateKeywords {
  std::optional<std::string> verb;
  std::optional<std::string> prep;
  std::optional<std::string> adj;

  bool empty() const { return !verb && !prep && !adj; }
  /// Present parts joined by '|', in verb, preposition, adjective order.
  std::string render() const;
  friend bool operator==(const PredicateKeywords&, const PredicateKeywords&) = default;
};

PredicateKeywords normalize_predicate_label(const std::string& label, const Lexicon& lex,
                                            NormalizeDiagnostics* diag = nullptr);

// ---------------------------------------------------------------------------
// Clustering and trees.

struct ClusterResult {
  std::vector<std::size_t> assignment;  // keyword index -> cluster id
  std::vector<std::string> names;       // cluster id -> name
  std::size_t unresolved = 0;
};

inline constexpr double kDefaultClusterThreshold = 0.65;

/// Single-linkage clustering: keywords are linked when their LCH similarity
/// reaches the threshold; clusters are the connected components, numbered by
/// first appearance and named after the lowest common ancestor's first lemma.
ClusterResult cluster_keywords(const std::vector<std::string>& keywords, const Taxonomy& tax,
                               double threshold = kDefaultClusterThreshold, bool normalized = true);

enum class TreeKind { Object, Predicate };

std::string to_string(TreeKind kind);

inline constexpr const char* kTreeFormat = "zoomnet-ihtree/1";

/// Label hierarchy. Objects: [H0, H1, H2]; predicates: [H0, H1, H2-1, H2-2].
/// maps[j] sends indices of level map_source(j) to level j + 1; for
/// predicates both H2 levels hang off H1.
struct IHTree {
  TreeKind kind = TreeKind::Object;
  std::vector<std::vector<std::string>> levels;
  std::vector<std::vector<std::size_t>> maps;
  nlohmann::json provenance;

  std::size_t map_source(std::size_t j) const { return kind == TreeKind::Predicate && j == 2 ? 1 : j; }
  std::vector<std::size_t> level_sizes() const;
  std::vector<std::string> level_names() const;

  std::optional<std::size_t> find(std::size_t level, const std::string& label) const;
  /// Index path of an H0 label through every level. Throws LookupError.
  std::vector<std::size_t> encode(const std::string& label) const;
  /// Index path of an H0 index.
  std::vector<std::size_t> encode(std::size_t h0) const;

  /// Checks shape, totality and surjectivity; throws ParseError describing the problem.
  void validate() const;

  nlohmann::json to_json() const;
  static IHTree from_json(const nlohmann::json& j);
};

IHTree build_object_tree(const std::vector<std::string>& labels, const Lexicon& lex, const Taxonomy& tax,
                         double threshold = kDefaultClusterThreshold, bool normalized = true,
                         NormalizeDiagnostics* diag = nullptr);

IHTree build_predicate_tree(const std::vector<std::string>& labels, const Lexicon& lex,
                            NormalizeDiagnostics* diag = nullptr);

/// Canonical, diff-stable serialization.
void save_tree(const IHTree& tree, const std::filesystem::path& path);
IHTree load_tree(const std::filesystem::path& path);

/// Rows of (tree, level, class count) in the order H0, H1, H2 | H2-1, H2-2.
nlohmann::json class_count_report(const IHTree& object_tree, const IHTree& predicate_tree);
std::string class_count_table(const IHTree& object_tree, const IHTree& predicate_tree);

}  // namespace zoomnet
