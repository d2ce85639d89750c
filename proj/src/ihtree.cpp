#include "zoomnet/ihtree.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "zoomnet/error.hpp"

namespace zoomnet {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \r\n\t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \r\n\t");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool skippable(const std::string& line) {
  const auto t = trim(line);
  return t.empty() || t[0] == '#';
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

// --- Taxonomy ---------------------------------------------------------------

Taxonomy Taxonomy::parse(std::istream& in, const std::string& source) {
  Taxonomy tax;
  std::vector<std::string> parent_ids;
  std::vector<std::size_t> line_of;
  std::optional<std::size_t> root;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError(source + ": expected node_id<TAB>parent<TAB>lemmas", lineno);
    }
    const std::string id = trim(fields[0]);
    const std::string parent = trim(fields[1]);
    if (id.empty()) throw ParseError(source + ": empty node id", lineno);
    if (tax.by_id_.count(id)) throw ParseError(source + ": duplicate node '" + id + "'", lineno);
    std::vector<std::string> lemmas;
    if (fields.size() == 3) {
      for (auto& l : split(fields[2], ',')) {
        auto t = lower(trim(l));
        if (!t.empty()) lemmas.push_back(t);
      }
    }
    if (lemmas.empty()) lemmas.push_back(lower(id));
    const std::size_t idx = tax.ids_.size();
    if (parent == "-") {
      if (root) {
        throw ParseError(source + ": multiple roots '" + tax.ids_[*root] + "' and '" + id + "'", lineno);
      }
      root = idx;
    }
    tax.by_id_.emplace(id, idx);
    tax.ids_.push_back(id);
    tax.lemmas_.push_back(std::move(lemmas));
    parent_ids.push_back(parent);
    line_of.push_back(lineno);
  }
  if (!root) throw ParseError(source + ": no root node (parent '-')");
  tax.root_ = *root;

  const std::size_t n = tax.ids_.size();
  tax.parent_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == *root) {
      tax.parent_[i] = i;
      continue;
    }
    auto it = tax.by_id_.find(parent_ids[i]);
    if (it == tax.by_id_.end()) {
      throw ParseError(source + ": node '" + tax.ids_[i] + "' has unknown parent '" + parent_ids[i] + "'",
                       line_of[i]);
    }
    if (it->second == i) throw ParseError(source + ": node '" + tax.ids_[i] + "' is its own parent", line_of[i]);
    tax.parent_[i] = it->second;
  }

  // Depths by walking to the root; a walk that revisits a node is a cycle.
  constexpr std::size_t kUnknown = 0;
  tax.depth_.assign(n, kUnknown);
  tax.depth_[*root] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> chain;
    std::vector<char> on_chain(n, 0);
    std::size_t cur = i;
    while (tax.depth_[cur] == kUnknown) {
      if (on_chain[cur]) {
        const std::size_t p = tax.parent_[cur];
        throw ParseError(source + ": cycle between '" + tax.ids_[cur] + "' and '" + tax.ids_[p] + "'",
                         line_of[cur]);
      }
      on_chain[cur] = 1;
      chain.push_back(cur);
      cur = tax.parent_[cur];
    }
    std::size_t d = tax.depth_[cur];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) tax.depth_[*it] = ++d;
  }
  tax.max_depth_ = *std::max_element(tax.depth_.begin(), tax.depth_.end());
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& l : tax.lemmas_[i]) tax.by_lemma_.emplace(l, i);
  return tax;
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse(in, path.string());
}

std::optional<std::size_t> Taxonomy::parent(std::size_t node) const {
  if (node == root_) return std::nullopt;
  return parent_.at(node);
}

std::optional<std::size_t> Taxonomy::find_id(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Taxonomy::find_lemma(const std::string& lemma) const {
  auto it = by_lemma_.find(lower(lemma));
  if (it == by_lemma_.end()) return std::nullopt;
  return it->second;
}

std::size_t Taxonomy::lowest_common_ancestor(std::size_t a, std::size_t b) const {
  while (depth_.at(a) > depth_.at(b)) a = parent_[a];
  while (depth_.at(b) > depth_.at(a)) b = parent_[b];
  while (a != b) {
    a = parent_[a];
    b = parent_[b];
  }
  return a;
}

std::size_t Taxonomy::path_edges(std::size_t a, std::size_t b) const {
  const std::size_t lca = lowest_common_ancestor(a, b);
  return depth_[a] + depth_[b] - 2 * depth_[lca];
}

double lch_similarity(std::size_t a, std::size_t b, const Taxonomy& tax, bool normalized) {
  const double p = static_cast<double>(tax.path_edges(a, b) + 1);
  const double two_d = 2.0 * static_cast<double>(tax.depth());
  const double raw = -std::log(p / two_d);
  return normalized ? raw / std::log(two_d) : raw;
}

// --- Lexicon ----------------------------------------------------------------

unsigned parse_pos_list(const std::string& list) {
  unsigned pos = 0;
  for (auto& raw : split(list, ',')) {
    const auto t = lower(trim(raw));
    if (t == "noun" || t == "n") pos |= kNoun;
    else if (t == "verb" || t == "v") pos |= kVerb;
    else if (t == "preposition" || t == "prep" || t == "p") pos |= kPreposition;
    else if (t == "adjective" || t == "adj" || t == "a") pos |= kAdjective;
    else if (t == "other" || t == "o") pos |= kOther;
    else if (!t.empty()) throw ParseError("unknown part-of-speech tag '" + t + "'");
  }
  return pos;
}

void Lexicon::add(const std::string& word, unsigned pos, const std::string& lemma) {
  const auto w = lower(word);
  const auto l = lower(lemma);
  auto [it, inserted] = entries_.try_emplace(w, LexEntry{pos, l});
  if (!inserted) it->second.pos |= pos;
  // Lemmas are fixed points.
  auto [lt, lemma_new] = entries_.try_emplace(l, LexEntry{pos, l});
  if (!lemma_new && lt->second.lemma == l) lt->second.pos |= pos;
  longest_phrase_ = std::max(longest_phrase_, tokenize(w).size());
}

void Lexicon::add_exception(const std::string& surface, const std::string& lemma) {
  exceptions_[lower(surface)] = lower(lemma);
}

Lexicon Lexicon::parse(std::istream& lexicon, std::istream& exceptions, const std::string& source) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lexicon, line)) {
    ++lineno;
    if (skippable(line)) continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw ParseError(source + ": expected word<TAB>pos_list<TAB>lemma", lineno);
    unsigned pos;
    try {
      pos = parse_pos_list(f[1]);
    } catch (const ParseError& e) {
      throw ParseError(source + ": " + e.what(), lineno);
    }
    lex.add(trim(f[0]), pos, trim(f[2]).empty() ? trim(f[0]) : trim(f[2]));
  }
  lineno = 0;
  while (std::getline(exceptions, line)) {
    ++lineno;
    if (skippable(line)) continue;
    auto f = split(line, '\t');
    if (f.size() != 2) throw ParseError(source + " exceptions: expected surface<TAB>lemma", lineno);
    lex.add_exception(trim(f[0]), trim(f[1]));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& lexicon_path, const std::filesystem::path& exceptions_path) {
  auto lin = open_or_throw(lexicon_path);
  auto ein = open_or_throw(exceptions_path);
  return parse(lin, ein, lexicon_path.string());
}

const LexEntry* Lexicon::find(const std::string& word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::string> Lexicon::exception(const std::string& surface) const {
  auto it = exceptions_.find(surface);
  if (it == exceptions_.end()) return std::nullopt;
  return it->second;
}

std::optional<LexEntry> Lexicon::resolve(const std::string& token, unsigned pos) const {
  auto hit = [&](const std::string& w) -> std::optional<LexEntry> {
    const LexEntry* e = find(w);
    if (e && (e->pos & pos)) return *e;
    return std::nullopt;
  };
  if (auto e = hit(token)) return e;
  if (auto ex = exception(token)) {
    if (auto e = hit(*ex)) return e;
  }
  auto ends = [&](const std::string& suffix) {
    return token.size() > suffix.size() + 1 && token.compare(token.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  auto stem = [&](std::size_t n) { return token.substr(0, token.size() - n); };
  auto undouble = [](const std::string& s) {
    return s.size() >= 2 && s[s.size() - 1] == s[s.size() - 2] ? s.substr(0, s.size() - 1) : s;
  };
  std::vector<std::string> candidates;
  if (ends("ies")) candidates.push_back(stem(3) + "y");
  if (ends("es")) candidates.push_back(stem(2));
  if (ends("s") && !ends("ss")) candidates.push_back(stem(1));
  if (pos & kVerb) {
    if (ends("ing")) {
      candidates.push_back(stem(3));
      candidates.push_back(stem(3) + "e");
      candidates.push_back(undouble(stem(3)));
    }
    if (ends("ied")) candidates.push_back(stem(3) + "y");
    if (ends("ed")) {
      candidates.push_back(stem(2));
      candidates.push_back(stem(1));
      candidates.push_back(undouble(stem(2)));
    }
  }
  for (const auto& c : candidates) {
    if (auto e = hit(c)) return e;
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(const std::string& label) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '|') {
      if (!cur.empty()) out.push_back(lower(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(lower(cur));
  return out;
}

std::string normalize_object_label(const std::string& label, const Lexicon& lex, NormalizeDiagnostics* diag) {
  const auto tokens = tokenize(label);
  std::optional<std::string> head;
  for (const auto& t : tokens) {
    if (auto e = lex.resolve(t, kNoun)) head = e->lemma;
  }
  if (head) return *head;
  if (diag) {
    ++diag->unresolved;
    diag->unresolved_labels.push_back(label);
  }
  if (tokens.empty()) return "";
  const auto& last = tokens.back();
  if (auto e = lex.resolve(last, kNoun | kVerb | kPreposition | kAdjective | kOther)) return e->lemma;
  return last;
}

std::string PredicateKeywords::render() const {
  std::string out;
  for (const auto* part : {&verb, &prep, &adj}) {
    if (!*part) continue;
    if (!out.empty()) out += '|';
    out += **part;
  }
  return out;
}

PredicateKeywords normalize_predicate_label(const std::string& label, const Lexicon& lex,
                                            NormalizeDiagnostics* diag) {
  const auto tokens = tokenize(label);
  PredicateKeywords kw;
  bool extra_verb = false;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t len = std::min(lex.longest_phrase(), tokens.size() - i); len >= 2; --len) {
      std::string phrase = tokens[i];
      for (std::size_t k = 1; k < len; ++k) phrase += " " + tokens[i + k];
      const LexEntry* e = lex.find(phrase);
      if (e && (e->pos & kPreposition)) {
        if (!kw.prep) kw.prep = e->lemma;
        i += len;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    const auto& t = tokens[i++];
    if (auto v = lex.resolve(t, kVerb)) {
      if (!kw.verb) kw.verb = v->lemma;
      else extra_verb = true;
    } else if (auto p = lex.resolve(t, kPreposition)) {
      if (!kw.prep) kw.prep = p->lemma;
    } else if (auto a = lex.resolve(t, kAdjective)) {
      if (!kw.adj) kw.adj = a->lemma;
    }
  }
  if (diag) {
    if (extra_verb) ++diag->multi_verb;
    if (kw.empty()) {
      ++diag->unresolved;
      diag->unresolved_labels.push_back(label);
    }
  }
  return kw;
}

// --- Clustering -------------------------------------------------------------

ClusterResult cluster_keywords(const std::vector<std::string>& keywords, const Taxonomy& tax, double threshold,
                               bool normalized) {
  const std::size_t n = keywords.size();
  std::vector<std::optional<std::size_t>> node(n);
  for (std::size_t i = 0; i < n; ++i) node[i] = tax.find_lemma(keywords[i]);

  std::vector<std::size_t> link(n);
  std::iota(link.begin(), link.end(), 0);
  auto find = [&](std::size_t x) {
    while (link[x] != x) x = link[x] = link[link[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!node[i]) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!node[j]) continue;
      if (lch_similarity(*node[i], *node[j], tax, normalized) >= threshold) {
        const auto a = find(i), b = find(j);
        if (a != b) link[std::max(a, b)] = std::min(a, b);
      }
    }
  }

  ClusterResult out;
  out.assignment.assign(n, 0);
  std::map<std::size_t, std::size_t> cluster_of_root;
  std::vector<std::optional<std::size_t>> lca;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    auto [it, fresh] = cluster_of_root.try_emplace(r, out.names.size());
    if (fresh) {
      out.names.push_back(keywords[i]);
      lca.push_back(node[i]);
      if (!node[i]) ++out.unresolved;
    } else if (node[i]) {
      auto& l = lca[it->second];
      l = tax.lowest_common_ancestor(*l, *node[i]);
    }
    out.assignment[i] = it->second;
  }
  std::map<std::string, std::size_t> used;
  for (std::size_t c = 0; c < out.names.size(); ++c) {
    std::string name = lca[c] ? tax.lemmas(*lca[c]).front() : out.names[c];
    const auto count = ++used[name];
    if (count > 1) name += "#" + std::to_string(count);
    out.names[c] = name;
  }
  return out;
}

// --- Trees ------------------------------------------------------------------

std::string to_string(TreeKind kind) { return kind == TreeKind::Object ? "object" : "predicate"; }

std::vector<std::size_t> IHTree::level_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& l : levels) out.push_back(l.size());
  return out;
}

std::vector<std::string> IHTree::level_names() const {
  if (kind == TreeKind::Object) return {"H0", "H1", "H2"};
  return {"H0", "H1", "H2-1", "H2-2"};
}

std::optional<std::size_t> IHTree::find(std::size_t level, const std::string& label) const {
  const auto& l = levels.at(level);
  auto it = std::find(l.begin(), l.end(), label);
  if (it == l.end()) return std::nullopt;
  return static_cast<std::size_t>(it - l.begin());
}

std::vector<std::size_t> IHTree::encode(std::size_t h0) const {
  if (levels.empty() || h0 >= levels[0].size()) {
    throw LookupError(to_string(kind) + " tree: H0 index " + std::to_string(h0) + " out of range");
  }
  std::vector<std::size_t> path{h0};
  for (std::size_t j = 0; j < maps.size(); ++j) path.push_back(maps[j][path[map_source(j)]]);
  return path;
}

std::vector<std::size_t> IHTree::encode(const std::string& label) const {
  auto idx = find(0, label);
  if (!idx) throw LookupError(to_string(kind) + " tree: unknown label '" + label + "'");
  return encode(*idx);
}

void IHTree::validate() const {
  const std::size_t expected = kind == TreeKind::Object ? 3 : 4;
  if (levels.size() != expected) {
    throw ParseError(to_string(kind) + " tree: expected " + std::to_string(expected) + " levels, got " +
                     std::to_string(levels.size()));
  }
  if (maps.size() != levels.size() - 1) {
    throw ParseError(to_string(kind) + " tree: expected " + std::to_string(levels.size() - 1) + " maps, got " +
                     std::to_string(maps.size()));
  }
  const auto names = level_names();
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<std::string> sorted = levels[l];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ParseError(to_string(kind) + " tree: duplicate label at level " + names[l]);
    }
  }
  for (std::size_t j = 0; j < maps.size(); ++j) {
    const auto& src = levels[map_source(j)];
    const auto& dst = levels[j + 1];
    if (maps[j].size() != src.size()) {
      throw ParseError(to_string(kind) + " tree: map into " + names[j + 1] + " has " +
                       std::to_string(maps[j].size()) + " entries for " + std::to_string(src.size()) + " labels");
    }
    std::vector<char> hit(dst.size(), 0);
    for (std::size_t i = 0; i < maps[j].size(); ++i) {
      if (maps[j][i] >= dst.size()) {
        throw ParseError(to_string(kind) + " tree: dangling map index " + std::to_string(maps[j][i]) +
                         " at level " + names[j + 1] + " (entry " + std::to_string(i) + ")");
      }
      hit[maps[j][i]] = 1;
    }
    for (std::size_t k = 0; k < dst.size(); ++k) {
      if (!hit[k]) {
        throw ParseError(to_string(kind) + " tree: class '" + dst[k] + "' at level " + names[j + 1] +
                         " has no children");
      }
    }
  }
}

nlohmann::json IHTree::to_json() const {
  nlohmann::json j;
  j["version"] = kTreeFormat;
  j["kind"] = to_string(kind);
  j["levels"] = levels;
  j["maps"] = maps;
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

IHTree IHTree::from_json(const nlohmann::json& j) {
  const auto version = j.value("version", std::string{});
  if (version != kTreeFormat) {
    throw ParseError("tree: unsupported schema version '" + version + "' (expected " + kTreeFormat + ")");
  }
  IHTree t;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "object") t.kind = TreeKind::Object;
  else if (kind == "predicate") t.kind = TreeKind::Predicate;
  else throw ParseError("tree: unknown kind '" + kind + "'");
  t.levels = j.at("levels").get<std::vector<std::vector<std::string>>>();
  t.maps = j.at("maps").get<std::vector<std::vector<std::size_t>>>();
  if (j.contains("provenance")) t.provenance = j["provenance"];
  t.validate();
  return t;
}

namespace {

std::vector<std::string> dedup(const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  std::unordered_map<std::string, bool> seen;
  for (const auto& l : labels)
    if (seen.try_emplace(l, true).second) out.push_back(l);
  return out;
}

/// Index of `key` in `level`, appending it if new.
std::size_t intern(std::vector<std::string>& level, std::unordered_map<std::string, std::size_t>& index,
                   const std::string& key) {
  auto [it, fresh] = index.try_emplace(key, level.size());
  if (fresh) level.push_back(key);
  return it->second;
}

}  // namespace

IHTree build_object_tree(const std::vector<std::string>& labels, const Lexicon& lex, const Taxonomy& tax,
                         double threshold, bool normalized, NormalizeDiagnostics* diag) {
  IHTree t;
  t.kind = TreeKind::Object;
  t.levels.resize(3);
  t.maps.resize(2);
  t.levels[0] = dedup(labels);
  std::unordered_map<std::string, std::size_t> h1_index;
  for (const auto& label : t.levels[0]) {
    t.maps[0].push_back(intern(t.levels[1], h1_index, normalize_object_label(label, lex, diag)));
  }
  auto clusters = cluster_keywords(t.levels[1], tax, threshold, normalized);
  t.levels[2] = clusters.names;
  t.maps[1] = clusters.assignment;
  t.validate();
  return t;
}

IHTree build_predicate_tree(const std::vector<std::string>& labels, const Lexicon& lex,
                            NormalizeDiagnostics* diag) {
  IHTree t;
  t.kind = TreeKind::Predicate;
  t.levels.resize(4);
  t.maps.resize(3);
  t.levels[0] = dedup(labels);
  std::unordered_map<std::string, std::size_t> h1_index, verb_index, prep_index;
  std::vector<PredicateKeywords> h1_keywords;
  for (const auto& label : t.levels[0]) {
    auto kw = normalize_predicate_label(label, lex, diag);
    auto key = kw.render();
    if (key.empty()) key = label;
    const auto idx = intern(t.levels[1], h1_index, key);
    if (idx == h1_keywords.size()) h1_keywords.push_back(kw);
    t.maps[0].push_back(idx);
  }
  for (std::size_t i = 0; i < t.levels[1].size(); ++i) {
    const auto& kw = h1_keywords[i];
    const auto& self = t.levels[1][i];
    t.maps[1].push_back(intern(t.levels[2], verb_index, kw.verb ? *kw.verb : self));
    t.maps[2].push_back(intern(t.levels[3], prep_index, kw.prep ? *kw.prep : self));
  }
  t.validate();
  return t;
}

void save_tree(const IHTree& tree, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write tree file " + path.string());
  os << tree.to_json().dump(2) << '\n';
  if (!os) throw IoError("failed writing tree file " + path.string());
}

IHTree load_tree(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return IHTree::from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::json class_count_report(const IHTree& object_tree, const IHTree& predicate_tree) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto* t : {&object_tree, &predicate_tree}) {
    const auto names = t->level_names();
    for (std::size_t l = 0; l < t->levels.size(); ++l) {
      rows.push_back({{"tree", to_string(t->kind)}, {"level", names[l]}, {"classes", t->levels[l].size()}});
    }
  }
  return {{"title", "Number of classes in each layer"}, {"rows", rows}};
}

std::string class_count_table(const IHTree& object_tree, const IHTree& predicate_tree) {
  std::ostringstream os;
  os << "Number of classes in each layer\n";
  os << std::left << std::setw(11) << "tree";
  for (const char* h : {"H0", "H1", "H2", "H2-1", "H2-2"}) os << std::right << std::setw(7) << h;
  os << '\n';
  auto row = [&](const IHTree& t) {
    os << std::left << std::setw(11) << to_string(t.kind);
    const auto names = t.level_names();
    for (const char* h : {"H0", "H1", "H2", "H2-1", "H2-2"}) {
      auto it = std::find(names.begin(), names.end(), h);
      os << std::right << std::setw(7);
      if (it == names.end()) os << "-";
      else os << t.levels[static_cast<std::size_t>(it - names.begin())].size();
    }
    os << '\n';
  };
  row(object_tree);
  row(predicate_tree);
  return os.str();
}

}  // namespace zoomnet
