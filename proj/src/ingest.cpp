// Copyright 2026 The Pctx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pctx/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "binary_io.hpp"

namespace pctx {

namespace {

constexpr char kEmbeddingMagic[8] = {'P', 'C', 'T', 'X', 'E', 'M', 'B', '1'};

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::size_t InteractionLog::num_interactions() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.items.size();
  return n;
}

std::vector<InteractionRecord> parse_interaction_records(std::istream& in) {
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("malformed interaction at line " +
                       std::to_string(line_no) +
                       ": expected user<TAB>item<TAB>timestamp");
    }
    std::int64_t ts = 0;
    const auto ts_text = fields[2];
    auto res = std::from_chars(ts_text.data(), ts_text.data() + ts_text.size(),
                               ts);
    if (res.ec != std::errc() || res.ptr != ts_text.data() + ts_text.size()) {
      throw ParseError("malformed timestamp at line " +
                       std::to_string(line_no) + ": '" + std::string(ts_text) +
                       "'");
    }
    records.push_back({std::string(fields[0]), std::string(fields[1]), ts});
  }
  return records;
}

std::vector<InteractionRecord> kcore_filter(
    std::vector<InteractionRecord> records, std::size_t min_interactions) {
  while (true) {
    std::unordered_map<std::string, std::size_t> user_count;
    std::unordered_map<std::string, std::size_t> item_count;
    for (const auto& r : records) {
      ++user_count[r.user];
      ++item_count[r.item];
    }
    const auto before = records.size();
    std::erase_if(records, [&](const InteractionRecord& r) {
      return user_count[r.user] < min_interactions ||
             item_count[r.item] < min_interactions;
    });
    if (records.size() == before) return records;
  }
}

InteractionLog build_log(std::vector<InteractionRecord> records,
                         const PipelineConfig& cfg) {
  records = kcore_filter(std::move(records), cfg.min_interactions);
  if (records.empty()) {
    throw Error("corpus vanished: no interactions survive " +
                std::to_string(cfg.min_interactions) + "-core filtering");
  }

  // std::map keeps users in key order.
  std::map<std::string, std::vector<const InteractionRecord*>> by_user;
  for (const auto& r : records) by_user[r.user].push_back(&r);

  std::set<std::string> surviving_items;
  for (auto& [user, recs] : by_user) {
    std::stable_sort(
        recs.begin(), recs.end(),
        [](const InteractionRecord* a, const InteractionRecord* b) {
          return a->timestamp < b->timestamp;
        });
    if (recs.size() > cfg.max_seq_len) {
      recs.erase(recs.begin(), recs.end() - cfg.max_seq_len);
    }
    for (const auto* r : recs) surviving_items.insert(r->item);
  }

  InteractionLog log;
  for (const auto& item : surviving_items) log.items.intern(item);
  log.sequences.reserve(by_user.size());
  for (const auto& [user, recs] : by_user) {
    InteractionSequence seq;
    seq.user = user;
    for (const auto* r : recs) {
      seq.items.push_back(*log.items.find(r->item));
      seq.timestamps.push_back(r->timestamp);
    }
    log.sequences.push_back(std::move(seq));
  }
  return log;
}

InteractionLog load_interactions(const std::string& path,
                                 const PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interactions file " + path);
  return build_log(parse_interaction_records(in), cfg);
}

void write_interactions(const InteractionLog& log, std::ostream& out) {
  for (const auto& seq : log.sequences) {
    for (std::size_t i = 0; i < seq.items.size(); ++i) {
      const std::int64_t ts = seq.timestamps.size() == seq.items.size()
                                  ? seq.timestamps[i]
                                  : static_cast<std::int64_t>(i + 1);
      out << seq.user << '\t' << log.items.raw(seq.items[i]) << '\t' << ts
          << '\n';
    }
  }
}

void EmbeddingTable::add(std::string key, std::span<const double> values) {
  if (values.size() != dim_) {
    throw ParseError("row length mismatch for key '" + key + "': expected " +
                     std::to_string(dim_) + ", got " +
                     std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ParseError("non-finite embedding value for key '" + key + "'");
    }
  }
  if (index_.count(key) != 0) {
    throw ParseError("duplicate embedding key '" + key + "'");
  }
  index_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  rows_.append_row(values);
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

void check_known(const std::string& key, const Vocabulary* expected) {
  if (expected != nullptr && !expected->find(key)) {
    throw ParseError("unknown item key '" + key + "' in embedding table");
  }
}

EmbeddingTable read_embeddings_binary(std::istream& in,
                                      const Vocabulary* expected) {
  const auto n = detail::read_le<std::uint64_t>(in);
  const auto dim = detail::read_le<std::uint64_t>(in);
  if (dim == 0) throw ParseError("embedding dim must be positive");
  EmbeddingTable table(dim);
  Vec row(dim);
  for (std::uint64_t r = 0; r < n; ++r) {
    const auto len = detail::read_le<std::uint32_t>(in);
    std::string key(len, '\0');
    if (!in.read(key.data(), len)) {
      throw ParseError("unexpected end of binary embedding stream");
    }
    for (auto& v : row) v = detail::read_f64(in);
    check_known(key, expected);
    table.add(std::move(key), row);
  }
  return table;
}

EmbeddingTable read_embeddings_text(std::istream& in,
                                    const Vocabulary* expected) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty embedding file");
  line = strip_cr(std::move(line));
  const auto header = split_whitespace(line);
  std::size_t n = 0;
  std::size_t dim = 0;
  auto parse_count = [](std::string_view t, std::size_t& out) {
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    return res.ec == std::errc() && res.ptr == t.data() + t.size();
  };
  if (header.size() != 2 || !parse_count(header[0], n) ||
      !parse_count(header[1], dim) || dim == 0) {
    throw ParseError("embedding header must be 'N D' with D > 0");
  }
  EmbeddingTable table(dim);
  std::size_t line_no = 1;
  Vec row;
  while (table.size() < n && std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("embedding line " + std::to_string(line_no) +
                       ": missing tab after key");
    }
    std::string key = line.substr(0, tab);
    const auto fields =
        split_whitespace(std::string_view(line).substr(tab + 1));
    row.assign(fields.size(), 0.0);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_double(fields[i], row[i])) {
        // from_chars accepts "inf"/"nan"; anything else is malformed.
        throw ParseError("embedding line " + std::to_string(line_no) +
                         ": bad number '" + std::string(fields[i]) + "'");
      }
    }
    check_known(key, expected);
    table.add(std::move(key), row);
  }
  if (table.size() != n) {
    throw ParseError("embedding file declares " + std::to_string(n) +
                     " rows but has " + std::to_string(table.size()));
  }
  return table;
}

}  // namespace

EmbeddingTable read_embeddings(std::istream& in,
                               const Vocabulary* expected_items) {
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() == sizeof(magic) &&
      std::equal(std::begin(magic), std::end(magic),
                 std::begin(kEmbeddingMagic))) {
    return read_embeddings_binary(in, expected_items);
  }
  in.clear();
  in.seekg(0);
  return read_embeddings_text(in, expected_items);
}

EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary* expected_items) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file " + path);
  return read_embeddings(in, expected_items);
}

void write_embeddings_text(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dim() << '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.keys()[r] << '\t';
    const auto row = table.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ' ';
      out << format_double(row[i]);
    }
    out << '\n';
  }
}

void write_embeddings_binary(const EmbeddingTable& table, std::ostream& out) {
  out.write(kEmbeddingMagic, sizeof(kEmbeddingMagic));
  detail::write_le<std::uint64_t>(out, table.size());
  detail::write_le<std::uint64_t>(out, table.dim());
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& key = table.keys()[r];
    detail::write_le<std::uint32_t>(out,
                                    static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    for (double v : table.row(r)) detail::write_f64(out, v);
  }
}

Matrix bind_features(const EmbeddingTable& table, const Vocabulary& items) {
  Matrix out(items.size(), table.dim());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& raw = items.raw(ItemId(i));
    const auto row = table.find(raw);
    if (!row) throw Error("missing feature row for item '" + raw + "'");
    std::copy_n(table.row(*row).begin(), table.dim(), out.row(i).begin());
  }
  return out;
}

EmbeddingTable restrict_to_vocabulary(const EmbeddingTable& table,
                                      const Vocabulary& items) {
  EmbeddingTable out(table.dim());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& raw = items.raw(ItemId(i));
    if (const auto row = table.find(raw)) out.add(raw, table.row(*row));
  }
  return out;
}

Split make_split(const InteractionLog& log) {
  Split split;
  for (std::size_t s = 0; s < log.sequences.size(); ++s) {
    const auto& items = log.sequences[s].items;
    if (items.size() < 3) {
      ++split.excluded;
      continue;
    }
    SplitEntry e;
    e.sequence = static_cast<std::uint32_t>(s);
    e.train.assign(items.begin(), items.end() - 2);
    e.validation = items[items.size() - 2];
    e.test = items.back();
    split.entries.push_back(std::move(e));
  }
  if (split.excluded > 0) {
    pctx::log(LogLevel::kWarn, "make_split: excluded " +
                             std::to_string(split.excluded) +
                             " sequences shorter than 3");
  }
  return split;
}

namespace {

std::string padded(char prefix, std::size_t i, std::size_t width) {
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

// Gram-Schmidt over seeded Gaussian draws; falls back to plain normalized
// directions when there are more intents than dimensions.
std::vector<Vec> intent_basis(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<Vec> basis;
  for (std::size_t k = 0; k < n; ++k) {
    Vec v(dim);
    for (auto& x : v) x = rng.normal();
    if (n <= dim) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
      }
    }
    const double norm = std::sqrt(squared_norm(v));
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticOptions& o) {
  if (o.n_intents < 2) {
    throw Error("generate_synthetic: n_intents must be >= 2");
  }
  if (o.n_items < o.n_intents) {
    throw Error("generate_synthetic: n_items must be >= n_intents");
  }
  if (o.min_len < 1 || o.max_len < o.min_len || o.dim < 1) {
    throw Error("generate_synthetic: invalid length or dim options");
  }

  Rng rng(o.seed);
  const auto basis = intent_basis(o.n_intents, o.dim, rng);
  const std::size_t width =
      std::to_string(std::max(o.n_items, o.n_users)).size();

  std::vector<std::vector<std::uint32_t>> intents(o.n_items);
  Matrix features(o.n_items, o.dim);
  for (std::size_t j = 0; j < o.n_items; ++j) {
    const auto primary = static_cast<std::uint32_t>(j % o.n_intents);
    intents[j].push_back(primary);
    if (rng.uniform() < o.dual_fraction) {
      const auto secondary = static_cast<std::uint32_t>(
          (primary + 1 + rng.below(o.n_intents - 1)) % o.n_intents);
      intents[j].push_back(secondary);
    }
    Vec spread(o.dim);
    for (auto& x : spread) x = rng.normal();
    const double spread_norm = std::sqrt(squared_norm(spread));
    const bool dual = intents[j].size() == 2;
    const double wp = dual ? o.primary_weight : 1.0;
    auto row = features.row(j);
    for (std::size_t i = 0; i < o.dim; ++i) {
      row[i] = wp * basis[primary][i] +
               o.item_spread * spread[i] / spread_norm + o.noise * rng.normal();
      if (dual) row[i] += (1.0 - wp) * basis[intents[j][1]][i];
    }
  }

  // Zipf-like popularity over a seeded permutation of items.
  std::vector<std::size_t> perm(o.n_items);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = o.n_items; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  std::vector<std::vector<double>> pool(o.n_intents, Vec(o.n_items, 0.0));
  for (std::size_t j = 0; j < o.n_items; ++j) {
    const double pop =
        std::pow(1.0 + static_cast<double>(perm[j]), -o.popularity_exponent);
    pool[intents[j][0]][j] = pop;
    if (intents[j].size() == 2) {
      pool[intents[j][1]][j] = o.secondary_exposure * pop;
    }
  }

  std::vector<InteractionRecord> records;
  std::unordered_map<std::string, std::uint32_t> intent_of_user;
  std::vector<bool> used(o.n_items, false);
  for (std::size_t u = 0; u < o.n_users; ++u) {
    const std::string user = padded('u', u, width);
    const auto intent = static_cast<std::uint32_t>(rng.below(o.n_intents));
    intent_of_user[user] = intent;
    const std::size_t len = o.min_len + rng.below(o.max_len - o.min_len + 1);
    std::vector<std::size_t> chosen;
    for (std::size_t step = 0; step < len && chosen.size() < o.n_items;
         ++step) {
      std::size_t item = 0;
      for (int attempt = 0; attempt < 100; ++attempt) {
        item = rng.uniform() < o.on_intent ? rng.weighted(pool[intent])
                                           : rng.below(o.n_items);
        if (!used[item]) break;
      }
      if (used[item]) continue;
      used[item] = true;
      chosen.push_back(item);
    }
    // Draws without replacement surface popular items first; shuffling
    // decouples an item's position from its popularity.
    for (std::size_t i = chosen.size(); i > 1; --i) {
      std::swap(chosen[i - 1], chosen[rng.below(i)]);
    }
    for (std::size_t step = 0; step < chosen.size(); ++step) {
      records.push_back({user, padded('i', chosen[step], width),
                         static_cast<std::int64_t>(step + 1)});
      used[chosen[step]] = false;
    }
  }

  PipelineConfig cfg;
  cfg.min_interactions = o.min_interactions;
  cfg.max_seq_len = o.max_seq_len;

  SyntheticCorpus corpus;
  corpus.log = build_log(std::move(records), cfg);

  EmbeddingTable all(o.dim);
  for (std::size_t j = 0; j < o.n_items; ++j) {
    all.add(padded('i', j, width), features.row(j));
  }
  corpus.features = restrict_to_vocabulary(all, corpus.log.items);

  corpus.item_intents.resize(corpus.log.items.size());
  for (std::size_t i = 0; i < corpus.log.items.size(); ++i) {
    const auto& raw = corpus.log.items.raw(ItemId(i));
    const std::size_t j = std::stoul(raw.substr(1));
    corpus.item_intents[i] = intents[j];
  }
  for (const auto& seq : corpus.log.sequences) {
    corpus.user_intent.push_back(intent_of_user.at(seq.user));
  }
  return corpus;
}

SyntheticCorpus generate_synthetic(std::size_t n_users, std::size_t n_items,
                                   std::size_t n_intents, std::uint64_t seed) {
  SyntheticOptions o;
  o.n_users = n_users;
  o.n_items = n_items;
  o.n_intents = n_intents;
  o.seed = seed;
  return generate_synthetic(o);
}

}  // namespace pctx
