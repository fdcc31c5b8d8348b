#include "strateval/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "strateval/errors.hpp"
#include "strateval/random.hpp"

namespace strateval {

std::string_view to_string(LoopKind kind) noexcept { return kind == LoopKind::open ? "open" : "closed"; }

LoopKind parse_loop_kind(std::string_view text) {
  if (text == "open") return LoopKind::open;
  if (text == "closed") return LoopKind::closed;
  throw ConfigError("unknown loop kind '" + std::string(text) + "' (expected open or closed)");
}

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::uint32_t position_of(const std::vector<std::string>& vocab, const std::string& id) {
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), id);
  return static_cast<std::uint32_t>(it - vocab.begin());
}

std::optional<std::uint32_t> lookup(const std::vector<std::string>& vocab, std::string_view id) {
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), id);
  if (it == vocab.end() || *it != id) return std::nullopt;
  return static_cast<std::uint32_t>(it - vocab.begin());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + delimiter.size();
  }
  return fields;
}

}  // namespace

Dataset Dataset::from_records(std::span<const RawRecord> records, LoopKind loop, int relevance_threshold) {
  if (relevance_threshold < 0 || relevance_threshold > kMaxRating) {
    throw ConfigError("relevance threshold must lie in [0, 5]");
  }
  Dataset out;
  out.loop_ = loop;
  out.threshold_ = relevance_threshold;

  std::vector<std::string> users, items;
  users.reserve(records.size());
  items.reserve(records.size());
  for (const auto& r : records) {
    if (r.rating < 0 || r.rating > kMaxRating) {
      throw DataError("rating " + std::to_string(r.rating) + " for (" + r.user + ", " + r.item + ") outside [0, 5]");
    }
    users.push_back(r.user);
    items.push_back(r.item);
  }
  out.users_ = sorted_unique(std::move(users));
  out.items_ = sorted_unique(std::move(items));

  struct Keyed {
    std::uint32_t user, item;
    std::size_t seq;
    int rating;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(records.size());
  for (std::size_t s = 0; s < records.size(); ++s) {
    keyed.push_back({position_of(out.users_, records[s].user), position_of(out.items_, records[s].item), s,
                     records[s].rating});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.item != b.item) return a.item < b.item;
    return a.seq < b.seq;
  });

  out.interactions_.reserve(keyed.size());
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    const bool last_of_pair =
        k + 1 == keyed.size() || keyed[k + 1].user != keyed[k].user || keyed[k + 1].item != keyed[k].item;
    if (!last_of_pair) continue;
    const auto& e = keyed[k];
    out.interactions_.push_back(
        {e.user, e.item, static_cast<std::uint8_t>(e.rating), e.rating >= relevance_threshold});
  }

  out.item_counts_.assign(out.items_.size(), 0);
  out.user_offsets_.assign(out.users_.size() + 1, 0);
  for (const auto& x : out.interactions_) {
    ++out.item_counts_[x.item];
    ++out.user_offsets_[x.user + 1];
  }
  std::partial_sum(out.user_offsets_.begin(), out.user_offsets_.end(), out.user_offsets_.begin());
  return out;
}

std::optional<std::uint32_t> Dataset::user_index(std::string_view id) const { return lookup(users_, id); }
std::optional<std::uint32_t> Dataset::item_index(std::string_view id) const { return lookup(items_, id); }

std::vector<RawRecord> Dataset::to_records() const {
  std::vector<RawRecord> out;
  out.reserve(interactions_.size());
  for (const auto& x : interactions_) out.push_back({users_[x.user], items_[x.item], x.rating});
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  // Source rows are unique pairs in canonical order, so ascending row order is
  // also the canonical order of the re-indexed subset.
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<RawRecord> records;
  records.reserve(sorted.size());
  for (std::size_t r : sorted) {
    const auto& x = interactions_.at(r);
    records.push_back({users_[x.user], items_[x.item], x.rating});
  }
  Dataset out = from_records(records, loop_, threshold_);
  for (std::size_t k = 0; k < sorted.size(); ++k) out.interactions_[k].relevant = interactions_[sorted[k]].relevant;
  return out;
}

Dataset Dataset::with_loop_kind(LoopKind loop) const {
  Dataset out = *this;
  out.loop_ = loop;
  return out;
}

std::size_t ColumnSchema::min_columns() const noexcept { return std::max({user, item, rating}) + 1; }

Dataset parse_interactions(std::istream& in, const ColumnSchema& schema, std::string_view delimiter,
                           LoopKind loop) {
  if (delimiter.empty()) throw ConfigError("delimiter must not be empty");
  if (schema.user == schema.item || schema.user == schema.rating || schema.item == schema.rating) {
    throw ConfigError("user, item and rating columns must be distinct");
  }
  const std::size_t min_cols = schema.min_columns();
  const std::size_t max_cols = std::max(schema.max_columns, min_cols);

  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_fields(body, delimiter);
    if (fields.size() < min_cols || fields.size() > max_cols) {
      throw ParseError(line_no, "expected " + std::to_string(min_cols) + (min_cols == max_cols ? "" : "-" + std::to_string(max_cols)) +
                                    " columns, found " + std::to_string(fields.size()));
    }
    const std::string_view rating_text = fields[schema.rating];
    int rating = 0;
    const auto [end, ec] = std::from_chars(rating_text.data(), rating_text.data() + rating_text.size(), rating);
    if (ec != std::errc{} || end != rating_text.data() + rating_text.size()) {
      throw ParseError(line_no, "rating '" + std::string(rating_text) + "' is not an integer");
    }
    if (rating < 0 || rating > kMaxRating) {
      throw ParseError(line_no, "rating " + std::to_string(rating) + " outside [0, 5]");
    }
    if (fields[schema.user].empty() || fields[schema.item].empty()) {
      throw ParseError(line_no, "empty user or item identifier");
    }
    records.push_back({std::string(fields[schema.user]), std::string(fields[schema.item]), rating});
  }
  return Dataset::from_records(records, loop);
}

Dataset parse_interactions(std::string_view text, const ColumnSchema& schema, std::string_view delimiter,
                           LoopKind loop) {
  std::istringstream in{std::string(text)};
  return parse_interactions(in, schema, delimiter, loop);
}

void write_interactions(std::ostream& out, const Dataset& dataset, char delimiter) {
  for (const auto& x : dataset.interactions()) {
    out << dataset.users()[x.user] << delimiter << dataset.items()[x.item] << delimiter << int{x.rating} << '\n';
  }
}

Dataset read_interactions_file(const std::string& path, const ColumnSchema& schema, std::string_view delimiter,
                               LoopKind loop) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return parse_interactions(in, schema, delimiter, loop);
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_interactions_file(const std::string& path, const Dataset& dataset, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_interactions(out, dataset, delimiter);
}

Dataset merge(std::span<const Dataset> parts) {
  if (parts.empty()) return {};
  std::vector<RawRecord> records;
  for (const auto& part : parts) {
    auto r = part.to_records();
    records.insert(records.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  return Dataset::from_records(records, parts.front().loop_kind(), parts.front().relevance_threshold());
}

Dataset binarize(const Dataset& dataset, int threshold) {
  if (threshold < 0 || threshold > kMaxRating) throw ConfigError("relevance threshold must lie in [0, 5]");
  Dataset out = dataset;
  out.threshold_ = threshold;
  for (auto& x : out.interactions_) x.relevant = x.rating >= threshold;
  return out;
}

Split split_holdout(const Dataset& dataset, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  const std::size_t n = dataset.size();
  if (n < 2) throw DataError("cannot split a dataset with fewer than 2 interactions");
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(rows));
  std::vector<std::size_t> train_rows(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_rows(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return Split{dataset.subset(train_rows), dataset.subset(test_rows), seed, ratio};
}

}  // namespace strateval
