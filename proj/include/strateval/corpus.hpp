#pragma once

// Interaction logs: ingestion, binarisation and holdout splitting.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strateval {

enum class LoopKind { closed, open };

std::string_view to_string(LoopKind kind) noexcept;
LoopKind parse_loop_kind(std::string_view text);

inline constexpr int kMaxRating = 5;
inline constexpr int kDefaultRelevanceThreshold = 4;

// One user-item event. user and item index into the owning Dataset's
// vocabularies.
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint8_t rating = 0;
  bool relevant = false;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// An interaction keyed by external identifiers, before indexing.
struct RawRecord {
  std::string user;
  std::string item;
  int rating = 0;
};

// Immutable, indexed collection of interactions.
//
// Vocabularies are sorted lexicographically; an identifier's index is its
// position, which is also the canonical order used for tie-breaking.
// Interactions are stored sorted by (user, item) and each pair occurs once.
class Dataset {
 public:
  Dataset() = default;

  // Duplicate (user, item) pairs keep the last record. Ratings outside
  // [0, 5] raise DataError.
  static Dataset from_records(std::span<const RawRecord> records, LoopKind loop,
                              int relevance_threshold = kDefaultRelevanceThreshold);

  std::span<const Interaction> interactions() const noexcept { return interactions_; }
  std::span<const std::string> users() const noexcept { return users_; }
  std::span<const std::string> items() const noexcept { return items_; }
  // Interactions per item, aligned with items().
  std::span<const std::uint32_t> item_counts() const noexcept { return item_counts_; }
  // Row range [begin, end) of interactions() belonging to each user.
  std::span<const std::uint32_t> user_offsets() const noexcept { return user_offsets_; }

  std::span<const Interaction> interactions_of(std::uint32_t user) const noexcept {
    return std::span(interactions_).subspan(user_offsets_[user], user_offsets_[user + 1] - user_offsets_[user]);
  }

  std::optional<std::uint32_t> user_index(std::string_view id) const;
  std::optional<std::uint32_t> item_index(std::string_view id) const;

  std::size_t size() const noexcept { return interactions_.size(); }
  bool empty() const noexcept { return interactions_.empty(); }
  LoopKind loop_kind() const noexcept { return loop_; }
  int relevance_threshold() const noexcept { return threshold_; }

  std::vector<RawRecord> to_records() const;

  // Rows selected by position, re-indexed into a fresh Dataset.
  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset with_loop_kind(LoopKind loop) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  friend Dataset binarize(const Dataset&, int);

  std::vector<Interaction> interactions_;
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::vector<std::uint32_t> item_counts_;
  std::vector<std::uint32_t> user_offsets_{0};
  LoopKind loop_ = LoopKind::closed;
  int threshold_ = kDefaultRelevanceThreshold;
};

// Column positions (0-based) of the fields in a delimited line. Lines must
// have between min_columns() and max_columns fields.
struct ColumnSchema {
  std::size_t user = 0;
  std::size_t item = 1;
  std::size_t rating = 2;
  std::size_t max_columns = 4;

  std::size_t min_columns() const noexcept;
};

// Parses delimited text. Blank lines and lines starting with '#' are
// skipped; malformed lines raise ParseError with the 1-based line number.
Dataset parse_interactions(std::istream& in, const ColumnSchema& schema = {}, std::string_view delimiter = ",",
                           LoopKind loop = LoopKind::closed);
Dataset parse_interactions(std::string_view text, const ColumnSchema& schema = {}, std::string_view delimiter = ",",
                           LoopKind loop = LoopKind::closed);

// Canonical text form: "user<d>item<d>rating" per line in canonical order.
void write_interactions(std::ostream& out, const Dataset& dataset, char delimiter = ',');

Dataset read_interactions_file(const std::string& path, const ColumnSchema& schema = {},
                               std::string_view delimiter = ",", LoopKind loop = LoopKind::closed);
void write_interactions_file(const std::string& path, const Dataset& dataset, char delimiter = ',');

// Union of several datasets; later datasets win on duplicate pairs. The loop
// kind and threshold come from the first dataset.
Dataset merge(std::span<const Dataset> parts);

// Recomputes relevance as rating >= threshold; ratings are unchanged.
Dataset binarize(const Dataset& dataset, int threshold = kDefaultRelevanceThreshold);

struct Split {
  Dataset train;
  Dataset test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
};

// Uniform global split without replacement; round(ratio * n) interactions go
// to train, clamped so that both sides are nonempty.
Split split_holdout(const Dataset& dataset, double ratio, std::uint64_t seed);

}  // namespace strateval
