#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refmi/rng.hpp"

namespace refmi {

enum class Arm : int { Reference = 0, Active = 1 };

/// One patient as read from a file. `outcomes` holds the modelled visits in
/// order (y0..yJ, or y1..yJ for a dataset without baseline); NaN marks a
/// missing value. `dropout` is the visit index of the last observation.
struct PatientRecord {
  std::string id;
  Arm arm = Arm::Reference;
  int dropout = 0;
  std::vector<double> outcomes;
};

/// Immutable two-arm trial dataset with monotone missingness.
///
/// Visits are indexed 0..J. A dataset "with baseline" models visits 0..J and
/// requires y0 for every patient; a dataset without baseline models visits
/// 1..J only, and a patient with dropout 0 has no observed outcome at all.
/// Internally outcomes are stored row-major, one row of `dimension()` values
/// per patient.
class TrialDataset {
 public:
  /// Validates every record; throws MissingBaseline / NonMonotoneMissingness
  /// (listing offending ids), DuplicateId or InvalidArgument.
  TrialDataset(int last_visit, bool has_baseline, std::vector<PatientRecord> patients);

  int last_visit() const noexcept { return last_visit_; }
  bool has_baseline() const noexcept { return has_baseline_; }
  int first_visit() const noexcept { return has_baseline_ ? 0 : 1; }
  int dimension() const noexcept { return last_visit_ + 1 - first_visit(); }

  std::size_t size() const noexcept { return arms_.size(); }
  std::size_t count(Arm arm) const noexcept;
  std::size_t n_active() const noexcept { return count(Arm::Active); }
  std::size_t n_reference() const noexcept { return count(Arm::Reference); }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::uint64_t id_hash(std::size_t i) const { return id_hashes_[i]; }
  Arm arm(std::size_t i) const { return arms_[i]; }
  int dropout(std::size_t i) const { return dropouts_[i]; }
  /// Number of leading modelled visits that are observed.
  int observed_count(std::size_t i) const { return dropouts_[i] + 1 - first_visit(); }
  std::span<const double> outcomes(std::size_t i) const;
  double outcome(std::size_t i, int k) const { return outcomes_[i * stride() + static_cast<std::size_t>(k)]; }
  /// Outcome at the last visit J.
  double final_outcome(std::size_t i) const { return outcome(i, dimension() - 1); }

  bool fully_observed() const noexcept;
  std::size_t incomplete_count() const noexcept;

  PatientRecord record(std::size_t i) const;
  std::vector<PatientRecord> records() const;

  /// Returns a fully observed copy with `filled` (row-major, size() x
  /// dimension()) as outcomes and every dropout set to J. Observed entries of
  /// `filled` must equal the current ones.
  TrialDataset completed_with(std::vector<double> filled) const;

  /// Copy keeping the given rows, in the given order, with new ids.
  TrialDataset select(std::span<const std::size_t> rows, std::vector<std::string> new_ids) const;

  friend bool operator==(const TrialDataset& a, const TrialDataset& b);

 private:
  TrialDataset() = default;
  std::size_t stride() const noexcept { return static_cast<std::size_t>(dimension()); }
  void index_ids();

  int last_visit_ = 0;
  bool has_baseline_ = true;
  std::vector<std::string> ids_;
  std::vector<std::uint64_t> id_hashes_;
  std::vector<Arm> arms_;
  std::vector<int> dropouts_;
  std::vector<double> outcomes_;
};

/// Reads `id,arm,y0,...,yJ` (or `id,arm,y1,...,yJ` for no baseline); blank
/// cells are missing. The dropout of each row is its last non-missing visit.
TrialDataset load_csv(std::istream& in);
TrialDataset load_csv(const std::filesystem::path& path);

/// Writes the same schema; values use the shortest round-trip representation,
/// so load_csv(write_csv(d)) == d.
void write_csv(const TrialDataset& data, std::ostream& out);
void write_csv(const TrialDataset& data, const std::filesystem::path& path);

/// Nonparametric bootstrap resample stratified by arm: every row is replaced
/// by a uniformly drawn row of the same arm, so arm sizes and the arm order
/// of rows are preserved. New ids are `<source id>#<row>`.
TrialDataset resample(const TrialDataset& data, Stream& rng);

/// (reference subset, active subset). Throws EmptyArm if either is empty.
std::pair<TrialDataset, TrialDataset> split_by_arm(const TrialDataset& data);

}  // namespace refmi
