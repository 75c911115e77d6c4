#include "refmi/trial_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "refmi/error.hpp"

namespace refmi {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i == 5 && ids.size() > 6) {
      out += ", ... (" + std::to_string(ids.size()) + " total)";
      break;
    }
    if (i) out += ", ";
    out += ids[i];
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

TrialDataset::TrialDataset(int last_visit, bool has_baseline, std::vector<PatientRecord> patients)
    : last_visit_(last_visit), has_baseline_(has_baseline) {
  if (last_visit < first_visit()) {
    throw Error(ErrorKind::InvalidArgument, "a dataset without baseline needs last visit >= 1");
  }
  const auto dim = static_cast<std::size_t>(dimension());
  std::vector<std::string> no_baseline;
  std::vector<std::string> non_monotone;
  ids_.reserve(patients.size());
  arms_.reserve(patients.size());
  dropouts_.reserve(patients.size());
  outcomes_.reserve(patients.size() * dim);
  for (auto& p : patients) {
    if (p.id.empty()) throw Error(ErrorKind::InvalidArgument, "patient id must not be empty");
    if (p.arm != Arm::Reference && p.arm != Arm::Active) {
      throw Error(ErrorKind::InvalidArgument, "patient " + p.id + ": arm must be 0 or 1");
    }
    if (p.outcomes.size() != dim) {
      throw Error(ErrorKind::InvalidArgument,
                  "patient " + p.id + ": expected " + std::to_string(dim) + " outcomes");
    }
    int observed = 0;
    bool gap = false;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = p.outcomes[k];
      if (std::isnan(v)) continue;
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::InvalidArgument, "patient " + p.id + ": non-finite outcome");
      }
      if (static_cast<int>(k) != observed) gap = true;
      observed = static_cast<int>(k) + 1;
    }
    if (has_baseline && std::isnan(p.outcomes[0])) {
      no_baseline.push_back(p.id);
    } else if (gap) {
      non_monotone.push_back(p.id);
    } else if (p.dropout != observed - 1 + first_visit()) {
      throw Error(ErrorKind::InvalidArgument,
                  "patient " + p.id + ": dropout " + std::to_string(p.dropout) +
                      " does not match the observed outcomes");
    }
    ids_.push_back(std::move(p.id));
    arms_.push_back(p.arm);
    dropouts_.push_back(p.dropout);
    outcomes_.insert(outcomes_.end(), p.outcomes.begin(), p.outcomes.end());
  }
  if (!no_baseline.empty()) {
    throw Error(ErrorKind::MissingBaseline, "baseline outcome missing for " + join_ids(no_baseline));
  }
  if (!non_monotone.empty()) {
    throw Error(ErrorKind::NonMonotoneMissingness,
                "intermittent missing values for " + join_ids(non_monotone));
  }
  index_ids();
}

void TrialDataset::index_ids() {
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids_.size());
  id_hashes_.clear();
  id_hashes_.reserve(ids_.size());
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw Error(ErrorKind::DuplicateId, "duplicate patient id " + id);
    id_hashes_.push_back(stable_hash(id));
  }
}

std::size_t TrialDataset::count(Arm arm) const noexcept {
  std::size_t n = 0;
  for (Arm a : arms_) n += (a == arm);
  return n;
}

std::span<const double> TrialDataset::outcomes(std::size_t i) const {
  return {outcomes_.data() + i * stride(), stride()};
}

bool TrialDataset::fully_observed() const noexcept { return incomplete_count() == 0; }

std::size_t TrialDataset::incomplete_count() const noexcept {
  std::size_t n = 0;
  for (int d : dropouts_) n += (d < last_visit_);
  return n;
}

PatientRecord TrialDataset::record(std::size_t i) const {
  auto y = outcomes(i);
  return PatientRecord{ids_[i], arms_[i], dropouts_[i], std::vector<double>(y.begin(), y.end())};
}

std::vector<PatientRecord> TrialDataset::records() const {
  std::vector<PatientRecord> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(record(i));
  return out;
}

TrialDataset TrialDataset::completed_with(std::vector<double> filled) const {
  if (filled.size() != outcomes_.size()) {
    throw Error(ErrorKind::InvalidArgument, "completed outcome matrix has the wrong size");
  }
  for (std::size_t c = 0; c < filled.size(); ++c) {
    if (!std::isfinite(filled[c])) {
      throw Error(ErrorKind::InvalidArgument, "completed outcomes must be finite");
    }
    if (!std::isnan(outcomes_[c]) && filled[c] != outcomes_[c]) {
      throw Error(ErrorKind::InvalidArgument, "completion altered an observed outcome");
    }
  }
  TrialDataset out;
  out.last_visit_ = last_visit_;
  out.has_baseline_ = has_baseline_;
  out.ids_ = ids_;
  out.id_hashes_ = id_hashes_;
  out.arms_ = arms_;
  out.dropouts_.assign(size(), last_visit_);
  out.outcomes_ = std::move(filled);
  return out;
}

TrialDataset TrialDataset::select(std::span<const std::size_t> rows,
                                  std::vector<std::string> new_ids) const {
  if (new_ids.size() != rows.size()) {
    throw Error(ErrorKind::InvalidArgument, "one id per selected row is required");
  }
  TrialDataset out;
  out.last_visit_ = last_visit_;
  out.has_baseline_ = has_baseline_;
  out.ids_ = std::move(new_ids);
  out.arms_.reserve(rows.size());
  out.dropouts_.reserve(rows.size());
  out.outcomes_.reserve(rows.size() * stride());
  for (std::size_t r : rows) {
    if (r >= size()) throw Error(ErrorKind::InvalidArgument, "row index out of range");
    out.arms_.push_back(arms_[r]);
    out.dropouts_.push_back(dropouts_[r]);
    auto y = outcomes(r);
    out.outcomes_.insert(out.outcomes_.end(), y.begin(), y.end());
  }
  out.index_ids();
  return out;
}

bool operator==(const TrialDataset& a, const TrialDataset& b) {
  if (a.last_visit_ != b.last_visit_ || a.has_baseline_ != b.has_baseline_ || a.ids_ != b.ids_ ||
      a.arms_ != b.arms_ || a.dropouts_ != b.dropouts_ || a.outcomes_.size() != b.outcomes_.size()) {
    return false;
  }
  for (std::size_t c = 0; c < a.outcomes_.size(); ++c) {
    const double x = a.outcomes_[c];
    const double y = b.outcomes_[c];
    if (std::isnan(x) != std::isnan(y) || (!std::isnan(x) && x != y)) return false;
  }
  return true;
}

TrialDataset load_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedRow, "empty input, header expected");
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "arm") {
    throw Error(ErrorKind::MalformedRow, "header must be id,arm,y0,...,yJ");
  }
  int first = -1;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto name = header[c];
    int visit = -1;
    if (name.size() >= 2 && name[0] == 'y') {
      auto res = std::from_chars(name.data() + 1, name.data() + name.size(), visit);
      if (res.ec != std::errc() || res.ptr != name.data() + name.size()) visit = -1;
    }
    if (c == 2 && (visit == 0 || visit == 1)) first = visit;
    if (visit < 0 || visit != first + static_cast<int>(c) - 2) {
      throw Error(ErrorKind::MalformedRow,
                  "header column '" + std::string(name) + "' breaks the y0..yJ (or y1..yJ) sequence");
    }
  }
  const bool has_baseline = first == 0;
  const int dim = static_cast<int>(header.size()) - 2;
  const int last_visit = first + dim - 1;

  std::vector<PatientRecord> patients;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::MalformedRow, where + ": expected " + std::to_string(header.size()) +
                                               " fields, found " + std::to_string(fields.size()));
    }
    PatientRecord p;
    p.id = std::string(fields[0]);
    if (p.id.empty()) throw Error(ErrorKind::MalformedRow, where + ": empty id");
    if (fields[1] == "0") {
      p.arm = Arm::Reference;
    } else if (fields[1] == "1") {
      p.arm = Arm::Active;
    } else {
      throw Error(ErrorKind::MalformedRow, where + " (" + p.id + "): arm must be 0 or 1");
    }
    p.outcomes.assign(static_cast<std::size_t>(dim), kMissing);
    int last_observed = -1;
    for (int k = 0; k < dim; ++k) {
      const auto cell = fields[static_cast<std::size_t>(k) + 2];
      if (cell.empty()) continue;
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw Error(ErrorKind::MalformedRow,
                    where + " (" + p.id + "): bad number '" + std::string(cell) + "'");
      }
      p.outcomes[static_cast<std::size_t>(k)] = v;
      last_observed = k;
    }
    p.dropout = last_observed + first;
    patients.push_back(std::move(p));
  }
  return TrialDataset(last_visit, has_baseline, std::move(patients));
}

TrialDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return load_csv(in);
}

void write_csv(const TrialDataset& data, std::ostream& out) {
  out << "id,arm";
  for (int v = data.first_visit(); v <= data.last_visit(); ++v) out << ",y" << v;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.id(i) << ',' << static_cast<int>(data.arm(i));
    for (double y : data.outcomes(i)) {
      out << ',';
      if (!std::isnan(y)) out << format_double(y);
    }
    out << '\n';
  }
}

void write_csv(const TrialDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_csv(data, out);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

TrialDataset resample(const TrialDataset& data, Stream& rng) {
  std::vector<std::size_t> by_arm[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_arm[static_cast<int>(data.arm(i))].push_back(i);
  }
  std::vector<std::size_t> rows(data.size());
  std::vector<std::string> ids(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& pool = by_arm[static_cast<int>(data.arm(i))];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    rows[i] = pool[pick(rng)];
    ids[i] = data.id(rows[i]) + '#' + std::to_string(i);
  }
  return data.select(rows, std::move(ids));
}

std::pair<TrialDataset, TrialDataset> split_by_arm(const TrialDataset& data) {
  std::vector<std::size_t> rows[2];
  std::vector<std::string> ids[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int a = static_cast<int>(data.arm(i));
    rows[a].push_back(i);
    ids[a].push_back(data.id(i));
  }
  if (rows[0].empty()) throw Error(ErrorKind::EmptyArm, "no patients in the reference arm");
  if (rows[1].empty()) throw Error(ErrorKind::EmptyArm, "no patients in the active arm");
  return {data.select(rows[0], std::move(ids[0])), data.select(rows[1], std::move(ids[1]))};
}

}  // namespace refmi
