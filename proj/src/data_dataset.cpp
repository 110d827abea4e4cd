#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "io_util.hpp"
#include "mvface/data.hpp"

namespace mvface::data {

std::optional<int> expression_index(std::string_view code) {
  for (std::size_t i = 0; i < kExpressions.size(); ++i) {
    if (kExpressions[i] == code) return static_cast<int>(i);
  }
  return std::nullopt;
}

DatasetManifest load_manifest(const fs::path& path) {
  const std::string text = io::read_file(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  DatasetManifest manifest;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = io::tokens(line);
    if (toks.empty()) continue;
    if (toks.size() != 4) {
      throw IoError("malformed manifest line " + std::to_string(line_no) + " in '" +
                    path.string() + "': expected 'image subject expression annotation'");
    }
    if (!expression_index(toks[2])) {
      throw IoError("unknown expression '" + toks[2] + "' at line " + std::to_string(line_no) +
                    " in '" + path.string() + "'");
    }
    manifest.entries.push_back({resolve(toks[0]), toks[1], toks[2], resolve(toks[3])});
  }
  return manifest;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::string out = "# image subject expression annotation\n";
  for (const auto& e : manifest.entries) {
    out += e.image_path.string() + ' ' + e.subject_id + ' ' + e.expression + ' ' +
           e.annotation_path.string() + '\n';
  }
  io::write_file_atomic(path, out);
}

namespace {

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

Split complement(std::size_t n, std::vector<std::size_t> test) {
  std::sort(test.begin(), test.end());
  Split s;
  s.test = test;
  std::size_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t < test.size() && test[t] == i) {
      ++t;
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

Split paper_protocol(const DatasetManifest& manifest, std::uint64_t seed) {
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  std::vector<std::string> subjects;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (std::find(subjects.begin(), subjects.end(), e.subject_id) == subjects.end()) {
      subjects.push_back(e.subject_id);
    }
    groups[{e.subject_id, e.expression}].push_back(i);
  }
  if (subjects.empty()) throw ProtocolError("paper protocol split on an empty manifest");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> test;
  for (const auto& subject : subjects) {
    for (auto expr : kExpressions) {
      const auto it = groups.find({subject, std::string(expr)});
      if (it == groups.end()) {
        throw ProtocolError("subject '" + subject + "' has no image with expression '" +
                            std::string(expr) + "'");
      }
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      test.push_back(it->second[pick(rng)]);
    }
  }
  return complement(manifest.entries.size(), std::move(test));
}

Split ratio_split(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw ParameterError("SplitSpec.test_ratio must lie in [0, 1]");
  }
  const std::size_t n = manifest.entries.size();
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[manifest.entries[i].expression].push_back(i);

  // Largest-remainder allocation of round(ratio * n) test slots across
  // expressions.
  const auto total = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::pair<std::string, std::size_t>> quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (const auto& [cls, members] : by_class) {
    const double exact = ratio * static_cast<double>(members.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    remainders.emplace_back(exact - static_cast<double>(base), quota.size());
    quota.emplace_back(cls, base);
    assigned += base;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    auto& q = quota[remainders[k].second];
    if (q.second < by_class[q.first].size()) {
      ++q.second;
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> test;
  for (const auto& [cls, count] : quota) {
    auto members = by_class[cls];
    seeded_shuffle(members, rng);
    test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(count));
  }
  return complement(n, std::move(test));
}

}  // namespace

Split split_dataset(const DatasetManifest& manifest, const SplitSpec& spec) {
  switch (spec.mode) {
    case SplitMode::paper_protocol:
      return paper_protocol(manifest, spec.seed);
    case SplitMode::ratio:
      return ratio_split(manifest, spec.test_ratio, spec.seed);
    case SplitMode::explicit_lists: {
      std::set<std::size_t> seen;
      for (auto i : spec.test_indices) {
        if (i >= manifest.entries.size()) {
          throw ParameterError("explicit test index " + std::to_string(i) + " out of range");
        }
        if (!seen.insert(i).second) {
          throw ParameterError("explicit test index " + std::to_string(i) + " listed twice");
        }
      }
      return complement(manifest.entries.size(), spec.test_indices);
    }
  }
  throw ParameterError("unknown split mode");
}

void save_labels(const fs::path& path, const std::vector<LabelRow>& rows) {
  std::string out = "sample_id\tsubject\texpression\tsplit\n";
  for (const auto& r : rows) {
    for (const auto* field : {&r.sample_id, &r.subject, &r.expression, &r.split}) {
      if (field->find_first_of("\t\n") != std::string::npos) {
        throw IoError("label field '" + *field + "' contains a tab or newline");
      }
    }
    out += r.sample_id + '\t' + r.subject + '\t' + r.expression + '\t' + r.split + '\n';
  }
  io::write_file_atomic(path, out);
}

std::vector<LabelRow> load_labels(const fs::path& path) {
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<LabelRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("sample_id\t", 0) != 0) {
        throw IoError("'" + path.string() + "' is missing the label header");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw IoError("malformed label line " + std::to_string(line_no) + " in '" +
                    path.string() + "'");
    }
    rows.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return rows;
}

}  // namespace mvface::data
