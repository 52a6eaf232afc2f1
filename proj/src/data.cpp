#include "gocard/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gocard/errors.hpp"

namespace gocard {

namespace fs = std::filesystem;

std::string split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kDev:
      return "dev";
    case SplitTag::kTest:
      return "test";
  }
  throw ConfigError("unknown split tag");
}

SplitTag split_tag_from_name(const std::string& name) {
  if (name == "train") return SplitTag::kTrain;
  if (name == "dev") return SplitTag::kDev;
  if (name == "test") return SplitTag::kTest;
  throw ParseError("unknown split '" + name + "'");
}

std::vector<int> Sample::classes() const {
  std::set<int> seen;
  if (label) seen.insert(*label);
  for (const auto& b : boxes) seen.insert(b.class_id);
  return {seen.begin(), seen.end()};
}

std::vector<const Sample*> DomainDataset::split(SplitTag tag) const {
  std::vector<const Sample*> out;
  for (const auto& s : samples) {
    if (s.split == tag) out.push_back(&s);
  }
  return out;
}

int DomainDataset::split_size(SplitTag tag) const {
  int n = 0;
  for (const auto& s : samples) n += s.split == tag ? 1 : 0;
  return n;
}

void DomainDataset::validate() const {
  const int k = num_classes();
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (s.id.empty()) throw DataError("sample with empty id");
    if (!ids.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
    if (!s.label && s.boxes.empty()) throw DataError("sample '" + s.id + "' has no labels");
    if (s.label && (*s.label < 0 || *s.label >= k)) {
      throw DataError("sample '" + s.id + "' label " + std::to_string(*s.label) +
                      " outside the " + std::to_string(k) + "-class universe");
    }
    for (const auto& b : s.boxes) {
      if (b.class_id < 0 || b.class_id >= k) {
        throw DataError("sample '" + s.id + "' box class " + std::to_string(b.class_id) +
                        " outside the " + std::to_string(k) + "-class universe");
      }
      if (!(b.w > 0.0) || !(b.h > 0.0)) {
        throw DataError("sample '" + s.id + "' has a degenerate box");
      }
    }
  }
}

namespace {

constexpr std::array<SplitTag, 3> kSplitOrder = {SplitTag::kTrain, SplitTag::kDev,
                                                 SplitTag::kTest};

std::array<double, 3> ratio_fractions(const SplitRatios& r) {
  return {r.train / 100.0, r.dev / 100.0, r.test / 100.0};
}

void check_ratios(const SplitRatios& r) {
  if (r.train < 0 || r.dev < 0 || r.test < 0) throw ConfigError("split ratios must be >= 0");
  if (r.train + r.dev + r.test != 100) throw ConfigError("split ratios must sum to 100");
}

// Largest-remainder apportionment of n items; lands within one of each exact
// quota, ties resolved train > dev > test.
std::array<int, 3> apportion(int n, const SplitRatios& r) {
  const auto frac = ratio_fractions(r);
  std::array<int, 3> base{};
  std::array<double, 3> remainder{};
  int assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = n * frac[s];
    base[s] = static_cast<int>(std::floor(exact + 1e-9));
    remainder[s] = exact - base[s];
    assigned += base[s];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int extra = 0; extra < n - assigned; ++extra) base[order[extra]] += 1;
  return base;
}

// Sample indices ordered by id, the canonical processing order.
std::vector<int> canonical_order(const DomainDataset& d) {
  std::vector<int> idx(d.samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return d.samples[a].id < d.samples[b].id; });
  return idx;
}

void single_label_split(DomainDataset& d, const SplitRatios& ratios, Rng& rng,
                        std::vector<std::string>* warnings) {
  std::map<int, std::vector<int>> by_class;
  for (int i : canonical_order(d)) by_class[d.samples[i].classes()[0]].push_back(i);
  for (auto& [cls, members] : by_class) {
    if (static_cast<int>(members.size()) < 3 && warnings) {
      warnings->push_back("class '" + d.class_names[cls] + "' has only " +
                          std::to_string(members.size()) + " samples; filling train first");
    }
    rng.shuffle(members);
    const auto counts = apportion(static_cast<int>(members.size()), ratios);
    int pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (int j = 0; j < counts[s]; ++j) d.samples[members[pos++]].split = kSplitOrder[s];
    }
  }
}

// Rarest-label-first iterative stratification, then a bounded repair pass
// that swaps samples between splits while any per-class count sits more than
// one sample from its exact quota.
void multi_label_split(DomainDataset& d, const SplitRatios& ratios, Rng& rng,
                       std::vector<std::string>* warnings) {
  const int k = d.num_classes();
  const auto frac = ratio_fractions(ratios);

  std::vector<std::vector<int>> members(k);
  for (int i : canonical_order(d)) {
    for (int c : d.samples[i].classes()) members[c].push_back(i);
  }
  if (warnings) {
    for (int c = 0; c < k; ++c) {
      if (!members[c].empty() && static_cast<int>(members[c].size()) < 3) {
        warnings->push_back("class '" + d.class_names[c] + "' has only " +
                            std::to_string(members[c].size()) + " samples; filling train first");
      }
    }
  }

  std::vector<std::array<double, 3>> desire(k);
  for (int c = 0; c < k; ++c) {
    for (int s = 0; s < 3; ++s) desire[c][s] = members[c].size() * frac[s];
  }
  std::array<double, 3> capacity{};
  for (int s = 0; s < 3; ++s) capacity[s] = d.samples.size() * frac[s];

  std::vector<char> assigned(d.samples.size(), 0);
  std::vector<int> remaining(k, 0);
  for (int c = 0; c < k; ++c) remaining[c] = static_cast<int>(members[c].size());

  auto place = [&](int sample_idx, int split) {
    assigned[sample_idx] = 1;
    d.samples[sample_idx].split = kSplitOrder[split];
    capacity[split] -= 1.0;
    for (int c : d.samples[sample_idx].classes()) {
      desire[c][split] -= 1.0;
      remaining[c] -= 1;
    }
  };

  for (;;) {
    int rarest = -1;
    for (int c = 0; c < k; ++c) {
      if (remaining[c] == 0) continue;
      if (rarest < 0 || remaining[c] < remaining[rarest]) rarest = c;
    }
    if (rarest < 0) break;
    std::vector<int> pool;
    for (int i : members[rarest]) {
      if (!assigned[i]) pool.push_back(i);
    }
    rng.shuffle(pool);
    for (int i : pool) {
      int best = 0;
      for (int s = 1; s < 3; ++s) {
        if (desire[rarest][s] > desire[rarest][best] + 1e-12 ||
            (std::abs(desire[rarest][s] - desire[rarest][best]) <= 1e-12 &&
             capacity[s] > capacity[best] + 1e-12)) {
          best = s;
        }
      }
      place(i, best);
    }
  }

  // Repair: while some class count exceeds quota+1 in one split and falls
  // short elsewhere, move a sample carrying that class. Each move strictly
  // shrinks the summed overshoot, so the loop terminates.
  auto overshoot = [&](double achieved, double exact) {
    return std::max(0.0, std::abs(achieved - exact) - 1.0);
  };
  for (int round = 0; round < static_cast<int>(d.samples.size()); ++round) {
    std::vector<std::array<int, 3>> achieved(k, {0, 0, 0});
    for (const auto& s : d.samples) {
      const int split = s.split == SplitTag::kTrain ? 0 : s.split == SplitTag::kDev ? 1 : 2;
      for (int c : s.classes()) achieved[c][split] += 1;
    }
    auto total_cost = [&]() {
      double t = 0.0;
      for (int c = 0; c < k; ++c) {
        for (int s = 0; s < 3; ++s) {
          t += overshoot(achieved[c][s], members[c].size() * frac[s]);
        }
      }
      return t;
    };
    const double before = total_cost();
    if (before <= 1e-12) break;

    double best_gain = 0.0;
    int best_sample = -1, best_to = -1;
    for (int i = 0; i < static_cast<int>(d.samples.size()); ++i) {
      const auto& s = d.samples[i];
      const int from = s.split == SplitTag::kTrain ? 0 : s.split == SplitTag::kDev ? 1 : 2;
      for (int to = 0; to < 3; ++to) {
        if (to == from) continue;
        double gain = 0.0;
        for (int c : s.classes()) {
          const double exact_from = members[c].size() * frac[from];
          const double exact_to = members[c].size() * frac[to];
          gain += overshoot(achieved[c][from], exact_from) -
                  overshoot(achieved[c][from] - 1, exact_from);
          gain += overshoot(achieved[c][to], exact_to) -
                  overshoot(achieved[c][to] + 1, exact_to);
        }
        if (gain > best_gain + 1e-9) {
          best_gain = gain;
          best_sample = i;
          best_to = to;
        }
      }
    }
    if (best_sample < 0) break;
    d.samples[best_sample].split = kSplitOrder[best_to];
  }
}

}  // namespace

DomainDataset stratified_split(const DomainDataset& dataset, const SplitRatios& ratios,
                               std::uint64_t seed, std::vector<std::string>* warnings) {
  check_ratios(ratios);
  dataset.validate();
  DomainDataset result = dataset;
  Rng rng(seed);
  bool multi = false;
  for (const auto& s : result.samples) multi = multi || s.classes().size() > 1;
  if (multi) {
    multi_label_split(result, ratios, rng, warnings);
  } else {
    single_label_split(result, ratios, rng, warnings);
  }
  return result;
}

std::vector<double> class_weights(const DomainDataset& dataset) {
  const int k = dataset.num_classes();
  if (k == 0 || dataset.samples.empty()) throw DataError("cannot weight an empty dataset");
  std::vector<long long> counts(k, 0);
  long long total = 0;
  for (const auto& s : dataset.samples) {
    if (s.split != SplitTag::kTrain) continue;
    if (!s.boxes.empty()) {
      for (const auto& b : s.boxes) {
        counts[b.class_id] += 1;
        total += 1;
      }
    } else if (s.label) {
      counts[*s.label] += 1;
      total += 1;
    }
  }
  const double n = static_cast<double>(total + k);
  std::vector<double> weights(k);
  for (int c = 0; c < k; ++c) weights[c] = n / (k * (counts[c] + 1.0));
  return weights;
}

DomainDataset inject(const InjectionSchedule& schedule) {
  if (!schedule.target || !schedule.donor) throw ConfigError("injection needs both datasets");
  if (!(schedule.fraction >= 0.0) || schedule.fraction > 100.0) {
    throw ConfigError("injection fraction must lie in [0, 100]");
  }
  if (schedule.target->class_names != schedule.donor->class_names) {
    throw ConfigError("injection requires identical class universes");
  }
  schedule.target->validate();
  schedule.donor->validate();

  std::vector<int> donor_train;
  for (int i : [&] {
         std::vector<int> idx(schedule.donor->samples.size());
         for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j);
         std::sort(idx.begin(), idx.end(), [&](int a, int b) {
           return schedule.donor->samples[a].id < schedule.donor->samples[b].id;
         });
         return idx;
       }()) {
    if (schedule.donor->samples[i].split == SplitTag::kTrain) donor_train.push_back(i);
  }
  const int count = static_cast<int>(
      std::llround(schedule.fraction / 100.0 * static_cast<double>(donor_train.size())));

  Rng rng(schedule.seed);
  rng.shuffle(donor_train);
  donor_train.resize(count);

  DomainDataset result = *schedule.target;
  std::set<std::string> ids;
  for (const auto& s : result.samples) ids.insert(s.id);
  for (int i : donor_train) {
    Sample s = schedule.donor->samples[i];
    if (!ids.insert(s.id).second) {
      throw DataError("injected sample id '" + s.id + "' collides with the target dataset");
    }
    s.split = SplitTag::kTrain;
    result.samples.push_back(std::move(s));
  }
  std::sort(result.samples.begin(), result.samples.end(),
            [](const Sample& a, const Sample& b) { return a.id < b.id; });
  return result;
}

DomainDataset to_recognition(const DomainDataset& dataset) {
  DomainDataset result = dataset;
  for (auto& s : result.samples) {
    const auto classes = s.classes();
    if (classes.size() != 1) {
      throw DataError("sample '" + s.id + "' shows " + std::to_string(classes.size()) +
                      " classes; recognition needs exactly one");
    }
    s.label = classes[0];
    s.boxes.clear();
  }
  return result;
}

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset(const DomainDataset& dataset, const std::string& dir, TaskKind task) {
  dataset.validate();
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "annotations");

  {
    std::ofstream classes(fs::path(dir) / "classes.txt");
    for (const auto& name : dataset.class_names) classes << name << "\n";
    if (!classes) throw DataError("cannot write class names under '" + dir + "'");
  }

  std::vector<const Sample*> ordered;
  for (const auto& s : dataset.samples) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const Sample* a, const Sample* b) { return a->id < b->id; });

  std::ofstream index(fs::path(dir) / "index.txt");
  for (const Sample* s : ordered) {
    if (s->image.empty()) throw DataError("sample '" + s->id + "' has no pixels to save");
    const std::string image_rel = "images/" + s->id + ".png";
    const std::string ann_rel = "annotations/" + s->id + ".txt";
    save_png((fs::path(dir) / image_rel).string(), s->image);

    std::ofstream ann(fs::path(dir) / ann_rel);
    if (task == TaskKind::kRecognition) {
      if (!s->label) throw DataError("sample '" + s->id + "' lacks a recognition label");
      ann << *s->label << "\n";
    } else {
      for (const auto& b : s->boxes) {
        ann << b.class_id << " " << format_real(b.cx) << " " << format_real(b.cy) << " "
            << format_real(b.w) << " " << format_real(b.h) << "\n";
      }
    }
    if (!ann) throw DataError("cannot write annotations for sample '" + s->id + "'");
    index << s->id << " " << image_rel << " " << ann_rel << " " << split_tag_name(s->split)
          << " " << s->domain << "\n";
  }
  if (!index) throw DataError("cannot write the index under '" + dir + "'");
}

DomainDataset load_dataset(const std::string& dir) {
  DomainDataset dataset;
  dataset.domain_id = fs::path(dir).filename().string();

  {
    std::ifstream classes(fs::path(dir) / "classes.txt");
    if (!classes) throw DataError("missing classes.txt under '" + dir + "'");
    std::string line;
    while (std::getline(classes, line)) {
      if (!line.empty()) dataset.class_names.push_back(line);
    }
  }

  std::ifstream index(fs::path(dir) / "index.txt");
  if (!index) throw DataError("missing index.txt under '" + dir + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Sample s;
    std::string image_rel, ann_rel, split_name;
    if (!(fields >> s.id >> image_rel >> ann_rel >> split_name >> s.domain)) {
      throw ParseError("index.txt:" + std::to_string(line_no) +
                       ": expected 'id image annotation split domain'");
    }
    s.split = split_tag_from_name(split_name);
    s.image = load_png((fs::path(dir) / image_rel).string());

    std::ifstream ann(fs::path(dir) / ann_rel);
    if (!ann) throw DataError("missing annotation file '" + ann_rel + "'");
    std::string ann_line;
    int ann_no = 0;
    while (std::getline(ann, ann_line)) {
      ++ann_no;
      if (ann_line.empty()) continue;
      std::istringstream tokens(ann_line);
      std::vector<std::string> parts;
      std::string tok;
      while (tokens >> tok) parts.push_back(tok);
      const std::string where = ann_rel + ":" + std::to_string(ann_no);
      try {
        if (parts.size() == 1) {
          if (s.label || !s.boxes.empty()) {
            throw ParseError(where + ": stray label line");
          }
          s.label = std::stoi(parts[0]);
        } else if (parts.size() == 5) {
          if (s.label) throw ParseError(where + ": box line after a label line");
          GroundTruthBox b;
          b.class_id = std::stoi(parts[0]);
          b.cx = std::stod(parts[1]);
          b.cy = std::stod(parts[2]);
          b.w = std::stod(parts[3]);
          b.h = std::stod(parts[4]);
          s.boxes.push_back(b);
        } else {
          throw ParseError(where + ": expected 1 or 5 fields, got " +
                           std::to_string(parts.size()));
        }
      } catch (const std::invalid_argument&) {
        throw ParseError(where + ": non-numeric field");
      } catch (const std::out_of_range&) {
        throw ParseError(where + ": numeric field out of range");
      }
    }
    dataset.samples.push_back(std::move(s));
  }
  std::sort(dataset.samples.begin(), dataset.samples.end(),
            [](const Sample& a, const Sample& b) { return a.id < b.id; });
  dataset.validate();
  return dataset;
}

}  // namespace gocard
