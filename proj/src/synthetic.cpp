#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "rci/errors.hpp"
#include "rci/eval.hpp"
#include "rci/random.hpp"

namespace rci {

namespace {

enum class Kind { kName, kPerson, kCategory, kYear, kInt, kBigInt, kDecimal, kMoney };

struct ColumnSpec {
  std::string header;
  std::vector<std::string> synonyms;
  Kind kind = Kind::kCategory;
  std::vector<std::string> values;  // categories
  int lo = 0, hi = 0;
  // Usable in "how many <synonym> does X have" lookups.
  bool countable = false;

  bool numeric() const {
    return kind == Kind::kInt || kind == Kind::kBigInt || kind == Kind::kDecimal ||
           kind == Kind::kMoney || kind == Kind::kYear;
  }
  bool conditionable() const {
    return kind == Kind::kCategory || kind == Kind::kYear || kind == Kind::kInt;
  }
};

struct Domain {
  std::string plural;
  ColumnSpec key;
  std::vector<ColumnSpec> attrs;
};

const std::vector<Domain>& domains() {
  static const std::vector<Domain> all = {
      {"politicians",
       {"Name", {"name", "politician"}, Kind::kPerson, {}},
       {{"Party", {"party", "political party", "affiliation"}, Kind::kCategory,
         {"Federalist", "Anti-Administration", "Pro-Administration", "Whig", "Democratic",
          "Republican", "Independent"}},
        {"Took office", {"start year", "year they took office", "first year in office"},
         Kind::kYear, {}, 1789, 1799},
        {"Left office", {"end year", "year they left office", "last year in office"},
         Kind::kYear, {}, 1789, 1799},
        {"State", {"state", "home state"}, Kind::kCategory,
         {"Maryland", "Virginia", "Ohio", "Georgia", "Vermont", "Delaware", "Kentucky"}},
        {"Notes / Events", {"notes", "events", "remarks"}, Kind::kCategory,
         {"resigned", "died in office", "re-elected", "appointed", "retired"}},
        {"Terms", {"terms", "number of terms", "terms served"}, Kind::kInt, {}, 1, 6, true}}},
      {"players",
       {"Player", {"player", "athlete"}, Kind::kPerson, {}},
       {{"Team", {"team", "club", "squad"}, Kind::kCategory,
         {"Cubs", "Rovers", "Falcons", "United", "Rangers", "Pilots", "Comets"}},
        {"Position", {"position", "role", "playing position"}, Kind::kCategory,
         {"Goalkeeper", "Defender", "Midfielder", "Forward", "Winger", "Striker"}},
        {"Age", {"age", "how old"}, Kind::kInt, {}, 18, 38},
        {"Goals", {"goals", "goals scored", "scoring total"}, Kind::kInt, {}, 0, 30, true},
        {"Wins", {"wins", "victories", "games won"}, Kind::kInt, {}, 0, 30, true},
        {"Home city", {"home city", "hometown", "city of residence"}, Kind::kCategory,
         {"Paris", "Lagos", "Lima", "Oslo", "Perth", "Quito", "Riga"}},
        {"Birth city", {"birth city", "birthplace", "place of birth"}, Kind::kCategory,
         {"Paris", "Lagos", "Lima", "Oslo", "Perth", "Quito", "Riga"}}}},
      {"countries",
       {"Country", {"country", "nation"}, Kind::kName, {}},
       {{"Capital", {"capital", "capital city", "seat of government"}, Kind::kName, {}},
        {"Continent", {"continent", "region", "part of the world"}, Kind::kCategory,
         {"Africa", "Asia", "Europe", "Oceania", "South America", "North America"}},
        {"Population", {"population", "number of inhabitants", "people living there"},
         Kind::kBigInt, {}, 20000, 90000000},
        {"Language", {"language", "official language", "spoken language"}, Kind::kCategory,
         {"French", "Spanish", "Arabic", "English", "Swahili", "Malay", "Dutch"}},
        {"Founded", {"founding year", "year founded", "independence year"}, Kind::kYear, {},
         1800, 1830},
        {"Medals", {"medals", "medals won", "olympic medals"}, Kind::kInt, {}, 0, 40, true}}},
      {"films",
       {"Title", {"title", "film"}, Kind::kName, {}},
       {{"Director", {"director", "filmmaker", "who directed"}, Kind::kPerson, {}},
        {"Year", {"year", "release year", "year of release"}, Kind::kYear, {}, 1990, 2000},
        {"Genre", {"genre", "kind of film", "category"}, Kind::kCategory,
         {"Drama", "Comedy", "Thriller", "Western", "Musical", "Documentary"}},
        {"Rating", {"rating", "score", "critic rating"}, Kind::kDecimal, {}, 10, 99},
        {"Studio", {"studio", "production company", "distributor"}, Kind::kCategory,
         {"Lumen", "Paragon", "Northstar", "Bluefield", "Ironwood", "Seabright"}},
        {"Awards", {"awards", "awards won", "prizes"}, Kind::kInt, {}, 0, 12, true}}},
      {"products",
       {"Product", {"product", "item"}, Kind::kName, {}},
       {{"Manufacturer", {"manufacturer", "maker", "brand"}, Kind::kCategory,
         {"Acme", "Globex", "Initech", "Umbrella", "Hooli", "Vandelay"}},
        {"Price", {"price", "cost", "retail price"}, Kind::kMoney, {}, 500, 99999},
        {"Launch year", {"launch year", "release date", "year launched"}, Kind::kYear, {},
         2005, 2015},
        {"Color", {"color", "colour", "finish"}, Kind::kCategory,
         {"Red", "Black", "Silver", "White", "Green", "Blue"}},
        {"Units sold", {"units sold", "sales", "units shipped"}, Kind::kBigInt, {}, 1000,
         5000000, true},
        {"Warranty", {"warranty", "warranty years", "years of coverage"}, Kind::kInt, {}, 1, 5}}},
  };
  return all;
}

const std::vector<std::string>& syllables() {
  static const std::vector<std::string> s = {
      "ka", "lo", "mi", "ren", "di", "ta", "vo", "shi", "ben", "ur", "ia", "for", "rest",
      "pin", "ney", "mer", "cer", "jo", "han", "el", "ro", "sa", "ve", "qui", "bar", "tol",
      "gan", "zu", "ne", "pra", "dor", "lin", "mo", "ra", "ste", "wen", "ki", "pol", "dre",
      "fa", "nu", "ber", "cal", "tri", "xa", "go", "hel", "vin", "ost", "ma"};
  return s;
}

std::string pseudo_word(Rng& rng, int min_syl, int max_syl) {
  const int n = min_syl + static_cast<int>(uniform_index(rng, max_syl - min_syl + 1));
  std::string w;
  for (int i = 0; i < n; ++i) w += pick(syllables(), rng);
  w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

std::string with_thousands(long v) {
  std::string digits = std::to_string(v);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

int draw_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// Fixed name inventories shared by all splits.
struct NamePools {
  std::vector<std::string> given, family, single;
};

std::vector<std::string> word_pool(Rng& rng, std::size_t size, int min_syl, int max_syl) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < size) {
    auto w = pseudo_word(rng, min_syl, max_syl);
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

const NamePools& name_pools() {
  static const NamePools pools = [] {
    Rng rng(0x5eed'0a11ULL);
    NamePools p;
    p.given = word_pool(rng, 120, 1, 2);
    p.family = word_pool(rng, 160, 2, 3);
    p.single = word_pool(rng, 400, 2, 3);
    return p;
  }();
  return pools;
}

std::string draw_value(const ColumnSpec& c, Rng& rng) {
  char buf[64];
  switch (c.kind) {
    case Kind::kName:
      return pick(name_pools().single, rng);
    case Kind::kPerson:
      return pick(name_pools().given, rng) + " " + pick(name_pools().family, rng);
    case Kind::kCategory:
      return pick(c.values, rng);
    case Kind::kYear:
    case Kind::kInt:
      return std::to_string(draw_int(rng, c.lo, c.hi));
    case Kind::kBigInt:
      return with_thousands(draw_int(rng, c.lo, c.hi));
    case Kind::kDecimal:
      std::snprintf(buf, sizeof buf, "%.1f", draw_int(rng, c.lo, c.hi) / 10.0);
      return buf;
    case Kind::kMoney:
      std::snprintf(buf, sizeof buf, "$%.2f", draw_int(rng, c.lo, c.hi) / 100.0);
      return buf;
  }
  return {};
}

struct Built {
  Table table;
  std::vector<const ColumnSpec*> specs;  // per column
  int key_col = 1;                      // 1-based
};

Built build_table(const Domain& d, const std::string& id, const GeneratorConfig& cfg, Rng& rng) {
  std::vector<const ColumnSpec*> attrs;
  for (const auto& a : d.attrs) attrs.push_back(&a);
  shuffle(attrs, rng);
  const int max_cols = std::min<int>(cfg.max_cols, static_cast<int>(attrs.size()) + 1);
  const int min_cols = std::min(cfg.min_cols, max_cols);
  const int n = draw_int(rng, min_cols, max_cols);
  attrs.resize(n - 1);
  Built b;
  b.key_col = uniform_unit(rng) < 0.7 ? 1 : 1 + static_cast<int>(uniform_index(rng, n));
  b.specs = attrs;
  b.specs.insert(b.specs.begin() + (b.key_col - 1), &d.key);

  const int m = draw_int(rng, cfg.min_rows, cfg.max_rows);
  std::vector<std::string> header;
  for (const auto* s : b.specs) header.push_back(s->header);
  std::vector<std::vector<std::string>> rows(m, std::vector<std::string>(n));
  std::set<std::string> keys;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == b.key_col - 1) {
        std::string k;
        do {
          k = draw_value(*b.specs[j], rng);
        } while (!keys.insert(k).second);
        rows[i][j] = k;
      } else {
        rows[i][j] = draw_value(*b.specs[j], rng);
      }
    }
  }
  b.table = Table(id, std::move(header), std::move(rows));
  return b;
}

std::string fill(std::string tmpl, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    const std::string needle = "{" + k + "}";
    for (auto pos = tmpl.find(needle); pos != std::string::npos; pos = tmpl.find(needle, pos)) {
      tmpl.replace(pos, needle.size(), v);
      pos += v.size();
    }
  }
  return tmpl;
}

std::vector<std::string> texts_of(const Table& t, const std::set<CellCoord>& cells) {
  std::set<std::string> uniq;
  for (const auto& c : cells) uniq.insert(t.cell(c));
  return {uniq.begin(), uniq.end()};
}

std::set<CellCoord> rows_matching(const Table& t, int cond_col, const std::string& value,
                                  int target_col) {
  std::set<CellCoord> out;
  for (int i = 1; i <= t.num_rows(); ++i) {
    if (t.cell(i, cond_col) == value) out.insert({i, target_col});
  }
  return out;
}

const std::vector<std::string> kKeyTemplates = {
    "What is the {t} of {k}?", "What {t} does {k} have?", "Which {t} is listed for {k}?",
    "Tell me the {t} of {k}.", "For {k}, what is the {t}?"};
const std::vector<std::string> kCondTemplates = {
    "What is the {t} when the {c} is {v}?", "Which {t} has {c} {v}?",
    "What {t} is listed with {c} {v}?", "Give the {t} for the entry whose {c} is {v}."};
const std::vector<std::string> kCountTemplates = {"How many {p} have {c} {v}?",
                                                  "What is the number of {p} with {c} {v}?"};
const std::vector<std::string> kSumTemplates = {"What is the total {n} of {p} with {c} {v}?",
                                                "How many {n} in total for {c} {v}?"};
const std::vector<std::string> kAverageTemplates = {
    "What is the average {n} of {p} with {c} {v}?", "What is the mean {n} for {c} {v}?"};
const std::vector<std::string> kMaxTemplates = {"What is the highest {n} among {p} with {c} {v}?",
                                                "What is the largest {n}?"};
const std::vector<std::string> kMinTemplates = {"What is the lowest {n} among {p} with {c} {v}?",
                                                "What is the smallest {n}?"};
const std::vector<std::string> kHowManyLookup = {"How many {n} does {k} have?"};

// Returns false when this table cannot host the requested question kind.
bool make_lookup(const Built& b, bool conditional, Rng& rng, QAInstance& q) {
  const Table& t = b.table;
  const int n = t.num_cols();
  const int m = t.num_rows();
  if (!conditional) {
    std::vector<int> targets;
    for (int j = 1; j <= n; ++j) {
      if (j != b.key_col) targets.push_back(j);
    }
    if (targets.empty()) return false;
    const int tc = pick(targets, rng);
    const int r = 1 + static_cast<int>(uniform_index(rng, m));
    const auto& spec = *b.specs[tc - 1];
    const bool how_many = spec.countable && uniform_unit(rng) < 0.3;
    q.question = fill(how_many ? pick(kHowManyLookup, rng) : pick(kKeyTemplates, rng),
                      {{"t", pick(spec.synonyms, rng)},
                       {"n", pick(spec.synonyms, rng)},
                       {"k", t.cell(r, b.key_col)}});
    q.targets = std::set<CellCoord>{{r, tc}};
  } else {
    std::vector<int> conds;
    for (int j = 1; j <= n; ++j) {
      if (j != b.key_col && b.specs[j - 1]->conditionable()) conds.push_back(j);
    }
    if (conds.empty()) return false;
    const int cc = pick(conds, rng);
    std::vector<int> targets;
    for (int j = 1; j <= n; ++j) {
      if (j != cc) targets.push_back(j);
    }
    const int tc = pick(targets, rng);
    const int r = 1 + static_cast<int>(uniform_index(rng, m));
    const std::string v = t.cell(r, cc);
    q.question = fill(pick(kCondTemplates, rng), {{"t", pick(b.specs[tc - 1]->synonyms, rng)},
                                                  {"c", pick(b.specs[cc - 1]->synonyms, rng)},
                                                  {"v", v}});
    q.targets = rows_matching(t, cc, v, tc);
  }
  q.agg = AggType::kLookup;
  q.answers = texts_of(t, *q.targets);
  return true;
}

bool make_aggregation(const Built& b, AggType agg, const Domain& d, Rng& rng, QAInstance& q) {
  const Table& t = b.table;
  std::vector<int> conds, nums;
  for (int j = 1; j <= t.num_cols(); ++j) {
    const auto& s = *b.specs[j - 1];
    if (j == b.key_col) continue;
    if (s.kind == Kind::kCategory) conds.push_back(j);
    if (s.numeric() && s.kind != Kind::kYear) nums.push_back(j);
  }
  if (conds.empty()) return false;
  const int cc = pick(conds, rng);
  const std::string v = t.cell(1 + static_cast<int>(uniform_index(rng, t.num_rows())), cc);
  const std::string c_syn = pick(b.specs[cc - 1]->synonyms, rng);
  if (agg == AggType::kCount) {
    q.question = fill(pick(kCountTemplates, rng), {{"p", d.plural}, {"c", c_syn}, {"v", v}});
    q.targets = rows_matching(t, cc, v, b.key_col);
  } else {
    if (nums.empty()) return false;
    const int nc = pick(nums, rng);
    const std::vector<std::string>* tmpls = nullptr;
    switch (agg) {
      case AggType::kSum: tmpls = &kSumTemplates; break;
      case AggType::kAverage: tmpls = &kAverageTemplates; break;
      case AggType::kMax: tmpls = &kMaxTemplates; break;
      default: tmpls = &kMinTemplates;
    }
    const std::string tmpl = pick(*tmpls, rng);
    q.question = fill(tmpl, {{"p", d.plural},
                             {"c", c_syn},
                             {"v", v},
                             {"n", pick(b.specs[nc - 1]->synonyms, rng)}});
    if (tmpl.find("{c}") == std::string::npos) {
      std::set<CellCoord> all;
      for (int i = 1; i <= t.num_rows(); ++i) all.insert({i, nc});
      q.targets = std::move(all);
    } else {
      q.targets = rows_matching(t, cc, v, nc);
    }
  }
  q.agg = agg;
  q.answers = texts_of(t, *q.targets);
  return true;
}

Dataset generate_split(const std::string& split, int count, const GeneratorConfig& cfg,
                       Rng& rng) {
  std::vector<Table> tables;
  std::vector<QAInstance> questions;
  const auto& ds = domains();
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%05d", split.c_str(), i + 1);
    for (;;) {
      const Domain& d = pick(ds, rng);
      Built b = build_table(d, id, cfg, rng);
      QAInstance q;
      q.qid = std::string(id) + "-q";
      q.table_id = id;
      bool ok;
      if (uniform_unit(rng) < cfg.aggregation_fraction) {
        const auto agg = static_cast<AggType>(1 + uniform_index(rng, kNumAggTypes - 1));
        ok = make_aggregation(b, agg, d, rng, q);
      } else {
        ok = make_lookup(b, uniform_unit(rng) < cfg.conditional_fraction, rng, q);
      }
      if (!ok) continue;
      tables.push_back(std::move(b.table));
      questions.push_back(std::move(q));
      break;
    }
  }
  return Dataset(std::move(tables), std::move(questions));
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const GeneratorConfig& config) {
  if (config.train < 0 || config.dev < 0 || config.test < 0 || config.min_rows < 1 ||
      config.max_rows < config.min_rows || config.min_cols < 2 ||
      config.max_cols < config.min_cols) {
    throw ValidationError("invalid generator sizes", "generator");
  }
  Rng rng(config.seed);
  SyntheticCorpus c;
  c.train = generate_split("train", config.train, config, rng);
  c.dev = generate_split("dev", config.dev, config, rng);
  c.test = generate_split("test", config.test, config, rng);
  return c;
}

void save_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  corpus.train.save(dir / "train.tables.jsonl", dir / "train.questions.jsonl");
  corpus.dev.save(dir / "dev.tables.jsonl", dir / "dev.questions.jsonl");
  corpus.test.save(dir / "test.tables.jsonl", dir / "test.questions.jsonl");
}

}  // namespace rci
