// SPDX-License-Identifier: Apache-2.0
#include "mfrw/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mfrw/errors.hpp"

namespace mfrw {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"method", "epochs", "outdir"}},
      {"data",
       {"source", "n", "classes", "dim", "separation", "noise_std", "test_n", "seed", "train_images", "train_labels",
        "test_images", "test_labels", "limit", "test_limit"}},
      {"noise", {"kind", "p", "seed", "pairs"}},
      {"split", {"meta_size", "seed"}},
      {"model", {"hidden", "feature_dim", "embed_dim", "mwnet_hidden", "init_seed"}},
      {"optim",
       {"lr", "momentum", "weight_decay", "milestones", "meta_lr", "batch_size", "meta_batch_size", "shuffle_seed",
        "hypergrad", "hypergrad_eps"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (seps.find(ch) != std::string::npos) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(field + ": expected a number, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError(field + ": expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(field + ": expected an integer, got '" + text + "'");
  }
  if (used != text.size()) throw ConfigError(field + ": expected an integer, got '" + text + "'");
  return v;
}

std::size_t to_count(const std::string& field, const std::string& text) {
  const auto v = to_integer(field, text);
  if (v < 0) throw ValidationError(field, "must be non-negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t to_seed(const std::string& field, const std::string& text) {
  const auto v = to_integer(field, text);
  if (v < 0) throw ValidationError(field, "seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

template <class T>
std::vector<T> to_list(const std::string& field, const std::string& text, T (*convert)(const std::string&, const std::string&)) {
  std::vector<T> out;
  for (const auto& item : split_on(text, ", ")) out.push_back(convert(field, item));
  return out;
}

int to_int(const std::string& field, const std::string& text) { return static_cast<int>(to_integer(field, text)); }

/// "0:1 2; 1:2 3" -> targets per class.
Pairing to_pairing(const std::string& field, const std::string& text) {
  std::map<int, std::vector<int>> entries;
  for (const auto& entry : split_on(text, ";")) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw ConfigError(field + ": expected 'class:targets', got '" + entry + "'");
    const int cls = to_int(field, trim(entry.substr(0, colon)));
    if (entries.count(cls)) throw ValidationError(field, "class " + std::to_string(cls) + " listed twice");
    entries[cls] = to_list<int>(field, entry.substr(colon + 1), &to_int);
  }
  Pairing out;
  int expected = 0;
  for (auto& [cls, targets] : entries) {
    if (cls != expected) throw ValidationError(field, "classes must be listed as 0..c-1 without gaps");
    out.push_back(std::move(targets));
    ++expected;
  }
  return out;
}

std::string format_double(double v) {
  // shortest text that parses back to the same double
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::map<std::string, std::string> kv;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' appears outside any section");
    const auto sec = known_keys().find(section);
    if (sec == known_keys().end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      if (!sec->second.count(key)) throw ConfigError("unknown key '" + path + "'");
      kv[path] = value.data();
    }
  }
  auto has = [&](const std::string& k) { return kv.count(k) != 0; };
  auto str = [&](const std::string& k) { return kv.at(k); };

  ExperimentConfig c;
  auto& t = c.train;

  if (!has("run.method") || str("run.method").empty()) throw ValidationError("run.method", "required (ce, mwnet or mfrw)");
  try {
    t.method = parse_method(str("run.method"));
  } catch (const InputError& e) {
    throw ValidationError("run.method", e.what());
  }
  if (has("run.epochs")) {
    const auto e = to_integer("run.epochs", str("run.epochs"));
    if (e < 0) throw ValidationError("run.epochs", "must be >= 0");
    t.epochs = static_cast<int>(e);
  }
  if (has("run.outdir")) c.outdir = str("run.outdir");

  // data
  if (has("data.source")) {
    const auto s = str("data.source");
    if (s == "blobs") {
      c.data.kind = DataSource::Kind::blobs;
    } else if (s == "idx") {
      c.data.kind = DataSource::Kind::idx;
    } else {
      throw ValidationError("data.source", "expected blobs or idx, got '" + s + "'");
    }
  }
  if (has("data.n")) c.data.blobs.n = to_count("data.n", str("data.n"));
  if (has("data.classes")) c.data.blobs.classes = to_count("data.classes", str("data.classes"));
  if (has("data.dim")) c.data.blobs.input_dim = to_count("data.dim", str("data.dim"));
  if (has("data.separation")) c.data.blobs.separation = to_double("data.separation", str("data.separation"));
  if (has("data.noise_std")) c.data.blobs.noise_std = to_double("data.noise_std", str("data.noise_std"));
  if (has("data.test_n")) c.data.test_n = to_count("data.test_n", str("data.test_n"));
  if (has("data.seed")) c.data.seed = to_seed("data.seed", str("data.seed"));
  if (has("data.train_images")) c.data.train_images = str("data.train_images");
  if (has("data.train_labels")) c.data.train_labels = str("data.train_labels");
  if (has("data.test_images")) c.data.test_images = str("data.test_images");
  if (has("data.test_labels")) c.data.test_labels = str("data.test_labels");
  if (has("data.limit")) c.data.limit = to_count("data.limit", str("data.limit"));
  if (has("data.test_limit")) c.data.test_limit = to_count("data.test_limit", str("data.test_limit"));

  // noise
  if (has("noise.kind")) {
    try {
      c.noise.kind = parse_noise_kind(str("noise.kind"));
    } catch (const SpecError& e) {
      throw ValidationError("noise.kind", e.what());
    }
  }
  if (has("noise.p")) c.noise.p = to_double("noise.p", str("noise.p"));
  if (has("noise.seed")) c.noise.seed = to_seed("noise.seed", str("noise.seed"));
  if (has("noise.pairs")) c.noise.pairing = to_pairing("noise.pairs", str("noise.pairs"));

  // split
  if (has("split.meta_size")) c.split.meta_size = to_count("split.meta_size", str("split.meta_size"));
  if (has("split.seed")) c.split.seed = to_seed("split.seed", str("split.seed"));

  // model
  auto& bb = t.nets.main.backbone;
  bb.hidden_dims = {128};
  bb.feature_dim = 64;
  if (has("model.hidden")) bb.hidden_dims = to_list<std::size_t>("model.hidden", str("model.hidden"), &to_count);
  if (has("model.feature_dim")) bb.feature_dim = to_count("model.feature_dim", str("model.feature_dim"));
  if (has("model.embed_dim")) t.nets.advisor.embed_dim = to_count("model.embed_dim", str("model.embed_dim"));
  if (has("model.mwnet_hidden")) t.nets.mwnet.hidden_dim = to_count("model.mwnet_hidden", str("model.mwnet_hidden"));
  if (has("model.init_seed")) t.init_seed = to_seed("model.init_seed", str("model.init_seed"));

  // optim
  if (has("optim.lr")) t.lr.base = to_double("optim.lr", str("optim.lr"));
  if (has("optim.milestones")) t.lr.milestones = to_list<int>("optim.milestones", str("optim.milestones"), &to_int);
  if (has("optim.momentum")) t.sgd.momentum = to_double("optim.momentum", str("optim.momentum"));
  if (has("optim.weight_decay")) t.sgd.weight_decay = to_double("optim.weight_decay", str("optim.weight_decay"));
  if (has("optim.meta_lr")) t.adam.lr = to_double("optim.meta_lr", str("optim.meta_lr"));
  if (has("optim.batch_size")) t.batch_size = to_count("optim.batch_size", str("optim.batch_size"));
  t.meta_batch_size = t.batch_size;
  if (has("optim.meta_batch_size")) {
    t.meta_batch_size = to_count("optim.meta_batch_size", str("optim.meta_batch_size"));
  }
  if (has("optim.shuffle_seed")) t.shuffle_seed = to_seed("optim.shuffle_seed", str("optim.shuffle_seed"));
  if (has("optim.hypergrad")) {
    const auto m = str("optim.hypergrad");
    if (m == "finite_difference") {
      t.hyper.mode = HypergradSpec::Mode::finite_difference;
    } else if (m == "disabled") {
      t.hyper.mode = HypergradSpec::Mode::disabled;
    } else {
      throw ValidationError("optim.hypergrad", "expected finite_difference or disabled, got '" + m + "'");
    }
  }
  if (has("optim.hypergrad_eps")) t.hyper.eps_scale = to_double("optim.hypergrad_eps", str("optim.hypergrad_eps"));

  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  const auto& t = c.train;
  if (!(c.noise.p >= 0.0 && c.noise.p <= 1.0)) throw ValidationError("noise.p", "must lie in [0, 1]");
  if (t.epochs < 0) throw ValidationError("run.epochs", "must be >= 0");
  if (t.batch_size < 1) throw ValidationError("optim.batch_size", "must be >= 1");
  if (t.meta_batch_size < 1) throw ValidationError("optim.meta_batch_size", "must be >= 1");
  if (!(t.lr.base >= 0.0)) throw ValidationError("optim.lr", "must be >= 0");
  if (!(t.adam.lr >= 0.0)) throw ValidationError("optim.meta_lr", "must be >= 0");
  if (!(t.sgd.momentum >= 0.0 && t.sgd.momentum < 1.0)) throw ValidationError("optim.momentum", "must lie in [0, 1)");
  if (!(t.sgd.weight_decay >= 0.0)) throw ValidationError("optim.weight_decay", "must be >= 0");
  if (!(t.hyper.eps_scale > 0.0)) throw ValidationError("optim.hypergrad_eps", "must be > 0");
  for (std::size_t i = 1; i < t.lr.milestones.size(); ++i) {
    if (t.lr.milestones[i] <= t.lr.milestones[i - 1]) {
      throw ValidationError("optim.milestones", "must be strictly increasing");
    }
  }
  const auto& bb = t.nets.main.backbone;
  for (auto h : bb.hidden_dims) {
    if (h == 0) throw ValidationError("model.hidden", "widths must be >= 1");
  }
  if (bb.feature_dim == 0) throw ValidationError("model.feature_dim", "must be >= 1");
  if (t.nets.advisor.embed_dim == 0) throw ValidationError("model.embed_dim", "must be >= 1");
  if (t.nets.mwnet.hidden_dim == 0) throw ValidationError("model.mwnet_hidden", "must be >= 1");
  if (c.split.meta_size == 0) throw ValidationError("split.meta_size", "must be >= 1");

  if (c.data.kind == DataSource::Kind::blobs) {
    const auto& b = c.data.blobs;
    if (b.classes < 2) throw ValidationError("data.classes", "must be >= 2");
    if (b.input_dim == 0) throw ValidationError("data.dim", "must be >= 1");
    if (b.n < b.classes) throw ValidationError("data.n", "must be >= data.classes");
    if (!(b.separation >= 0.0)) throw ValidationError("data.separation", "must be >= 0");
    if (!(b.noise_std >= 0.0)) throw ValidationError("data.noise_std", "must be >= 0");
    if (c.data.test_n == 0) throw ValidationError("data.test_n", "must be >= 1");
    if (c.split.meta_size > b.n / 10) throw ValidationError("split.meta_size", "must be <= data.n / 10");
    if (c.noise.kind != NoiseKind::none) {
      try {
        if (c.noise.pairing.empty()) {
          default_pairing(b.classes, c.noise.kind);
        } else {
          validate_pairing(c.noise.pairing, b.classes, c.noise.kind);
        }
      } catch (const SpecError& e) {
        throw ValidationError("noise.pairs", e.what());
      }
    }
  } else {
    if (c.data.train_images.empty()) throw ValidationError("data.train_images", "required for source = idx");
    if (c.data.train_labels.empty()) throw ValidationError("data.train_labels", "required for source = idx");
    if (c.data.test_images.empty()) throw ValidationError("data.test_images", "required for source = idx");
    if (c.data.test_labels.empty()) throw ValidationError("data.test_labels", "required for source = idx");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.data.seed = seed;
  c.split.seed = seed;
  c.noise.seed = seed;
  c.train.init_seed = seed;
  c.train.shuffle_seed = seed;
}

std::string to_text(const ExperimentConfig& c) {
  const auto& t = c.train;
  std::ostringstream o;
  o << "[run]\n"
    << "method = " << to_string(t.method) << "\n"
    << "epochs = " << t.epochs << "\n"
    << "outdir = " << c.outdir.string() << "\n\n";
  o << "[data]\n";
  if (c.data.kind == DataSource::Kind::blobs) {
    o << "source = blobs\n"
      << "n = " << c.data.blobs.n << "\n"
      << "classes = " << c.data.blobs.classes << "\n"
      << "dim = " << c.data.blobs.input_dim << "\n"
      << "separation = " << format_double(c.data.blobs.separation) << "\n"
      << "noise_std = " << format_double(c.data.blobs.noise_std) << "\n"
      << "test_n = " << c.data.test_n << "\n"
      << "seed = " << c.data.seed << "\n\n";
  } else {
    o << "source = idx\n"
      << "train_images = " << c.data.train_images.string() << "\n"
      << "train_labels = " << c.data.train_labels.string() << "\n"
      << "test_images = " << c.data.test_images.string() << "\n"
      << "test_labels = " << c.data.test_labels.string() << "\n";
    if (c.data.limit) o << "limit = " << *c.data.limit << "\n";
    if (c.data.test_limit) o << "test_limit = " << *c.data.test_limit << "\n";
    o << "\n";
  }
  o << "[noise]\n"
    << "kind = " << to_string(c.noise.kind) << "\n"
    << "p = " << format_double(c.noise.p) << "\n"
    << "seed = " << c.noise.seed << "\n";
  if (!c.noise.pairing.empty()) {
    o << "pairs = ";
    for (std::size_t i = 0; i < c.noise.pairing.size(); ++i) {
      if (i > 0) o << "; ";
      o << i << ":";
      for (int target : c.noise.pairing[i]) o << " " << target;
    }
    o << "\n";
  }
  o << "\n[split]\n"
    << "meta_size = " << c.split.meta_size << "\n"
    << "seed = " << c.split.seed << "\n\n";
  o << "[model]\n";
  if (!t.nets.main.backbone.hidden_dims.empty()) o << "hidden = " << join(t.nets.main.backbone.hidden_dims) << "\n";
  o << "feature_dim = " << t.nets.main.backbone.feature_dim << "\n"
    << "embed_dim = " << t.nets.advisor.embed_dim << "\n"
    << "mwnet_hidden = " << t.nets.mwnet.hidden_dim << "\n"
    << "init_seed = " << t.init_seed << "\n\n";
  o << "[optim]\n"
    << "lr = " << format_double(t.lr.base) << "\n";
  if (!t.lr.milestones.empty()) o << "milestones = " << join(t.lr.milestones) << "\n";
  o << "momentum = " << format_double(t.sgd.momentum) << "\n"
    << "weight_decay = " << format_double(t.sgd.weight_decay) << "\n"
    << "meta_lr = " << format_double(t.adam.lr) << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "meta_batch_size = " << t.meta_batch_size << "\n"
    << "shuffle_seed = " << t.shuffle_seed << "\n"
    << "hypergrad = "
    << (t.hyper.mode == HypergradSpec::Mode::disabled ? "disabled" : "finite_difference") << "\n"
    << "hypergrad_eps = " << format_double(t.hyper.eps_scale) << "\n";
  return o.str();
}

}  // namespace mfrw
