#include "wush/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wush/error.hpp"
#include "wush/numfmt.hpp"

namespace wush {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(Errc::InvalidConfig, "field '" + path + "': " + msg);
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) fail(path.empty() ? key : path + "." + key, "unknown field");
  }
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "required field missing");
  return *it;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(path, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

const json& get_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

std::vector<double> get_numbers(const json& v, const std::string& path) {
  std::vector<double> out;
  for (std::size_t i = 0; i < get_array(v, path).size(); ++i) {
    out.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

SyntheticSpec parse_synthetic(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  reject_unknown(j, path,
                 {"d_in", "d_out", "d_batch", "spectrum", "spectrum_decay", "weight_spectrum", "weight_spectrum_decay",
                  "tail", "dof", "outlier_count", "outlier_magnitude", "rotate_basis", "seed"});
  SyntheticSpec s;
  auto count = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = get_count(j[key], join(path, key));
  };
  count("d_in", s.d_in);
  count("d_out", s.d_out);
  count("d_batch", s.d_batch);
  count("outlier_count", s.outlier_count);
  if (j.contains("seed")) s.seed = get_count(j["seed"], join(path, "seed"));
  if (j.contains("spectrum")) s.spectrum = get_numbers(j["spectrum"], join(path, "spectrum"));
  if (j.contains("weight_spectrum")) s.weight_spectrum = get_numbers(j["weight_spectrum"], join(path, "weight_spectrum"));
  if (j.contains("spectrum_decay")) s.spectrum_decay = get_number(j["spectrum_decay"], join(path, "spectrum_decay"));
  if (j.contains("weight_spectrum_decay")) {
    s.weight_spectrum_decay = get_number(j["weight_spectrum_decay"], join(path, "weight_spectrum_decay"));
  }
  if (j.contains("dof")) s.dof = get_number(j["dof"], join(path, "dof"));
  if (j.contains("outlier_magnitude")) {
    s.outlier_magnitude = get_number(j["outlier_magnitude"], join(path, "outlier_magnitude"));
  }
  if (j.contains("rotate_basis")) s.rotate_basis = get_bool(j["rotate_basis"], join(path, "rotate_basis"));
  if (j.contains("tail")) {
    const std::string tail = get_string(j["tail"], join(path, "tail"));
    try {
      s.tail = parse_tail(tail);
    } catch (const Error&) {
      fail(join(path, "tail"), "expected gaussian, laplacian or student_t");
    }
  }
  if (s.d_in == 0 || s.d_out == 0 || s.d_batch == 0) fail(path, "d_in, d_out and d_batch must be positive");
  if (s.tail == Tail::StudentT && !(s.dof > 2.0)) fail(join(path, "dof"), "must exceed 2");
  if (s.outlier_count > s.d_in) fail(join(path, "outlier_count"), "exceeds d_in");
  if (!(s.outlier_magnitude > 0.0)) fail(join(path, "outlier_magnitude"), "must be positive");
  if (!s.spectrum.empty() && s.spectrum.size() != s.d_in) fail(join(path, "spectrum"), "length must equal d_in");
  if (!s.weight_spectrum.empty() && s.weight_spectrum.size() != s.d_in) {
    fail(join(path, "weight_spectrum"), "length must equal d_in");
  }
  for (double v : s.spectrum) {
    if (!(v > 0.0)) fail(join(path, "spectrum"), "entries must be positive");
  }
  for (double v : s.weight_spectrum) {
    if (!(v > 0.0)) fail(join(path, "weight_spectrum"), "entries must be positive");
  }
  return s;
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte > 0 ? byte - 1 : 0, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

ExperimentConfig parse_with_base(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, location(text, e.byte) + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "top level must be a JSON object");
  reject_unknown(j, "",
                 {"layers", "transforms", "schemes", "seeds", "damp", "group_size", "output", "mc_samples",
                  "random_repeats", "activation_rounding", "shared_rotation", "emit_blocks", "record_timing",
                  "workers"});
  ExperimentConfig c;

  const json& layers = get_array(require(j, "layers", ""), "layers");
  if (layers.empty()) fail("layers", "must not be empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string path = "layers[" + std::to_string(i) + "]";
    const json& l = layers[i];
    if (!l.is_object()) fail(path, "expected an object");
    reject_unknown(l, path, {"name", "synthetic", "w", "x"});
    LayerSource src;
    src.name = get_string(require(l, "name", path), join(path, "name"));
    if (src.name.empty() || src.name.find_first_of(",\n\"") != std::string::npos) {
      fail(join(path, "name"), "must be nonempty without commas, quotes or newlines");
    }
    if (!names.insert(src.name).second) fail(join(path, "name"), "duplicate layer name '" + src.name + "'");
    const bool synth = l.contains("synthetic");
    const bool files = l.contains("w") || l.contains("x");
    if (synth == files) fail(path, "give either 'synthetic' or both 'w' and 'x'");
    if (synth) {
      src.synthetic = parse_synthetic(l["synthetic"], join(path, "synthetic"));
    } else {
      src.w_path = resolve_path(get_string(require(l, "w", path), join(path, "w")), base_dir);
      src.x_path = resolve_path(get_string(require(l, "x", path), join(path, "x")), base_dir);
    }
    c.layers.push_back(std::move(src));
  }

  const json& transforms = get_array(require(j, "transforms", ""), "transforms");
  if (transforms.empty()) fail("transforms", "must not be empty");
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    const std::string path = "transforms[" + std::to_string(i) + "]";
    const std::string name = get_string(transforms[i], path);
    try {
      c.transforms.push_back(parse_transform_kind(name));
    } catch (const Error&) {
      fail(path, "unknown transform '" + name + "' (expected i, r, h, wus or wush)");
    }
  }

  if (j.contains("group_size")) {
    const auto g = get_count(j["group_size"], "group_size");
    if (g != 16 && g != 32 && g != 64 && g != 128) fail("group_size", "must be 16, 32, 64 or 128");
    c.group_size = static_cast<int>(g);
  }

  const json& schemes = get_array(require(j, "schemes", ""), "schemes");
  if (schemes.empty()) fail("schemes", "must not be empty");
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    const std::string path = "schemes[" + std::to_string(i) + "]";
    const std::string name = get_string(schemes[i], path);
    try {
      (void)QuantScheme::by_name(name);
    } catch (const Error&) {
      fail(path, "unknown scheme '" + name + "' (expected mxfp4, nvfp4, int4 or intN)");
    }
    c.schemes.push_back(name);
  }

  const json& seeds = get_array(require(j, "seeds", ""), "seeds");
  if (seeds.empty()) fail("seeds", "must not be empty");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    c.seeds.push_back(get_count(seeds[i], "seeds[" + std::to_string(i) + "]"));
  }

  if (j.contains("damp")) {
    c.damp = get_number(j["damp"], "damp");
    if (!(c.damp >= 0.0)) fail("damp", "must be >= 0");
  }
  if (j.contains("output")) c.output = resolve_path(get_string(j["output"], "output"), base_dir);
  if (j.contains("mc_samples")) {
    c.mc_samples = get_count(j["mc_samples"], "mc_samples");
    if (c.mc_samples < 1) fail("mc_samples", "must be >= 1");
  }
  if (j.contains("random_repeats")) {
    c.random_repeats = get_count(j["random_repeats"], "random_repeats");
    if (c.random_repeats < 1) fail("random_repeats", "must be >= 1");
  }
  if (j.contains("activation_rounding")) {
    const std::string r = get_string(j["activation_rounding"], "activation_rounding");
    if (r == "nearest_even") {
      c.activation_rounding = Rounding::NearestEven;
    } else if (r == "stochastic") {
      c.activation_rounding = Rounding::Stochastic;
    } else {
      fail("activation_rounding", "expected nearest_even or stochastic");
    }
  }
  if (j.contains("shared_rotation")) c.shared_rotation = get_bool(j["shared_rotation"], "shared_rotation");
  if (j.contains("emit_blocks")) c.emit_blocks = get_bool(j["emit_blocks"], "emit_blocks");
  if (j.contains("record_timing")) c.record_timing = get_bool(j["record_timing"], "record_timing");
  if (j.contains("workers")) c.workers = get_count(j["workers"], "workers");

  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    if (!c.layers[i].synthetic) continue;
    for (const auto& name : c.schemes) {
      const auto g = static_cast<std::size_t>(resolve_scheme(c, name).group_size());
      if (c.layers[i].synthetic->d_in % g != 0) {
        fail("layers[" + std::to_string(i) + "].synthetic.d_in",
             "must be a multiple of the group size " + std::to_string(g) + " of scheme " + name);
      }
    }
  }
  return c;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string join_numbers(const std::vector<double>& v) {
  std::vector<std::string> s;
  for (double x : v) s.push_back(fmt17(x));
  return join_list(s);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) { return parse_with_base(text, ""); }

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoFailure, "cannot open config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_with_base(text, std::filesystem::path(path).parent_path().string());
}

QuantScheme resolve_scheme(const ExperimentConfig& c, const std::string& name) {
  QuantScheme s = QuantScheme::by_name(name).with_rounding(c.activation_rounding);
  return c.group_size ? s.with_group_size(*c.group_size) : s;
}

std::string config_echo(const ExperimentConfig& c) {
  std::ostringstream o;
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const auto& l = c.layers[i];
    const std::string p = "# layers[" + std::to_string(i) + "].";
    o << p << "name=" << l.name << "\n";
    if (!l.synthetic) {
      o << p << "w=" << l.w_path << "\n" << p << "x=" << l.x_path << "\n";
      continue;
    }
    const SyntheticSpec& s = *l.synthetic;
    const std::string q = p + "synthetic.";
    o << q << "d_in=" << s.d_in << "\n" << q << "d_out=" << s.d_out << "\n" << q << "d_batch=" << s.d_batch << "\n";
    if (s.spectrum.empty()) {
      o << q << "spectrum_decay=" << fmt17(s.spectrum_decay) << "\n";
    } else {
      o << q << "spectrum=" << join_numbers(s.spectrum) << "\n";
    }
    if (s.weight_spectrum.empty()) {
      o << q << "weight_spectrum_decay=" << fmt17(s.weight_spectrum_decay) << "\n";
    } else {
      o << q << "weight_spectrum=" << join_numbers(s.weight_spectrum) << "\n";
    }
    o << q << "tail=" << to_string(s.tail) << "\n" << q << "dof=" << fmt17(s.dof) << "\n";
    o << q << "outlier_count=" << s.outlier_count << "\n" << q << "outlier_magnitude=" << fmt17(s.outlier_magnitude)
      << "\n";
    o << q << "rotate_basis=" << (s.rotate_basis ? "true" : "false") << "\n" << q << "seed=" << s.seed << "\n";
  }
  std::vector<std::string> t;
  for (auto k : c.transforms) t.push_back(to_string(k));
  std::vector<std::string> seeds;
  for (auto s : c.seeds) seeds.push_back(std::to_string(s));
  o << "# transforms=" << join_list(t) << "\n";
  o << "# schemes=" << join_list(c.schemes) << "\n";
  for (const auto& name : c.schemes) {
    const QuantScheme s = resolve_scheme(c, name);
    o << "# scheme." << name << "=group_size:" << s.group_size() << ";scale:" << s.scale_format().name
      << ";scale_rounding:" << to_string(s.scale_rounding()) << ";clipping:"
      << (s.clipping() ? fmt17(*s.clipping()) : std::string("none")) << "\n";
  }
  o << "# seeds=" << join_list(seeds) << "\n";
  o << "# damp=" << fmt17(c.damp) << "\n";
  o << "# group_size=" << (c.group_size ? std::to_string(*c.group_size) : std::string("scheme")) << "\n";
  o << "# mc_samples=" << c.mc_samples << "\n";
  o << "# random_repeats=" << c.random_repeats << "\n";
  o << "# activation_rounding=" << to_string(c.activation_rounding) << "\n";
  o << "# shared_rotation=" << (c.shared_rotation ? "true" : "false") << "\n";
  o << "# emit_blocks=" << (c.emit_blocks ? "true" : "false") << "\n";
  o << "# record_timing=" << (c.record_timing ? "true" : "false") << "\n";
  o << "# workers=" << c.workers << "\n";
  return o.str();
}

}  // namespace wush
