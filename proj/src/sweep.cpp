#include "wush/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <sstream>

#include "wush/numfmt.hpp"
#include "wush/tensor_io.hpp"

namespace wush {

namespace {

struct LayerData {
  Matrix w;
  Matrix x;
  std::optional<Errc> error;
  std::string message;
};

LayerData load_layer(const LayerSource& src, std::uint64_t seed) {
  LayerData d;
  try {
    if (src.synthetic) {
      SyntheticSpec spec = *src.synthetic;
      spec.seed = Rng::derive(spec.seed, seed);
      SyntheticData s = gen_synthetic(spec);
      d.w = std::move(s.w);
      d.x = std::move(s.x);
    } else {
      d.w = read_tensor(src.w_path);
      d.x = read_tensor(src.x_path);
    }
  } catch (const Error& e) {
    d.error = e.code();
    d.message = e.what();
  }
  return d;
}

int severity(Errc e) { return is_numerical(e) ? 2 : 1; }

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config) {
  const std::size_t workers = config.workers == 0 ? default_workers() : config.workers;
  SweepResult result;

  // Data keyed by (layer, seed); file-backed layers do not depend on the seed
  // but are cheap enough to reload.
  const std::size_t n_layers = config.layers.size();
  const std::size_t n_seeds = config.seeds.size();
  std::vector<LayerData> data(n_layers * n_seeds);
  parallel_for(data.size(), workers, [&](std::size_t k) {
    data[k] = load_layer(config.layers[k / n_seeds], config.seeds[k % n_seeds]);
  });

  for (std::size_t l = 0; l < n_layers; ++l)
    for (TransformKind t : config.transforms)
      for (const auto& scheme : config.schemes)
        for (std::size_t s = 0; s < n_seeds; ++s) {
          SweepCell c;
          c.layer = config.layers[l].name;
          c.transform = t;
          c.format = scheme;
          c.seed = config.seeds[s];
          result.cells.push_back(std::move(c));
        }

  std::map<std::string, std::size_t> layer_index;
  for (std::size_t l = 0; l < n_layers; ++l) layer_index[config.layers[l].name] = l;
  std::map<std::uint64_t, std::size_t> seed_index;
  for (std::size_t s = n_seeds; s-- > 0;) seed_index[config.seeds[s]] = s;

  parallel_for(result.cells.size(), workers, [&](std::size_t i) {
    SweepCell& c = result.cells[i];
    const LayerData& d = data[layer_index.at(c.layer) * n_seeds + seed_index.at(c.seed)];
    if (d.error) {
      c.error = d.error;
      c.error_message = d.message;
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      const QuantScheme scheme = resolve_scheme(config, c.format);
      const std::size_t repeats = c.transform == TransformKind::Random ? config.random_repeats : 1;
      for (std::size_t r = 0; r < repeats; ++r) {
        LossOptions o;
        o.damp = config.damp;
        o.seed = Rng::derive(c.seed, r);
        o.shared_rotation = config.shared_rotation;
        o.stochastic_passes = config.mc_samples;
        o.workers = 1;
        c.reports.push_back(layer_loss(d.w, d.x, c.transform, scheme, o));
      }
    } catch (const Error& e) {
      c.error = e.code();
      c.error_message = e.what();
      c.reports.clear();
    }
    const auto stop = std::chrono::steady_clock::now();
    c.elapsed_ms = config.record_timing ? std::chrono::duration<double, std::milli>(stop - start).count() : 0.0;
  });

  for (const SweepCell& c : result.cells) {
    SweepRow base{c.layer, to_string(c.transform), c.format, c.seed, "", 0.0, 0.0, c.elapsed_ms};
    if (c.error) {
      base.block = "error:" + std::string(to_string(*c.error));
      base.loss = std::numeric_limits<double>::quiet_NaN();
      base.layer_loss = base.loss;
      result.rows.push_back(base);
      result.exit_code = std::max(result.exit_code, severity(*c.error));
      continue;
    }
    const double reps = static_cast<double>(c.reports.size());
    double sum = 0.0;
    double layer = 0.0;
    std::vector<double> blocks(c.reports.front().blockwise_losses.size(), 0.0);
    for (const LossReport& r : c.reports) {
      sum += r.blockwise_sum / reps;
      layer += r.layer_loss / reps;
      for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b] += r.blockwise_losses[b] / reps;
    }
    if (config.emit_blocks) {
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        SweepRow row = base;
        row.block = std::to_string(b);
        row.loss = blocks[b];
        row.layer_loss = layer;
        result.rows.push_back(row);
      }
    }
    base.block = "sum";
    base.loss = sum;
    base.layer_loss = layer;
    result.rows.push_back(base);
  }
  return result;
}

std::string to_csv(const ExperimentConfig& config, const SweepResult& result) {
  std::ostringstream o;
  o << config_echo(config);
  o << kCsvHeader << "\n";
  for (const SweepRow& r : result.rows) {
    o << r.layer << ',' << r.transform << ',' << r.format << ',' << r.seed << ',' << r.block << ',' << fmt17(r.loss)
      << ',' << fmt17(r.layer_loss) << ',' << fmt17(r.elapsed_ms) << "\n";
  }
  return o.str();
}

}  // namespace wush
