#include "clmvs/config.hpp"

#include <set>

#include "clmvs/io.hpp"
#include "json.hpp"

namespace clmvs {

using nlohmann::json;

void RunConfig::validate() const {
  require(num_views >= 2, "config: num_views must be >= 2");
  for (int c : cascade.counts) require(c >= 4, "config: hypothesis counts must be >= 4");
  require(cascade.gamma > 0.0 && cascade.gamma < 1.0, "config: gamma must be in (0,1)");
  norm.validate();
  for (double w : {weights.pc, weights.scc, weights.ssim, weights.smooth, lambda2_init})
    require(w >= 0.0, "config: loss weights must be >= 0");
  require(alpha_max >= 0.0 && alpha_max <= 1.0, "config: alpha_max must be in [0,1]");
  require(epochs >= 1 && epoch >= 0 && epoch < epochs, "config: need 0 <= epoch < epochs");
  require(iterations >= 0 && refresh_every >= 1 && max_halvings >= 0,
          "config: bad optimisation settings");
  fusion.validate();
  scene.validate();
}

OptConfig RunConfig::opt_config() const {
  OptConfig o;
  o.norm = norm;
  o.weights = weights;
  o.lambda2 = curriculum(epoch, epochs, lambda2_init, alpha_max).lambda2;
  o.iterations = iterations;
  o.refresh_every = refresh_every;
  o.detach_regular = detach_regular;
  o.contrastive_photometric = contrastive_photometric;
  o.max_halvings = max_halvings;
  o.cascade = cascade;
  return o;
}

namespace {

// Reads known keys from an object and rejects anything else.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j.is_object(), "config: '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error("config: bad value for '" + name_ + "." + key + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      require(seen_.count(k) > 0, "config: unknown key '" + name_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: parse error: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "root");
  top.get("num_views", cfg.num_views);
  top.get("seed", cfg.seed);
  top.get("out_dir", cfg.out_dir);
  if (const json* j = top.child("cascade")) {
    Section s(*j, "cascade");
    s.get("hypotheses", cfg.cascade.counts);
    s.get("downscale", cfg.cascade.downscale);
    s.get("fine_interval_divisions", cfg.cascade.fine_interval_divisions);
    s.get("stage2_interval_factor", cfg.cascade.stage2_interval_factor);
    s.get("coarse_interval_scale", cfg.cascade.coarse_interval_scale);
    s.get("num_groups", cfg.cascade.num_groups);
    s.get("softmax_temperature", cfg.cascade.softmax_temperature);
    s.get("smoothing_passes", cfg.cascade.smoothing_passes);
    s.get("gamma", cfg.cascade.gamma);
    s.get("strict_source_sum", cfg.cascade.strict_source_sum);
    s.finish();
  }
  if (const json* j = top.child("loss")) {
    Section s(*j, "loss");
    s.get("theta", cfg.norm.theta);
    s.get("eps_grad", cfg.norm.eps_grad);
    s.get("lambda1", cfg.weights.pc);
    s.get("lambda2_init", cfg.lambda2_init);
    s.get("lambda3", cfg.weights.scc);
    s.get("lambda4", cfg.weights.ssim);
    s.get("lambda5", cfg.weights.smooth);
    s.finish();
  }
  if (const json* j = top.child("curriculum")) {
    Section s(*j, "curriculum");
    s.get("epochs", cfg.epochs);
    s.get("epoch", cfg.epoch);
    s.get("alpha_max", cfg.alpha_max);
    s.finish();
  }
  if (const json* j = top.child("optimize")) {
    Section s(*j, "optimize");
    s.get("iterations", cfg.iterations);
    s.get("refresh_every", cfg.refresh_every);
    s.get("detach_regular", cfg.detach_regular);
    s.get("contrastive_photometric", cfg.contrastive_photometric);
    s.get("max_halvings", cfg.max_halvings);
    s.finish();
  }
  if (const json* j = top.child("fluctuation")) {
    Section s(*j, "fluctuation");
    s.get("enabled", cfg.fluctuation.enabled);
    s.get("gamma_min", cfg.fluctuation.gamma_min);
    s.get("gamma_max", cfg.fluctuation.gamma_max);
    s.get("brightness", cfg.fluctuation.brightness);
    s.get("contrast_min", cfg.fluctuation.contrast_min);
    s.get("contrast_max", cfg.fluctuation.contrast_max);
    s.finish();
  }
  if (const json* j = top.child("fusion")) {
    Section s(*j, "fusion");
    s.get("conf_threshold", cfg.fusion.conf_threshold);
    s.get("tau_px", cfg.fusion.tau_px);
    s.get("tau_d", cfg.fusion.tau_d);
    s.get("n_min", cfg.fusion.n_min);
    s.finish();
  }
  if (const json* j = top.child("scene")) {
    Section s(*j, "scene");
    std::string geometry = to_string(cfg.scene.geometry), texture = to_string(cfg.scene.texture);
    s.get("geometry", geometry);
    s.get("texture", texture);
    cfg.scene.geometry = parse_geometry(geometry);
    cfg.scene.texture = parse_texture(texture);
    s.get("checker_period", cfg.scene.checker_period);
    s.get("noise_octaves", cfg.scene.noise_octaves);
    s.get("noise_cell", cfg.scene.noise_cell);
    s.get("specular_strength", cfg.scene.specular_strength);
    s.get("n_views", cfg.scene.n_views);
    s.get("height", cfg.scene.height);
    s.get("width", cfg.scene.width);
    s.get("ring_radius", cfg.scene.ring_radius);
    s.get("jitter", cfg.scene.jitter);
    s.get("target_distance", cfg.scene.target_distance);
    s.get("depth_min", cfg.scene.depth_min);
    s.get("depth_max", cfg.scene.depth_max);
    s.get("seed", cfg.scene.seed);
    s.get("corrupted_view", cfg.scene.corrupted_view);
    s.get("corruption_specular", cfg.scene.corruption_specular);
    s.get("outlier_fraction", cfg.scene.outlier_fraction);
    s.get("clean_reference", cfg.scene.clean_reference);
    s.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& c) {
  json j;
  j["num_views"] = c.num_views;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["cascade"] = {{"hypotheses", c.cascade.counts},
                  {"downscale", c.cascade.downscale},
                  {"fine_interval_divisions", c.cascade.fine_interval_divisions},
                  {"stage2_interval_factor", c.cascade.stage2_interval_factor},
                  {"coarse_interval_scale", c.cascade.coarse_interval_scale},
                  {"num_groups", c.cascade.num_groups},
                  {"softmax_temperature", c.cascade.softmax_temperature},
                  {"smoothing_passes", c.cascade.smoothing_passes},
                  {"gamma", c.cascade.gamma},
                  {"strict_source_sum", c.cascade.strict_source_sum}};
  j["loss"] = {{"theta", c.norm.theta},        {"eps_grad", c.norm.eps_grad},
               {"lambda1", c.weights.pc},      {"lambda2_init", c.lambda2_init},
               {"lambda3", c.weights.scc},     {"lambda4", c.weights.ssim},
               {"lambda5", c.weights.smooth}};
  j["curriculum"] = {{"epochs", c.epochs}, {"epoch", c.epoch}, {"alpha_max", c.alpha_max}};
  j["optimize"] = {{"iterations", c.iterations},
                   {"refresh_every", c.refresh_every},
                   {"detach_regular", c.detach_regular},
                   {"contrastive_photometric", c.contrastive_photometric},
                   {"max_halvings", c.max_halvings}};
  j["fluctuation"] = {{"enabled", c.fluctuation.enabled},
                      {"gamma_min", c.fluctuation.gamma_min},
                      {"gamma_max", c.fluctuation.gamma_max},
                      {"brightness", c.fluctuation.brightness},
                      {"contrast_min", c.fluctuation.contrast_min},
                      {"contrast_max", c.fluctuation.contrast_max}};
  j["fusion"] = {{"conf_threshold", c.fusion.conf_threshold},
                 {"tau_px", c.fusion.tau_px},
                 {"tau_d", c.fusion.tau_d},
                 {"n_min", c.fusion.n_min}};
  const SceneSpec& s = c.scene;
  j["scene"] = {{"geometry", to_string(s.geometry)},
                {"texture", to_string(s.texture)},
                {"checker_period", s.checker_period},
                {"noise_octaves", s.noise_octaves},
                {"noise_cell", s.noise_cell},
                {"specular_strength", s.specular_strength},
                {"n_views", s.n_views},
                {"height", s.height},
                {"width", s.width},
                {"ring_radius", s.ring_radius},
                {"jitter", s.jitter},
                {"target_distance", s.target_distance},
                {"depth_min", s.depth_min},
                {"depth_max", s.depth_max},
                {"seed", s.seed},
                {"corrupted_view", s.corrupted_view},
                {"corruption_specular", s.corruption_specular},
                {"outlier_fraction", s.outlier_fraction},
                {"clean_reference", s.clean_reference}};
  return j.dump(2) + "\n";
}

}  // namespace clmvs
