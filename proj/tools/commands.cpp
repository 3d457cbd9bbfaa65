#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "acceptance_suite.hpp"
#include "vwb/charges.hpp"
#include "vwb/green.hpp"
#include "vwb/heat.hpp"
#include "vwb/interface.hpp"
#include "vwb/spin.hpp"
#include "vwb/sums.hpp"

namespace vwb::run {

namespace {

KeySpec req(std::string name, KeyType t, std::string doc) { return {std::move(name), t, true, "", std::move(doc)}; }
KeySpec opt(std::string name, KeyType t, std::string fallback, std::string doc) {
  return {std::move(name), t, false, std::move(fallback), std::move(doc)};
}

const KeySpec kSeedKey{"seed", KeyType::kInt, false, "1", "master seed; every random stream derives from it"};

std::map<std::string, Schema> build_schemas() {
  using K = KeyType;
  std::map<std::string, Schema> m;
  m["green"] = {"green",
                {req("d", K::kInt, "dimension, at least 3"), req("radius", K::kInt, "half side of the output box"),
                 req("tol", K::kReal, "target accuracy"),
                 opt("method", K::kString, "extrapolation", "extrapolation or torus"),
                 opt("exponent", K::kReal, "-1", "decay exponent of the ratio table, negative selects d - 2"),
                 opt("cache_dir", K::kString, "", "directory for cached fields, empty disables the cache"),
                 kSeedKey}};
  m["charges"] = {"charges",
                  {req("d", K::kInt, "dimension"), req("L", K::kInt, "half side of the enumeration box"),
                   req("cap", K::kInt, "l1 cap of the pool"),
                   opt("betas", K::kRealList, "16,64,256", "inverse temperatures for the activity table"),
                   opt("activity_order", K::kInt, "2", "largest number of parts in a decomposition"),
                   opt("poincare", K::kBool, "true", "check the primitives of every charge"), kSeedKey}};
  m["verify-sums"] = {
      "verify-sums",
      {opt("table", K::kString, "all", "all, convolution, double or two-point"),
       opt("alpha", K::kReal, "2", "exponent on |y - x|"), opt("gamma", K::kReal, "2", "exponent on |y|"),
       opt("a", K::kReal, "0", "log power on |y - x|"), opt("c", K::kReal, "0", "log power on |y|"),
       opt("d", K::kInt, "3", "dimension"), opt("points", K::kIntList, "10,20,40", "axis distances for the convolution"),
       opt("double_points", K::kIntList, "8,16,32", "axis distances for the double sum"),
       opt("radius_factor", K::kInt, "4", "summation radius over the distance"),
       opt("two_point_radius", K::kInt, "72", "summation radius for the two-point kernel"), kSeedKey}};
  m["simulate-spin"] = {
      "simulate-spin",
      {req("model", K::kString, "villain or xy"), req("beta", K::kReal, "inverse temperature"),
       req("sweeps", K::kInt, "recorded sweeps per chain"), req("burn_in", K::kInt, "discarded sweeps per chain"),
       opt("sampler", K::kString, "metropolis", "metropolis or augmented (Villain on a box only)"),
       opt("lattice", K::kString, "box", "box or graph"), opt("L", K::kInt, "8", "half side of the box"),
       opt("r_min", K::kInt, "1", "smallest axis distance from the centre"),
       opt("r_max", K::kInt, "0", "largest axis distance, 0 selects L - 1"),
       opt("graph", K::kString, "chain:2", "single-edge, chain:N, star:N or triangle"),
       opt("x", K::kInt, "1", "first graph vertex"), opt("y", K::kInt, "2", "second graph vertex"),
       opt("thin", K::kInt, "1", "record every thin-th sweep"), opt("width", K::kReal, "1", "Metropolis proposal width"),
       opt("wrap_M", K::kInt, "10", "winding truncation of the Villain weight"),
       opt("batches", K::kInt, "32", "batches for the error estimates"),
       opt("checkpoint_every", K::kInt, "0", "sweeps between checkpoints, 0 only at the end"), kSeedKey}};
  m["simulate-interface"] = {
      "simulate-interface",
      {req("beta", K::kReal, "inverse temperature, above 1"), req("L", K::kInt, "half side of the box"),
       req("steps", K::kInt, "recorded Langevin steps"), req("burn_in", K::kInt, "discarded steps"),
       opt("n_max", K::kInt, "0", "number of gradient tower terms"), opt("charges", K::kBool, "false", "charge term on"),
       opt("charge_cap", K::kInt, "4", "l1 cap of the charge pool"),
       opt("activity_order", K::kInt, "2", "largest number of parts in a decomposition"),
       opt("dt", K::kReal, "0", "time step, 0 selects the default"), opt("thin", K::kInt, "10", "record every thin-th step"),
       opt("r_max", K::kInt, "2", "largest axis distance in the covariance table"),
       opt("batches", K::kInt, "32", "batches for the error estimates"),
       opt("checkpoint_every", K::kInt, "0", "steps between checkpoints, 0 only at the end"), kSeedKey}};
  m["metric-graph"] = {"metric-graph",
                       {req("graph", K::kString, "single-edge, chain:N, star:N or triangle"),
                        req("beta", K::kReal, "inverse temperature"),
                        opt("n_list", K::kIntList, "1,2,4,8,16", "subdivision levels"),
                        opt("x", K::kInt, "0", "first vertex"), opt("y", K::kInt, "1", "second vertex"),
                        opt("tol", K::kReal, "1e-10", "quadrature tolerance"), kSeedKey}};
  m["heat-kernel"] = {
      "heat-kernel",
      {req("beta", K::kReal, "inverse temperature, above 1"), req("L", K::kInt, "half side of the box"),
       req("ladder", K::kRealList, "times at which the kernel is stored"),
       opt("n_max", K::kInt, "1", "number of gradient tower terms"), opt("charges", K::kBool, "false", "charge term on"),
       opt("charge_cap", K::kInt, "4", "l1 cap of the charge pool"),
       opt("activity_order", K::kInt, "1", "largest number of parts in a decomposition"),
       opt("domain", K::kString, "periodic", "periodic or dirichlet"),
       opt("dt", K::kReal, "0", "time step, 0 selects the default"),
       opt("trajectory", K::kString, "frozen", "frozen (zero configuration) or langevin"),
       opt("burn_in", K::kInt, "0", "Langevin steps before the kernel starts"),
       opt("source", K::kSite, "0,0,0", "source site"), opt("dump_slices", K::kBool, "true", "write kernel slices"),
       kSeedKey}};
  m["fit-decay"] = {"fit-decay",
                    {req("input", K::kString, "CSV with columns r, mean, se"),
                     opt("observable", K::kString, "", "keep rows whose observable column matches, empty keeps all"),
                     opt("model", K::kString, "power", "power or powerlog"),
                     opt("bootstrap", K::kInt, "1000", "bootstrap replicas for the interval"), kSeedKey}};
  m["verify"] = {"verify", {opt("criteria", K::kIntList, "", "criteria to run, empty runs all"), kSeedKey}};
  return m;
}

const std::map<std::string, Schema>& schemas() {
  static const auto m = build_schemas();
  return m;
}

std::string csv_real(double v) { return format_real(v); }

RootedGraph parse_graph(const std::string& spec) {
  if (spec == "single-edge") return single_edge_graph();
  if (spec == "triangle") return triangle_graph();
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string kind = spec.substr(0, colon);
    const int n = std::stoi(spec.substr(colon + 1));
    if (kind == "chain") return chain_graph(n);
    if (kind == "star") return star_graph(n);
  }
  throw InvalidArgument("unknown graph '" + spec + "'");
}

// Keys that may change between a checkpoint and its resumption.
bool mutable_key(const std::string& k) { return k == "checkpoint_every"; }

Json immutable_part(const Config& c) {
  Json j = Json::object();
  for (const auto& [k, v] : c.values().items())
    if (!mutable_key(k)) j[k] = v;
  return j;
}

void check_resume_config(const Json& stored, const Config& c) {
  const Json now = immutable_part(c);
  std::string changed;
  for (const auto& [k, v] : now.items())
    if (!stored.contains(k) || stored[k] != v) changed += " " + k;
  for (const auto& [k, v] : stored.items())
    if (!now.contains(k)) changed += " " + k;
  if (!changed.empty()) throw InvalidArgument("resume: configuration differs from the checkpoint in:" + changed);
}

// ------------------------------------------------------------------ green

std::string green_cache_name(const Config& c) {
  std::ostringstream os;
  os << "green_d" << c.integer("d") << "_r" << c.integer("radius") << "_tol" << format_real(c.real("tol")) << "_"
     << c.text("method") << ".bin";
  return os.str();
}

int cmd_green(const Config& c, RunOutputs& out) {
  const int d = static_cast<int>(c.integer("d"));
  const int radius = static_cast<int>(c.integer("radius"));
  const std::string method = c.text("method");
  if (method != "extrapolation" && method != "torus") throw InvalidArgument("green: method must be extrapolation or torus");
  const GreenMethod gm = method == "torus" ? GreenMethod::kTorus : GreenMethod::kDirichletExtrapolation;
  GreenField g;
  bool cached = false;
  std::filesystem::path cache;
  if (!c.text("cache_dir").empty()) {
    cache = std::filesystem::path(c.text("cache_dir")) / green_cache_name(c);
    if (std::filesystem::exists(cache)) {
      Checkpoint ck = load_checkpoint(cache);
      if (ck.meta.value("d", -1) == d && ck.meta.value("radius", -1) == radius && ck.arrays.size() == 1) {
        g.d = d;
        g.radius = radius;
        g.box = LatticeBox(d, radius + 1);
        g.method = gm;
        g.values = ck.arrays[0];
        g.accuracy = ck.meta.value("accuracy", 0.0);
        g.residual = ck.meta.value("residual", 0.0);
        if (g.values.size() != static_cast<std::size_t>(g.box.num_sites())) throw Corruption("green: cache size mismatch");
        cached = true;
      }
    }
  }
  if (!cached) {
    g = compute_green(d, radius, c.real("tol"), gm);
    if (!cache.empty()) {
      std::filesystem::create_directories(cache.parent_path());
      Checkpoint ck;
      ck.meta = {{"d", d}, {"radius", radius}, {"accuracy", g.accuracy}, {"residual", g.residual}};
      ck.arrays.push_back(g.values);
      save_checkpoint(cache, ck);
    }
  }
  const double exponent = c.real("exponent") < 0 ? d - 2.0 : c.real("exponent");
  auto grad = green_gradient(g);
  std::ostringstream csv;
  for (int k = 0; k < d; ++k) csv << "x" << k + 1 << ",";
  csv << "G,grad_norm\n";
  const LatticeBox inner(d, radius);
  for (std::int64_t s = 0; s < inner.num_sites(); ++s) {
    Site x = inner.site_at(s);
    bool fundamental = x[0] >= 0;
    for (int k = 1; k < d; ++k) fundamental = fundamental && x[k] >= 0 && x[k] <= x[k - 1];
    if (!fundamental) continue;
    double gn = 0.0;
    for (int k = 0; k < d; ++k) gn += grad.at(s, k) * grad.at(s, k);
    for (int k = 0; k < d; ++k) csv << x[k] << ",";
    csv << csv_real(g(x)) << "," << csv_real(std::sqrt(gn)) << "\n";
  }
  out.write("green.csv", csv.str());
  std::ostringstream dec;
  dec << "ray_site,norm,value,ratio\n";
  for (const auto& r : decay_ratio_table(g, exponent)) {
    for (int k = 0; k < d; ++k) dec << (k ? " " : "") << r.x[k];
    dec << "," << csv_real(r.norm) << "," << csv_real(r.value) << "," << csv_real(r.ratio) << "\n";
  }
  out.write("decay.csv", dec.str());
  out.summary() = {{"accuracy", g.accuracy}, {"residual", g.residual}, {"origin", g(Site(d, 0))}, {"cached", cached}};
  return 0;
}

// ---------------------------------------------------------------- charges

void put_i64(std::string& s, std::int64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

std::string encode_pool(const std::vector<Charge>& pool, int d, int L, int cap) {
  std::string s = "VWBPOOL1";
  for (std::int64_t v : {std::int64_t{d}, std::int64_t{L}, std::int64_t{cap}, static_cast<std::int64_t>(pool.size())})
    put_i64(s, v);
  for (const auto& q : pool) {
    put_i64(s, static_cast<std::int64_t>(q.q.size()));
    for (const auto& e : q.q) {
      for (int k = 0; k < d; ++k) put_i64(s, e.base[k]);
      put_i64(s, e.pair);
      put_i64(s, e.value);
    }
    put_i64(s, static_cast<std::int64_t>(q.primitive.size()));
    for (const auto& e : q.primitive) {
      for (int k = 0; k < d; ++k) put_i64(s, e.base[k]);
      put_i64(s, e.dir);
      put_i64(s, e.value);
    }
  }
  return s;
}

int cmd_charges(const Config& c, RunOutputs& out) {
  const int d = static_cast<int>(c.integer("d"));
  const int L = static_cast<int>(c.integer("L"));
  const int cap = static_cast<int>(c.integer("cap"));
  const int order = static_cast<int>(c.integer("activity_order"));
  auto list = enumerate_charges(LatticeBox(d, L), cap);
  std::map<int, std::int64_t> counts;
  for (const auto& q : list) ++counts[q.l1];
  std::ostringstream cc;
  cc << "l1,count\n";
  for (auto [l1, n] : counts) cc << l1 << "," << n << "\n";
  out.write("counts.csv", cc.str());
  out.write("pool.bin", encode_pool(list, d, L, cap));
  Json summary = {{"charges", list.size()}};
  if (c.boolean("poincare")) {
    auto rep = poincare_sweep(list);
    summary["poincare"] = {{"checked", rep.checked},
                           {"failures", rep.failures},
                           {"sup_constant", rep.sup_constant},
                           {"diameter_constant", rep.diameter_constant}};
  }
  ChargePool pool(std::move(list), cap);
  std::ostringstream act;
  act << "index,l1,diameter,beta,activity,decay_constant\n";
  Json fits = Json::object();
  for (double beta : c.real_list("betas")) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double z = pool.activity(beta, i, order);
      const auto& q = pool.charges()[i];
      act << i << "," << q.l1 << "," << q.diameter << "," << csv_real(beta) << "," << csv_real(z) << ","
          << csv_real(-std::log(std::abs(z)) / (std::sqrt(beta) * q.l1)) << "\n";
    }
    fits[format_real(beta)] = fitted_activity_constant(pool, beta, order);
  }
  out.write("activity.csv", act.str());
  summary["fitted_decay_constant"] = fits;
  out.summary() = summary;
  return 0;
}

// ------------------------------------------------------------ verify-sums

double variation(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

int cmd_verify_sums(const Config& c, RunOutputs& out) {
  const std::string table = c.text("table");
  if (table != "all" && table != "convolution" && table != "double" && table != "two-point")
    throw InvalidArgument("verify-sums: table must be all, convolution, double or two-point");
  SumSpec spec;
  spec.alpha = c.real("alpha");
  spec.gamma = c.real("gamma");
  spec.a = c.real("a");
  spec.c = c.real("c");
  spec.d = static_cast<int>(c.integer("d"));
  if (spec.alpha + spec.gamma <= spec.d)
    throw InvalidArgument("verify-sums: alpha + gamma must exceed the dimension");
  if (spec.alpha < 0 || spec.gamma < 0 || spec.a < 0 || spec.c < 0)
    throw InvalidArgument("verify-sums: exponents and log powers must be non-negative");
  const int factor = static_cast<int>(c.integer("radius_factor"));
  Json summary = Json::object();
  auto on_axis = [&](std::int64_t m) {
    Site x(spec.d, 0);
    x[0] = static_cast<int>(m);
    return x;
  };
  if (table == "all" || table == "convolution") {
    std::ostringstream os;
    os << "distance,value,tail_bound,bound_shape,ratio\n";
    std::vector<double> ratios;
    for (auto m : c.int_list("points")) {
      SumSpec s = spec;
      s.radius = static_cast<int>(factor * m);
      auto r = convolution_sum(s, on_axis(m));
      ratios.push_back(r.ratio);
      os << m << "," << csv_real(r.value) << "," << csv_real(r.tail_bound) << "," << csv_real(r.bound_shape) << ","
         << csv_real(r.ratio) << "\n";
    }
    out.write("convolution.csv", os.str());
    summary["convolution_variation"] = variation(ratios);
  }
  if (table == "all" || table == "double") {
    std::ostringstream os;
    os << "distance,lhs,ratio\n";
    std::vector<double> ratios;
    for (auto m : c.int_list("double_points")) {
      auto r = double_sum_check(on_axis(m), spec.a, static_cast<int>(factor * m));
      ratios.push_back(r.ratio);
      os << m << "," << csv_real(r.lhs) << "," << csv_real(r.ratio) << "\n";
    }
    out.write("double_sum.csv", os.str());
    summary["double_variation"] = variation(ratios);
  }
  if (table == "all" || table == "two-point") {
    if (spec.d != 3) throw InvalidArgument("verify-sums: the two-point grid is defined for d = 3");
    std::ostringstream os;
    os << "y1,y2,norm_y1,norm_y2,norm_diff,value,ratio\n";
    std::vector<double> ratios;
    for (const auto& [y1, y2] : acceptance::two_point_grid()) {
      auto r = two_point_kernel_sum(y1, y2, spec.a, spec.c, static_cast<int>(c.integer("two_point_radius")));
      ratios.push_back(r.ratio);
      auto str = [](const Site& y) { return std::to_string(y[0]) + " " + std::to_string(y[1]) + " " + std::to_string(y[2]); };
      auto nrm = [](const Site& y) { return std::sqrt(double(y[0]) * y[0] + double(y[1]) * y[1] + double(y[2]) * y[2]); };
      os << str(y1) << "," << str(y2) << "," << csv_real(nrm(y1)) << "," << csv_real(nrm(y2)) << ","
         << csv_real(nrm(sub(y1, y2))) << "," << csv_real(r.value) << "," << csv_real(r.ratio) << "\n";
    }
    out.write("two_point.csv", os.str());
    summary["two_point_variation"] = variation(ratios);
  }
  out.summary() = summary;
  return 0;
}

// ----------------------------------------------------------- simulate-spin

struct SpinChain {
  bool augmented = false;
  const SpinSystem* sys = nullptr;
  const EdgeLogWeight* weight = nullptr;
  SpinConfig cfg;
  Rng rng;
  std::unique_ptr<AugmentedVillainSampler> aug;
  ChainRecord rec;
  std::int64_t done = 0;  // sweeps including burn-in
  double acceptance_sum = 0.0;

  void advance(std::int64_t target, std::int64_t burn_in, std::int64_t thin, double width) {
    while (done < target) {
      if (augmented)
        aug->sweep();
      else
        acceptance_sum += metropolis_sweep(*sys, cfg, *weight, width, rng);
      ++done;
      const std::int64_t k = done - burn_in;
      if (k > 0 && k % thin == 0) {
        if (augmented)
          aug->record(rec);
        else
          record_raw_sample(cfg, rec);
      }
    }
  }
  SpinConfig state() const { return augmented ? aug->config() : cfg; }
  Rng& generator() { return augmented ? aug->rng() : rng; }
};

void advance_all(std::vector<SpinChain>& chains, std::int64_t target, std::int64_t burn_in, std::int64_t thin,
                 double width, int threads) {
  if (threads <= 1) {
    for (auto& ch : chains) ch.advance(target, burn_in, thin, width);
    return;
  }
  std::vector<std::thread> pool;
  for (auto& ch : chains) pool.emplace_back([&ch, target, burn_in, thin, width] { ch.advance(target, burn_in, thin, width); });
  for (auto& t : pool) t.join();
}

std::string estimates_csv(const std::vector<PairEstimate>& est) {
  std::ostringstream os;
  os << "r,observable,mean,se,samples,batches\n";
  for (const auto& e : est) {
    const std::pair<const char*, const Estimate*> rows[] = {
        {"cc", &e.cc},           {"cx", &e.cx},         {"cy", &e.cy},
        {"product", &e.product}, {"truncated", &e.truncated}, {"ss", &e.ss},
        {"cos_minus", &e.cos_minus}, {"cos_plus", &e.cos_plus}, {"sx", &e.sx},
        {"dn_residual", &e.dn_residual}};
    for (const auto& [name, est1] : rows)
      os << csv_real(e.separation) << "," << name << "," << csv_real(est1->mean) << "," << csv_real(est1->se) << ","
         << est1->samples << "," << est1->batches << "\n";
  }
  return os.str();
}

int cmd_simulate_spin(const Config& c, RunOutputs& out, const GlobalOptions& g) {
  ChainParams p;
  p.beta = c.real("beta");
  p.model = parse_spin_model(c.text("model"));
  p.wrap_M = static_cast<int>(c.integer("wrap_M"));
  p.sweeps = c.integer("sweeps");
  p.burn_in = c.integer("burn_in");
  p.thin = c.integer("thin");
  p.width = c.real("width");
  validate(p);
  const std::string sampler = c.text("sampler");
  const std::string lattice = c.text("lattice");
  if (sampler != "metropolis" && sampler != "augmented") throw InvalidArgument("simulate-spin: unknown sampler");
  if (lattice != "box" && lattice != "graph") throw InvalidArgument("simulate-spin: lattice must be box or graph");
  const bool augmented = sampler == "augmented";
  if (augmented && (lattice != "box" || p.model != SpinModel::kVillain))
    throw InvalidArgument("simulate-spin: the augmented sampler needs the Villain model on a box");

  std::vector<PairGroup> groups;
  SpinSystem sys;
  LatticeBox box;
  RootedGraph graph;
  if (lattice == "box") {
    box = LatticeBox(3, static_cast<int>(c.integer("L")));
    if (box.L < 2) throw InvalidArgument("simulate-spin: L must be at least 2");
    const int r_max = c.integer("r_max") == 0 ? box.L - 1 : static_cast<int>(c.integer("r_max"));
    const int r_min = static_cast<int>(c.integer("r_min"));
    if (r_min < 1 || r_max < r_min || r_max > box.L - 1) throw InvalidArgument("simulate-spin: bad r_min / r_max");
    const int centre = static_cast<int>(box.site_index(Site(3, 0)));
    for (int r = r_min; r <= r_max; ++r) {
      PairGroup grp;
      grp.separation = r;
      for (int k = 0; k < 3; ++k)
        for (int sgn : {-1, 1}) grp.pairs.push_back({centre, static_cast<int>(box.site_index(unit(3, k, sgn * r)))});
      groups.push_back(grp);
    }
    if (!augmented) sys = spin_system(box);
  } else {
    graph = parse_graph(c.text("graph"));
    const int x = static_cast<int>(c.integer("x")), y = static_cast<int>(c.integer("y"));
    if (x < 0 || y < 0 || x >= graph.num_vertices || y >= graph.num_vertices)
      throw InvalidArgument("simulate-spin: graph vertex out of range");
    groups.push_back(PairGroup{{{x, y}}, 1.0});
    sys = spin_system(graph);
  }
  EdgeLogWeight weight(p.model, p.beta, p.wrap_M, true);

  std::vector<SpinChain> chains(2);
  const std::uint64_t seed = static_cast<std::uint64_t>(c.integer("seed"));
  for (int k = 0; k < 2; ++k) {
    auto& ch = chains[k];
    ch.augmented = augmented;
    ch.rec.groups = groups;
    const std::uint64_t s = stream_seed(seed, "spin-chain", k);
    if (augmented) {
      ch.aug = std::make_unique<AugmentedVillainSampler>(box, p.beta, s);
      ChainRecord warm;  // caches the Green's function entries before any threads start
      warm.groups = groups;
      ch.aug->record(warm);
    } else {
      ch.sys = &sys;
      ch.weight = &weight;
      ch.rng.seed(s);
      ch.cfg.theta.assign(sys.n, 0.0);
    }
  }
  if (!g.resume.empty()) {
    Checkpoint ck = load_checkpoint(g.resume);
    if (ck.meta.value("subcommand", "") != "simulate-spin") throw InvalidArgument("resume: not a simulate-spin checkpoint");
    check_resume_config(ck.meta["config"], c);
    if (ck.rng_states.size() != 2 || ck.arrays.size() != 6) throw Corruption("resume: checkpoint layout");
    for (int k = 0; k < 2; ++k) {
      auto& ch = chains[k];
      ch.done = ck.meta["done"][k].get<std::int64_t>();
      SpinConfig cfg{ck.arrays[3 * k]};
      if (augmented)
        ch.aug->set_config(cfg);
      else
        ch.cfg = cfg;
      restore_rng(ch.generator(), ck.rng_states[k]);
      ch.rec.rows = ck.arrays[3 * k + 1];
      if (ck.arrays[3 * k + 2].size() != 1) throw Corruption("resume: checkpoint layout");
      ch.acceptance_sum = ck.arrays[3 * k + 2][0];
    }
  }
  auto checkpoint = [&] {
    Checkpoint ck;
    ck.meta = {{"subcommand", "simulate-spin"}, {"config", immutable_part(c)}, {"done", Json::array()}};
    for (auto& ch : chains) {
      ck.meta["done"].push_back(ch.done);
      ck.rng_states.push_back(rng_state(ch.generator()));
      ck.arrays.push_back(ch.state().theta);
      ck.arrays.push_back(ch.rec.rows);
      ck.arrays.push_back({ch.acceptance_sum});
    }
    out.write("checkpoint.bin", encode_checkpoint(ck));
    out.write_manifest(false);
  };
  const std::int64_t total = p.burn_in + p.sweeps;
  const std::int64_t stop = g.stop_after > 0 ? std::min(total, g.stop_after) : total;
  const std::int64_t every = c.integer("checkpoint_every");
  std::int64_t at = chains[0].done;
  while (at < stop) {
    std::int64_t next = stop;
    if (every > 0) next = std::min(stop, (at / every + 1) * every);
    advance_all(chains, next, p.burn_in, p.thin, p.width, g.threads);
    at = next;
    if (every > 0 && at < stop) checkpoint();
  }
  checkpoint();
  Json summary = {{"sweeps_done", at}, {"complete", at == total}};
  if (at == total) {
    if (!augmented) {
      Json acc = Json::array();
      for (auto& ch : chains) acc.push_back(ch.acceptance_sum / static_cast<double>(total));
      summary["acceptance"] = acc;
    }
    auto est = estimate_correlations(chains[0].rec, chains[1].rec, static_cast<int>(c.integer("batches")));
    out.write("estimates.csv", estimates_csv(est));
    if (lattice == "graph") {
      auto ex = graph_quadrature(graph, p.model, p.beta, static_cast<int>(c.integer("x")),
                                 static_cast<int>(c.integer("y")));
      std::ostringstream os;
      os << "observable,exact\n";
      os << "cc," << csv_real(ex.cc) << "\ncx," << csv_real(ex.cx) << "\ncy," << csv_real(ex.cy) << "\nss,"
         << csv_real(ex.ss) << "\ncos_minus," << csv_real(ex.cos_minus) << "\ncos_plus," << csv_real(ex.cos_plus)
         << "\nsx," << csv_real(ex.sx) << "\n";
      out.write("quadrature.csv", os.str());
    }
  }
  out.summary() = summary;
  return 0;
}

// ------------------------------------------------------ simulate-interface

int cmd_simulate_interface(const Config& c, RunOutputs& out, const GlobalOptions& g) {
  PotentialSpec spec;
  spec.beta = c.real("beta");
  spec.n_max = static_cast<int>(c.integer("n_max"));
  spec.charges = c.boolean("charges");
  spec.activity_order = static_cast<int>(c.integer("activity_order"));
  validate(spec);
  LatticeBox box(3, static_cast<int>(c.integer("L")));
  std::shared_ptr<const ChargePool> pool;
  if (spec.charges) {
    const int cap = static_cast<int>(c.integer("charge_cap"));
    pool = std::make_shared<ChargePool>(enumerate_charges(box, cap), cap);
  }
  InterfaceModel model(box, spec, pool);
  const double dt = c.real("dt") > 0 ? c.real("dt") : model.default_dt();
  if (dt > model.max_dt()) throw StabilityError("simulate-interface: dt exceeds the explicit stability bound");
  const std::int64_t steps = c.integer("steps"), burn = c.integer("burn_in"), thin = c.integer("thin");
  if (steps < 1 || burn < 0 || thin < 1) throw InvalidArgument("simulate-interface: bad step counts");
  const int r_max = static_cast<int>(c.integer("r_max"));
  if (r_max < 0 || r_max > box.L - 1) throw InvalidArgument("simulate-interface: r_max must lie in [0, L - 1]");

  const std::int64_t o = box.site_index(Site(3, 0));
  std::vector<std::vector<std::int64_t>> ring(r_max + 1);
  for (int r = 0; r <= r_max; ++r) {
    if (r == 0) {
      ring[0].push_back(o);
      continue;
    }
    for (int k = 0; k < 3; ++k)
      for (int sgn : {-1, 1}) ring[r].push_back(box.site_index(unit(3, k, sgn * r)));
  }
  const int width = 7 + r_max + 1 + 2;  // step, h1, h2, h3, phi(0) x3, ring products, wick pair
  RealForm phi = model.zero();
  std::mt19937_64 rng(stream_seed(static_cast<std::uint64_t>(c.integer("seed")), "langevin", 0));
  std::vector<double> rows;
  std::int64_t done = 0;
  if (!g.resume.empty()) {
    Checkpoint ck = load_checkpoint(g.resume);
    if (ck.meta.value("subcommand", "") != "simulate-interface")
      throw InvalidArgument("resume: not a simulate-interface checkpoint");
    check_resume_config(ck.meta["config"], c);
    if (ck.rng_states.size() != 1 || ck.arrays.size() != 2 || ck.arrays[0].size() != phi.size())
      throw Corruption("resume: checkpoint layout");
    done = ck.meta["done"].get<std::int64_t>();
    phi.data() = ck.arrays[0];
    rows = ck.arrays[1];
    restore_rng(rng, ck.rng_states[0]);
  }
  auto row_text = [&](const double* r) {
    std::string s = std::to_string(static_cast<std::int64_t>(r[0]));
    for (int i = 1; i < 7; ++i) s += "," + csv_real(r[i]);
    return s + "\n";
  };
  const std::string trace_name = "trace.csv";
  std::ofstream trace(out.path(trace_name), std::ios::binary | std::ios::trunc);
  trace << "step,h1,h2,h3,phi0_12,phi0_13,phi0_23\n";
  for (std::size_t i = 0; i + width <= rows.size(); i += width) trace << row_text(&rows[i]);
  auto checkpoint = [&] {
    Checkpoint ck;
    ck.meta = {{"subcommand", "simulate-interface"}, {"config", immutable_part(c)}, {"done", done}};
    ck.rng_states.push_back(rng_state(rng));
    ck.arrays.push_back(phi.data());
    ck.arrays.push_back(rows);
    out.write("checkpoint.bin", encode_checkpoint(ck));
    out.write_manifest(false);
  };
  const std::int64_t total = burn + steps;
  const std::int64_t stop = g.stop_after > 0 ? std::min(total, g.stop_after) : total;
  const std::int64_t every = c.integer("checkpoint_every");
  while (done < stop) {
    model.langevin_step(phi, dt, rng);
    ++done;
    const std::int64_t k = done - burn;
    if (k > 0 && k % thin == 0) {
      std::vector<double> r(width, 0.0);
      auto e = model.energy_parts(phi);
      r[0] = static_cast<double>(done);
      r[1] = e.h1;
      r[2] = e.h2;
      r[3] = e.h3;
      for (int a = 0; a < 3; ++a) r[4 + a] = phi.at(o, a);
      for (int rr = 0; rr <= r_max; ++rr) {
        double acc = 0.0;
        for (auto s : ring[rr])
          for (int a = 0; a < 3; ++a) acc += phi.at(o, a) * phi.at(s, a);
        r[7 + rr] = acc / (3.0 * ring[rr].size());
      }
      r[8 + r_max] = phi.at(o, 0);
      r[9 + r_max] = r_max >= 1 ? phi.at(ring[1][1], 0) : phi.at(o, 0);
      rows.insert(rows.end(), r.begin(), r.end());
      trace << row_text(r.data());
    }
    if (every > 0 && done % every == 0 && done < stop) checkpoint();
  }
  trace.close();
  out.add_existing(trace_name);
  checkpoint();
  Json summary = {{"steps_done", done}, {"complete", done == total}, {"dt", dt}};
  if (done == total) {
    const int batches = static_cast<int>(c.integer("batches"));
    const std::size_t n = rows.size() / width;
    auto column = [&](int col) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = rows[i * width + col];
      return v;
    };
    auto gcol = dirichlet_green_column(box, Site(3, 0));
    std::ostringstream os;
    os << "r,covariance,se,gaussian_reference,ratio\n";
    for (int rr = 0; rr <= r_max; ++rr) {
      auto est = batch_mean_estimate(column(7 + rr), batches);
      const double ref = spec.beta * gcol[ring[rr][0]];
      os << rr << "," << csv_real(est.mean) << "," << csv_real(est.se) << "," << csv_real(ref) << ","
         << csv_real(est.mean / ref) << "\n";
    }
    out.write("covariance.csv", os.str());
    auto w = wick_square_covariance(column(8 + r_max), column(9 + r_max), batches);
    std::ostringstream ws;
    ws << "quantity,mean,se\n";
    ws << "square_covariance," << csv_real(w.lhs.mean) << "," << csv_real(w.lhs.se) << "\n";
    ws << "twice_covariance_squared," << csv_real(w.rhs.mean) << "," << csv_real(w.rhs.se) << "\n";
    ws << "ratio," << csv_real(w.ratio.mean) << "," << csv_real(w.ratio.se) << "\n";
    out.write("wick.csv", ws.str());
  }
  out.summary() = summary;
  return 0;
}

// ------------------------------------------------------------ metric-graph

int cmd_metric_graph(const Config& c, RunOutputs& out) {
  auto graph = parse_graph(c.text("graph"));
  const double beta = c.real("beta");
  std::vector<int> ns;
  for (auto n : c.int_list("n_list")) ns.push_back(static_cast<int>(n));
  auto rows = metric_graph_convergence(graph, beta, static_cast<int>(c.integer("x")), static_cast<int>(c.integer("y")),
                                       ns, c.real("tol"));
  std::ostringstream os;
  os << "n,xy_cc,villain_cc,gap_cc,xy_ss,villain_ss,gap_ss,semigroup_l1_gap\n";
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i > 0 && !(r.gap_cc < rows[i - 1].gap_cc)) monotone = false;
    os << r.n << "," << csv_real(r.xy_cc) << "," << csv_real(r.villain_cc) << "," << csv_real(r.gap_cc) << ","
       << csv_real(r.xy_ss) << "," << csv_real(r.villain_ss) << "," << csv_real(r.gap_ss) << ","
       << csv_real(semigroup_l1_gap(beta, r.n)) << "\n";
  }
  out.write("metric_graph.csv", os.str());
  out.summary() = {{"gap_monotone", monotone}, {"final_gap", rows.empty() ? 0.0 : rows.back().gap_cc}};
  return 0;
}

// ------------------------------------------------------------- heat-kernel

std::string encode_slice(const HeatKernelSlice& s, const LatticeBox& box) {
  std::ostringstream os(std::ios::binary);
  os.write("VWBHKSL1", 8);
  os.write(reinterpret_cast<const char*>(&s.t), sizeof(double));
  const std::int32_t hdr[2] = {static_cast<std::int32_t>(box.d), static_cast<std::int32_t>(s.ncomp)};
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  for (int v : s.source) {
    const std::int32_t x = v;
    os.write(reinterpret_cast<const char*>(&x), sizeof x);
  }
  // one 2-form per source component
  for (int b = 0; b < s.ncomp; ++b) {
    RealForm f(box, 2);
    for (std::int64_t x = 0; x < box.num_sites(); ++x)
      for (int a = 0; a < s.ncomp; ++a) f.at(x, a) = s.entry(x, a, b);
    write_form(os, f);
  }
  return os.str();
}

int cmd_heat_kernel(const Config& c, RunOutputs& out) {
  PotentialSpec spec;
  spec.beta = c.real("beta");
  spec.n_max = static_cast<int>(c.integer("n_max"));
  spec.charges = c.boolean("charges");
  spec.activity_order = static_cast<int>(c.integer("activity_order"));
  validate(spec);
  LatticeBox box(3, static_cast<int>(c.integer("L")));
  std::shared_ptr<const ChargePool> pool;
  if (spec.charges) {
    const int cap = static_cast<int>(c.integer("charge_cap"));
    pool = std::make_shared<ChargePool>(enumerate_charges(box, cap), cap);
  }
  InterfaceModel model(box, spec, pool);
  const std::string domain = c.text("domain");
  if (domain != "periodic" && domain != "dirichlet") throw InvalidArgument("heat-kernel: unknown domain");
  SpatialOperator op(model, domain == "periodic" ? KernelDomain::kPeriodic : KernelDomain::kDirichlet, spec.charges);
  const double dt = c.real("dt") > 0 ? c.real("dt") : op.default_dt();
  auto ladder = c.real_list("ladder");
  if (ladder.empty()) throw InvalidArgument("heat-kernel: empty ladder");
  std::vector<int> steps;
  for (double t : ladder) {
    if (t < 0) throw InvalidArgument("heat-kernel: negative time in the ladder");
    steps.push_back(static_cast<int>(std::lround(t / dt)));
  }
  if (!std::is_sorted(steps.begin(), steps.end())) throw InvalidArgument("heat-kernel: ladder must ascend");
  const std::string traj = c.text("trajectory");
  const std::uint64_t seed = stream_seed(static_cast<std::uint64_t>(c.integer("seed")), "heat-trajectory", 0);
  std::vector<HeatKernelSlice> slices;
  const Site source = c.site("source");
  if (traj == "frozen") {
    RealForm zero = model.zero();
    slices = evolve_kernel(op, [&zero](int) -> const RealForm& { return zero; }, dt, source, steps);
  } else if (traj == "langevin") {
    RealForm phi = model.zero();
    std::mt19937_64 rng(seed);
    for (std::int64_t k = 0; k < c.integer("burn_in"); ++k) model.langevin_step(phi, dt, rng);
    LangevinStream stream(model, phi, dt, splitmix64(seed));
    slices = evolve_kernel(op, std::ref(stream), dt, source, steps);
  } else {
    throw InvalidArgument("heat-kernel: trajectory must be frozen or langevin");
  }
  if (c.boolean("dump_slices"))
    for (std::size_t i = 0; i < slices.size(); ++i)
      out.write("kernel_" + std::to_string(i) + ".bin", encode_slice(slices[i], box));
  const std::int64_t ys = box.site_index(source);
  std::ostringstream os;
  os << "t,kernel_at_source,scaled\n";
  for (const auto& s : slices)
    os << csv_real(s.t) << "," << csv_real(s.frobenius(ys)) << ","
       << csv_real(s.frobenius(ys) * std::pow(std::max(1.0, s.t), 1.5)) << "\n";
  out.write("diagonal.csv", os.str());
  Json summary = {{"dt", dt}, {"operator_norm_bound", op.norm_bound()}};
  if (source == Site(3, 0)) {
    auto rep = nash_aronson_check(slices, box);
    summary["on_diagonal_constant"] = rep.on_diagonal_constant;
    summary["on_diagonal_growth_exponent"] = rep.growth_exponent;
    summary["on_diagonal_bounded"] = rep.on_diagonal_bounded;
    summary["profile_decreasing"] = rep.profile_decreasing;
    summary["fitted_constant"] = rep.fitted_constant;
    summary["violations"] = rep.violations;
  }
  out.summary() = summary;
  return 0;
}

// --------------------------------------------------------------- fit-decay

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

int cmd_fit_decay(const Config& c, RunOutputs& out) {
  std::istringstream in(read_file(c.text("input")));
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("fit-decay: empty input");
  auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int cr = col("r"), cm = col("mean"), cs = col("se"), co = col("observable");
  if (cr < 0 || cm < 0 || cs < 0) throw InvalidArgument("fit-decay: input needs columns r, mean and se");
  const std::string want = c.text("observable");
  if (!want.empty() && co < 0) throw InvalidArgument("fit-decay: input has no observable column");
  std::vector<DecayPoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (static_cast<int>(f.size()) != static_cast<int>(header.size()))
      throw InvalidArgument("fit-decay: ragged row '" + line + "'");
    if (!want.empty() && f[co] != want) continue;
    pts.push_back({std::stod(f[cr]), std::stod(f[cm]), std::stod(f[cs])});
  }
  const std::string model = c.text("model");
  if (model != "power" && model != "powerlog") throw InvalidArgument("fit-decay: model must be power or powerlog");
  auto fit = fit_decay(pts, model == "power" ? DecayModel::kPower : DecayModel::kPowerLog,
                       static_cast<std::uint64_t>(c.integer("seed")), static_cast<int>(c.integer("bootstrap")));
  std::ostringstream os;
  os << "exponent,ci_low,ci_high,kappa,kappa_ci_low,kappa_ci_high,amplitude,used_points\n";
  os << csv_real(fit.exponent) << "," << csv_real(fit.ci_low) << "," << csv_real(fit.ci_high) << ","
     << csv_real(fit.kappa) << "," << csv_real(fit.kappa_ci_low) << "," << csv_real(fit.kappa_ci_high) << ","
     << csv_real(fit.amplitude) << "," << fit.used_points << "\n";
  out.write("fit.csv", os.str());
  out.summary() = {{"exponent", fit.exponent}, {"warnings", fit.warnings}};
  return 0;
}

// ------------------------------------------------------------------ verify

int cmd_verify(const Config& c, RunOutputs& out, const GlobalOptions& g) {
  std::vector<int> ids;
  for (auto v : c.int_list("criteria")) ids.push_back(static_cast<int>(v));
  if (ids.empty())
    for (int i = 1; i <= acceptance::criterion_count(); ++i) ids.push_back(i);
  acceptance::Options ao;
  ao.cli_path = std::filesystem::read_symlink("/proc/self/exe").string();
  ao.work_dir = out.dir() / "verify_work";
  ao.threads = g.threads;
  std::ostringstream os;
  os << "criterion,name,result,seconds,detail\n";
  bool all = true;
  Json summary = Json::object();
  for (int id : ids) {
    auto r = acceptance::run_criterion(id, ao);
    std::cout << acceptance::format_line(r) << std::endl;
    all = all && r.pass;
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    os << id << "," << r.name << "," << (r.pass ? "PASS" : "FAIL") << "," << csv_real(r.seconds) << "," << detail
       << "\n";
    summary[std::to_string(id)] = r.pass ? "PASS" : "FAIL";
  }
  out.write("verify.csv", os.str());
  out.summary() = summary;
  return all ? 0 : 1;
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"green",        "charges",     "verify-sums", "simulate-spin",
                                              "simulate-interface", "metric-graph", "heat-kernel", "fit-decay",
                                              "verify"};
  return names;
}

const Schema& schema_for(const std::string& subcommand) {
  auto it = schemas().find(subcommand);
  if (it == schemas().end()) throw InvalidArgument("unknown subcommand '" + subcommand + "'");
  return it->second;
}

std::string describe_schema(const Schema& schema) {
  static const char* type_names[] = {"int", "real", "bool", "string", "int list", "real list", "site"};
  std::ostringstream os;
  for (const auto& k : schema.keys) {
    os << "  " << k.name << " (" << type_names[static_cast<int>(k.type)] << ")";
    if (k.required)
      os << " required";
    else
      os << " default '" << k.fallback << "'";
    os << ": " << k.doc << "\n";
  }
  return os.str();
}

int run_subcommand(const std::string& subcommand, const GlobalOptions& opt) {
  const Schema& schema = schema_for(subcommand);
  Config config;
  if (opt.config.empty()) {
    if (subcommand != "verify") throw InvalidArgument(subcommand + ": --config is required");
    config = Config(schema, {});
  } else {
    config = load_config(schema, opt.config);
  }
  if (opt.seed) config.set_text("seed", std::to_string(*opt.seed));
  const int threads = opt.reproducible ? 1 : std::max(1, opt.threads);
  if (!opt.resume.empty() && subcommand != "simulate-spin" && subcommand != "simulate-interface")
    throw InvalidArgument(subcommand + ": --resume applies to the simulate subcommands only");
  GlobalOptions g = opt;
  g.threads = threads;
  RunOutputs out(opt.out_dir, subcommand, config, static_cast<std::uint64_t>(config.integer("seed")), threads,
                 opt.reproducible);
  int status = 0;
  if (subcommand == "green") status = cmd_green(config, out);
  else if (subcommand == "charges") status = cmd_charges(config, out);
  else if (subcommand == "verify-sums") status = cmd_verify_sums(config, out);
  else if (subcommand == "simulate-spin") status = cmd_simulate_spin(config, out, g);
  else if (subcommand == "simulate-interface") status = cmd_simulate_interface(config, out, g);
  else if (subcommand == "metric-graph") status = cmd_metric_graph(config, out);
  else if (subcommand == "heat-kernel") status = cmd_heat_kernel(config, out);
  else if (subcommand == "fit-decay") status = cmd_fit_decay(config, out);
  else if (subcommand == "verify") status = cmd_verify(config, out, g);
  // a run stopped early keeps an unfinished manifest
  if (out.summary().value("complete", true))
    out.finish();
  else
    out.write_manifest(false);
  return status;
}

}  // namespace vwb::run
