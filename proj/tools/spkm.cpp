// spkm: dataset generation, dealer, party runner, self-test and reports.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spkm/bench.hpp"
#include "spkm/budget.hpp"
#include "spkm/dealer.hpp"

using nlohmann::json;
using namespace spkm;

namespace {

Seed seed_arg(const std::string& s) {
  if (s.size() == 32) return seed_from_hex(s);
  return seed_from_u64(std::stoull(s));
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct KMeansFlags {
  std::size_t k = 2, iters = 10, recip = 0;
  double epsilon = 1e-4;
  std::string init = "random";
  bool sparse = false;
  unsigned l = 64, f = 20, key_bits = 2048;
  bool test_keys = false;

  void add(CLI::App* c) {
    c->add_option("-k", k, "clusters");
    c->add_option("--iters", iters, "iteration cap");
    c->add_option("--epsilon", epsilon, "stop threshold");
    c->add_option("--init", init, "random | explicit | local-kmeans");
    c->add_flag("--sparse", sparse, "HE cross terms in S1");
    c->add_option("--ring-bits", l);
    c->add_option("--frac-bits", f);
    c->add_option("--reciprocal-iters", recip);
    c->add_option("--key-bits", key_bits);
    c->add_flag("--allow-test-keys", test_keys);
  }
  KMeansConfig get() const {
    KMeansConfig c;
    c.k = k;
    c.max_iters = iters;
    c.epsilon = epsilon;
    c.init = parse_init(init);
    c.sparse = sparse;
    c.fp = FixedPointConfig{l, f};
    c.reciprocal_iters = recip;
    c.he_key_bits = key_bits;
    c.allow_test_keys = test_keys;
    return c;
  }
};

struct DataFlags {
  SyntheticSpec spec;
  std::string partition = "vertical";

  void add(CLI::App* c) {
    c->add_option("-n", spec.n, "samples");
    c->add_option("-d", spec.d, "features");
    c->add_option("--k-true", spec.k_true, "generating clusters");
    c->add_option("--std", spec.cluster_std, "cluster standard deviation");
    c->add_option("--sparsity", spec.sparsity, "fraction of zero entries");
    c->add_option("--data-seed", spec.seed);
    c->add_option("--partition", partition, "vertical | horizontal");
    c->add_option("--split", spec.split, "columns or rows held by A (0 = half)");
    c->add_option("--outliers", spec.outliers, "uniform outlier rows");
  }
  SyntheticSpec get() const {
    SyntheticSpec s = spec;
    s.mode = parse_partition(partition);
    return s;
  }
};

json job_json(const PartitionSpec& p, const KMeansConfig& k) {
  return {{"k", k.k},
          {"max_iters", k.max_iters},
          {"epsilon", k.epsilon},
          {"init", init_name(k.init)},
          {"partition", partition_name(p.mode)},
          {"sparse", k.sparse},
          {"fixed_point", {{"l", k.fp.l}, {"f", k.fp.f}}},
          {"reciprocal_iters", k.reciprocal_iters},
          {"he_key_bits", k.he_key_bits},
          {"allow_test_keys", k.allow_test_keys},
          {"shape", {{"n_a", p.n_a}, {"n_b", p.n_b}, {"d_a", p.d_a}, {"d_b", p.d_b}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-party secure k-means"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset split between the parties");
  DataFlags gen_data;
  KMeansFlags gen_km;
  std::string gen_out = "data";
  gen_data.add(gen);
  gen_km.add(gen);
  gen->add_option("--out", gen_out, "output directory");

  // dealer
  auto* dealer = app.add_subcommand("dealer", "generate both parties' triple stores");
  std::string job_path, out_a, out_b, dealer_seed;
  dealer->add_option("--job", job_path)->required();
  dealer->add_option("--out-a", out_a)->required();
  dealer->add_option("--out-b", out_b)->required();
  dealer->add_option("--seed", dealer_seed, "32 hex digits or an integer")->required();

  // run
  auto* run = app.add_subcommand("run", "run one party over TCP");
  std::string run_cfg, run_role, run_peer, run_store, run_data, run_report, run_seed, run_label;
  bool run_open = false;
  run->add_option("--config", run_cfg)->required();
  run->add_option("--role", run_role, "A | B");
  run->add_option("--peer", run_peer, "host:port");
  run->add_option("--triples", run_store);
  run->add_option("--data", run_data);
  run->add_option("--report", run_report);
  run->add_option("--seed", run_seed);
  run->add_option("--label", run_label);
  run->add_flag("--open-results", run_open);

  // selftest
  auto* self = app.add_subcommand("selftest", "both parties in-process over loopback");
  DataFlags self_data;
  KMeansFlags self_km;
  std::string self_seed = "1", self_out, self_label = "selftest";
  self_data.add(self);
  self_km.add(self);
  self->add_option("--seed", self_seed);
  self->add_option("--report", self_out, "system report path");
  self->add_option("--label", self_label);

  // report
  auto* rep = app.add_subcommand("report", "compare, merge or check reports");
  std::vector<std::string> rep_compare, rep_merge;
  std::string rep_check, rep_format = "csv", rep_out;
  auto* cmp_opt = rep->add_option("--compare", rep_compare, "two or more reports");
  auto* merge_opt = rep->add_option("--merge", rep_merge, "A and B reports of one run")->expected(2);
  auto* check_opt = rep->add_option("--check", rep_check, "validate one report");
  cmp_opt->excludes(merge_opt)->excludes(check_opt);
  merge_opt->excludes(check_opt);
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"csv", "json"}));
  rep->add_option("--out", rep_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const SyntheticSpec spec = gen_data.get();
      const Dataset ds = gen_dataset(spec);
      write_dataset(spec, ds, gen_out);
      write_text((std::filesystem::path(gen_out) / "job.json").string(),
                 job_json(partition_of(spec), gen_km.get()).dump(2) + "\n");
      std::cout << "wrote " << gen_out << "\n";
    } else if (*dealer) {
      const RunConfig cfg = parse_run_config(json::parse(read_text(job_path)));
      cfg.part.validate();
      cfg.kmeans.validate();
      const TripleBudget budget = compute_budget(job_params(cfg.part, cfg.kmeans));
      const std::size_t records = dealer_generate(budget, seed_arg(dealer_seed), out_a, out_b);
      std::cout << "dealt " << records << " records per party\n";
    } else if (*run) {
      RunConfig cfg = load_run_config(run_cfg);
      if (!run_role.empty()) cfg = parse_run_config({{"role", run_role}}, cfg);
      if (!run_peer.empty()) cfg.peer = Endpoint::parse(run_peer);
      if (!run_store.empty()) cfg.triple_store = run_store;
      if (!run_data.empty()) cfg.data = run_data;
      if (!run_report.empty()) cfg.report = run_report;
      if (!run_seed.empty()) cfg.seed = seed_arg(run_seed);
      if (!run_label.empty()) cfg.label = run_label;
      if (run_open) cfg.kmeans.open_results = true;
      const Report r = run_party(cfg);
      std::cout << "role " << r.role << ": " << r.iterations << " iterations, "
                << (r.converged ? "converged" : "not converged") << "\n";
    } else if (*self) {
      const SelftestResult res = selftest(self_data.get(), self_km.get(), seed_arg(self_seed));
      Report sys = res.system;
      sys.label = self_label;
      if (!self_out.empty()) save_report(sys, self_out);
      std::cout << "iterations " << sys.iterations << (sys.converged ? " (converged)" : "");
      if (sys.oracle_agreement) std::cout << ", oracle agreement " << *sys.oracle_agreement;
      if (sys.jaccard) std::cout << ", jaccard " << *sys.jaccard;
      std::cout << "\n";
    } else if (*rep) {
      if (!rep_compare.empty()) {
        std::vector<Report> rs;
        for (const auto& p : rep_compare) rs.push_back(load_report(p));
        const json table = report_compare(rs);
        write_text(rep_out, rep_format == "csv" ? compare_csv(table) : table.dump(2) + "\n");
      } else if (!rep_merge.empty()) {
        const Report m = merge_reports(load_report(rep_merge[0]), load_report(rep_merge[1]));
        write_text(rep_out, report_to_json(m).dump(2) + "\n");
      } else if (!rep_check.empty()) {
        load_report(rep_check);
        std::cout << rep_check << ": ok\n";
      } else {
        throw std::invalid_argument("report needs --compare, --merge or --check");
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "spkm: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
