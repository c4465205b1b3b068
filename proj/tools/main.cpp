#include <CLI11.hpp>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "wfoms/wfoms.hpp"

using namespace wfoms;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitUnsat = 2;
constexpr int kExitInternal = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Replaces the "domain:" line of a problem file with a fresh size.
std::string rebuild_with_domain(const std::string& text, uint32_t size) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    auto start = line.find_first_not_of(" \t");
    if (start != std::string::npos && line.compare(start, 7, "domain:") == 0)
      out << "domain: " << size << "\n";
    else
      out << line << "\n";
  }
  return out.str();
}

// A problem source is either a file on disk (.mln files get their domain from
// --size) or a preset name.
Problem load_problem(const std::string& source, uint32_t size, uint32_t k) {
  if (std::filesystem::exists(source)) {
    std::string text = read_file(source);
    if (source.size() > 4 && source.substr(source.size() - 4) == ".mln") {
      if (size == 0) throw ParseError("MLN files need --size for the domain");
      return mln_to_wfoms(parse_mln(text), Domain::of_size(size));
    }
    if (size > 0) text = rebuild_with_domain(text, size);
    return parse_problem(text);
  }
  const Preset& preset = find_preset(source);
  if (size == 0) throw ParseError("preset " + preset.name + " needs --size");
  return build_preset(source, size, k);
}

int run_count(const std::string& source, uint32_t size, uint32_t k) {
  Problem p = load_problem(source, size, k);
  Wms sampler(p);
  std::cout << sampler.source_total().get_str() << "\n";
  return kExitOk;
}

struct SampleArgs {
  std::string source;
  uint32_t size = 0;
  uint32_t k = 0;
  uint64_t num_samples = 1;
  uint64_t seed = 0;
  std::string format = "text";
  bool validate = false;
  bool exists_projection = false;
  uint32_t jobs = 1;
};

int run_sample(const SampleArgs& args) {
  Problem p = load_problem(args.source, args.size, args.k);
  SampleOptions options;
  options.validate = args.validate;
  options.exists_projection = args.exists_projection;
  Wms sampler(p, options);
  if (sampler.reduced_total() == 0) {
    std::cerr << "unsatisfiable\n";
    return kExitUnsat;
  }

  // sample i always uses derive_subseed(seed, i), so the output does not
  // depend on the job count; a reorder window keeps the stream in order
  std::mutex mu;
  std::condition_variable cv;
  std::map<uint64_t, std::string> ready;
  uint64_t next_to_print = 0;
  std::atomic<uint64_t> next_index{0};
  std::atomic<bool> failed{false};
  std::string failure;

  auto worker = [&]() {
    while (true) {
      uint64_t i = next_index.fetch_add(1);
      if (i >= args.num_samples || failed.load()) return;
      std::string line;
      try {
        Rng rng(derive_subseed(args.seed, i));
        SampleResult result = sampler.sample(rng);
        line = render_model(result.model, args.format);
      } catch (const std::exception& e) {
        std::scoped_lock lock(mu);
        failed.store(true);
        failure = e.what();
        cv.notify_all();
        return;
      }
      std::scoped_lock lock(mu);
      ready.emplace(i, std::move(line));
      cv.notify_all();
    }
  };

  uint32_t jobs = std::max(1u, args.jobs);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (uint32_t j = 0; j < jobs; ++j) pool.emplace_back(worker);

  {
    std::unique_lock lock(mu);
    while (next_to_print < args.num_samples && !failed.load()) {
      cv.wait(lock, [&] { return failed.load() || ready.count(next_to_print) > 0; });
      while (ready.count(next_to_print) > 0) {
        std::cout << ready[next_to_print] << "\n";
        ready.erase(next_to_print);
        ++next_to_print;
      }
    }
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw SamplerInvariantError(failure);
  return kExitOk;
}

struct TestArgs {
  std::string kind;
  std::string source;
  uint32_t size = 0;
  uint32_t k = 0;
  uint64_t samples = 10000;
  double alpha = 0.05;
  uint64_t seed = 0;
};

int run_test(const TestArgs& args) {
  Problem p = load_problem(args.source, args.size, args.k);
  if (args.kind == "uniformity") {
    Oracle oracle(p);
    if (oracle.model_count() == 0) {
      std::cerr << "unsatisfiable\n";
      return kExitUnsat;
    }
    Wms sampler(p);
    std::vector<std::vector<int64_t>> samples;
    samples.reserve(args.samples);
    for (uint64_t i = 0; i < args.samples; ++i) {
      Rng rng(derive_subseed(args.seed, i));
      int64_t idx = oracle.model_index(sampler.sample(rng).model);
      if (idx < 0) throw SamplerInvariantError("sampled structure is not a model");
      samples.push_back({idx});
    }
    std::map<std::vector<int64_t>, Rational> reference;
    Rational uniform(1, static_cast<unsigned long>(oracle.model_count()));
    uniform.canonicalize();
    for (int64_t m = 0; m < static_cast<int64_t>(oracle.model_count()); ++m)
      reference[{m}] = uniform;
    KsReport report = ks_test(samples, reference, args.alpha);
    std::cout << report.to_json() << "\n";
    return report.pass ? kExitOk : kExitUsage;
  }
  if (args.kind == "countdist") {
    std::vector<std::string> tracked;
    if (!std::filesystem::exists(args.source)) tracked = find_preset(args.source).count_preds;
    if (tracked.empty())
      for (const auto& pred : p.vocabulary) tracked.push_back(pred.name);
    auto reference = count_distribution(p, tracked);
    Wms sampler(p);
    if (sampler.reduced_total() == 0) {
      std::cerr << "unsatisfiable\n";
      return kExitUnsat;
    }
    std::vector<std::vector<int64_t>> samples;
    samples.reserve(args.samples);
    for (uint64_t i = 0; i < args.samples; ++i) {
      Rng rng(derive_subseed(args.seed, i));
      SampleResult result = sampler.sample(rng);
      std::vector<int64_t> key;
      key.reserve(tracked.size());
      for (const auto& pred : tracked)
        key.push_back(static_cast<int64_t>(result.model.count_true(pred)));
      samples.push_back(std::move(key));
    }
    KsReport report = ks_test(samples, reference, args.alpha);
    std::cout << report.to_json() << "\n";
    return report.pass ? kExitOk : kExitUsage;
  }
  if (args.kind == "oracle") {
    Oracle oracle(p);
    Wms sampler(p);
    bool ok = true;
    bool count_ok = sampler.source_total() == oracle.brute_count();
    ok &= count_ok;
    std::cout << "count: lifted=" << sampler.source_total().get_str()
              << " brute=" << oracle.brute_count().get_str() << " -> "
              << (count_ok ? "pass" : "FAIL") << "\n";
    if (oracle.brute_count() > 0) {
      uint64_t runs = std::min<uint64_t>(args.samples, 200);
      bool audit_ok = true;
      for (uint64_t i = 0; i < runs; ++i) {
        Rng rng(derive_subseed(args.seed, i));
        SampleResult result = sampler.sample(rng);
        if (result.probability != oracle.model_probability(result.problem_model)) audit_ok = false;
      }
      ok &= audit_ok;
      std::cout << "audit: " << runs << " runs -> " << (audit_ok ? "pass" : "FAIL") << "\n";
    }
    // recursion identities on random substructures at a reduced domain size
    {
      GeneralProblem gp = normalize(p);
      uint32_t n = std::min<uint32_t>(gp.domain.size(), 3);
      ProblemContext ctx(gp);
      CountContext& c = ctx.branch(0);
      const auto& valid = c.valid_one_types();
      bool identity_ok = true;
      int checked = 0;
      std::mt19937_64 gen(args.seed + 1);
      for (int trial = 0; trial < 20 && !valid.empty() && n >= 2; ++trial) {
        std::vector<uint32_t> elements;
        std::vector<CellType> cells;
        for (uint32_t e = 0; e < n; ++e) {
          elements.push_back(e);
          BlockMask block = gp.full_block() == 0 ? 0 : (gen() % (gp.full_block() + 1));
          cells.push_back({block, valid[gen() % valid.size()]});
        }
        size_t t_pos = gen() % n;
        std::vector<TwoTableId> tables;
        for (uint32_t i = 0; i + 1 < n; ++i)
          tables.push_back(static_cast<TwoTableId>(gen() % ctx.space().num_two_tables()));
        auto thresholds = c.constraints().initial_thresholds();
        if (!check_reduction_identity(gp, c.sigma(), ctx.space(), elements, cells, t_pos, tables,
                                      thresholds, c))
          identity_ok = false;
        ++checked;
      }
      ok &= identity_ok;
      std::cout << "identity: " << checked << " substructures -> "
                << (identity_ok ? "pass" : "FAIL") << "\n";
    }
    return ok ? kExitOk : kExitUsage;
  }
  throw ParseError("unknown test kind: " + args.kind + " (uniformity|countdist|oracle)");
}

int run_preset(const std::string& action, const std::string& name, uint32_t size, uint32_t k) {
  if (action == "list") {
    for (const auto& p : preset_catalog())
      std::cout << p.name << (p.needs_k ? " (needs --k)" : "") << " - " << p.summary << "\n";
    return kExitOk;
  }
  if (action == "describe") {
    const Preset& p = find_preset(name);
    uint32_t n = size == 0 ? 5 : size;
    uint32_t kk = k == 0 ? 2 : k;
    std::cout << "# " << p.name << ": " << p.summary << "\n";
    std::cout << (p.is_mln ? "# MLN source (factors are exact rationals):\n" : "# problem source:\n");
    std::cout << p.source(n, kk);
    Problem built = build_preset(p.name, n, kk);
    std::cout << "# vocabulary:";
    for (const auto& pred : built.vocabulary) std::cout << " " << pred.name << "/" << pred.arity;
    std::cout << "\n";
    if (p.is_mln) {
      std::cout << "# factor weights:";
      for (const auto& [pred, w] : built.weights.entries())
        if (w.first != 1 || w.second != 1)
          std::cout << " " << pred << "=" << w.first.get_str() << "/" << w.second.get_str();
      std::cout << "\n";
    }
    return kExitOk;
  }
  throw ParseError("unknown preset action: " + action + " (list|describe)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact weighted model counting and sampling for two-variable logic"};
  app.require_subcommand(1);

  std::string source, format = "text", test_kind, preset_action, preset_name;
  uint32_t size = 0, k = 0, jobs = 1;
  uint64_t num_samples = 1, seed = 0, test_samples = 10000;
  double alpha = 0.05;
  bool validate = false, exists_projection = false;

  auto* count = app.add_subcommand("count", "print the exact weighted model count");
  count->add_option("problem", source, "problem file, MLN file, or preset name")->required();
  count->add_option("--size", size, "domain size (presets and MLN files)");
  count->add_option("--k", k, "counting parameter for presets that take one");

  auto* sample = app.add_subcommand("sample", "draw models with exact probabilities");
  sample->add_option("problem", source, "problem file, MLN file, or preset name")->required();
  sample->add_option("--size", size, "domain size (presets and MLN files)");
  sample->add_option("--k", k, "counting parameter for presets that take one");
  sample->add_option("-n,--num-samples", num_samples, "number of models to draw");
  sample->add_option("--seed", seed, "random seed; sample i uses subseed(seed, i)");
  sample->add_option("--format", format, "text|json")->check(CLI::IsMember({"text", "json"}));
  sample->add_flag("--validate", validate, "re-check every sample against the sentence");
  sample->add_option("--jobs", jobs, "parallel sampler instances (output independent of J)");
  sample->add_flag("--opt-exists-projection", exists_projection,
                   "two-stage sampling over the existential sub-vocabulary first");

  auto* test = app.add_subcommand("test", "statistical and exact conformity tests");
  test->add_option("kind", test_kind, "uniformity|countdist|oracle")->required();
  test->add_option("problem", source, "problem file, MLN file, or preset name")->required();
  test->add_option("--size", size, "domain size");
  test->add_option("--k", k, "counting parameter");
  test->add_option("--samples", test_samples, "number of samples to draw");
  test->add_option("--alpha", alpha, "significance level");
  test->add_option("--seed", seed, "random seed");

  auto* preset = app.add_subcommand("preset", "list or describe the built-in presets");
  preset->add_option("action", preset_action, "list|describe")->required();
  preset->add_option("name", preset_name, "preset name (for describe)");
  preset->add_option("--size", size, "domain size used in the description");
  preset->add_option("--k", k, "counting parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (count->parsed()) return run_count(source, size, k);
    if (sample->parsed()) {
      SampleArgs args;
      args.source = source;
      args.size = size;
      args.k = k;
      args.num_samples = num_samples;
      args.seed = seed;
      args.format = format;
      args.validate = validate;
      args.exists_projection = exists_projection;
      args.jobs = jobs;
      return run_sample(args);
    }
    if (test->parsed()) {
      TestArgs args;
      args.kind = test_kind;
      args.source = source;
      args.size = size;
      args.k = k;
      args.samples = test_samples;
      args.alpha = alpha;
      args.seed = seed;
      return run_test(args);
    }
    if (preset->parsed()) return run_preset(preset_action, preset_name, size, k);
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const NormalizeError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsatisfiableError& e) {
    std::cerr << "unsatisfiable: " << e.what() << "\n";
    return kExitUnsat;
  } catch (const OracleBoundError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
