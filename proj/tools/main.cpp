#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isqp/io.hpp"
#include "isqp/isqp.hpp"

namespace {

using namespace isqp;
using io::json;

constexpr int kExitOptimal = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitIterationLimit = 3;
constexpr int kExitFailed = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exitCodeFor(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return kExitOptimal;
    case SolveStatus::Infeasible:
      return kExitInfeasible;
    case SolveStatus::IterationLimit:
      return kExitIterationLimit;
    case SolveStatus::Failed:
      return kExitFailed;
  }
  return kExitFailed;
}

struct SolveArgs {
  std::string problem;
  double tol = 1e-8;
  double tolInfeas = 1e-6;
  int maxIter = 300;
  double phi0 = 1.0;
  double sigma1 = 1.0;
  double sigma2 = 10.0;
  bool noCr = false;
  bool noNormalize = false;
  std::string x0 = "zeros";
  std::string trace;
};

struct GenArgs {
  Index m = 0, n = 0, p = 0;
  std::string kind = "sc";
  bool infeasible = false;
  std::uint64_t seed = 0;
  std::string out;
};

struct BenchArgs {
  Index m = 2000;
  std::vector<Index> ns{10, 20, 50, 100};
  std::string p = "half";
  std::string kind = "sc";
  int reps = 20;
  std::uint64_t seed = 0;
  bool infeasible = false;
  bool noCr = false;
  bool noTiming = false;
};

struct SvmArgs {
  std::string data;
  double tau = 1.0;
  bool hardOnly = false;
};

HessianKind parseKind(const std::string& kind) {
  if (kind == "sc") return HessianKind::StronglyConvex;
  if (kind == "lp") return HessianKind::Linear;
  throw UsageError("--kind must be sc or lp");
}

Vector startPoint(const std::string& spec, Index n) {
  if (spec == "zeros") return Vector::Zero(n);
  if (spec.rfind("random:", 0) == 0) {
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(spec.substr(7));
    } catch (const std::exception&) {
      throw UsageError("--x0 random:SEED needs an integer seed");
    }
    Rng rng(seed);
    return rng.normalVector(n);
  }
  const Vector x0 = io::vectorFrom(io::readJsonFile(spec), "x0");
  if (x0.size() != n) throw UsageError("--x0 file must hold n numbers");
  return x0;
}

SolveOptions optionsFrom(const SolveArgs& a) {
  SolveOptions opts;
  opts.tol = a.tol;
  opts.tolInfeas = a.tolInfeas;
  opts.maxIter = a.maxIter;
  opts.phi0 = a.phi0;
  opts.sigma1 = a.sigma1;
  opts.sigma2 = a.sigma2;
  opts.constraintReduction = !a.noCr;
  opts.normalize = !a.noNormalize;
  return opts;
}

int runSolve(const SolveArgs& a) {
  if (!(a.tol > 0.0) || !(a.tolInfeas > 0.0) || a.maxIter < 0 || !(a.phi0 > 0.0)) {
    throw UsageError("tolerances and --phi0 must be positive, --max-iter nonnegative");
  }
  const CqpProblem prob = io::readProblem(a.problem);
  const Vector x0 = startPoint(a.x0, prob.n);
  const SolveReport report = solve(prob, x0, optionsFrom(a));
  if (!a.trace.empty()) {
    std::ofstream out(a.trace);
    if (!out) throw io::ParseError("cannot write " + a.trace);
    io::writeTraceCsv(out, report.trace);
  }
  std::cout << io::reportToJson(report).dump(1) << '\n';
  return exitCodeFor(report.status);
}

int runGen(const GenArgs& a) {
  const HessianKind kind = parseKind(a.kind);
  if (a.n <= 0 || a.m < 0 || a.p < 0 || a.p > a.n || a.m + a.p == 0) {
    throw UsageError("need n > 0, m + p > 0 and 0 <= p <= n");
  }
  if (a.infeasible && a.m < 2) throw UsageError("--infeasible needs m >= 2");
  const GenSpec spec{a.m, a.n, a.p, kind, !a.infeasible, a.seed};
  if (a.infeasible) {
    io::writeJsonFile(a.out, io::problemToJson(randomInfeasible(spec)));
  } else {
    const auto [prob, xFeas] = randomFeasible(spec);
    io::writeJsonFile(a.out, io::problemToJson(prob));
    io::writeJsonFile(a.out + ".xfeas.json", io::toJson(xFeas));
  }
  return kExitOptimal;
}

std::uint64_t instanceSeed(std::uint64_t seed, Index n, int rep) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ULL;
  h ^= static_cast<std::uint64_t>(n) * 0xBF58476D1CE4E5B9ULL;
  h ^= static_cast<std::uint64_t>(rep) * 0x94D049BB133111EBULL;
  return h;
}

int runBench(const BenchArgs& a) {
  if (a.reps <= 0) throw UsageError("--reps must be positive");
  if (a.p != "half" && a.p != "0") throw UsageError("--p must be half or 0");
  const HessianKind kind = parseKind(a.kind);
  SolveOptions opts;
  opts.constraintReduction = !a.noCr;

  std::cout << "kind,m,n,p,reps,mean_iters,mean_time_ms,failures,"
               "mean_phi_increases,false_positive_count\n";
  for (Index n : a.ns) {
    if (n <= 0) throw UsageError("--n entries must be positive");
    const Index p = a.p == "half" ? n / 2 : 0;
    if (a.infeasible && a.m < 2) throw UsageError("--infeasible needs m >= 2");
    double iters = 0.0, timeMs = 0.0, phiInc = 0.0;
    int failures = 0, falsePositives = 0;
    for (int rep = 0; rep < a.reps; ++rep) {
      const std::uint64_t s = instanceSeed(a.seed, n, rep);
      const GenSpec spec{a.m, n, p, kind, !a.infeasible, s};
      const CqpProblem prob =
          a.infeasible ? randomInfeasible(spec) : randomFeasible(spec).first;
      const StartPoint sp = infeasibleStartPoint(prob, ~s);
      const SolveReport r = solve(prob, sp.x0, opts);
      iters += r.iterations;
      timeMs += r.solveTimeMs;
      phiInc += r.phiIncreases;
      const SolveStatus expected =
          a.infeasible ? SolveStatus::Infeasible : SolveStatus::Optimal;
      if (r.status != expected) ++failures;
      if (!a.infeasible && r.status == SolveStatus::Infeasible) ++falsePositives;
    }
    const double reps = a.reps;
    std::ostringstream row;
    row << std::setprecision(10) << a.kind << ',' << a.m << ',' << n << ',' << p
        << ',' << a.reps << ',' << iters / reps << ',';
    if (a.noTiming) {
      row << "NA";
    } else {
      row << timeMs / reps;
    }
    row << ',' << failures << ',' << phiInc / reps << ',' << falsePositives;
    std::cout << row.str() << '\n' << std::flush;
  }
  return kExitOptimal;
}

double accuracy(const SvmData& data, const Vector& w, double beta) {
  const Vector score = data.patterns * w - Vector::Constant(data.labels.size(), beta);
  int correct = 0;
  for (Index i = 0; i < score.size(); ++i) {
    if (score[i] * data.labels[i] > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(score.size());
}

int runSvm(const SvmArgs& a) {
  if (!(a.tau > 0.0)) throw UsageError("--tau must be positive");
  const SvmData data = io::readSvmCsv(a.data);
  const Index nbar = data.patterns.cols();

  const CqpProblem hard = svmProblem(data);
  const SolveReport hardReport = solve(hard, Vector::Zero(hard.n));
  json out;
  out["hard"] = io::reportToJson(hardReport);

  const SolveReport* used = &hardReport;
  SolveReport softReport;
  out["formulation"] = "hard";
  if (hardReport.status == SolveStatus::Infeasible && !a.hardOnly) {
    const CqpProblem soft = svmRelaxedProblem(data, a.tau);
    softReport = solve(soft, Vector::Zero(soft.n));
    out["relaxed"] = io::reportToJson(softReport);
    out["formulation"] = "relaxed";
    used = &softReport;
  }

  const Vector w = used->x.head(nbar);
  const double beta = used->x[nbar];
  out["status"] = toString(used->status);
  out["w"] = io::toJson(w);
  out["beta"] = beta;
  if (used == &softReport) out["nu"] = used->x[nbar + 1];
  const double wNorm = w.norm();
  out["margin"] = wNorm > 0.0 ? json(2.0 / wNorm) : json(nullptr);
  out["accuracy"] = accuracy(data, w, beta);
  std::cout << out.dump(1) << '\n';
  return exitCodeFor(used->status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infeasible-start convex QP solver"};
  app.require_subcommand(1);

  SolveArgs solveArgs;
  auto* solveCmd = app.add_subcommand("solve", "Solve a problem file, print a JSON report");
  solveCmd->add_option("problem", solveArgs.problem, "Problem JSON file")->required();
  solveCmd->add_option("--tol", solveArgs.tol, "Optimality tolerance");
  solveCmd->add_option("--tol-infeas", solveArgs.tolInfeas, "Certificate residual tolerance");
  solveCmd->add_option("--max-iter", solveArgs.maxIter, "Iteration limit");
  solveCmd->add_option("--phi0", solveArgs.phi0, "Initial penalty parameter");
  solveCmd->add_option("--sigma1", solveArgs.sigma1, "Penalty threshold factor");
  solveCmd->add_option("--sigma2", solveArgs.sigma2, "Penalty growth factor");
  solveCmd->add_flag("--no-cr", solveArgs.noCr, "Disable constraint reduction");
  solveCmd->add_flag("--no-normalize", solveArgs.noNormalize, "Skip row normalization");
  solveCmd->add_option("--x0", solveArgs.x0, "Start point: file, zeros or random:SEED");
  solveCmd->add_option("--trace", solveArgs.trace, "Write the iteration trace as CSV");

  GenArgs genArgs;
  auto* genCmd = app.add_subcommand("gen", "Generate a random problem");
  genCmd->add_option("--m", genArgs.m)->required();
  genCmd->add_option("--n", genArgs.n)->required();
  genCmd->add_option("--p", genArgs.p);
  genCmd->add_option("--kind", genArgs.kind, "sc or lp");
  genCmd->add_flag("--infeasible", genArgs.infeasible);
  genCmd->add_option("--seed", genArgs.seed);
  genCmd->add_option("-o,--out", genArgs.out, "Output JSON file")->required();

  BenchArgs benchArgs;
  auto* benchCmd = app.add_subcommand("bench", "Benchmark sweep over n, CSV on stdout");
  benchCmd->add_option("--m", benchArgs.m);
  benchCmd->add_option("--n", benchArgs.ns)->delimiter(',');
  benchCmd->add_option("--p", benchArgs.p, "half or 0");
  benchCmd->add_option("--kind", benchArgs.kind, "sc or lp");
  benchCmd->add_option("--reps", benchArgs.reps);
  benchCmd->add_option("--seed", benchArgs.seed);
  benchCmd->add_flag("--infeasible", benchArgs.infeasible);
  benchCmd->add_flag("--no-cr", benchArgs.noCr);
  benchCmd->add_flag("--no-timing", benchArgs.noTiming, "Print NA for mean_time_ms");

  SvmArgs svmArgs;
  auto* svmCmd = app.add_subcommand("svm", "Train a linear SVM from a CSV file");
  svmCmd->add_option("data", svmArgs.data, "Patterns with a +-1 label column")->required();
  svmCmd->add_option("--tau", svmArgs.tau, "Penalty on the relaxation variable");
  svmCmd->add_flag("--hard-only", svmArgs.hardOnly);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*solveCmd) return runSolve(solveArgs);
    if (*genCmd) return runGen(genArgs);
    if (*benchCmd) return runBench(benchArgs);
    if (*svmCmd) return runSvm(svmArgs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const isqp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
