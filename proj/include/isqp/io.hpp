#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isqp/driver.hpp"
#include "isqp/errors.hpp"
#include "isqp/gen.hpp"
#include "isqp/problem.hpp"

namespace isqp::io {

using nlohmann::json;

class ParseError : public Error {
 public:
  using Error::Error;
};

inline json toJson(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline json toJson(const RowMatrix& a) {
  json out = json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

inline Vector vectorFrom(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(what) + " must hold numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline RowMatrix matrixFrom(const json& j, Index cols, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array of rows");
  RowMatrix a(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vectorFrom(j[i], what);
    if (row.size() != cols) {
      throw DimensionMismatch(std::string(what) + " row " + std::to_string(i) +
                              " does not have n entries");
    }
    a.row(static_cast<Index>(i)) = row.transpose();
  }
  return a;
}

/// Reads a problem from the JSON object format
/// {"n","m","p","H":{"diag":[..]}|{"dense":[[..]]},"c","A","b","C","d"}.
/// The result is not validated.
inline CqpProblem problemFromJson(const json& j) {
  if (!j.is_object()) throw ParseError("problem must be a JSON object");
  for (const char* key : {"n", "m", "H", "c"}) {
    if (!j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
  }
  CqpProblem prob;
  prob.n = j.at("n").get<Index>();
  prob.m = j.at("m").get<Index>();
  prob.p = j.value("p", Index{0});
  const json& h = j.at("H");
  if (h.contains("diag")) {
    prob.H = Hessian::diagonal(vectorFrom(h.at("diag"), "H.diag"));
  } else if (h.contains("dense")) {
    const RowMatrix dense = matrixFrom(h.at("dense"), prob.n, "H.dense");
    prob.H = Hessian::dense(Eigen::MatrixXd(dense));
  } else {
    throw ParseError("H must have a \"diag\" or \"dense\" field");
  }
  prob.c = vectorFrom(j.at("c"), "c");
  prob.A = j.contains("A") ? matrixFrom(j.at("A"), prob.n, "A") : RowMatrix(0, prob.n);
  prob.b = j.contains("b") ? vectorFrom(j.at("b"), "b") : Vector(0);
  prob.C = j.contains("C") ? matrixFrom(j.at("C"), prob.n, "C") : RowMatrix(0, prob.n);
  prob.d = j.contains("d") ? vectorFrom(j.at("d"), "d") : Vector(0);
  return prob;
}

inline json problemToJson(const CqpProblem& prob) {
  json j;
  j["n"] = prob.n;
  j["m"] = prob.m;
  j["p"] = prob.p;
  if (prob.H.isDiagonal()) {
    j["H"] = {{"diag", toJson(prob.H.diag())}};
  } else {
    j["H"] = {{"dense", toJson(RowMatrix(prob.H.denseMatrix()))}};
  }
  j["c"] = toJson(prob.c);
  j["A"] = toJson(prob.A);
  j["b"] = toJson(prob.b);
  if (prob.p > 0) {
    j["C"] = toJson(prob.C);
    j["d"] = toJson(prob.d);
  }
  return j;
}

inline json readJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline CqpProblem readProblem(const std::string& path) {
  try {
    return problemFromJson(readJsonFile(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void writeJsonFile(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump(1) << '\n';
}

inline json certificateToJson(const FarkasCertificate& cert) {
  return {{"pi_hat", toJson(cert.piHat)},
          {"omega_hat", toJson(cert.omegaHat)},
          {"gain", cert.gain},
          {"residual", cert.residual},
          {"valid", cert.valid}};
}

inline json relaxationToJson(const RelaxationResult& rel) {
  return {{"b_prime", toJson(rel.bPrime)},
          {"d_plus_shift", toJson(rel.dPlusShift)},
          {"d_minus_shift", toJson(rel.dMinusShift)},
          {"x_feasible", toJson(rel.xFeasible)}};
}

/// Report schema; see README for the field list.
inline json reportToJson(const SolveReport& r, bool withTrace = false) {
  json j;
  j["status"] = toString(r.status);
  j["iterations"] = r.iterations;
  j["err"] = r.err;
  j["objective"] = r.objective;
  j["phi_final"] = r.phiFinal;
  j["phi_increases"] = r.phiIncreases;
  j["solve_time_ms"] = r.solveTimeMs;
  j["x"] = toJson(r.x);
  j["z"] = toJson(r.z);
  j["y"] = toJson(r.y);
  j["duals"] = {{"pi", toJson(r.pi)},
                {"xi", toJson(r.xi)},
                {"eta", toJson(r.eta)},
                {"zeta", toJson(r.zeta)}};
  j["certificate"] = r.certificate ? certificateToJson(*r.certificate) : json(nullptr);
  j["relaxation"] = r.relaxation ? relaxationToJson(*r.relaxation) : json(nullptr);
  j["diagnostic"] = r.diagnostic;
  j["warnings"] = r.warnings;
  if (withTrace) {
    json rows = json::array();
    for (const TraceRow& t : r.trace) {
      rows.push_back({{"iter", t.iter}, {"phi", t.phi}, {"mu", t.mu},
                      {"err", t.err}, {"q_size", t.qSize}, {"obj", t.obj},
                      {"penalty_obj", t.penaltyObj}, {"z_inf_norm", t.zInfNorm}});
    }
    j["trace"] = std::move(rows);
  }
  return j;
}

inline void writeTraceCsv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iter,phi,mu,err,q_size,obj,penalty_obj,z_inf_norm\n";
  out << std::setprecision(17);
  for (const TraceRow& t : trace) {
    out << t.iter << ',' << t.phi << ',' << t.mu << ',' << t.err << ','
        << t.qSize << ',' << t.obj << ',' << t.penaltyObj << ',' << t.zInfNorm
        << '\n';
  }
}

/// One pattern per line, features then a ±1 label in the last column.
/// Blank lines and lines starting with '#' are skipped.
inline SvmData readSvmCsv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(lineNo) + ": not a number: '" + cell + "'");
      }
    }
    if (row.size() < 2) {
      throw ParseError("line " + std::to_string(lineNo) + ": need features and a label");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("line " + std::to_string(lineNo) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("SVM file holds no patterns");
  const auto mbar = static_cast<Index>(rows.size());
  const auto nbar = static_cast<Index>(rows.front().size()) - 1;
  SvmData data{RowMatrix(mbar, nbar), Vector(mbar)};
  for (Index i = 0; i < mbar; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < nbar; ++j) data.patterns(i, j) = row[static_cast<std::size_t>(j)];
    data.labels[i] = row.back();
  }
  return data;
}

inline SvmData readSvmCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return readSvmCsv(in);
}

}  // namespace isqp::io
