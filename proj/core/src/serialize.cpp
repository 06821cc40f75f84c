#include "mpforge/serialize.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "mpforge/error.hpp"

namespace mpforge {

using Json = nlohmann::ordered_json;

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string cell(double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); }

Json prov_object(const Provenance& p) {
  Json j;
  j["command"] = p.command;
  j["config_hash"] = p.config_hash;
  j["seed"] = p.seed;
  j["version"] = p.version;
  return j;
}

struct SeField {
  const char* name;
  double SEStep::*member;
};

constexpr SeField kSeFields[] = {
    {"alpha1", &SEStep::alpha1},     {"alpha2", &SEStep::alpha2},     {"beta1", &SEStep::beta1},
    {"beta2", &SEStep::beta2},       {"gamma1", &SEStep::gamma1},     {"gamma2", &SEStep::gamma2},
    {"tau1", &SEStep::tau1},         {"tau2", &SEStep::tau2},         {"sigma2_1", &SEStep::sigma2_1},
    {"sigma2_2", &SEStep::sigma2_2}, {"rho2_1", &SEStep::rho2_1},     {"rho2_2", &SEStep::rho2_2},
    {"mse_pred", &SEStep::mse_pred}, {"mse_x2", &SEStep::mse_x2},     {"mse_z1", &SEStep::mse_z1},
    {"cx1", &SEStep::cx1},           {"cx2", &SEStep::cx2},           {"cz1", &SEStep::cz1},
    {"cz2", &SEStep::cz2},
};

std::string vec2_key(const char* base, int j) { return fmt::format("{}_{}", base, j + 1); }

}  // namespace

std::string library_version() {
#ifdef MPFORGE_VERSION
  return MPFORGE_VERSION;
#else
  return "unknown";
#endif
}

void write_trace_jsonl(std::ostream& out, const SolverTrace& trace, const RunTag& tag, const Provenance& prov) {
  const Json p = prov_object(prov);
  for (const auto& r : trace.records) {
    Json j;
    j["algorithm"] = trace.algorithm;
    j["N"] = tag.n;
    j["trial"] = tag.trial;
    j["k"] = r.k;
    j["gamma1"] = number(r.gamma1);
    j["gamma2"] = number(r.gamma2);
    j["tau1"] = number(r.tau1);
    j["tau2"] = number(r.tau2);
    j["alpha1"] = number(r.alpha1);
    j["alpha2"] = number(r.alpha2);
    j["beta1"] = number(r.beta1);
    j["beta2"] = number(r.beta2);
    j["eta1"] = number(r.eta1);
    j["eta2"] = number(r.eta2);
    j["mse_x1"] = number(r.mse_x1);
    j["mse_x2"] = number(r.mse_x2);
    j["mse_z1"] = number(r.mse_z1);
    j["termination"] = std::string(to_string(trace.termination));
    j["provenance"] = p;
    out << j.dump() << '\n';
  }
}

void write_general_jsonl(std::ostream& out, const std::vector<GeneralState>& states, const std::string& algorithm,
                         const RunTag& tag, const Provenance& prov) {
  const Json p = prov_object(prov);
  for (const auto& st : states) {
    Json j;
    j["algorithm"] = algorithm;
    j["N"] = tag.n;
    j["trial"] = tag.trial;
    j["k"] = st.k;
    const int d = static_cast<int>(st.p_in.cols());
    auto put = [&](const char* name, const Vec2& v) {
      for (int c = 0; c < d; ++c) j[vec2_key(name, c)] = number(v[static_cast<std::size_t>(c)]);
    };
    put("alpha_p_in", st.alpha_p_in);
    put("gamma_p_in", st.gamma_p_in);
    put("alpha_q_in", st.alpha_q_in);
    put("gamma_q_in", st.gamma_q_in);
    if (st.p_out.size() > 0) {
      put("alpha_p_out", st.alpha_p_out);
      put("gamma_p_out", st.gamma_p_out);
      put("alpha_q_out", st.alpha_q_out);
      put("gamma_q_out", st.gamma_q_out);
    }
    j["p_in_sq"] = number(st.p_in.col(0).squaredNorm() / static_cast<double>(st.p_in.rows()));
    j["provenance"] = p;
    out << j.dump() << '\n';
  }
}

void write_records_jsonl(std::ostream& out, const std::vector<TrialRecord>& records, const Provenance& prov) {
  const Json p = prov_object(prov);
  for (const auto& r : records) {
    Json j;
    j["seed"] = r.seed;
    j["trial"] = r.trial;
    j["N"] = r.n;
    j["k"] = r.k;
    j["functional"] = r.functional;
    j["empirical"] = number(r.empirical);
    j["prediction"] = number(r.prediction);
    j["deviation"] = number(r.deviation);
    j["provenance"] = p;
    out << j.dump() << '\n';
  }
}

void write_se_csv(std::ostream& out, const SETrajectory& se) {
  std::vector<std::string> header{"k"};
  for (const auto& f : kSeFields) header.emplace_back(f.name);
  if (se.has_stderr())
    for (const auto& f : kSeFields) header.push_back(std::string("stderr_") + f.name);
  out << csv_line(header);
  for (std::size_t i = 0; i < se.steps.size(); ++i) {
    std::vector<std::string> row{std::to_string(se.steps[i].k)};
    for (const auto& f : kSeFields) row.push_back(cell(se.steps[i].*f.member));
    if (se.has_stderr())
      for (const auto& f : kSeFields) row.push_back(cell(se.stderr_steps[i].*f.member));
    out << csv_line(row);
  }
}

void write_summary_csv(std::ostream& out, const DeviationSummary& summary) {
  std::vector<std::string> header{"N", "k", "functional", "count", "median_dev", "mean_dev", "q10", "q25", "q75", "q90"};
  for (double e : summary.epsilons) header.push_back(fmt::format("p_tail@{}", e));
  header.emplace_back("slope");
  out << csv_line(header);
  for (const auto& r : summary.rows) {
    std::vector<std::string> row{std::to_string(r.n), std::to_string(r.k), r.functional, std::to_string(r.count),
                                 cell(r.median),      cell(r.mean),        cell(r.q10),  cell(r.q25),
                                 cell(r.q75),         cell(r.q90)};
    for (double t : r.tail) row.push_back(cell(t));
    row.push_back(r.slope ? cell(*r.slope) : std::string());
    out << csv_line(row);
  }
}

std::string translation_report_json(const TranslationReport& rep, const Provenance& prov) {
  Json j;
  j["algorithm"] = rep.algorithm;
  j["iterations"] = rep.iterations;
  j["tolerance"] = rep.tolerance;
  j["max_discrepancy"] = number(rep.max_discrepancy);
  j["column2_error"] = number(rep.column2_error);
  j["pass"] = rep.pass;
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    Json o;
    o["k"] = r.k;
    o["r1"] = number(r.r1);
    o["r2"] = number(r.r2);
    o["p1"] = number(r.p1);
    o["p2"] = number(r.p2);
    o["scalars"] = number(r.scalars);
    rows.push_back(o);
  }
  j["rows"] = rows;
  j["provenance"] = prov_object(prov);
  return j.dump(2) + "\n";
}

std::string provenance_json(const Provenance& prov) { return prov_object(prov).dump(2) + "\n"; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io_error, "cannot write '" + path + "'", "--out");
  f << text;
  if (!f) fail(ErrorKind::io_error, "write failed for '" + path + "'", "--out");
}

void write_with_sidecar(const std::string& path, const std::string& text, const Provenance& prov) {
  write_text_file(path, text);
  write_text_file(path + ".provenance.json", provenance_json(prov));
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_escape(fields[i]);
  }
  return out + "\r\n";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) fail(ErrorKind::invalid_parameter, "csv: unterminated quoted field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, std::string> plotdata_from_summary(const std::string& summary_csv) {
  const std::string header = csv_line({"x", "y", "series"});
  std::map<std::string, std::string> figures;
  figures["median_deviation"] = header;
  auto rows = parse_csv(summary_csv);
  if (rows.empty()) return figures;
  const auto& head = rows.front();
  auto column = [&](const std::string& name) -> long {
    for (std::size_t i = 0; i < head.size(); ++i)
      if (head[i] == name) return static_cast<long>(i);
    return -1;
  };
  long cn = column("N"), ck = column("k"), cf = column("functional"), cm = column("median_dev");
  if (cn < 0 || ck < 0 || cf < 0 || cm < 0)
    fail(ErrorKind::invalid_parameter, "summary csv lacks N, k, functional or median_dev");
  std::vector<std::pair<std::string, long>> tails;
  for (std::size_t i = 0; i < head.size(); ++i)
    if (head[i].rfind("p_tail@", 0) == 0) {
      std::string name = "tail_" + head[i].substr(7);
      figures[name] = header;
      tails.emplace_back(name, static_cast<long>(i));
    }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != head.size()) fail(ErrorKind::invalid_parameter, fmt::format("summary csv row {} is ragged", r));
    std::string series = row[static_cast<std::size_t>(cf)] + " k=" + row[static_cast<std::size_t>(ck)];
    const std::string& x = row[static_cast<std::size_t>(cn)];
    figures["median_deviation"] += csv_line({x, row[static_cast<std::size_t>(cm)], series});
    for (const auto& [name, col] : tails) figures[name] += csv_line({x, row[static_cast<std::size_t>(col)], series});
  }
  return figures;
}

}  // namespace mpforge
