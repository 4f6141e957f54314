#include "mmnl/data_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mmnl/errors.hpp"
#include "mmnl/linalg.hpp"
#include "mmnl/model.hpp"
#include "mmnl/parallel.hpp"

namespace mmnl {

namespace {

using nlohmann::json;

constexpr const char* kFitVersion = "mmnl-fit/1";
constexpr const char* kTruthVersion = "mmnl-truth/1";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

void write_comment(std::ofstream& out, const std::string& comment) {
  if (comment.empty()) return;
  std::istringstream lines(comment);
  std::string line;
  while (std::getline(lines, line)) out << "# " << line << "\n";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, std::size_t line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    std::ostringstream os;
    os << "line " << line_no << ": cannot parse " << what << " from '" << s << "'";
    throw DataFormatError(os.str());
  }
}

long long parse_int(const std::string& s, std::size_t line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    std::ostringstream os;
    os << "line " << line_no << ": cannot parse " << what << " from '" << s << "'";
    throw DataFormatError(os.str());
  }
}

json matrix_to_json(const Matrix& m, bool spd) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["row_major"] = data;
  j["spd"] = spd;
  return j;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("row_major")) {
    throw DataFormatError(std::string(what) + ": malformed matrix object");
  }
  const Eigen::Index rows = j["rows"].get<Eigen::Index>();
  const Eigen::Index cols = j["cols"].get<Eigen::Index>();
  const auto data = j["row_major"].get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataFormatError(std::string(what) + ": matrix payload size mismatch");
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  }
  if (j.value("spd", false) && !is_spd(m)) {
    throw DataFormatError(std::string(what) +
                          ": matrix flagged SPD fails the SPD check on reload");
  }
  return m;
}

json vector_to_json(const Vector& v) {
  std::vector<double> data(v.data(), v.data() + v.size());
  return json(data);
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataFormatError(std::string(what) + ": expected array");
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

double json_double_or_nan(const json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

}  // namespace

void SimSpec::validate() const {
  if (H < 1 || J < 2 || K < 1) throw std::invalid_argument("SimSpec: need H>=1, J>=2, K>=1");
  if (T_min < 0 || T_max < T_min) throw std::invalid_argument("SimSpec: bad event range");
  if (zeta_true.size() != K) throw std::invalid_argument("SimSpec: zeta_true size mismatch");
  if (Omega_true.rows() != K || Omega_true.cols() != K) {
    throw std::invalid_argument("SimSpec: Omega_true size mismatch");
  }
  if (!Omega_true.isZero(0.0) && !is_spd(Omega_true)) {
    throw std::invalid_argument("SimSpec: Omega_true must be SPD (or exactly zero)");
  }
  if (!(covariate_sd > 0.0)) throw std::invalid_argument("SimSpec: covariate_sd must be positive");
}

SimulatedData simulate_dataset(const SimSpec& spec) {
  spec.validate();
  const bool degenerate = spec.Omega_true.isZero(0.0);
  Matrix chol_lower = Matrix::Zero(spec.K, spec.K);
  if (!degenerate) {
    chol_lower = spd_cholesky(spec.Omega_true, "simulate_dataset Omega_true").matrixL();
  }

  SimulatedData out;
  out.dataset.J = spec.J;
  out.dataset.K = spec.K;
  out.dataset.agents.resize(spec.H);
  out.truth.zeta = spec.zeta_true;
  out.truth.Omega = spec.Omega_true;
  out.truth.betas.resize(spec.H);
  out.truth.agent_ids.resize(spec.H);
  out.truth.seed = spec.seed;

  parallel_for(static_cast<std::size_t>(spec.H), 0, [&](std::size_t h) {
    RngStream rng = RngStream::derive(spec.seed, RngDomain::kSimulation,
                                      static_cast<std::uint64_t>(h));
    AgentData agent;
    agent.agent_id = static_cast<std::int64_t>(h) + 1;
    Vector beta = spec.zeta_true;
    if (!degenerate) beta += chol_lower * rng.normal_vector(spec.K);
    const int T = spec.T_max == spec.T_min
                      ? spec.T_min
                      : spec.T_min + static_cast<int>(rng.uniform_int(
                                         static_cast<std::uint64_t>(spec.T_max - spec.T_min + 1)));
    agent.events.resize(T);
    for (int t = 0; t < T; ++t) {
      ChoiceEvent& ev = agent.events[t];
      ev.event_id = t + 1;
      ev.x.resize(spec.J, spec.K);
      for (int j = 0; j < spec.J; ++j) {
        for (int k = 0; k < spec.K; ++k) ev.x(j, k) = spec.covariate_sd * rng.normal();
      }
      const Vector p = choice_probabilities(ev.x, beta);
      const double u = rng.uniform();
      double cum = 0.0;
      ev.chosen = spec.J - 1;
      for (int j = 0; j < spec.J; ++j) {
        cum += p[j];
        if (u < cum) {
          ev.chosen = j;
          break;
        }
      }
    }
    out.dataset.agents[h] = std::move(agent);
    out.truth.betas[h] = beta;
    out.truth.agent_ids[h] = static_cast<std::int64_t>(h) + 1;
  });
  return out;
}

void save_dataset(const ChoiceDataset& dataset, const std::string& path,
                  const std::string& comment) {
  auto out = open_out(path);
  write_comment(out, comment);
  out << "agent_id,event_id,alt_id,chosen";
  for (int k = 1; k <= dataset.K; ++k) out << ",x" << k;
  out << "\n";
  for (const auto& agent : dataset.agents) {
    for (const auto& ev : agent.events) {
      for (int j = 0; j < dataset.J; ++j) {
        out << agent.agent_id << "," << ev.event_id << "," << j << ","
            << (ev.chosen == j ? 1 : 0);
        for (int k = 0; k < dataset.K; ++k) out << "," << ev.x(j, k);
        out << "\n";
      }
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

ChoiceDataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;

  // Header (after comments).
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 5 || header[0] != "agent_id" || header[1] != "event_id" ||
      header[2] != "alt_id" || header[3] != "chosen") {
    throw DataFormatError("line " + std::to_string(line_no) +
                          ": expected header agent_id,event_id,alt_id,chosen,x1..xK");
  }
  const int K = static_cast<int>(header.size()) - 4;
  for (int k = 0; k < K; ++k) {
    if (header[4 + k] != "x" + std::to_string(k + 1)) {
      throw DataFormatError("line " + std::to_string(line_no) +
                            ": covariate columns must be named x1..xK");
    }
  }

  struct RawRow {
    int alt;
    int chosen;
    Vector x;
    std::size_t line_no;
  };
  struct RawEvent {
    std::map<int, RawRow> rows;  // keyed by alt id
  };
  struct RawAgent {
    std::map<std::int64_t, RawEvent> events;
  };
  std::vector<std::int64_t> agent_order;
  std::unordered_map<std::int64_t, RawAgent> agents;
  std::size_t data_rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != 4 + K) {
      std::ostringstream os;
      os << "line " << line_no << ": expected " << 4 + K << " fields, found "
         << fields.size();
      throw DataFormatError(os.str());
    }
    RawRow row;
    const std::int64_t agent_id = parse_int(fields[0], line_no, "agent_id");
    const std::int64_t event_id = parse_int(fields[1], line_no, "event_id");
    row.alt = static_cast<int>(parse_int(fields[2], line_no, "alt_id"));
    row.chosen = static_cast<int>(parse_int(fields[3], line_no, "chosen"));
    if (row.chosen != 0 && row.chosen != 1) {
      throw DataFormatError("line " + std::to_string(line_no) + ": chosen must be 0 or 1");
    }
    row.x.resize(K);
    for (int k = 0; k < K; ++k) {
      row.x[k] = parse_double(fields[4 + k], line_no, "covariate");
    }
    row.line_no = line_no;
    auto [it, inserted] = agents.try_emplace(agent_id);
    if (inserted) agent_order.push_back(agent_id);
    auto& event = it->second.events[event_id];
    if (!event.rows.emplace(row.alt, std::move(row)).second) {
      std::ostringstream os;
      os << "line " << line_no << ": duplicate alternative " << fields[2]
         << " for agent " << agent_id << " event " << event_id;
      throw DataFormatError(os.str());
    }
    ++data_rows;
  }
  if (agent_order.empty()) throw DataFormatError(path + ": no data rows");

  // J from the first event of the first agent.
  const auto& first_agent = agents.at(agent_order.front());
  const int J = static_cast<int>(first_agent.events.begin()->second.rows.size());
  if (J < 2) throw DataFormatError(path + ": events must list at least 2 alternatives");

  ChoiceDataset dataset;
  dataset.J = J;
  dataset.K = K;
  std::size_t assembled_rows = 0;
  for (const std::int64_t agent_id : agent_order) {
    AgentData agent;
    agent.agent_id = agent_id;
    for (const auto& [event_id, raw_event] : agents.at(agent_id).events) {
      if (static_cast<int>(raw_event.rows.size()) != J) {
        std::ostringstream os;
        os << "agent " << agent_id << " event " << event_id << ": found "
           << raw_event.rows.size() << " alternatives, expected " << J;
        throw DataFormatError(os.str());
      }
      ChoiceEvent ev;
      ev.event_id = event_id;
      ev.x.resize(J, K);
      int chosen_count = 0;
      for (const auto& [alt, row] : raw_event.rows) {
        if (alt < 0 || alt >= J) {
          std::ostringstream os;
          os << "line " << row.line_no << ": alt_id " << alt
             << " outside 0.." << J - 1;
          throw DataFormatError(os.str());
        }
        ev.x.row(alt) = row.x.transpose();
        if (row.chosen == 1) {
          ev.chosen = alt;
          ++chosen_count;
        }
        ++assembled_rows;
      }
      if (chosen_count != 1) {
        std::ostringstream os;
        os << "agent " << agent_id << " event " << event_id << ": " << chosen_count
           << " alternatives marked chosen, expected exactly 1";
        throw DataFormatError(os.str());
      }
      agent.events.push_back(std::move(ev));
    }
    dataset.agents.push_back(std::move(agent));
  }
  if (assembled_rows != data_rows) {
    throw DataFormatError(path + ": row count mismatch after assembly");
  }
  dataset.validate();
  return dataset;
}

void save_truth(const TruthRecord& truth, const std::string& path,
                const std::string& comment) {
  json j;
  j["format_version"] = kTruthVersion;
  if (!comment.empty()) {
    json parsed = json::parse(comment, nullptr, false);
    if (parsed.is_discarded()) {
      j["config"] = comment;
    } else {
      j["config"] = std::move(parsed);
    }
  }
  j["seed"] = truth.seed;
  j["zeta"] = vector_to_json(truth.zeta);
  j["Omega"] = matrix_to_json(truth.Omega, !truth.Omega.isZero(0.0));
  j["agent_ids"] = truth.agent_ids;
  json betas = json::array();
  for (const auto& b : truth.betas) betas.push_back(vector_to_json(b));
  j["betas"] = betas;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

TruthRecord load_truth(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataFormatError(path + ": " + e.what());
  }
  if (j.value("format_version", "") != kTruthVersion) {
    throw DataFormatError(path + ": incompatible format_version, expected " +
                          std::string(kTruthVersion));
  }
  TruthRecord t;
  t.seed = j.value("seed", 0ULL);
  t.zeta = vector_from_json(j.at("zeta"), "truth zeta");
  t.Omega = matrix_from_json(j.at("Omega"), "truth Omega");
  t.agent_ids = j.at("agent_ids").get<std::vector<std::int64_t>>();
  for (const auto& b : j.at("betas")) t.betas.push_back(vector_from_json(b, "truth beta"));
  return t;
}

void save_fit(const FitBundle& bundle, const std::string& path) {
  json j;
  j["format_version"] = kFitVersion;
  j["backend"] = backend_name(bundle.fit.backend);
  j["seed"] = bundle.fit.seed;
  j["converged"] = bundle.fit.converged;
  j["total_seconds"] = bundle.fit.total_seconds;
  j["J"] = bundle.J;
  j["K"] = bundle.K;
  j["H"] = bundle.fit.locals.size();
  if (!bundle.config_echo.empty()) {
    json parsed = json::parse(bundle.config_echo, nullptr, false);
    if (parsed.is_discarded()) {
      j["config"] = bundle.config_echo;
    } else {
      j["config"] = std::move(parsed);
    }
  }

  json priors;
  priors["mu0"] = vector_to_json(bundle.priors.mu0);
  priors["Sigma0"] = matrix_to_json(bundle.priors.Sigma0, true);
  priors["nu"] = bundle.priors.nu;
  priors["A"] = vector_to_json(bundle.priors.A);
  j["hyperpriors"] = priors;

  json global;
  global["mu_zeta"] = vector_to_json(bundle.fit.global.mu_zeta);
  global["Sigma_zeta"] = matrix_to_json(bundle.fit.global.Sigma_zeta, true);
  global["omega"] = bundle.fit.global.omega;
  global["Upsilon"] = matrix_to_json(bundle.fit.global.Upsilon, true);
  global["b"] = vector_to_json(bundle.fit.global.b);
  global["c"] = vector_to_json(bundle.fit.global.c);
  j["global"] = global;

  json locals = json::array();
  for (std::size_t h = 0; h < bundle.fit.locals.size(); ++h) {
    json l;
    l["agent_id"] = h < bundle.agent_ids.size()
                        ? bundle.agent_ids[h]
                        : static_cast<std::int64_t>(h) + 1;
    l["mu"] = vector_to_json(bundle.fit.locals[h].mu);
    l["Sigma"] = matrix_to_json(bundle.fit.locals[h].Sigma, true);
    locals.push_back(std::move(l));
  }
  j["locals"] = locals;

  json diag;
  diag["jitter_events"] = bundle.fit.diagnostics.jitter_events;
  diag["slr_rejections"] = bundle.fit.diagnostics.slr_rejections;
  j["diagnostics"] = diag;

  json trace = json::array();
  for (const auto& rec : bundle.fit.trace) {
    json r;
    r["iteration"] = rec.iteration;
    r["batch_size"] = rec.batch_size;
    r["alpha"] = rec.alpha;
    r["xi"] = rec.xi;
    r["min_ratio"] = rec.min_ratio;
    r["lower_bound"] = rec.lower_bound;
    r["wall_time_s"] = rec.wall_time_s;
    r["theta"] = vector_to_json(rec.theta);
    trace.push_back(std::move(r));
  }
  j["trace"] = trace;

  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

FitBundle load_fit(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataFormatError(path + ": " + e.what());
  }
  if (j.value("format_version", "") != kFitVersion) {
    throw DataFormatError(path + ": incompatible format_version, expected " +
                          std::string(kFitVersion));
  }
  FitBundle b;
  b.fit.backend = backend_from_name(j.at("backend").get<std::string>());
  b.fit.seed = j.value("seed", 0ULL);
  b.fit.converged = j.value("converged", false);
  b.fit.total_seconds = j.value("total_seconds", 0.0);
  b.J = j.at("J").get<int>();
  b.K = j.at("K").get<int>();
  if (j.contains("config")) b.config_echo = j["config"].dump();

  const auto& priors = j.at("hyperpriors");
  b.priors.mu0 = vector_from_json(priors.at("mu0"), "fit mu0");
  b.priors.Sigma0 = matrix_from_json(priors.at("Sigma0"), "fit Sigma0");
  b.priors.nu = priors.at("nu").get<double>();
  b.priors.A = vector_from_json(priors.at("A"), "fit A");

  const auto& global = j.at("global");
  b.fit.global.mu_zeta = vector_from_json(global.at("mu_zeta"), "fit mu_zeta");
  b.fit.global.Sigma_zeta = matrix_from_json(global.at("Sigma_zeta"), "fit Sigma_zeta");
  b.fit.global.omega = global.at("omega").get<double>();
  b.fit.global.b = vector_from_json(global.at("b"), "fit b");
  b.fit.global.c = vector_from_json(global.at("c"), "fit c");
  b.fit.global.set_upsilon(matrix_from_json(global.at("Upsilon"), "fit Upsilon"));

  for (const auto& l : j.at("locals")) {
    LocalVarParams local;
    local.mu = vector_from_json(l.at("mu"), "fit local mu");
    local.Sigma = matrix_from_json(l.at("Sigma"), "fit local Sigma");
    b.fit.locals.push_back(std::move(local));
    b.agent_ids.push_back(l.at("agent_id").get<std::int64_t>());
  }

  const auto& diag = j.at("diagnostics");
  b.fit.diagnostics.jitter_events = diag.value("jitter_events", 0);
  b.fit.diagnostics.slr_rejections = diag.value("slr_rejections", 0);

  for (const auto& r : j.at("trace")) {
    TraceRecord rec;
    rec.iteration = r.at("iteration").get<int>();
    rec.batch_size = r.at("batch_size").get<int>();
    rec.alpha = r.at("alpha").get<double>();
    rec.xi = json_double_or_nan(r.at("xi"));
    rec.min_ratio = json_double_or_nan(r.at("min_ratio"));
    rec.lower_bound = json_double_or_nan(r.at("lower_bound"));
    rec.wall_time_s = r.at("wall_time_s").get<double>();
    rec.theta = vector_from_json(r.at("theta"), "fit trace theta");
    b.fit.trace.push_back(std::move(rec));
  }
  return b;
}

void save_draws(const PosteriorDraws& draws, const std::string& path,
                const std::string& comment) {
  auto out = open_out(path);
  write_comment(out, comment);
  const int K = draws.K;
  out << "chain,draw";
  for (int k = 1; k <= K; ++k) out << ",zeta_" << k;
  for (int c = 1; c <= K; ++c) {
    for (int r = c; r <= K; ++r) out << ",omega_" << r << c;
  }
  for (int k = 1; k <= K; ++k) out << ",a_" << k;
  out << "\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& chain = draws.chains[c];
    for (std::size_t d = 0; d < chain.zeta.size(); ++d) {
      out << c + 1 << "," << d + 1;
      for (int k = 0; k < K; ++k) out << "," << chain.zeta[d][k];
      for (int col = 0; col < K; ++col) {
        for (int row = col; row < K; ++row) out << "," << chain.omega[d](row, col);
      }
      for (int k = 0; k < K; ++k) out << "," << chain.a[d][k];
      out << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

PosteriorDraws load_draws(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 4 || header[0] != "chain" || header[1] != "draw") {
    throw DataFormatError(path + ": expected draws header chain,draw,zeta_..");
  }
  int K = 0;
  while (2 + K < static_cast<int>(header.size()) &&
         header[2 + K] == "zeta_" + std::to_string(K + 1)) {
    ++K;
  }
  if (K == 0) throw DataFormatError(path + ": no zeta columns found");
  const int expected = 2 + K + K * (K + 1) / 2 + K;
  if (static_cast<int>(header.size()) != expected) {
    throw DataFormatError(path + ": unexpected number of columns");
  }

  PosteriorDraws draws;
  draws.K = K;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != expected) {
      throw DataFormatError("line " + std::to_string(line_no) + ": wrong field count");
    }
    const int chain = static_cast<int>(parse_int(fields[0], line_no, "chain"));
    if (chain < 1) throw DataFormatError("line " + std::to_string(line_no) + ": bad chain");
    if (static_cast<int>(draws.chains.size()) < chain) draws.chains.resize(chain);
    auto& cd = draws.chains[chain - 1];
    int pos = 2;
    Vector zeta(K);
    for (int k = 0; k < K; ++k) zeta[k] = parse_double(fields[pos++], line_no, "zeta");
    Matrix omega(K, K);
    for (int col = 0; col < K; ++col) {
      for (int row = col; row < K; ++row) {
        const double v = parse_double(fields[pos++], line_no, "omega");
        omega(row, col) = v;
        omega(col, row) = v;
      }
    }
    Vector a(K);
    for (int k = 0; k < K; ++k) a[k] = parse_double(fields[pos++], line_no, "a");
    cd.zeta.push_back(std::move(zeta));
    cd.omega.push_back(std::move(omega));
    cd.a.push_back(std::move(a));
  }
  if (draws.chains.empty()) throw DataFormatError(path + ": no draws");
  return draws;
}

void save_trace_csv(const FitResult& fit, const std::string& path,
                    const std::string& comment) {
  auto out = open_out(path);
  write_comment(out, comment);
  out << "iteration,batch_size,alpha,xi,min_ratio,lower_bound,wall_time_s\n";
  for (const auto& rec : fit.trace) {
    out << rec.iteration << "," << rec.batch_size << "," << rec.alpha << ","
        << rec.xi << "," << rec.min_ratio << "," << rec.lower_bound << ","
        << rec.wall_time_s << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mmnl
